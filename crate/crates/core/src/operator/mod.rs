//! FNO and IFNO models: hyperparameters, parameter storage and initialization.
//!
//! All trainable scalars live in one flat `Vec<f64>` in the fixed order
//! `P, p, [W, R_re, R_im, c] per block, Q1, q1, Q2, q2`. An FNO has one block
//! per layer; an IFNO has a single shared block regardless of depth. Complex
//! kernels `R[o][i][m1][m2]` are stored as a real-part array followed by an
//! imaginary-part array.

mod checkpoint;
mod layers;

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::randfield::RngStream;

pub use layers::{fno_layer, ifno_layer, lift, project, spectral_conv, Block, BlockView, SpectralKernel};
pub(crate) use layers::{gemm, view};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Fno,
    Ifno,
}

impl Variant {
    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::Fno => "fno",
            Variant::Ifno => "ifno",
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Variant {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fno" => Ok(Variant::Fno),
            "ifno" => Ok(Variant::Ifno),
            other => invalid(format!("unknown variant {other:?}, expected fno or ifno")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HyperParams {
    /// Lifted channel width.
    pub d: usize,
    pub d_f: usize,
    pub d_u: usize,
    /// Hidden width of the projection network.
    pub d_q: usize,
    pub k1: usize,
    pub k2: usize,
    /// Number of iterative layers.
    pub layers: usize,
    pub variant: Variant,
}

impl HyperParams {
    /// Setting-I architecture: `d = 32`, `k = 9 x 9`, inputs `[x, y, b]`.
    pub fn darcy_setting1(variant: Variant, layers: usize) -> Self {
        Self { d: 32, d_f: 3, d_u: 1, d_q: 128, k1: 9, k2: 9, layers, variant }
    }

    /// Setting-II architecture: `d = 32`, `k = 12 x 12`, inputs `[x, y, g, u_D]`.
    pub fn darcy_setting2(variant: Variant, layers: usize) -> Self {
        Self { d: 32, d_f: 4, d_u: 1, d_q: 128, k1: 12, k2: 12, layers, variant }
    }

    pub fn with_depth(self, layers: usize) -> Self {
        Self { layers, ..self }
    }

    pub fn modes(&self) -> usize {
        self.k1 * self.k2
    }

    /// IFNO step size `1 / L` (total time fixed at one).
    pub fn dt(&self) -> f64 {
        if self.layers == 0 {
            0.0
        } else {
            1.0 / self.layers as f64
        }
    }

    pub fn n_blocks(&self) -> usize {
        match self.variant {
            Variant::Fno => self.layers,
            Variant::Ifno => 1,
        }
    }

    /// Index of the parameter block used by layer `l`.
    pub fn block_of(&self, l: usize) -> usize {
        match self.variant {
            Variant::Fno => l,
            Variant::Ifno => 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [self.d, self.d_f, self.d_u, self.d_q, self.k1, self.k2];
        if positive.contains(&0) {
            return invalid(format!("hyperparameters must be positive: {self:?}"));
        }
        Ok(())
    }
}

/// Closed-form trainable parameter count, complex entries counted twice.
pub fn count_params(h: &HyperParams) -> usize {
    let (d, k) = (h.d, h.modes());
    let lifting = d * (1 + h.d_f);
    let block = d + d * d + 2 * d * d * k;
    let projection = h.d_q * (d + h.d_u + 1) + h.d_u;
    lifting + h.n_blocks() * block + projection
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    pub w: Range<usize>,
    pub r_re: Range<usize>,
    pub r_im: Range<usize>,
    pub c: Range<usize>,
}

/// Offsets of every tensor inside the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    pub lift_w: Range<usize>,
    pub lift_b: Range<usize>,
    pub blocks: Vec<BlockLayout>,
    pub proj1_w: Range<usize>,
    pub proj1_b: Range<usize>,
    pub proj2_w: Range<usize>,
    pub proj2_b: Range<usize>,
    pub total: usize,
}

impl ParamLayout {
    pub fn new(h: &HyperParams) -> Self {
        let mut at = 0;
        let mut take = |n: usize| {
            let r = at..at + n;
            at += n;
            r
        };
        let (d, k) = (h.d, h.modes());
        let lift_w = take(d * h.d_f);
        let lift_b = take(d);
        let blocks = (0..h.n_blocks())
            .map(|_| BlockLayout { w: take(d * d), r_re: take(d * d * k), r_im: take(d * d * k), c: take(d) })
            .collect();
        let proj1_w = take(h.d_q * d);
        let proj1_b = take(h.d_q);
        let proj2_w = take(h.d_u * h.d_q);
        let proj2_b = take(h.d_u);
        Self { lift_w, lift_b, blocks, proj1_w, proj1_b, proj2_w, proj2_b, total: at }
    }

    /// Named tensors in storage order.
    pub fn tensors(&self) -> Vec<(String, Range<usize>)> {
        let mut out = vec![("P".to_string(), self.lift_w.clone()), ("p".to_string(), self.lift_b.clone())];
        for (l, b) in self.blocks.iter().enumerate() {
            out.push((format!("W[{l}]"), b.w.clone()));
            out.push((format!("R_re[{l}]"), b.r_re.clone()));
            out.push((format!("R_im[{l}]"), b.r_im.clone()));
            out.push((format!("c[{l}]"), b.c.clone()));
        }
        out.push(("Q1".to_string(), self.proj1_w.clone()));
        out.push(("q1".to_string(), self.proj1_b.clone()));
        out.push(("Q2".to_string(), self.proj2_w.clone()));
        out.push(("q2".to_string(), self.proj2_b.clone()));
        out
    }
}

/// Per-channel affine standardization of inputs and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub in_mean: Vec<f64>,
    pub in_std: Vec<f64>,
    pub out_mean: Vec<f64>,
    pub out_std: Vec<f64>,
}

impl Normalization {
    pub fn identity(d_f: usize, d_u: usize) -> Self {
        Self { in_mean: vec![0.0; d_f], in_std: vec![1.0; d_f], out_mean: vec![0.0; d_u], out_std: vec![1.0; d_u] }
    }

    /// Channel means and standard deviations over every node of every sample.
    /// Channels with (near) zero spread keep a unit scale.
    pub fn fit(samples: &[crate::darcy::Sample]) -> Result<Self> {
        let Some(first) = samples.first() else {
            return invalid("cannot fit normalization on an empty split");
        };
        let stats = |get: &dyn Fn(&crate::darcy::Sample) -> &crate::GridField2D, channels: usize| {
            let mut mean = vec![0.0; channels];
            let mut std = vec![0.0; channels];
            for c in 0..channels {
                let (mut s, mut n) = (0.0, 0usize);
                for smp in samples {
                    let ch = get(smp).channel(c);
                    s += ch.iter().sum::<f64>();
                    n += ch.len();
                }
                let m = s / n as f64;
                let mut v = 0.0;
                for smp in samples {
                    v += get(smp).channel(c).iter().map(|x| (x - m) * (x - m)).sum::<f64>();
                }
                let sd = (v / n as f64).sqrt();
                mean[c] = m;
                std[c] = if sd > 1e-12 * (1.0 + m.abs()) { sd } else { 1.0 };
            }
            (mean, std)
        };
        let (in_mean, in_std) = stats(&|s| &s.input, first.input.channels());
        let (out_mean, out_std) = stats(&|s| &s.output, first.output.channels());
        Ok(Self { in_mean, in_std, out_mean, out_std })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorModel {
    hyper: HyperParams,
    layout: ParamLayout,
    pub norm: Normalization,
    params: Vec<f64>,
}

/// Stream index reserved for parameter initialization draws.
const INIT_STREAM: u64 = 0x1F40_0000_0000_0001;

impl OperatorModel {
    /// All-zero parameters with identity normalization.
    pub fn zeros(hyper: HyperParams) -> Result<Self> {
        hyper.validate()?;
        let layout = ParamLayout::new(&hyper);
        let params = vec![0.0; layout.total];
        Ok(Self { hyper, norm: Normalization::identity(hyper.d_f, hyper.d_u), layout, params })
    }

    /// Random initialization: Glorot-uniform weight matrices, zero biases,
    /// kernel real and imaginary parts uniform on `[-1/d^2, 1/d^2]`.
    pub fn init(hyper: HyperParams, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(hyper)?;
        let mut draws = RngStream::new(seed, INIT_STREAM).draws();
        let glorot = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();
        let d = hyper.d;
        let layout = model.layout.clone();
        let mut fill = |range: Range<usize>, bound: f64, params: &mut [f64]| {
            for v in &mut params[range] {
                *v = draws.uniform_in(-bound, bound);
            }
        };
        fill(layout.lift_w.clone(), glorot(hyper.d_f, d), &mut model.params);
        let kernel_scale = 1.0 / (d * d) as f64;
        for b in &layout.blocks {
            fill(b.w.clone(), glorot(d, d), &mut model.params);
            fill(b.r_re.clone(), kernel_scale, &mut model.params);
            fill(b.r_im.clone(), kernel_scale, &mut model.params);
        }
        fill(layout.proj1_w.clone(), glorot(d, hyper.d_q), &mut model.params);
        fill(layout.proj2_w.clone(), glorot(hyper.d_q, hyper.d_u), &mut model.params);
        Ok(model)
    }

    pub fn from_parts(hyper: HyperParams, norm: Normalization, params: Vec<f64>) -> Result<Self> {
        hyper.validate()?;
        let layout = ParamLayout::new(&hyper);
        if params.len() != layout.total {
            return invalid(format!("expected {} parameters, got {}", layout.total, params.len()));
        }
        if norm.in_mean.len() != hyper.d_f
            || norm.in_std.len() != hyper.d_f
            || norm.out_mean.len() != hyper.d_u
            || norm.out_std.len() != hyper.d_u
        {
            return invalid("normalization statistics do not match channel counts");
        }
        Ok(Self { hyper, layout, norm, params })
    }

    pub fn hyper(&self) -> &HyperParams {
        &self.hyper
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Number of stored scalars; equals [`count_params`] by construction.
    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn lift_weight(&self) -> &[f64] {
        &self.params[self.layout.lift_w.clone()]
    }

    pub fn block(&self, index: usize) -> BlockView<'_> {
        let b = &self.layout.blocks[index];
        let h = &self.hyper;
        BlockView {
            w: &self.params[b.w.clone()],
            kernel: SpectralKernel {
                d_out: h.d,
                d_in: h.d,
                k1: h.k1,
                k2: h.k2,
                re: &self.params[b.r_re.clone()],
                im: &self.params[b.r_im.clone()],
            },
            c: &self.params[b.c.clone()],
        }
    }

    /// Mutable access to one named tensor range.
    pub fn tensor_mut(&mut self, range: Range<usize>) -> &mut [f64] {
        &mut self.params[range]
    }

    /// Same parameters at a new depth. Only meaningful for IFNO, whose
    /// parameter set does not depend on depth.
    pub(crate) fn with_layers(&self, layers: usize) -> Result<Self> {
        if self.hyper.variant != Variant::Ifno {
            return invalid("changing depth in place requires layer-independent (IFNO) parameters");
        }
        let mut hyper = self.hyper;
        hyper.layers = layers;
        Self::from_parts(hyper, self.norm.clone(), self.params.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_parameter_counts() {
        assert_eq!(count_params(&HyperParams::darcy_setting1(Variant::Ifno, 7)), 171_425);
        assert_eq!(count_params(&HyperParams::darcy_setting1(Variant::Fno, 2)), 338_369);
        assert_eq!(count_params(&HyperParams::darcy_setting2(Variant::Ifno, 3)), 300_481);
    }

    #[test]
    fn materialized_size_matches_formula() {
        for variant in [Variant::Fno, Variant::Ifno] {
            for layers in [1, 2, 4, 8, 16, 32] {
                let mut h = HyperParams::darcy_setting1(variant, layers);
                h.d = 4;
                h.d_q = 8;
                let m = OperatorModel::zeros(h).unwrap();
                assert_eq!(m.num_params(), count_params(&h));
                let summed: usize = m.layout().tensors().iter().map(|(_, r)| r.len()).sum();
                assert_eq!(summed, count_params(&h));
            }
        }
    }

    #[test]
    fn init_is_seeded_and_bounded() {
        let h = HyperParams { d: 4, d_f: 3, d_u: 1, d_q: 6, k1: 2, k2: 2, layers: 2, variant: Variant::Fno };
        let a = OperatorModel::init(h, 3).unwrap();
        assert_eq!(a, OperatorModel::init(h, 3).unwrap());
        assert_ne!(a, OperatorModel::init(h, 4).unwrap());
        let l = a.layout();
        assert!(a.params()[l.lift_b.clone()].iter().all(|&v| v == 0.0));
        assert!(a.params()[l.blocks[1].r_im.clone()].iter().all(|v| v.abs() <= 1.0 / 16.0));
        let bound = (6.0f64 / 8.0).sqrt();
        assert!(a.params()[l.blocks[0].w.clone()].iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("IFNO".parse::<Variant>().unwrap(), Variant::Ifno);
        assert!("gkn".parse::<Variant>().is_err());
    }
}
