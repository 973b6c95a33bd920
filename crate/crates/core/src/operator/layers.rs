//! Pointwise maps, spectral convolution and the FNO / IFNO iterative layers.

use ndarray::linalg::general_mat_mul;
use ndarray::{ArrayView2, ArrayViewMut2};
use num_complex::Complex64;

use super::{OperatorModel, Variant};
use crate::error::{invalid, Result};
use crate::grid::{GridField2D, GridShape, SpectralPlan};

/// `c = alpha * a * b + beta * c` on row-major slices.
pub(crate) fn gemm(alpha: f64, a: ArrayView2<'_, f64>, b: ArrayView2<'_, f64>, beta: f64, c: &mut [f64]) {
    let (m, n) = (a.nrows(), b.ncols());
    let mut c = ArrayViewMut2::from_shape((m, n), c).expect("gemm output shape");
    general_mat_mul(alpha, &a, &b, beta, &mut c);
}

pub(crate) fn view(data: &[f64], rows: usize, cols: usize) -> ArrayView2<'_, f64> {
    ArrayView2::from_shape((rows, cols), data).expect("matrix view shape")
}

/// `out = weight * x + bias` for `x` laid out channel-major over `nodes`.
pub(crate) fn affine(weight: &[f64], bias: &[f64], x: &[f64], nodes: usize, out: &mut [f64]) {
    let rows = bias.len();
    let cols = weight.len() / rows;
    gemm(1.0, view(weight, rows, cols), view(x, cols, nodes), 0.0, out);
    for (row, b) in out.chunks_exact_mut(nodes).zip(bias) {
        row.iter_mut().for_each(|v| *v += b);
    }
}

/// Complex kernel `R[o][i][m1][m2]` as split real/imaginary slices.
#[derive(Debug, Clone, Copy)]
pub struct SpectralKernel<'a> {
    pub d_out: usize,
    pub d_in: usize,
    pub k1: usize,
    pub k2: usize,
    pub re: &'a [f64],
    pub im: &'a [f64],
}

impl SpectralKernel<'_> {
    pub fn get(&self, o: usize, i: usize, m: usize) -> Complex64 {
        let at = (o * self.d_in + i) * self.k1 * self.k2 + m;
        Complex64::new(self.re[at], self.im[at])
    }

    fn check(&self) -> Result<()> {
        let n = self.d_out * self.d_in * self.k1 * self.k2;
        if self.re.len() != n || self.im.len() != n {
            return invalid("spectral kernel storage does not match its shape");
        }
        Ok(())
    }
}

/// Borrowed parameters of one iterative layer.
#[derive(Debug, Clone, Copy)]
pub struct BlockView<'a> {
    /// `d x d`, row-major.
    pub w: &'a [f64],
    pub kernel: SpectralKernel<'a>,
    pub c: &'a [f64],
}

impl BlockView<'_> {
    pub fn width(&self) -> usize {
        self.c.len()
    }

    fn check(&self) -> Result<()> {
        let d = self.width();
        self.kernel.check()?;
        if self.w.len() != d * d || self.kernel.d_out != d || self.kernel.d_in != d {
            return invalid("layer block shapes are inconsistent");
        }
        Ok(())
    }
}

/// Owned layer parameters, handy for building layers by hand.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub d: usize,
    pub k1: usize,
    pub k2: usize,
    pub w: Vec<f64>,
    pub r_re: Vec<f64>,
    pub r_im: Vec<f64>,
    pub c: Vec<f64>,
}

impl Block {
    pub fn zeros(d: usize, k1: usize, k2: usize) -> Self {
        let kn = d * d * k1 * k2;
        Self { d, k1, k2, w: vec![0.0; d * d], r_re: vec![0.0; kn], r_im: vec![0.0; kn], c: vec![0.0; d] }
    }

    pub fn view(&self) -> BlockView<'_> {
        BlockView {
            w: &self.w,
            kernel: SpectralKernel {
                d_out: self.d,
                d_in: self.d,
                k1: self.k1,
                k2: self.k2,
                re: &self.r_re,
                im: &self.r_im,
            },
            c: &self.c,
        }
    }
}

/// Per-mode channel mixing followed by the truncated inverse transform.
/// Returns the input's retained coefficients (`d_in x k1 x k2`).
pub(crate) fn spectral_apply(
    plan: &SpectralPlan,
    kernel: &SpectralKernel<'_>,
    h: &[f64],
    out: &mut [f64],
) -> Vec<Complex64> {
    let (k1, k2) = (kernel.k1, kernel.k2);
    let modes = k1 * k2;
    let zero = Complex64::new(0.0, 0.0);
    let mut hhat = vec![zero; kernel.d_in * modes];
    plan.forward_many(h, k1, k2, &mut hhat);
    let mut mixed = vec![zero; kernel.d_out * modes];
    for (o, dst) in mixed.chunks_exact_mut(modes).enumerate() {
        for i in 0..kernel.d_in {
            let base = (o * kernel.d_in + i) * modes;
            let re = &kernel.re[base..base + modes];
            let im = &kernel.im[base..base + modes];
            let src = &hhat[i * modes..(i + 1) * modes];
            for m in 0..modes {
                dst[m] += Complex64::new(re[m], im[m]) * src[m];
            }
        }
    }
    plan.inverse_many(&mixed, k1, k2, out);
    hhat
}

fn check_channels(field: &GridField2D, expected: usize, what: &str) -> Result<()> {
    if field.channels() != expected {
        return invalid(format!("{what} expects {expected} channels, got {}", field.channels()));
    }
    Ok(())
}

/// `h(x) = P f(x) + p` at every node.
pub fn lift(model: &OperatorModel, f: &GridField2D) -> Result<GridField2D> {
    let h = model.hyper();
    check_channels(f, h.d_f, "lifting")?;
    let shape = GridShape::new(f.nx(), f.ny(), h.d)?;
    let mut out = GridField2D::zeros(shape);
    let l = model.layout();
    affine(
        &model.params()[l.lift_w.clone()],
        &model.params()[l.lift_b.clone()],
        f.data(),
        shape.nodes(),
        out.data_mut(),
    );
    Ok(out)
}

/// Inverse transform of `R(m) * F[h](m)` over the retained modes.
pub fn spectral_conv(h: &GridField2D, kernel: &SpectralKernel<'_>) -> Result<GridField2D> {
    kernel.check()?;
    check_channels(h, kernel.d_in, "spectral convolution")?;
    let plan = SpectralPlan::shared(h.nx(), h.ny());
    plan.check_modes(kernel.k1, kernel.k2)?;
    let mut out = GridField2D::zeros(GridShape::new(h.nx(), h.ny(), kernel.d_out)?);
    spectral_apply(&plan, kernel, h.data(), out.data_mut());
    Ok(out)
}

/// Pre-activation `W h + conv(h) + c`. Returns it with the input spectrum.
fn pre_activation(plan: &SpectralPlan, block: &BlockView<'_>, h: &[f64], nodes: usize) -> (Vec<f64>, Vec<Complex64>) {
    let mut pre = vec![0.0; h.len()];
    let hhat = spectral_apply(plan, &block.kernel, h, &mut pre);
    let d = block.width();
    gemm(1.0, view(block.w, d, d), view(h, d, nodes), 1.0, &mut pre);
    for (row, c) in pre.chunks_exact_mut(nodes).zip(block.c) {
        row.iter_mut().for_each(|v| *v += c);
    }
    (pre, hhat)
}

fn prepare_layer(h: &GridField2D, block: &BlockView<'_>) -> Result<std::sync::Arc<SpectralPlan>> {
    block.check()?;
    check_channels(h, block.width(), "iterative layer")?;
    let plan = SpectralPlan::shared(h.nx(), h.ny());
    plan.check_modes(block.kernel.k1, block.kernel.k2)?;
    Ok(plan)
}

/// `relu(W h + conv(h) + c)`.
pub fn fno_layer(h: &GridField2D, block: &BlockView<'_>) -> Result<GridField2D> {
    let plan = prepare_layer(h, block)?;
    let (mut pre, _) = pre_activation(&plan, block, h.data(), h.shape().nodes());
    pre.iter_mut().for_each(|v| *v = v.max(0.0));
    GridField2D::new(h.nx(), h.ny(), h.channels(), pre)
}

/// `h + dt * relu(W h + conv(h) + c)`.
pub fn ifno_layer(h: &GridField2D, block: &BlockView<'_>, dt: f64) -> Result<GridField2D> {
    if !(dt >= 0.0) {
        return invalid(format!("step size must be non-negative, got {dt}"));
    }
    let plan = prepare_layer(h, block)?;
    let (pre, _) = pre_activation(&plan, block, h.data(), h.shape().nodes());
    let data = h.data().iter().zip(&pre).map(|(x, z)| x + dt * z.max(0.0)).collect();
    GridField2D::new(h.nx(), h.ny(), h.channels(), data)
}

/// `Q2 relu(Q1 h + q1) + q2` at every node.
pub fn project(model: &OperatorModel, hl: &GridField2D) -> Result<GridField2D> {
    let hp = model.hyper();
    check_channels(hl, hp.d, "projection")?;
    let nodes = hl.shape().nodes();
    let (p, l) = (model.params(), model.layout());
    let mut hidden = vec![0.0; hp.d_q * nodes];
    affine(&p[l.proj1_w.clone()], &p[l.proj1_b.clone()], hl.data(), nodes, &mut hidden);
    hidden.iter_mut().for_each(|v| *v = v.max(0.0));
    let mut out = GridField2D::zeros(GridShape::new(hl.nx(), hl.ny(), hp.d_u)?);
    affine(&p[l.proj2_w.clone()], &p[l.proj2_b.clone()], &hidden, nodes, out.data_mut());
    Ok(out)
}

/// Intermediate values of one forward pass, kept for the backward sweep.
#[derive(Debug, Clone)]
pub(crate) struct TapeLayer {
    pub input: Vec<f64>,
    pub hhat: Vec<Complex64>,
    pub pre: Vec<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct Tape {
    pub nx: usize,
    pub ny: usize,
    /// Normalized input.
    pub input: Vec<f64>,
    pub layers: Vec<TapeLayer>,
    pub last: Vec<f64>,
    pub proj_pre: Vec<f64>,
    /// Output before de-normalization.
    pub out: Vec<f64>,
}

impl Tape {
    pub fn nodes(&self) -> usize {
        self.nx * self.ny
    }
}

impl OperatorModel {
    pub(crate) fn forward_tape(&self, f: &GridField2D) -> Result<Tape> {
        let h = *self.hyper();
        check_channels(f, h.d_f, "model input")?;
        let (nx, ny) = (f.nx(), f.ny());
        let nodes = nx * ny;
        let plan = SpectralPlan::shared(nx, ny);
        plan.check_modes(h.k1, h.k2)?;
        let (p, l) = (self.params(), self.layout());

        let mut input = f.data().to_vec();
        for (c, ch) in input.chunks_exact_mut(nodes).enumerate() {
            let (m, s) = (self.norm.in_mean[c], self.norm.in_std[c]);
            ch.iter_mut().for_each(|v| *v = (*v - m) / s);
        }
        let mut state = vec![0.0; h.d * nodes];
        affine(&p[l.lift_w.clone()], &p[l.lift_b.clone()], &input, nodes, &mut state);

        let dt = h.dt();
        let mut layers = Vec::with_capacity(h.layers);
        for layer in 0..h.layers {
            let block = self.block(h.block_of(layer));
            let (pre, hhat) = pre_activation(&plan, &block, &state, nodes);
            let next: Vec<f64> = match h.variant {
                Variant::Fno => pre.iter().map(|z| z.max(0.0)).collect(),
                Variant::Ifno => state.iter().zip(&pre).map(|(x, z)| x + dt * z.max(0.0)).collect(),
            };
            layers.push(TapeLayer { input: std::mem::replace(&mut state, next), hhat, pre });
        }

        let mut proj_pre = vec![0.0; h.d_q * nodes];
        affine(&p[l.proj1_w.clone()], &p[l.proj1_b.clone()], &state, nodes, &mut proj_pre);
        let hidden: Vec<f64> = proj_pre.iter().map(|v| v.max(0.0)).collect();
        let mut out = vec![0.0; h.d_u * nodes];
        affine(&p[l.proj2_w.clone()], &p[l.proj2_b.clone()], &hidden, nodes, &mut out);
        Ok(Tape { nx, ny, input, layers, last: state, proj_pre, out })
    }

    pub(crate) fn denormalize(&self, out: &[f64], nodes: usize) -> Vec<f64> {
        let mut y = out.to_vec();
        for (c, ch) in y.chunks_exact_mut(nodes).enumerate() {
            let (m, s) = (self.norm.out_mean[c], self.norm.out_std[c]);
            ch.iter_mut().for_each(|v| *v = *v * s + m);
        }
        y
    }

    /// Full operator: normalize, lift, `L` iterative layers, project, de-normalize.
    pub fn forward(&self, f: &GridField2D) -> Result<GridField2D> {
        let tape = self.forward_tape(f)?;
        let y = self.denormalize(&tape.out, tape.nodes());
        GridField2D::new(tape.nx, tape.ny, self.hyper().d_u, y)
    }

    /// Hidden representations `h_0, ..., h_L`.
    pub fn hidden_states(&self, f: &GridField2D) -> Result<Vec<GridField2D>> {
        let tape = self.forward_tape(f)?;
        let d = self.hyper().d;
        let mut out: Vec<GridField2D> =
            tape.layers.into_iter().map(|l| GridField2D::new(tape.nx, tape.ny, d, l.input)).collect::<Result<_>>()?;
        out.push(GridField2D::new(tape.nx, tape.ny, d, tape.last)?);
        Ok(out)
    }
}
