//! Reverse-mode gradients of the batch-mean relative L2 loss.
//!
//! The spectral path `y = S(R . T(h))` is real-linear in `h` and in `(Re R, Im R)`,
//! where `T` is the truncated forward transform over the periodic cell and `S`
//! the Hermitian-extended truncated inverse onto every node
//! (`S(C)[p] = (1/P) sum_m alpha_m Re(C_m e^{i theta_m(p)})`, `P = px py`).
//! With `G[m] = sum_p dL/dy[p] e^{-i theta_m(p)}` over all nodes, seam included,
//! the adjoints are `dL/dR[o][i][m] = (alpha_m / P) G_o[m] conj(T(h)_i[m])` and
//! `dL/dh_i = S(sum_o G_o conj(R[o][i]))` on the cell, zero on the seam.
//! ReLU has derivative 0 at 0.

use num_complex::Complex64;

use crate::darcy::Sample;
use crate::error::{invalid, Error, Result};
use crate::grid::{hermitian_weight, SpectralPlan};
use crate::operator::{gemm, view, OperatorModel, Variant};

/// Gradient of the loss with respect to every stored parameter, in the
/// model's flat layout. Shared IFNO blocks hold the sum over layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub values: Vec<f64>,
}

impl Gradients {
    pub fn zeros(model: &OperatorModel) -> Self {
        Self { values: vec![0.0; model.num_params()] }
    }

    pub fn tensor(&self, range: std::ops::Range<usize>) -> &[f64] {
        &self.values[range]
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

fn add_row_sums(rows: &[f64], nodes: usize, out: &mut [f64]) {
    for (row, o) in rows.chunks_exact(nodes).zip(out) {
        *o += row.iter().sum::<f64>();
    }
}

/// Mean relative L2 loss of a batch without gradients.
pub fn batch_loss(model: &OperatorModel, batch: &[Sample]) -> Result<f64> {
    if batch.is_empty() {
        return invalid("batch must not be empty");
    }
    let mut total = 0.0;
    for s in batch {
        total += super::relative_l2(&model.forward(&s.input)?, &s.output)?;
    }
    Ok(total / batch.len() as f64)
}

pub fn gradients(model: &OperatorModel, batch: &[Sample]) -> Result<Gradients> {
    loss_and_gradients(model, batch).map(|(_, g)| g)
}

/// Batch-mean loss and its exact gradient. Samples are reduced in order.
pub fn loss_and_gradients(model: &OperatorModel, batch: &[Sample]) -> Result<(f64, Gradients)> {
    let refs: Vec<&Sample> = batch.iter().collect();
    loss_and_gradients_of(model, &refs)
}

pub(crate) fn loss_and_gradients_of(model: &OperatorModel, batch: &[&Sample]) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return invalid("batch must not be empty");
    }
    let mut grads = Gradients::zeros(model);
    let scale = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for &s in batch {
        total += accumulate_sample(model, s, scale, &mut grads.values)?;
    }
    Ok((total * scale, grads))
}

fn accumulate_sample(model: &OperatorModel, sample: &Sample, scale: f64, grads: &mut [f64]) -> Result<f64> {
    let h = *model.hyper();
    if sample.output.channels() != h.d_u {
        return invalid(format!("target has {} channels, model outputs {}", sample.output.channels(), h.d_u));
    }
    let tape = model.forward_tape(&sample.input)?;
    let nodes = tape.nodes();
    if sample.output.nx() != tape.nx || sample.output.ny() != tape.ny {
        return invalid("target grid differs from input grid");
    }
    let (params, layout) = (model.params(), model.layout());

    // loss in physical units
    let pred = model.denormalize(&tape.out, nodes);
    let truth = sample.output.data();
    let tn = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    if tn == 0.0 {
        return invalid("relative error undefined for an all-zero target");
    }
    let err: Vec<f64> = pred.iter().zip(truth).map(|(p, t)| p - t).collect();
    let en = err.iter().map(|v| v * v).sum::<f64>().sqrt();
    let loss = en / tn;
    if !loss.is_finite() {
        return Err(Error::NumericalFailure(format!("non-finite loss {loss}")));
    }
    if en == 0.0 {
        return Ok(loss);
    }
    let coef = scale / (en * tn);
    let mut g_out: Vec<f64> = err.iter().map(|e| e * coef).collect();
    for (c, ch) in g_out.chunks_exact_mut(nodes).enumerate() {
        let s = model.norm.out_std[c];
        ch.iter_mut().for_each(|v| *v *= s);
    }

    // projection
    let hidden: Vec<f64> = tape.proj_pre.iter().map(|v| v.max(0.0)).collect();
    add_row_sums(&g_out, nodes, &mut grads[layout.proj2_b.clone()]);
    gemm(1.0, view(&g_out, h.d_u, nodes), view(&hidden, h.d_q, nodes).t(), 1.0, &mut grads[layout.proj2_w.clone()]);
    let mut g_hidden = vec![0.0; h.d_q * nodes];
    gemm(1.0, view(&params[layout.proj2_w.clone()], h.d_u, h.d_q).t(), view(&g_out, h.d_u, nodes), 0.0, &mut g_hidden);
    for (g, z) in g_hidden.iter_mut().zip(&tape.proj_pre) {
        if *z <= 0.0 {
            *g = 0.0;
        }
    }
    add_row_sums(&g_hidden, nodes, &mut grads[layout.proj1_b.clone()]);
    gemm(1.0, view(&g_hidden, h.d_q, nodes), view(&tape.last, h.d, nodes).t(), 1.0, &mut grads[layout.proj1_w.clone()]);
    let mut g_h = vec![0.0; h.d * nodes];
    gemm(1.0, view(&params[layout.proj1_w.clone()], h.d_q, h.d).t(), view(&g_hidden, h.d_q, nodes), 0.0, &mut g_h);

    // iterative layers
    let plan = SpectralPlan::shared(tape.nx, tape.ny);
    let (k1, k2) = (h.k1, h.k2);
    let modes = k1 * k2;
    let dt = h.dt();
    let zero = Complex64::new(0.0, 0.0);
    let cell = ((tape.nx - 1) * (tape.ny - 1)) as f64;
    let weights: Vec<f64> = (0..modes).map(|m| hermitian_weight(m % k2, tape.nx - 1) / cell).collect();
    for l in (0..h.layers).rev() {
        let tl = &tape.layers[l];
        let b = &layout.blocks[h.block_of(l)];
        let mut g_pre = match h.variant {
            Variant::Fno => std::mem::replace(&mut g_h, vec![0.0; h.d * nodes]),
            Variant::Ifno => g_h.iter().map(|g| g * dt).collect(),
        };
        for (g, z) in g_pre.iter_mut().zip(&tl.pre) {
            if *z <= 0.0 {
                *g = 0.0;
            }
        }
        add_row_sums(&g_pre, nodes, &mut grads[b.c.clone()]);
        gemm(1.0, view(&g_pre, h.d, nodes), view(&tl.input, h.d, nodes).t(), 1.0, &mut grads[b.w.clone()]);
        gemm(1.0, view(&params[b.w.clone()], h.d, h.d).t(), view(&g_pre, h.d, nodes), 1.0, &mut g_h);

        let mut g_hat = vec![zero; h.d * modes];
        plan.adjoint_inverse_many(&g_pre, k1, k2, &mut g_hat);
        let kernel = model.block(h.block_of(l)).kernel;
        let mut back = vec![zero; h.d * modes];
        for (i, back) in back.chunks_exact_mut(modes).enumerate() {
            let src = &tl.hhat[i * modes..(i + 1) * modes];
            for o in 0..h.d {
                let gy = &g_hat[o * modes..(o + 1) * modes];
                let at = (o * h.d + i) * modes;
                for m in 0..modes {
                    let r = kernel.get(o, i, m);
                    back[m] += gy[m] * r.conj();
                    let gr = gy[m] * src[m].conj() * weights[m];
                    grads[b.r_re.start + at + m] += gr.re;
                    grads[b.r_im.start + at + m] += gr.im;
                }
            }
        }
        let mut field = vec![0.0; h.d * nodes];
        plan.inverse_many(&back, k1, k2, &mut field);
        plan.clear_seam(&mut field);
        for (g, v) in g_h.iter_mut().zip(&field) {
            *g += v;
        }
    }

    // lifting
    add_row_sums(&g_h, nodes, &mut grads[layout.lift_b.clone()]);
    gemm(1.0, view(&g_h, h.d, nodes), view(&tape.input, h.d_f, nodes).t(), 1.0, &mut grads[layout.lift_w.clone()]);
    Ok(loss)
}
