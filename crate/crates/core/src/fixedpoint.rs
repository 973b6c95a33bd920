//! Fixed-point iteration `U <- U + R(U, F)` and an IFNO assembled by hand so
//! that its layers execute that iteration exactly for a linear system.
//!
//! The constructed network carries the state in channels rather than on grid
//! nodes: every node holds the same vector, the fields are spatially constant,
//! and the only populated spectral mode is the mean, which then acts as a plain
//! matrix on the channels. Signed values cross the ReLU by channel doubling:
//! the state `U` is stored as non-negative `(U+, U-)` with `U = U+ - U-`, and
//! the increment `z` is split as `relu(z) - relu(-z) = z`.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::grid::{GridField2D, GridShape};
use crate::operator::{HyperParams, OperatorModel, Variant};
use crate::randfield::RngStream;

/// Increment map `R(U, F)`.
pub type IncrementMap = Box<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

pub struct FixedPointProblem {
    pub increment: IncrementMap,
    pub load: Vec<f64>,
    pub initial: Vec<f64>,
    /// Known contraction constant, if any.
    pub contraction: Option<f64>,
}

impl std::fmt::Debug for FixedPointProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FixedPointProblem")
            .field("load", &self.load)
            .field("initial", &self.initial)
            .field("contraction", &self.contraction)
            .finish_non_exhaustive()
    }
}

impl FixedPointProblem {
    pub fn new(
        increment: impl Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync + 'static,
        load: Vec<f64>,
        initial: Vec<f64>,
    ) -> Self {
        Self { increment: Box::new(increment), load, initial, contraction: None }
    }

    /// Richardson iteration `R(U, F) = omega (F - A U)` from `U = 0`.
    pub fn richardson(a: &DMatrix<f64>, load: Vec<f64>, omega: f64) -> Self {
        let a = a.clone();
        let n = load.len();
        Self::new(
            move |u, f| {
                let au = &a * DVector::from_column_slice(u);
                f.iter().zip(au.iter()).map(|(fi, ai)| omega * (fi - ai)).collect()
            },
            load,
            vec![0.0; n],
        )
    }

    pub fn dim(&self) -> usize {
        self.initial.len()
    }
}

/// `U^0, U^1, ..., U^L`.
pub fn iterate_trace(problem: &FixedPointProblem, layers: usize) -> Result<Vec<Vec<f64>>> {
    let mut trace = Vec::with_capacity(layers + 1);
    let mut u = problem.initial.clone();
    trace.push(u.clone());
    for l in 0..layers {
        let step = (problem.increment)(&u, &problem.load);
        if step.len() != u.len() {
            return invalid("increment map changed the state dimension");
        }
        for (x, s) in u.iter_mut().zip(&step) {
            *x += s;
        }
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure(format!("iterate {} is not finite", l + 1)));
        }
        trace.push(u.clone());
    }
    Ok(trace)
}

/// `U^L`.
pub fn iterate(problem: &FixedPointProblem, layers: usize) -> Result<Vec<f64>> {
    Ok(iterate_trace(problem, layers)?.pop().expect("trace holds U^0"))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest observed `|R(a) - R(b)| / |a - b|` over sampled pairs, a lower
/// bound on the Lipschitz constant of the increment map.
///
/// The first half of the pairs are standard normal perturbations of the
/// initial guess. The rest refine the best pair so far: the partner of `a` is
/// moved along `R(a) - R(b)` at the same distance, which for a linear map is a
/// power iteration and drives the ratio towards the dominant singular value.
pub fn estimate_contraction(problem: &FixedPointProblem, n_pairs: usize, rng: RngStream) -> Result<f64> {
    max_ratio(problem, n_pairs, rng, |u| (problem.increment)(u, &problem.load))
}

/// As [`estimate_contraction`] for the layer map `U -> U + R(U, F)`, whose
/// constant bounds the per-layer error reduction `|U^{l+1} - U*| / |U^l - U*|`.
pub fn estimate_step_contraction(problem: &FixedPointProblem, n_pairs: usize, rng: RngStream) -> Result<f64> {
    max_ratio(problem, n_pairs, rng, |u| {
        let r = (problem.increment)(u, &problem.load);
        u.iter().zip(r).map(|(x, s)| x + s).collect()
    })
}

fn max_ratio(
    problem: &FixedPointProblem,
    n_pairs: usize,
    rng: RngStream,
    map: impl Fn(&[f64]) -> Vec<f64>,
) -> Result<f64> {
    if n_pairs < 10 {
        return invalid(format!("need at least 10 pairs, got {n_pairs}"));
    }
    let mut draws = rng.draws();
    let dim = problem.dim();
    let ratio = |a: &[f64], b: &[f64]| -> Option<(f64, Vec<f64>)> {
        let (ra, rb) = (map(a), map(b));
        if ra.len() != dim || rb.len() != dim {
            return None;
        }
        let dr: Vec<f64> = ra.iter().zip(&rb).map(|(x, y)| x - y).collect();
        let du: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
        let denom = norm(&du);
        (denom > 0.0).then(|| (norm(&dr) / denom, dr))
    };
    let mut best: f64 = 0.0;
    let mut seed_pair = None;
    for _ in 0..n_pairs - n_pairs / 2 {
        let a: Vec<f64> = problem.initial.iter().map(|u| u + draws.normal()).collect();
        let b: Vec<f64> = problem.initial.iter().map(|u| u + draws.normal()).collect();
        if let Some((r, dr)) = ratio(&a, &b) {
            if r > best || seed_pair.is_none() {
                best = best.max(r);
                seed_pair = Some((a, b, dr));
            }
        }
    }
    if let Some((a, b, mut dr)) = seed_pair {
        let dist = norm(&a.iter().zip(&b).map(|(x, y)| x - y).collect::<Vec<_>>());
        for _ in 0..n_pairs / 2 {
            let len = norm(&dr);
            if !(len > 0.0) {
                break;
            }
            let b: Vec<f64> = a.iter().zip(&dr).map(|(x, d)| x - dist * d / len).collect();
            match ratio(&a, &b) {
                Some((r, next)) => {
                    best = best.max(r);
                    dr = next;
                }
                None => break,
            }
        }
    }
    Ok(best)
}

/// An IFNO whose parameters were assembled analytically.
#[derive(Debug, Clone)]
pub struct ConstructedIFNO {
    pub model: OperatorModel,
    /// Dimension `n` of the linear system.
    pub dim: usize,
    /// Constant input field carrying `(U0+, U0-, F)` in its channels.
    pub input: GridField2D,
}

impl ConstructedIFNO {
    /// The iterate held by the hidden state after each layer, `U^0..U^L`,
    /// read as `relu(h+) - relu(h-)` at node 0.
    pub fn layer_readouts(&self) -> Result<Vec<Vec<f64>>> {
        let n = self.dim;
        let nodes = self.input.shape().nodes();
        self.model
            .hidden_states(&self.input)?
            .iter()
            .map(|h| Ok((0..n).map(|i| h.data()[i * nodes].max(0.0) - h.data()[(n + i) * nodes].max(0.0)).collect()))
            .collect()
    }

    /// Readout after the final layer through the projection network.
    pub fn solve(&self) -> Result<Vec<f64>> {
        Ok(self.model.forward(&self.input)?.data().iter().step_by(self.input.shape().nodes()).copied().collect())
    }
}

fn largest_eigenvalue(a: &DMatrix<f64>) -> f64 {
    a.clone().symmetric_eigen().eigenvalues.max()
}

/// IFNO with `L` layers that performs one Richardson step
/// `U <- U + omega (F - A U)` per layer from `U = 0`.
///
/// Channels are `[U+ (n), U- (n), F (n)]`. The shared block's mean mode holds
///
/// ```text
///   z+ =  L omega (F - A (U+ - U-))      (rows of U+)
///   z- = -L omega (F - A (U+ - U-))      (rows of U-)
/// ```
///
/// so `dt relu(z+) - dt relu(z-) = omega (F - A U)`, while the `F` rows get a
/// bias of -1 and never change.
pub fn build_linear_ifno(a: &DMatrix<f64>, load: &[f64], omega: f64, layers: usize) -> Result<ConstructedIFNO> {
    let n = load.len();
    if n == 0 || a.nrows() != n || a.ncols() != n {
        return invalid(format!("matrix is {}x{}, load has {n} entries", a.nrows(), a.ncols()));
    }
    if layers == 0 {
        return invalid("need at least one layer");
    }
    let sym_gap = (a - a.transpose()).abs().max();
    if sym_gap > 1e-12 * a.abs().max().max(1.0) {
        return invalid("matrix is not symmetric");
    }
    let eig = a.clone().symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) {
        return invalid(format!("matrix is not positive definite (smallest eigenvalue {lo:e})"));
    }
    if hi / lo > 1e12 {
        return invalid(format!("matrix is ill-conditioned (condition number {:e})", hi / lo));
    }
    if !(omega > 0.0 && omega < 2.0 / largest_eigenvalue(a)) {
        return invalid(format!("omega {omega} outside (0, 2 / lambda_max = {})", 2.0 / hi));
    }

    let d = 3 * n;
    let hyper = HyperParams { d, d_f: d, d_u: n, d_q: 2 * n, k1: 1, k2: 1, layers, variant: Variant::Ifno };
    let mut model = OperatorModel::zeros(hyper)?;
    let layout = model.layout().clone();
    let p = model.params_mut();

    for i in 0..d {
        p[layout.lift_w.start + i * d + i] = 1.0;
    }

    // kernel entries R[o][i][0][0]; with one mode the index is o * d + i
    let block = &layout.blocks[0];
    let scale = layers as f64 * omega;
    for row in 0..n {
        for col in 0..n {
            let v = scale * a[(row, col)];
            p[block.r_re.start + row * d + col] = -v;
            p[block.r_re.start + row * d + n + col] = v;
            p[block.r_re.start + (n + row) * d + col] = v;
            p[block.r_re.start + (n + row) * d + n + col] = -v;
        }
        p[block.r_re.start + row * d + 2 * n + row] = scale;
        p[block.r_re.start + (n + row) * d + 2 * n + row] = -scale;
        p[block.c.start + 2 * n + row] = -1.0;
    }

    for i in 0..2 * n {
        p[layout.proj1_w.start + i * d + i] = 1.0;
    }
    for i in 0..n {
        p[layout.proj2_w.start + i * 2 * n + i] = 1.0;
        p[layout.proj2_w.start + i * 2 * n + n + i] = -1.0;
    }

    let shape = GridShape::new(n.max(2), 2, d)?;
    let mut input = GridField2D::zeros(shape);
    for (i, &f) in load.iter().enumerate() {
        input.channel_mut(2 * n + i).iter_mut().for_each(|v| *v = f);
    }
    Ok(ConstructedIFNO { model, dim: n, input })
}

/// Tridiagonal `[-1, 2, -1]` matrix of the 1D Dirichlet Poisson problem.
pub fn poisson_1d(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| match i.abs_diff(j) {
        0 => 2.0,
        1 => -1.0,
        _ => 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_increment_is_stationary() {
        let p = FixedPointProblem::new(|u, _| vec![0.0; u.len()], vec![1.0, 2.0], vec![0.5, -0.5]);
        for l in [0, 1, 7] {
            assert_eq!(iterate(&p, l).unwrap(), vec![0.5, -0.5]);
        }
    }

    #[test]
    fn scalar_geometric_convergence() {
        let p = FixedPointProblem::new(|u, _| vec![0.5 * (3.0 - u[0])], vec![], vec![0.0]);
        let u = iterate(&p, 20).unwrap();
        // geometric series: |U^L - 3| = 3 / 2^L
        assert!((u[0] - 3.0).abs() < 1e-5);
        assert!(((u[0] - 3.0).abs() - 3.0 / 2f64.powi(20)).abs() < 1e-15);
        let m = estimate_contraction(&p, 20, RngStream::new(0, 0)).unwrap();
        assert!((m - 0.5).abs() < 1e-12);
    }

    #[test]
    fn constant_increment_has_zero_contraction() {
        let p = FixedPointProblem::new(|_, _| vec![1.0, -2.0], vec![], vec![0.0, 0.0]);
        assert_eq!(estimate_contraction(&p, 10, RngStream::new(1, 0)).unwrap(), 0.0);
        assert!(estimate_contraction(&p, 9, RngStream::new(1, 0)).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let p = FixedPointProblem::new(|u, _| vec![u[0] * 1e300], vec![], vec![1.0]);
        assert!(matches!(iterate(&p, 5), Err(Error::NumericalFailure(_))));
    }

    #[test]
    fn rejects_bad_systems() {
        let f = vec![1.0, 1.0];
        let nonsym = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 2.0]);
        assert!(build_linear_ifno(&nonsym, &f, 0.1, 3).is_err());
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(build_linear_ifno(&indefinite, &f, 0.1, 3).is_err());
        let ill = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1e-14]);
        assert!(build_linear_ifno(&ill, &f, 0.1, 3).is_err());
        let a = poisson_1d(2);
        assert!(build_linear_ifno(&a, &f, 2.0 / 3.0 + 1e-9, 3).is_err());
        assert!(build_linear_ifno(&a, &f, 0.5, 3).is_ok());
    }

    #[test]
    fn identity_single_step_is_exact() {
        let f = vec![0.25, -1.5, 3.0];
        let c = build_linear_ifno(&DMatrix::identity(3, 3), &f, 1.0, 1).unwrap();
        assert_eq!(c.solve().unwrap(), f);
        assert_eq!(c.layer_readouts().unwrap()[1], f);
    }
}
