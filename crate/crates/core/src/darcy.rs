//! Ground truth for `-div(b grad u) = g` on the unit square with Dirichlet data,
//! plus dataset assembly and the `NOPDS01` dataset file format.
//!
//! The discretization is the conservative 5-point scheme
//! `-[Dx-(b_{i+1/2,j} Dx+ u) + Dy-(b_{i,j+1/2} Dy+ u)] = g` at interior nodes with
//! half-node coefficients taken as arithmetic means of the adjacent nodes. The
//! resulting SPD system is solved with Jacobi-preconditioned conjugate gradients.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{GridField2D, GridShape};
use crate::randfield::{self, RngStream};

pub const SOLVER_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct DarcyProblem {
    /// Permeability, strictly positive.
    pub b: GridField2D,
    /// Source term.
    pub g: GridField2D,
    /// Dirichlet values on boundary nodes; interior entries are ignored.
    pub u_d: GridField2D,
}

impl DarcyProblem {
    pub fn new(b: GridField2D, g: GridField2D, u_d: GridField2D) -> Result<Self> {
        let shape = b.shape();
        if shape.channels != 1 || g.shape() != shape || u_d.shape() != shape {
            return invalid("b, g and u_D must be single-channel fields on one grid");
        }
        if shape.nx < 3 || shape.ny < 3 {
            return invalid("the Darcy grid needs interior nodes");
        }
        if let Some(v) = b.data().iter().find(|v| !(**v > 0.0)) {
            return invalid(format!("permeability must be positive, found {v}"));
        }
        Ok(Self { b, g, u_d })
    }

    pub fn shape(&self) -> GridShape {
        self.b.shape()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SolveStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Face coefficients: `fx[iy * (nx - 1) + ix]` joins `(ix, iy)` and `(ix + 1, iy)`,
/// `fy[iy * nx + ix]` joins `(ix, iy)` and `(ix, iy + 1)`.
struct Faces {
    nx: usize,
    ny: usize,
    fx: Vec<f64>,
    fy: Vec<f64>,
    inv_dx2: f64,
    inv_dy2: f64,
}

impl Faces {
    fn new(b: &GridField2D) -> Self {
        let (nx, ny) = (b.nx(), b.ny());
        let v = b.channel(0);
        let mut fx = Vec::with_capacity((nx - 1) * ny);
        for iy in 0..ny {
            for ix in 0..nx - 1 {
                fx.push(0.5 * (v[iy * nx + ix] + v[iy * nx + ix + 1]));
            }
        }
        let mut fy = Vec::with_capacity(nx * (ny - 1));
        for iy in 0..ny - 1 {
            for ix in 0..nx {
                fy.push(0.5 * (v[iy * nx + ix] + v[(iy + 1) * nx + ix]));
            }
        }
        let (dx, dy) = (b.dx(), b.dy());
        Self { nx, ny, fx, fy, inv_dx2: 1.0 / (dx * dx), inv_dy2: 1.0 / (dy * dy) }
    }

    fn diagonal(&self, ix: usize, iy: usize) -> f64 {
        let (nx, w) = (self.nx, self.nx - 1);
        (self.fx[iy * w + ix] + self.fx[iy * w + ix - 1]) * self.inv_dx2
            + (self.fy[iy * nx + ix] + self.fy[(iy - 1) * nx + ix]) * self.inv_dy2
    }

    /// `out = A u` at interior nodes using every neighbour value of `u`,
    /// boundary entries of `out` set to zero.
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        let (nx, ny, w) = (self.nx, self.ny, self.nx - 1);
        out.iter_mut().for_each(|v| *v = 0.0);
        for iy in 1..ny - 1 {
            for ix in 1..nx - 1 {
                let p = iy * nx + ix;
                let c = u[p];
                let e = self.fx[iy * w + ix] * (c - u[p + 1]);
                let west = self.fx[iy * w + ix - 1] * (c - u[p - 1]);
                let n = self.fy[iy * nx + ix] * (c - u[p + nx]);
                let s = self.fy[(iy - 1) * nx + ix] * (c - u[p - nx]);
                out[p] = (e + west) * self.inv_dx2 + (n + s) * self.inv_dy2;
            }
        }
    }
}

fn interior_dot(a: &[f64], b: &[f64], nx: usize, ny: usize) -> f64 {
    let mut s = 0.0;
    for iy in 1..ny - 1 {
        let row = iy * nx;
        for ix in 1..nx - 1 {
            s += a[row + ix] * b[row + ix];
        }
    }
    s
}

/// Discrete residual `g - A u` at interior nodes (zero on the boundary).
pub fn residual(problem: &DarcyProblem, u: &GridField2D) -> Vec<f64> {
    let faces = Faces::new(&problem.b);
    let mut au = vec![0.0; u.data().len()];
    faces.apply(u.data(), &mut au);
    let shape = problem.shape();
    let g = problem.g.data();
    (0..shape.nodes()).map(|p| if shape.is_boundary(p) { 0.0 } else { g[p] - au[p] }).collect()
}

/// Effective right-hand side norm: source plus lifted boundary contributions.
fn rhs_norm(problem: &DarcyProblem) -> f64 {
    let lifted = lift_boundary(problem);
    let r = residual(problem, &lifted);
    let shape = problem.shape();
    interior_dot(&r, &r, shape.nx, shape.ny).sqrt()
}

fn lift_boundary(problem: &DarcyProblem) -> GridField2D {
    let shape = problem.shape();
    let mut u = GridField2D::zeros(shape);
    for p in 0..shape.nodes() {
        if shape.is_boundary(p) {
            u.data_mut()[p] = problem.u_d.data()[p];
        }
    }
    u
}

pub fn relative_residual(problem: &DarcyProblem, u: &GridField2D) -> f64 {
    let shape = problem.shape();
    let r = residual(problem, u);
    let rn = interior_dot(&r, &r, shape.nx, shape.ny).sqrt();
    let bn = rhs_norm(problem);
    if bn == 0.0 {
        rn
    } else {
        rn / bn
    }
}

pub fn solve_darcy(problem: &DarcyProblem) -> Result<GridField2D> {
    solve_darcy_with_stats(problem).map(|(u, _)| u)
}

pub fn solve_darcy_with_stats(problem: &DarcyProblem) -> Result<(GridField2D, SolveStats)> {
    let shape = problem.shape();
    let (nx, ny) = (shape.nx, shape.ny);
    let faces = Faces::new(&problem.b);
    let mut u = lift_boundary(problem);
    let nodes = shape.nodes();

    let mut inv_diag = vec![0.0; nodes];
    for iy in 1..ny - 1 {
        for ix in 1..nx - 1 {
            inv_diag[iy * nx + ix] = 1.0 / faces.diagonal(ix, iy);
        }
    }

    let mut au = vec![0.0; nodes];
    faces.apply(u.data(), &mut au);
    let mut r: Vec<f64> =
        (0..nodes).map(|p| if shape.is_boundary(p) { 0.0 } else { problem.g.data()[p] - au[p] }).collect();
    let rhs = interior_dot(&r, &r, nx, ny).sqrt();
    if rhs == 0.0 {
        return Ok((u, SolveStats { iterations: 0, relative_residual: 0.0 }));
    }

    let cap = 50 * nx.max(ny);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(a, b)| a * b).collect();
    let mut p = z.clone();
    let mut rz = interior_dot(&r, &z, nx, ny);
    let mut ap = vec![0.0; nodes];
    let mut iterations = 0;
    loop {
        let rel = interior_dot(&r, &r, nx, ny).sqrt() / rhs;
        if rel <= SOLVER_TOLERANCE {
            // confirm against the true residual before accepting
            let true_rel = relative_residual(problem, &u);
            if true_rel <= SOLVER_TOLERANCE {
                return Ok((u, SolveStats { iterations, relative_residual: true_rel }));
            }
            r = residual(problem, &u);
            z.iter_mut().zip(r.iter().zip(&inv_diag)).for_each(|(z, (r, d))| *z = r * d);
            p.copy_from_slice(&z);
            rz = interior_dot(&r, &z, nx, ny);
        }
        if iterations >= cap {
            return Err(Error::NumericalFailure(format!(
                "conjugate gradients stalled at relative residual {rel:.3e} after {iterations} iterations"
            )));
        }
        faces.apply(&p, &mut ap);
        let pap = interior_dot(&p, &ap, nx, ny);
        if !(pap > 0.0) {
            return Err(Error::NumericalFailure(format!("non-positive curvature {pap} in CG")));
        }
        let alpha = rz / pap;
        let ud = u.data_mut();
        for i in 0..nodes {
            ud[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = interior_dot(&r, &z, nx, ny);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..nodes {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
    }
}

/// Net outward flux through faces joining interior and boundary nodes,
/// `sum b_f (u_in - u_bd) / h * face_length`. For the conservative scheme it
/// balances `sum_interior g dx dy` up to the solver residual.
pub fn boundary_flux(problem: &DarcyProblem, u: &GridField2D) -> f64 {
    let faces = Faces::new(&problem.b);
    let shape = problem.shape();
    let (nx, ny) = (shape.nx, shape.ny);
    let (dx, dy) = (u.dx(), u.dy());
    let v = u.channel(0);
    let w = nx - 1;
    let mut flux = 0.0;
    for iy in 1..ny - 1 {
        // west and east
        flux += faces.fx[iy * w] * (v[iy * nx + 1] - v[iy * nx]) / dx * dy;
        flux += faces.fx[iy * w + nx - 2] * (v[iy * nx + nx - 2] - v[iy * nx + nx - 1]) / dx * dy;
    }
    for ix in 1..nx - 1 {
        // south and north
        flux += faces.fy[ix] * (v[nx + ix] - v[ix]) / dy * dx;
        flux += faces.fy[(ny - 2) * nx + ix] * (v[(ny - 2) * nx + ix] - v[(ny - 1) * nx + ix]) / dy * dx;
    }
    flux
}

/// Point subsampling at every `stride`-th node, both endpoints kept.
pub fn downsample(field: &GridField2D, stride: usize) -> Result<GridField2D> {
    let (nx, ny) = (field.nx(), field.ny());
    if stride == 0 || (nx - 1) % stride != 0 || (ny - 1) % stride != 0 {
        return invalid(format!("stride {stride} does not divide the {nx}x{ny} grid"));
    }
    let (cx, cy) = ((nx - 1) / stride + 1, (ny - 1) / stride + 1);
    let mut data = Vec::with_capacity(cx * cy * field.channels());
    for c in 0..field.channels() {
        for iy in 0..cy {
            for ix in 0..cx {
                data.push(field.get(c, ix * stride, iy * stride));
            }
        }
    }
    GridField2D::new(cx, cy, field.channels(), data)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: GridField2D,
    pub output: GridField2D,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    /// `darcy1` or `darcy2`.
    pub setting: String,
    pub base_seed: u64,
    #[serde(default)]
    pub b_seed: Option<u64>,
    pub fine_n: usize,
    pub stride: usize,
    pub coarse_n: usize,
    pub input_channels: Vec<String>,
    pub output_channels: Vec<String>,
    /// Samples `0..n_train` are the training split, the rest are test.
    #[serde(default)]
    pub n_train: Option<usize>,
    /// Fraction of high-permeability nodes over all coarse inputs (setting I).
    #[serde(default)]
    pub phase_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Deterministic split by stream index: the first `n_train` samples train.
    pub fn split(&self, n_train: usize) -> Result<(&[Sample], &[Sample])> {
        if n_train > self.samples.len() {
            return invalid(format!("n_train {n_train} exceeds {} samples", self.samples.len()));
        }
        Ok(self.samples.split_at(n_train))
    }
}

fn coordinates(n: usize) -> (GridField2D, GridField2D) {
    let shape = GridShape::new(n, n, 1).expect("coordinate grid");
    (GridField2D::from_fn(shape, |_, x, _| x), GridField2D::from_fn(shape, |_, _, y| y))
}

fn check_dataset_args(n_samples: usize, fine_n: usize, stride: usize) -> Result<()> {
    if n_samples == 0 {
        return invalid("n_samples must be at least 1");
    }
    if fine_n < 17 {
        return invalid(format!("fine grid must be at least 17x17, got {fine_n}"));
    }
    if stride == 0 || !(fine_n - 1).is_multiple_of(stride) {
        return invalid(format!("stride {stride} does not divide fine grid {fine_n}"));
    }
    Ok(())
}

fn with_index<T>(j: usize, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::NumericalFailure(m) => Error::NumericalFailure(format!("sample {j}: {m}")),
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("sample {j}: {m}")),
        other => other,
    })
}

/// One setting-I sample from a fine permeability field: `g = 1`, `u_D = 0`.
pub fn setting1_sample(b_fine: &GridField2D, stride: usize) -> Result<Sample> {
    let shape = b_fine.shape();
    let g = GridField2D::from_fn(shape, |_, _, _| 1.0);
    let u_d = GridField2D::zeros(shape);
    let u = solve_darcy(&DarcyProblem::new(b_fine.clone(), g, u_d)?)?;
    let b = downsample(b_fine, stride)?;
    let (x, y) = coordinates(b.nx());
    Ok(Sample { input: GridField2D::stack(&[&x, &y, &b])?, output: downsample(&u, stride)? })
}

/// Permeability `b -> u` with fixed unit source and homogeneous Dirichlet data.
pub fn make_dataset_setting1(n_samples: usize, base_seed: u64, fine_n: usize, stride: usize) -> Result<Dataset> {
    check_dataset_args(n_samples, fine_n, stride)?;
    let mut samples = Vec::with_capacity(n_samples);
    let mut high = 0usize;
    for j in 0..n_samples {
        let b = randfield::sample_permeability(RngStream::new(base_seed, j as u64), fine_n);
        let sample = with_index(j, setting1_sample(&b, stride))?;
        high += sample.input.channel(2).iter().filter(|&&v| v == randfield::PERMEABILITY_HIGH).count();
        samples.push(sample);
    }
    let coarse_n = (fine_n - 1) / stride + 1;
    let meta = DatasetMeta {
        setting: "darcy1".into(),
        base_seed,
        b_seed: None,
        fine_n,
        stride,
        coarse_n,
        input_channels: vec!["x".into(), "y".into(), "b".into()],
        output_channels: vec!["u".into()],
        n_train: None,
        phase_fraction: Some(high as f64 / (n_samples * coarse_n * coarse_n) as f64),
    };
    Ok(Dataset { samples, meta })
}

/// One setting-II sample on a fixed permeability with the given source and
/// zero-padded Dirichlet field (all on the fine grid).
pub fn setting2_sample(
    b_fine: &GridField2D,
    g_fine: &GridField2D,
    u_d_fine: &GridField2D,
    stride: usize,
) -> Result<Sample> {
    let problem = DarcyProblem::new(b_fine.clone(), g_fine.clone(), u_d_fine.clone())?;
    let u = solve_darcy(&problem)?;
    let g = downsample(g_fine, stride)?;
    let u_d = downsample(u_d_fine, stride)?;
    let (x, y) = coordinates(g.nx());
    Ok(Sample { input: GridField2D::stack(&[&x, &y, &g, &u_d])?, output: downsample(&u, stride)? })
}

/// Source and boundary data `(g, u_D) -> u` on one fixed permeability drawn from `b_seed`.
pub fn make_dataset_setting2(
    n_samples: usize,
    base_seed: u64,
    fine_n: usize,
    stride: usize,
    b_seed: u64,
) -> Result<Dataset> {
    check_dataset_args(n_samples, fine_n, stride)?;
    let b = randfield::sample_permeability(RngStream::new(b_seed, 0), fine_n);
    let mut samples = Vec::with_capacity(n_samples);
    for j in 0..n_samples {
        let mut draws = RngStream::new(base_seed, j as u64).draws();
        let source = randfield::draw_source(&mut draws, fine_n);
        let boundary = randfield::draw_boundary(&mut draws, fine_n);
        samples.push(with_index(j, setting2_sample(&b, &source.field, &boundary.field, stride))?);
    }
    let meta = DatasetMeta {
        setting: "darcy2".into(),
        base_seed,
        b_seed: Some(b_seed),
        fine_n,
        stride,
        coarse_n: (fine_n - 1) / stride + 1,
        input_channels: vec!["x".into(), "y".into(), "g".into(), "u_D".into()],
        output_channels: vec!["u".into()],
        n_train: None,
        phase_fraction: None,
    };
    Ok(Dataset { samples, meta })
}

pub const DATASET_MAGIC: &[u8; 8] = b"NOPDS01\0";
pub const DATASET_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| Error::InvalidArgument(format!("{v} overflows u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

impl Dataset {
    /// Serializes to the little-endian `NOPDS01` layout.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let Some(first) = self.samples.first() else {
            return invalid("cannot serialize an empty dataset");
        };
        let (nx, ny) = (first.input.nx(), first.input.ny());
        let (c_in, c_out) = (first.input.channels(), first.output.channels());
        if self.meta.input_channels.len() != c_in {
            return invalid("metadata channel list does not match the input channel count");
        }
        let json = serde_json::to_vec(&self.meta)?;
        let mut out = Vec::with_capacity(40 + json.len() + self.samples.len() * (c_in + c_out) * nx * ny * 8);
        out.extend_from_slice(DATASET_MAGIC);
        out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
        for v in [self.samples.len(), nx, ny, c_in, c_out, json.len()] {
            put_u32(&mut out, v)?;
        }
        out.extend_from_slice(&json);
        for s in &self.samples {
            if s.input.shape() != first.input.shape() || s.output.shape() != first.output.shape() {
                return invalid("all samples must share one shape");
            }
            for v in s.input.data().iter().chain(s.output.data()) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        Self::read_from(&mut cur)
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DATASET_MAGIC {
            return Err(Error::Format("bad dataset magic".into()));
        }
        let mut u32s = [0u32; 7];
        for v in &mut u32s {
            let mut b = [0u8; 4];
            r.read_exact(&mut b)?;
            *v = u32::from_le_bytes(b);
        }
        let [version, n, nx, ny, c_in, c_out, json_len] = u32s.map(|v| v as usize);
        if version as u32 != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let mut json = vec![0u8; json_len];
        r.read_exact(&mut json)?;
        let meta: DatasetMeta = serde_json::from_slice(&json)?;
        let mut read_field = |channels: usize| -> Result<GridField2D> {
            let mut buf = vec![0u8; channels * nx * ny * 8];
            r.read_exact(&mut buf)?;
            let data = buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            GridField2D::new(nx, ny, channels, data)
        };
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let input = read_field(c_in)?;
            let output = read_field(c_out)?;
            samples.push(Sample { input, output });
        }
        Ok(Self { samples, meta })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit(shape: GridShape) -> GridField2D {
        GridField2D::from_fn(shape, |_, _, _| 1.0)
    }

    #[test]
    fn rejects_nonpositive_permeability() {
        let shape = GridShape::new(17, 17, 1).unwrap();
        let mut b = unit(shape);
        b.set(0, 3, 3, 0.0);
        let err = DarcyProblem::new(b, unit(shape), GridField2D::zeros(shape)).unwrap_err();
        assert!(matches!(err, Error::InvalidArgument(_)));
    }

    #[test]
    fn constant_boundary_gives_constant_solution() {
        let shape = GridShape::new(21, 21, 1).unwrap();
        let b = randfield::sample_permeability(RngStream::new(3, 0), 21);
        let u_d = GridField2D::from_fn(shape, |_, _, _| 0.7);
        let p = DarcyProblem::new(b, GridField2D::zeros(shape), u_d).unwrap();
        let u = solve_darcy(&p).unwrap();
        let worst = u.data().iter().map(|v| (v - 0.7).abs()).fold(0.0, f64::max);
        // residual target 1e-10, contrast 4
        assert!(worst < 1e-8, "{worst:e}");
    }

    #[test]
    fn manufactured_solution_on_fine_grid() {
        let n = 241;
        let shape = GridShape::new(n, n, 1).unwrap();
        let g = GridField2D::from_fn(shape, |_, x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin());
        let p = DarcyProblem::new(unit(shape), g, GridField2D::zeros(shape)).unwrap();
        let (u, stats) = solve_darcy_with_stats(&p).unwrap();
        assert!(stats.relative_residual <= SOLVER_TOLERANCE);
        let exact = GridField2D::from_fn(shape, |_, x, y| (PI * x).sin() * (PI * y).sin());
        let err = u.data().iter().zip(exact.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-3, "max error {err}");
    }

    #[test]
    fn downsample_examples() {
        let shape = GridShape::new(241, 241, 1).unwrap();
        let f = GridField2D::from_fn(shape, |_, x, y| x + y + x * y * 3.0);
        let c = downsample(&f, 8).unwrap();
        assert_eq!((c.nx(), c.ny()), (31, 31));
        for (ix, iy) in [(0, 0), (30, 0), (0, 30), (30, 30)] {
            assert_eq!(c.get(0, ix, iy), f.get(0, ix * 8, iy * 8));
        }
        assert_eq!(downsample(&f, 4).unwrap().nx(), 61);
        assert_eq!(downsample(&f, 1).unwrap(), f);
        assert!(downsample(&f, 7).is_err());

        let lin = GridField2D::from_fn(GridShape::new(33, 33, 1).unwrap(), |_, x, y| x + y);
        let c = downsample(&lin, 4).unwrap();
        let expect = GridField2D::from_fn(c.shape(), |_, x, y| x + y);
        for (a, b) in c.data().iter().zip(expect.data()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn setting1_sample_contract() {
        let ds = make_dataset_setting1(1, 5, 33, 2).unwrap();
        let s = &ds.samples[0];
        assert_eq!(s.input.channels(), 3);
        assert_eq!(s.output.channels(), 1);
        let n = s.output.nx();
        let shape = s.output.shape();
        for p in 0..shape.nodes() {
            if shape.is_boundary(p) {
                assert_eq!(s.output.data()[p], 0.0);
            }
        }
        let dx = 1.0 / (n - 1) as f64;
        for iy in 0..n {
            for ix in 0..n {
                assert!((s.input.get(0, ix, iy) - ix as f64 * dx).abs() < 1e-15);
                assert!((s.input.get(1, ix, iy) - iy as f64 * dx).abs() < 1e-15);
            }
        }
        assert_eq!(ds.meta.input_channels.len(), 3);
    }

    #[test]
    fn setting2_forced_draws() {
        let n = 17;
        let b = randfield::sample_permeability(RngStream::new(1, 0), n);
        let g = randfield::source_field(1.3, 0.7, n);
        let ud = randfield::boundary_field(0.0005, 0.2, 0.6, n);
        let a = setting2_sample(&b, &g, &ud, 2).unwrap();
        let b2 = setting2_sample(&b, &g, &ud, 2).unwrap();
        assert_eq!(a, b2);
        assert_eq!(a.input.channels(), 4);

        let zero_g = GridField2D::zeros(g.shape());
        let zero_ud = randfield::boundary_field(0.0, 0.2, 0.6, n);
        let z = setting2_sample(&b, &zero_g, &zero_ud, 2).unwrap();
        assert!(z.output.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn dataset_bytes_roundtrip() {
        let ds = make_dataset_setting2(2, 4, 17, 4, 9).unwrap();
        let bytes = ds.to_bytes().unwrap();
        assert_eq!(&bytes[..8], DATASET_MAGIC);
        let back = Dataset::from_bytes(&bytes).unwrap();
        assert_eq!(back, ds);
        assert!(Dataset::from_bytes(&bytes[..20]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Dataset::from_bytes(&bad), Err(Error::Format(_))));
    }

    #[test]
    fn split_is_by_index() {
        let ds = make_dataset_setting1(3, 2, 17, 4).unwrap();
        let (tr, te) = ds.split(2).unwrap();
        assert_eq!(tr.len(), 2);
        assert_eq!(te[0], ds.samples[2]);
        assert!(ds.split(4).is_err());
    }
}
