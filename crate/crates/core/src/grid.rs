//! Uniform-grid fields on the unit square and truncated real 2D Fourier transforms.
//!
//! Fields are stored channel-major, then row-major over `(y, x)`: the value of
//! channel `c` at node `(ix, iy)` lives at `c * nx * ny + iy * nx + ix`. The grid
//! is vertex-centered, so `dx = 1 / (nx - 1)` and both boundaries are nodes.
//!
//! Transforms treat the grid as one period of a periodic field: the last row
//! and column repeat the first, so an `nx x ny` grid carries a
//! `px x py = (nx - 1) x (ny - 1)` periodic cell. The forward transform sums
//! over the cell only; the inverse fills every node, reproducing the first row
//! and column on the last. With this convention `cos(2 pi x)` at the vertices is
//! a single harmonic and a grid refined as `n -> 2n - 1` shares its harmonics
//! with the coarse one at the common nodes.
//!
//! The real-input convention is the usual one for row-major data: the first
//! spectral axis runs over `y` (full spectrum, `py` bins), the second over `x`
//! (half spectrum, `px / 2 + 1` bins). Truncation keeps the corner block
//! `m1 < k1`, `m2 < k2`. The forward transform is unnormalized and the inverse
//! divides by `px * py`.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, ArrayViewMut2};
use num_complex::Complex64;

use crate::error::{invalid, Result};

/// Grid dimensions and channel count, without data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridShape {
    pub nx: usize,
    pub ny: usize,
    pub channels: usize,
}

impl GridShape {
    pub fn new(nx: usize, ny: usize, channels: usize) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return invalid(format!("grid must be at least 2x2, got {nx}x{ny}"));
        }
        if channels == 0 {
            return invalid("field needs at least one channel");
        }
        Ok(Self { nx, ny, channels })
    }

    pub fn nodes(&self) -> usize {
        self.nx * self.ny
    }

    pub fn len(&self) -> usize {
        self.nodes() * self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        let (ix, iy) = (node % self.nx, node / self.nx);
        ix == 0 || iy == 0 || ix == self.nx - 1 || iy == self.ny - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridField2D {
    shape: GridShape,
    data: Vec<f64>,
}

impl GridField2D {
    pub fn new(nx: usize, ny: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        let shape = GridShape::new(nx, ny, channels)?;
        if data.len() != shape.len() {
            return invalid(format!("data length {} does not match {nx}x{ny}x{channels}", data.len()));
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: GridShape) -> Self {
        Self { shape, data: vec![0.0; shape.len()] }
    }

    /// Builds a field from `f(channel, x, y)` evaluated at the node coordinates.
    pub fn from_fn(shape: GridShape, mut f: impl FnMut(usize, f64, f64) -> f64) -> Self {
        let mut data = Vec::with_capacity(shape.len());
        let (dx, dy) = (1.0 / (shape.nx - 1) as f64, 1.0 / (shape.ny - 1) as f64);
        for c in 0..shape.channels {
            for iy in 0..shape.ny {
                for ix in 0..shape.nx {
                    data.push(f(c, ix as f64 * dx, iy as f64 * dy));
                }
            }
        }
        Self { shape, data }
    }

    /// Stacks single- or multi-channel fields on the same grid into one field.
    pub fn stack(parts: &[&GridField2D]) -> Result<Self> {
        let Some(first) = parts.first() else {
            return invalid("cannot stack an empty list of fields");
        };
        let (nx, ny) = (first.nx(), first.ny());
        let mut data = Vec::new();
        for p in parts {
            if p.nx() != nx || p.ny() != ny {
                return invalid("stacked fields must share one grid");
            }
            data.extend_from_slice(&p.data);
        }
        let channels = data.len() / (nx * ny);
        Self::new(nx, ny, channels, data)
    }

    pub fn shape(&self) -> GridShape {
        self.shape
    }

    pub fn nx(&self) -> usize {
        self.shape.nx
    }

    pub fn ny(&self) -> usize {
        self.shape.ny
    }

    pub fn channels(&self) -> usize {
        self.shape.channels
    }

    pub fn dx(&self) -> f64 {
        1.0 / (self.shape.nx - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        1.0 / (self.shape.ny - 1) as f64
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let n = self.shape.nodes();
        &self.data[c * n..(c + 1) * n]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let n = self.shape.nodes();
        &mut self.data[c * n..(c + 1) * n]
    }

    pub fn get(&self, c: usize, ix: usize, iy: usize) -> f64 {
        self.data[c * self.shape.nodes() + iy * self.shape.nx + ix]
    }

    pub fn set(&mut self, c: usize, ix: usize, iy: usize, value: f64) {
        let n = self.shape.nodes();
        self.data[c * n + iy * self.shape.nx + ix] = value;
    }

    pub fn norm_l2(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Truncated complex Fourier coefficients, laid out `[channel][m1][m2]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralTensor {
    pub k1: usize,
    pub k2: usize,
    pub channels: usize,
    pub coeffs: Vec<Complex64>,
}

impl SpectralTensor {
    pub fn zeros(channels: usize, k1: usize, k2: usize) -> Self {
        Self { k1, k2, channels, coeffs: vec![Complex64::new(0.0, 0.0); channels * k1 * k2] }
    }

    pub fn get(&self, c: usize, m1: usize, m2: usize) -> Complex64 {
        self.coeffs[(c * self.k1 + m1) * self.k2 + m2]
    }

    pub fn set(&mut self, c: usize, m1: usize, m2: usize, value: Complex64) {
        self.coeffs[(c * self.k1 + m1) * self.k2 + m2] = value;
    }

    pub fn channel(&self, c: usize) -> &[Complex64] {
        let m = self.k1 * self.k2;
        &self.coeffs[c * m..(c + 1) * m]
    }
}

/// Multiplicity of half-spectrum column `m2` in the Hermitian extension of a
/// sequence with the given period.
pub(crate) fn hermitian_weight(m2: usize, period: usize) -> f64 {
    if m2 == 0 || (period.is_multiple_of(2) && m2 == period / 2) {
        1.0
    } else {
        2.0
    }
}

/// Transform tables for one `nx x ny` grid. Shareable across threads.
///
/// Only `k1 x k2` bins survive truncation, so the transforms are evaluated as
/// dense products with cosine/sine tables rather than full FFTs.
pub struct SpectralPlan {
    nx: usize,
    ny: usize,
    /// `cos / sin(2 pi ix m2 / px)`, `nx x (px / 2 + 1)`; the `_cell` copies
    /// have the seam row `ix = px` zeroed.
    x_cos: Array2<f64>,
    x_sin: Array2<f64>,
    x_cos_cell: Array2<f64>,
    x_sin_cell: Array2<f64>,
    /// `alpha_m2 cos / sin(2 pi m2 ix / px) / (px py)`, `(px / 2 + 1) x nx`.
    xi_cos: Array2<f64>,
    xi_sin: Array2<f64>,
    /// `cos / sin(2 pi m1 iy / py)`, `py x ny`, same seam handling.
    y_cos: Array2<f64>,
    y_sin: Array2<f64>,
    y_cos_cell: Array2<f64>,
    y_sin_cell: Array2<f64>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan").field("nx", &self.nx).field("ny", &self.ny).finish()
    }
}

type PlanCache = Mutex<HashMap<(usize, usize), Arc<SpectralPlan>>>;

fn angle(a: usize, b: usize, n: usize) -> f64 {
    std::f64::consts::TAU * ((a * b) % n) as f64 / n as f64
}

fn without_seam(mut table: Array2<f64>, axis: usize) -> Array2<f64> {
    let last = table.len_of(ndarray::Axis(axis)) - 1;
    table.index_axis_mut(ndarray::Axis(axis), last).fill(0.0);
    table
}

impl SpectralPlan {
    pub fn new(nx: usize, ny: usize) -> Self {
        let (px, py) = (nx - 1, ny - 1);
        let kx = px / 2 + 1;
        let scale = 1.0 / (px * py) as f64;
        let x_cos = Array2::from_shape_fn((nx, kx), |(ix, m)| angle(ix, m, px).cos());
        let x_sin = Array2::from_shape_fn((nx, kx), |(ix, m)| angle(ix, m, px).sin());
        let xi_cos =
            Array2::from_shape_fn((kx, nx), |(m, ix)| hermitian_weight(m, px) * scale * angle(ix, m, px).cos());
        let xi_sin =
            Array2::from_shape_fn((kx, nx), |(m, ix)| hermitian_weight(m, px) * scale * angle(ix, m, px).sin());
        let y_cos = Array2::from_shape_fn((py, ny), |(m, iy)| angle(m, iy, py).cos());
        let y_sin = Array2::from_shape_fn((py, ny), |(m, iy)| angle(m, iy, py).sin());
        Self {
            nx,
            ny,
            x_cos_cell: without_seam(x_cos.clone(), 0),
            x_sin_cell: without_seam(x_sin.clone(), 0),
            y_cos_cell: without_seam(y_cos.clone(), 1),
            y_sin_cell: without_seam(y_sin.clone(), 1),
            x_cos,
            x_sin,
            xi_cos,
            xi_sin,
            y_cos,
            y_sin,
        }
    }

    /// Process-wide cached plan for a grid size.
    pub fn shared(nx: usize, ny: usize) -> Arc<SpectralPlan> {
        static CACHE: OnceLock<PlanCache> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard.entry((nx, ny)).or_insert_with(|| Arc::new(SpectralPlan::new(nx, ny))).clone()
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    /// Largest `(k1, k2)` for this grid: `(ny - 1, (nx - 1) / 2 + 1)`.
    pub fn max_modes(&self) -> (usize, usize) {
        (self.ny - 1, (self.nx - 1) / 2 + 1)
    }

    pub fn check_modes(&self, k1: usize, k2: usize) -> Result<()> {
        let (m1, m2) = self.max_modes();
        if k1 == 0 || k2 == 0 || k1 > m1 || k2 > m2 {
            return invalid(format!("modes ({k1}, {k2}) exceed the {}x{} grid (max {m1}, {m2})", self.nx, self.ny));
        }
        Ok(())
    }

    /// Forward transform of one channel (`ny * nx` values) into `k1 * k2` coefficients.
    pub fn forward(&self, input: &[f64], k1: usize, k2: usize, out: &mut [Complex64]) {
        self.forward_many(input, k1, k2, out);
    }

    /// Inverse of a truncated half-spectrum back to `ny * nx` real values,
    /// zero-filling unretained modes and taking the Hermitian extension.
    pub fn inverse(&self, coeffs: &[Complex64], k1: usize, k2: usize, out: &mut [f64]) {
        self.inverse_many(coeffs, k1, k2, out);
    }

    /// [`forward`](Self::forward) over consecutive channels.
    pub fn forward_many(&self, input: &[f64], k1: usize, k2: usize, out: &mut [Complex64]) {
        self.analyze(input, k1, k2, out, true);
    }

    /// Like [`forward_many`](Self::forward_many) but summing over every node,
    /// seam included. Transposing the inverse gives this map.
    pub(crate) fn adjoint_inverse_many(&self, input: &[f64], k1: usize, k2: usize, out: &mut [Complex64]) {
        self.analyze(input, k1, k2, out, false);
    }

    /// Zeroes the seam row and column of every channel. Transposing the
    /// forward transform gives a field that vanishes there.
    pub(crate) fn clear_seam(&self, data: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        for ch in data.chunks_exact_mut(nx * ny) {
            ch[(ny - 1) * nx..].fill(0.0);
            ch.iter_mut().skip(nx - 1).step_by(nx).for_each(|v| *v = 0.0);
        }
    }

    fn analyze(&self, input: &[f64], k1: usize, k2: usize, out: &mut [Complex64], cell: bool) {
        let (nx, ny) = (self.nx, self.ny);
        let rows = input.len() / nx;
        let channels = rows / ny;
        assert_eq!(input.len(), channels * nx * ny, "input is not a whole number of channels");
        assert_eq!(out.len(), channels * k1 * k2, "output holds {} coefficients", out.len());
        let (xc, xs, yc, ys) = if cell {
            (&self.x_cos_cell, &self.x_sin_cell, &self.y_cos_cell, &self.y_sin_cell)
        } else {
            (&self.x_cos, &self.x_sin, &self.y_cos, &self.y_sin)
        };
        // along x: [re | im] per row
        let x = ArrayView2::from_shape((rows, nx), input).expect("input view");
        let mut ab = Array2::zeros((rows, 2 * k2));
        general_mat_mul(1.0, &x, &xc.slice(s![.., ..k2]), 0.0, &mut ab.slice_mut(s![.., ..k2]));
        general_mat_mul(-1.0, &x, &xs.slice(s![.., ..k2]), 0.0, &mut ab.slice_mut(s![.., k2..]));
        // along y: (cos - i sin)(a + i b) = (cos a + sin b) + i (cos b - sin a)
        let (cy, sy) = (yc.slice(s![..k1, ..]), ys.slice(s![..k1, ..]));
        let mut p = Array2::zeros((k1, 2 * k2));
        let mut q = Array2::zeros((k1, 2 * k2));
        for (c, dst) in out.chunks_exact_mut(k1 * k2).enumerate() {
            let block = ab.slice(s![c * ny..(c + 1) * ny, ..]);
            general_mat_mul(1.0, &cy, &block, 0.0, &mut p);
            general_mat_mul(1.0, &sy, &block, 0.0, &mut q);
            for m1 in 0..k1 {
                for m2 in 0..k2 {
                    dst[m1 * k2 + m2] = Complex64::new(p[[m1, m2]] + q[[m1, k2 + m2]], p[[m1, k2 + m2]] - q[[m1, m2]]);
                }
            }
        }
    }

    /// [`inverse`](Self::inverse) over consecutive channels.
    pub fn inverse_many(&self, coeffs: &[Complex64], k1: usize, k2: usize, out: &mut [f64]) {
        let (nx, ny) = (self.nx, self.ny);
        let modes = k1 * k2;
        let channels = coeffs.len() / modes;
        assert_eq!(coeffs.len(), channels * modes, "coefficients are not a whole number of channels");
        assert_eq!(out.len(), channels * nx * ny, "output holds {} values", out.len());
        // along y: (cos + i sin)(zr + i zi) = (cos zr - sin zi) + i (sin zr + cos zi)
        let (cy, sy) = (self.y_cos.slice(s![..k1, ..]), self.y_sin.slice(s![..k1, ..]));
        let (cy, sy) = (cy.t(), sy.t());
        let mut z = Array2::zeros((k1, 2 * k2));
        let mut p = Array2::zeros((ny, 2 * k2));
        let mut q = Array2::zeros((ny, 2 * k2));
        let mut v = Array2::zeros((channels * ny, 2 * k2));
        for (c, src) in coeffs.chunks_exact(modes).enumerate() {
            for m1 in 0..k1 {
                for m2 in 0..k2 {
                    let w = src[m1 * k2 + m2];
                    z[[m1, m2]] = w.re;
                    z[[m1, k2 + m2]] = w.im;
                }
            }
            general_mat_mul(1.0, &cy, &z, 0.0, &mut p);
            general_mat_mul(1.0, &sy, &z, 0.0, &mut q);
            for iy in 0..ny {
                let row = c * ny + iy;
                for m2 in 0..k2 {
                    v[[row, m2]] = p[[iy, m2]] - q[[iy, k2 + m2]];
                    v[[row, k2 + m2]] = q[[iy, m2]] + p[[iy, k2 + m2]];
                }
            }
        }
        // along x, real part only
        let mut y = ArrayViewMut2::from_shape((channels * ny, nx), out).expect("output view");
        general_mat_mul(1.0, &v.slice(s![.., ..k2]), &self.xi_cos.slice(s![..k2, ..]), 0.0, &mut y);
        general_mat_mul(-1.0, &v.slice(s![.., k2..]), &self.xi_sin.slice(s![..k2, ..]), 1.0, &mut y);
    }
}

/// Per-channel real 2D DFT restricted to the low-frequency corner block.
pub fn fft2_truncated(field: &GridField2D, k1: usize, k2: usize) -> Result<SpectralTensor> {
    let plan = SpectralPlan::shared(field.nx(), field.ny());
    plan.check_modes(k1, k2)?;
    let mut spec = SpectralTensor::zeros(field.channels(), k1, k2);
    plan.forward_many(field.data(), k1, k2, &mut spec.coeffs);
    Ok(spec)
}

pub fn ifft2_from_truncated(spec: &SpectralTensor, nx: usize, ny: usize) -> Result<GridField2D> {
    let shape = GridShape::new(nx, ny, spec.channels)?;
    if spec.coeffs.len() != spec.channels * spec.k1 * spec.k2 {
        return invalid("spectral tensor coefficient count does not match its shape");
    }
    let plan = SpectralPlan::shared(nx, ny);
    plan.check_modes(spec.k1, spec.k2)?;
    let mut field = GridField2D::zeros(shape);
    plan.inverse_many(&spec.coeffs, spec.k1, spec.k2, field.data_mut());
    Ok(field)
}

/// Extends boundary data to the whole grid: given values at the keyed boundary
/// nodes (index `iy * nx + ix`), zero everywhere else.
pub fn zero_pad_boundary(boundary_values: &BTreeMap<usize, Vec<f64>>, shape: GridShape) -> Result<GridField2D> {
    let mut field = GridField2D::zeros(shape);
    let n = shape.nodes();
    for (&node, values) in boundary_values {
        if node >= n {
            return invalid(format!("node {node} is outside the {}x{} grid", shape.nx, shape.ny));
        }
        if !shape.is_boundary(node) {
            return invalid(format!("node {node} is an interior node"));
        }
        if values.len() != shape.channels {
            return invalid(format!("node {node} carries {} values, expected {}", values.len(), shape.channels));
        }
        for (c, &v) in values.iter().enumerate() {
            field.data[c * n + node] = v;
        }
    }
    Ok(field)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn rejects_bad_shapes() {
        assert!(GridField2D::new(1, 4, 1, vec![0.0; 4]).is_err());
        assert!(GridField2D::new(4, 4, 0, vec![]).is_err());
        assert!(GridField2D::new(4, 4, 1, vec![0.0; 15]).is_err());
        let f = GridField2D::zeros(GridShape::new(8, 8, 1).unwrap());
        assert!(fft2_truncated(&f, 8, 3).is_err());
        assert!(fft2_truncated(&f, 3, 5).is_err());
        assert!(fft2_truncated(&f, 7, 4).is_ok());
    }

    #[test]
    fn spacing_is_vertex_centered() {
        let f = GridField2D::zeros(GridShape::new(31, 11, 1).unwrap());
        assert_eq!(f.dx(), 1.0 / 30.0);
        assert_eq!(f.dy(), 0.1);
    }

    #[test]
    fn constant_field_has_only_dc() {
        let f = GridField2D::new(8, 8, 1, vec![5.0; 64]).unwrap();
        let s = fft2_truncated(&f, 3, 3).unwrap();
        for m1 in 0..3 {
            for m2 in 0..3 {
                let c = s.get(0, m1, m2);
                if (m1, m2) == (0, 0) {
                    // sum over the 7 x 7 periodic cell
                    assert!((c.re - 5.0 * 49.0).abs() < 1e-12 && c.im.abs() < 1e-12);
                } else {
                    assert!(c.norm() < 1e-12, "({m1},{m2}) = {c}");
                }
            }
        }
    }

    #[test]
    fn single_x_harmonic_lands_in_half_spectrum_bin_one() {
        let n = 16;
        let f = GridField2D::from_fn(GridShape::new(n, n, 1).unwrap(), |_, x, _| (2.0 * PI * x).cos());
        let s = fft2_truncated(&f, 3, 3).unwrap();
        for m1 in 0..3 {
            for m2 in 0..3 {
                let c = s.get(0, m1, m2);
                if (m1, m2) == (0, 1) {
                    assert!((c.re - 15.0 * 15.0 / 2.0).abs() < 1e-10 && c.im.abs() < 1e-10);
                } else {
                    assert!(c.norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn dc_inversion_gives_constant() {
        let mut s = SpectralTensor::zeros(1, 2, 2);
        s.set(0, 0, 0, Complex64::new(6.0 * 4.0 * 1.5, 0.0));
        let f = ifft2_from_truncated(&s, 7, 5).unwrap();
        assert!(f.data().iter().all(|v| (v - 1.5).abs() < 1e-14));
    }

    #[test]
    fn zero_pad_examples() {
        let shape = GridShape::new(5, 5, 1).unwrap();
        let empty = zero_pad_boundary(&BTreeMap::new(), shape).unwrap();
        assert!(empty.data().iter().all(|&v| v == 0.0));

        let top: BTreeMap<usize, Vec<f64>> = (0..5).map(|ix| (4 * 5 + ix, vec![1.0])).collect();
        let f = zero_pad_boundary(&top, shape).unwrap();
        for iy in 0..5 {
            for ix in 0..5 {
                assert_eq!(f.get(0, ix, iy), if iy == 4 { 1.0 } else { 0.0 });
            }
        }

        let interior: BTreeMap<usize, Vec<f64>> = [(12, vec![1.0])].into();
        assert!(zero_pad_boundary(&interior, shape).is_err());
        let wrong_width: BTreeMap<usize, Vec<f64>> = [(0, vec![1.0, 2.0])].into();
        assert!(zero_pad_boundary(&wrong_width, shape).is_err());
    }

    #[test]
    fn inverse_repeats_first_row_and_column_on_the_seam() {
        let mut s = SpectralTensor::zeros(1, 3, 2);
        s.set(0, 1, 1, Complex64::new(0.3, -1.2));
        s.set(0, 2, 0, Complex64::new(2.0, 0.5));
        let f = ifft2_from_truncated(&s, 6, 7).unwrap();
        for iy in 0..7 {
            assert!((f.get(0, 5, iy) - f.get(0, 0, iy)).abs() < 1e-14);
        }
        for ix in 0..6 {
            assert!((f.get(0, ix, 6) - f.get(0, ix, 0)).abs() < 1e-14);
        }
    }

    #[test]
    fn odd_and_even_grids_roundtrip_full_spectrum() {
        for (nx, ny) in [(6, 5), (7, 8), (9, 9), (2, 3)] {
            let shape = GridShape::new(nx, ny, 2).unwrap();
            // arbitrary values on the cell, wrapped onto the seam
            let f = GridField2D::from_fn(shape, |c, x, y| {
                let (ix, iy) = (
                    (x * (nx - 1) as f64).round() as usize % (nx - 1),
                    (y * (ny - 1) as f64).round() as usize % (ny - 1),
                );
                ((3 * ix + 7 * iy + c) as f64 * 0.37).sin()
            });
            let s = fft2_truncated(&f, ny - 1, (nx - 1) / 2 + 1).unwrap();
            let back = ifft2_from_truncated(&s, nx, ny).unwrap();
            for (a, b) in f.data().iter().zip(back.data()) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
