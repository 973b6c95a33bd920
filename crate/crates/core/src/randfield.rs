//! Seeded samplers for every stochastic input of the Darcy settings.
//!
//! # Generator
//!
//! Every draw comes from xoshiro256++ (Blackman and Vigna). A stream
//! `(seed, stream_index)` is initialised with
//! `seed ^ stream_index.wrapping_mul(0x9E37_79B9_7F4A_7C15)` expanded to the
//! 256-bit state by SplitMix64, exactly as `rand_xoshiro`'s `seed_from_u64`.
//! Uniform variates are `(next_u64 >> 11) * 2^-53` in `[0, 1)`. Normal variates
//! use Box–Muller on two uniforms `u1, u2`:
//! `sqrt(-2 ln(1 - u1)) * (cos, sin)(2 pi u2)`, returning the cosine branch
//! first and caching the sine branch for the next call. Any implementation of
//! these three steps reproduces the streams bit for bit.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rustfft::FftPlanner;

use crate::grid::{zero_pad_boundary, GridField2D, GridShape};

const STREAM_MIX: u64 = 0x9E37_79B9_7F4A_7C15;

/// Identifies one reproducible random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RngStream {
    pub seed: u64,
    pub stream_index: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        Self { seed, stream_index }
    }

    pub fn draws(&self) -> Draws {
        let state = self.seed ^ self.stream_index.wrapping_mul(STREAM_MIX);
        Draws { rng: Xoshiro256PlusPlus::seed_from_u64(state), spare: None }
    }
}

/// A live stream of uniform and normal variates.
#[derive(Debug, Clone)]
pub struct Draws {
    rng: Xoshiro256PlusPlus,
    spare: Option<f64>,
}

impl Draws {
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let (s, c) = (2.0 * PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    /// Uniform index in `0..n` by rejection, free of modulo bias.
    pub fn index(&mut self, n: usize) -> usize {
        let n = n as u64;
        let zone = u64::MAX - u64::MAX % n;
        loop {
            let v = self.rng.next_u64();
            if v < zone {
                return (v % n) as usize;
            }
        }
    }

    /// Fisher–Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }
}

/// Latent Gaussian field with covariance `(-Laplacian + 9 I)^-2` under
/// zero-Neumann conditions, synthesised in the cosine eigenbasis with modes
/// `i, j < n` and evaluated on the `n x n` vertex grid.
pub fn gaussian_latent(rng: RngStream, n: usize) -> GridField2D {
    assert!(n >= 2, "latent field needs n >= 2");
    let mut draws = rng.draws();
    // coef[i * n + j] multiplies phi_i(x) phi_j(y)
    let mut coef = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            let eig = PI * PI * ((i * i + j * j) as f64);
            coef[i * n + j] = draws.normal() / (eig + 9.0);
        }
    }
    // basis[i * n + a] = phi_i(a / (n - 1)), orthonormal on [0, 1]
    let mut basis = vec![0.0; n * n];
    for i in 0..n {
        let norm = if i == 0 { 1.0 } else { 2f64.sqrt() };
        for a in 0..n {
            basis[i * n + a] = norm * (PI * (i * a) as f64 / (n - 1) as f64).cos();
        }
    }
    // partial[j * n + a] = sum_i coef[i, j] phi_i(x_a)
    let mut partial = vec![0.0; n * n];
    for i in 0..n {
        let phi = &basis[i * n..(i + 1) * n];
        for j in 0..n {
            let c = coef[i * n + j];
            let row = &mut partial[j * n..(j + 1) * n];
            for (p, b) in row.iter_mut().zip(phi) {
                *p += c * b;
            }
        }
    }
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        let phi = &basis[j * n..(j + 1) * n];
        let row = &partial[j * n..(j + 1) * n];
        for b in 0..n {
            let w = phi[b];
            let dst = &mut out[b * n..(b + 1) * n];
            for (d, p) in dst.iter_mut().zip(row) {
                *d += w * p;
            }
        }
    }
    GridField2D::new(n, n, 1, out).expect("latent shape")
}

pub const PERMEABILITY_HIGH: f64 = 12.0;
pub const PERMEABILITY_LOW: f64 = 3.0;

/// Two-phase permeability: 12 where the latent Gaussian is positive, 3 elsewhere.
pub fn sample_permeability(rng: RngStream, n: usize) -> GridField2D {
    assert!(n >= 8, "permeability grid needs n >= 8");
    let mut field = gaussian_latent(rng, n);
    for v in field.data_mut() {
        *v = if *v > 0.0 { PERMEABILITY_HIGH } else { PERMEABILITY_LOW };
    }
    field
}

#[derive(Debug, Clone)]
pub struct SourceSample {
    pub field: GridField2D,
    pub a_x: f64,
    pub a_y: f64,
}

/// `g(x, y) = cos(2 pi a_x x) cos(2 pi a_y y)` on the `n x n` grid.
pub fn source_field(a_x: f64, a_y: f64, n: usize) -> GridField2D {
    let shape = GridShape::new(n, n, 1).expect("source grid needs n >= 2");
    GridField2D::from_fn(shape, |_, x, y| (2.0 * PI * a_x * x).cos() * (2.0 * PI * a_y * y).cos())
}

pub fn sample_source_setting2(rng: RngStream, n: usize) -> SourceSample {
    let mut draws = rng.draws();
    draw_source(&mut draws, n)
}

pub(crate) fn draw_source(draws: &mut Draws, n: usize) -> SourceSample {
    let a_x = draws.uniform_in(0.5, 2.0);
    let a_y = draws.uniform_in(0.5, 2.0);
    SourceSample { field: source_field(a_x, a_y, n), a_x, a_y }
}

#[derive(Debug, Clone)]
pub struct BoundarySample {
    pub field: GridField2D,
    pub u0: f64,
    pub t1: f64,
    pub t2: f64,
}

/// Zero-padded Dirichlet data: the top edge carries
/// `u0 (t1 sin(2 pi x) + t2 sin(4 pi x)) / (t1 + t2)`, the other three edges
/// carry `u0`. Top corners belong to the top edge.
pub fn boundary_field(u0: f64, t1: f64, t2: f64, n: usize) -> GridField2D {
    let shape = GridShape::new(n, n, 1).expect("boundary grid needs n >= 2");
    let dx = 1.0 / (n - 1) as f64;
    let mut values = BTreeMap::new();
    for node in 0..shape.nodes() {
        if !shape.is_boundary(node) {
            continue;
        }
        let (ix, iy) = (node % n, node / n);
        let v = if iy == n - 1 {
            let x = ix as f64 * dx;
            u0 * (t1 * (2.0 * PI * x).sin() + t2 * (4.0 * PI * x).sin()) / (t1 + t2)
        } else {
            u0
        };
        values.insert(node, vec![v]);
    }
    zero_pad_boundary(&values, shape).expect("boundary keys are boundary nodes")
}

pub fn sample_boundary_setting2(rng: RngStream, n: usize) -> BoundarySample {
    let mut draws = rng.draws();
    draw_boundary(&mut draws, n)
}

pub(crate) fn draw_boundary(draws: &mut Draws, n: usize) -> BoundarySample {
    let u0 = draws.uniform_in(-0.001, 0.001);
    let (mut t1, mut t2) = (draws.uniform(), draws.uniform());
    while t1 + t2 == 0.0 {
        t1 = draws.uniform();
        t2 = draws.uniform();
    }
    BoundarySample { field: boundary_field(u0, t1, t2, n), u0, t1, t2 }
}

/// Signed integer wavenumber of FFT bin `m` on an `n`-point axis.
pub(crate) fn wavenumber(m: usize, n: usize) -> f64 {
    if m <= n / 2 {
        m as f64
    } else {
        m as f64 - n as f64
    }
}

/// Filters white noise by `(w1^2 + w2^2)^(exponent / 2)` in Fourier space,
/// zeroing the mean mode.
pub fn correlated_from_noise(noise: &GridField2D, exponent: f64) -> GridField2D {
    let (nx, ny) = (noise.nx(), noise.ny());
    let mut planner = FftPlanner::new();
    let (fx, fy) = (planner.plan_fft_forward(nx), planner.plan_fft_forward(ny));
    let (ix, iy) = (planner.plan_fft_inverse(nx), planner.plan_fft_inverse(ny));
    let mut buf: Vec<Complex64> = noise.channel(0).iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_2d(&mut buf, nx, ny, &*fx, &*fy);
    for m1 in 0..ny {
        let w1 = wavenumber(m1, ny);
        for m2 in 0..nx {
            let w2 = wavenumber(m2, nx);
            let r2 = w1 * w1 + w2 * w2;
            let gain = if r2 == 0.0 { 0.0 } else { r2.powf(exponent / 2.0) };
            buf[m1 * nx + m2] *= gain;
        }
    }
    fft_2d(&mut buf, nx, ny, &*ix, &*iy);
    let scale = 1.0 / (nx * ny) as f64;
    let data = buf.iter().map(|v| v.re * scale).collect();
    GridField2D::new(nx, ny, 1, data).expect("same shape as noise")
}

fn fft_2d(
    buf: &mut [Complex64],
    nx: usize,
    ny: usize,
    along_x: &dyn rustfft::Fft<f64>,
    along_y: &dyn rustfft::Fft<f64>,
) {
    along_x.process(buf);
    let mut col = vec![Complex64::new(0.0, 0.0); ny];
    for x in 0..nx {
        for y in 0..ny {
            col[y] = buf[y * nx + x];
        }
        along_y.process(&mut col);
        for y in 0..ny {
            buf[y * nx + x] = col[y];
        }
    }
}

/// Correlated Gaussian field `F^-1(gamma^1/2 F(white noise))` with
/// `gamma = (w1^2 + w2^2)^exponent`; the traction sampler uses `exponent = -5/4`.
pub fn sample_correlated_field(rng: RngStream, n: usize, exponent: f64) -> GridField2D {
    assert!(n >= 8, "correlated field needs n >= 8");
    let mut draws = rng.draws();
    let noise: Vec<f64> = (0..n * n).map(|_| draws.normal()).collect();
    let noise = GridField2D::new(n, n, 1, noise).expect("noise shape");
    correlated_from_noise(&noise, exponent)
}

pub const TRACTION_EXPONENT: f64 = -1.25;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a: Vec<u64> = {
            let mut d = RngStream::new(7, 3).draws();
            (0..8).map(|_| d.next_u64()).collect()
        };
        let b: Vec<u64> = {
            let mut d = RngStream::new(7, 3).draws();
            (0..8).map(|_| d.next_u64()).collect()
        };
        let c: Vec<u64> = {
            let mut d = RngStream::new(7, 4).draws();
            (0..8).map(|_| d.next_u64()).collect()
        };
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn uniform_and_normal_moments() {
        let mut d = RngStream::new(1, 0).draws();
        let n = 200_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let z = d.normal();
            s += z;
            s2 += z * z;
        }
        assert!((s / n as f64).abs() < 0.01);
        assert!((s2 / n as f64 - 1.0).abs() < 0.01);
        let u: f64 = (0..n).map(|_| d.uniform()).sum::<f64>() / n as f64;
        assert!((u - 0.5).abs() < 0.005);
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut v: Vec<usize> = (0..50).collect();
        RngStream::new(3, 1).draws().shuffle(&mut v);
        let mut sorted = v.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
        assert_ne!(v, sorted);
    }

    #[test]
    fn permeability_two_phase_and_repeatable() {
        let a = sample_permeability(RngStream::new(11, 5), 31);
        let b = sample_permeability(RngStream::new(11, 5), 31);
        assert_eq!(a, b);
        assert!(a.data().iter().all(|&v| v == 12.0 || v == 3.0));
        assert_eq!(PERMEABILITY_HIGH / PERMEABILITY_LOW, 4.0);
    }

    #[test]
    fn source_forced_values() {
        let g = source_field(1.0, 1.0, 5);
        assert!((g.get(0, 0, 0) - 1.0).abs() < 1e-15);
        assert!((g.get(0, 2, 2) - 1.0).abs() < 1e-15);
        assert!(g.get(0, 1, 1).abs() < 1e-15);
        let s = sample_source_setting2(RngStream::new(2, 9), 17);
        assert!(s.field.data().iter().all(|v| v.abs() <= 1.0));
        assert!((0.5..2.0).contains(&s.a_x) && (0.5..2.0).contains(&s.a_y));
    }

    #[test]
    fn boundary_forced_values() {
        let zero = boundary_field(0.0, 0.3, 0.8, 9);
        assert!(zero.data().iter().all(|&v| v == 0.0));

        let n = 9;
        let f = boundary_field(0.001, 1.0, 0.0, n);
        for ix in 0..n {
            let x = ix as f64 / (n - 1) as f64;
            assert!((f.get(0, ix, n - 1) - 0.001 * (2.0 * PI * x).sin()).abs() < 1e-18);
        }
        assert!(f.get(0, 0, n - 1).abs() < 1e-18);
        assert!(f.get(0, n - 1, n - 1).abs() < 1e-18);
        assert_eq!(f.get(0, 0, 3), 0.001);
        assert_eq!(f.get(0, n - 1, 3), 0.001);
        assert_eq!(f.get(0, 4, 0), 0.001);
        assert_eq!(f.get(0, 4, 4), 0.0);
    }

    #[test]
    fn correlated_zero_noise_is_zero() {
        let noise = GridField2D::zeros(GridShape::new(16, 16, 1).unwrap());
        let f = correlated_from_noise(&noise, TRACTION_EXPONENT);
        assert!(f.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn correlated_field_has_zero_mean() {
        for idx in 0..5 {
            let f = sample_correlated_field(RngStream::new(4, idx), 32, TRACTION_EXPONENT);
            let mean = f.data().iter().sum::<f64>() / f.data().len() as f64;
            assert!(mean.abs() < 1e-10, "mean {mean}");
        }
    }
}
