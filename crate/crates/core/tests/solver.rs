use std::f64::consts::PI;

use ifno::darcy::{boundary_flux, relative_residual, solve_darcy, DarcyProblem};
use ifno::randfield::{
    correlated_from_noise, gaussian_latent, sample_boundary_setting2, sample_permeability, RngStream,
    PERMEABILITY_HIGH, PERMEABILITY_LOW,
};
use ifno::{GridField2D, GridShape};

fn constant(n: usize, v: f64) -> GridField2D {
    GridField2D::from_fn(GridShape::new(n, n, 1).unwrap(), |_, _, _| v)
}

fn manufactured_error(n: usize) -> f64 {
    let shape = GridShape::new(n, n, 1).unwrap();
    let exact = GridField2D::from_fn(shape, |_, x, y| (PI * x).sin() * (PI * y).sin());
    let g = GridField2D::from_fn(shape, |_, x, y| 2.0 * PI * PI * (PI * x).sin() * (PI * y).sin());
    let problem = DarcyProblem::new(constant(n, 1.0), g, GridField2D::zeros(shape)).unwrap();
    let u = solve_darcy(&problem).unwrap();
    u.data().iter().zip(exact.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

#[test]
fn manufactured_solution_converges_at_second_order() {
    let errors: Vec<f64> = [33, 65, 129].iter().map(|&n| manufactured_error(n)).collect();
    for w in errors.windows(2) {
        let order = (w[0] / w[1]).log2();
        assert!((order - 2.0).abs() <= 0.3, "errors {errors:?}, order {order}");
    }
}

#[test]
fn boundary_flux_balances_the_source() {
    for seed in 0..3 {
        let n = 49;
        let b = sample_permeability(RngStream::new(seed, 0), n);
        let g = GridField2D::from_fn(b.shape(), |_, x, y| 1.0 + x * y);
        let h = 1.0 / (n - 1) as f64;
        let source: f64 =
            (1..n - 1).flat_map(|iy| (1..n - 1).map(move |ix| (ix, iy))).map(|(ix, iy)| g.get(0, ix, iy) * h * h).sum();
        let problem = DarcyProblem::new(b, g, GridField2D::zeros(GridShape::new(n, n, 1).unwrap())).unwrap();
        let u = solve_darcy(&problem).unwrap();
        assert!(relative_residual(&problem, &u) <= 1e-10);
        let flux = boundary_flux(&problem, &u);
        assert!((flux - source).abs() <= 1e-8 * source.abs(), "flux {flux} vs source {source}");
    }
}

#[test]
fn harmonic_solutions_obey_the_maximum_principle() {
    let n = 41;
    let b = sample_permeability(RngStream::new(5, 0), n);
    let bd = sample_boundary_setting2(RngStream::new(6, 0), n).field;
    let shape = bd.shape();
    let boundary: Vec<f64> = (0..shape.nodes()).filter(|&i| shape.is_boundary(i)).map(|i| bd.data()[i]).collect();
    let lo = boundary.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = boundary.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let problem = DarcyProblem::new(b, GridField2D::zeros(shape), bd).unwrap();
    let u = solve_darcy(&problem).unwrap();
    let slack = 1e-9 * (hi - lo);
    for &v in u.data() {
        assert!(v >= lo - slack && v <= hi + slack, "{v} outside [{lo}, {hi}]");
    }
}

#[test]
fn latent_field_variance_matches_the_covariance_operator() {
    let (n, draws) = (9usize, 4000u64);
    let mut want = 0.0;
    for i in 0..n {
        for j in 0..n {
            let w = if i == 0 { 1.0 } else { 2.0 } * if j == 0 { 1.0 } else { 2.0 };
            want += w / (PI * PI * (i * i + j * j) as f64 + 9.0).powi(2);
        }
    }
    let (mut sum, mut sq) = (0.0, 0.0);
    for s in 0..draws {
        let v = gaussian_latent(RngStream::new(s, 0), n).get(0, 0, 0);
        sum += v;
        sq += v * v;
    }
    let mean = sum / draws as f64;
    let var = sq / draws as f64 - mean * mean;
    // sample variance has relative spread sqrt(2 / draws) ~ 2%
    assert!((var / want - 1.0).abs() < 0.08, "variance {var}, expected {want}");
    assert!(mean.abs() < 4.0 * (want / draws as f64).sqrt());
}

#[test]
fn permeability_is_two_phase_and_balanced() {
    let (n, fields) = (33usize, 100u64);
    let mut high = 0usize;
    for s in 0..fields {
        let b = sample_permeability(RngStream::new(s, 0), n);
        for &v in b.data() {
            assert!(v == PERMEABILITY_HIGH || v == PERMEABILITY_LOW);
            high += (v == PERMEABILITY_HIGH) as usize;
        }
    }
    let fraction = high as f64 / (fields as usize * n * n) as f64;
    assert!((fraction - 0.5).abs() < 0.07, "high-phase fraction {fraction}");
}

#[test]
fn correlated_filter_scales_single_modes() {
    let (nx, ny, exponent) = (16, 12, -1.5);
    let shape = GridShape::new(nx, ny, 1).unwrap();
    let mode = |ix: usize, iy: usize| (2.0 * PI * (3.0 * ix as f64 / nx as f64 + 2.0 * iy as f64 / ny as f64)).cos();
    let mut noise = GridField2D::zeros(shape);
    for iy in 0..ny {
        for ix in 0..nx {
            noise.set(0, ix, iy, 5.0 + mode(ix, iy));
        }
    }
    let out = correlated_from_noise(&noise, exponent);
    let gain = 13f64.powf(exponent / 2.0);
    for iy in 0..ny {
        for ix in 0..nx {
            assert!((out.get(0, ix, iy) - gain * mode(ix, iy)).abs() < 1e-12);
        }
    }
}

#[test]
fn normal_draws_have_unit_moments() {
    let mut d = RngStream::new(42, 7).draws();
    let n = 200_000;
    let xs: Vec<f64> = (0..n).map(|_| d.normal()).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    assert!(mean.abs() < 0.01);
    assert!((var - 1.0).abs() < 0.01);
    let mut d = RngStream::new(42, 8).draws();
    assert!((0..n).map(|_| d.uniform()).all(|u| (0.0..1.0).contains(&u)));
}
