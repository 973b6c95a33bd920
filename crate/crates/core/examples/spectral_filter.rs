//! Low-pass filtering by Fourier mode truncation on the periodic vertex grid.
//!
//! cargo run --release --example spectral_filter -- [n] [k]

use std::f64::consts::TAU;

use ifno::grid::{fft2_truncated, ifft2_from_truncated};
use ifno::{GridField2D, GridShape};

fn main() -> ifno::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let n = args.first().copied().unwrap_or(33);
    let k = args.get(1).copied().unwrap_or(4);

    // a smooth part at wavenumber (1, 2) plus a ripple at (9, 0)
    let shape = GridShape::new(n, n, 1)?;
    let smooth = |x: f64, y: f64| (TAU * (x + 2.0 * y)).cos();
    let field = GridField2D::from_fn(shape, |_, x, y| smooth(x, y) + 0.3 * (TAU * 9.0 * x).sin());

    let spec = fft2_truncated(&field, k, k)?;
    let filtered = ifft2_from_truncated(&spec, n, n)?;
    let reference = GridField2D::from_fn(shape, |_, x, y| smooth(x, y));

    println!("{n}x{n} grid, keeping {k}x{k} modes");
    for m1 in 0..k {
        let row: Vec<String> = (0..k).map(|m2| format!("{:9.3}", spec.get(0, m1, m2).norm())).collect();
        println!("  |X[{m1}, ..]| {}", row.join(" "));
    }
    let err = filtered.data().iter().zip(reference.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("max deviation from the smooth part: {err:.2e}");
    Ok(())
}
