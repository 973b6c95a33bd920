//! Solve -div(b grad u) = 1 on a random two-phase medium and check the flux balance.
//!
//! cargo run --release --example darcy_solve -- [n] [seed]

use ifno::darcy::{boundary_flux, solve_darcy_with_stats, DarcyProblem};
use ifno::randfield::{sample_permeability, RngStream};
use ifno::GridField2D;

fn main() -> ifno::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let n = args.first().copied().unwrap_or(121) as usize;
    let seed = args.get(1).copied().unwrap_or(0);

    let b = sample_permeability(RngStream::new(seed, 0), n);
    let shape = b.shape();
    let g = GridField2D::from_fn(shape, |_, _, _| 1.0);
    let problem = DarcyProblem::new(b, g, GridField2D::zeros(shape))?;
    let (u, stats) = solve_darcy_with_stats(&problem)?;

    let h = u.dx();
    let source = (n - 2).pow(2) as f64 * h * h;
    let flux = boundary_flux(&problem, &u);
    let peak = u.data().iter().cloned().fold(f64::MIN, f64::max);
    println!("{n}x{n}: {} CG iterations, relative residual {:.1e}", stats.iterations, stats.relative_residual);
    println!("max u = {peak:.5e}, boundary flux {flux:.10} vs source {source:.10}");
    Ok(())
}
