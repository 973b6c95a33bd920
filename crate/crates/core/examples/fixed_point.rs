//! A hand-assembled IFNO whose layers run Richardson iteration on a 1D Poisson
//! system, checked against the plain iteration and a direct solve.
//!
//! cargo run --release --example fixed_point -- [n] [layers]

use nalgebra::DVector;

use ifno::fixedpoint::{build_linear_ifno, iterate_trace, poisson_1d, FixedPointProblem};

fn main() -> ifno::Result<()> {
    let args: Vec<usize> = std::env::args().skip(1).map(|a| a.parse().expect("integer argument")).collect();
    let n = args.first().copied().unwrap_or(8);
    let layers = args.get(1).copied().unwrap_or(600);

    let a = poisson_1d(n);
    let load = vec![1.0; n];
    let omega = 1.0 / 4.0;
    let exact = a.clone().lu().solve(&DVector::from_element(n, 1.0)).expect("Poisson matrix is invertible");

    let net = build_linear_ifno(&a, &load, omega, layers)?;
    let trace = iterate_trace(&FixedPointProblem::richardson(&a, load, omega), layers)?;
    let readouts = net.layer_readouts()?;
    println!("n = {n}, {} parameters, {layers} layers", net.model.num_params());
    for l in (0..=layers).step_by((layers / 10).max(1)) {
        let err = (DVector::from_column_slice(&readouts[l]) - &exact).norm();
        let dev = trace[l].iter().zip(&readouts[l]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        println!("  layer {l:4}: error {err:.3e}, network vs iteration {dev:.1e}");
    }
    let out = net.solve()?;
    println!("projected output error {:.3e}", (DVector::from_column_slice(&out) - &exact).norm());
    Ok(())
}
