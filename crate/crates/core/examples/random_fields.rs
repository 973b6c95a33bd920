//! Seeded input fields: two-phase permeability and the setting-II source and
//! boundary draws.
//!
//! cargo run --release --example random_fields -- [seed]

use ifno::randfield::{sample_boundary_setting2, sample_permeability, sample_source_setting2, RngStream};

fn main() {
    let seed = std::env::args().nth(1).map(|s| s.parse().expect("integer seed")).unwrap_or(0);
    let n = 31;

    let b = sample_permeability(RngStream::new(seed, 0), n);
    let high = b.data().iter().filter(|v| **v > 6.0).count() as f64 / b.data().len() as f64;
    println!("permeability {n}x{n}, high-phase fraction {high:.3}");
    for iy in (0..n).rev().step_by(3) {
        let row: String = (0..n).map(|ix| if b.get(0, ix, iy) > 6.0 { '#' } else { '.' }).collect();
        println!("  {row}");
    }

    let g = sample_source_setting2(RngStream::new(seed, 1), n);
    println!("source cos(2 pi {:.3} x) cos(2 pi {:.3} y)", g.a_x, g.a_y);
    let bd = sample_boundary_setting2(RngStream::new(seed, 1), n);
    println!("boundary u0 = {:.2e}, t = ({:.3}, {:.3})", bd.u0, bd.t1, bd.t2);
}
