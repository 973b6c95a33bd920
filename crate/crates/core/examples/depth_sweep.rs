//! A reduced depth sweep through the benchmark harness: dataset generation,
//! FNO and IFNO runs over depths and seeds, mean and standard error per depth.
//!
//! cargo run --release --example depth_sweep -- [out_dir]

use std::path::PathBuf;

use ifno::bench::{cmd_gen_data, cmd_sweep, ExperimentSpec, RunOptions};
use ifno::train::TrainConfig;
use ifno::Variant;

fn main() -> ifno::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("ifno-sweep"));
    let base = ExperimentSpec {
        n_train: 40,
        n_test: 20,
        fine_n: 121,
        stride: 4,
        train: TrainConfig { epochs: 20, lr0: 3e-3, decay_every: 5, ..TrainConfig::default() },
        depths: vec![1, 2, 4],
        seeds: vec![0, 1],
        ..ExperimentSpec::default()
    };
    let summary = cmd_gen_data(&base, &out)?;
    println!("dataset {} ({} samples, sha256 {})", summary.path.display(), summary.samples, &summary.sha256[..12]);
    for variant in [Variant::Fno, Variant::Ifno] {
        let report = cmd_sweep(&ExperimentSpec { variant, ..base.clone() }, &out, RunOptions::default())?;
        println!("{variant}");
        print!("{}", report.curve_csv());
    }
    Ok(())
}
