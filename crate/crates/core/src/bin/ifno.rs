use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use ifno::bench::{
    cmd_eval, cmd_gen_data, cmd_param_audit, cmd_sweep, cmd_train, fixedpoint_demo, ExperimentSpec, RunOptions,
};
use ifno::Variant;

#[derive(Parser)]
#[command(name = "ifno", version, about = "Fourier and implicit Fourier neural operators on Darcy flow")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Experiment spec (JSON); missing keys take desk-scale defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the spec's variant.
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Record wall-clock seconds (histories are then not reproducible byte for byte).
    #[arg(long)]
    timing: bool,
}

impl Common {
    fn spec(&self) -> ifno::Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::load(path)?,
            None => ExperimentSpec::default(),
        };
        if let Some(v) = self.variant {
            spec.variant = v;
        }
        Ok(spec)
    }

    fn options(&self) -> RunOptions {
        RunOptions { threads: self.threads.max(1), timing: self.timing }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate the dataset for a spec.
    GenData(Common),
    /// Train one model.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train every depth and seed in the spec and report mean and standard error.
    Sweep(Common),
    /// Evaluate a trained checkpoint.
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Parameter counts against the published table.
    ParamAudit,
    /// Richardson iteration on a 1D Poisson system through a hand-built IFNO.
    FixedpointDemo {
        #[arg(long, default_value_t = 8)]
        n: usize,
        #[arg(long, default_value_t = 0.25)]
        omega: f64,
        #[arg(long, default_value_t = 600)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn print_json(value: &impl Serialize) -> ifno::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> ifno::Result<bool> {
    match cli.command {
        Command::GenData(c) => print_json(&cmd_gen_data(&c.spec()?, &c.out)?)?,
        Command::Train { common: c, depth, seed } => {
            print_json(&cmd_train(&c.spec()?, &c.out, depth, seed, c.options())?)?
        }
        Command::Sweep(c) => {
            let report = cmd_sweep(&c.spec()?, &c.out, c.options())?;
            print!("{}", report.curve_csv());
            let failed = report.rows.iter().filter(|r| r.failure.is_some()).count();
            if failed > 0 {
                eprintln!("{failed} of {} jobs failed; see sweep-{}.csv", report.rows.len(), report.variant);
                return Ok(false);
            }
        }
        Command::Eval { common: c, depth, seed } => print_json(&cmd_eval(&c.spec()?, &c.out, depth, seed)?)?,
        Command::ParamAudit => {
            let report = cmd_param_audit();
            print!("{}", report.table());
            for r in report.mismatches() {
                eprintln!(
                    "mismatch: {} {} L={}: {} ({}), expected {}",
                    r.variant, r.setting, r.layers, r.rendered, r.params, r.expected
                );
            }
            return Ok(report.mismatches().is_empty());
        }
        Command::FixedpointDemo { n, omega, depth, seed } => {
            let demo = fixedpoint_demo(n, omega, depth, seed)?;
            println!(
                "n = {n}, omega = {omega}, increment Lipschitz {:.6}, layer contraction {:.6}, {} parameters",
                demo.lipschitz, demo.contraction, demo.params
            );
            println!("layer,error,deviation");
            for l in demo.layers.iter().filter(|l| l.layer % (depth / 20).max(1) == 0 || l.layer == depth) {
                println!("{},{:e},{:e}", l.layer, l.error, l.deviation);
            }
            println!("projected readout error {:e}", demo.final_error);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
