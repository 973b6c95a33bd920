//! Experiment harness: JSON experiment specs, dataset generation, training
//! jobs, depth sweeps with multi-seed statistics, parameter audits and the
//! fixed-point demonstration. Every command writes plain files into one
//! output directory:
//!
//! ```text
//! out/dataset.bin                    gen-data
//! out/runs-<fingerprint>/            train, sweep (one directory per spec)
//!     <variant>-L<depth>-s<seed>.ckpt
//!     <variant>-L<depth>-s<seed>.csv history
//! out/sweep-<variant>.json           sweep report
//! out/sweep-<variant>.csv            one row per (depth, seed)
//! out/curve-<variant>.csv            depth, mean_train, se_train, mean_test, se_test
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::darcy::{make_dataset_setting1, make_dataset_setting2, Dataset};
use crate::error::{invalid, Error, Result};
use crate::fixedpoint::{
    build_linear_ifno, estimate_contraction, estimate_step_contraction, iterate_trace, poisson_1d, FixedPointProblem,
};
use crate::operator::{count_params, HyperParams, OperatorModel, Variant};
use crate::randfield::RngStream;
use crate::train::{evaluate, shallow_to_deep, train, TrainConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    /// Permeability to pressure, unit source, zero boundary data.
    Darcy1,
    /// Source and boundary data to pressure on one fixed permeability.
    Darcy2,
}

impl Setting {
    pub fn input_channels(self) -> usize {
        match self {
            Setting::Darcy1 => 3,
            Setting::Darcy2 => 4,
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Setting::Darcy1 => "darcy1",
            Setting::Darcy2 => "darcy2",
        }
    }
}

/// One experiment. Missing JSON keys take the desk-scale defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSpec {
    pub setting: Setting,
    pub n_train: usize,
    pub n_test: usize,
    pub fine_n: usize,
    pub stride: usize,
    /// Seed of the per-sample random streams.
    pub data_seed: u64,
    /// Seed of the fixed permeability in setting II.
    pub b_seed: u64,
    pub variant: Variant,
    /// Hidden width `d`.
    pub width: usize,
    /// Projection width `d_Q`.
    pub proj_width: usize,
    pub modes: [usize; 2],
    pub train: TrainConfig,
    pub depths: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Start IFNO depth `L` from a trained depth `L/2` checkpoint when one exists.
    pub shallow_to_deep: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            setting: Setting::Darcy1,
            n_train: 200,
            n_test: 50,
            fine_n: 241,
            stride: 8,
            data_seed: 0,
            b_seed: 1,
            variant: Variant::Ifno,
            width: 16,
            proj_width: 128,
            modes: [8, 8],
            train: TrainConfig { epochs: 100, lr0: 3e-3, decay_every: 25, ..TrainConfig::default() },
            depths: vec![1, 2, 4, 8, 16],
            seeds: vec![0, 1, 2],
            shallow_to_deep: true,
        }
    }
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn hyper(&self, depth: usize) -> HyperParams {
        HyperParams {
            d: self.width,
            d_f: self.setting.input_channels(),
            d_u: 1,
            d_q: self.proj_width,
            k1: self.modes[0],
            k2: self.modes[1],
            layers: depth,
            variant: self.variant,
        }
    }

    pub fn coarse_n(&self) -> usize {
        (self.fine_n - 1) / self.stride.max(1) + 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.depths.is_empty() || self.seeds.is_empty() {
            return invalid("depth and seed lists must not be empty");
        }
        if self.n_train == 0 || self.n_test == 0 {
            return invalid("n_train and n_test must be at least 1");
        }
        if self.train.epochs == 0 {
            return invalid("epochs must be at least 1");
        }
        self.train.validate()?;
        for &depth in &self.depths {
            self.hyper(depth).validate()?;
        }
        if self.stride == 0 || self.fine_n < 17 || !(self.fine_n - 1).is_multiple_of(self.stride) {
            return invalid(format!("stride {} does not divide fine grid {}", self.stride, self.fine_n));
        }
        let n = self.coarse_n();
        if self.modes[0] > n - 1 || self.modes[1] > (n - 1) / 2 + 1 {
            return invalid(format!("modes {:?} exceed the {n}x{n} training grid", self.modes));
        }
        Ok(())
    }

    /// Hash of everything that shapes a trained model, excluding the depth
    /// and seed lists and the variant (those appear in file names).
    pub fn fingerprint(&self) -> String {
        let key = Self { depths: Vec::new(), seeds: Vec::new(), variant: Variant::Fno, ..self.clone() };
        let digest = Sha256::digest(serde_json::to_vec(&key).expect("spec serializes"));
        hex(&digest[..6])
    }

    fn runs_dir(&self, out: &Path) -> PathBuf {
        out.join(format!("runs-{}", self.fingerprint()))
    }

    fn run_stem(&self, depth: usize, seed: u64) -> String {
        format!("{}-L{depth}-s{seed}", self.variant)
    }

    pub fn checkpoint_path(&self, out: &Path, depth: usize, seed: u64) -> PathBuf {
        self.runs_dir(out).join(format!("{}.ckpt", self.run_stem(depth, seed)))
    }

    pub fn history_path(&self, out: &Path, depth: usize, seed: u64) -> PathBuf {
        self.runs_dir(out).join(format!("{}.csv", self.run_stem(depth, seed)))
    }
}

/// Options that affect outputs but not results.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub threads: usize,
    /// Record wall-clock seconds in histories and reports.
    pub timing: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { threads: 1, timing: false }
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().fold(String::with_capacity(2 * bytes.len()), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

pub fn dataset_path(out: &Path) -> PathBuf {
    out.join("dataset.bin")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenDataSummary {
    pub path: PathBuf,
    pub setting: String,
    pub samples: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub grid: [usize; 2],
    pub input_channels: Vec<String>,
    pub output_channels: Vec<String>,
    pub phase_fraction: Option<f64>,
    pub sha256: String,
}

pub fn generate_dataset(spec: &ExperimentSpec) -> Result<Dataset> {
    spec.validate()?;
    let n = spec.n_train + spec.n_test;
    let mut data = match spec.setting {
        Setting::Darcy1 => make_dataset_setting1(n, spec.data_seed, spec.fine_n, spec.stride)?,
        Setting::Darcy2 => make_dataset_setting2(n, spec.data_seed, spec.fine_n, spec.stride, spec.b_seed)?,
    };
    data.meta.n_train = Some(spec.n_train);
    Ok(data)
}

/// Generates `n_train + n_test` samples and writes `out/dataset.bin`.
pub fn cmd_gen_data(spec: &ExperimentSpec, out: &Path) -> Result<GenDataSummary> {
    let data = generate_dataset(spec)?;
    let bytes = data.to_bytes()?;
    std::fs::create_dir_all(out)?;
    let path = dataset_path(out);
    std::fs::write(&path, &bytes)?;
    Ok(GenDataSummary {
        path,
        setting: data.meta.setting.clone(),
        samples: data.len(),
        n_train: spec.n_train,
        n_test: spec.n_test,
        grid: [data.meta.coarse_n, data.meta.coarse_n],
        input_channels: data.meta.input_channels.clone(),
        output_channels: data.meta.output_channels.clone(),
        phase_fraction: data.meta.phase_fraction,
        sha256: sha256_hex(&bytes),
    })
}

/// Reads `out/dataset.bin` and checks that it was generated from `spec`.
/// Returns the dataset and the SHA-256 of its bytes.
pub fn load_dataset(spec: &ExperimentSpec, out: &Path) -> Result<(Dataset, String)> {
    let path = dataset_path(out);
    let bytes = std::fs::read(&path).map_err(|e| {
        Error::InvalidArgument(format!("cannot read dataset {} ({e}); run gen-data first", path.display()))
    })?;
    let data = Dataset::from_bytes(&bytes)?;
    let m = &data.meta;
    let b_seed_ok = spec.setting == Setting::Darcy1 || m.b_seed == Some(spec.b_seed);
    if m.setting != spec.setting.tag()
        || m.base_seed != spec.data_seed
        || m.fine_n != spec.fine_n
        || m.stride != spec.stride
        || !b_seed_ok
    {
        return invalid(format!("{} was generated from a different experiment; rerun gen-data", path.display()));
    }
    if data.len() < spec.n_train + spec.n_test {
        return invalid(format!(
            "{} holds {} samples, need {}",
            path.display(),
            data.len(),
            spec.n_train + spec.n_test
        ));
    }
    Ok((data, sha256_hex(&bytes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome {
    pub variant: Variant,
    pub depth: usize,
    pub seed: u64,
    pub params: usize,
    /// `random` or `L<depth>` for a shallow-to-deep start.
    pub init: String,
    pub train_error: f64,
    pub test_error: f64,
    pub test_se: f64,
    pub first_epoch_loss: f64,
    pub seconds: f64,
    pub checkpoint: PathBuf,
    pub history: PathBuf,
}

fn train_job(
    spec: &ExperimentSpec,
    data: &Dataset,
    out: &Path,
    depth: usize,
    seed: u64,
    grow: bool,
    opts: RunOptions,
) -> Result<TrainOutcome> {
    let started = Instant::now();
    let (train_split, rest) = data.split(spec.n_train)?;
    let test_split = &rest[..spec.n_test];
    let hyper = spec.hyper(depth);
    hyper.validate()?;

    let shallow = spec.checkpoint_path(out, depth / 2, seed);
    let can_grow =
        grow && spec.variant == Variant::Ifno && spec.shallow_to_deep && depth >= 2 && depth.is_multiple_of(2);
    let (model, init) = if can_grow && shallow.exists() {
        let trained = OperatorModel::load(&shallow)?;
        if trained.hyper().with_depth(depth) != hyper {
            return invalid(format!("{} does not match the experiment", shallow.display()));
        }
        (shallow_to_deep(&trained, depth)?, format!("L{}", depth / 2))
    } else {
        let mut model = OperatorModel::init(hyper, seed)?;
        model.fit_normalization(train_split)?;
        (model, "random".to_string())
    };

    let config = TrainConfig { seed, ..spec.train.clone() };
    let (model, history) = train(model, train_split, test_split, &config)?;
    let (train_error, _) = evaluate(&model, train_split)?;
    let (test_error, test_se) = evaluate(&model, test_split)?;

    let checkpoint = spec.checkpoint_path(out, depth, seed);
    let history_path = spec.history_path(out, depth, seed);
    std::fs::create_dir_all(spec.runs_dir(out))?;
    model.save(&checkpoint)?;
    std::fs::write(&history_path, history.to_csv(opts.timing))?;
    Ok(TrainOutcome {
        variant: spec.variant,
        depth,
        seed,
        params: model.num_params(),
        init,
        train_error,
        test_error,
        test_se,
        first_epoch_loss: history.records[0].train_loss,
        seconds: if opts.timing { started.elapsed().as_secs_f64() } else { 0.0 },
        checkpoint,
        history: history_path,
    })
}

/// Trains one `(depth, seed)` job on `out/dataset.bin`. An IFNO with
/// `shallow_to_deep` set starts from the `depth / 2` checkpoint when one exists.
pub fn cmd_train(spec: &ExperimentSpec, out: &Path, depth: usize, seed: u64, opts: RunOptions) -> Result<TrainOutcome> {
    spec.validate()?;
    let (data, _) = load_dataset(spec, out)?;
    train_job(spec, &data, out, depth, seed, true, opts)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub variant: Variant,
    pub depth: usize,
    pub seed: u64,
    pub params: usize,
    pub train_error: f64,
    pub train_se: f64,
    pub test_error: f64,
    pub test_se: f64,
}

/// Evaluates a trained checkpoint on both splits.
pub fn cmd_eval(spec: &ExperimentSpec, out: &Path, depth: usize, seed: u64) -> Result<EvalSummary> {
    spec.validate()?;
    let (data, _) = load_dataset(spec, out)?;
    let path = spec.checkpoint_path(out, depth, seed);
    let model = OperatorModel::load(&path)
        .map_err(|e| Error::InvalidArgument(format!("cannot load {} ({e}); run train first", path.display())))?;
    let (train_split, rest) = data.split(spec.n_train)?;
    let (train_error, train_se) = evaluate(&model, train_split)?;
    let (test_error, test_se) = evaluate(&model, &rest[..spec.n_test])?;
    Ok(EvalSummary {
        variant: spec.variant,
        depth,
        seed,
        params: model.num_params(),
        train_error,
        train_se,
        test_error,
        test_se,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub depth: usize,
    pub seed: u64,
    pub params: usize,
    pub init: String,
    pub train_error: f64,
    pub test_error: f64,
    pub first_epoch_loss: f64,
    pub seconds: f64,
    /// Set when the job failed; the error columns are then NaN.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthSummary {
    pub depth: usize,
    pub params: usize,
    /// Successful seeds.
    pub runs: usize,
    pub mean_train: f64,
    pub se_train: f64,
    pub mean_test: f64,
    pub se_test: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub variant: Variant,
    pub dataset_sha256: String,
    pub spec: ExperimentSpec,
    pub rows: Vec<SweepRow>,
    pub depths: Vec<DepthSummary>,
}

impl SweepReport {
    pub fn depth(&self, depth: usize) -> Option<&DepthSummary> {
        self.depths.iter().find(|d| d.depth == depth)
    }

    /// One line per `(depth, seed)`.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("depth,seed,params,init,train_error,test_error,first_epoch_loss,seconds,failure\n");
        for r in &self.rows {
            let failure = r.failure.as_deref().unwrap_or("").replace([',', '\n'], ";");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                r.depth, r.seed, r.params, r.init, r.train_error, r.test_error, r.first_epoch_loss, r.seconds, failure
            );
        }
        out
    }

    /// Mean and standard error per depth.
    pub fn curve_csv(&self) -> String {
        let mut out = String::from("depth,mean_train,se_train,mean_test,se_test\n");
        for d in &self.depths {
            let _ = writeln!(out, "{},{},{},{},{}", d.depth, d.mean_train, d.se_train, d.mean_test, d.se_test);
        }
        out
    }
}

/// Per-depth mean and standard error over the successful rows.
pub fn summarize(rows: &[SweepRow]) -> Vec<DepthSummary> {
    let mut by_depth: BTreeMap<usize, Vec<&SweepRow>> = BTreeMap::new();
    for r in rows {
        by_depth.entry(r.depth).or_default().push(r);
    }
    by_depth
        .into_iter()
        .map(|(depth, rows)| {
            let ok: Vec<&&SweepRow> = rows.iter().filter(|r| r.failure.is_none()).collect();
            let train: Vec<f64> = ok.iter().map(|r| r.train_error).collect();
            let test: Vec<f64> = ok.iter().map(|r| r.test_error).collect();
            let (mean_train, se_train) = crate::train::mean_and_standard_error(&train);
            let (mean_test, se_test) = crate::train::mean_and_standard_error(&test);
            DepthSummary { depth, params: rows[0].params, runs: ok.len(), mean_train, se_train, mean_test, se_test }
        })
        .collect()
}

/// Trains every `(depth, seed)` pair. Seeds run in parallel; within a seed the
/// depths run in increasing order so shallow-to-deep starts can chain. Only
/// checkpoints written by this sweep seed a deeper run.
pub fn sweep(
    spec: &ExperimentSpec,
    data: &Dataset,
    dataset_sha256: &str,
    out: &Path,
    opts: RunOptions,
) -> Result<SweepReport> {
    spec.validate()?;
    let mut depths = spec.depths.clone();
    depths.sort_unstable();
    depths.dedup();
    let seeds = &spec.seeds;
    let results: Mutex<Vec<Option<Vec<SweepRow>>>> = Mutex::new(vec![None; seeds.len()]);
    let next = AtomicUsize::new(0);
    let worker = || loop {
        let k = next.fetch_add(1, Ordering::Relaxed);
        let Some(&seed) = seeds.get(k) else { break };
        let rows: Vec<SweepRow> = depths
            .iter()
            .map(|&depth| match train_job(spec, data, out, depth, seed, depths.contains(&(depth / 2)), opts) {
                Ok(o) => SweepRow {
                    depth,
                    seed,
                    params: o.params,
                    init: o.init,
                    train_error: o.train_error,
                    test_error: o.test_error,
                    first_epoch_loss: o.first_epoch_loss,
                    seconds: o.seconds,
                    failure: None,
                },
                Err(e) => SweepRow {
                    depth,
                    seed,
                    params: count_params(&spec.hyper(depth)),
                    init: String::new(),
                    train_error: f64::NAN,
                    test_error: f64::NAN,
                    first_epoch_loss: f64::NAN,
                    seconds: 0.0,
                    failure: Some(e.to_string()),
                },
            })
            .collect();
        results.lock().unwrap_or_else(|e| e.into_inner())[k] = Some(rows);
    };
    std::thread::scope(|s| {
        for _ in 1..opts.threads.clamp(1, seeds.len()) {
            s.spawn(worker);
        }
        worker();
    });
    let per_seed = results.into_inner().unwrap_or_else(|e| e.into_inner());
    let mut rows: Vec<SweepRow> = per_seed.into_iter().flatten().flatten().collect();
    rows.sort_by_key(|r| (r.depth, spec.seeds.iter().position(|&s| s == r.seed)));
    Ok(SweepReport {
        variant: spec.variant,
        dataset_sha256: dataset_sha256.to_string(),
        spec: spec.clone(),
        depths: summarize(&rows),
        rows,
    })
}

/// Sweep on `out/dataset.bin`, writing the report, row and curve files.
pub fn cmd_sweep(spec: &ExperimentSpec, out: &Path, opts: RunOptions) -> Result<SweepReport> {
    spec.validate()?;
    let (data, hash) = load_dataset(spec, out)?;
    let report = sweep(spec, &data, &hash, out, opts)?;
    let v = spec.variant;
    std::fs::write(out.join(format!("sweep-{v}.json")), serde_json::to_string_pretty(&report)?)?;
    std::fs::write(out.join(format!("sweep-{v}.csv")), report.rows_csv())?;
    std::fs::write(out.join(format!("curve-{v}.csv")), report.curve_csv())?;
    Ok(report)
}

/// Rounds to two decimals of thousands or millions, ties to even:
/// `171425 -> "171.42k"`, `1339809 -> "1.34M"`.
pub fn format_count(n: usize) -> String {
    let (unit, suffix) = if n >= 1_000_000 {
        (10_000, "M")
    } else if n >= 1_000 {
        (10, "k")
    } else {
        return n.to_string();
    };
    let (q, r) = (n / unit, n % unit);
    let q = match (2 * r).cmp(&unit) {
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal if q % 2 == 1 => q + 1,
        _ => q,
    };
    format!("{}.{:02}{suffix}", q / 100, q % 100)
}

pub const AUDIT_DEPTHS: [usize; 6] = [1, 2, 4, 8, 16, 32];

/// Published parameter counts per `(setting, variant)` for [`AUDIT_DEPTHS`].
pub const PUBLISHED_COUNTS: [(&str, Variant, [&str; 6]); 4] = [
    ("darcy1", Variant::Fno, ["171.42k", "338.37k", "672.26k", "1.34M", "2.68M", "5.35M"]),
    ("darcy1", Variant::Ifno, ["171.42k"; 6]),
    ("darcy2", Variant::Fno, ["300.48k", "596.45k", "1.19M", "2.37M", "4.74M", "9.48M"]),
    ("darcy2", Variant::Ifno, ["300.48k"; 6]),
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRow {
    pub setting: String,
    pub variant: Variant,
    pub layers: usize,
    pub params: usize,
    pub rendered: String,
    pub expected: String,
}

impl AuditRow {
    pub fn matches(&self) -> bool {
        self.rendered == self.expected
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditReport {
    pub rows: Vec<AuditRow>,
}

impl AuditReport {
    pub fn mismatches(&self) -> Vec<&AuditRow> {
        self.rows.iter().filter(|r| !r.matches()).collect()
    }

    /// Plain-text table in the published layout, mismatches marked with `!`.
    pub fn table(&self) -> String {
        let mut out = String::from("model             ");
        for l in AUDIT_DEPTHS {
            let _ = write!(out, "{:>10}", format!("L={l}"));
        }
        out.push('\n');
        for chunk in self.rows.chunks(AUDIT_DEPTHS.len()) {
            let _ =
                write!(out, "{:<18}", format!("{}, {}", chunk[0].variant.as_str().to_uppercase(), chunk[0].setting));
            for r in chunk {
                let mark = if r.matches() { "" } else { "!" };
                let _ = write!(out, "{:>10}", format!("{}{mark}", r.rendered));
            }
            out.push('\n');
        }
        out
    }
}

/// Counts for both Darcy settings' hyperparameters against the published table.
pub fn cmd_param_audit() -> AuditReport {
    let mut rows = Vec::new();
    for (setting, variant, expected) in PUBLISHED_COUNTS {
        for (&layers, expected) in AUDIT_DEPTHS.iter().zip(expected) {
            let hyper = match setting {
                "darcy1" => HyperParams::darcy_setting1(variant, layers),
                _ => HyperParams::darcy_setting2(variant, layers),
            };
            let params = count_params(&hyper);
            rows.push(AuditRow {
                setting: setting.to_string(),
                variant,
                layers,
                params,
                rendered: format_count(params),
                expected: expected.to_string(),
            });
        }
    }
    AuditReport { rows }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointLayer {
    pub layer: usize,
    /// `|U^l - A^-1 F|`.
    pub error: f64,
    /// Largest deviation of the network's layer readout from `U^l`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointDemo {
    pub n: usize,
    pub omega: f64,
    /// Estimated Lipschitz constant of the increment `omega (F - A U)`.
    pub lipschitz: f64,
    /// Estimated contraction constant of the layer map `U + omega (F - A U)`.
    pub contraction: f64,
    pub params: usize,
    pub layers: Vec<FixedPointLayer>,
    /// `|Q(h_L) - A^-1 F|` through the projection network.
    pub final_error: f64,
}

/// Richardson iteration on the `n`-point 1D Poisson matrix, run both directly
/// and through a hand-assembled IFNO of depth `layers`.
pub fn fixedpoint_demo(n: usize, omega: f64, layers: usize, seed: u64) -> Result<FixedPointDemo> {
    let a = poisson_1d(n);
    let load: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.7).sin()).collect();
    let exact = a
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NumericalFailure("Poisson matrix is not positive definite".into()))?
        .solve(&DVector::from_column_slice(&load));
    let problem = FixedPointProblem::richardson(&a, load.clone(), omega);
    let lipschitz = estimate_contraction(&problem, 1000, RngStream::new(seed, 0))?;
    let contraction = estimate_step_contraction(&problem, 1000, RngStream::new(seed, 1))?;
    let trace = iterate_trace(&problem, layers)?;
    let net = build_linear_ifno(&a, &load, omega, layers)?;
    let readouts = net.layer_readouts()?;
    let dist = |u: &[f64]| (DVector::from_column_slice(u) - &exact).norm();
    let rows = trace
        .iter()
        .zip(&readouts)
        .enumerate()
        .map(|(layer, (u, r))| FixedPointLayer {
            layer,
            error: dist(u),
            deviation: u.iter().zip(r).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max),
        })
        .collect();
    Ok(FixedPointDemo {
        n,
        omega,
        lipschitz,
        contraction,
        params: net.model.num_params(),
        layers: rows,
        final_error: dist(&net.solve()?),
    })
}

/// Spectral norm of a square matrix, for comparing against contraction estimates.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    m.clone().singular_values().max()
}
