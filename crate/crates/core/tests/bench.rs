use std::path::Path;

use ifno::bench::{
    cmd_eval, cmd_gen_data, cmd_param_audit, cmd_sweep, cmd_train, dataset_path, format_count, ExperimentSpec,
    RunOptions, Setting,
};
use ifno::train::TrainConfig;
use ifno::Variant;

fn tiny_spec(variant: Variant) -> ExperimentSpec {
    ExperimentSpec {
        n_train: 6,
        n_test: 3,
        fine_n: 33,
        stride: 4,
        variant,
        width: 4,
        proj_width: 8,
        modes: [4, 4],
        train: TrainConfig { epochs: 3, lr0: 1e-3, decay_every: 2, batch_size: 4, ..TrainConfig::default() },
        depths: vec![1, 2],
        seeds: vec![0, 1, 2],
        ..ExperimentSpec::default()
    }
}

fn read(path: &Path) -> Vec<u8> {
    std::fs::read(path).unwrap()
}

#[test]
fn gen_data_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for setting in [Setting::Darcy1, Setting::Darcy2] {
        let spec = ExperimentSpec { setting, ..tiny_spec(Variant::Ifno) };
        let sa = cmd_gen_data(&spec, a.path()).unwrap();
        let sb = cmd_gen_data(&spec, b.path()).unwrap();
        assert_eq!(sa.sha256, sb.sha256);
        assert_eq!(read(&dataset_path(a.path())), read(&dataset_path(b.path())));
        assert_eq!(sa.samples, 9);
        assert_eq!(sa.grid, [9, 9]);
    }
}

#[test]
fn train_eval_roundtrip_and_reproducible_files() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let spec = tiny_spec(Variant::Fno);
    let outcomes: Vec<_> = dirs
        .iter()
        .map(|d| {
            cmd_gen_data(&spec, d.path()).unwrap();
            cmd_train(&spec, d.path(), 2, 7, RunOptions::default()).unwrap()
        })
        .collect();
    assert_eq!(read(&outcomes[0].checkpoint), read(&outcomes[1].checkpoint));
    assert_eq!(read(&outcomes[0].history), read(&outcomes[1].history));
    let eval = cmd_eval(&spec, dirs[0].path(), 2, 7).unwrap();
    assert_eq!(eval.test_error, outcomes[0].test_error);
    assert_eq!(eval.train_error, outcomes[0].train_error);
    assert!(cmd_eval(&spec, dirs[0].path(), 4, 7).is_err());
}

#[test]
fn train_without_dataset_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    assert!(cmd_train(&tiny_spec(Variant::Ifno), dir.path(), 1, 0, RunOptions::default()).is_err());
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn sweep_statistics_rederive_from_the_row_file() {
    let dir = tempfile::tempdir().unwrap();
    let fno = tiny_spec(Variant::Fno);
    cmd_gen_data(&fno, dir.path()).unwrap();
    let opts = RunOptions { threads: 2, timing: false };
    let report = cmd_sweep(&fno, dir.path(), opts).unwrap();
    let rows = std::fs::read_to_string(dir.path().join("sweep-fno.csv")).unwrap();
    for depth in [1, 2] {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for line in rows.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            if f[0].parse::<usize>().unwrap() == depth {
                assert!(f[8].is_empty(), "failed job: {line}");
                train.push(f[4].parse::<f64>().unwrap());
                test.push(f[5].parse::<f64>().unwrap());
            }
        }
        assert_eq!(test.len(), 3);
        let s = report.depth(depth).unwrap();
        let (mt, st) = mean_se(&test);
        let (mr, sr) = mean_se(&train);
        assert!((s.mean_test - mt).abs() < 1e-12 && (s.se_test - st).abs() < 1e-12);
        assert!((s.mean_train - mr).abs() < 1e-12 && (s.se_train - sr).abs() < 1e-12);
    }

    // the IFNO sweep reads the same dataset file
    let ifno = tiny_spec(Variant::Ifno);
    let ifno_report = cmd_sweep(&ifno, dir.path(), opts).unwrap();
    assert_eq!(report.dataset_sha256, ifno_report.dataset_sha256);
    assert!(ifno_report.rows.iter().filter(|r| r.depth == 2).all(|r| r.init == "L1"));

    // a second run with two threads reproduces the first byte for byte
    let first = (read(&dir.path().join("sweep-ifno.csv")), read(&ifno.history_path(dir.path(), 2, 1)));
    cmd_sweep(&ifno, dir.path(), RunOptions { threads: 1, timing: false }).unwrap();
    assert_eq!(first.0, read(&dir.path().join("sweep-ifno.csv")));
    assert_eq!(first.1, read(&ifno.history_path(dir.path(), 2, 1)));
}

#[test]
fn spec_json_roundtrip_and_rejection() {
    let spec = tiny_spec(Variant::Ifno);
    assert_eq!(ExperimentSpec::from_json(&spec.to_json()).unwrap(), spec);
    assert!(ExperimentSpec::from_json(r#"{"widht": 4}"#).is_err());
    assert!(ExperimentSpec::from_json(r#"{"modes": [40, 8]}"#).is_err());
    let partial = ExperimentSpec::from_json(r#"{"n_train": 10}"#).unwrap();
    assert_eq!(partial.n_train, 10);
    assert_eq!(partial.width, ExperimentSpec::default().width);
}

#[test]
fn parameter_audit_matches_the_published_table() {
    let report = cmd_param_audit();
    assert!(report.mismatches().is_empty());
    assert_eq!(report.rows.len(), 24);
    assert_eq!(format_count(300_481), "300.48k");
}
