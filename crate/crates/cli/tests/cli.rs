use std::process::Command;

use sepnn::linalg::io::read_matrix;
use sepnn::model::load_checkpoint;
use sepnn::optim::TrainConfig;
use sepnn::states::{Family, FamilySpec, LossKind};
use sepnn_cli::harness::{run_scan, train_point, write_scan, ScanSpec};
use sepnn_cli::output::read_meta;

fn sepnn() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sepnn"))
}

fn small_config() -> TrainConfig {
    TrainConfig {
        max_epochs: 2,
        batches_per_epoch: 150,
        seed: 11,
        ..TrainConfig::default()
    }
}

#[test]
fn train_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let status = sepnn()
        .args(["train", "--family", "werner", "--d", "2", "--q", "0.9", "--epochs", "1", "--batches", "100", "--log"])
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(dir.path().join("result.csv")).unwrap();
    let meta = read_meta(&text);
    assert!(meta.iter().any(|(k, v)| k == "prng" && v.starts_with("ChaCha8")));
    let distance: f64 = text.lines().last().unwrap().split(',').next().unwrap().parse().unwrap();

    let model = load_checkpoint(dir.path().join("model.ckpt")).unwrap();
    let state = model.assemble().unwrap().state;
    let (m, dims) = read_matrix(dir.path().join("state.txt")).unwrap();
    assert_eq!(dims, vec![2, 2]);
    assert!(m.max_abs_diff(state.matrix()) < 1e-15);
    let target = FamilySpec::new(Family::Werner, 2, 0.9).build().unwrap();
    let recomputed = sepnn::linalg::trace_distance(&target, &state).unwrap();
    assert!((recomputed - distance).abs() < 1e-12);
    assert!(dir.path().join("train_log.csv").exists());
}

#[test]
fn usage_errors_exit_with_two() {
    let bad = [
        vec!["train", "--family", "isotropic", "--q", "x"],
        vec!["train", "--family", "isotropic", "--q", "2.0"],
        vec!["train", "--family", "isotropic", "--q", "0.5", "--structure", "cut:1|1"],
        vec!["scan", "--family", "isotropic", "--grid", "0.5,0.2"],
        vec!["train", "--family", "nope", "--q", "0.5"],
    ];
    for args in bad {
        let dir = tempfile::tempdir().unwrap();
        let out = sepnn().args(&args).arg("--out").arg(dir.path()).output().unwrap();
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn empty_random_bench_is_a_header_only_csv() {
    let dir = tempfile::tempdir().unwrap();
    let status = sepnn().args(["random-bench", "--count", "0"]).arg("--out").arg(dir.path()).status().unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(dir.path().join("random_bench.csv")).unwrap();
    assert!(text.lines().last().unwrap().starts_with("state_seed,"));
}

#[test]
fn gd_bench_smoke_run() {
    let dir = tempfile::tempdir().unwrap();
    let status = sepnn()
        .args(["gd-bench", "--runs", "1", "--rounds", "1"])
        .arg("--out")
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(dir.path().join("gd_bench.csv")).unwrap();
    // 2 targets x 2 modes x 1 run x 2 values.
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 8);
}

fn scan_spec(workers: usize) -> ScanSpec {
    ScanSpec {
        family: FamilySpec::new(Family::Isotropic, 2, 0.0),
        structure: "full".into(),
        config: small_config(),
        grid: vec![0.2, 0.5, 0.7, 0.85, 1.0],
        workers,
        flat_tol: 5e-3,
        fit_window: 4,
    }
}

#[test]
fn scan_is_independent_of_worker_count() {
    let one = run_scan(&scan_spec(1)).unwrap();
    let three = run_scan(&scan_spec(3)).unwrap();
    let strip = |o: &sepnn_cli::harness::ScanOutcome| -> Vec<(u64, u64, String, u64)> {
        o.rows.iter().map(|r| (r.q.to_bits(), r.best_distance.to_bits(), r.status.clone(), r.seed)).collect()
    };
    assert_eq!(strip(&one), strip(&three));
    let mut a = Vec::new();
    write_scan(&mut a, &scan_spec(1), &one).unwrap();
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("# threshold:"));
}

#[test]
fn scan_rows_replay_from_their_seed() {
    let spec = scan_spec(1);
    let out = run_scan(&spec).unwrap();
    for row in &out.rows {
        let config = TrainConfig {
            seed: row.seed,
            restarts: 1,
            ..spec.config.clone()
        };
        let r = train_point(&spec.family, &spec.structure, &config, row.q).unwrap();
        assert!((r.distance - row.best_distance).abs() < 1e-12);
        assert_eq!(r.loss, LossKind::Trace);
    }
}
