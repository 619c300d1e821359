//! Harness-level behavior (sweeps, demos) and the CLI surface.

use std::process::Command;

use marginlab::harness::config::{ExperimentConfig, Problem, SweepConfig, TrainerConfig};
use marginlab::harness::{demos, emit, trial};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_marginlab"))
}

#[test]
fn linear_sweep_error_decreases_through_kappa() {
    let cfg = ExperimentConfig {
        problem: Problem::Linear,
        n: 32,
        d: 2048,
        kappa: Some(1.0),
        sigma: None,
        trials: vec![1],
        mc_samples: 10_000,
        sweep: SweepConfig {
            kappas: vec![0.25, 0.5, 1.0, 2.0, 4.0],
            d_over_n: vec![64],
            hs: vec![1.5],
        },
        ..Default::default()
    };
    let records = trial::phase_sweep(&cfg).unwrap();
    assert_eq!(records.len(), 5);
    let mut by_kappa: Vec<(f64, f64, String)> = records
        .iter()
        .map(|r| (r.kappa, r.test_err.unwrap(), r.region.clone()))
        .collect();
    by_kappa.sort_by(|a, b| a.0.total_cmp(&b.0));
    for pair in by_kappa.windows(2) {
        assert!(
            pair[1].1 <= pair[0].1 + 0.005,
            "test error not non-increasing in kappa: {by_kappa:?}"
        );
    }
    assert_eq!(by_kappa[0].2, "between");
    assert_eq!(by_kappa[4].2, "above_kappa_uc");
    // Round trip through the CSV emitter.
    let parsed = emit::parse_csv(&emit::to_csv(&records)).unwrap();
    assert_eq!(parsed, records);
}

#[test]
fn xor_sweep_crosses_generalization_threshold() {
    let cfg = ExperimentConfig {
        problem: Problem::Xor,
        n: 64,
        d: 2048,
        kappa: Some(1.0),
        sigma: None,
        m: 64,
        h: 1.5,
        trials: vec![1],
        mc_samples: 4000,
        trainer: TrainerConfig { max_steps: 5000, ..TrainerConfig::default() },
        sweep: SweepConfig { kappas: vec![0.5, 2.0], d_over_n: vec![32], hs: vec![1.5] },
        ..Default::default()
    };
    let records = trial::phase_sweep(&cfg).unwrap();
    assert_eq!(records.len(), 2);
    let below = records.iter().find(|r| r.kappa == 0.5).unwrap();
    let above = records.iter().find(|r| r.kappa == 2.0).unwrap();
    assert_eq!(below.region, "below_kappa_gen");
    assert_eq!(above.region, "between");
    assert!((below.test_err.unwrap() - 0.5).abs() <= 0.1, "below: {:?}", below.test_err);
    assert!(above.test_err.unwrap() <= 0.1, "above: {:?}", above.test_err);
}

#[test]
fn uc_demo_witness_weakens_above_the_band() {
    let in_band = ExperimentConfig {
        problem: Problem::Xor,
        n: 64,
        d: 2048,
        kappa: Some(2.0),
        sigma: None,
        m: 64,
        h: 1.5,
        trials: vec![1],
        mc_samples: 4000,
        trainer: TrainerConfig { max_steps: 5000, ..TrainerConfig::default() },
        ..Default::default()
    };
    let strong = demos::uc_failure_demo(&in_band).unwrap();
    assert!(strong.witness_min >= 0.8, "in-band witness {}", strong.witness_min);

    let above = ExperimentConfig { kappa: Some(8.0), force: true, ..in_band };
    let weak = demos::uc_failure_demo(&above).unwrap();
    assert!(
        weak.witness_min <= 0.5,
        "witness should be weak above kappa_uc: {}",
        weak.witness_min
    );
    assert!(weak.witness_min < strong.witness_min);
}

#[test]
fn cli_thresholds_and_opt5() {
    let out = bin().args(["thresholds", "--h=1.5"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("kappa_uc = 4"));
    assert!(text.contains("kappa_gen(1.500) = 1.039684"), "{text}");

    let out = bin().args(["opt5", "--k=1", "--p5=1", "--h=1.5", "--grid=60"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("objective = 0.420448"), "{text}");
}

#[test]
fn cli_gen_solve_and_overrides() {
    let dir = tempdir("gen");
    let data = dir.join("ds.mlds");
    let out = bin()
        .args([
            "gen",
            "--problem=linear",
            "--n=16",
            "--d=256",
            "--kappa=2.0",
            "--trials=[5]",
            &format!("--out={}", data.display()),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (ds, _) = marginlab::harness::io::read_dataset(&data).unwrap();
    assert_eq!((ds.d(), ds.n()), (256, 16));

    // Config file plus command-line override.
    let cfg_path = dir.join("cfg.json");
    std::fs::write(
        &cfg_path,
        r#"{"problem":"linear","n":16,"d":256,"kappa":1.0,"trials":[1]}"#,
    )
    .unwrap();
    let out = bin()
        .args([
            "solve-linear",
            "--config",
            cfg_path.to_str().unwrap(),
            "--kappa=2.0",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("gamma*(S)"), "{text}");

    // Conflicting sigma/kappa is rejected.
    let out = bin()
        .args(["solve-linear", "--kappa=1.0", "--sigma=0.5"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    std::fs::remove_dir_all(&dir).ok();
}

#[test]
fn cli_sweep_emits_csv() {
    let dir = tempdir("sweep");
    let out_path = dir.join("sweep.csv");
    let out = bin()
        .args([
            "sweep",
            "--problem=linear",
            "--n=16",
            "--d=256",
            "--kappa=1.0",
            "--trials=[1,2]",
            "--mc_samples=1000",
            "--sweep.kappas=[0.5,2.0]",
            "--sweep.d_over_n=[16]",
            &format!("--out={}", out_path.display()),
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&out_path).unwrap();
    let records = emit::parse_csv(&text).unwrap();
    assert_eq!(records.len(), 4);
    assert!(records.iter().all(|r| r.status == "ok"));
    std::fs::remove_dir_all(&dir).ok();
}

fn tempdir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("marginlab-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn xor_margin_demo_reports_positive_ratio_with_failure() {
    let cfg = ExperimentConfig {
        problem: Problem::Xor,
        n: 64,
        d: 2048,
        kappa: Some(2.0),
        sigma: None,
        m: 64,
        h: 1.5,
        trials: vec![1],
        mc_samples: 10_000,
        ..Default::default()
    };
    let demo = demos::margin_vacuity_demo(&cfg).unwrap();
    let row = &demo.rows[0];
    assert!(row.margin_ratio > 0.0, "ratio {}", row.margin_ratio);
    assert!(row.failure_err >= 0.9, "err on psi(D) {}", row.failure_err);
}
