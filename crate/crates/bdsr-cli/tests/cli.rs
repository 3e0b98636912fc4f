use std::path::{Path, PathBuf};
use std::process::Command;

use bdsr_cli::commands::{self, Overrides, PeaksFile};
use bdsr_cli::config::{self, ExperimentConfig, Noise, ShiftSpec, SolverConfig};
use bdsr_cli::pipeline::{self, run_experiment};
use bdsr_cli::sweep::{phase_sweep, sweep_csv, trial_seed, Cell, SweepConfig};
use bdsr_cli::{EXIT_ERROR, EXIT_NOT_OPTIMAL, EXIT_OK};

fn scratch(name: &str) -> PathBuf {
    let d = std::env::temp_dir().join(format!("bdsr-cli-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&d);
    d
}

fn small() -> ExperimentConfig {
    let mut c = config::preset("exp1").unwrap();
    c.name = Some("small".into());
    c.l = 11;
    c.k = 1;
    c.r = 1;
    c.shifts = ShiftSpec::Explicit(vec![bdsr::model::ShiftPair::new(0.3, 0.6)]);
    c.grid = 200;
    c.seed = 7;
    c
}

fn write_config(dir: &Path, c: &ExperimentConfig) -> PathBuf {
    std::fs::create_dir_all(dir).unwrap();
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_vec(c).unwrap()).unwrap();
    p
}

fn bdsr(args: &[&str]) -> i32 {
    Command::new(env!("CARGO_BIN_EXE_bdsr")).args(args).output().unwrap().status.code().unwrap()
}

#[test]
fn experiment_writes_every_artifact_and_is_reproducible() {
    let d = scratch("repro");
    let cfg = write_config(&d, &small());
    let (a, b) = (d.join("a"), d.join("b"));
    for out in [&a, &b] {
        assert_eq!(bdsr(&["experiment", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), EXIT_OK as i32);
    }
    for f in ["report.json", "document.json", "peaks.csv", "waveforms.csv", "grid.bin", "grid.json", "solver_log.csv"] {
        let x = std::fs::read(a.join(f)).unwrap();
        assert!(!x.is_empty(), "{f}");
        assert_eq!(x, std::fs::read(b.join(f)).unwrap(), "{f} differs between runs");
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["solver"]["status"], "optimal");
    assert_eq!(report["peaks"]["shifts"].as_array().unwrap().len(), 1);
    let header = std::fs::read_to_string(a.join("grid.json")).unwrap();
    let (_, g) = bdsr::localize::read_grid(&header, &std::fs::read(a.join("grid.bin")).unwrap()).unwrap();
    assert_eq!(g.g, 200);
    assert!(std::fs::read_to_string(a.join("solver_log.csv")).unwrap().lines().count() > 2);
}

#[test]
fn overrides_reach_the_config() {
    let d = scratch("override");
    let cfg = write_config(&d, &small());
    let out = d.join("o");
    let code = bdsr(&[
        "experiment", cfg.to_str().unwrap(), "--seed", "9", "--grid", "150", "--threshold", "0.99", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_OK as i32);
    let r: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap();
    assert_eq!((r["config"]["seed"].as_u64(), r["config"]["grid"].as_u64()), (Some(9), Some(150)));
    assert_eq!(r["config"]["threshold"].as_f64(), Some(0.99));
    let applied = Overrides { zeta: Some(0.5), ..Default::default() }.apply(small()).unwrap();
    assert_eq!(applied.zeta_effective(), Some(0.5));
}

#[test]
fn exit_codes() {
    let d = scratch("codes");
    let mut c = small();
    c.solver = SolverConfig { max_iter: Some(1), ..Default::default() };
    let cfg = write_config(&d, &c);
    let out = d.join("o");
    assert_eq!(bdsr(&["experiment", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]), EXIT_NOT_OPTIMAL as i32);
    assert!(out.join("report.json").exists(), "a non-optimal run still leaves its report");
    assert_eq!(bdsr(&["experiment", "no-such-preset", "--out", out.to_str().unwrap()]), EXIT_ERROR as i32);
    assert_eq!(bdsr(&["experiment", "exp1", "--grid", "3", "--out", out.to_str().unwrap()]), EXIT_ERROR as i32);
    assert_eq!(bdsr(&["localize", "--doc", "/nonexistent", "--out", out.to_str().unwrap()]), EXIT_ERROR as i32);
    assert_ne!(bdsr(&["frobnicate"]), EXIT_OK as i32);
}

#[test]
fn staged_commands_agree_with_the_experiment() {
    let d = scratch("staged");
    let c = small();
    let cfg = write_config(&d, &c);
    let s = d.join("s");
    let spec = cfg.to_str().unwrap();
    let dir = s.to_str().unwrap();
    assert_eq!(commands::synth(spec, Overrides::default(), &s).unwrap(), EXIT_OK);
    assert_eq!(commands::solve(&s.join("document.json"), None, &SolverConfig::default(), &s).unwrap(), EXIT_OK);
    assert_eq!(bdsr(&["localize", "--grid", "200", "--out", dir]), EXIT_OK as i32);
    assert_eq!(bdsr(&["recover", "--out", dir]), EXIT_OK as i32);
    let peaks: PeaksFile = serde_json::from_slice(&std::fs::read(s.join("peaks.json")).unwrap()).unwrap();
    let o = run_experiment(&c).unwrap();
    assert_eq!(peaks.shifts, o.report.peaks.shifts);
    assert_eq!(std::fs::read_to_string(s.join("peaks.csv")).unwrap(), pipeline::peaks_csv(&o.report.peaks));
    let rec: serde_json::Value = serde_json::from_slice(&std::fs::read(s.join("recovery.json")).unwrap()).unwrap();
    assert!(rec["metrics"]["min_correlation"].as_f64().unwrap() > 0.999);
}

#[test]
fn certify_writes_a_certificate() {
    let d = scratch("certify");
    let mut c = small();
    c.l = 21;
    let cfg = write_config(&d, &c);
    let s = d.join("s");
    assert_eq!(commands::synth(cfg.to_str().unwrap(), Overrides::default(), &s).unwrap(), EXIT_OK);
    assert_eq!(bdsr(&["certify", "--grid", "40", "--out", s.to_str().unwrap()]), EXIT_OK as i32);
    let cert: serde_json::Value = serde_json::from_slice(&std::fs::read(s.join("certificate.json")).unwrap()).unwrap();
    assert_eq!(cert["alpha"].as_array().unwrap().len(), 1);
    c.l = 19;
    let cfg = write_config(&d, &c);
    commands::synth(cfg.to_str().unwrap(), Overrides::default(), &s).unwrap();
    assert_eq!(bdsr(&["certify", "--out", s.to_str().unwrap()]), EXIT_ERROR as i32, "odd N has no Fejér kernel");
}

#[test]
fn awgn_hits_the_requested_snr() {
    let c = config::preset("exp4").unwrap();
    let Noise::Awgn { snr_db } = c.noise else { panic!() };
    let (sub, scene, obs, noise_norm) = pipeline::synthesize(&c).unwrap();
    let clean = bdsr::model::synthesize(&scene, &sub).unwrap().y;
    let signal = clean.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let got = 20.0 * (signal / noise_norm).log10();
    assert!((got - snr_db).abs() < 1e-9, "{got}");
    let resid = obs.y.iter().zip(&clean).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
    assert!((resid - noise_norm).abs() < 1e-12);
}

fn tiny_sweep() -> SweepConfig {
    SweepConfig { ls: vec![9], ks: vec![1], rs: vec![0, 1], trials: 3, seed: 11, grid: 90, ..commands::default_sweep(11) }
}

#[test]
fn sweep_is_deterministic_across_thread_counts() {
    let one = phase_sweep(&SweepConfig { threads: Some(1), ..tiny_sweep() }).unwrap();
    let two = phase_sweep(&SweepConfig { threads: Some(2), ..tiny_sweep() }).unwrap();
    assert_eq!(sweep_csv(&one), sweep_csv(&two));
    assert_eq!(one.len(), 2);
    assert_eq!(one[0].rate, 1.0, "R = 0 cells always succeed");
    assert_eq!(one[0].errors, 0);
    assert!(sweep_csv(&one).starts_with("l,k,r,trials,successes,errors,rate\n9,1,0,3,3,0,1\n"));
}

#[test]
fn sweep_cli_and_config_errors() {
    let d = scratch("sweep");
    let cfg = d.join("sweep.json");
    std::fs::create_dir_all(&d).unwrap();
    std::fs::write(&cfg, serde_json::to_vec(&SweepConfig { rs: vec![0], ..tiny_sweep() }).unwrap()).unwrap();
    let out = d.join("o");
    assert_eq!(bdsr(&["sweep", cfg.to_str().unwrap(), "--trials", "2", "--out", out.to_str().unwrap()]), EXIT_OK as i32);
    assert_eq!(std::fs::read_to_string(out.join("sweep.csv")).unwrap(), "l,k,r,trials,successes,errors,rate\n9,1,0,2,2,0,1\n");
    assert!(phase_sweep(&SweepConfig { trials: 0, ..tiny_sweep() }).is_err());
    assert!(phase_sweep(&SweepConfig { ls: vec![10], ..tiny_sweep() }).is_err());
    assert!(SweepConfig::from_json(br#"{"version":1}"#).is_err());
}

#[test]
fn trial_seeds_are_distinct() {
    let mut seen = std::collections::HashSet::new();
    for l in [9, 11] {
        for r in 0..4 {
            for t in 0..50 {
                assert!(seen.insert(trial_seed(3, Cell { l, k: 2, r }, t)));
            }
        }
    }
}

#[test]
fn bound_prints_json() {
    let out = Command::new(env!("CARGO_BIN_EXE_bdsr")).args(["bound", "--l", "19", "--r", "2", "--k", "2"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v["ratio"].as_f64().unwrap() > 0.0);
    assert_eq!(bdsr(&["bound", "--l", "19", "--r", "2", "--k", "2", "--delta", "2"]), EXIT_ERROR as i32);
}
