//! Subcommand bodies. Each returns the process exit code.

use std::path::{Path, PathBuf};

use bdsr::certificate;
use bdsr::dualsdp::{AssembleOptions, Variant};
use bdsr::estimate;
use bdsr::io::{parse_document, Document};
use bdsr::localize::{self, ShiftEstimate};
use bdsr::model::{GainModel, ShiftPair, Subspace, SubspaceKind};
use bdsr::C64;
use serde::{Deserialize, Serialize};

use crate::config::{self, ExperimentConfig, SolverConfig, CONFIG_VERSION};
use crate::pipeline::{self, match_gate, write_json, SolverSummary, WaveformPair};
use crate::sweep::{self, SweepConfig};
use crate::{CliError, Result, EXIT_NOT_OPTIMAL, EXIT_OK};

#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub grid: Option<usize>,
    pub threshold: Option<f64>,
    pub zeta: Option<f64>,
}

impl Overrides {
    pub fn apply(&self, mut c: ExperimentConfig) -> Result<ExperimentConfig> {
        if let Some(s) = self.seed {
            c.seed = s;
        }
        if let Some(g) = self.grid {
            c.grid = g;
        }
        if let Some(t) = self.threshold {
            c.threshold = t;
        }
        if self.zeta.is_some() {
            c.zeta = self.zeta;
        }
        for w in c.validate()? {
            eprintln!("warning: {w}");
        }
        Ok(c)
    }
}

fn status_code(optimal: bool) -> u8 {
    if optimal {
        EXIT_OK
    } else {
        EXIT_NOT_OPTIMAL
    }
}

fn read_document(path: &Path) -> Result<Document> {
    Ok(parse_document(&std::fs::read(path)?)?)
}

fn need<'a, T>(v: &'a Option<T>, what: &str, path: &Path) -> Result<&'a T> {
    v.as_ref().ok_or_else(|| CliError::Config(format!("{} has no {what}", path.display())))
}

pub fn experiment(spec: &str, ov: Overrides, out: &Path) -> Result<u8> {
    let cfg = ov.apply(config::load(spec)?)?;
    let o = pipeline::run_experiment(&cfg)?;
    pipeline::write_outcome(out, &o)?;
    let r = &o.report;
    eprintln!(
        "{}: status {}, objective {:.6} (Σ|c| = {:.6}), {} peak(s), max shift error {:.2e}, min correlation {}",
        cfg.name.as_deref().unwrap_or("experiment"),
        r.solver.status,
        r.solver.objective,
        r.sum_abs_gains,
        r.peaks.shifts.len(),
        r.metrics.max_shift_error,
        r.metrics.min_correlation.map_or("n/a".into(), |c| format!("{c:.8}")),
    );
    Ok(status_code(r.optimal()))
}

pub fn synth(spec: &str, ov: Overrides, out: &Path) -> Result<u8> {
    let cfg = ov.apply(config::load(spec)?)?;
    let (sub, scene, obs, _) = pipeline::synthesize(&cfg)?;
    let mut doc = Document::new(Some(cfg.seed));
    doc.subspace = Some(sub);
    doc.scene = Some(scene);
    doc.observation = Some(obs);
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("document.json"), doc.to_json() + "\n")?;
    write_json(&out.join("config.json"), &cfg)?;
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct DualOut<'a> {
    schema: &'static str,
    q: &'a [C64],
    zeta: Option<f64>,
    solver: &'a SolverSummary,
}

#[derive(Deserialize)]
struct DualIn {
    q: Vec<C64>,
}

pub fn solve(doc_path: &Path, zeta: Option<f64>, solver: &SolverConfig, out: &Path) -> Result<u8> {
    let doc = read_document(doc_path)?;
    let sub = need(&doc.subspace, "subspace", doc_path)?;
    let obs = need(&doc.observation, "observation", doc_path)?;
    if let Some(z) = zeta {
        if !(z > 0.0 && z.is_finite()) {
            return Err(CliError::Config(format!("zeta {z} must be positive")));
        }
    }
    let opts = AssembleOptions {
        variant: zeta.map_or(Variant::Exact, |zeta| Variant::Noisy { zeta }),
        trace_form: solver.trace_form,
        keep_redundant_q_cone: solver.keep_redundant_q_cone,
    };
    let step = pipeline::solve(&obs.y, sub, opts, &solver.options())?;
    std::fs::create_dir_all(out)?;
    write_json(&out.join("dual.json"), &DualOut { schema: "bdsr-dual", q: &step.q, zeta, solver: &step.summary })?;
    std::fs::write(out.join("solver_log.csv"), &step.log_csv)?;
    eprintln!("status {}, objective {:.8}, {} iterations", step.summary.status, step.summary.objective, step.summary.iterations);
    Ok(status_code(step.summary.status == bdsr_solver::Status::Optimal.as_str()))
}

#[derive(Debug, PartialEq, Serialize, Deserialize)]
pub struct PeaksFile {
    pub schema: String,
    pub shifts: Vec<ShiftPair>,
    pub peak_values: Vec<f64>,
    pub grid_step: f64,
    pub threshold: f64,
    pub feasibility_sup: f64,
}

pub fn localize(doc_path: &Path, dual_path: &Path, grid: usize, threshold: f64, out: &Path) -> Result<u8> {
    let doc = read_document(doc_path)?;
    let sub = need(&doc.subspace, "subspace", doc_path)?;
    let dual: DualIn = serde_json::from_slice(&std::fs::read(dual_path)?)?;
    let poly = localize::build_polynomial(&dual.q, sub)?;
    let g = localize::eval_grid(&poly, grid)?;
    let ShiftEstimate { shifts, peak_values, grid_step } = localize::extract_peaks(&g, threshold);
    std::fs::create_dir_all(out)?;
    pipeline::write_grid(out, &g, sub.l, sub.k, doc.seed)?;
    let est = ShiftEstimate { shifts, peak_values, grid_step };
    std::fs::write(out.join("peaks.csv"), pipeline::peaks_csv(&est))?;
    let file = PeaksFile {
        schema: "bdsr-peaks".into(),
        shifts: est.shifts,
        peak_values: est.peak_values,
        grid_step,
        threshold,
        feasibility_sup: localize::feasibility_sup(&g).sqrt(),
    };
    write_json(&out.join("peaks.json"), &file)?;
    eprintln!("{} peak(s), sup ‖f‖₂ = {:.6}", file.shifts.len(), file.feasibility_sup);
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct RecoveryOut {
    schema: &'static str,
    recovery: estimate::Recovery,
    metrics: Option<estimate::Metrics>,
}

pub fn recover(doc_path: &Path, peaks_path: &Path, out: &Path) -> Result<u8> {
    let doc = read_document(doc_path)?;
    let sub = need(&doc.subspace, "subspace", doc_path)?;
    let obs = need(&doc.observation, "observation", doc_path)?;
    let peaks: PeaksFile = serde_json::from_slice(&std::fs::read(peaks_path)?)?;
    let rec = estimate::recover_products(&obs.y, &peaks.shifts, sub)?;
    let metrics = doc.scene.as_ref().map(|s| estimate::score(s, &peaks.shifts, Some(&rec), sub, match_gate(sub.l)));
    let waveforms: Vec<WaveformPair> = match (&metrics, &doc.scene) {
        (Some(m), Some(scene)) => m
            .matches
            .iter()
            .map(|mm| pair(sub, Some(&scene.orientations[mm.truth]), &rec.directions[mm.estimate], mm.truth))
            .collect(),
        _ => rec.directions.iter().enumerate().map(|(j, h)| pair(sub, None, h, j)).collect(),
    };
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("waveforms.csv"), pipeline::waveforms_csv(&waveforms, sub.l))?;
    write_json(&out.join("recovery.json"), &RecoveryOut { schema: "bdsr-recovery", recovery: rec, metrics })?;
    Ok(EXIT_OK)
}

/// Without a known truth the s column is NaN.
fn pair(sub: &Subspace, h: Option<&Vec<C64>>, hhat: &[C64], j: usize) -> WaveformPair {
    let abs = |v: Vec<C64>| v.iter().map(|z| z.norm()).collect::<Vec<f64>>();
    WaveformPair {
        truth: j,
        s_abs: h.map_or(vec![f64::NAN; sub.l], |h| abs(sub.apply(h))),
        shat_abs: abs(sub.apply(hhat)),
    }
}

pub fn certify(doc_path: &Path, grid: usize, out: &Path) -> Result<u8> {
    let doc = read_document(doc_path)?;
    let sub = need(&doc.subspace, "subspace", doc_path)?;
    let scene = need(&doc.scene, "scene", doc_path)?;
    let c = certificate::build_certificate(scene, sub, grid)?;
    std::fs::create_dir_all(out)?;
    write_json(&out.join("certificate.json"), &c)?;
    eprintln!(
        "interpolation ≤ {:.2e}, stationarity ≤ {:.2e}, sup far {:.4}, sup close {:.4}",
        c.interpolation_residuals.iter().copied().fold(0.0, f64::max),
        c.stationarity_residuals.iter().copied().fold(0.0, f64::max),
        c.sup_far,
        c.sup_close
    );
    Ok(EXIT_OK)
}

/// The Experiment-1 cell and an R sweep at the same (L, K).
pub fn default_sweep(seed: u64) -> SweepConfig {
    SweepConfig {
        version: CONFIG_VERSION,
        ls: vec![19],
        ks: vec![2],
        rs: vec![1, 2, 3],
        trials: 10,
        seed,
        subspace: SubspaceKind::Gaussian,
        gains: GainModel::UnitModulus,
        grid: localize::DEFAULT_GRID,
        threshold: localize::DEFAULT_THRESHOLD,
        solver: SolverConfig::default(),
        threads: None,
    }
}

pub fn sweep(cfg: &SweepConfig, out: &Path) -> Result<u8> {
    let rows = sweep::phase_sweep(cfg)?;
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("sweep.csv"), sweep::sweep_csv(&rows))?;
    write_json(&out.join("sweep.json"), &serde_json::json!({ "config": cfg, "cells": rows }))?;
    for r in &rows {
        eprintln!("L={} K={} R={}: {}/{} ({} errors)", r.cell.l, r.cell.k, r.cell.r, r.successes, r.trials, r.errors);
    }
    Ok(EXIT_OK)
}

pub fn default_path(out: &Path, given: Option<PathBuf>, name: &str) -> PathBuf {
    given.unwrap_or_else(|| out.join(name))
}
