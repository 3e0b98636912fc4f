//! synthesize → assemble → solve → localize → recover → score, plus the files
//! each run leaves behind.

use std::fmt::Write as _;
use std::path::Path;

use bdsr::dualsdp::{self, AssembleOptions, Kkt, Prop1Report, RowCounts};
use bdsr::estimate::{self, Metrics, Recovery};
use bdsr::io::{digest, Document};
use bdsr::localize::{self, Grid, GridHeader, ShiftEstimate};
use bdsr::model::{
    self, check_separation, half_width, random_scene, random_subspace, sample_separated_shifts, Observation,
    ObservationMeta, Scene, Separation, Subspace,
};
use bdsr::{rng, C64};
use bdsr_solver::{SolverOptions, Status};
use serde::Serialize;

use crate::config::{ExperimentConfig, Noise, ShiftSpec};
use crate::diagnostic::{theorem1_diagnostic, Theorem1Report};
use crate::Result;

pub const REPORT_SCHEMA: &str = "bdsr-report";

/// Confidence level fed to the sample-bound diagnostic in reports.
pub const REPORT_DELTA: f64 = 0.01;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SolverSummary {
    pub status: String,
    pub objective: f64,
    pub iterations: usize,
    pub kkt: Kkt,
    pub trace_residual: f64,
    pub rows: RowCounts,
    /// The observation was identically zero, so q = 0 is optimal and no program was solved.
    pub trivial: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub schema: String,
    pub version: u32,
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
    pub truth: Scene,
    pub separation: Separation,
    /// ‖ñ‖₂ of the added noise, 0 without noise.
    pub noise_norm: f64,
    pub zeta: Option<f64>,
    pub solver: SolverSummary,
    /// Σ_j |c_j|, the atomic norm of the true lifted matrix.
    pub sum_abs_gains: f64,
    /// max over the grid of ‖f‖₂.
    pub feasibility_sup: f64,
    pub peaks: ShiftEstimate,
    pub recovery: Option<Recovery>,
    pub metrics: Metrics,
    pub prop1: Option<Prop1Report>,
    pub sample_bound: Theorem1Report,
    pub digests: Digests,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Digests {
    pub subspace: String,
    pub scene: String,
    pub observation: String,
}

impl ExperimentReport {
    pub fn optimal(&self) -> bool {
        self.solver.status == Status::Optimal.as_str()
    }
}

/// Everything a run produces, kept in memory until written.
pub struct Outcome {
    pub report: ExperimentReport,
    pub document: Document,
    pub grid: Grid,
    pub q: Vec<C64>,
    pub solver_log_csv: String,
    pub waveforms: Vec<WaveformPair>,
}

/// Magnitudes of a true waveform and its estimate, l = −N…N.
pub struct WaveformPair {
    pub truth: usize,
    pub s_abs: Vec<f64>,
    pub shat_abs: Vec<f64>,
}

/// Subspace, scene and (possibly noisy) observation for a config.
pub fn synthesize(cfg: &ExperimentConfig) -> Result<(Subspace, Scene, Observation, f64)> {
    let n = half_width(cfg.l)?;
    let sub = random_subspace(cfg.l, cfg.k, cfg.subspace, cfg.seed)?;
    let shifts = match &cfg.shifts {
        ShiftSpec::Explicit(s) => s.clone(),
        ShiftSpec::Random(_) => sample_separated_shifts(cfg.r, n, cfg.seed)?,
    };
    let scene = random_scene(cfg.r, cfg.k, cfg.seed, cfg.gains).with_shifts(shifts)?;
    let mut obs = model::synthesize(&scene, &sub)?;
    let mut noise_norm = 0.0;
    if let Noise::Awgn { snr_db } = cfg.noise {
        let w = model::awgn(&obs.y, snr_db, cfg.seed);
        noise_norm = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for (y, w) in obs.y.iter_mut().zip(w) {
            *y += w;
        }
    }
    obs.meta = Some(ObservationMeta {
        seed: Some(cfg.seed),
        rng: Some(rng::ALGORITHM.into()),
        scene_digest: Some(digest(&scene)),
        subspace_digest: Some(digest(&sub)),
    });
    Ok((sub, scene, obs, noise_norm))
}

pub struct DualStep {
    pub q: Vec<C64>,
    pub summary: SolverSummary,
    pub log_csv: String,
}

pub fn solve(y: &[C64], sub: &Subspace, opts: AssembleOptions, solver: &SolverOptions) -> Result<DualStep> {
    let problem = dualsdp::assemble(y, sub, opts)?;
    if y.iter().all(|z| z.norm() == 0.0) {
        return Ok(DualStep {
            q: vec![C64::new(0.0, 0.0); sub.l],
            summary: SolverSummary {
                status: Status::Optimal.as_str().into(),
                objective: 0.0,
                iterations: 0,
                kkt: Kkt { pres: 0.0, dres: 0.0, gap: 0.0 },
                trace_residual: 0.0,
                rows: problem.layout.rows,
                trivial: true,
            },
            log_csv: String::new(),
        });
    }
    let s = dualsdp::solve_dual(&problem, solver)?;
    Ok(DualStep {
        q: s.q,
        summary: SolverSummary {
            status: s.status.as_str().into(),
            objective: s.objective,
            iterations: s.iterations,
            kkt: s.kkt,
            trace_residual: s.trace_residual,
            rows: problem.layout.rows,
            trivial: false,
        },
        log_csv: s.log_csv,
    })
}

/// Matching gate: one resolution cell.
pub fn match_gate(l: usize) -> f64 {
    1.0 / l as f64
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Outcome> {
    let warnings = cfg.validate()?;
    let n = half_width(cfg.l)?;
    let (sub, scene, obs, noise_norm) = synthesize(cfg)?;
    let dual = solve(&obs.y, &sub, cfg.assemble_options(), &cfg.solver.options())?;
    let poly = localize::build_polynomial(&dual.q, &sub)?;
    let grid = localize::eval_grid(&poly, cfg.grid)?;
    let peaks = localize::extract_peaks(&grid, cfg.threshold);
    let recovery = if peaks.shifts.is_empty() {
        None
    } else {
        Some(estimate::recover_products(&obs.y, &peaks.shifts, &sub)?)
    };
    let metrics = estimate::score(&scene, &peaks.shifts, recovery.as_ref(), &sub, match_gate(cfg.l));
    let prop1 = if cfg.zeta_effective().is_none() && scene.r() > 0 {
        Some(dualsdp::check_prop1(&dual.q, &scene, &sub, cfg.grid, match_gate(cfg.l), 1e-4)?)
    } else {
        None
    };
    let waveforms = match &recovery {
        Some(rec) => metrics
            .matches
            .iter()
            .map(|m| WaveformPair {
                truth: m.truth,
                s_abs: sub.apply(&scene.orientations[m.truth]).iter().map(|z| z.norm()).collect(),
                shat_abs: sub.apply(&rec.directions[m.estimate]).iter().map(|z| z.norm()).collect(),
            })
            .collect(),
        None => Vec::new(),
    };
    let report = ExperimentReport {
        schema: REPORT_SCHEMA.into(),
        version: 1,
        config: cfg.clone(),
        warnings,
        separation: check_separation(&scene.shifts, n),
        noise_norm,
        zeta: cfg.zeta_effective(),
        solver: dual.summary,
        sum_abs_gains: scene.gains.iter().map(|c| c.norm()).sum(),
        feasibility_sup: localize::feasibility_sup(&grid).sqrt(),
        peaks,
        recovery,
        metrics,
        prop1,
        sample_bound: theorem1_diagnostic(cfg.l, cfg.r.max(1), cfg.k, 1.0, REPORT_DELTA)?,
        digests: Digests { subspace: digest(&sub), scene: digest(&scene), observation: digest(&obs) },
        truth: scene.clone(),
    };
    let mut document = Document::new(Some(cfg.seed));
    document.subspace = Some(sub);
    document.scene = Some(scene);
    document.observation = Some(obs);
    Ok(Outcome { report, document, grid, q: dual.q, solver_log_csv: dual.log_csv, waveforms })
}

pub fn peaks_csv(p: &ShiftEstimate) -> String {
    let mut s = String::from("rank,tau,f,value\n");
    for (i, (r, v)) in p.shifts.iter().zip(&p.peak_values).enumerate() {
        let _ = writeln!(s, "{i},{},{},{v}", r.tau, r.f);
    }
    s
}

pub fn waveforms_csv(w: &[WaveformPair], l: usize) -> String {
    let n = (l as i64 - 1) / 2;
    let mut s = String::from("j,l,s_abs,shat_abs\n");
    for pair in w {
        for (i, (a, b)) in pair.s_abs.iter().zip(&pair.shat_abs).enumerate() {
            let _ = writeln!(s, "{},{},{a},{b}", pair.truth, i as i64 - n);
        }
    }
    s
}

pub fn write_grid(dir: &Path, grid: &Grid, l: usize, k: usize, seed: Option<u64>) -> Result<()> {
    std::fs::write(dir.join("grid.bin"), localize::grid_bytes(grid))?;
    let header = GridHeader::new(grid.g, l, k, seed);
    std::fs::write(dir.join("grid.json"), serde_json::to_string_pretty(&header)? + "\n")?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// report.json, document.json, peaks.csv, waveforms.csv, grid.bin, grid.json, solver_log.csv.
pub fn write_outcome(dir: &Path, o: &Outcome) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let cfg = &o.report.config;
    write_json(&dir.join("report.json"), &o.report)?;
    std::fs::write(dir.join("document.json"), o.document.to_json() + "\n")?;
    std::fs::write(dir.join("peaks.csv"), peaks_csv(&o.report.peaks))?;
    std::fs::write(dir.join("waveforms.csv"), waveforms_csv(&o.waveforms, cfg.l))?;
    std::fs::write(dir.join("solver_log.csv"), &o.solver_log_csv)?;
    write_grid(dir, &o.grid, cfg.l, cfg.k, Some(cfg.seed))
}
