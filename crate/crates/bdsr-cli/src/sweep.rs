//! Empirical success rates over a grid of (L, K, R) cells.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use bdsr::localize::{DEFAULT_GRID, DEFAULT_THRESHOLD};
use bdsr::model::{GainModel, SubspaceKind};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Noise, RandomShifts, ShiftSpec, SolverConfig, CONFIG_VERSION};
use crate::pipeline::{run_experiment, Outcome};
use crate::{CliError, Result};

fn default_grid() -> usize {
    DEFAULT_GRID
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub version: u32,
    pub ls: Vec<usize>,
    pub ks: Vec<usize>,
    pub rs: Vec<usize>,
    pub trials: usize,
    pub seed: u64,
    pub subspace: SubspaceKind,
    pub gains: GainModel,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    /// Worker threads; absent means the available parallelism.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl SweepConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let c: SweepConfig = serde_json::from_slice(bytes)?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(CliError::Config(format!("sweep version {} is not supported", self.version)));
        }
        if self.trials == 0 {
            return Err(CliError::Config("a sweep needs at least one trial per cell".into()));
        }
        if self.ls.is_empty() || self.ks.is_empty() || self.rs.is_empty() {
            return Err(CliError::Config("ls, ks and rs must be non-empty".into()));
        }
        for cell in self.cells() {
            self.trial_config(cell, 0).validate()?;
        }
        Ok(())
    }

    /// Cells in L-major, then K, then R order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for &l in &self.ls {
            for &k in &self.ks {
                for &r in &self.rs {
                    out.push(Cell { l, k, r });
                }
            }
        }
        out
    }

    pub fn trial_config(&self, cell: Cell, trial: usize) -> ExperimentConfig {
        ExperimentConfig {
            version: CONFIG_VERSION,
            name: None,
            l: cell.l,
            k: cell.k,
            r: cell.r,
            subspace: self.subspace,
            gains: self.gains,
            shifts: ShiftSpec::Random(RandomShifts::RandomSeparated),
            noise: Noise::None,
            zeta: None,
            grid: self.grid,
            threshold: self.threshold,
            solver: self.solver,
            seed: trial_seed(self.seed, cell, trial),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Cell {
    pub l: usize,
    pub k: usize,
    pub r: usize,
}

/// splitmix64 over (seed, L, K, R, trial).
pub fn trial_seed(seed: u64, cell: Cell, trial: usize) -> u64 {
    let mut z = seed;
    for v in [cell.l as u64, cell.k as u64, cell.r as u64, trial as u64] {
        z = z.wrapping_add(v).wrapping_add(0x9e37_79b9_7f4a_7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^= z >> 31;
    }
    z
}

/// Exactly R peaks, each true shift matched within one grid step per coordinate.
pub fn trial_succeeded(o: &Outcome) -> bool {
    let rep = &o.report;
    let step = 1.0 / rep.config.grid as f64;
    rep.peaks.shifts.len() == rep.truth.r()
        && rep.metrics.missed == 0
        && rep.metrics.matches.iter().all(|m| m.tau_error.max(m.f_error) <= step + 1e-12)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellResult {
    pub cell: Cell,
    pub trials: usize,
    pub successes: usize,
    /// Trials whose pipeline failed outright (for example no separated shifts could be drawn).
    pub errors: usize,
    pub rate: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Trial {
    Pending,
    Success,
    Failure,
    Error,
}

pub fn phase_sweep(cfg: &SweepConfig) -> Result<Vec<CellResult>> {
    cfg.validate()?;
    let cells = cfg.cells();
    let jobs: Vec<(usize, usize)> = (0..cells.len()).flat_map(|c| (0..cfg.trials).map(move |t| (c, t))).collect();
    let results = Mutex::new(vec![Trial::Pending; jobs.len()]);
    let next = AtomicUsize::new(0);
    let threads = cfg
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .clamp(1, jobs.len().max(1));
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(c, t)) = jobs.get(i) else { break };
                let res = match run_experiment(&cfg.trial_config(cells[c], t)) {
                    Ok(o) if trial_succeeded(&o) => Trial::Success,
                    Ok(_) => Trial::Failure,
                    Err(_) => Trial::Error,
                };
                results.lock().expect("workers never panic holding the lock")[i] = res;
            });
        }
    });
    let flags = results.into_inner().expect("workers joined");
    Ok(cells
        .iter()
        .enumerate()
        .map(|(c, &cell)| {
            let slice = &flags[c * cfg.trials..(c + 1) * cfg.trials];
            let successes = slice.iter().filter(|v| **v == Trial::Success).count();
            let errors = slice.iter().filter(|v| **v == Trial::Error).count();
            CellResult { cell, trials: cfg.trials, successes, errors, rate: successes as f64 / cfg.trials as f64 }
        })
        .collect())
}

pub fn sweep_csv(rows: &[CellResult]) -> String {
    let mut s = String::from("l,k,r,trials,successes,errors,rate\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{},{},{},{}", r.cell.l, r.cell.k, r.cell.r, r.trials, r.successes, r.errors, r.rate);
    }
    s
}
