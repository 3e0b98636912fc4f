//! Experiment configuration: a versioned JSON schema plus the four built-in presets.

use bdsr::dualsdp::{self, AssembleOptions, TraceForm, Variant};
use bdsr::localize::{DEFAULT_GRID, DEFAULT_THRESHOLD};
use bdsr::model::{check_separation, half_width, GainModel, ShiftPair, SubspaceKind};
use bdsr_solver::SolverOptions;
use serde::{Deserialize, Serialize};

use crate::{CliError, Result};

pub const CONFIG_VERSION: u32 = 1;

/// ζ used when noise is added and no value is given.
pub const DEFAULT_ZETA: f64 = 3.0;

pub const PRESETS: [&str; 4] = ["exp1", "exp2", "exp3", "exp4"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomShifts {
    RandomSeparated,
}

/// Either an explicit list of `[tau, f]` pairs or `"random_separated"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShiftSpec {
    Explicit(Vec<ShiftPair>),
    Random(RandomShifts),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Noise {
    #[default]
    None,
    Awgn { snr_db: f64 },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_gap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_primal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol_dual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
    #[serde(default)]
    pub trace_form: TraceForm,
    #[serde(default)]
    pub keep_redundant_q_cone: bool,
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        let d = dualsdp::solver_options();
        SolverOptions {
            tol_gap: self.tol_gap.unwrap_or(d.tol_gap),
            tol_primal: self.tol_primal.unwrap_or(d.tol_primal),
            tol_dual: self.tol_dual.unwrap_or(d.tol_dual),
            max_iter: self.max_iter.unwrap_or(d.max_iter),
            ..d
        }
    }
}

fn default_grid() -> usize {
    DEFAULT_GRID
}

fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub l: usize,
    pub k: usize,
    pub r: usize,
    pub subspace: SubspaceKind,
    pub gains: GainModel,
    pub shifts: ShiftSpec,
    #[serde(default)]
    pub noise: Noise,
    /// Noise bound of the penalised dual; absent means the exact program unless
    /// noise is added, in which case it defaults to 3.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeta: Option<f64>,
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default)]
    pub solver: SolverConfig,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let c: ExperimentConfig = serde_json::from_slice(bytes)?;
        c.validate()?;
        Ok(c)
    }

    /// Hard errors are returned; soft problems come back as warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("config version {} is not supported (expected {CONFIG_VERSION})", self.version));
        }
        let n = half_width(self.l)?;
        if self.k == 0 || self.k > self.l {
            return bad(format!("need 1 ≤ K ≤ L, got K={} L={}", self.k, self.l));
        }
        if self.subspace == SubspaceKind::Custom {
            return bad("a custom subspace cannot be generated from a config".into());
        }
        if self.grid < self.l || self.grid > 1 << 14 {
            return bad(format!("grid {} must lie in [L, 16384]", self.grid));
        }
        if !(self.threshold > 0.0 && self.threshold.is_finite()) {
            return bad(format!("threshold {} must be positive", self.threshold));
        }
        if let Some(z) = self.zeta {
            if !(z > 0.0 && z.is_finite()) {
                return bad(format!("zeta {z} must be positive"));
            }
        }
        if let Noise::Awgn { snr_db } = self.noise {
            if !snr_db.is_finite() {
                return bad("snr_db must be finite".into());
            }
        }
        self.solver.options().validate().map_err(bdsr::Error::from)?;
        let mut warnings = Vec::new();
        if let ShiftSpec::Explicit(s) = &self.shifts {
            if s.len() != self.r {
                return bad(format!("{} shifts listed for R={}", s.len(), self.r));
            }
            let sep = check_separation(s, n);
            if !sep.ok {
                warnings.push(format!(
                    "shifts are {:.4} apart, below the separation 2.38/N = {:.4}",
                    sep.delta_min,
                    bdsr::model::SEPARATION / n as f64
                ));
            }
        }
        if 3 * self.r * self.k > 2 * self.l * self.l {
            warnings.push("more unknowns than the lifted program can resolve".into());
        }
        Ok(warnings)
    }

    pub fn zeta_effective(&self) -> Option<f64> {
        match (self.zeta, self.noise) {
            (Some(z), _) => Some(z),
            (None, Noise::Awgn { .. }) => Some(DEFAULT_ZETA),
            (None, Noise::None) => None,
        }
    }

    pub fn assemble_options(&self) -> AssembleOptions {
        AssembleOptions {
            variant: match self.zeta_effective() {
                Some(zeta) => Variant::Noisy { zeta },
                None => Variant::Exact,
            },
            trace_form: self.solver.trace_form,
            keep_redundant_q_cone: self.solver.keep_redundant_q_cone,
        }
    }
}

fn pairs(p: &[(f64, f64)]) -> ShiftSpec {
    ShiftSpec::Explicit(p.iter().map(|&(t, f)| ShiftPair::new(t, f)).collect())
}

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let base = |l, k, r, subspace, gains, shifts, seed| ExperimentConfig {
        version: CONFIG_VERSION,
        name: Some(name.to_string()),
        l,
        k,
        r,
        subspace,
        gains,
        shifts,
        noise: Noise::None,
        zeta: None,
        grid: DEFAULT_GRID,
        threshold: DEFAULT_THRESHOLD,
        solver: SolverConfig::default(),
        seed,
    };
    Some(match name {
        "exp1" => base(19, 2, 2, SubspaceKind::Gaussian, GainModel::UnitModulus, pairs(&[(0.28, 0.53), (0.94, 0.42)]), 1),
        "exp2" => base(21, 3, 1, SubspaceKind::FourierRows, GainModel::UnitModulus, pairs(&[(0.13, 0.67)]), 2),
        "exp3" => base(
            21,
            1,
            3,
            SubspaceKind::UniformPm1,
            GainModel::Fading,
            pairs(&[(0.8, 0.2), (0.1, 0.4), (0.7, 0.6)]),
            3,
        ),
        "exp4" => ExperimentConfig {
            noise: Noise::Awgn { snr_db: 10.0 },
            zeta: Some(DEFAULT_ZETA),
            ..base(15, 3, 1, SubspaceKind::Gaussian, GainModel::UnitModulus, pairs(&[(0.74, 0.30)]), 4)
        },
        _ => return None,
    })
}

/// A preset name or a path to a JSON config.
pub fn load(spec: &str) -> Result<ExperimentConfig> {
    if let Some(c) = preset(spec) {
        return Ok(c);
    }
    let bytes = std::fs::read(spec).map_err(|e| CliError::Config(format!("{spec}: not a preset ({}) and unreadable: {e}", PRESETS.join(", "))))?;
    ExperimentConfig::from_json(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_valid_and_round_trip() {
        for name in PRESETS {
            let c = preset(name).unwrap();
            assert!(c.validate().unwrap().is_empty(), "{name}");
            let json = serde_json::to_vec(&c).unwrap();
            assert_eq!(ExperimentConfig::from_json(&json).unwrap(), c);
        }
        assert_eq!(preset("exp4").unwrap().zeta_effective(), Some(3.0));
        assert_eq!(preset("exp1").unwrap().zeta_effective(), None);
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let c = ExperimentConfig::from_json(
            br#"{"version":1,"l":11,"k":1,"r":1,"subspace":"gaussian","gains":"fading","shifts":"random_separated","seed":5}"#,
        )
        .unwrap();
        assert_eq!((c.grid, c.threshold, c.noise), (DEFAULT_GRID, DEFAULT_THRESHOLD, Noise::None));
        let noisy = ExperimentConfig { noise: Noise::Awgn { snr_db: 20.0 }, ..c };
        assert_eq!(noisy.zeta_effective(), Some(DEFAULT_ZETA));
    }

    #[test]
    fn invalid_configs() {
        let good = serde_json::to_string(&preset("exp1").unwrap()).unwrap();
        for bad in [
            good.replace("\"version\":1", "\"version\":2"),
            good.replace("\"l\":19", "\"l\":18"),
            good.replace("\"k\":2", "\"k\":0"),
            good.replace("\"r\":2", "\"r\":3"),
            good.replace("\"grid\":1000", "\"grid\":5"),
            good.replace("\"seed\":1", "\"seed\":1,\"extra\":true"),
            good.replace("\"gaussian\"", "\"custom\""),
            good.replace("\"gaussian\"", "\"laplace\""),
        ] {
            assert!(ExperimentConfig::from_json(bad.as_bytes()).is_err(), "{bad}");
        }
    }

    #[test]
    fn close_shifts_only_warn() {
        let mut c = preset("exp1").unwrap();
        c.shifts = pairs(&[(0.28, 0.53), (0.30, 0.55)]);
        let w = c.validate().unwrap();
        assert_eq!(w.len(), 1);
        assert!(w[0].contains("separation"));
    }
}
