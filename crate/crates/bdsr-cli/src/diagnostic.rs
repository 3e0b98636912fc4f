//! Shape of the finite-sample bound with both unknown constants set to one.

use serde::Serialize;

use crate::{CliError, Result};

pub const BOUND_NOTE: &str = "up to unknown constants (C1* = C2* = 1)";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Theorem1Report {
    pub l: usize,
    pub r: usize,
    pub k: usize,
    pub k_tilde: f64,
    pub delta: f64,
    /// R K K̃⁴ log²(R²K²L³/δ) log²((K+1)L³/δ).
    pub shape: f64,
    /// L / shape; at least one is necessary for the bound to hold with unit constants.
    pub ratio: f64,
    pub note: String,
}

pub fn theorem1_diagnostic(l: usize, r: usize, k: usize, k_tilde: f64, delta: f64) -> Result<Theorem1Report> {
    if l == 0 || r == 0 || k == 0 || !(k_tilde > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return Err(CliError::Config(format!(
            "bound needs positive L, R, K, K̃ and δ in (0,1); got L={l} R={r} K={k} K̃={k_tilde} δ={delta}"
        )));
    }
    let (lf, rf, kf) = (l as f64, r as f64, k as f64);
    let l3 = lf.powi(3);
    let shape = rf * kf * k_tilde.powi(4) * (rf * rf * kf * kf * l3 / delta).ln().powi(2) * ((kf + 1.0) * l3 / delta).ln().powi(2);
    Ok(Theorem1Report { l, r, k, k_tilde, delta, shape, ratio: lf / shape, note: BOUND_NOTE.into() })
}
