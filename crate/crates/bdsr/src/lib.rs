//! Blind two-dimensional super-resolution.
//!
//! Samples y(p) of a linear system driven by R unknown waveforms, each living in a
//! known K-dimensional subspace and subject to an unknown continuous delay-Doppler
//! shift, are inverted by solving a trace-parametrised SDP relaxation of the
//! atomic-norm dual, locating the peaks of the resulting dual polynomial and
//! solving a least-squares problem for the waveforms. The `certificate` module
//! builds the random-kernel dual certificate directly, without an SDP.

pub mod certificate;
pub mod dualsdp;
pub mod estimate;
pub mod io;
pub mod localize;
pub mod model;
pub mod rng;
pub mod spectral;

pub use num_complex::Complex64 as C64;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("shift sampling gave up after {0} rejections")]
    Separation(usize),
    #[error("singular system (condition number {0:e})")]
    Singular(f64),
    #[error(transparent)]
    Solver(#[from] bdsr_solver::SolverError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
