//! Self-contained primal-dual interior-point solver for conic programs over
//! products of PSD cones, second-order cones and free variables.

pub mod cones;
pub mod ipm;
pub mod problem;
pub mod psd;
pub mod triplet;

pub use ipm::{solve_conic, IterLog, SolverOptions, SolverResult, Status};
pub use problem::{ConicProblem, PsdTerm, Row};
pub use psd::nearest_psd_projection;

pub use faer;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SolverError {
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("invalid solver options: {0}")]
    Options(String),
    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),
    #[error("eigendecomposition failed")]
    Eigen,
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("{rows} equality rows exceed the dense Schur limit of {limit}")]
    TooLarge { rows: usize, limit: usize },
}
