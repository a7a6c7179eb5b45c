use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Process exit code for validation failures (bad config, model, or grid).
pub const EXIT_VALIDATION: i32 = 2;
/// Process exit code for factorization and eigensolver failures.
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error in `{source_text}` at byte {position}: {message}")]
    Parse {
        source_text: String,
        position: usize,
        message: String,
    },

    #[error("field `{field}` evaluated to {value} at node {coords:?}")]
    Evaluation {
        field: String,
        coords: Vec<f64>,
        value: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("matrix market {path}, line {line}: {message}")]
    MatrixMarket {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("non-degeneracy violated: min a_j = {min_a} < b0 = {b0} at {coords:?}")]
    NonDegeneracyViolation { min_a: f64, b0: f64, coords: Vec<f64> },

    #[error("metric is not positive definite at {coords:?} (smallest eigenvalue {min_eigenvalue})")]
    MetricNotSpd { coords: Vec<f64>, min_eigenvalue: f64 },

    #[error("degenerate magnetic field: smallest frame eigenvalue {min_a} vs largest {max_a}")]
    DegenerateField { min_a: f64, max_a: f64 },

    #[error("region is empty")]
    EmptyRegion,

    #[error(
        "grid under-resolved at p = {p}: h = {h} gives {nodes_per_length:.3} nodes per magnetic \
         length (need >= {required})"
    )]
    UnderResolved {
        p: f64,
        h: f64,
        nodes_per_length: f64,
        required: f64,
    },

    #[error("flux not quantized: p = {p}, total flux {flux}, nearest admissible p = {nearest_p:?}")]
    FluxNotQuantized { p: u32, flux: f64, nearest_p: Option<u32> },

    #[error("unsupported geometry: {0}")]
    UnsupportedGeometry(String),

    #[error("shift {sigma} too close to an eigenvalue (pivot breakdown at step {step})")]
    ShiftTooClose { sigma: f64, step: usize },

    #[error("factorization failed at shift {sigma} after {attempts} attempts")]
    FactorizationFailure { sigma: f64, attempts: usize },

    #[error(
        "eigensolver did not converge after {iterations} iterations: {converged}/{expected} pairs, \
         max residual {max_residual:e}"
    )]
    ConvergenceFailure {
        iterations: usize,
        converged: usize,
        expected: usize,
        max_residual: f64,
    },

    #[error("interval holds {count} eigenvalues, more than the limit {max_m}")]
    TooManyEigenvalues { count: usize, max_m: usize },

    #[error("degenerate power-law fit: {0}")]
    DegenerateFit(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::ShiftTooClose { .. } | Error::FactorizationFailure { .. } | Error::ConvergenceFailure { .. } => {
                EXIT_SOLVER
            }
            _ => EXIT_VALIDATION,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
