use thiserror::Error;

/// Errors raised by the simulation and imaging pipeline.
///
/// Variants are grouped so that a front end can map them onto stable exit
/// codes (see [`Error::category`]).
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid physical or numerical configuration. `field` names the offending
    /// entry using a dotted path (`wave.half_height`, `background[1].n`, ...).
    #[error("invalid configuration at `{field}`: {message}")]
    Config { field: String, message: String },

    /// Inputs that are individually valid but disagree with each other
    /// (mismatched truncations, matrix shapes, grids).
    #[error("inconsistent inputs: {0}")]
    Consistency(String),

    /// Singular kernel evaluation (source and observation points coincide).
    #[error("kernel evaluated at its singularity (x = z)")]
    Singular,

    /// Krylov iteration failed to reach the requested tolerance.
    #[error(
        "linear solver did not converge{}: residual {final_residual:.3e} after {iterations} iterations",
        incident.map(|j| format!(" (incident mode {j})")).unwrap_or_default()
    )]
    SolverDiverged {
        iterations: usize,
        final_residual: f64,
        residual_history: Vec<f64>,
        incident: Option<i64>,
    },

    /// Dense linear algebra failure (factorization of a matrix that should
    /// have been positive definite, non-finite input, ...).
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed file {path}: {message}")]
    Format { path: String, message: String },
}

/// Coarse classification of [`Error`] used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    Config,
    Consistency,
    Io,
    Solver,
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn category(&self) -> ErrorCategory {
        match self {
            Error::Config { .. } => ErrorCategory::Config,
            Error::Consistency(_) => ErrorCategory::Consistency,
            Error::Io { .. } | Error::Format { .. } => ErrorCategory::Io,
            Error::Singular | Error::SolverDiverged { .. } | Error::Numerical(_) => {
                ErrorCategory::Solver
            }
        }
    }

    /// Attach the incident mode index to a solver failure.
    pub fn with_incident(self, j: i64) -> Self {
        match self {
            Error::SolverDiverged {
                iterations,
                final_residual,
                residual_history,
                ..
            } => Error::SolverDiverged {
                iterations,
                final_residual,
                residual_history,
                incident: Some(j),
            },
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
