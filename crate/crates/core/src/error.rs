use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside the domain an operation accepts.
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("shape mismatch: expected length {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("requested {requested} modes but only {available} are available")]
    Rank { requested: usize, available: usize },

    #[error("operator assembly failed: {0}")]
    Assembly(String),

    #[error("operation not supported for {0} operators")]
    UnsupportedKind(&'static str),

    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Newton did not converge; continuation callers shrink the step and retry.
    #[error("corrector failed after {iterations} iterations (residual {residual:.3e})")]
    StepFailure { iterations: usize, residual: f64 },

    #[error("branch switch fell back to the trivial solution at amplitude {amplitude:.3e}")]
    SwitchFailure { amplitude: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("hypothesis check failed: {0}")]
    Hypothesis(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Process exit codes shared by every command.
pub mod exit_code {
    pub const OK: i32 = 0;
    pub const CONFIG: i32 = 2;
    pub const HYPOTHESIS: i32 = 3;
    pub const NUMERICAL: i32 = 4;
    pub const VERIFICATION: i32 = 5;
}

impl Error {
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Rank { .. } | Error::Json(_) | Error::Io(_) => exit_code::CONFIG,
            Error::Hypothesis(_) => exit_code::HYPOTHESIS,
            Error::Shape { .. }
            | Error::Assembly(_)
            | Error::UnsupportedKind(_)
            | Error::Numerical(_)
            | Error::StepFailure { .. }
            | Error::SwitchFailure { .. } => exit_code::NUMERICAL,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    pub(crate) fn check_len(expected: usize, actual: usize) -> Result<()> {
        if expected == actual {
            Ok(())
        } else {
            Err(Error::Shape { expected, actual })
        }
    }
}
