use thiserror::Error;

/// Errors produced by every stage of the estimation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid case: {0}")]
    InvalidCase(String),
    #[error("invalid placement: {0}")]
    InvalidPlacement(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("dimension guard: {0}")]
    DimensionGuard(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("singular matrix: pivot {pivot:e} below threshold {threshold:e}")]
    Singular { pivot: f64, threshold: f64 },
    #[error("unobservable placement: measurement matrix rank {rank} < {states}")]
    Unobservable { rank: usize, states: usize },
    #[error("{what} did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },
    #[error("interval iteration diverges: spectral radius estimate {0:.6} >= 1")]
    Divergent(f64),
    #[error("all sign vectors infeasible")]
    AllInfeasible,
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    /// True for failures of a numerical method (as opposed to bad input data).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Singular { .. }
                | Error::NonConvergence { .. }
                | Error::Divergent(_)
                | Error::AllInfeasible
                | Error::NonFinite(_)
        )
    }

    /// Short machine-readable tag used on the CLI error stream.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Syntax { .. } => "syntax",
            Error::InvalidCase(_) => "invalid_case",
            Error::InvalidPlacement(_) => "invalid_placement",
            Error::InvalidInput(_) => "invalid_input",
            Error::Dimension(_) => "dimension",
            Error::DimensionGuard(_) => "dimension_guard",
            Error::NonFinite(_) => "non_finite",
            Error::Singular { .. } => "singular",
            Error::Unobservable { .. } => "unobservable",
            Error::NonConvergence { .. } => "non_convergence",
            Error::Divergent(_) => "divergent",
            Error::AllInfeasible => "all_infeasible",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
