use thiserror::Error;

use crate::expr::{EvalError, ParseError};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("{context}: {source}")]
    Eval {
        context: String,
        #[source]
        source: EvalError,
    },

    #[error("{what} did not converge after {iterations} iterations (last residual {last_residual:e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        last_residual: f64,
        residual_trace: Vec<f64>,
    },

    #[error("stage {stage} (epsilon = {epsilon:e}): {source}")]
    Stage {
        stage: usize,
        epsilon: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("iterate left the invariant set at iteration {iteration}: {detail}")]
    InvarianceViolation { iteration: usize, detail: String },

    #[error("a posteriori bound violated: {0}")]
    Inconsistent(String),

    #[error("structural assumption violated: {0}")]
    Assumption(String),

    #[error("configuration error: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn eval(context: impl Into<String>, source: EvalError) -> Self {
        Error::Eval {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True when the error stems from an iteration that ran out of budget,
    /// possibly wrapped in a stage error.
    pub fn is_non_convergence(&self) -> bool {
        match self {
            Error::NonConvergence { .. } => true,
            Error::Stage { source, .. } => source.is_non_convergence(),
            _ => false,
        }
    }
}
