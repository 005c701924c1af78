use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("integrator failure in realization {realization:?} at step {step}, agent {agent}: {reason}")]
    Integrator {
        realization: Option<usize>,
        step: usize,
        agent: usize,
        reason: String,
    },

    #[error("velocity {0:?} lies outside the convex hull of the strategy set")]
    Infeasible(Vec<f64>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
        if expected == got {
            Ok(())
        } else {
            Err(Error::Dimension { expected, got })
        }
    }

    /// Attach a realization index to an integrator error.
    pub fn in_realization(self, r: usize) -> Self {
        match self {
            Error::Integrator {
                step, agent, reason, ..
            } => Error::Integrator {
                realization: Some(r),
                step,
                agent,
                reason,
            },
            other => other,
        }
    }
}
