use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("integration step {dt} s outside (0, {max}]")]
    StepOutOfRange { dt: f64, max: f64 },

    #[error("sampler produced a non-finite state at tau = {tau}")]
    NonFiniteSample { tau: f64 },

    #[error("training diverged at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },

    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    Shape {
        expected: (usize, usize),
        got: (usize, usize),
    },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("rollout aborted at t = {t:.3} s ({tag})")]
    RolloutAborted { t: f64, tag: &'static str },

    #[error("plan rejected after {attempts} attempts")]
    PlanRejected { attempts: usize },

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }
}
