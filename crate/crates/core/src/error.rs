use thiserror::Error;

/// Errors raised by the solver library.
#[derive(Debug, Error)]
pub enum DfpError {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("backward requires a scalar output, got shape {0:?}")]
    NonScalarOutput(Vec<usize>),

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("non-finite activation in subnet {step} ({layer})")]
    NonFiniteActivation { step: usize, layer: String },

    #[error("non-finite state at step {step}, path {path}")]
    NonFiniteState { step: usize, path: usize },

    #[error("step {step} out of range (policy has {n_steps} subnets)")]
    StepOutOfRange { step: usize, n_steps: usize },

    #[error("belief profile does not match noise batch: {0}")]
    BatchMismatch(String),

    #[error("training diverged for player {player}: validation cost {cost} exceeds 10x initial {initial}")]
    Diverged { player: usize, cost: f64, initial: f64 },

    #[error("stage {stage}: training failed for player {player}: {source}")]
    PlayerFailed {
        stage: usize,
        player: usize,
        #[source]
        source: Box<DfpError>,
    },

    #[error("Riccati solution blew up at t = {t}")]
    RiccatiBlowUp { t: f64 },

    #[error("contraction constant undefined: gamma_und = {0} is not positive")]
    NonPositiveGamma(f64),

    #[error("out-of-sample evaluation did not settle after {passes} passes (max change {change:e})")]
    EvaluationNotStationary { passes: usize, change: f64 },

    #[error("unsupported checkpoint format version {found} (expected {expected})")]
    FormatVersion { found: u32, expected: u32 },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DfpError>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> DfpError {
    DfpError::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
