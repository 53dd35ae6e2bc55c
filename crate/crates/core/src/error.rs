use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("discount factor must lie strictly inside (0, 1), got {0}")]
    InvalidDiscount(f64),
    #[error("budget recursion needs a duration of at least one step")]
    ZeroDuration,
    #[error("cost dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid action {0}")]
    InvalidAction(String),
    #[error("invalid domain parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BeliefError {
    #[error("belief has no particles")]
    Empty,
    #[error("particle and weight counts differ ({particles} vs {weights})")]
    LengthMismatch { particles: usize, weights: usize },
    #[error("weights must be finite, nonnegative and not all zero")]
    InvalidWeights,
    #[error("every particle is terminal")]
    Exhausted,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OptionError {
    #[error("option set is empty")]
    EmptySet,
    #[error("duplicate option label {0:?}")]
    DuplicateLabel(String),
    #[error("no option is available in the current belief")]
    NoneAvailable,
    #[error("unknown option {0:?}")]
    Unknown(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("invalid planner configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Option(#[from] OptionError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExecError {
    #[error("option selection failed: {0}")]
    Selector(#[from] PlanError),
    #[error(transparent)]
    Belief(#[from] BeliefError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CampaignError {
    #[error("episode {episode} (seed {seed}) failed: {message}")]
    Episode {
        episode: usize,
        seed: u64,
        message: String,
    },
    #[error("episode {episode} (seed {seed}) panicked: {message}")]
    Panic {
        episode: usize,
        seed: u64,
        message: String,
    },
    #[error("invalid campaign setup: {0}")]
    Setup(String),
}
