use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty sample")]
    EmptySample,

    #[error("domain too large: {size} points (limit {limit})")]
    DomainTooLarge { size: usize, limit: usize },

    #[error("invalid domain size {0}; must be in 1..=64")]
    InvalidDomain(usize),

    #[error("hypothesis length {got} does not match domain size {expected}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("point {point} outside domain of size {size}")]
    PointOutOfRange { point: u32, size: usize },

    #[error("hypothesis class must be nonempty")]
    EmptyClass,

    #[error("duplicate hypothesis {0} in class")]
    DuplicateHypothesis(String),

    #[error("index {index} out of range for support of size {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("probabilities do not sum to one (sum = {0})")]
    NotNormalized(String),

    #[error("negative probability {0}")]
    NegativeProbability(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mismatched atom universes: {0}")]
    MismatchedUniverse(String),

    #[error("enumeration budget exceeded: need {needed}, budget {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },

    #[error("prior never consistent with the sample")]
    PriorNeverConsistent,

    #[error("rejection sampler gave up after {attempts} attempts")]
    DrawCapExceeded { attempts: u64 },

    #[error("posterior not available for rule {0}")]
    PosteriorUnavailable(String),

    #[error("rule not seed-splittable: {0}")]
    NotSeedSplittable(String),

    #[error("no consistent target: sample is not realizable")]
    NoConsistentTarget,

    #[error("boosting gate never passed after {attempts} attempts in round {round}; observed KL values {observed:?}")]
    GateNeverPassed { round: usize, attempts: u64, observed: Vec<f64> },

    #[error("theorem invariant violated: {0}")]
    InvariantViolation(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("KL certificate missing")]
    MissingCertificate,

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;
