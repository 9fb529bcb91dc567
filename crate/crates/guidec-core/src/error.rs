use alloc::string::String;
use core::fmt;

/// Errors for every fallible operation in the crate.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// A log-weight or log-probability input was NaN or +inf.
    NonFiniteInput,
    /// An empty vector was passed where at least one entry is required.
    EmptyInput,
    /// Two distributions that must share a vocabulary have different lengths.
    DimensionMismatch { expected: usize, got: usize },
    /// A probability vector does not satisfy the distribution invariants.
    InvalidDistribution { reason: &'static str },
    /// Vocabulary construction failed.
    InvalidVocab { reason: &'static str },
    /// A token index is outside the vocabulary.
    TokenOutOfRange { token: usize, vocab: usize },
    /// `advance` was called on a state whose output already ended in eos.
    AdvancePastTerminal,
    /// The training corpus is empty.
    EmptyCorpus,
    /// A training sequence does not end in the eos token.
    SequenceMissingEos { index: usize },
    /// The state carries an evidence id the model has no table for.
    UnknownEvidenceId { id: String },
    /// The model order is above the supported bound.
    OrderTooLarge { order: usize, max: usize },
    /// A discriminator was asked to score a sequence that does not end in eos.
    NonTerminalSequence,
    /// |vocab|^horizon exceeds the enumeration guard.
    StateSpaceTooLarge { vocab: usize, horizon: usize },
    /// Temperature must be positive.
    NonPositiveTemperature { value: f64 },
    /// The dynamic-lambda map needs a nonnegative divergence.
    NegativeKl { value: f64 },
    /// Guidance strength must be nonnegative.
    NegativeLambda { value: f64 },
    /// The divergence threshold must be positive.
    NonPositiveSigma { value: f64 },
    /// A q/v ratio entry was negative.
    NegativeGuidanceRatio { value: f64 },
    /// The policy kind requires a guidance input that was not supplied.
    MissingGuidanceInput { field: &'static str },
    /// Grid search only covers two- and three-dimensional simplices.
    DimensionTooLarge { dim: usize },
    /// Grid search spacing must be in (0, 1e-2].
    InvalidStep { value: f64 },
    /// Gradient checks need a point away from the simplex boundary.
    PointTooCloseToBoundary { min_prob: f64 },
    /// Metrics need at least one trace.
    EmptyTraceSet,
    /// The swept name is not a hyperparameter of the scenario's policy kind.
    UnknownParameter { name: String },
    /// Scenario-level validation failed.
    InvalidScenario { reason: &'static str },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonFiniteInput => write!(f, "input must be finite"),
            Self::EmptyInput => write!(f, "input must be nonempty"),
            Self::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            Self::InvalidDistribution { reason } => write!(f, "invalid distribution: {reason}"),
            Self::InvalidVocab { reason } => write!(f, "invalid vocabulary: {reason}"),
            Self::TokenOutOfRange { token, vocab } => {
                write!(
                    f,
                    "token index {token} out of range for vocabulary of {vocab}"
                )
            }
            Self::AdvancePastTerminal => write!(f, "cannot advance a terminal state"),
            Self::EmptyCorpus => write!(f, "training corpus is empty"),
            Self::SequenceMissingEos { index } => {
                write!(f, "corpus sequence {index} does not end in eos")
            }
            Self::UnknownEvidenceId { id } => write!(f, "unknown evidence id {id:?}"),
            Self::OrderTooLarge { order, max } => {
                write!(f, "model order {order} exceeds the supported maximum {max}")
            }
            Self::NonTerminalSequence => write!(f, "sequence does not end in eos"),
            Self::StateSpaceTooLarge { vocab, horizon } => {
                write!(
                    f,
                    "state space too large: {vocab}^{horizon} exceeds the guard"
                )
            }
            Self::NonPositiveTemperature { value } => {
                write!(f, "temperature must be positive, got {value}")
            }
            Self::NegativeKl { value } => write!(f, "KL divergence must be >= 0, got {value}"),
            Self::NegativeLambda { value } => write!(f, "lambda must be >= 0, got {value}"),
            Self::NonPositiveSigma { value } => write!(f, "sigma must be positive, got {value}"),
            Self::NegativeGuidanceRatio { value } => {
                write!(f, "q/v ratio entries must be >= 0, got {value}")
            }
            Self::MissingGuidanceInput { field } => {
                write!(f, "policy requires the guidance input {field}")
            }
            Self::DimensionTooLarge { dim } => {
                write!(f, "grid search supports n in {{2, 3}}, got {dim}")
            }
            Self::InvalidStep { value } => {
                write!(f, "grid step must be in (0, 1e-2], got {value}")
            }
            Self::PointTooCloseToBoundary { min_prob } => {
                write!(
                    f,
                    "point too close to the simplex boundary (min prob {min_prob:e})"
                )
            }
            Self::EmptyTraceSet => write!(f, "metrics require at least one trace"),
            Self::UnknownParameter { name } => {
                write!(f, "{name:?} is not a hyperparameter of this policy kind")
            }
            Self::InvalidScenario { reason } => write!(f, "invalid scenario: {reason}"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
