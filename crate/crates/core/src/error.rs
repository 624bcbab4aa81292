use thiserror::Error;

use crate::model::Arm;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid outcome range [{lo}, {hi}]: lower end must be strictly below upper end")]
    InvalidRange { lo: f64, hi: f64 },

    #[error("unit {id}: {reason}")]
    InvalidUnit { id: String, reason: String },

    #[error("unit {id}: outcome {y} lies outside the declared range [{lo}, {hi}]")]
    OutcomeOutOfRange { id: String, y: f64, lo: f64, hi: f64 },

    #[error("unit {id}: expected {expected} covariates, found {found}")]
    CovariateLength { id: String, expected: usize, found: usize },

    #[error("study needs at least 2 sampled units, found {0}")]
    TooFewSampled(usize),

    #[error("no sampled units in the {0} arm")]
    MissingArm(Arm),

    #[error("the {0} arm has a single unit; standard error is undefined")]
    DegenerateArm(Arm),

    #[error("potential outcomes are not available (data was not simulated)")]
    NotSimulated,

    #[error("design matrix is rank deficient")]
    RankDeficient,

    #[error("fitted propensity scores left [1e-10, 1 - 1e-10] (quasi-complete separation)")]
    Separation,

    #[error("sample effect {sate} exceeds the declared outcome range width {width}")]
    InputInconsistent { sate: f64, width: f64 },

    #[error("stratum {stratum} has no sampled units in the {arm} arm")]
    EmptyArmInStratum { stratum: usize, arm: Arm },

    #[error("baseline bound has zero width")]
    ZeroWidthBaseline,

    #[error("sampled covariate x{0} has zero variance")]
    ZeroVariance(usize),

    #[error("redefined population keeps {retained} non-sampled units, fewer than the {sampled} sampled units")]
    SubpopulationTooSmall { retained: usize, sampled: usize },

    #[error("bootstrap replicate {replicate} failed after {attempts} redraws without both treatment arms")]
    ReplicateFailure { replicate: usize, attempts: usize },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("only {eligible} eligible units, {needed} needed")]
    InsufficientEligible { eligible: usize, needed: usize },

    #[error("sample size {0} is odd; treatment is split in half")]
    OddSampleSize(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    /// Validation errors are caused by bad input; everything else is a
    /// failure of the computation on otherwise valid input.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidRange { .. }
                | Error::InvalidUnit { .. }
                | Error::OutcomeOutOfRange { .. }
                | Error::CovariateLength { .. }
                | Error::TooFewSampled(_)
                | Error::MissingArm(_)
                | Error::InvalidArgument(_)
                | Error::OddSampleSize(_)
        )
    }
}
