use thiserror::Error;

/// Failures of the indicator computations (as opposed to input loading,
/// which reports [`crate::corpus::CorpusError`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ComputeError {
    #[error("no peer outcomes for institution `{institution}` in uda `{uda}`")]
    EmptyOutcomes { institution: String, uda: String },
    #[error("no peer data for uda `{0}`")]
    NoPeerData(String),
    #[error("empty score table")]
    EmptyScores,
    #[error("non-finite score for `{0}`")]
    NonFiniteScore(String),
    #[error("need at least 3 common institutions, found {0}")]
    TooFewCommon(usize),
    #[error("rank variance is zero on one side; correlation undefined")]
    ZeroVariance,
    #[error("uda `{0}` has no attributed publications")]
    EmptyPool(String),
    #[error("uda `{uda}`: {what} is zero, indicator undefined")]
    ZeroDenominator { uda: String, what: &'static str },
    #[error("institution `{institution}` has publications in sds `{sds}` but zero staff")]
    RosterInconsistency { institution: String, sds: String },
    #[error("institution `{institution}` has no staff in uda `{uda}`")]
    NoStaff { institution: String, uda: String },
    #[error("no staff figure for institution `{0}`")]
    MissingStaff(String),
    #[error("budget must be positive and finite, got {0}")]
    InvalidBudget(f64),
    #[error("all institutions carry zero weighted staff; nothing to allocate")]
    ZeroWeightMass,
    #[error("funding outcomes differ in {0}; deltas are only defined for matching inputs")]
    Mismatch(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}
