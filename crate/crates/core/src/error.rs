use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("field spec mismatch between operands")]
    SpecMismatch,

    #[error("invalid field spec: {0}")]
    InvalidField(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),

    #[error("indeterminate at available precision: {0}")]
    Indeterminate(String),

    #[error("no residue root: {0}")]
    NoResidueRoot(String),

    #[error("composition needs a series with zero constant term")]
    NonzeroConstantTerm,

    #[error("integrality failure at monomial {0}")]
    IntegralityFailure(String),

    #[error("perfection budget exhausted: {0}")]
    BudgetExhausted(String),

    #[error("iteration did not stabilize: {0}")]
    NonStabilization(String),

    #[error("incompatible Frobenius lifts: {0}")]
    Incompatible(String),

    #[error("identity check failed: {0}")]
    IdentityFailed(String),

    #[error("internal inconsistency: {0}")]
    Internal(String),
}

impl Error {
    /// True for failures that may disappear when the job is rerun with more
    /// ϖ-adic precision, a longer u-adic order cap or a larger perfection budget.
    pub fn is_precision_related(&self) -> bool {
        matches!(
            self,
            Error::PrecisionExhausted(_) | Error::Indeterminate(_) | Error::BudgetExhausted(_)
        )
    }
}
