use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not Hermitian (deviation {deviation:.3e}, scale {scale:.3e})")]
    NotHermitian { deviation: f64, scale: f64 },
    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),
    #[error("unknown register `{0}`")]
    UnknownRegister(String),
    #[error("invalid register layout: {0}")]
    BadLayout(String),
    #[error("not a density matrix: {0}")]
    NotDensityMatrix(String),
    #[error("bad pmf: {0}")]
    BadPmf(String),
    #[error("bad conditional state: {0}")]
    BadConditional(String),
    #[error("bad channel: {0}")]
    BadChannel(String),
    #[error("unsupported Renyi order t = {0}")]
    UnsupportedOrder(f64),
    #[error("no erasure probability in [0,1]: {0}")]
    NoRootInUnitInterval(String),
    #[error("degenerate denominator I[V;B|U] - I[V;S|U] = {0:.3e}")]
    DegenerateDenominator(f64),
    #[error("empty feasible set")]
    EmptyFeasibleSet,
    #[error("infeasible rates: {0}")]
    InfeasibleRates(String),
    #[error("codebook needs {needed} words, budget is {budget}")]
    BudgetExceeded { needed: u128, budget: u128 },
    #[error("dimension budget exceeded: {0}")]
    DimensionBudget(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("numerical check failed: {0}")]
    Numerical(String),
}

impl Error {
    /// True for errors that come from the mathematical preconditions of an
    /// operation rather than from malformed input.
    pub fn is_math_domain(&self) -> bool {
        matches!(
            self,
            Error::UnsupportedOrder(_)
                | Error::NoRootInUnitInterval(_)
                | Error::DegenerateDenominator(_)
                | Error::EmptyFeasibleSet
                | Error::InfeasibleRates(_)
                | Error::Numerical(_)
                | Error::NotHermitian { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
