use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or missing configuration / input data.
    #[error("{0}")]
    Schema(String),
    #[error("{context}: {source}")]
    Input { context: String, source: gpwlab_core::Error },
    #[error(transparent)]
    Core(#[from] gpwlab_core::Error),
    #[error("{0}")]
    Output(String),
}

impl CliError {
    pub fn schema(msg: impl Into<String>) -> Self {
        CliError::Schema(msg.into())
    }

    /// 2 for bad input or configuration, 3 for math-domain failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use gpwlab_core::Error as E;
        match self {
            CliError::Schema(_) | CliError::Input { .. } => 2,
            CliError::Core(E::InvalidArgument(_) | E::BudgetExceeded { .. } | E::DimensionBudget(_)) => 2,
            CliError::Core(e) if e.is_math_domain() => 3,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
