use thiserror::Error;

/// Errors shared by every module.
///
/// `Precondition`, `Window`, `Guard` and `Budget` are caller mistakes or
/// configured limits; the CLI maps them to exit code 2.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("outside validity window: {0}")]
    Window(String),

    #[error("runtime guard exceeded: {0}")]
    Guard(String),

    #[error("term budget exceeded: need {needed} terms, max_terms is {max_terms}; achievable tolerance {achievable_tol:e}")]
    Budget {
        needed: u64,
        max_terms: u64,
        achievable_tol: f64,
    },

    #[error("numerical check failed: {0}")]
    Numerical(String),
}

impl Error {
    pub fn is_precondition(&self) -> bool {
        !matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn precondition<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Precondition(msg.into()))
}
