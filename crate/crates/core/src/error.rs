use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Parameter outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("all-zero weights")]
    AllZeroWeights,

    #[error("no bracket: {0}")]
    NoBracket(String),

    #[error("no convergence: {0}")]
    NoConvergence(String),

    #[error("window truncation failed: needed tail bound {target:e}, best achievable within {max_window} entries is {achieved:e}")]
    Truncation {
        target: f64,
        achieved: f64,
        max_window: usize,
    },

    #[error("not absolutely summable: {0}")]
    NotSummable(String),

    #[error("representation mismatch: path form {path} vs window form {window}")]
    RepresentationMismatch { path: f64, window: f64 },

    #[error("condition failed: {0}")]
    Condition(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by invalid user input rather than a failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_)
                | Error::Empty(_)
                | Error::AllZeroWeights
                | Error::NotSummable(_)
                | Error::Condition(_)
                | Error::Config(_)
        )
    }
}
