use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Validation failure tied to a data row (1-based, header excluded).
    #[error("row {row}: {message}")]
    Row { row: usize, message: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("unknown model `{tag}` (expected one of: {known})")]
    UnknownModel { tag: String, known: String },

    /// Parameters or data points outside the model support.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("numerical overflow: {0}")]
    Overflow(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("no converged run (best iterate {best:?}, gradient norm {grad_norm:.3e})")]
    NonConvergence { best: Vec<f64>, grad_norm: f64 },

    #[error("estimating equation diverged: {0}")]
    Divergence(String),

    #[error("study failed: {failed} of {total} replications did not produce a fit")]
    StudyFailure { failed: usize, total: usize },
}

impl Error {
    /// Errors caused by bad user input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::Row { .. }
                | Error::Csv(_)
                | Error::Io(_)
                | Error::UnknownModel { .. }
                | Error::DegenerateData(_)
        )
    }
}
