use thiserror::Error;

/// Errors raised by the canonical-form toolkit.
///
/// Each variant maps onto one of the CLI exit codes through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("index out of range: {0}")]
    Index(String),
    #[error("parameter outside domain: {0}")]
    Domain(String),
    #[error("unstable advance matrix: spectral radius {0:.6} is not below 1")]
    Unstable(f64),
    #[error("pair is not observable: {0}")]
    Unobservable(String),
    #[error("input is not in the required form: {0}")]
    Form(String),
    #[error("pair is not strict: {0}")]
    NotStrict(String),
    #[error("degenerate pair: {0}")]
    Degenerate(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("block exchange failed: {0}")]
    SwapFailed(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("missing input: {0}")]
    Missing(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code for the command-line tool.
    ///
    /// 2 parse/dimension, 3 domain/strictness, 4 numerical failure,
    /// 5 invariant violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Dimension(_) | Error::Index(_) | Error::Parse(_) | Error::Missing(_) | Error::Io(_) => 2,
            Error::Domain(_)
            | Error::Unstable(_)
            | Error::Unobservable(_)
            | Error::Form(_)
            | Error::NotStrict(_)
            | Error::Degenerate(_)
            | Error::Unsupported(_) => 3,
            Error::NoConvergence(_) | Error::Singular(_) | Error::SwapFailed(_) => 4,
            Error::Invariant(_) => 5,
        }
    }
}
