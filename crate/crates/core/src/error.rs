use thiserror::Error;

/// Errors raised by the modelling and estimation routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("under-determined problem: {0}")]
    UnderDetermined(String),

    #[error("fit did not converge: {0}")]
    NonConvergence(String),

    #[error("rank-deficient problem: {0}")]
    RankDeficient(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("malformed input data: {0}")]
    MalformedInput(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
