use thiserror::Error;

/// Errors raised anywhere in the estimation pipeline.
///
/// The variants map onto CLI exit codes: `Domain`, `Data` and `Config` are
/// input problems (exit 2), `Numerical` and `Estimation` are fit failures
/// (exit 3).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("numerical error in component {component}: {message}")]
    Numerical { component: usize, message: String },

    #[error("estimation error: {0}")]
    Estimation(String),

    #[error("{method}: {source}")]
    Method {
        method: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(component: usize, msg: impl Into<String>) -> Self {
        Error::Numerical {
            component,
            message: msg.into(),
        }
    }

    pub fn estimation(msg: impl Into<String>) -> Self {
        Error::Estimation(msg.into())
    }

    /// Attach the name of the estimator that produced the error.
    pub fn for_method(self, method: impl Into<String>) -> Self {
        Error::Method {
            method: method.into(),
            source: Box::new(self),
        }
    }

    /// True for failures of the numerical machinery rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::Numerical { .. } | Error::Estimation(_) => true,
            Error::Method { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
