use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid spectrum: {0}")]
    InvalidSpectrum(String),

    #[error("invalid argument `{arg}`: {reason}")]
    InvalidArgument { arg: &'static str, reason: String },

    /// A Riccati mode with negative initial curvature diverges at `t_star`.
    #[error("Riccati flow blows up at t* = {t_star} (mode {mode:?}, requested t = {t})")]
    BlowUp {
        t_star: f64,
        t: f64,
        mode: Option<usize>,
    },

    #[error("series tail cannot be certified to tol {tol:e} within {max_terms} terms")]
    TailNotCertifiable { tol: f64, max_terms: usize },

    #[error("initial condition is not convex: {0}")]
    NotConvex(String),

    #[error("stability violation: {0}")]
    Stability(String),

    #[error("boundary margin violation: {0}")]
    BoundaryMargin(String),

    #[error("quadrature window too small: {0}")]
    WindowTooSmall(String),

    #[error("query ({t}, {x:?}) outside field domain: {reason}")]
    OutOfDomain { t: f64, x: Vec<f64>, reason: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("container format: {0}")]
    Format(String),

    #[error("io: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn invalid(arg: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidArgument {
        arg,
        reason: reason.into(),
    }
}
