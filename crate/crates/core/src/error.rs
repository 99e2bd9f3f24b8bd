use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid transition J={j_lower} -> J'={j_upper}: {reason}")]
    InvalidTransition {
        j_lower: u32,
        j_upper: i64,
        reason: &'static str,
    },

    #[error("line {line} at {wavenumber} cm^-1 lies outside the two-photon grid [{lo}, {hi}] cm^-1")]
    OutOfBand {
        line: String,
        wavenumber: f64,
        lo: f64,
        hi: f64,
    },

    #[error("quadrature self-check failed: relative change {rel_change:.3e} on doubling resolution (limit {limit:.1e})")]
    Resolution { rel_change: f64, limit: f64 },

    #[error("two-photon grid too coarse for linear interpolation: linear vs quadratic differ by {rel_diff:.3e} (limit {limit:.1e})")]
    InterpolationTooCoarse { rel_diff: f64, limit: f64 },

    #[error("unknown electronic state '{0}'")]
    UnknownState(String),

    #[error("invalid config field '{field}': {message}")]
    Config { field: String, message: String },

    #[error("data are not identifiable: {0}")]
    NonIdentifiable(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by user configuration rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::UnknownState(_) | Error::Json(_) | Error::Io(_)
        )
    }
}
