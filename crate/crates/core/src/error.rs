use thiserror::Error;

pub type Result<T> = std::result::Result<T, GeoError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    /// A parameter or base point fell outside the domain it was evaluated on.
    #[error("domain error: {what} = {value} outside [{lo}, {hi}]")]
    Domain {
        what: String,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("numeric error at u = {at}: {message}")]
    Numeric { at: f64, message: String },

    #[error("singular matrix (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("argument error: {0}")]
    Argument(String),

    #[error("configuration error: {0}")]
    Configuration(String),

    /// Raised by the flat-frame builder when two routes between the same
    /// points transport differently.
    #[error("not flat: routes {first} and {second} disagree by {defect:.3e}")]
    NotFlat {
        defect: f64,
        first: String,
        second: String,
    },
}

impl GeoError {
    pub(crate) fn domain(what: impl Into<String>, value: f64, lo: f64, hi: f64) -> Self {
        GeoError::Domain {
            what: what.into(),
            value,
            lo,
            hi,
        }
    }

    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        GeoError::Argument(msg.into())
    }
}
