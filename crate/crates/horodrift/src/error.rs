use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tiling (P, Q) = ({p}, {q}): the angle condition 1/P + 1/Q < 1/2 fails")]
    InvalidTiling { p: String, q: u32 },

    #[error("point must lie in the open upper half-plane, got im = {im}")]
    InvalidPoint { im: f64 },

    #[error("matrix entries are not unimodular: |det - 1| = {drift:.3e}")]
    NotUnimodular { drift: f64 },

    #[error("fractional-linear action broke down numerically (image im = {im:.3e})")]
    NumericalBreakdown { im: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("generator horofunction sums are not all negative: max over the boundary is {max_sum:.6}")]
    ConditionViolated { max_sum: f64 },

    #[error("only {retained} of {total} trials reached the survival radius (need >= {min})")]
    InsufficientSurvivors {
        retained: usize,
        total: usize,
        min: usize,
    },

    #[error("speed formula undefined: both conductance intervals are exactly zero")]
    NotTransient,

    #[error("vertex identification audit failed: {0}")]
    VertexAudit(String),

    #[error("malformed input in {path}: {reason}")]
    FileFormat { path: String, reason: String },

    #[error("bad command line: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
