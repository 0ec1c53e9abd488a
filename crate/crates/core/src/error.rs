use thiserror::Error;

/// Errors shared across the library and CLI.
#[derive(Error, Debug)]
pub enum Error {
    #[error("unknown model `{name}`; registered models: {registry}")]
    UnknownModel { name: String, registry: String },

    /// The squared diffusion coefficient evaluated to a non-positive value,
    /// which signals a parameter outside the admissible region.
    #[error("non-positive squared diffusion coefficient {value} at x = {x} with alpha = {alpha:?}{}",
            interval.map(|j| format!(" (interval {j})")).unwrap_or_default())]
    NonPositiveDiffusion {
        x: f64,
        alpha: Vec<f64>,
        value: f64,
        interval: Option<usize>,
    },

    #[error("simulation produced a non-finite state at fine step {step}")]
    SimulationDiverged { step: usize },

    #[error("residual variance is degenerate ({var}); residuals are (near-)constant")]
    DegenerateVariance { var: f64 },

    #[error(
        "normal matrix is singular or near-singular (pivot {pivot}, scale {scale}); \
             basis functions may be collinear or too few samples retained"
    )]
    SingularNormalMatrix { pivot: f64, scale: f64 },

    #[error("non-uniform time grid at row {row}: spacing {found} deviates from {expected}")]
    NonUniformGrid {
        row: usize,
        found: f64,
        expected: f64,
    },

    #[error("malformed row {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParam { name: String, reason: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            name: name.to_string(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
