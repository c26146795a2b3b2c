use thiserror::Error;

/// Errors raised by the numerical kernels, scenario model, analysis and solvers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no convergence after {iterations} iterations (residual norm {residual_norm:e})")]
    NoConvergence {
        iterations: usize,
        residual_norm: f64,
        last_iterate: Vec<f64>,
    },

    #[error("singular system: {0}")]
    SingularSystem(String),

    #[error("evaluation failed at {location:?}: {message}")]
    Evaluation { location: Vec<f64>, message: String },

    #[error("state {state:?} outside domain {description}")]
    Domain { state: Vec<f64>, description: String },

    #[error("step size underflow at t = {t} (h = {h:e}); last accepted state {state:?}")]
    StepSizeUnderflow { t: f64, h: f64, state: Vec<f64> },

    #[error("trajectory left the domain at t = {t}: {message}")]
    DomainExit {
        t: f64,
        state: Vec<f64>,
        message: String,
    },

    #[error("capability missing: {0}")]
    Capability(String),

    #[error("point {xi:?} is outside the range of the chart")]
    ChartRange { xi: Vec<f64> },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("perturbed matrix numerically singular at {state:?} (condition estimate {condition:e})")]
    SingularEvaluation { state: Vec<f64>, condition: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("io: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
