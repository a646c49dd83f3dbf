use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("unsupported model: {0}")]
    Unsupported(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{name} = {value} lies outside [{min}, {max}]")]
    OutOfRange {
        name: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    /// `omega I - H` has no usable inverse; happens only at a real
    /// eigenvalue of a lossless system.
    #[error("singular response at omega = {omega} GHz")]
    SingularResponse { omega: f64 },

    #[error("numerical failure: {what} (residual {residual:e})")]
    NumericalFailure { what: String, residual: f64 },

    #[error("objective is not finite at the initial point")]
    InvalidInitial,

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("at frequency {freq} GHz: {source}")]
    AtFrequency { freq: f64, source: Box<Error> },

    #[error("at gap sample {index} (g = {gap} mm): {source}")]
    AtGap {
        index: usize,
        gap: f64,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// True for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::SingularResponse { .. } | Error::NumericalFailure { .. } => true,
            Error::AtFrequency { source, .. } | Error::AtGap { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
