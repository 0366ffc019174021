use thiserror::Error;

/// Errors raised by planning, estimation and simulation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid gap: {0}")]
    InvalidGap(String),
    #[error("degenerate gap: long side and normal are not orthogonal (|dot| = {0:e})")]
    DegenerateGap(f64),
    #[error("invalid traverse parameters: {0}")]
    InvalidParams(String),
    #[error("time {t} outside [0, {end}]")]
    OutOfRange { t: f64, end: f64 },
    #[error("no traverse parameters satisfy the constraints")]
    Infeasible,
    #[error("primitive duration must be positive, got {0}")]
    InvalidDuration(f64),
    #[error("bearing to the gap is parallel to the body z-axis")]
    DegenerateBearing,
    #[error("optical axis has no horizontal component")]
    DegenerateHeading,
    #[error("no feasible approach candidate in the sampling grid")]
    NoFeasibleCandidate,
    #[error("gap is not visible")]
    NotVisible,
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
