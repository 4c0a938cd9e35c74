use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum LabError {
    #[error("invalid dimension d={0}, need d >= 2")]
    InvalidDimension(usize),
    #[error("harmonic index (m={m}, j={j}) out of range")]
    InvalidIndex { m: usize, j: usize },
    #[error("point ({x}, {y}) lies outside the closed unit disk")]
    Domain { x: f64, y: f64 },
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("geometry error: {0}")]
    Geometry(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("resonance: {0}")]
    Resonance(String),
    #[error("quadrature under-resolves the potential: {0}")]
    Resolution(String),
    #[error("regime error: {0}")]
    Regime(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("format error: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, LabError>;

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for LabError {
    fn from(e: serde_json::Error) -> Self {
        LabError::Format(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Format(e.to_string())
    }
}
