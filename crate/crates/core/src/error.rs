use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("top degree has no exterior derivative (degree {degree} in dimension {dim})")]
    TopDegree { degree: usize, dim: usize },

    #[error("interior product of a 0-form is undefined")]
    ZeroDegreeContraction,

    #[error("degree mismatch: expected {expected}, got {got}")]
    DegreeMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid level index {level} (flag has {levels} levels)")]
    InvalidLevel { level: usize, levels: usize },

    #[error("non-finite value at t = {time}, point {point:?}")]
    NonFinite { time: f64, point: Vec<f64> },

    #[error("tangent violates compatibility at level {level}, vertex {vertex}: defect {defect:e}")]
    Compatibility { level: usize, vertex: usize, defect: f64 },

    #[error("symplectic mode requires even-dimensional levels (level {level} has dimension {dim})")]
    OddDimension { level: usize, dim: usize },

    #[error("flag is not symplectic: {0}")]
    NotSymplectic(String),

    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),

    #[error("tubular radius {radius} exceeds half the ambient separation {separation}")]
    TubularRadius { radius: f64, separation: f64 },

    #[error("invalid ambient space: {0}")]
    InvalidAmbient(String),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
