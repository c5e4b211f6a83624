//! Error type shared by every module of the toolkit.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("mesh topology error: {0}")]
    Topology(String),

    #[error("inverted mesh: minimum signed triangle area {min_area:.3e}")]
    InvertedMesh { min_area: f64 },

    #[error("point ({x}, {y}) is not inside the mesh")]
    Location { x: f64, y: f64 },

    #[error("solver did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    Solver { iterations: usize, residual: f64 },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("measurement error: {0}")]
    Measurement(String),

    #[error("step failure: {0}")]
    StepFailure(String),

    #[error("oracle error: {0}")]
    Oracle(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
