use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point at radius {radius} lies outside the domain of radius {domain}")]
    OutsideDomain { radius: f64, domain: f64 },

    #[error("degenerate ellipticity: min h = {min_h:e}")]
    DegenerateEllipticity { min_h: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("nondegeneracy failure: {reason}")]
    Nondegeneracy { reason: String, min_phi_c: f64, j1: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("linear solve failed: {0}")]
    LinearSolve(String),

    #[error("fixed point did not converge at t = {time} after {iterations} iterations (last update {update:e})")]
    FixedPoint { time: f64, iterations: usize, update: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
