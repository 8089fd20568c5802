use thiserror::Error;

/// Errors raised by geometry construction, assembly and solves.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
    #[error("invalid rod spec: {0}")]
    InvalidSpec(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular kernel evaluation at coincident points")]
    Singular,
    #[error("point outside the rod closure (distance {distance:.3e} > radius {radius:.3e})")]
    OutsideRod { distance: f64, radius: f64 },
    #[error("region {0} is empty")]
    EmptyRegion(String),
    #[error("Gram matrix is not positive definite: {0}")]
    IndefiniteGram(String),
    #[error("eigensolver failed: {0}")]
    Eigen(String),
    #[error("ill-conditioned system: condition estimate {condition:.3e} exceeds {limit:.3e}")]
    IllConditioned { condition: f64, limit: f64 },
    #[error("lossless resonance: tau_{0} vanishes")]
    LosslessResonance(usize),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
