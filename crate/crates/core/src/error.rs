use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("grid too coarse: {points:.2} grid spacings across the smallest diameter, need at least 8")]
    GridTooCoarse { points: f64 },

    #[error("cross-section mask is empty")]
    EmptyMask,

    #[error("cross-section mask has {components} connected components, expected one")]
    DisconnectedMask { components: usize },

    #[error("erosion by delta = {delta} leaves no points (max distance to boundary is {max_tau})")]
    EmptyErosion { delta: f64, max_tau: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("weight must be finite and positive, got {value} at point {index}")]
    NonPositiveWeight { index: usize, value: f64 },

    #[error("truncation too short: {0}")]
    TruncationTooShort(String),

    #[error("eigensolver did not converge: {0}")]
    NotConverged(String),

    #[error("ground state changes sign: component {index} has value {value:e}")]
    SignChange { index: usize, value: f64 },

    #[error("test function does not vanish near the boundary: |g| = {value:e} at distance {tau:e}")]
    NotCompactlySupported { value: f64, tau: f64 },

    #[error("invalid twist profile: {0}")]
    InvalidProfile(String),

    #[error("incomplete certificate inputs: {0}")]
    IncompleteInputs(String),
}

pub type Result<T> = std::result::Result<T, Error>;
