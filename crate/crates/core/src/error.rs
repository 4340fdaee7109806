//! Error types shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A logarithm or transport was requested across (or too close to) the cut locus.
    #[error("point pair at distance {dist:.6} is outside the safe injectivity ball (limit {limit:.6})")]
    CutLocus { dist: f64, limit: f64 },

    /// A finite-difference stencil would leave the injectivity ball.
    #[error("finite-difference step {step:.3e} too large for order {order} (limit {limit:.3e})")]
    StepTooLarge { step: f64, order: usize, limit: f64 },

    /// A scaled test function does not fit inside the injectivity ball.
    #[error("test-function scale {lambda:.4} exceeds the injectivity limit {limit:.4}")]
    ScaleTooLarge { lambda: f64, limit: f64 },

    /// The requested scale is below the resolution of the discretisation.
    #[error("scale {lambda:.4e} under-resolved ({reason})")]
    UnderResolved { lambda: f64, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// The Picard map failed to contract; carries the measured factor.
    #[error("fixpoint map is not a contraction (measured factor {factor:.3}); {suggestion}")]
    NonContraction { factor: f64, suggestion: String },
}

pub type Result<T> = std::result::Result<T, Error>;
