use thiserror::Error;

use crate::linalg::Vec3;

/// Errors raised by the lab's numerical pipelines.
///
/// Every variant corresponds to a precondition or convergence failure that
/// a caller can act on (shrink ε, lengthen an orbit, coarsen a schedule).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum LabError {
    #[error("linear part is not partially hyperbolic Anosov: {0}")]
    NotPartiallyHyperbolicAnosov(String),

    #[error("Newton iteration did not converge after {iterations} steps (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("bundle iteration did not reach tolerance {tolerance:e} (residual {residual:e} at depth {depth})")]
    BundleNonConvergence {
        depth: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("cone condition violated at {point} ({detail})")]
    ConeViolation { point: Vec3, detail: String },

    #[error("pushed unstable plane degenerated (smallest singular ratio {ratio:e})")]
    PlaneDegeneracy { ratio: f64 },

    #[error("leaf direction field jumped by {angle:.3} rad at {point}")]
    OrientationJump { point: Vec3, angle: f64 },

    #[error("leaf refinement exceeded the vertex budget of {budget}")]
    VertexBudgetExceeded { budget: usize },

    #[error("discretization step {step:e} is coarser than ε/10 = {limit:e}")]
    ResolutionTooCoarse { step: f64, limit: f64 },

    #[error("Δ tail bound unavailable: {0}")]
    TailBoundUnavailable(String),

    #[error("partition failed the adaptedness check on {failures} of {samples} samples")]
    AdaptednessViolation { failures: usize, samples: usize },

    #[error("conjugacy series stalled: ratio {ratio:.6} needs {terms} terms (cap {cap})")]
    SeriesStall {
        ratio: f64,
        terms: usize,
        cap: usize,
    },

    #[error("probe scale {scale:e} is below the evaluation resolution {resolution:e}")]
    ScaleBelowResolution { scale: f64, resolution: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;

impl LabError {
    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::NotPartiallyHyperbolicAnosov(_) => 10,
            LabError::ConeViolation { .. } => 11,
            LabError::NonConvergence { .. } => 12,
            LabError::BundleNonConvergence { .. } => 13,
            LabError::PlaneDegeneracy { .. } => 14,
            LabError::OrientationJump { .. } => 15,
            LabError::VertexBudgetExceeded { .. } => 16,
            LabError::ResolutionTooCoarse { .. } => 17,
            LabError::TailBoundUnavailable(_) => 18,
            LabError::AdaptednessViolation { .. } => 19,
            LabError::SeriesStall { .. } => 20,
            LabError::ScaleBelowResolution { .. } => 21,
            LabError::InvalidConfig(_) => 2,
            LabError::Io(_) => 3,
        }
    }
}
