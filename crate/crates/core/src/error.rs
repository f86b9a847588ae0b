use thiserror::Error;

/// Errors surfaced by the numerical pipelines.
#[derive(Debug, Error)]
pub enum Error {
    /// A kernel parameter set violates the admissibility conditions.
    /// Carries the violated inequality.
    #[error("rejected parameters: {0}")]
    RejectedParameters(String),

    /// A point was evaluated against a potential of a different dimension.
    #[error("dimension mismatch: expected d={expected}, got d={got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A quadrature or energy evaluation produced a non-finite value.
    /// Reported, never silently clamped.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    /// Two objects live on incompatible time grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Importance weights degenerated below the configured floor.
    #[error("weight degeneracy: effective sample size {ess:.1} below floor {floor:.1}")]
    WeightDegeneracy { ess: f64, floor: f64 },

    /// An iterative solver did not reach its tolerance.
    #[error("no convergence in {0}")]
    NonConvergence(&'static str),

    /// Config validation failure (unknown key, missing key, bad value).
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
