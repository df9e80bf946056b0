use thiserror::Error;

/// Errors raised by the geometric routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// `r(r + r'')` (or one of its factors) is not positive at `theta`.
    #[error("strong convexity fails at theta = {theta}: r(r + r'') = {value}")]
    ConvexityViolation { theta: f64, value: f64 },

    #[error("invariant I = {i} is inconsistent with the {case} case")]
    CaseMismatch { i: f64, case: &'static str },

    #[error("coframe is singular at {point:?} (|det| = {det})")]
    SingularCoframe { point: [f64; 4], det: f64 },

    #[error("finite-difference step {0} outside [1e-7, 1e-3]")]
    InvalidStep(f64),

    #[error("adaptive integration failed: {0}")]
    AdaptiveIntegration(String),

    #[error("invalid integrator settings: {0}")]
    InvalidSettings(String),

    #[error("closed form requires a nonzero initial multiplier")]
    ZeroMultiplier,

    #[error("trace too short: {0}")]
    InsufficientTrace(String),

    #[error("trace was integrated for a different profile")]
    ProfileMismatch,

    #[error("could not isolate Wronskian roots near s = {near}")]
    RootIsolationFailure { near: f64 },

    #[error("degenerate segment at node {index}")]
    DegenerateSegment { index: usize },

    #[error("projection does not close")]
    NotClosed,

    /// The direct search hit its iteration cap; `best` is the last iterate.
    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize, best: Box<crate::oracle::DiscreteHorizontalPath> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
