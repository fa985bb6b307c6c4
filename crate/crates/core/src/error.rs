use thiserror::Error;

/// Errors shared across the model, truncation, scheme and estimator layers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Coefficient functions are defined on the closed positive half line only.
    #[error("coefficient input out of domain: {name} = {value} (requires {requirement})")]
    Domain {
        name: &'static str,
        value: f64,
        requirement: &'static str,
    },

    /// A coefficient evaluation overflowed or otherwise produced a non-finite value.
    #[error("non-finite result in {context} (input {input})")]
    NonFinite { context: &'static str, input: f64 },

    /// Model parameters failed validation for the requested mode.
    #[error("parameter validation failed: {0}")]
    InvalidParams(String),

    /// `nu_inverse(y)` asked for a value below `nu(0)`, where the inverse is undefined.
    #[error("nu inverse undefined: y = {y} is below nu(0) = {nu_at_zero}")]
    NuInverseDomain { y: f64, nu_at_zero: f64 },

    /// The dominating-function search did not stabilise on the probe grid.
    #[error("dominating function search did not stabilise (ratio still growing at u = {at})")]
    NuSearchUnstable { at: f64 },

    /// The step size is too large for the step function to clear `nu(0)`,
    /// so the truncation cap cannot be computed at all.
    #[error("step size {delta} too large: h(delta) = {h} is below nu(0) = {nu_at_zero}")]
    StepTooLarge { delta: f64, h: f64, nu_at_zero: f64 },

    /// The step size exceeds the admissibility threshold `delta_star`.
    #[error("step size {delta} exceeds delta_star = {delta_star}")]
    DeltaAboveStar { delta: f64, delta_star: f64 },

    /// Invalid truncation configuration input (exponent range, non-positive step, ...).
    #[error("invalid truncation configuration: {0}")]
    InvalidTruncation(String),

    /// A path produced a non-finite state; the step index is 0-based.
    #[error("simulation produced a non-finite state at step {step}")]
    Simulation { step: usize },

    /// Increment array length is not divisible by the coarsening factor.
    #[error("cannot coarsen {len} increments by factor {factor}")]
    CoarsenLength { len: usize, factor: usize },

    /// Invalid ensemble / experiment configuration.
    #[error("invalid ensemble configuration: {0}")]
    InvalidEnsemble(String),

    /// More than the tolerated share of paths failed to simulate.
    #[error("{failed} of {total} paths failed to simulate (tolerance 0.1%)")]
    TooManyPathFailures { failed: usize, total: usize },

    /// Invalid barrier option specification.
    #[error("invalid option specification: {0}")]
    InvalidOption(String),

    /// A rendered table could not be parsed back (header, arity or field).
    #[error("malformed report: {0}")]
    Report(String),
}

pub type Result<T> = std::result::Result<T, Error>;
