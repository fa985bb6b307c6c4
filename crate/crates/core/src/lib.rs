//! Truncated explicit Euler schemes for a mean-reverting asset price whose
//! variance follows a highly non-linear mean-reverting diffusion of its own.
//!
//! The drift and diffusion coefficients of both components grow
//! super-linearly, so the classical explicit Euler scheme diverges. The
//! schemes here cap the coefficient arguments at a step-dependent level
//! chosen so that every evaluated coefficient stays below an explicit bound
//! `h(delta)`, which restores moment bounds and strong convergence while
//! keeping the scheme fully explicit.
//!
//! Layout:
//!
//! * [`model`] — parameter set, coefficient functions, validation.
//! * [`truncation`] — the dominating function `nu`, the step function `h`,
//!   and the truncated coefficient evaluations.
//! * [`rng`] — counter-based Gaussian streams (reproducible, order-free).
//! * [`scheme`] — the discrete stepper, path grids, Brownian coarsening.
//! * [`montecarlo`] — moment estimation, strong-error studies, step-interior
//!   gap probes.
//! * [`pricing`] — a path-dependent barrier option priced on the scheme.
//! * [`summation`] — balanced and compensated reductions used throughout.
//! * [`report`] — plain-text serialisation of the estimator outputs.

pub mod error;
pub mod model;
pub mod montecarlo;
pub mod pricing;
pub mod report;
pub mod rng;
pub mod scheme;
pub mod summation;
pub mod truncation;

pub use error::{Error, Result};
pub use model::{AssumptionReport, KhasminskiiProbe, ModelParams, ProbeGrid, ValidationMode};
pub use montecarlo::{
    EnsembleConfig, InterpolationGapReport, MomentReport, StrongErrorReport,
};
pub use pricing::{BarrierOptionSpec, PriceReport};
pub use report::{MomentsTable, StrongErrorTable, TrajectoryTable};
pub use rng::{Driver, RngStreamKey, INCREMENT_QUANTUM};
pub use scheme::{PathGrid, StepResult, Trajectory};
pub use truncation::{NuFunction, TruncationConfig, TruncationWarning};
