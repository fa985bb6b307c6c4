//! The explicit truncated scheme on a uniform grid.
//!
//! One step from `(X_k, Y_k)` with increments `dB1_k`, `dB2_k`:
//!
//! ```text
//!   Y_{k+1} = Y_k + f2_D(Y_k) D + g2_D(Y_k) dB2_k
//!   X_{k+1} = X_k + f1_D(X_k) D + sqrt(|Y_k|) g1_D(X_k) dB1_k
//! ```
//!
//! Both updates read the *current* state: the asset update uses `Y_k`, not
//! `Y_{k+1}`, and takes `sqrt(|Y_k|)` so transient negative variance
//! excursions stay harmless. All coefficients are the truncated versions, so
//! every evaluated magnitude is bounded by `h(D)` — the stepper asserts that
//! in debug builds.
//!
//! Increments come from the counter-based generator keyed by
//! `(seed, path_index, driver)`; refinement studies couple resolutions by
//! block-summing one fine increment stream (see [`coarsen`]).

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng::{quantize, CounterStream, RngStreamKey};
use crate::summation::pairwise_sum;
use crate::truncation::TruncationConfig;

/// Gaussian increments `N(0, delta)` for one stream, one value per step.
///
/// Pure function of the key: same key, same `n`, same `delta` — identical
/// bits, on any machine, in any order, on any worker. Increments are
/// quantized (see [`crate::rng::INCREMENT_QUANTUM`]) so block sums over them
/// are exact.
pub fn generate_increments(key: RngStreamKey, n: usize, delta: f64) -> Vec<f64> {
    assert!(
        delta > 0.0 || n == 0,
        "step size must be positive, got {delta}"
    );
    let stream = CounterStream::new(key);
    let sqrt_delta = delta.sqrt();
    let mut out = Vec::with_capacity(n);
    let mut j = 0u64;
    while out.len() < n {
        let (z0, z1) = stream.normal_pair(j);
        out.push(quantize(z0 * sqrt_delta));
        if out.len() < n {
            out.push(quantize(z1 * sqrt_delta));
        }
        j += 1;
    }
    out
}

/// Block sums of `fine` in groups of `factor`: the coarse increments of the
/// same Brownian path. Fails unless `factor` divides the length.
///
/// Blocks are summed with the same balanced pairwise grouping used everywhere
/// else, so coarsening composes: `coarsen(coarsen(a, 2), 2)` performs the
/// identical float operations as `coarsen(a, 4)`. On quantized increments the
/// sums are exact outright.
pub fn coarsen(fine: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 || fine.len() % factor != 0 {
        return Err(Error::CoarsenLength {
            len: fine.len(),
            factor,
        });
    }
    Ok(fine.chunks_exact(factor).map(pairwise_sum).collect())
}

/// A uniform time grid together with the Brownian increments driving one path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathGrid {
    pub t_end: f64,
    pub n_steps: usize,
    pub delta: f64,
    pub db1: Vec<f64>,
    pub db2: Vec<f64>,
}

impl PathGrid {
    /// Fresh increments for path `path_index` under `seed`.
    pub fn generate(seed: u64, path_index: u64, t_end: f64, n_steps: usize) -> PathGrid {
        assert!(t_end >= 0.0, "horizon must be non-negative");
        let delta = if n_steps == 0 { 0.0 } else { t_end / n_steps as f64 };
        let db1 = generate_increments(
            RngStreamKey {
                seed,
                path_index,
                driver: crate::rng::Driver::B1,
            },
            n_steps,
            delta,
        );
        let db2 = generate_increments(
            RngStreamKey {
                seed,
                path_index,
                driver: crate::rng::Driver::B2,
            },
            n_steps,
            delta,
        );
        PathGrid {
            t_end,
            n_steps,
            delta,
            db1,
            db2,
        }
    }

    /// Wrap externally supplied increments (coupled refinement studies).
    pub fn from_increments(t_end: f64, delta: f64, db1: Vec<f64>, db2: Vec<f64>) -> Result<Self> {
        if db1.len() != db2.len() {
            return Err(Error::InvalidEnsemble(format!(
                "driver increment counts differ: {} vs {}",
                db1.len(),
                db2.len()
            )));
        }
        let n_steps = db1.len();
        let implied = delta * n_steps as f64;
        if n_steps > 0 && (implied - t_end).abs() > 1e-12 * t_end.abs().max(1.0) {
            return Err(Error::InvalidEnsemble(format!(
                "n_steps * delta = {implied} does not reproduce t_end = {t_end}"
            )));
        }
        Ok(PathGrid {
            t_end,
            n_steps,
            delta,
            db1,
            db2,
        })
    }

    /// The same Brownian path on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<PathGrid> {
        Ok(PathGrid {
            t_end: self.t_end,
            n_steps: self.n_steps / factor.max(1),
            delta: self.delta * factor as f64,
            db1: coarsen(&self.db1, factor)?,
            db2: coarsen(&self.db2, factor)?,
        })
    }
}

/// One discrete state with its truncation-activity flags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepResult {
    pub x: f64,
    pub y: f64,
    /// The asset argument exceeded the cap when its coefficients were read.
    pub capped_x: bool,
    /// The variance argument exceeded the cap.
    pub capped_y: bool,
}

/// Advance `(x, y)` by one step. Errors if the new state is non-finite (the
/// caller supplies the step index for context).
pub fn step(
    x: f64,
    y: f64,
    db1: f64,
    db2: f64,
    cfg: &TruncationConfig,
    p: &ModelParams,
) -> Result<StepResult> {
    let f1 = cfg.trunc_drift_asset(p, x);
    let g1 = cfg.trunc_diffusion_asset(p, x);
    let f2 = cfg.trunc_drift_var(p, y);
    let g2 = cfg.trunc_diffusion_var(p, y);
    debug_assert!(
        f1.abs() <= cfg.h_delta * (1.0 + 1e-9)
            && g1.abs() <= cfg.h_delta * (1.0 + 1e-9)
            && f2.abs() <= cfg.h_delta * (1.0 + 1e-9)
            && g2.abs() <= cfg.h_delta * (1.0 + 1e-9),
        "truncated coefficient escaped the uniform bound h(delta)"
    );
    let delta = cfg.delta;
    let y_next = y + f2 * delta + g2 * db2;
    let x_next = x + f1 * delta + y.abs().sqrt() * g1 * db1;
    if !x_next.is_finite() || !y_next.is_finite() {
        return Err(Error::Simulation { step: 0 });
    }
    Ok(StepResult {
        x: x_next,
        y: y_next,
        capped_x: x > cfg.cap,
        capped_y: y > cfg.cap,
    })
}

/// A discrete path: grid times, both state components, and diagnostics.
/// `x[k]`/`y[k]` are exactly the step-process values at `times[k]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Steps at which the asset cap was active.
    pub trunc_hits_x: usize,
    /// Steps at which the variance cap was active.
    pub trunc_hits_y: usize,
    /// Steps started from a negative variance value.
    pub neg_excursions_y: usize,
}

/// Run the scheme over `grid`. The grid step must match the step the
/// truncation was built for: the cap is a function of the step size.
pub fn simulate_path(
    grid: &PathGrid,
    cfg: &TruncationConfig,
    p: &ModelParams,
) -> Result<Trajectory> {
    if grid.n_steps > 0 && (grid.delta - cfg.delta).abs() > 1e-9 * cfg.delta {
        return Err(Error::InvalidTruncation(format!(
            "grid step {} does not match truncation step {}",
            grid.delta, cfg.delta
        )));
    }
    let n = grid.n_steps;
    let mut times = Vec::with_capacity(n + 1);
    let mut xs = Vec::with_capacity(n + 1);
    let mut ys = Vec::with_capacity(n + 1);
    let mut trunc_hits_x = 0;
    let mut trunc_hits_y = 0;
    let mut neg_excursions_y = 0;

    let (mut x, mut y) = (p.x0, p.phi0);
    times.push(0.0);
    xs.push(x);
    ys.push(y);
    for k in 0..n {
        if y < 0.0 {
            neg_excursions_y += 1;
        }
        let out = step(x, y, grid.db1[k], grid.db2[k], cfg, p)
            .map_err(|_| Error::Simulation { step: k })?;
        trunc_hits_x += out.capped_x as usize;
        trunc_hits_y += out.capped_y as usize;
        x = out.x;
        y = out.y;
        times.push((k + 1) as f64 * grid.delta);
        xs.push(x);
        ys.push(y);
    }
    Ok(Trajectory {
        times,
        x: xs,
        y: ys,
        trunc_hits_x,
        trunc_hits_y,
        neg_excursions_y,
    })
}
