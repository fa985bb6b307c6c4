//! An up-and-out barrier call priced on the truncated scheme.
//!
//! The contract pays `(X_T - strike)^+ exp(-discount_rate * T)` at expiry
//! unless the asset reached the barrier at any monitoring time, in which
//! case it pays nothing. Monitoring happens on the simulation grid itself
//! (discrete monitoring): a path is knocked out as soon as any grid value
//! satisfies `x >= barrier` — touching the barrier exactly counts as out,
//! surviving requires staying strictly below it.

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::montecarlo::{fold_paths, BatchSums};
use crate::scheme::{simulate_path, PathGrid, Trajectory};
use crate::truncation::TruncationConfig;

/// Up-and-out call contract parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierOptionSpec {
    pub strike: f64,
    pub barrier: f64,
    pub expiry: f64,
    /// Continuously compounded rate used for the `exp(-r T)` discount.
    pub discount_rate: f64,
}

impl BarrierOptionSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.strike >= 0.0 && self.strike.is_finite()) {
            return Err(Error::InvalidOption(format!(
                "strike must be non-negative and finite, got {}",
                self.strike
            )));
        }
        if !(self.barrier > 0.0 && self.barrier.is_finite()) {
            return Err(Error::InvalidOption(format!(
                "barrier must be positive and finite, got {}",
                self.barrier
            )));
        }
        if !(self.expiry > 0.0 && self.expiry.is_finite()) {
            return Err(Error::InvalidOption(format!(
                "expiry must be positive and finite, got {}",
                self.expiry
            )));
        }
        if !self.discount_rate.is_finite() {
            return Err(Error::InvalidOption(format!(
                "discount rate must be finite, got {}",
                self.discount_rate
            )));
        }
        Ok(())
    }

    fn discount(&self) -> f64 {
        (-self.discount_rate * self.expiry).exp()
    }
}

/// Discounted payoff of one simulated path, or an error when the trajectory
/// does not actually end at the contract expiry.
pub fn payoff_path(spec: &BarrierOptionSpec, traj: &Trajectory) -> Result<f64> {
    spec.validate()?;
    let t_last = *traj.times.last().ok_or_else(|| {
        Error::InvalidOption("trajectory has no grid points".into())
    })?;
    if (t_last - spec.expiry).abs() > 1e-9 * spec.expiry {
        return Err(Error::InvalidOption(format!(
            "trajectory ends at {t_last}, contract expires at {}",
            spec.expiry
        )));
    }
    let knocked_out = traj.x.iter().any(|&x| x >= spec.barrier);
    if knocked_out {
        return Ok(0.0);
    }
    let terminal = *traj.x.last().expect("non-empty by the check above");
    Ok((terminal - spec.strike).max(0.0) * spec.discount())
}

/// Monte Carlo price with its batch-means error and knockout statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceReport {
    pub price: f64,
    pub stderr: f64,
    pub n_paths: usize,
    /// Share of paths that hit the barrier on the grid.
    pub knockout_fraction: f64,
}

/// Price the contract on fresh paths at the truncation's step size.
pub fn price(
    spec: &BarrierOptionSpec,
    n_paths: usize,
    seed: u64,
    p: &ModelParams,
    cfg: &TruncationConfig,
) -> Result<PriceReport> {
    spec.validate()?;
    let n_steps = steps_for_expiry(spec, cfg.delta)?;
    let per_path = |i: u64| -> Result<(f64, f64)> {
        let grid = PathGrid::generate(seed, i, spec.expiry, n_steps);
        let traj = simulate_path(&grid, cfg, p)?;
        let payoff = payoff_path(spec, &traj)?;
        let knocked = traj.x.iter().any(|&x| x >= spec.barrier);
        Ok((payoff, knocked as u64 as f64))
    };
    let mut acc = BatchSums::new(2);
    let failed = fold_paths(n_paths, per_path, |i, (pay, ko): (f64, f64)| {
        acc.absorb(i, n_paths, &[pay, ko]);
    })?;
    let (means, ses) = acc.mean_and_se();
    Ok(PriceReport {
        price: means[0],
        stderr: ses[0],
        n_paths: n_paths - failed,
        knockout_fraction: means[1],
    })
}

/// Price the same contract at several step sizes with shared randomness:
/// all rungs are driven by block sums of one fine increment stream, so
/// successive prices differ only through discretisation, not through fresh
/// Monte Carlo noise. Used for self-convergence studies.
pub fn price_ladder<F>(
    spec: &BarrierOptionSpec,
    n_paths: usize,
    seed: u64,
    deltas: &[f64],
    p: &ModelParams,
    trunc: F,
) -> Result<Vec<PriceReport>>
where
    F: Fn(f64) -> Result<TruncationConfig> + Sync,
{
    spec.validate()?;
    if deltas.is_empty() {
        return Err(Error::InvalidOption("no step sizes requested".into()));
    }
    let finest = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let n_fine = steps_for_expiry(spec, finest)?;
    let mut factors = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let f = (d / finest).round();
        if f < 1.0 || (f * finest - d).abs() > 1e-9 * d || n_fine % f as usize != 0 {
            return Err(Error::InvalidOption(format!(
                "step {d} does not nest in the finest requested step {finest}"
            )));
        }
        factors.push(f as usize);
    }
    let cfgs: Vec<TruncationConfig> = deltas.iter().map(|&d| trunc(d)).collect::<Result<_>>()?;

    let per_path = |i: u64| -> Result<Vec<f64>> {
        let fine = PathGrid::generate(seed, i, spec.expiry, n_fine);
        let mut out = Vec::with_capacity(2 * deltas.len());
        for (f, cfg) in factors.iter().zip(&cfgs) {
            let grid = fine.coarsen(*f)?;
            let traj = simulate_path(&grid, cfg, p)?;
            out.push(payoff_path(spec, &traj)?);
            out.push(traj.x.iter().any(|&x| x >= spec.barrier) as u64 as f64);
        }
        Ok(out)
    };
    let mut acc = BatchSums::new(2 * deltas.len());
    let failed = fold_paths(n_paths, per_path, |i, vals: Vec<f64>| {
        acc.absorb(i, n_paths, &vals);
    })?;
    let (means, ses) = acc.mean_and_se();
    Ok((0..deltas.len())
        .map(|j| PriceReport {
            price: means[2 * j],
            stderr: ses[2 * j],
            n_paths: n_paths - failed,
            knockout_fraction: means[2 * j + 1],
        })
        .collect())
}

fn steps_for_expiry(spec: &BarrierOptionSpec, delta: f64) -> Result<usize> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidOption(format!(
            "step size must be positive and finite, got {delta}"
        )));
    }
    let n = (spec.expiry / delta).round();
    if n < 1.0 || (n * delta - spec.expiry).abs() > 1e-9 * spec.expiry {
        return Err(Error::InvalidOption(format!(
            "step {delta} does not divide the expiry {}",
            spec.expiry
        )));
    }
    Ok(n as usize)
}
