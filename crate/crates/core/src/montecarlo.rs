//! Monte Carlo studies on the truncated scheme: moment estimation, strong
//! error against a fine reference, and a probe of the step-interior
//! interpolation gap.
//!
//! All estimators are deterministic functions of `(EnsembleConfig, inputs)`:
//! path increments come from counter streams keyed by `(seed, path_index)`,
//! per-path values are computed in parallel but folded in path order with
//! balanced pairwise reductions, so the results are byte-identical for any
//! worker count.
//!
//! Standard errors use ten contiguous path batches (batch means): paths are
//! split by index into ten nearly equal groups, and the spread of the group
//! means estimates the error of the overall mean. Individual paths that fail
//! to simulate are skipped, with a hard tolerance of 0.1% of the ensemble;
//! beyond that the estimate is refused rather than silently degraded.

use crate::error::{Error, Result};
use crate::model::{pow_pos, ModelParams};
use crate::rng::{Driver, RngStreamKey};
use crate::scheme::{coarsen, generate_increments, simulate_path, PathGrid};
use crate::summation::{add_assign, pairwise_sum};
use crate::truncation::TruncationConfig;
use rayon::prelude::*;

/// Paths per parallel work unit; fixed so fold order never depends on the
/// worker count.
const CHUNK: usize = 256;
/// Number of contiguous batches behind every reported standard error.
const NUM_BATCHES: usize = 10;

/// Common ensemble description shared by the estimators.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_paths: usize,
    pub seed: u64,
    /// Simulation horizon; every grid must tile it exactly.
    pub t_end: f64,
    /// Moment order `p` used for moments, strong errors and gap probes.
    pub p_moment: f64,
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < NUM_BATCHES {
            return Err(Error::InvalidEnsemble(format!(
                "need at least {NUM_BATCHES} paths for batch-means errors, got {}",
                self.n_paths
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidEnsemble(format!(
                "horizon must be positive and finite, got {}",
                self.t_end
            )));
        }
        if !(self.p_moment >= 1.0 && self.p_moment.is_finite()) {
            return Err(Error::InvalidEnsemble(format!(
                "moment order must be >= 1, got {}",
                self.p_moment
            )));
        }
        Ok(())
    }

    /// Number of steps of size `delta` tiling `t_end`, or an error when the
    /// step does not divide the horizon.
    fn steps_for(&self, delta: f64) -> Result<usize> {
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::InvalidEnsemble(format!(
                "step size must be positive and finite, got {delta}"
            )));
        }
        let n = (self.t_end / delta).round();
        if n < 1.0 || (n * delta - self.t_end).abs() > 1e-9 * self.t_end {
            return Err(Error::InvalidEnsemble(format!(
                "step {delta} does not divide the horizon {}",
                self.t_end
            )));
        }
        Ok(n as usize)
    }
}

/// Contiguous batch index of path `i` out of `n`.
fn batch_of(i: usize, n: usize) -> usize {
    i * NUM_BATCHES / n
}

/// Run `per_path` over all path indices, in parallel chunks of fixed size,
/// and absorb the successes sequentially in path order. Returns the number
/// of failed paths after checking it against the 0.1% tolerance.
pub(crate) fn fold_paths<T, F, G>(n_paths: usize, per_path: F, mut absorb: G) -> Result<usize>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
    G: FnMut(usize, T),
{
    let mut failed = 0usize;
    let mut start = 0usize;
    while start < n_paths {
        let end = (start + CHUNK).min(n_paths);
        let results: Vec<Result<T>> = (start..end)
            .into_par_iter()
            .map(|i| per_path(i as u64))
            .collect();
        for (offset, r) in results.into_iter().enumerate() {
            match r {
                Ok(v) => absorb(start + offset, v),
                Err(_) => failed += 1,
            }
        }
        start = end;
    }
    if failed * 1000 > n_paths {
        return Err(Error::TooManyPathFailures {
            failed,
            total: n_paths,
        });
    }
    Ok(failed)
}

/// Per-batch accumulator: running sums per grid slot plus a path count.
pub(crate) struct BatchSums {
    sums: Vec<Vec<f64>>,
    counts: Vec<usize>,
}

impl BatchSums {
    pub(crate) fn new(slots: usize) -> Self {
        BatchSums {
            sums: vec![vec![0.0; slots]; NUM_BATCHES],
            counts: vec![0; NUM_BATCHES],
        }
    }

    pub(crate) fn absorb(&mut self, path: usize, n_paths: usize, values: &[f64]) {
        let b = batch_of(path, n_paths);
        add_assign(&mut self.sums[b], values);
        self.counts[b] += 1;
    }

    /// Overall mean and batch-means standard error per slot.
    pub(crate) fn mean_and_se(&self) -> (Vec<f64>, Vec<f64>) {
        let slots = self.sums[0].len();
        let total_paths: usize = self.counts.iter().sum();
        let mut mean = Vec::with_capacity(slots);
        let mut se = Vec::with_capacity(slots);
        for t in 0..slots {
            let batch_totals: Vec<f64> = self.sums.iter().map(|s| s[t]).collect();
            mean.push(pairwise_sum(&batch_totals) / total_paths as f64);
            let batch_means: Vec<f64> = batch_totals
                .iter()
                .zip(&self.counts)
                .map(|(s, &c)| s / c as f64)
                .collect();
            let mb = pairwise_sum(&batch_means) / NUM_BATCHES as f64;
            let sq: Vec<f64> = batch_means.iter().map(|m| (m - mb) * (m - mb)).collect();
            let var_bm = pairwise_sum(&sq) / (NUM_BATCHES - 1) as f64;
            se.push((var_bm / NUM_BATCHES as f64).sqrt());
        }
        (mean, se)
    }
}

/// Empirical `p`-th absolute moments of both components on the full grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub times: Vec<f64>,
    pub moment_x: Vec<f64>,
    pub se_x: Vec<f64>,
    pub moment_y: Vec<f64>,
    pub se_y: Vec<f64>,
    /// Largest grid moment — the quantity the uniform moment bounds control.
    pub sup_moment_x: f64,
    pub sup_moment_y: f64,
    pub p_moment: f64,
    pub n_paths: usize,
    pub n_paths_failed: usize,
}

/// Estimate `E|X_t|^p` and `E|Y_t|^p` on the grid of step `delta`.
pub fn estimate_moments(
    ens: &EnsembleConfig,
    delta: f64,
    p: &ModelParams,
    cfg: &TruncationConfig,
) -> Result<MomentReport> {
    ens.validate()?;
    let n_steps = ens.steps_for(delta)?;
    if (cfg.delta - delta).abs() > 1e-9 * delta {
        return Err(Error::InvalidTruncation(format!(
            "truncation built for step {} but the study runs at {delta}",
            cfg.delta
        )));
    }
    let pm = ens.p_moment;
    let mut acc_x = BatchSums::new(n_steps + 1);
    let mut acc_y = BatchSums::new(n_steps + 1);
    let n_paths = ens.n_paths;
    let per_path = |i: u64| -> Result<(Vec<f64>, Vec<f64>)> {
        let grid = PathGrid::generate(ens.seed, i, ens.t_end, n_steps);
        let traj = simulate_path(&grid, cfg, p)?;
        let px = traj.x.iter().map(|&v| pow_pos(v.abs(), pm)).collect();
        let py = traj.y.iter().map(|&v| pow_pos(v.abs(), pm)).collect();
        Ok((px, py))
    };
    let failed = fold_paths(n_paths, per_path, |i, (px, py): (Vec<f64>, Vec<f64>)| {
        acc_x.absorb(i, n_paths, &px);
        acc_y.absorb(i, n_paths, &py);
    })?;

    let (moment_x, se_x) = acc_x.mean_and_se();
    let (moment_y, se_y) = acc_y.mean_and_se();
    let sup_moment_x = moment_x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sup_moment_y = moment_y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let times = (0..=n_steps).map(|k| k as f64 * delta).collect();
    Ok(MomentReport {
        times,
        moment_x,
        se_x,
        moment_y,
        se_y,
        sup_moment_x,
        sup_moment_y,
        p_moment: pm,
        n_paths,
        n_paths_failed: failed,
    })
}

/// Strong error of the scheme at several steps against a fine reference run
/// of the same scheme, driven by the same Brownian paths.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongErrorReport {
    pub deltas: Vec<f64>,
    /// Rooted errors `(E sup_k |X^delta_k - X^ref_k|^p)^{1/p}` over shared
    /// grid points.
    pub errors: Vec<f64>,
    pub stderrs: Vec<f64>,
    /// Least-squares slope of `ln error` against `ln delta`; `None` when
    /// fewer than two errors are positive.
    pub fitted_order: Option<f64>,
    pub delta_ref: f64,
    pub p_moment: f64,
    pub n_paths: usize,
    pub n_paths_failed: usize,
}

/// For each step in `deltas`, simulate with increments block-summed from one
/// shared fine stream at `delta_ref` and measure the pathwise sup distance
/// to the reference run. `trunc` builds the step-dependent truncation.
pub fn estimate_strong_error<F>(
    ens: &EnsembleConfig,
    p: &ModelParams,
    deltas: &[f64],
    delta_ref: f64,
    trunc: F,
) -> Result<StrongErrorReport>
where
    F: Fn(f64) -> Result<TruncationConfig> + Sync,
{
    ens.validate()?;
    if deltas.is_empty() {
        return Err(Error::InvalidEnsemble("no step sizes requested".into()));
    }
    let n_ref = ens.steps_for(delta_ref)?;
    let mut factors = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let f = (d / delta_ref).round();
        if f < 1.0 || (f * delta_ref - d).abs() > 1e-9 * d {
            return Err(Error::InvalidEnsemble(format!(
                "step {d} is not an integer multiple of the reference step {delta_ref}"
            )));
        }
        let f = f as usize;
        if n_ref % f != 0 {
            return Err(Error::InvalidEnsemble(format!(
                "coarse grid of step {d} does not share its points with the reference grid"
            )));
        }
        factors.push(f);
    }
    let cfg_ref = trunc(delta_ref)?;
    let cfgs: Vec<TruncationConfig> = deltas.iter().map(|&d| trunc(d)).collect::<Result<_>>()?;
    let pm = ens.p_moment;
    let n_paths = ens.n_paths;

    let per_path = |i: u64| -> Result<Vec<f64>> {
        let grid = PathGrid::generate(ens.seed, i, ens.t_end, n_ref);
        let reference = simulate_path(&grid, &cfg_ref, p)?;
        let mut sups = Vec::with_capacity(deltas.len());
        for (f, cfg) in factors.iter().zip(&cfgs) {
            let coarse_grid = grid.coarsen(*f)?;
            let coarse = simulate_path(&coarse_grid, cfg, p)?;
            let mut sup = 0.0f64;
            for (k, xc) in coarse.x.iter().enumerate() {
                sup = sup.max((xc - reference.x[k * f]).abs());
            }
            sups.push(pow_pos(sup, pm));
        }
        Ok(sups)
    };

    let mut acc = BatchSums::new(deltas.len());
    let failed = fold_paths(n_paths, per_path, |i, sups: Vec<f64>| {
        acc.absorb(i, n_paths, &sups);
    })?;
    let (raw_moments, raw_se) = acc.mean_and_se();

    let inv_p = 1.0 / pm;
    let mut errors = Vec::with_capacity(deltas.len());
    let mut stderrs = Vec::with_capacity(deltas.len());
    for (m, s) in raw_moments.iter().zip(&raw_se) {
        if *m > 0.0 {
            let e = m.powf(inv_p);
            errors.push(e);
            // delta method: d(m^{1/p})/dm = m^{1/p - 1} / p
            stderrs.push(s * m.powf(inv_p - 1.0) / pm);
        } else {
            errors.push(0.0);
            stderrs.push(0.0);
        }
    }

    let fitted_order = fit_log_slope(deltas, &errors);
    Ok(StrongErrorReport {
        deltas: deltas.to_vec(),
        errors,
        stderrs,
        fitted_order,
        delta_ref,
        p_moment: pm,
        n_paths,
        n_paths_failed: failed,
    })
}

/// Least-squares slope of `ln y` on `ln x` over the points with `y > 0`.
fn fit_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(_, &y)| y > 0.0)
        .map(|(&x, &y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    Some(sxy / sxx)
}

/// Moments of the gap between the step-interior interpolant and the last
/// grid point, measured mid-step.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationGapReport {
    pub deltas: Vec<f64>,
    /// `max_k E|gap at the midpoint of step k|^p` for each step size.
    pub gap_moments: Vec<f64>,
    /// `gap_moment / (delta^{p/2} h(delta)^p)` — the theory predicts these
    /// stay bounded as the step shrinks.
    pub ratios: Vec<f64>,
    /// True when no ratio exceeds three times the coarsest-step ratio.
    pub bounded: bool,
    pub p_moment: f64,
    pub n_paths: usize,
}

/// Probe `sup_t E|interpolant(t) - last grid value|^p` at step midpoints.
///
/// The continuous interpolant adds `f1_D(X_k)(t - t_k)` and the Brownian
/// increment over `[t_k, t]` scaled by the frozen diffusion; sampling the
/// driver at half-step resolution and block-summing pairs gives both the
/// mid-step increment and the full-step increment of the same path.
pub fn interpolation_gap_probe<F>(
    ens: &EnsembleConfig,
    p: &ModelParams,
    deltas: &[f64],
    trunc: F,
) -> Result<InterpolationGapReport>
where
    F: Fn(f64) -> Result<TruncationConfig> + Sync,
{
    ens.validate()?;
    if deltas.is_empty() {
        return Err(Error::InvalidEnsemble("no step sizes requested".into()));
    }
    let pm = ens.p_moment;
    let n_paths = ens.n_paths;
    let mut gap_moments = Vec::with_capacity(deltas.len());
    let mut ratios = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let n_steps = ens.steps_for(delta)?;
        let cfg = trunc(delta)?;
        let half = delta / 2.0;

        let per_path = |i: u64| -> Result<Vec<f64>> {
            let key = |driver| RngStreamKey {
                seed: ens.seed,
                path_index: i,
                driver,
            };
            let fine1 = generate_increments(key(Driver::B1), 2 * n_steps, half);
            let fine2 = generate_increments(key(Driver::B2), 2 * n_steps, half);
            let grid = PathGrid::from_increments(
                ens.t_end,
                delta,
                coarsen(&fine1, 2)?,
                coarsen(&fine2, 2)?,
            )?;
            let traj = simulate_path(&grid, &cfg, p)?;
            let gaps = (0..n_steps)
                .map(|k| {
                    let x = traj.x[k];
                    let y = traj.y[k];
                    let gap = cfg.trunc_drift_asset(p, x) * half
                        + y.abs().sqrt() * cfg.trunc_diffusion_asset(p, x) * fine1[2 * k];
                    pow_pos(gap.abs(), pm)
                })
                .collect();
            Ok(gaps)
        };

        let mut acc = BatchSums::new(n_steps);
        fold_paths(n_paths, per_path, |i, gaps: Vec<f64>| {
            acc.absorb(i, n_paths, &gaps);
        })?;
        let (means, _) = acc.mean_and_se();
        let worst = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        gap_moments.push(worst);
        ratios.push(worst / (pow_pos(delta, pm / 2.0) * pow_pos(cfg.h_delta, pm)));
    }
    let bounded = ratios.iter().all(|&r| r <= 3.0 * ratios[0]);
    Ok(InterpolationGapReport {
        deltas: deltas.to_vec(),
        gap_moments,
        ratios,
        bounded,
        p_moment: pm,
        n_paths,
    })
}
