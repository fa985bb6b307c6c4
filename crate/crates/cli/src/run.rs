//! Experiment execution: a parsed [`RunConfig`] in, named artifacts out.
//!
//! Everything here is pure computation — no filesystem access — so a failed
//! run can never leave partial outputs behind. The caller writes the
//! returned `(filename, contents)` pairs only after the whole run succeeded.

use serde::Serialize;

use truncem_core::montecarlo::{estimate_moments, estimate_strong_error};
use truncem_core::pricing::{price, BarrierOptionSpec};
use truncem_core::scheme::simulate_path;
use truncem_core::truncation::build_nu;
use truncem_core::{
    model, report, EnsembleConfig, PathGrid, TruncationConfig, TruncationWarning,
};

use crate::config::{from_core, CliError, Experiment, Resolved, RunConfig};

/// Grid resolution for the dominating-function search; runs in microseconds
/// and is deterministic, so one generous setting fits every experiment.
const NU_GRID_SAMPLES: usize = 10_000;

/// The structured summary: fitted order (when the experiment produces one)
/// plus a config echo.
#[derive(Serialize)]
struct Summary {
    fitted_order: Option<f64>,
    p_moment: Option<f64>,
    n_paths: Option<usize>,
    seed: u64,
}

fn summary_json(s: &Summary) -> String {
    let mut text = serde_json::to_string_pretty(s).expect("summary serialises");
    text.push('\n');
    text
}

fn warning_kind(w: &TruncationWarning) -> &'static str {
    match w {
        TruncationWarning::StepBoundViolated { .. } => "step_bound_violated",
        TruncationWarning::DeltaAboveStar { .. } => "delta_above_star",
    }
}

/// Number of steps of size `delta` tiling `t_end` exactly.
fn steps_for(t_end: f64, delta: f64) -> Result<usize, CliError> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(CliError::Validation(format!(
            "step size must be positive and finite, got {delta}"
        )));
    }
    let n = (t_end / delta).round();
    if n < 1.0 || (n * delta - t_end).abs() > 1e-9 * t_end.abs() {
        return Err(CliError::Validation(format!(
            "step size {delta} does not divide the horizon {t_end}"
        )));
    }
    Ok(n as usize)
}

/// Executes the configured experiment and returns the artifacts to write.
pub fn execute(cfg: &RunConfig) -> Result<Vec<(String, String)>, CliError> {
    // Validate the model up front; violations are hard failures, boundary
    // cases are recorded in the manifest.
    let assumptions = model::validate(&cfg.model, cfg.validation);
    if !assumptions.violations.is_empty() {
        return Err(CliError::Validation(format!(
            "model assumptions fail in {} mode: {}",
            crate::config::mode_name(cfg.validation),
            assumptions.violations.join(", ")
        )));
    }

    let nu = build_nu(&cfg.model, NU_GRID_SAMPLES).map_err(from_core)?;

    let build_trunc = |delta: f64| -> truncem_core::Result<TruncationConfig> {
        if cfg.paper_compat {
            TruncationConfig::paper_compat(nu.clone(), delta)
        } else {
            TruncationConfig::new(nu.clone(), cfg.h_exponent, delta)
        }
    };

    let mut resolved = Resolved {
        nu_c: nu.c,
        nu_q: nu.q,
        boundary_cases: assumptions.boundary_cases.clone(),
        ..Resolved::default()
    };

    let record = |resolved: &mut Resolved, tc: &TruncationConfig| {
        resolved.h_exponent_effective = tc.h_exponent;
        resolved.delta_star = tc.delta_star;
        resolved.h_delta.push(tc.h_delta);
        resolved.cap.push(tc.cap);
        for w in &tc.warnings {
            let kind = warning_kind(w).to_string();
            if !resolved.warnings.contains(&kind) {
                resolved.warnings.push(kind);
            }
        }
    };

    let mut artifacts: Vec<(String, String)> = Vec::new();
    let summary;

    match cfg.experiment {
        Experiment::Simulate => {
            let grid_cfg = cfg.grid.as_ref().expect("simulate config carries a grid");
            let n_steps = steps_for(grid_cfg.t_end, grid_cfg.delta)?;
            let tc = build_trunc(grid_cfg.delta).map_err(from_core)?;
            record(&mut resolved, &tc);
            resolved.n_steps.push(n_steps);

            let grid = PathGrid::generate(cfg.seed, 0, grid_cfg.t_end, n_steps);
            let traj = simulate_path(&grid, &tc, &cfg.model).map_err(from_core)?;
            artifacts.push(("trajectory.csv".into(), report::render_trajectory_csv(&traj)));
            summary = Summary {
                fitted_order: None,
                p_moment: None,
                n_paths: None,
                seed: cfg.seed,
            };
        }
        Experiment::Moments => {
            let ens_cfg = cfg.ensemble.as_ref().expect("moments config carries an ensemble");
            if ens_cfg.delta_list.len() != 1 {
                return Err(CliError::Validation(format!(
                    "a moments run uses a single step size; delta_list has {} entries",
                    ens_cfg.delta_list.len()
                )));
            }
            let delta = ens_cfg.delta_list[0];
            let n_steps = steps_for(ens_cfg.t_end, delta)?;
            let tc = build_trunc(delta).map_err(from_core)?;
            record(&mut resolved, &tc);
            resolved.n_steps.push(n_steps);

            let ens = EnsembleConfig {
                n_paths: ens_cfg.n_paths,
                seed: cfg.seed,
                t_end: ens_cfg.t_end,
                p_moment: ens_cfg.p_moment,
            };
            let rep = estimate_moments(&ens, delta, &cfg.model, &tc).map_err(from_core)?;
            artifacts.push(("moments.csv".into(), report::render_moments_csv(&rep)));
            summary = Summary {
                fitted_order: None,
                p_moment: Some(ens_cfg.p_moment),
                n_paths: Some(ens_cfg.n_paths),
                seed: cfg.seed,
            };
        }
        Experiment::Converge => {
            let ens_cfg = cfg.ensemble.as_ref().expect("converge config carries an ensemble");
            let delta_ref = ens_cfg.delta_ref.expect("converge config carries delta_ref");
            for &d in &ens_cfg.delta_list {
                let tc = build_trunc(d).map_err(from_core)?;
                record(&mut resolved, &tc);
                resolved.n_steps.push(steps_for(ens_cfg.t_end, d)?);
            }
            let tc_ref = build_trunc(delta_ref).map_err(from_core)?;
            resolved.h_delta_ref = Some(tc_ref.h_delta);
            resolved.cap_ref = Some(tc_ref.cap);
            resolved.n_steps_ref = Some(steps_for(ens_cfg.t_end, delta_ref)?);
            for w in &tc_ref.warnings {
                let kind = warning_kind(w).to_string();
                if !resolved.warnings.contains(&kind) {
                    resolved.warnings.push(kind);
                }
            }

            let ens = EnsembleConfig {
                n_paths: ens_cfg.n_paths,
                seed: cfg.seed,
                t_end: ens_cfg.t_end,
                p_moment: ens_cfg.p_moment,
            };
            let rep =
                estimate_strong_error(&ens, &cfg.model, &ens_cfg.delta_list, delta_ref, build_trunc)
                    .map_err(from_core)?;
            artifacts.push(("strong_error.csv".into(), report::render_strong_error_csv(&rep)));
            summary = Summary {
                fitted_order: rep.fitted_order,
                p_moment: Some(ens_cfg.p_moment),
                n_paths: Some(ens_cfg.n_paths),
                seed: cfg.seed,
            };
        }
        Experiment::Price => {
            let ens_cfg = cfg.ensemble.as_ref().expect("price config carries an ensemble");
            let opt = cfg.option.as_ref().expect("price config carries an option block");
            if ens_cfg.delta_list.len() != 1 {
                return Err(CliError::Validation(format!(
                    "a price run uses a single step size; delta_list has {} entries",
                    ens_cfg.delta_list.len()
                )));
            }
            let delta = ens_cfg.delta_list[0];
            let n_steps = steps_for(opt.expiry, delta)?;
            let tc = build_trunc(delta).map_err(from_core)?;
            record(&mut resolved, &tc);
            resolved.n_steps.push(n_steps);

            let spec = BarrierOptionSpec {
                strike: opt.strike,
                barrier: opt.barrier,
                expiry: opt.expiry,
                discount_rate: opt.discount_rate,
            };
            let rep =
                price(&spec, ens_cfg.n_paths, cfg.seed, &cfg.model, &tc).map_err(from_core)?;
            artifacts.push(("price.csv".into(), report::render_price_csv(&rep)));
            summary = Summary {
                fitted_order: None,
                p_moment: None,
                n_paths: Some(ens_cfg.n_paths),
                seed: cfg.seed,
            };
        }
    }

    artifacts.push(("summary.json".into(), summary_json(&summary)));
    artifacts.push(("manifest.cfg".into(), crate::config::render_manifest(cfg, &resolved)));
    Ok(artifacts)
}
