//! Flat `key = value` experiment configs and the run manifest.
//!
//! One format only: dotted-section keys, full-line `#` comments, blank lines
//! ignored. Keys under `resolved.` are manifest metadata and are skipped on
//! parse, which is what makes a written manifest directly usable as a config.
//! Duplicate, unknown and out-of-place keys are hard errors, so a config
//! never silently carries dead settings.

use std::collections::BTreeMap;

use truncem_core::report::format_float;
use truncem_core::{ModelParams, ValidationMode};

/// Failure classes mapped onto process exit codes.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Filesystem trouble reading input or writing artifacts (exit 1).
    Io(String),
    /// Unreadable or malformed config (exit 2).
    Config(String),
    /// Well-formed config rejected by validation (exit 3).
    Validation(String),
    /// The simulation itself failed (exit 4).
    Simulation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Validation(_) => 3,
            CliError::Simulation(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Config(_) => "config",
            CliError::Validation(_) => "validation",
            CliError::Simulation(_) => "simulation",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Config(m) | CliError::Validation(m) | CliError::Simulation(m) => m,
        }
    }
}

/// Core errors split by phase: path-level failures are simulation errors,
/// everything else is a rejected configuration.
pub fn from_core(err: truncem_core::Error) -> CliError {
    use truncem_core::Error as E;
    match &err {
        E::Simulation { .. } | E::TooManyPathFailures { .. } | E::NonFinite { .. } => {
            CliError::Simulation(err.to_string())
        }
        _ => CliError::Validation(err.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Experiment {
    Simulate,
    Moments,
    Converge,
    Price,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Moments => "moments",
            Experiment::Converge => "converge",
            Experiment::Price => "price",
        }
    }

    fn from_name(s: &str) -> Option<Self> {
        match s {
            "simulate" => Some(Experiment::Simulate),
            "moments" => Some(Experiment::Moments),
            "converge" => Some(Experiment::Converge),
            "price" => Some(Experiment::Price),
            _ => None,
        }
    }
}

pub fn mode_name(mode: ValidationMode) -> &'static str {
    match mode {
        ValidationMode::Strict => "strict",
        ValidationMode::Boundary => "boundary",
        ValidationMode::Oracle => "oracle",
    }
}

fn mode_from(s: &str) -> Option<ValidationMode> {
    match s {
        "strict" => Some(ValidationMode::Strict),
        "boundary" => Some(ValidationMode::Boundary),
        "oracle" => Some(ValidationMode::Oracle),
        _ => None,
    }
}

/// `grid.*` block: single-path simulation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridBlock {
    pub t_end: f64,
    pub delta: f64,
}

/// `ensemble.*` block: Monte Carlo sizes and step sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleBlock {
    pub n_paths: usize,
    pub t_end: f64,
    pub p_moment: f64,
    pub delta_list: Vec<f64>,
    pub delta_ref: Option<f64>,
}

/// `option.*` block: up-and-out call contract.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionBlock {
    pub strike: f64,
    pub barrier: f64,
    pub expiry: f64,
    pub discount_rate: f64,
}

/// Fully parsed experiment description. Exactly one experiment block is
/// populated, matching the `experiment` key.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output_dir: String,
    pub model: ModelParams,
    pub validation: ValidationMode,
    pub h_exponent: f64,
    pub paper_compat: bool,
    pub grid: Option<GridBlock>,
    pub ensemble: Option<EnsembleBlock>,
    pub option: Option<OptionBlock>,
}

/// Ordered key store with take-semantics: every getter removes its key, so
/// whatever is left at the end is by definition unknown or out of place.
struct Fields(BTreeMap<String, String>);

impl Fields {
    fn take_opt(&mut self, key: &str) -> Option<String> {
        self.0.remove(key)
    }

    fn take(&mut self, key: &str) -> Result<String, CliError> {
        self.take_opt(key)
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    fn take_f64(&mut self, key: &str) -> Result<f64, CliError> {
        parse_f64(&self.take(key)?, key)
    }

    fn take_f64_or(&mut self, key: &str, default: f64) -> Result<f64, CliError> {
        match self.take_opt(key) {
            Some(v) => parse_f64(&v, key),
            None => Ok(default),
        }
    }

    fn take_u64(&mut self, key: &str) -> Result<u64, CliError> {
        let v = self.take(key)?;
        v.parse::<u64>()
            .map_err(|_| CliError::Config(format!("`{key}` must be an unsigned integer, got {v:?}")))
    }

    fn take_usize(&mut self, key: &str) -> Result<usize, CliError> {
        let v = self.take(key)?;
        v.parse::<usize>()
            .map_err(|_| CliError::Config(format!("`{key}` must be an unsigned integer, got {v:?}")))
    }

    fn take_bool_or(&mut self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.take_opt(key).as_deref() {
            None => Ok(default),
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            Some(v) => Err(CliError::Config(format!(
                "`{key}` must be `true` or `false`, got {v:?}"
            ))),
        }
    }

    fn take_f64_list(&mut self, key: &str) -> Result<Vec<f64>, CliError> {
        let raw = self.take(key)?;
        let mut out = Vec::new();
        for piece in raw.split(',') {
            out.push(parse_f64(piece.trim(), key)?);
        }
        Ok(out)
    }
}

fn parse_f64(s: &str, key: &str) -> Result<f64, CliError> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(CliError::Config(format!(
            "`{key}` must be a finite number, got {s:?}"
        ))),
    }
}

/// Splits config text into a key/value map. Syntax errors, duplicates and
/// empty keys are rejected here; key semantics are handled by [`build`].
fn tokenize(text: &str) -> Result<BTreeMap<String, String>, CliError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(CliError::Config(format!(
                "line {}: expected `key = value`, got {line:?}",
                idx + 1
            )));
        };
        let key = k.trim();
        if key.is_empty() {
            return Err(CliError::Config(format!("line {}: empty key", idx + 1)));
        }
        // Manifest metadata: recomputed values recorded for the reader, never
        // an input. Skipping them keeps manifests valid as configs.
        if key.starts_with("resolved.") {
            continue;
        }
        if map.insert(key.to_string(), v.trim().to_string()).is_some() {
            return Err(CliError::Config(format!("duplicate key `{key}`")));
        }
    }
    Ok(map)
}

pub fn parse_config(text: &str) -> Result<RunConfig, CliError> {
    build(Fields(tokenize(text)?))
}

fn build(mut f: Fields) -> Result<RunConfig, CliError> {
    let experiment_raw = f.take("experiment")?;
    let experiment = Experiment::from_name(&experiment_raw).ok_or_else(|| {
        CliError::Config(format!(
            "unknown experiment {experiment_raw:?} (expected simulate, moments, converge or price)"
        ))
    })?;
    let seed = f.take_u64("seed")?;
    let output_dir = f.take("output_dir")?;
    if output_dir.is_empty() {
        return Err(CliError::Config("`output_dir` must not be empty".into()));
    }

    let model = ModelParams {
        alpha1: f.take_f64("model.alpha1")?,
        mu1: f.take_f64("model.mu1")?,
        sigma1: f.take_f64("model.sigma1")?,
        rho: f.take_f64("model.rho")?,
        theta: f.take_f64("model.theta")?,
        alpha2: f.take_f64("model.alpha2")?,
        mu2: f.take_f64("model.mu2")?,
        sigma2: f.take_f64("model.sigma2")?,
        r: f.take_f64("model.r_exp")?,
        phi: f.take_f64("model.phi_exp")?,
        x0: f.take_f64("model.x0")?,
        phi0: f.take_f64("model.phi0")?,
    };
    let validation = match f.take_opt("model.validation") {
        None => ValidationMode::Strict,
        Some(v) => mode_from(&v).ok_or_else(|| {
            CliError::Config(format!(
                "`model.validation` must be strict, boundary or oracle, got {v:?}"
            ))
        })?,
    };

    let h_exponent = f.take_f64("truncation.h_exponent")?;
    let paper_compat = f.take_bool_or("truncation.paper_compat", false)?;

    let mut grid = None;
    let mut ensemble = None;
    let mut option = None;
    match experiment {
        Experiment::Simulate => {
            grid = Some(GridBlock {
                t_end: f.take_f64("grid.t_end")?,
                delta: f.take_f64("grid.delta")?,
            });
        }
        Experiment::Moments => {
            ensemble = Some(EnsembleBlock {
                n_paths: f.take_usize("ensemble.n_paths")?,
                t_end: f.take_f64("ensemble.t_end")?,
                p_moment: f.take_f64("ensemble.p_moment")?,
                delta_list: f.take_f64_list("ensemble.delta_list")?,
                delta_ref: None,
            });
        }
        Experiment::Converge => {
            ensemble = Some(EnsembleBlock {
                n_paths: f.take_usize("ensemble.n_paths")?,
                t_end: f.take_f64("ensemble.t_end")?,
                p_moment: f.take_f64("ensemble.p_moment")?,
                delta_list: f.take_f64_list("ensemble.delta_list")?,
                delta_ref: Some(f.take_f64("ensemble.delta_ref")?),
            });
        }
        Experiment::Price => {
            ensemble = Some(EnsembleBlock {
                n_paths: f.take_usize("ensemble.n_paths")?,
                t_end: f64::NAN, // fixed to option.expiry below
                p_moment: 2.0,
                delta_list: f.take_f64_list("ensemble.delta_list")?,
                delta_ref: None,
            });
            let block = OptionBlock {
                strike: f.take_f64("option.strike")?,
                barrier: f.take_f64("option.barrier")?,
                expiry: f.take_f64("option.expiry")?,
                discount_rate: f.take_f64_or("option.discount_rate", 0.0)?,
            };
            if let Some(e) = ensemble.as_mut() {
                e.t_end = block.expiry;
            }
            option = Some(block);
        }
    }

    if !f.0.is_empty() {
        let keys: Vec<&str> = f.0.keys().map(String::as_str).collect();
        return Err(CliError::Config(format!(
            "unknown or out-of-place key(s) for experiment `{}`: {}",
            experiment.name(),
            keys.join(", ")
        )));
    }

    Ok(RunConfig {
        experiment,
        seed,
        output_dir,
        model,
        validation,
        h_exponent,
        paper_compat,
        grid,
        ensemble,
        option,
    })
}

/// Values recomputed while setting the run up, recorded in the manifest for
/// the reader. Vectors are aligned with the step-size list of the run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Resolved {
    pub h_exponent_effective: f64,
    pub nu_c: f64,
    pub nu_q: f64,
    pub delta_star: f64,
    pub h_delta: Vec<f64>,
    pub cap: Vec<f64>,
    pub n_steps: Vec<usize>,
    pub h_delta_ref: Option<f64>,
    pub cap_ref: Option<f64>,
    pub n_steps_ref: Option<usize>,
    pub boundary_cases: Vec<String>,
    pub warnings: Vec<String>,
}

fn join_floats(values: &[f64]) -> String {
    values.iter().map(|v| format_float(*v)).collect::<Vec<_>>().join(",")
}

/// Renders the canonical manifest: every config key (normalised) plus the
/// `resolved.*` record, sorted by key. Parsing the manifest as a config and
/// re-rendering it reproduces the same bytes.
pub fn render_manifest(cfg: &RunConfig, resolved: &Resolved) -> String {
    let mut keys: BTreeMap<String, String> = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        keys.insert(k.to_string(), v);
    };

    put("experiment", cfg.experiment.name().to_string());
    put("seed", cfg.seed.to_string());
    put("output_dir", cfg.output_dir.clone());

    put("model.alpha1", format_float(cfg.model.alpha1));
    put("model.mu1", format_float(cfg.model.mu1));
    put("model.sigma1", format_float(cfg.model.sigma1));
    put("model.rho", format_float(cfg.model.rho));
    put("model.theta", format_float(cfg.model.theta));
    put("model.alpha2", format_float(cfg.model.alpha2));
    put("model.mu2", format_float(cfg.model.mu2));
    put("model.sigma2", format_float(cfg.model.sigma2));
    put("model.r_exp", format_float(cfg.model.r));
    put("model.phi_exp", format_float(cfg.model.phi));
    put("model.x0", format_float(cfg.model.x0));
    put("model.phi0", format_float(cfg.model.phi0));
    put("model.validation", mode_name(cfg.validation).to_string());

    put("truncation.h_exponent", format_float(cfg.h_exponent));
    put("truncation.paper_compat", cfg.paper_compat.to_string());

    if let Some(grid) = &cfg.grid {
        put("grid.t_end", format_float(grid.t_end));
        put("grid.delta", format_float(grid.delta));
    }
    if let Some(ens) = &cfg.ensemble {
        put("ensemble.n_paths", ens.n_paths.to_string());
        put("ensemble.delta_list", join_floats(&ens.delta_list));
        if let Some(delta_ref) = ens.delta_ref {
            put("ensemble.delta_ref", format_float(delta_ref));
        }
        // For price runs the horizon and moment order are implied, not keys.
        if cfg.experiment != Experiment::Price {
            put("ensemble.t_end", format_float(ens.t_end));
            put("ensemble.p_moment", format_float(ens.p_moment));
        }
    }
    if let Some(opt) = &cfg.option {
        put("option.strike", format_float(opt.strike));
        put("option.barrier", format_float(opt.barrier));
        put("option.expiry", format_float(opt.expiry));
        put("option.discount_rate", format_float(opt.discount_rate));
    }

    put("resolved.h_exponent_effective", format_float(resolved.h_exponent_effective));
    put("resolved.nu_c", format_float(resolved.nu_c));
    put("resolved.nu_q", format_float(resolved.nu_q));
    put("resolved.delta_star", format_float(resolved.delta_star));
    put("resolved.h_delta", join_floats(&resolved.h_delta));
    put("resolved.cap", join_floats(&resolved.cap));
    put(
        "resolved.n_steps",
        resolved.n_steps.iter().map(usize::to_string).collect::<Vec<_>>().join(","),
    );
    if let Some(v) = resolved.h_delta_ref {
        put("resolved.h_delta_ref", format_float(v));
    }
    if let Some(v) = resolved.cap_ref {
        put("resolved.cap_ref", format_float(v));
    }
    if let Some(v) = resolved.n_steps_ref {
        put("resolved.n_steps_ref", v.to_string());
    }
    if !resolved.boundary_cases.is_empty() {
        put("resolved.boundary_cases", resolved.boundary_cases.join(","));
    }
    if !resolved.warnings.is_empty() {
        put("resolved.warnings", resolved.warnings.join(","));
    }

    let mut out = String::from("# run manifest; usable directly as a --config input\n");
    for (k, v) in &keys {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(v);
        out.push('\n');
    }
    out
}
