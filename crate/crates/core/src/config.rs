//! Experiment configuration files.
//!
//! A config is a TOML table whose `kind` key selects the experiment:
//!
//! ```toml
//! kind = "rmse_table"          # rmse_table | magnitude_sweep | pt_sweep | spectrum_check
//! n = 40
//! eta = 0.9
//! beta_list = [0.05, 0.1, 0.15, 0.2]
//! trials = 50
//! mode = "worst_case_symmetric"
//! tail_profile = "flat"
//! sigma_ratio = 50.0
//! sigma_eps = 1.0
//! seed = 1
//!
//! [solver]
//! max_iters = 20000
//! rel_tol = 1e-9
//! step = 1.0
//! ```
//!
//! `magnitude_sweep` takes `beta` and `ratios` instead of `beta_list` and
//! `sigma_ratio`; `pt_sweep` takes `beta_grid`, `eta_grid` and
//! `success_threshold` instead of `beta_list` and `eta`; `spectrum_check`
//! takes only `n`, `beta`, `eta`, `bins` and `seed`. Unknown keys are errors.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::harness::{self, ExperimentConfig, DEFAULT_SUCCESS_THRESHOLD, DEFAULT_TRIALS};
use crate::model::{FactorMode, TailProfile};
use crate::solver::SolverConfig;

pub const DEFAULT_BINS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RunSpec {
    RmseTable {
        experiment: ExperimentConfig,
    },
    MagnitudeSweep {
        experiment: ExperimentConfig,
        ratios: Vec<f64>,
    },
    PtSweep {
        experiment: ExperimentConfig,
        beta_grid: Vec<f64>,
        eta_grid: Vec<f64>,
        success_threshold: f64,
    },
    SpectrumCheck {
        n: usize,
        beta: f64,
        eta: f64,
        bins: usize,
        seed: u64,
    },
}

impl RunSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            RunSpec::RmseTable { .. } => "rmse_table",
            RunSpec::MagnitudeSweep { .. } => "magnitude_sweep",
            RunSpec::PtSweep { .. } => "pt_sweep",
            RunSpec::SpectrumCheck { .. } => "spectrum_check",
        }
    }

    pub fn master_seed(&self) -> u64 {
        match self {
            RunSpec::RmseTable { experiment }
            | RunSpec::MagnitudeSweep { experiment, .. }
            | RunSpec::PtSweep { experiment, .. } => experiment.master_seed,
            RunSpec::SpectrumCheck { seed, .. } => *seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            RunSpec::RmseTable { experiment }
            | RunSpec::MagnitudeSweep { experiment, .. }
            | RunSpec::PtSweep { experiment, .. } => experiment.master_seed = seed,
            RunSpec::SpectrumCheck { seed: s, .. } => *s = seed,
        }
    }

    /// Overrides the trial count; spectrum checks are single-draw and reject it.
    pub fn set_trials(&mut self, trials: usize) -> Result<()> {
        match self {
            RunSpec::RmseTable { experiment }
            | RunSpec::MagnitudeSweep { experiment, .. }
            | RunSpec::PtSweep { experiment, .. } => {
                experiment.trials = trials;
                Ok(())
            }
            RunSpec::SpectrumCheck { .. } => Err(Error::InvalidArgument(
                "--trials does not apply to spectrum_check".into(),
            )),
        }
    }

    /// Semantic checks shared by TOML and manifest inputs.
    pub fn violations(&self) -> Vec<String> {
        match self {
            RunSpec::RmseTable { experiment } => experiment.violations(),
            RunSpec::MagnitudeSweep { experiment, ratios } => {
                let mut errs = experiment.violations();
                if experiment.beta_list.len() != 1 {
                    errs.push("magnitude_sweep needs exactly one beta".into());
                }
                if ratios.is_empty() {
                    errs.push("ratios must not be empty".into());
                }
                errs.extend(ratios.iter().filter(|r| !(**r > 0.0 && r.is_finite())).map(|r| format!("ratio {r} must be positive")));
                errs
            }
            RunSpec::PtSweep {
                experiment,
                beta_grid,
                eta_grid,
                success_threshold,
            } => {
                let mut errs = Vec::new();
                if eta_grid.is_empty() {
                    errs.push("eta_grid must not be empty".into());
                }
                let etas: Vec<f64> = if eta_grid.is_empty() { vec![experiment.eta] } else { eta_grid.clone() };
                for eta in etas {
                    let probe = ExperimentConfig {
                        eta,
                        beta_list: beta_grid.clone(),
                        ..experiment.clone()
                    };
                    for e in probe.violations() {
                        let e = e.replace("beta_list", "beta_grid");
                        if !errs.contains(&e) {
                            errs.push(e);
                        }
                    }
                }
                if !(*success_threshold > 0.0) {
                    errs.push(format!("success_threshold must be positive, got {success_threshold}"));
                }
                errs
            }
            RunSpec::SpectrumCheck { n, beta, eta, bins, .. } => {
                let mut errs = Vec::new();
                if *n < 500 {
                    errs.push(format!("n must be at least 500 for spectrum_check, got {n}"));
                }
                if *bins < 1 {
                    errs.push("bins must be at least 1".into());
                }
                for (name, v) in [("beta", beta), ("eta", eta)] {
                    if !(0.0..=1.0).contains(v) {
                        errs.push(format!("{name} must lie in [0, 1], got {v}"));
                    }
                }
                errs
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

struct Reader<'a> {
    table: &'a Table,
    prefix: &'static str,
    seen: BTreeSet<String>,
    errors: Vec<String>,
}

impl<'a> Reader<'a> {
    fn new(table: &'a Table, prefix: &'static str) -> Self {
        Self {
            table,
            prefix,
            seen: BTreeSet::new(),
            errors: Vec::new(),
        }
    }

    fn name(&self, key: &str) -> String {
        format!("{}{key}", self.prefix)
    }

    fn raw(&mut self, key: &str) -> Option<&'a Value> {
        self.seen.insert(key.to_string());
        self.table.get(key)
    }

    fn missing(&mut self, key: &str) {
        let name = self.name(key);
        self.errors.push(format!("missing required key `{name}`"));
    }

    fn wrong_type(&mut self, key: &str, expected: &str, got: &Value) {
        let name = self.name(key);
        self.errors.push(format!("`{name}` must be {expected}, got {}", got.type_str()));
    }

    fn count(&mut self, key: &str, default: Option<usize>) -> Option<usize> {
        match self.raw(key) {
            None => {
                if default.is_none() {
                    self.missing(key);
                }
                default
            }
            Some(Value::Integer(i)) if *i >= 0 => Some(*i as usize),
            Some(Value::Integer(i)) => {
                let name = self.name(key);
                self.errors.push(format!("`{name}` must be nonnegative, got {i}"));
                None
            }
            Some(v) => {
                self.wrong_type(key, "an integer", v);
                None
            }
        }
    }

    fn seed(&mut self, key: &str) -> Option<u64> {
        self.count(key, Some(0)).map(|v| v as u64)
    }

    fn number(&mut self, key: &str, default: Option<f64>) -> Option<f64> {
        match self.raw(key) {
            None => {
                if default.is_none() {
                    self.missing(key);
                }
                default
            }
            Some(Value::Float(f)) => Some(*f),
            Some(Value::Integer(i)) => Some(*i as f64),
            Some(v) => {
                self.wrong_type(key, "a number", v);
                None
            }
        }
    }

    fn numbers(&mut self, key: &str) -> Option<Vec<f64>> {
        match self.raw(key) {
            None => {
                self.missing(key);
                None
            }
            Some(Value::Array(items)) => {
                let mut out = Vec::with_capacity(items.len());
                let mut ok = true;
                for (i, item) in items.iter().enumerate() {
                    match item {
                        Value::Float(f) => out.push(*f),
                        Value::Integer(v) => out.push(*v as f64),
                        other => {
                            let name = self.name(key);
                            self.errors.push(format!("`{name}[{i}]` must be a number, got {}", other.type_str()));
                            ok = false;
                        }
                    }
                }
                ok.then_some(out)
            }
            Some(v) => {
                self.wrong_type(key, "an array of numbers", v);
                None
            }
        }
    }

    fn parsed<T: std::str::FromStr<Err = Error>>(&mut self, key: &str, default: T) -> Option<T> {
        match self.raw(key) {
            None => Some(default),
            Some(Value::String(s)) => match s.parse() {
                Ok(v) => Some(v),
                Err(e) => {
                    let name = self.name(key);
                    self.errors.push(format!("`{name}`: {}", e.to_string().trim_start_matches("invalid argument: ")));
                    None
                }
            },
            Some(v) => {
                self.wrong_type(key, "a string", v);
                None
            }
        }
    }

    fn finish(mut self) -> Vec<String> {
        for key in self.table.keys() {
            if !self.seen.contains(key) {
                let name = format!("{}{key}", self.prefix);
                self.errors.push(format!("unknown key `{name}`"));
            }
        }
        self.errors
    }
}

fn read_solver(table: &Table, errors: &mut Vec<String>) -> Option<SolverConfig> {
    let solver = match table.get("solver") {
        None => return Some(SolverConfig::default()),
        Some(Value::Table(t)) => t,
        Some(v) => {
            errors.push(format!("`solver` must be a table, got {}", v.type_str()));
            return None;
        }
    };
    let d = SolverConfig::default();
    let mut r = Reader::new(solver, "solver.");
    let max_iters = r.count("max_iters", Some(d.max_iters));
    let rel_tol = r.number("rel_tol", Some(d.rel_tol));
    let step = r.number("step", Some(d.step));
    let log_every = r.count("log_every", Some(d.log_every));
    errors.extend(r.finish());
    Some(SolverConfig {
        max_iters: max_iters?,
        rel_tol: rel_tol?,
        step: step?,
        log_every: log_every?,
        track_objective: false,
    })
}

/// Parses and validates a TOML config, reporting every problem found.
pub fn parse_toml(text: &str) -> Result<RunSpec> {
    let table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::Config(vec![format!("TOML syntax: {}", e.message())]))?;
    let mut errors = Vec::new();
    let solver = read_solver(&table, &mut errors);
    let mut r = Reader::new(&table, "");
    r.seen.insert("solver".into());
    let kind = match r.raw("kind") {
        Some(Value::String(s)) => Some(s.clone()),
        Some(v) => {
            r.wrong_type("kind", "a string", v);
            None
        }
        None => {
            r.missing("kind");
            None
        }
    };

    let spec = match kind.as_deref() {
        Some("spectrum_check") => {
            let n = r.count("n", None);
            let beta = r.number("beta", None);
            let eta = r.number("eta", None);
            let bins = r.count("bins", Some(DEFAULT_BINS));
            let seed = r.seed("seed");
            errors.extend(r.finish());
            if table.contains_key("solver") {
                errors.push("unknown key `solver` (spectrum_check does not run the solver)".into());
            }
            match (n, beta, eta, bins, seed) {
                (Some(n), Some(beta), Some(eta), Some(bins), Some(seed)) => Some(RunSpec::SpectrumCheck { n, beta, eta, bins, seed }),
                _ => None,
            }
        }
        Some(k @ ("rmse_table" | "magnitude_sweep" | "pt_sweep")) => {
            let n = r.count("n", None);
            let trials = r.count("trials", Some(DEFAULT_TRIALS));
            let mode = r.parsed("mode", FactorMode::WorstCaseSymmetric);
            let tail = r.parsed("tail_profile", TailProfile::Flat);
            let sigma_eps = r.number("sigma_eps", Some(1.0));
            let seed = r.seed("seed");
            let (eta, beta_list, sigma_ratio) = match k {
                "rmse_table" => (r.number("eta", None), r.numbers("beta_list"), r.number("sigma_ratio", Some(50.0))),
                "magnitude_sweep" => (r.number("eta", None), r.number("beta", None).map(|b| vec![b]), Some(1.0)),
                _ => (Some(0.5), Some(Vec::new()), r.number("sigma_ratio", Some(1.0))),
            };
            let ratios = (k == "magnitude_sweep").then(|| r.numbers("ratios"));
            let grids = (k == "pt_sweep").then(|| {
                (
                    r.numbers("beta_grid"),
                    r.numbers("eta_grid"),
                    r.number("success_threshold", Some(DEFAULT_SUCCESS_THRESHOLD)),
                )
            });
            errors.extend(r.finish());
            let experiment = match (n, trials, mode, tail, sigma_eps, seed, eta, beta_list, sigma_ratio, solver) {
                (Some(n), Some(trials), Some(mode), Some(tail_profile), Some(sigma_eps), Some(master_seed), Some(eta), Some(beta_list), Some(sigma_ratio), Some(solver)) => {
                    Some(ExperimentConfig {
                        n,
                        eta,
                        beta_list,
                        trials,
                        mode,
                        tail_profile,
                        sigma_ratio,
                        sigma_eps,
                        master_seed,
                        solver,
                    })
                }
                _ => None,
            };
            match (k, experiment, ratios, grids) {
                ("rmse_table", Some(experiment), _, _) => Some(RunSpec::RmseTable { experiment }),
                ("magnitude_sweep", Some(experiment), Some(Some(ratios)), _) => Some(RunSpec::MagnitudeSweep { experiment, ratios }),
                ("pt_sweep", Some(mut experiment), _, Some((Some(beta_grid), Some(eta_grid), Some(success_threshold)))) => {
                    experiment.beta_list = beta_grid.clone();
                    experiment.eta = eta_grid.first().copied().unwrap_or(0.5);
                    Some(RunSpec::PtSweep {
                        experiment,
                        beta_grid,
                        eta_grid,
                        success_threshold,
                    })
                }
                _ => None,
            }
        }
        Some(other) => {
            errors.push(format!(
                "unknown kind `{other}` (expected rmse_table, magnitude_sweep, pt_sweep or spectrum_check)"
            ));
            None
        }
        None => None,
    };

    if let Some(spec) = &spec {
        errors.extend(spec.violations());
    }
    match spec {
        Some(spec) if errors.is_empty() => Ok(spec),
        _ => Err(Error::Config(errors)),
    }
}

pub fn load_toml(path: &Path) -> Result<RunSpec> {
    let text = std::fs::read_to_string(path)?;
    parse_toml(&text)
}

/// Resolved run description recorded next to every result set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub version: String,
    pub master_seed: Option<u64>,
    pub timestamp: u64,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, master_seed: Option<u64>, outputs: Vec<String>) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            command: command.to_string(),
            config,
            version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed,
            timestamp,
            outputs,
        }
    }
}

/// Reads the experiment recorded in a `run` manifest.
pub fn load_manifest(path: &Path) -> Result<RunSpec> {
    let text = std::fs::read_to_string(path)?;
    let manifest: RunManifest =
        serde_json::from_str(&text).map_err(|e| Error::Config(vec![format!("manifest {}: {e}", path.display())]))?;
    if manifest.command != "run" {
        return Err(Error::Config(vec![format!(
            "manifest was written by `{}`, only `run` manifests can be replayed",
            manifest.command
        )]));
    }
    let spec: RunSpec = serde_json::from_value(manifest.config)
        .map_err(|e| Error::Config(vec![format!("manifest config: {e}")]))?;
    spec.validate()?;
    Ok(spec)
}

/// Dispatches on the file extension: `.json` is a manifest, anything else TOML.
pub fn load_run_spec(path: &Path) -> Result<RunSpec> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") => load_manifest(path),
        _ => load_toml(path),
    }
}

pub fn run(spec: &RunSpec) -> Result<RunOutcome> {
    spec.validate()?;
    Ok(match spec {
        RunSpec::RmseTable { experiment } => RunOutcome::Sweep(harness::run_rmse_table(experiment)?),
        RunSpec::MagnitudeSweep { experiment, ratios } => RunOutcome::Sweep(harness::run_magnitude_sweep(experiment, ratios)?),
        RunSpec::PtSweep {
            experiment,
            beta_grid,
            eta_grid,
            success_threshold,
        } => RunOutcome::Sweep(harness::run_pt_sweep(experiment, beta_grid, eta_grid, *success_threshold)?),
        RunSpec::SpectrumCheck { n, beta, eta, bins, seed } => {
            RunOutcome::Spectrum(Box::new(harness::run_spectrum_check(*n, *beta, *eta, *bins, *seed)?))
        }
    })
}

#[derive(Debug, Clone)]
pub enum RunOutcome {
    Sweep(harness::SweepResult),
    Spectrum(Box<harness::SpectrumCheck>),
}
