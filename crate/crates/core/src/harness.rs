//! Seeded Monte-Carlo experiments: RMSE tables, magnitude sweeps, phase
//! transition sweeps and spectral-law checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::freeprob::{self, SpectralLaw};
use crate::model::{self, FactorMode, SpectrumSpec, TailProfile};
use crate::rmse;
use crate::solver::{self, SolverConfig};

pub const DEFAULT_TRIALS: usize = 50;
pub const DEFAULT_SUCCESS_THRESHOLD: f64 = 1e-3;
const ZERO_EIGEN_TOL: f64 = 1e-8;
const CELL_MIX: u64 = 0xD1B5_4A32_D192_ED03;
const CELL_OFFSET: u64 = 0x8CB9_2BA7_2F3D_8DD7;

/// SplitMix64 finalizer; a bijection on `u64`.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `sm(sm(master ⊕ sm(cell·C₁ + C₂)) ⊕ trial)`: for a fixed master seed and
/// cell the map from trial index to seed is a composition of bijections.
pub fn seed_trial(master_seed: u64, cell_index: u64, trial_index: u64) -> u64 {
    let cell = splitmix64(cell_index.wrapping_mul(CELL_MIX).wrapping_add(CELL_OFFSET));
    splitmix64(splitmix64(master_seed ^ cell) ^ trial_index)
}

/// `round(r·n)` with ties away from zero.
pub fn round_count(ratio: f64, n: usize) -> usize {
    (ratio * n as f64 + 0.5).floor().max(0.0) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub n: usize,
    pub eta: f64,
    pub beta_list: Vec<f64>,
    pub trials: usize,
    pub mode: FactorMode,
    pub tail_profile: TailProfile,
    pub sigma_ratio: f64,
    pub sigma_eps: f64,
    pub master_seed: u64,
    pub solver: SolverConfig,
}

impl ExperimentConfig {
    pub fn table2(master_seed: u64) -> Self {
        Self {
            n: 40,
            eta: 0.9,
            beta_list: vec![0.05, 0.1, 0.15, 0.2],
            trials: DEFAULT_TRIALS,
            mode: FactorMode::WorstCaseSymmetric,
            tail_profile: TailProfile::Flat,
            sigma_ratio: 50.0,
            sigma_eps: 1.0,
            master_seed,
            solver: SolverConfig::default(),
        }
    }

    /// Collects every violation rather than stopping at the first.
    pub fn violations(&self) -> Vec<String> {
        let mut errs = Vec::new();
        if self.n < 2 {
            errs.push(format!("n must be at least 2, got {}", self.n));
        }
        if self.trials < 1 {
            errs.push("trials must be at least 1".into());
        }
        if !(self.eta > 0.0 && self.eta < 1.0) {
            errs.push(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if self.beta_list.is_empty() {
            errs.push("beta_list must not be empty".into());
        }
        if !(self.sigma_ratio > 0.0 && self.sigma_ratio.is_finite()) {
            errs.push(format!("sigma_ratio must be positive, got {}", self.sigma_ratio));
        }
        if !(self.sigma_eps >= 0.0 && self.sigma_eps.is_finite()) {
            errs.push(format!("sigma_eps must be nonnegative, got {}", self.sigma_eps));
        }
        let l = round_count(self.eta, self.n);
        if self.n >= 2 && l >= self.n {
            errs.push(format!("eta={} rounds to l={l} >= n={}, leaving no missing block", self.eta, self.n));
        }
        for &beta in &self.beta_list {
            if !(0.0..1.0).contains(&beta) {
                errs.push(format!("beta={beta} must lie in [0, 1)"));
                continue;
            }
            let k = round_count(beta, self.n);
            if k > l {
                errs.push(format!("beta={beta} gives k={k} > l={l} at n={}", self.n));
            }
        }
        if let Err(Error::Config(mut e)) = self.solver.validate() {
            errs.append(&mut e);
        }
        errs
    }

    pub fn validate(&self) -> Result<()> {
        let errs = self.violations();
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }

    fn spectrum(&self, sigma_ratio: f64, sigma_eps: f64) -> SpectrumSpec {
        SpectrumSpec {
            sigma_mag: sigma_ratio * if sigma_eps > 0.0 { sigma_eps } else { 1.0 },
            sigma_eps,
            tail_profile: self.tail_profile,
            normalize_tail_norm: self.tail_profile != TailProfile::Flat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub cell: usize,
    pub trial: usize,
    pub seed: u64,
    pub scaled_rmse: f64,
    pub raw_rmse: f64,
    pub relative_error: f64,
    pub oracle_scaled: Option<f64>,
    pub success: Option<bool>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub cell: usize,
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub beta: f64,
    pub eta: f64,
    pub sigma_ratio: f64,
    pub trials: usize,
    pub mean_scaled_rmse: f64,
    pub std_error: f64,
    pub theory_xi: Option<f64>,
    pub mean_oracle_scaled: Option<f64>,
    pub success_rate: Option<f64>,
    pub converged_trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellRecord>,
    pub trials: Vec<TrialRecord>,
}

impl SweepResult {
    pub fn trials_of(&self, cell: usize) -> impl Iterator<Item = &TrialRecord> {
        self.trials.iter().filter(move |t| t.cell == cell)
    }
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let m = values.len();
    if m == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / m as f64;
    if m < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    (mean, (var / m as f64).sqrt())
}

#[derive(Debug, Clone)]
struct CellPlan {
    shape: model::ProblemShape,
    spec: SpectrumSpec,
    mode: FactorMode,
    success_threshold: Option<f64>,
    theory_xi: Option<f64>,
}

fn run_trial(plan: &CellPlan, solver_cfg: &SolverConfig, cell: usize, trial: usize, seed: u64) -> Result<TrialRecord> {
    let shape = plan.shape;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gt = model::build_ground_truth(shape, &plan.spec, plan.mode, &mut rng)?;
    let mask = model::build_mask(shape.n, shape.l, shape.l)?;
    let obs = model::apply_mask(&mask, gt.x_sol.as_ref())?;
    let completion = solver::complete(&obs, solver_cfg)?;
    let raw = (&completion.x_hat - &gt.x_sol).norm_l2();
    let scaled = rmse::scaled_rmse(raw, shape.n, shape.k, shape.l)?;
    let truth_norm = gt.x_sol.norm_l2();
    let relative_error = if truth_norm > 0.0 { raw / truth_norm } else { raw };
    let oracle_applies = gt.symmetric_factors
        && plan.spec.tail_profile == TailProfile::Flat
        && plan.spec.sigma_eps > 0.0;
    let oracle_scaled = if oracle_applies {
        match rmse::residual_oracle(gt.vperp(), shape.l, plan.spec.sigma_eps) {
            Ok(r) => Some(rmse::scaled_rmse(r, shape.n, shape.k, shape.l)?),
            Err(Error::Degenerate(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    Ok(TrialRecord {
        cell,
        trial,
        seed,
        scaled_rmse: scaled,
        raw_rmse: raw,
        relative_error,
        oracle_scaled,
        success: plan.success_threshold.map(|t| relative_error < t),
        iterations: completion.iterations_used,
        converged: completion.converged,
    })
}

fn theory_or_none(beta: f64, eta: f64, sigma_eps: f64) -> Result<Option<f64>> {
    match rmse::theoretical_xi(beta, eta, sigma_eps) {
        Ok(v) => Ok(Some(v)),
        Err(Error::AbovePhaseTransition { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

fn execute(plans: &[CellPlan], trials: usize, master_seed: u64, solver_cfg: &SolverConfig) -> Result<SweepResult> {
    let tasks: Vec<(usize, usize, u64)> = (0..plans.len())
        .flat_map(|c| (0..trials).map(move |t| (c, t, seed_trial(master_seed, c as u64, t as u64))))
        .collect();
    let records: Vec<TrialRecord> = tasks
        .par_iter()
        .map(|&(c, t, seed)| run_trial(&plans[c], solver_cfg, c, t, seed))
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::with_capacity(plans.len());
    for (c, plan) in plans.iter().enumerate() {
        let rows: Vec<&TrialRecord> = records.iter().filter(|r| r.cell == c).collect();
        let scaled: Vec<f64> = rows.iter().map(|r| r.scaled_rmse).collect();
        let (mean, se) = mean_and_se(&scaled);
        let oracles: Option<Vec<f64>> = rows.iter().map(|r| r.oracle_scaled).collect();
        let successes: Option<Vec<bool>> = rows.iter().map(|r| r.success).collect();
        let record = CellRecord {
            cell: c,
            n: plan.shape.n,
            k: plan.shape.k,
            l: plan.shape.l,
            beta: plan.shape.beta,
            eta: plan.shape.eta,
            sigma_ratio: plan.spec.sigma_mag / if plan.spec.sigma_eps > 0.0 { plan.spec.sigma_eps } else { 1.0 },
            trials: rows.len(),
            mean_scaled_rmse: mean,
            std_error: se,
            theory_xi: plan.theory_xi,
            mean_oracle_scaled: oracles.map(|o| mean_and_se(&o).0),
            success_rate: successes.map(|s| s.iter().filter(|&&b| b).count() as f64 / s.len() as f64),
            converged_trials: rows.iter().filter(|r| r.converged).count(),
        };
        log::info!(
            "cell {c}: beta={:.4} eta={:.4} ratio={} mean={:.4} se={:.4}",
            record.beta,
            record.eta,
            record.sigma_ratio,
            record.mean_scaled_rmse,
            record.std_error
        );
        cells.push(record);
    }
    Ok(SweepResult { cells, trials: records })
}

fn plan_for(config: &ExperimentConfig, beta: f64, eta: f64, spec: SpectrumSpec, success: Option<f64>) -> Result<CellPlan> {
    let k = round_count(beta, config.n);
    let l = round_count(eta, config.n);
    let shape = model::make_shape(config.n, k, l)?;
    let theory_xi = if spec.sigma_eps > 0.0 {
        theory_or_none(shape.beta, shape.eta, spec.sigma_eps)?
    } else {
        None
    };
    Ok(CellPlan {
        shape,
        spec,
        mode: config.mode,
        success_threshold: success,
        theory_xi,
    })
}

/// One cell per `β`, each with `trials` seeded instances.
pub fn run_rmse_table(config: &ExperimentConfig) -> Result<SweepResult> {
    config.validate()?;
    let spec = config.spectrum(config.sigma_ratio, config.sigma_eps);
    let plans = config
        .beta_list
        .iter()
        .map(|&b| plan_for(config, b, config.eta, spec, None))
        .collect::<Result<Vec<_>>>()?;
    execute(&plans, config.trials, config.master_seed, &config.solver)
}

/// One cell per magnitude ratio at the single `β` of `config`; every cell
/// carries the infinite-ratio theory value.
pub fn run_magnitude_sweep(config: &ExperimentConfig, ratios: &[f64]) -> Result<SweepResult> {
    let mut errs = config.violations();
    if config.beta_list.len() != 1 {
        errs.push(format!(
            "magnitude sweep needs exactly one beta, got {}",
            config.beta_list.len()
        ));
    }
    if ratios.is_empty() {
        errs.push("ratios must not be empty".into());
    }
    for &r in ratios {
        if !(r > 0.0 && r.is_finite()) {
            errs.push(format!("ratio {r} must be positive"));
        }
    }
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let beta = config.beta_list[0];
    let plans = ratios
        .iter()
        .map(|&r| plan_for(config, beta, config.eta, config.spectrum(r, config.sigma_eps), None))
        .collect::<Result<Vec<_>>>()?;
    execute(&plans, config.trials, config.master_seed, &config.solver)
}

/// Exact-recovery success rates on ideal low-rank instances over a `β × η`
/// grid (row-major in `β`).
pub fn run_pt_sweep(
    config: &ExperimentConfig,
    beta_grid: &[f64],
    eta_grid: &[f64],
    success_threshold: f64,
) -> Result<SweepResult> {
    let mut errs = Vec::new();
    let probe = ExperimentConfig {
        beta_list: beta_grid.to_vec(),
        ..config.clone()
    };
    if eta_grid.is_empty() {
        errs.push("eta_grid must not be empty".into());
    }
    for &eta in eta_grid {
        let per_eta = ExperimentConfig { eta, ..probe.clone() };
        for e in per_eta.violations() {
            if !errs.contains(&e) {
                errs.push(e);
            }
        }
    }
    if !(success_threshold > 0.0) {
        errs.push(format!("success_threshold must be positive, got {success_threshold}"));
    }
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let spec = config.spectrum(config.sigma_ratio, 0.0);
    let mut plans = Vec::new();
    for &beta in beta_grid {
        for &eta in eta_grid {
            plans.push(plan_for(config, beta, eta, spec, Some(success_threshold))?);
        }
    }
    execute(&plans, config.trials, config.master_seed, &config.solver)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub empirical_mass: f64,
    pub theory_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumCheck {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub seed: u64,
    pub law: SpectralLaw,
    pub zero_fraction: f64,
    pub one_count: usize,
    pub expected_one_count: usize,
    pub bulk_l1: f64,
    /// Bulk eigenvalues outside `[x_l − 5n^(−2/3), x_u + 5n^(−2/3)]`.
    pub edge_violations: usize,
    pub histogram: Vec<HistogramBin>,
    pub eigenvalues: Vec<f64>,
}

/// Compares one draw of the spectrum of `𝒱𝒰` (independent Haar complements
/// of dimensions `n − k` and `n − l`) with the closed-form law.
pub fn run_spectrum_check(n: usize, beta: f64, eta: f64, bins: usize, seed: u64) -> Result<SpectrumCheck> {
    let mut errs = Vec::new();
    if n < 500 {
        errs.push(format!("spectrum check needs n >= 500, got {n}"));
    }
    if bins < 1 {
        errs.push("bins must be at least 1".into());
    }
    for (name, v) in [("beta", beta), ("eta", eta)] {
        if !(0.0..=1.0).contains(&v) {
            errs.push(format!("{name} must lie in [0, 1], got {v}"));
        }
    }
    if !errs.is_empty() {
        return Err(Error::Config(errs));
    }
    let k = round_count(beta, n);
    let l = round_count(eta, n);
    let law = SpectralLaw::new(k as f64 / n as f64, l as f64 / n as f64)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eigenvalues = if k == n || l == n {
        vec![0.0; n]
    } else {
        let vperp = model::sample_haar_basis(n, n - k, &mut rng)?;
        let uperp = model::sample_haar_basis(n, n - l, &mut rng)?;
        freeprob::empirical_product_spectrum(vperp.as_ref(), uperp.as_ref())?
    };
    let nf = n as f64;
    let zeros = eigenvalues.iter().filter(|&&v| v < ZERO_EIGEN_TOL).count();
    let ones = eigenvalues.iter().filter(|&&v| v > 1.0 - ZERO_EIGEN_TOL).count();
    let bulk: Vec<f64> = eigenvalues
        .iter()
        .copied()
        .filter(|&v| (ZERO_EIGEN_TOL..=1.0 - ZERO_EIGEN_TOL).contains(&v))
        .collect();
    let delta = 5.0 * nf.powf(-2.0 / 3.0);
    let edge_violations = bulk.iter().filter(|&&v| v < law.x_l - delta || v > law.x_u + delta).count();

    let mut histogram = Vec::with_capacity(bins);
    let width = (law.x_u - law.x_l) / bins as f64;
    let mut counts = vec![0usize; bins];
    if law.has_bulk() {
        for &v in &bulk {
            let idx = ((v - law.x_l) / width).floor();
            let idx = if idx < 0.0 { 0 } else { (idx as usize).min(bins - 1) };
            counts[idx] += 1;
        }
    }
    let mut bulk_l1 = 0.0;
    for (b, &count) in counts.iter().enumerate() {
        let lo = law.x_l + width * b as f64;
        let hi = if b + 1 == bins { law.x_u } else { law.x_l + width * (b + 1) as f64 };
        let theory_mass = law.bulk_mass_between(lo, hi)?;
        let empirical_mass = count as f64 / nf;
        bulk_l1 += (empirical_mass - theory_mass).abs();
        histogram.push(HistogramBin {
            lo,
            hi,
            empirical_mass,
            theory_mass,
        });
    }
    if !law.has_bulk() {
        bulk_l1 = bulk.len() as f64 / nf;
    }
    Ok(SpectrumCheck {
        n,
        k,
        l,
        seed,
        law,
        zero_fraction: zeros as f64 / nf,
        one_count: ones,
        expected_one_count: n.saturating_sub(k + l),
        bulk_l1,
        edge_violations,
        histogram,
        eigenvalues,
    })
}
