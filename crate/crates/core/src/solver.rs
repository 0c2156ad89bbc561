//! `min ‖X‖_* subject to M∘X = Y` by Douglas–Rachford splitting between the
//! affine constraint and singular-value shrinkage.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{Mask, Observation};

const STALL_WINDOW: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    pub step: f64,
    /// Emit a debug log line every `log_every` iterations (0 disables).
    pub log_every: usize,
    /// Record `‖X_t‖_*` per iteration; costs one extra SVD each step.
    pub track_objective: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            max_iters: 20_000,
            rel_tol: 1e-9,
            step: 1.0,
            log_every: 0,
            track_objective: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let mut errs = Vec::new();
        if self.max_iters < 1 {
            errs.push("solver.max_iters must be at least 1".to_string());
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            errs.push(format!("solver.rel_tol must be positive, got {}", self.rel_tol));
        }
        if !(self.step > 0.0 && self.step.is_finite()) {
            errs.push(format!("solver.step must be positive, got {}", self.step));
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(errs))
        }
    }
}

#[derive(Debug, Clone)]
pub struct Completion {
    pub x_hat: Mat<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    pub nuclear_norm_value: f64,
    pub feasibility_gap: f64,
    /// `‖X_t‖_*` of each feasible iterate, in input units; empty unless tracked.
    pub objective_trace: Vec<f64>,
}

pub fn nuclear_norm(x: MatRef<'_, f64>) -> Result<f64> {
    linalg::nuclear_norm(x)
}

/// Singular-value soft thresholding `U max(Σ − τ, 0) Vᵀ`.
pub fn svt(x: MatRef<'_, f64>, tau: f64) -> Result<Mat<f64>> {
    if !(tau >= 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be nonnegative, got {tau}")));
    }
    let svd = linalg::thin_svd(x)?;
    let keep = svd.s.iter().take_while(|&&s| s > tau).count();
    let u = svd.u.as_ref().subcols(0, keep);
    let v = svd.v.as_ref().subcols(0, keep);
    let scaled = Mat::from_fn(u.nrows(), keep, |i, j| u[(i, j)] * (svd.s[j] - tau));
    Ok(&scaled * v.transpose())
}

fn project(z: &mut Mat<f64>, y: MatRef<'_, f64>, mask: &Mask) {
    for j in 0..z.ncols() {
        for i in 0..z.nrows() {
            if mask.is_observed(i, j) {
                z[(i, j)] = y[(i, j)];
            }
        }
    }
}

fn feasibility_gap(x: MatRef<'_, f64>, y: MatRef<'_, f64>, mask: &Mask) -> f64 {
    let mut gap = 0.0_f64;
    for j in 0..x.ncols() {
        for i in 0..x.nrows() {
            if mask.is_observed(i, j) {
                gap = gap.max((x[(i, j)] - y[(i, j)]).abs());
            }
        }
    }
    gap
}

pub fn complete(observation: &Observation, config: &SolverConfig) -> Result<Completion> {
    config.validate()?;
    let mask = &observation.mask;
    let y_in = observation.y.as_ref();
    if y_in.nrows() != mask.n_rows || y_in.ncols() != mask.n_cols {
        return Err(Error::DimensionMismatch(format!(
            "observation is {}x{} but mask is {}x{}",
            y_in.nrows(),
            y_in.ncols(),
            mask.n_rows,
            mask.n_cols
        )));
    }
    let (m, n) = y_in.shape();
    // Entries under the mask never enter the iteration.
    let y = Mat::from_fn(m, n, |i, j| if mask.is_observed(i, j) { y_in[(i, j)] } else { 0.0 });
    let scale = linalg::operator_norm(y.as_ref())?;
    if scale == 0.0 {
        return Ok(Completion {
            x_hat: Mat::zeros(m, n),
            iterations_used: 0,
            converged: true,
            nuclear_norm_value: 0.0,
            feasibility_gap: 0.0,
            objective_trace: Vec::new(),
        });
    }
    let y_scaled = Mat::from_fn(m, n, |i, j| y[(i, j)] / scale);

    let mut z = y_scaled.clone();
    let mut x_prev = y_scaled.clone();
    let mut streak = 0;
    let mut converged = false;
    let mut iterations_used = 0;
    let mut objective_trace = Vec::new();

    for it in 1..=config.max_iters {
        iterations_used = it;
        let mut x = z.clone();
        project(&mut x, y_scaled.as_ref(), mask);
        let reflected = Mat::from_fn(m, n, |i, j| 2.0 * x[(i, j)] - z[(i, j)]);
        let w = svt(reflected.as_ref(), config.step)?;
        z += &w - &x;

        let diff = (&x - &x_prev).norm_l2();
        let norm = x.norm_l2().max(f64::MIN_POSITIVE);
        let change = diff / norm;
        if config.track_objective {
            objective_trace.push(scale * linalg::nuclear_norm(x.as_ref())?);
        }
        if config.log_every > 0 && it % config.log_every == 0 {
            log::debug!("iteration {it}: relative change {change:.3e}");
        }
        x_prev = x;
        if change < config.rel_tol {
            streak += 1;
            if streak >= STALL_WINDOW {
                converged = true;
                break;
            }
        } else {
            streak = 0;
        }
    }
    if !converged {
        log::warn!("solver stopped at max_iters={} without meeting rel_tol={}", config.max_iters, config.rel_tol);
    }

    let mut x_hat = Mat::from_fn(m, n, |i, j| scale * z[(i, j)]);
    project(&mut x_hat, y.as_ref(), mask);
    let nuclear_norm_value = linalg::nuclear_norm(x_hat.as_ref())?;
    let gap = feasibility_gap(x_hat.as_ref(), y.as_ref(), mask);
    Ok(Completion {
        x_hat,
        iterations_used,
        converged,
        nuclear_norm_value,
        feasibility_gap: gap,
        objective_trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{apply_mask, build_ground_truth, build_mask, make_shape, FactorMode, SpectrumSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn diag(values: &[f64]) -> Mat<f64> {
        Mat::from_fn(values.len(), values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    #[test]
    fn nuclear_norm_examples() {
        assert_abs_diff_eq!(nuclear_norm(Mat::<f64>::identity(3, 3).as_ref()).unwrap(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(nuclear_norm(diag(&[3.0, -4.0]).as_ref()).unwrap(), 7.0, epsilon = 1e-12);
        let u = [0.6, 0.8];
        let v = [0.0, 0.0, 1.0];
        let r1 = Mat::from_fn(2, 3, |i, j| u[i] * v[j]);
        assert_abs_diff_eq!(nuclear_norm(r1.as_ref()).unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn svt_examples() {
        let out = svt(diag(&[3.0, 1.0]).as_ref(), 2.0).unwrap();
        assert!(linalg::max_abs_diff(out.as_ref(), diag(&[1.0, 0.0]).as_ref()) < 1e-12);
        let x = Mat::from_fn(4, 3, |i, j| ((i * 7 + j * 3) as f64).sin());
        let same = svt(x.as_ref(), 0.0).unwrap();
        assert!(linalg::max_abs_diff(same.as_ref(), x.as_ref()) < 1e-12);
        let smax = linalg::operator_norm(x.as_ref()).unwrap();
        assert_eq!(svt(x.as_ref(), smax).unwrap().norm_l2(), 0.0);
        assert!(svt(x.as_ref(), -1.0).is_err());
    }

    #[test]
    fn fully_observed_returns_input() {
        let x = Mat::from_fn(5, 5, |i, j| (i as f64 + 1.0) * (j as f64 - 2.0));
        let obs = apply_mask(&build_mask(5, 5, 5).unwrap(), x.as_ref()).unwrap();
        let c = complete(&obs, &SolverConfig::default()).unwrap();
        assert_eq!(c.x_hat, x);
        assert_eq!(c.feasibility_gap, 0.0);
    }

    #[test]
    fn zero_observation_gives_zero() {
        let obs = apply_mask(&build_mask(4, 2, 2).unwrap(), Mat::<f64>::zeros(4, 4).as_ref()).unwrap();
        let c = complete(&obs, &SolverConfig::default()).unwrap();
        assert_eq!(c.x_hat.norm_l2(), 0.0);
        assert!(c.converged);
    }

    #[test]
    fn recovers_ideal_low_rank_below_transition() {
        let shape = make_shape(40, 4, 36).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let gt = build_ground_truth(shape, &SpectrumSpec::flat(50.0, 0.0), FactorMode::WorstCaseSymmetric, &mut rng).unwrap();
        let obs = apply_mask(&build_mask(40, 36, 36).unwrap(), gt.x_sol.as_ref()).unwrap();
        let c = complete(&obs, &SolverConfig::default()).unwrap();
        let err = (&c.x_hat - &gt.x_sol).norm_l2() / gt.x_sol.norm_l2();
        assert!(err < 1e-6, "relative error {err}");
        assert!(c.converged);
    }

    #[test]
    fn rejects_invalid_config() {
        let obs = apply_mask(&build_mask(3, 2, 2).unwrap(), Mat::<f64>::identity(3, 3).as_ref()).unwrap();
        let bad = SolverConfig {
            max_iters: 0,
            rel_tol: -1.0,
            step: 0.0,
            ..SolverConfig::default()
        };
        match complete(&obs, &bad) {
            Err(Error::Config(errs)) => assert_eq!(errs.len(), 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn objective_is_monotone_after_warmup_on_symmetric_instances() {
        for seed in 0..3 {
            let shape = make_shape(30, 3, 27).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt = build_ground_truth(shape, &SpectrumSpec::flat(50.0, 1.0), FactorMode::WorstCaseSymmetric, &mut rng)
                .unwrap();
            let obs = apply_mask(&build_mask(30, 27, 27).unwrap(), gt.x_sol.as_ref()).unwrap();
            let cfg = SolverConfig {
                track_objective: true,
                ..SolverConfig::default()
            };
            let c = complete(&obs, &cfg).unwrap();
            for (t, w) in c.objective_trace.windows(2).enumerate().skip(50) {
                assert!(w[1] <= w[0] + 1e-12 * w[0].max(1.0), "seed {seed}, iteration {}: {} > {}", t + 1, w[1], w[0]);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn observed_entries_are_reproduced_exactly(seed in any::<u64>(), n in 4usize..14, frac in 0.5f64..1.0) {
            let l = ((n as f64) * frac) as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Mat::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
            let mask = build_mask(n, l, l).unwrap();
            let obs = apply_mask(&mask, x.as_ref()).unwrap();
            let cfg = SolverConfig { max_iters: 300, ..SolverConfig::default() };
            let c = complete(&obs, &cfg).unwrap();
            prop_assert_eq!(c.feasibility_gap, 0.0);
            for i in 0..n {
                for j in 0..n {
                    if mask.is_observed(i, j) {
                        prop_assert_eq!(c.x_hat[(i, j)].to_bits(), x[(i, j)].to_bits());
                    }
                }
            }
            prop_assert!(c.nuclear_norm_value >= 0.0);
        }

        #[test]
        fn masked_input_entries_are_ignored(seed in any::<u64>(), noise in -100.0f64..100.0) {
            let n = 12;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let x = Mat::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
            let mask = build_mask(n, 9, 9).unwrap();
            let obs = apply_mask(&mask, x.as_ref()).unwrap();
            let mut dirty = obs.clone();
            for i in 9..n {
                for j in 9..n {
                    dirty.y[(i, j)] = noise * (i + j) as f64;
                }
            }
            let cfg = SolverConfig { max_iters: 200, ..SolverConfig::default() };
            let a = complete(&obs, &cfg).unwrap();
            let b = complete(&dirty, &cfg).unwrap();
            prop_assert_eq!(a.x_hat, b.x_hat);
        }
    }
}
