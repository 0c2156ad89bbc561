//! Worst-case RMSE: the asymptotic closed form `ξ`, the finite-n residual
//! oracle, and the scaling that relates the two.

use faer::MatRef;
use serde::{Deserialize, Serialize};

use crate::equivalence;
use crate::error::{Error, Result};
use crate::freeprob::SpectralLaw;
use crate::linalg;

/// Slack allowed when testing membership of the recoverable region, so that
/// points on the phase-transition curve itself are accepted.
pub const BOUNDARY_TOL: f64 = 1e-9;
const XI_REL_TOL: f64 = 1e-12;
const ORACLE_MIN_SV: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseReport {
    pub raw_frobenius: f64,
    pub scaled: f64,
    pub theory_xi: Option<f64>,
    pub oracle_residual: Option<f64>,
}

impl RmseReport {
    pub fn new(raw: f64, n: usize, k: usize, l: usize, theory_xi: Option<f64>, oracle_residual: Option<f64>) -> Result<Self> {
        Ok(Self {
            raw_frobenius: raw,
            scaled: scaled_rmse(raw, n, k, l)?,
            theory_xi,
            oracle_residual,
        })
    }
}

/// `n · raw / (√(n − k) · (n − l))`.
pub fn scaled_rmse(raw: f64, n: usize, k: usize, l: usize) -> Result<f64> {
    if k >= n || l >= n {
        return Err(Error::InvalidShape(format!(
            "scaled RMSE needs k < n and l < n, got n={n}, k={k}, l={l}"
        )));
    }
    let nf = n as f64;
    Ok(nf * raw / (((n - k) as f64).sqrt() * (n - l) as f64))
}

/// Checks that `(β, η)` lies in the region where `ξ` is finite: on or below
/// the phase-transition curve and with the bulk of `D̃` no lower than 1/2.
fn check_recoverable(law: &SpectralLaw) -> Result<()> {
    let (beta, eta) = (law.beta, law.eta);
    let below_curve = equivalence::xi_wc(beta, eta) <= BOUNDARY_TOL;
    let bulk_ok = !law.has_bulk() || law.x_l >= 0.5 - BOUNDARY_TOL;
    if below_curve && bulk_ok {
        Ok(())
    } else {
        Err(Error::AbovePhaseTransition {
            beta,
            eta,
            boundary: equivalence::pt_boundary(eta),
        })
    }
}

/// Asymptotic worst-case scaled RMSE
/// `ξ = σ_ε √(∫ f_b(x)/x² dx + f1) / (√(1 − β)(1 − η))`.
pub fn theoretical_xi(beta: f64, eta: f64, sigma_eps: f64) -> Result<f64> {
    theoretical_xi_with_tol(beta, eta, sigma_eps, XI_REL_TOL)
}

pub fn theoretical_xi_with_tol(beta: f64, eta: f64, sigma_eps: f64, rel_tol: f64) -> Result<f64> {
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("eta must lie in (0, 1), got {eta}")));
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(Error::InvalidArgument(format!("beta must lie in [0, 1), got {beta}")));
    }
    if !(sigma_eps >= 0.0 && sigma_eps.is_finite()) {
        return Err(Error::InvalidArgument(format!("sigma_eps must be nonnegative, got {sigma_eps}")));
    }
    let law = SpectralLaw::new(beta, eta)?;
    check_recoverable(&law)?;
    let weighted = law.integrate_bulk(|x, _| 1.0 / (x * x), rel_tol)?;
    Ok(sigma_eps * (weighted + law.f1).sqrt() / ((1.0 - beta).sqrt() * (1.0 - eta)))
}

/// Finite-n worst-case residual `σ_ε √(Σ σ̄ᵢ⁻⁴)` over the singular values of
/// the bottom `(n − l) × (n − k)` block of `V⊥`.
pub fn residual_oracle(vperp: MatRef<'_, f64>, l: usize, sigma_eps: f64) -> Result<f64> {
    let n = vperp.nrows();
    if l > n {
        return Err(Error::InvalidShape(format!("l={l} exceeds n={n}")));
    }
    let m = n - l;
    if vperp.ncols() < m {
        return Err(Error::InvalidShape(format!(
            "need k <= l: complement has {} columns but the missing block has {m} rows",
            vperp.ncols()
        )));
    }
    if m == 0 {
        return Ok(0.0);
    }
    let sv = linalg::singular_values(vperp.subrows(l, m))?;
    let smin = sv.last().copied().unwrap_or(0.0);
    if sv.len() < m || smin < ORACLE_MIN_SV {
        return Err(Error::Degenerate(format!(
            "bottom block of V⊥ is numerically rank deficient (smallest singular value {smin:.3e}); \
             the instance is at or above the phase transition"
        )));
    }
    Ok(sigma_eps * sv.iter().map(|s| s.powi(-4)).sum::<f64>().sqrt())
}
