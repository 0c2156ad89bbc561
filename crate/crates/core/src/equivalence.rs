//! Worst-case phase-transition curve and finite-n equivalence certificates
//! for the block mask with `l1 = l2 = l`.

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

const PINV_CUTOFF: f64 = 1e-12;
const RANK_TOL: f64 = 1e-12;
const CROSS_CHECK_TOL: f64 = 1e-8;

/// `β_wc(η) = max(1/2 − √(η − η²), 0)`.
pub fn pt_boundary(eta: f64) -> f64 {
    (0.5 - (eta - eta * eta).max(0.0).sqrt()).max(0.0)
}

/// `β − 1/2 + √(η − η²)`; nonpositive inside the recoverable region.
pub fn xi_wc(beta: f64, eta: f64) -> f64 {
    beta - 0.5 + (eta - eta * eta).max(0.0).sqrt()
}

pub fn is_recoverable(beta: f64, eta: f64) -> bool {
    xi_wc(beta, eta) <= 0.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub lambda_max_product: f64,
    pub lambda_max_v: f64,
    pub lambda_max_u: f64,
    pub exact_condition_holds: bool,
    pub sufficient_condition_holds: bool,
    /// `|λ_max(Λ_VᵀΛ_V) − (λ_max(Gram⁻¹) − 1)|`, with `Gram = BBᵀ`.
    pub cross_check_gap: f64,
}

impl Certificate {
    fn trivial() -> Self {
        Self {
            lambda_max_product: 0.0,
            lambda_max_v: 0.0,
            lambda_max_u: 0.0,
            exact_condition_holds: true,
            sufficient_condition_holds: true,
            cross_check_gap: 0.0,
        }
    }

    /// Distance of the product eigenvalue from the decision threshold 1.
    pub fn margin(&self) -> f64 {
        (self.lambda_max_product - 1.0).abs()
    }
}

struct SideFactor {
    lambda: Mat<f64>,
    lambda_max: f64,
    gram_min: f64,
}

fn side_factor(bar: MatRef<'_, f64>, perp: MatRef<'_, f64>, l: usize) -> Result<SideFactor> {
    let b = perp.subrows(l, perp.nrows() - l);
    let sv = linalg::singular_values(b)?;
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    if sv.len() < b.nrows() || smin <= RANK_TOL * smax.max(1.0) {
        return Err(Error::Degenerate(format!(
            "bottom {}x{} block of the complement basis is rank deficient (smallest singular value {smin:.3e})",
            b.nrows(),
            b.ncols()
        )));
    }
    let pinv = linalg::pseudo_inverse(b, PINV_CUTOFF)?;
    let lambda = &pinv * bar.subrows(l, bar.nrows() - l);
    let lambda_max = linalg::operator_norm(lambda.as_ref())?.powi(2);
    Ok(SideFactor {
        lambda,
        lambda_max,
        gram_min: smin * smin,
    })
}

fn check_bases(bar: MatRef<'_, f64>, perp: MatRef<'_, f64>, l: usize, name: &str) -> Result<()> {
    let n = bar.nrows();
    if perp.nrows() != n || bar.ncols() + perp.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "{name}: dominant basis is {}x{} and complement is {}x{}",
            bar.nrows(),
            bar.ncols(),
            perp.nrows(),
            perp.ncols()
        )));
    }
    if bar.ncols() > l || l > n {
        return Err(Error::InvalidShape(format!(
            "{name}: need k <= l <= n, got k={}, l={l}, n={n}",
            bar.ncols()
        )));
    }
    Ok(())
}

/// Equivalence certificate built from `Λ_V = B_V⁺ V̄_bot` and `Λ_U = B_U⁺ Ū_bot`,
/// where `B` is the bottom `n − l` rows of the complement basis.
pub fn certificate(
    vbar: MatRef<'_, f64>,
    vperp: MatRef<'_, f64>,
    ubar: MatRef<'_, f64>,
    uperp: MatRef<'_, f64>,
    l: usize,
) -> Result<Certificate> {
    check_bases(vbar, vperp, l, "V")?;
    check_bases(ubar, uperp, l, "U")?;
    if vbar.nrows() != ubar.nrows() || vbar.ncols() != ubar.ncols() {
        return Err(Error::DimensionMismatch("U and V bases disagree in shape".into()));
    }
    let n = vbar.nrows();
    if vbar.ncols() == 0 || l == n {
        return Ok(Certificate::trivial());
    }
    let v = side_factor(vbar, vperp, l)?;
    let u = side_factor(ubar, uperp, l)?;
    let opt = &v.lambda * u.lambda.transpose();
    let lambda_max_product = linalg::operator_norm(opt.as_ref())?.powi(2);
    let via_gram = 1.0 / v.gram_min - 1.0;
    let cross_check_gap = (v.lambda_max - via_gram).abs();
    if cross_check_gap > CROSS_CHECK_TOL * via_gram.abs().max(1.0) {
        return Err(Error::LinearAlgebra(format!(
            "certificate cross-check failed: lambda_max(Λ_VᵀΛ_V)={} vs 1/g_min - 1 = {via_gram}",
            v.lambda_max
        )));
    }
    Ok(Certificate {
        lambda_max_product,
        lambda_max_v: v.lambda_max,
        lambda_max_u: u.lambda_max,
        exact_condition_holds: lambda_max_product <= 1.0,
        sufficient_condition_holds: v.lambda_max * u.lambda_max <= 1.0,
        cross_check_gap,
    })
}

/// Ascending eigenvalues of `Gram = BBᵀ` for the bottom `n − l` rows `B` of `V⊥`.
pub fn gram_spectrum(vperp: MatRef<'_, f64>, l: usize) -> Result<Vec<f64>> {
    let n = vperp.nrows();
    if l > n {
        return Err(Error::InvalidShape(format!("l={l} exceeds n={n}")));
    }
    let k = n - vperp.ncols();
    if k > l {
        return Err(Error::InvalidShape(format!("need k <= l, got k={k}, l={l}")));
    }
    let mut sv = linalg::singular_values(vperp.subrows(l, n - l))?;
    sv.resize(n - l, 0.0);
    let mut g: Vec<f64> = sv.iter().map(|s| s * s).collect();
    g.sort_by(f64::total_cmp);
    Ok(g)
}

/// Ascending eigenvalues of `Q = Gram⁻¹ − I`, each `1/g − 1` clamped at zero.
pub fn q_spectrum(vperp: MatRef<'_, f64>, l: usize) -> Result<Vec<f64>> {
    let g = gram_spectrum(vperp, l)?;
    if let Some(&gmin) = g.first() {
        if gmin <= RANK_TOL {
            return Err(Error::Degenerate(format!(
                "Gram matrix is singular (smallest eigenvalue {gmin:.3e})"
            )));
        }
    }
    let mut q: Vec<f64> = g.iter().map(|&gi| (1.0 / gi - 1.0).max(0.0)).collect();
    q.sort_by(f64::total_cmp);
    Ok(q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_ground_truth, make_shape, FactorMode, SpectrumSpec};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn boundary_examples() {
        assert_abs_diff_eq!(pt_boundary(0.9), 0.2, epsilon = 1e-12);
        assert_eq!(pt_boundary(0.5), 0.0);
        assert_eq!(pt_boundary(1.0), 0.5);
        assert_abs_diff_eq!(xi_wc(0.2, 0.9), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(xi_wc(0.1, 0.9), -0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(xi_wc(0.5, 0.5), 0.5, epsilon = 1e-15);
        assert!(is_recoverable(0.15, 0.9));
        assert!(!is_recoverable(0.21, 0.9));
        for eta in [0.0, 0.3, 0.5, 0.9, 1.0] {
            assert!(is_recoverable(0.0, eta));
        }
    }

    #[test]
    fn zero_rank_certificate_is_trivial() {
        let id = Mat::<f64>::identity(5, 5);
        let bar = id.as_ref().subcols(0, 0);
        let c = certificate(bar, id.as_ref(), bar, id.as_ref(), 3).unwrap();
        assert_eq!(c.lambda_max_product, 0.0);
        assert!(c.exact_condition_holds && c.sufficient_condition_holds);
    }

    #[test]
    fn q_spectrum_of_aligned_complement_is_zero() {
        // V⊥ spans the last n − k coordinates, so its bottom block is [0 I].
        let id = Mat::<f64>::identity(8, 8);
        let vperp = id.as_ref().subcols(2, 6);
        let q = q_spectrum(vperp, 5).unwrap();
        assert_eq!(q.len(), 3);
        assert!(q.iter().all(|&v| v.abs() < 1e-14));
    }

    #[test]
    fn certificate_matches_q_spectrum() {
        let shape = make_shape(30, 3, 24).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let gt = build_ground_truth(shape, &SpectrumSpec::flat(1.0, 0.0), FactorMode::Asymmetric, &mut rng).unwrap();
        let c = certificate(gt.vbar(), gt.vperp(), gt.ubar(), gt.uperp(), 24).unwrap();
        let q = q_spectrum(gt.vperp(), 24).unwrap();
        assert!((q.last().unwrap() - c.lambda_max_v).abs() <= 1e-8 * c.lambda_max_v.max(1.0));
        assert!(c.lambda_max_v >= 0.0 && c.lambda_max_u >= 0.0);
    }

    #[test]
    fn certificate_rejects_bad_dimensions() {
        let id = Mat::<f64>::identity(6, 6);
        let bar = id.as_ref().subcols(0, 3);
        let perp = id.as_ref().subcols(3, 3);
        assert!(certificate(bar, perp, bar, perp, 2).is_err());
        assert!(certificate(bar, id.as_ref().subcols(2, 4), bar, perp, 4).is_err());
    }

    proptest! {
        #[test]
        fn boundary_is_symmetric(eta in 0.0f64..=1.0) {
            prop_assert!((pt_boundary(eta) - pt_boundary(1.0 - eta)).abs() <= 1e-12);
        }

        #[test]
        fn sufficient_implies_exact(seed in any::<u64>(), k in 1usize..6, extra in 0usize..10) {
            let n = 24;
            let l = (k + extra + 10).min(n - 1);
            let shape = make_shape(n, k, l).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gt = build_ground_truth(shape, &SpectrumSpec::flat(1.0, 0.0), FactorMode::Asymmetric, &mut rng).unwrap();
            let c = certificate(gt.vbar(), gt.vperp(), gt.ubar(), gt.uperp(), l).unwrap();
            prop_assert!(c.lambda_max_product <= c.lambda_max_v * c.lambda_max_u * (1.0 + 1e-10) + 1e-12);
            if c.sufficient_condition_holds {
                prop_assert!(c.exact_condition_holds);
            }
            prop_assert!(c.cross_check_gap <= 1e-8 * c.lambda_max_v.max(1.0));
        }
    }
}
