//! Limiting spectral law of the product `D̃ = 𝒱𝒰` of two freely positioned
//! orthogonal projectors of ranks `(1-β)n` and `(1-η)n`, its transforms, and
//! the empirical spectrum used to validate it.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use faer::MatRef;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::quadrature;

const DISCRIMINANT_CLAMP: f64 = 1e-14;
const EDGE_SNAP: f64 = 1e-12;
const QUAD_REL_TOL: f64 = 1e-12;
const QUAD_ABS_TOL: f64 = 1e-15;
const QUAD_MAX_INTERVALS: usize = 4000;
const ORTHONORMAL_TOL: f64 = 1e-8;

fn check_ratio(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

/// Point masses at 0 and 1: `(max(β, η), max(1 − β − η, 0))`.
pub fn delta_masses(beta: f64, eta: f64) -> (f64, f64) {
    (beta.max(eta), (1.0 - (beta + eta)).max(0.0))
}

/// Branch-switch point `β + η − 2βη`.
pub fn branch_point(beta: f64, eta: f64) -> f64 {
    beta + eta - 2.0 * beta * eta
}

/// Bulk support edges `x_c ∓ √(x_c² − (β − η)²)`.
pub fn support_edges(beta: f64, eta: f64) -> (f64, f64) {
    let xc = branch_point(beta, eta);
    let d = beta - eta;
    let mut disc = xc * xc - d * d;
    if disc.abs() <= DISCRIMINANT_CLAMP {
        disc = 0.0;
    }
    let root = disc.max(0.0).sqrt();
    let mut lo = xc - root;
    let mut hi = xc + root;
    if lo.abs() <= EDGE_SNAP {
        lo = 0.0;
    }
    if (hi - 1.0).abs() <= EDGE_SNAP {
        hi = 1.0;
    }
    (lo.max(0.0), hi.min(1.0))
}

/// Closed-form law of `D̃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralLaw {
    pub beta: f64,
    pub eta: f64,
    pub f0: f64,
    pub f1: f64,
    pub x_l: f64,
    pub x_u: f64,
    pub x_c: f64,
}

impl SpectralLaw {
    pub fn new(beta: f64, eta: f64) -> Result<Self> {
        check_ratio("beta", beta)?;
        check_ratio("eta", eta)?;
        let (f0, f1) = delta_masses(beta, eta);
        let (x_l, x_u) = support_edges(beta, eta);
        Ok(Self {
            beta,
            eta,
            f0,
            f1,
            x_l,
            x_u,
            x_c: branch_point(beta, eta),
        })
    }

    /// Bulk density at `x`, zero outside `[x_l, x_u]`.
    pub fn density(&self, x: f64) -> f64 {
        if x < self.x_l || x > self.x_u || x <= 0.0 || x >= 1.0 {
            return 0.0;
        }
        let q = (x - self.x_l) * (self.x_u - x);
        q.max(0.0).sqrt() / (2.0 * PI * x * (1.0 - x))
    }

    /// Whether the bulk has positive width.
    pub fn has_bulk(&self) -> bool {
        self.x_u - self.x_l > 0.0
    }

    /// `∫ f_b(x) w(x) dx` over the bulk, where `w` receives `(x, 1 − x)`.
    ///
    /// With `x = m + r sin θ` the square-root edge factor becomes
    /// `r² (1 + sin θ)(1 − sin θ)`, which is smooth on `[−π/2, π/2]`. Both
    /// `x` and `1 − x` are rebuilt from edge offsets so that edges sitting
    /// exactly on 0 or 1 cancel the matching pole analytically.
    pub fn integrate_bulk<W: Fn(f64, f64) -> f64>(&self, weight: W, rel_tol: f64) -> Result<f64> {
        if !self.has_bulk() {
            return Ok(0.0);
        }
        let r = 0.5 * (self.x_u - self.x_l);
        let (x_l, gap_u) = (self.x_l, 1.0 - self.x_u);
        let integrand = |theta: f64| {
            let phase = 0.5 * theta + FRAC_PI_4;
            let a = 2.0 * r * phase.sin().powi(2);
            let b = 2.0 * r * phase.cos().powi(2);
            let x = x_l + a;
            let one_minus_x = gap_u + b;
            if x <= 0.0 || one_minus_x <= 0.0 {
                return 0.0;
            }
            a * b / (2.0 * PI * x * one_minus_x) * weight(x, one_minus_x)
        };
        Ok(quadrature::integrate(integrand, -FRAC_PI_2, FRAC_PI_2, rel_tol, QUAD_ABS_TOL, QUAD_MAX_INTERVALS)?.value)
    }

    /// Total mass of the continuous part.
    pub fn bulk_mass(&self) -> Result<f64> {
        self.integrate_bulk(|_, _| 1.0, QUAD_REL_TOL)
    }

    /// Bulk mass between `a` and `b`, clipped to the support.
    pub fn bulk_mass_between(&self, a: f64, b: f64) -> Result<f64> {
        let lo = a.max(self.x_l);
        let hi = b.min(self.x_u);
        if hi <= lo {
            return Ok(0.0);
        }
        let f = |x: f64| self.density(x);
        // Interior sub-intervals still carry the edge singularity of the
        // derivative; the adaptive rule handles that at this tolerance.
        Ok(quadrature::integrate(f, lo, hi, 1e-10, 1e-14, QUAD_MAX_INTERVALS)?.value)
    }

    /// Physical Stieltjes transform `∫ dμ(x) / (z − x)` including both point masses.
    pub fn stieltjes(&self, z: Complex64) -> Result<Complex64> {
        let branch = if z.re >= self.x_c { Branch::Plus } else { Branch::Minus };
        stieltjes_g(z, self.beta, self.eta, branch)
    }
}

/// Bulk density of `D̃` at `x ∈ (0, 1)`.
pub fn bulk_density(x: f64, beta: f64, eta: f64) -> Result<f64> {
    if !(x > 0.0 && x < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bulk density is defined on (0, 1) only, got x={x}"
        )));
    }
    Ok(SpectralLaw::new(beta, eta)?.density(x))
}

pub fn bulk_mass(beta: f64, eta: f64) -> Result<f64> {
    SpectralLaw::new(beta, eta)?.bulk_mass()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    Plus,
    Minus,
}

/// `G^±(z) = (z − (β+η) ± √((z − (β+η))² + 4βη(z − 1))) / (2(z² − z))`
/// with the principal square root.
///
/// The imaginary part of the radicand is `2 Im z (Re z − x_c)`, so the
/// principal root flips sign across `Re z = x_c`; [`SpectralLaw::stieltjes`]
/// picks `Plus` to the right of `x_c` and `Minus` to the left, which keeps
/// `G(z) ~ 1/z` at infinity and reproduces both point masses.
pub fn stieltjes_g(z: Complex64, beta: f64, eta: f64, branch: Branch) -> Result<Complex64> {
    if z == Complex64::new(0.0, 0.0) || z == Complex64::new(1.0, 0.0) {
        return Err(Error::Pole(format!("G has poles at 0 and 1, got z={z}")));
    }
    let s = beta + eta;
    let shifted = z - s;
    let root = (shifted * shifted + 4.0 * beta * eta * (z - 1.0)).sqrt();
    let num = match branch {
        Branch::Plus => shifted + root,
        Branch::Minus => shifted - root,
    };
    Ok(num / (2.0 * (z * z - z)))
}

/// Stieltjes transform of a single projector with mass `β` at 0: `(z − β)/(z² − z)`.
pub fn projector_g(z: Complex64, beta: f64) -> Result<Complex64> {
    if z == Complex64::new(0.0, 0.0) || z == Complex64::new(1.0, 0.0) {
        return Err(Error::Pole(format!("projector G has poles at 0 and 1, got z={z}")));
    }
    Ok((z - beta) / (z * z - z))
}

/// `S_𝒱(z) = (z + 1)/(z + 1 − β)`.
pub fn projector_s_transform(z: f64, beta: f64) -> Result<f64> {
    let den = z + 1.0 - beta;
    if den == 0.0 {
        return Err(Error::Pole(format!("S-transform pole at z = beta - 1 = {}", beta - 1.0)));
    }
    Ok((z + 1.0) / den)
}

/// `S_D̃(z) = (z + 1)² / ((z + 1 − β)(z + 1 − η))`.
pub fn product_s_transform(z: f64, beta: f64, eta: f64) -> Result<f64> {
    Ok(projector_s_transform(z, beta)? * projector_s_transform(z, eta)?)
}

/// Eigenvalues of `V⊥V⊥ᵀ U U ᵀ` in ascending order, computed as squared
/// singular values of the cross-Gram `V⊥ᵀU` and padded with zeros to `n`.
pub fn empirical_product_spectrum(vperp: MatRef<'_, f64>, uperp_d: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let n = vperp.nrows();
    if uperp_d.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "bases have {} and {} rows",
            n,
            uperp_d.nrows()
        )));
    }
    linalg::ensure_orthonormal(vperp, ORTHONORMAL_TOL)?;
    linalg::ensure_orthonormal(uperp_d, ORTHONORMAL_TOL)?;
    let cross = vperp.transpose() * uperp_d;
    let sv = linalg::singular_values(cross.as_ref())?;
    let mut eig = vec![0.0; n - sv.len()];
    eig.extend(sv.iter().map(|s| (s * s).clamp(0.0, 1.0)));
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn edges_examples() {
        let (lo, _) = support_edges(0.3, 0.3);
        assert_eq!(lo, 0.0);
        assert_eq!(support_edges(0.5, 0.5), (0.0, 1.0));
        let (lo, hi) = support_edges(0.1, 0.8);
        // x_c = 0.74, (β − η)² = 0.49, √(0.74² − 0.49) = 0.24
        assert_abs_diff_eq!(lo, 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(hi, 0.98, epsilon = 1e-12);
    }

    #[test]
    fn delta_examples() {
        assert_eq!(delta_masses(0.1, 0.8).0, 0.8);
        assert_abs_diff_eq!(delta_masses(0.1, 0.8).1, 0.1, epsilon = 1e-15);
        assert_eq!(delta_masses(0.2, 0.9), (0.9, 0.0));
        assert_eq!(delta_masses(0.0, 0.0), (0.0, 1.0));
    }

    #[test]
    fn density_examples() {
        assert_abs_diff_eq!(bulk_density(0.5, 0.5, 0.5).unwrap(), 1.0 / PI, epsilon = 1e-14);
        assert_eq!(bulk_density(0.2, 0.1, 0.8).unwrap(), 0.0);
        assert_eq!(bulk_density(0.99, 0.1, 0.8).unwrap(), 0.0);
        assert!(bulk_density(0.0, 0.1, 0.8).is_err());
        assert!(bulk_density(1.0, 0.1, 0.8).is_err());
    }

    #[test]
    fn density_matches_unfactored_formula() {
        let (b, e) = (0.1, 0.8);
        for i in 1..40 {
            let x = 0.5 + 0.48 * i as f64 / 40.0;
            let raw = (-(x - (b + e)).powi(2) - 4.0 * b * e * (x - 1.0)).max(0.0).sqrt() / (2.0 * PI * (x - x * x));
            assert_abs_diff_eq!(bulk_density(x, b, e).unwrap(), raw, epsilon = 1e-12);
        }
    }

    #[test]
    fn bulk_mass_examples() {
        assert_abs_diff_eq!(bulk_mass(0.5, 0.5).unwrap(), 0.5, epsilon = 1e-10);
        assert_abs_diff_eq!(bulk_mass(0.1, 0.8).unwrap(), 0.1, epsilon = 1e-10);
        assert_eq!(bulk_mass(0.0, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn stieltjes_examples() {
        let law = SpectralLaw::new(0.0, 0.0).unwrap();
        for z in [Complex64::new(2.0, 0.3), Complex64::new(-0.7, 0.1), Complex64::new(0.4, -2.0)] {
            let g = law.stieltjes(z).unwrap();
            assert!((g - 1.0 / (z - 1.0)).norm() < 1e-12, "z={z}");
        }
        let g = projector_g(Complex64::new(2.0, 0.0), 0.5).unwrap();
        assert_abs_diff_eq!(g.re, 0.75, epsilon = 1e-15);
        assert!(stieltjes_g(Complex64::new(0.0, 0.0), 0.1, 0.2, Branch::Plus).is_err());
        assert!(stieltjes_g(Complex64::new(1.0, 0.0), 0.1, 0.2, Branch::Minus).is_err());
    }

    #[test]
    fn stieltjes_inverts_to_density() {
        let law = SpectralLaw::new(0.1, 0.8).unwrap();
        for i in 0..20 {
            let x = law.x_l + (law.x_u - law.x_l) * (i as f64 + 0.5) / 20.0;
            let g = law.stieltjes(Complex64::new(x, 1e-6)).unwrap();
            assert!((-g.im / PI - law.density(x)).abs() < 1e-4, "x={x}");
        }
    }

    #[test]
    fn stieltjes_matches_two_point_law_for_projector() {
        // β = 0.3, η = 0: D̃ is a projector with masses 0.3 at 0 and 0.7 at 1.
        let law = SpectralLaw::new(0.3, 0.0).unwrap();
        for z in [Complex64::new(2.0, 0.5), Complex64::new(0.2, 0.4), Complex64::new(-1.0, -0.2)] {
            let direct = 0.3 / z + 0.7 / (z - 1.0);
            assert!((law.stieltjes(z).unwrap() - direct).norm() < 1e-12);
            assert!((projector_g(z, 0.3).unwrap() - direct).norm() < 1e-12);
        }
    }

    #[test]
    fn s_transform_examples() {
        for z in [-0.3, 0.0, 0.7, 4.0] {
            assert_eq!(projector_s_transform(z, 0.0).unwrap(), 1.0);
        }
        assert_eq!(projector_s_transform(0.0, 0.5).unwrap(), 2.0);
        assert!(projector_s_transform(-0.5, 0.5).is_err());
        for z in [0.1, 0.5, 2.0] {
            let expected = (z + 1.0_f64).powi(2) / ((z + 1.0 - 0.2) * (z + 1.0 - 0.7));
            assert_abs_diff_eq!(product_s_transform(z, 0.2, 0.7).unwrap(), expected, epsilon = 1e-14);
        }
    }

    #[test]
    fn r_transform_of_projector_is_consistent() {
        // R(y) = z − 1/y at y = G(z) against the closed form of a two-point law.
        let beta = 0.5;
        for z in [2.0, 3.5, -1.5] {
            let y = projector_g(Complex64::new(z, 0.0), beta).unwrap().re;
            let r = z - 1.0 / y;
            let closed = (y - 1.0 + ((y - 1.0).powi(2) + 4.0 * (1.0 - beta) * y).sqrt()) / (2.0 * y);
            assert_abs_diff_eq!(r, closed, epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_bases_give_projector_spectrum() {
        let q = faer::Mat::<f64>::identity(6, 6);
        let vperp = q.as_ref().subcols(2, 4);
        let eig = empirical_product_spectrum(vperp, vperp).unwrap();
        assert_eq!(eig, vec![0.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn empirical_spectrum_rejects_non_orthonormal() {
        let a = faer::Mat::from_fn(5, 2, |i, j| (i + j) as f64);
        let b = faer::Mat::<f64>::identity(5, 2);
        assert!(empirical_product_spectrum(a.as_ref(), b.as_ref()).is_err());
    }

    proptest! {
        #[test]
        fn law_is_symmetric_in_beta_eta(b in 0.0f64..1.0, e in 0.0f64..1.0) {
            let l1 = SpectralLaw::new(b, e).unwrap();
            let l2 = SpectralLaw::new(e, b).unwrap();
            prop_assert_eq!(l1.f0, l2.f0);
            prop_assert_eq!(l1.f1, l2.f1);
            prop_assert!((l1.x_l - l2.x_l).abs() < 1e-15 && (l1.x_u - l2.x_u).abs() < 1e-15);
            let x = 0.5 * (l1.x_l + l1.x_u);
            prop_assert!((l1.density(x) - l2.density(x)).abs() <= 1e-12 * (1.0 + l1.density(x)));
        }

        #[test]
        fn edges_are_ordered(b in 0.0f64..=1.0, e in 0.0f64..=1.0) {
            let law = SpectralLaw::new(b, e).unwrap();
            prop_assert!(0.0 <= law.x_l && law.x_l <= law.x_u && law.x_u <= 1.0);
            prop_assert!(law.x_l <= law.x_c + 1e-12 && law.x_c <= law.x_u + 1e-12);
        }

        #[test]
        fn law_is_normalized(b in 0.01f64..0.99, e in 0.01f64..0.99) {
            let law = SpectralLaw::new(b, e).unwrap();
            let total = law.f0 + law.f1 + law.bulk_mass().unwrap();
            prop_assert!((total - 1.0).abs() <= 1e-8, "total {}", total);
        }

        #[test]
        fn density_is_nonnegative(b in 0.0f64..1.0, e in 0.0f64..1.0, x in 1e-6f64..(1.0 - 1e-6)) {
            prop_assert!(bulk_density(x, b, e).unwrap() >= 0.0);
        }
    }
}
