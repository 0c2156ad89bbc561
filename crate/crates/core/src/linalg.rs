//! Thin wrappers over the dense kernels used throughout the crate.
//!
//! All factorizations run sequentially, so results are bitwise reproducible
//! for a fixed input independent of how many harness threads are active.

use faer::{Mat, MatRef, Side};

use crate::error::{Error, Result};

/// Thin SVD `A = U diag(s) Vᵀ` with `s` sorted in nonincreasing order.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub u: Mat<f64>,
    pub s: Vec<f64>,
    pub v: Mat<f64>,
}

impl ThinSvd {
    /// Rebuilds `U diag(s') Vᵀ` with a replacement spectrum.
    pub fn compose(&self, spectrum: &[f64]) -> Mat<f64> {
        debug_assert_eq!(spectrum.len(), self.s.len());
        let scaled = Mat::from_fn(self.u.nrows(), self.u.ncols(), |i, j| {
            self.u[(i, j)] * spectrum[j]
        });
        &scaled * self.v.transpose()
    }
}

pub fn thin_svd(a: MatRef<'_, f64>) -> Result<ThinSvd> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(ThinSvd {
            u: Mat::zeros(m, 0),
            s: Vec::new(),
            v: Mat::zeros(n, 0),
        });
    }
    let err = |e| Error::LinearAlgebra(format!("svd of {m}x{n} matrix: {e:?}"));
    match a.thin_svd() {
        Ok(svd) => Ok(ThinSvd {
            u: svd.U().to_owned(),
            s: svd.S().column_vector().iter().copied().collect(),
            v: svd.V().to_owned(),
        }),
        // The bidiagonal sweep occasionally stalls on tightly clustered
        // spectra; the transposed problem takes a different path.
        Err(_) => {
            let svd = a.transpose().to_owned().thin_svd().map_err(err)?;
            Ok(ThinSvd {
                u: svd.V().to_owned(),
                s: svd.S().column_vector().iter().copied().collect(),
                v: svd.U().to_owned(),
            })
        }
    }
}

/// Singular values in nonincreasing order; empty for an empty matrix.
pub fn singular_values(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok(Vec::new());
    }
    a.singular_values()
        .or_else(|_| a.transpose().to_owned().singular_values())
        .map_err(|e| Error::LinearAlgebra(format!("singular values of {m}x{n} matrix: {e:?}")))
}

/// Eigenvalues of a symmetric matrix in nondecreasing order.
pub fn sym_eigenvalues(a: MatRef<'_, f64>) -> Result<Vec<f64>> {
    if a.nrows() != a.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "symmetric eigenproblem needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.nrows() == 0 {
        return Ok(Vec::new());
    }
    a.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::LinearAlgebra(format!("symmetric eigenvalues: {e:?}")))
}

/// Largest singular value (0 for an empty matrix).
pub fn operator_norm(a: MatRef<'_, f64>) -> Result<f64> {
    Ok(singular_values(a)?.first().copied().unwrap_or(0.0))
}

/// Sum of singular values.
pub fn nuclear_norm(a: MatRef<'_, f64>) -> Result<f64> {
    Ok(singular_values(a)?.iter().sum())
}

/// `‖BᵀB − I‖₂` for a basis stored column-wise.
pub fn orthonormality_deviation(basis: MatRef<'_, f64>) -> Result<f64> {
    let d = basis.ncols();
    let mut gram = basis.transpose() * basis;
    for i in 0..d {
        gram[(i, i)] -= 1.0;
    }
    // Frobenius bounds the operator norm from above; skip the eigensolve when it is already tiny.
    let frob = gram.norm_l2();
    if frob <= 1e-13 {
        return Ok(frob);
    }
    let eig = sym_eigenvalues(gram.as_ref())?;
    Ok(eig.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// Rejects a basis whose operator deviation from orthonormality exceeds `tol`.
pub fn ensure_orthonormal(basis: MatRef<'_, f64>, tol: f64) -> Result<()> {
    let d = basis.ncols();
    if d == 0 {
        return Ok(());
    }
    let mut gram = basis.transpose() * basis;
    for i in 0..d {
        gram[(i, i)] -= 1.0;
    }
    if gram.norm_l2() <= tol {
        return Ok(());
    }
    let eig = sym_eigenvalues(gram.as_ref())?;
    let deviation = eig.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if deviation > tol {
        return Err(Error::NotOrthonormal {
            deviation,
            tolerance: tol,
        });
    }
    Ok(())
}

/// Rows `start..` of `a`, copied.
pub fn bottom_rows(a: MatRef<'_, f64>, start: usize) -> Mat<f64> {
    a.subrows(start, a.nrows() - start).to_owned()
}

/// Columns `start..start+count` of `a`, copied.
pub fn columns(a: MatRef<'_, f64>, start: usize, count: usize) -> Mat<f64> {
    a.subcols(start, count).to_owned()
}

/// Moore–Penrose pseudo-inverse with singular values below
/// `rel_cutoff · σ_max` treated as zero.
pub fn pseudo_inverse(a: MatRef<'_, f64>, rel_cutoff: f64) -> Result<Mat<f64>> {
    let svd = thin_svd(a)?;
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let inv: Vec<f64> = svd
        .s
        .iter()
        .map(|&s| if s > rel_cutoff * smax && s > 0.0 { 1.0 / s } else { 0.0 })
        .collect();
    let scaled = Mat::from_fn(svd.v.nrows(), svd.v.ncols(), |i, j| svd.v[(i, j)] * inv[j]);
    Ok(&scaled * svd.u.transpose())
}

pub fn max_abs_diff(a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    let mut m = 0.0_f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    m
}
