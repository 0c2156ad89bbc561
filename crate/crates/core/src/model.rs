//! Problem instances: shapes, block masks, Haar factors, approximately
//! low-rank ground truths and masked observations.

use std::fmt;

use faer::{Mat, MatRef};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;

/// Side length `n`, dominant rank `k` and observed prefix `l` of a square
/// block-missing problem, with the ratios `beta = k/n` and `eta = l/n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemShape {
    pub n: usize,
    pub k: usize,
    pub l: usize,
    pub beta: f64,
    pub eta: f64,
}

impl ProblemShape {
    /// Number of unobserved rows (and columns) of the missing block.
    pub fn missing(&self) -> usize {
        self.n - self.l
    }

    pub fn tail_len(&self) -> usize {
        self.n - self.k
    }
}

pub fn make_shape(n: usize, k: usize, l: usize) -> Result<ProblemShape> {
    if n == 0 {
        return Err(Error::InvalidShape("n must be at least 1".into()));
    }
    if l > n {
        return Err(Error::InvalidShape(format!("l={l} exceeds n={n}")));
    }
    if k > l {
        return Err(Error::InvalidShape(format!(
            "rank k={k} exceeds observed prefix l={l} (theory requires k <= l)"
        )));
    }
    Ok(ProblemShape {
        n,
        k,
        l,
        beta: k as f64 / n as f64,
        eta: l as f64 / n as f64,
    })
}

/// Block observation pattern: entry `(i, j)` (0-based) is missing exactly
/// when `i >= l1` and `j >= l2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Mask {
    pub n_rows: usize,
    pub n_cols: usize,
    pub l1: usize,
    pub l2: usize,
}

impl Mask {
    #[inline]
    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        i < self.l1 || j < self.l2
    }

    /// Entry of the binary pattern: 1 observed, 0 missing.
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> u8 {
        u8::from(self.is_observed(i, j))
    }

    pub fn entries(&self) -> Mat<f64> {
        Mat::from_fn(self.n_rows, self.n_cols, |i, j| f64::from(self.entry(i, j)))
    }

    pub fn missing_count(&self) -> usize {
        (self.n_rows - self.l1) * (self.n_cols - self.l2)
    }
}

impl fmt::Display for Mask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n_rows {
            for j in 0..self.n_cols {
                write!(f, "{}", self.entry(i, j))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn build_mask(n: usize, l1: usize, l2: usize) -> Result<Mask> {
    if l1 > n || l2 > n {
        return Err(Error::InvalidShape(format!(
            "mask prefixes l1={l1}, l2={l2} must not exceed n={n}"
        )));
    }
    Ok(Mask {
        n_rows: n,
        n_cols: n,
        l1,
        l2,
    })
}

/// Haar-distributed `n x d` orthonormal basis: orthonormalize a standard
/// Gaussian matrix and flip column signs so that `R` has a positive diagonal.
pub fn sample_haar_basis<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Mat<f64>> {
    if d == 0 || d > n {
        return Err(Error::InvalidShape(format!(
            "Haar basis needs 1 <= d <= n, got n={n}, d={d}"
        )));
    }
    // Column-major fill keeps the draw order independent of faer internals.
    let mut g = Mat::<f64>::zeros(n, d);
    for j in 0..d {
        for i in 0..n {
            g[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let qr = g.qr();
    let mut q = qr.compute_thin_Q();
    let r = qr.thin_R();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..n {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    Ok(q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailProfile {
    Flat,
    Gaussian,
    Uniform,
}

impl TailProfile {
    pub fn as_str(&self) -> &'static str {
        match self {
            TailProfile::Flat => "flat",
            TailProfile::Gaussian => "gaussian",
            TailProfile::Uniform => "uniform",
        }
    }
}

impl std::str::FromStr for TailProfile {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flat" => Ok(TailProfile::Flat),
            "gaussian" => Ok(TailProfile::Gaussian),
            "uniform" => Ok(TailProfile::Uniform),
            other => Err(Error::InvalidArgument(format!(
                "unknown tail profile '{other}' (expected flat, gaussian or uniform)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorMode {
    /// `V = U`, the configuration that attains the worst-case residual.
    WorstCaseSymmetric,
    /// `U` and `V` drawn independently.
    Asymmetric,
}

impl FactorMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            FactorMode::WorstCaseSymmetric => "worst_case_symmetric",
            FactorMode::Asymmetric => "asymmetric",
        }
    }
}

impl std::str::FromStr for FactorMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "worst_case_symmetric" => Ok(FactorMode::WorstCaseSymmetric),
            "asymmetric" => Ok(FactorMode::Asymmetric),
            other => Err(Error::InvalidArgument(format!(
                "unknown factor mode '{other}' (expected worst_case_symmetric or asymmetric)"
            ))),
        }
    }
}

/// Dominant magnitude and tail description of the ground-truth spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSpec {
    pub sigma_mag: f64,
    pub sigma_eps: f64,
    pub tail_profile: TailProfile,
    /// Rescale the tail so that its Euclidean norm is `sqrt(n-k) * sigma_eps`.
    pub normalize_tail_norm: bool,
}

impl SpectrumSpec {
    pub fn flat(sigma_mag: f64, sigma_eps: f64) -> Self {
        Self {
            sigma_mag,
            sigma_eps,
            tail_profile: TailProfile::Flat,
            normalize_tail_norm: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_mag > 0.0 && self.sigma_mag.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma_mag must be positive, got {}",
                self.sigma_mag
            )));
        }
        if !(self.sigma_eps >= 0.0 && self.sigma_eps.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "sigma_eps must be nonnegative, got {}",
                self.sigma_eps
            )));
        }
        Ok(())
    }
}

/// `X_sol = U diag(sigma, eps_sigma) Vᵀ` together with its factors.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub shape: ProblemShape,
    pub u: Mat<f64>,
    pub v: Mat<f64>,
    pub sigma: Vec<f64>,
    pub eps_sigma: Vec<f64>,
    pub x_sol: Mat<f64>,
    pub symmetric_factors: bool,
}

impl GroundTruth {
    pub fn ubar(&self) -> MatRef<'_, f64> {
        self.u.as_ref().subcols(0, self.shape.k)
    }

    pub fn vbar(&self) -> MatRef<'_, f64> {
        self.v.as_ref().subcols(0, self.shape.k)
    }

    pub fn uperp(&self) -> MatRef<'_, f64> {
        self.u.as_ref().subcols(self.shape.k, self.shape.tail_len())
    }

    pub fn vperp(&self) -> MatRef<'_, f64> {
        self.v.as_ref().subcols(self.shape.k, self.shape.tail_len())
    }

    /// Full diagonal `(sigma, eps_sigma)` in block order.
    pub fn spectrum(&self) -> Vec<f64> {
        self.sigma.iter().chain(self.eps_sigma.iter()).copied().collect()
    }
}

fn draw_tail<R: Rng + ?Sized>(len: usize, spec: &SpectrumSpec, rng: &mut R) -> Result<Vec<f64>> {
    let mut tail: Vec<f64> = match spec.tail_profile {
        TailProfile::Flat => vec![spec.sigma_eps; len],
        TailProfile::Gaussian => (0..len)
            .map(|_| {
                let z: f64 = StandardNormal.sample(rng);
                spec.sigma_eps * z.abs()
            })
            .collect(),
        TailProfile::Uniform => (0..len).map(|_| spec.sigma_eps * rng.random::<f64>()).collect(),
    };
    if spec.normalize_tail_norm && len > 0 {
        let norm = tail.iter().map(|t| t * t).sum::<f64>().sqrt();
        let target = (len as f64).sqrt() * spec.sigma_eps;
        if target == 0.0 {
            tail.iter_mut().for_each(|t| *t = 0.0);
        } else if norm == 0.0 {
            return Err(Error::Degenerate("tail draw has zero norm".into()));
        } else {
            let scale = target / norm;
            tail.iter_mut().for_each(|t| *t *= scale);
        }
    }
    Ok(tail)
}

pub fn build_ground_truth<R: Rng + ?Sized>(
    shape: ProblemShape,
    spec: &SpectrumSpec,
    mode: FactorMode,
    rng: &mut R,
) -> Result<GroundTruth> {
    spec.validate()?;
    let n = shape.n;
    let k = shape.k;
    if k == n && spec.sigma_eps > 0.0 {
        return Err(Error::InvalidShape(format!(
            "k = n = {n} leaves no room for a tail with sigma_eps={}",
            spec.sigma_eps
        )));
    }
    let u = sample_haar_basis(n, n, rng)?;
    let v = match mode {
        FactorMode::WorstCaseSymmetric => u.clone(),
        FactorMode::Asymmetric => sample_haar_basis(n, n, rng)?,
    };
    let sigma = vec![spec.sigma_mag; k];
    let eps_sigma = draw_tail(n - k, spec, rng)?;
    let diag: Vec<f64> = sigma.iter().chain(eps_sigma.iter()).copied().collect();
    let scaled = Mat::from_fn(n, n, |i, j| u[(i, j)] * diag[j]);
    let x_sol = &scaled * v.transpose();
    Ok(GroundTruth {
        shape,
        u,
        v,
        sigma,
        eps_sigma,
        x_sol,
        symmetric_factors: mode == FactorMode::WorstCaseSymmetric,
    })
}

/// Masked data `Y = M ∘ X`.
#[derive(Debug, Clone)]
pub struct Observation {
    pub y: Mat<f64>,
    pub mask: Mask,
}

pub fn apply_mask(mask: &Mask, x: MatRef<'_, f64>) -> Result<Observation> {
    if x.nrows() != mask.n_rows || x.ncols() != mask.n_cols {
        return Err(Error::DimensionMismatch(format!(
            "mask is {}x{} but matrix is {}x{}",
            mask.n_rows,
            mask.n_cols,
            x.nrows(),
            x.ncols()
        )));
    }
    let y = Mat::from_fn(x.nrows(), x.ncols(), |i, j| {
        if mask.is_observed(i, j) {
            x[(i, j)]
        } else {
            0.0
        }
    });
    Ok(Observation { y, mask: *mask })
}

/// Relative reconstruction error of `U diag(sigma, eps) Vᵀ` against the stored `X_sol`.
pub fn reconstruction_error(gt: &GroundTruth) -> f64 {
    let diag = gt.spectrum();
    let n = gt.shape.n;
    let scaled = Mat::from_fn(n, n, |i, j| gt.u[(i, j)] * diag[j]);
    let rebuilt = &scaled * gt.v.transpose();
    let denom = gt.x_sol.norm_l2();
    let diff = &rebuilt - &gt.x_sol;
    if denom == 0.0 {
        diff.norm_l2()
    } else {
        diff.norm_l2() / denom
    }
}

/// Helper for callers that only need the orthonormality check.
pub fn basis_deviation(b: MatRef<'_, f64>) -> Result<f64> {
    linalg::orthonormality_deviation(b)
}
