//! Multivariate Gaussian beliefs and closed-form information quantities for
//! the conjugate location model `y = θ + x`, `x ~ N(0, Σ)`.
//!
//! Covariances carry their Cholesky factor; log-determinants and quadratic
//! forms come from the factor. A failed factorization is the only SPD test.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::InfoValue;

const SYMMETRY_TOL: f64 = 1e-10;

/// A symmetric positive-definite matrix with its Cholesky factorization.
#[derive(Debug, Clone)]
pub struct SpdMatrix {
    dense: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
}

impl SpdMatrix {
    pub fn new(dense: DMatrix<f64>) -> Result<Self> {
        if !dense.is_square() || dense.nrows() == 0 {
            return Err(Error::NotSpd(format!("matrix is {}x{}", dense.nrows(), dense.ncols())));
        }
        if dense.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotSpd("non-finite entry".into()));
        }
        let scale = dense.amax();
        let asym = (&dense - dense.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::NotSpd(format!("asymmetry {asym:e} exceeds tolerance")));
        }
        let chol = Cholesky::new(dense.clone())
            .ok_or_else(|| Error::NotSpd("Cholesky factorization failed".into()))?;
        Ok(SpdMatrix { dense, chol })
    }

    /// Symmetrize a computed matrix before factoring it.
    fn from_computed(m: DMatrix<f64>) -> Result<Self> {
        let sym = (&m + m.transpose()) * 0.5;
        SpdMatrix::new(sym)
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Result<Self> {
        SpdMatrix::new(DMatrix::identity(dim, dim) * scale)
    }

    pub fn dim(&self) -> usize {
        self.dense.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.dense
    }

    /// Lower Cholesky factor `L` with `M = L Lᵀ`.
    pub fn factor(&self) -> DMatrix<f64> {
        self.chol.l()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// `M⁻¹ v`
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(v)
    }

    /// `M⁻¹ B`
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn inverse(&self) -> DMatrix<f64> {
        self.chol.inverse()
    }

    /// `vᵀ M⁻¹ v`, computed as `‖L⁻¹ v‖²`.
    pub fn inv_quad_form(&self, v: &DVector<f64>) -> f64 {
        let w = self
            .chol
            .l_dirty()
            .solve_lower_triangular(v)
            .expect("Cholesky factor has a positive diagonal");
        w.norm_squared()
    }

    /// `tr(M⁻¹ B)`
    pub fn trace_solve(&self, b: &DMatrix<f64>) -> f64 {
        self.solve_matrix(b).trace()
    }
}

/// A multivariate normal belief `N(mean, cov)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "GaussianRepr", into = "GaussianRepr")]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: SpdMatrix,
}

#[derive(Serialize, Deserialize)]
struct GaussianRepr {
    mean: Vec<f64>,
    cov: Vec<Vec<f64>>,
}

impl TryFrom<GaussianRepr> for Gaussian {
    type Error = Error;
    fn try_from(repr: GaussianRepr) -> Result<Self> {
        Gaussian::from_rows(repr.mean, repr.cov)
    }
}

impl From<Gaussian> for GaussianRepr {
    fn from(g: Gaussian) -> Self {
        GaussianRepr { mean: g.mean.iter().copied().collect(), cov: matrix_rows(g.cov.matrix()) }
    }
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if let Some(bad) = rows.iter().find(|r| r.len() != m) {
        return Err(Error::DimensionMismatch { expected: m, found: bad.len() });
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

impl Gaussian {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let cov = SpdMatrix::new(cov)?;
        Gaussian::from_parts(mean, cov)
    }

    pub fn from_parts(mean: DVector<f64>, cov: SpdMatrix) -> Result<Self> {
        check_dim(cov.dim(), mean.len())?;
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDistribution("non-finite mean".into()));
        }
        Ok(Gaussian { mean, cov })
    }

    pub fn from_rows(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        Gaussian::new(DVector::from_vec(mean), matrix_from_rows(&cov)?)
    }

    /// `N(0, scale·I)`
    pub fn isotropic(dim: usize, variance: f64) -> Result<Self> {
        Gaussian::from_parts(DVector::zeros(dim), SpdMatrix::scaled_identity(dim, variance)?)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &SpdMatrix {
        &self.cov
    }

    pub fn with_mean(&self, mean: DVector<f64>) -> Result<Self> {
        Gaussian::from_parts(mean, self.cov.clone())
    }

    pub fn log_pdf(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(self.dim(), x.len())?;
        let d = self.dim() as f64;
        let r = x - &self.mean;
        Ok(-0.5 * (d * (2.0 * std::f64::consts::PI).ln() + self.cov.log_det() + self.cov.inv_quad_form(&r)))
    }

    /// `E[ln N(z | self)]` for `z` distributed as `view`.
    pub fn expected_log_pdf(&self, view: &Gaussian) -> Result<f64> {
        check_dim(self.dim(), view.dim())?;
        let d = self.dim() as f64;
        let r = &view.mean - &self.mean;
        Ok(-0.5
            * (d * (2.0 * std::f64::consts::PI).ln()
                + self.cov.log_det()
                + self.cov.trace_solve(view.cov.matrix())
                + self.cov.inv_quad_form(&r)))
    }
}

/// Sampling model `y = θ + x` with `x ~ N(0, Σ)`.
#[derive(Debug, Clone)]
pub struct LocationModel {
    noise_cov: SpdMatrix,
}

impl LocationModel {
    pub fn new(noise_cov: DMatrix<f64>) -> Result<Self> {
        Ok(LocationModel { noise_cov: SpdMatrix::new(noise_cov)? })
    }

    /// `Σ = σ²·I`
    pub fn isotropic(dim: usize, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::NotSpd(format!("noise scale must be positive, got {sigma}")));
        }
        Ok(LocationModel { noise_cov: SpdMatrix::scaled_identity(dim, sigma * sigma)? })
    }

    pub fn noise_cov(&self) -> &SpdMatrix {
        &self.noise_cov
    }

    pub fn dim(&self) -> usize {
        self.noise_cov.dim()
    }
}

/// Conjugate update with a real-valued effective sample count `weight ≥ 0`.
///
/// Precision `A⁻¹ + w·Σ⁻¹`, mean `B(A⁻¹μ_A + w·Σ⁻¹ȳ)`. A zero weight returns
/// the prior unchanged.
pub(crate) fn conjugate_update(
    prior: &Gaussian,
    model: &LocationModel,
    weight: f64,
    sample_mean: &DVector<f64>,
) -> Result<Gaussian> {
    check_dim(prior.dim(), model.dim())?;
    check_dim(prior.dim(), sample_mean.len())?;
    if weight == 0.0 {
        return Ok(prior.clone());
    }
    let precision = prior.cov.inverse() + model.noise_cov.inverse() * weight;
    let precision = SpdMatrix::from_computed(precision)?;
    let rhs = prior.cov.solve(&prior.mean) + model.noise_cov.solve(sample_mean) * weight;
    let mean = precision.solve(&rhs);
    let cov = SpdMatrix::from_computed(precision.inverse())?;
    Gaussian::from_parts(mean, cov)
}

/// Posterior after observing `n` samples with average `sample_mean`.
pub fn posterior(prior: &Gaussian, model: &LocationModel, n: usize, sample_mean: &DVector<f64>) -> Result<Gaussian> {
    if n == 0 {
        return Err(Error::InvalidCount("posterior needs at least one sample".into()));
    }
    conjugate_update(prior, model, n as f64, sample_mean)
}

/// Mutual information between θ and the mean of `n` samples:
/// `½ ln det(nΣ⁻¹A + I)`, evaluated as `½(ln det(nA + Σ) − ln det Σ)`.
pub fn mutual_info_gaussian(prior: &Gaussian, model: &LocationModel, n: usize) -> Result<InfoValue> {
    check_dim(prior.dim(), model.dim())?;
    if n == 0 {
        return Ok(InfoValue::ZERO);
    }
    let sum = SpdMatrix::from_computed(prior.cov.matrix() * n as f64 + model.noise_cov.matrix())?;
    Ok(InfoValue::from_nats(0.5 * (sum.log_det() - model.noise_cov.log_det())))
}

/// Distribution of the mean of `n` new samples: `N(μ_A, A + Σ/n)`.
pub fn predictive(prior: &Gaussian, model: &LocationModel, n: usize) -> Result<Gaussian> {
    check_dim(prior.dim(), model.dim())?;
    if n == 0 {
        return Err(Error::InvalidCount("predictive needs at least one sample".into()));
    }
    let cov = SpdMatrix::from_computed(prior.cov.matrix() + model.noise_cov.matrix() / n as f64)?;
    Gaussian::from_parts(prior.mean.clone(), cov)
}

/// Information from `q0 = N(μ_A, A)` to `q1 = N(μ, B)` in the view `N(ν, C)`:
///
/// ```text
/// ½( ln det(A B⁻¹) + tr((A⁻¹ − B⁻¹) C) + (ν−μ_A)ᵀA⁻¹(ν−μ_A) − (ν−μ)ᵀB⁻¹(ν−μ) )
/// ```
pub fn info_gaussian_view(view: &Gaussian, q1: &Gaussian, q0: &Gaussian) -> Result<InfoValue> {
    check_dim(view.dim(), q1.dim())?;
    check_dim(view.dim(), q0.dim())?;
    let c = view.cov.matrix();
    let to_q0 = &view.mean - &q0.mean;
    let to_q1 = &view.mean - &q1.mean;
    let value = 0.5
        * ((q0.cov.log_det() - q1.cov.log_det()) + (q0.cov.trace_solve(c) - q1.cov.trace_solve(c))
            + (q0.cov.inv_quad_form(&to_q0) - q1.cov.inv_quad_form(&to_q1)));
    Ok(InfoValue::from_nats(value))
}

/// KL divergence of `q1` from `q0`.
pub fn kl_gaussian(q1: &Gaussian, q0: &Gaussian) -> Result<InfoValue> {
    info_gaussian_view(q1, q1, q0)
}

/// Information from `q0` to `q1` once θ is known exactly: the log density ratio at θ.
pub fn realization_limit_info(theta: &DVector<f64>, q1: &Gaussian, q0: &Gaussian) -> Result<InfoValue> {
    check_dim(q1.dim(), q0.dim())?;
    check_dim(q1.dim(), theta.len())?;
    let value = 0.5
        * ((q0.cov.log_det() - q1.cov.log_det()) + q0.cov.inv_quad_form(&(theta - &q0.mean))
            - q1.cov.inv_quad_form(&(theta - &q1.mean)));
    Ok(InfoValue::from_nats(value))
}
