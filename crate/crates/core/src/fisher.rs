//! Generalized Fisher score and matrix: the gradient and Hessian in θ of
//! `info(view, P(·|θ), q0)` for a parametric family `P(·|θ)`.
//!
//! The reference `q0` only contributes a θ-independent term, so both
//! quantities are computed from the cross term `E_view[ln P(x|θ)]`. The
//! Hessian is reported as is; for a Gaussian location family it equals
//! `−Σ⁻¹`, the negation of the classical Fisher information.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{self, Gaussian, SpdMatrix};
use crate::measures::{self, BeliefWeights, Categorical, CompensatedSum};

/// A belief over the observable space.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Belief {
    Categorical(Categorical),
    Gaussian(Gaussian),
}

/// The reference belief `q0`.
#[derive(Debug, Clone)]
pub enum Reference {
    Weights(BeliefWeights),
    Gaussian(Gaussian),
    /// Improper uniform reference over a continuous space.
    Flat,
}

pub trait ParametricFamily: Sync {
    fn param_dim(&self) -> usize;

    fn evaluate(&self, theta: &[f64]) -> Result<Belief>;

    /// Closed-form gradient of `E_view[ln P(x|θ)]`, when available.
    fn analytic_score(&self, _view: &Belief, _theta: &[f64]) -> Option<Result<Vec<f64>>> {
        None
    }

    /// Closed-form Hessian of `E_view[ln P(x|θ)]`, when available.
    fn analytic_hessian(&self, _view: &Belief, _theta: &[f64]) -> Option<Result<DMatrix<f64>>> {
        None
    }
}

/// `N(θ, Σ)` with fixed noise covariance.
#[derive(Debug, Clone)]
pub struct GaussianLocationFamily {
    noise_cov: SpdMatrix,
}

impl GaussianLocationFamily {
    pub fn new(noise_cov: SpdMatrix) -> Self {
        GaussianLocationFamily { noise_cov }
    }

    fn gaussian_view<'a>(&self, view: &'a Belief) -> Result<&'a Gaussian> {
        match view {
            Belief::Gaussian(g) if g.dim() == self.noise_cov.dim() => Ok(g),
            Belief::Gaussian(g) => Err(Error::DimensionMismatch { expected: self.noise_cov.dim(), found: g.dim() }),
            Belief::Categorical(_) => {
                Err(Error::EvaluationFailure("Gaussian location family needs a Gaussian view".into()))
            }
        }
    }
}

impl ParametricFamily for GaussianLocationFamily {
    fn param_dim(&self) -> usize {
        self.noise_cov.dim()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Belief> {
        Ok(Belief::Gaussian(Gaussian::from_parts(DVector::from_column_slice(theta), self.noise_cov.clone())?))
    }

    fn analytic_score(&self, view: &Belief, theta: &[f64]) -> Option<Result<Vec<f64>>> {
        Some(self.gaussian_view(view).map(|v| {
            let offset = v.mean() - DVector::from_column_slice(theta);
            self.noise_cov.solve(&offset).iter().copied().collect()
        }))
    }

    fn analytic_hessian(&self, view: &Belief, _theta: &[f64]) -> Option<Result<DMatrix<f64>>> {
        Some(self.gaussian_view(view).map(|_| -self.noise_cov.inverse()))
    }
}

/// `P(x|θ) ∝ exp(Σ_j θ_j K[j][x])` over a finite outcome set.
#[derive(Debug, Clone)]
pub struct CategoricalSoftmaxFamily {
    kernel: Vec<Vec<f64>>,
}

impl CategoricalSoftmaxFamily {
    /// `kernel` has one row per parameter and one column per outcome.
    pub fn new(kernel: Vec<Vec<f64>>) -> Result<Self> {
        let outcomes = kernel.first().map_or(0, Vec::len);
        if kernel.is_empty() || outcomes == 0 {
            return Err(Error::EmptyInput);
        }
        if let Some(row) = kernel.iter().find(|r| r.len() != outcomes) {
            return Err(Error::DimensionMismatch { expected: outcomes, found: row.len() });
        }
        if kernel.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("softmax kernel entries must be finite".into()));
        }
        Ok(CategoricalSoftmaxFamily { kernel })
    }

    pub fn outcomes(&self) -> usize {
        self.kernel[0].len()
    }
}

impl ParametricFamily for CategoricalSoftmaxFamily {
    fn param_dim(&self) -> usize {
        self.kernel.len()
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Belief> {
        let logits: Vec<f64> = (0..self.outcomes())
            .map(|x| self.kernel.iter().zip(theta).map(|(row, t)| t * row[x]).sum::<f64>())
            .collect();
        let shift = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !shift.is_finite() {
            return Err(Error::EvaluationFailure(format!("non-finite logits at θ = {theta:?}")));
        }
        let w: Vec<f64> = logits.iter().map(|l| (l - shift).exp()).collect();
        let z = measures::compensated_sum(w.iter().copied());
        Ok(Belief::Categorical(Categorical::new(w.into_iter().map(|v| v / z).collect())?))
    }
}

/// Adapter turning a closure into a family.
pub struct FnFamily<F> {
    dim: usize,
    f: F,
}

impl<F> FnFamily<F>
where
    F: Fn(&[f64]) -> Result<Belief> + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnFamily { dim, f }
    }
}

impl<F> ParametricFamily for FnFamily<F>
where
    F: Fn(&[f64]) -> Result<Belief> + Sync,
{
    fn param_dim(&self) -> usize {
        self.dim
    }

    fn evaluate(&self, theta: &[f64]) -> Result<Belief> {
        (self.f)(theta)
    }
}

/// JSON family registry entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FamilySpec {
    GaussianLocation { noise_cov: Vec<Vec<f64>> },
    CategoricalSoftmax { kernel: Vec<Vec<f64>> },
}

impl FamilySpec {
    pub fn build(&self) -> Result<Box<dyn ParametricFamily>> {
        Ok(match self {
            FamilySpec::GaussianLocation { noise_cov } => Box::new(GaussianLocationFamily::new(SpdMatrix::new(
                gaussian::matrix_from_rows(noise_cov)?,
            )?)),
            FamilySpec::CategoricalSoftmax { kernel } => Box::new(CategoricalSoftmaxFamily::new(kernel.clone())?),
        })
    }
}

/// `E_view[ln P(x)]`; must be finite.
fn cross_term(view: &Belief, model: &Belief) -> Result<f64> {
    let value = match (view, model) {
        (Belief::Categorical(v), Belief::Categorical(p)) => {
            if v.len() != p.len() {
                return Err(Error::SupportMismatch { expected: v.len(), found: p.len() });
            }
            let mut acc = CompensatedSum::new();
            for (&vi, &pi) in v.probs().iter().zip(p.probs()) {
                if vi > 0.0 {
                    acc.add(vi * pi.ln());
                }
            }
            acc.total()
        }
        (Belief::Gaussian(v), Belief::Gaussian(p)) => p.expected_log_pdf(v)?,
        _ => return Err(Error::EvaluationFailure("view and family live on different spaces".into())),
    };
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteInfo)
    }
}

/// Checks `info(view, P(·|θ), q0)` is finite at the base point.
fn validate(view: &Belief, model: &Belief, q0: &Reference) -> Result<()> {
    let finite = match (view, model, q0) {
        (Belief::Categorical(v), Belief::Categorical(p), Reference::Weights(w)) => {
            measures::info(v, &p.to_weights(), w)?.is_finite()
        }
        (Belief::Gaussian(v), Belief::Gaussian(p), Reference::Gaussian(g)) => {
            gaussian::info_gaussian_view(v, p, g)?.is_finite()
        }
        (_, _, Reference::Flat) => cross_term(view, model)?.is_finite(),
        _ => return Err(Error::EvaluationFailure("reference does not match the family's space".into())),
    };
    if finite {
        Ok(())
    } else {
        Err(Error::NonFiniteInfo)
    }
}

fn check_theta(family: &dyn ParametricFamily, theta: &[f64]) -> Result<()> {
    if theta.len() != family.param_dim() {
        return Err(Error::DimensionMismatch { expected: family.param_dim(), found: theta.len() });
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::EvaluationFailure("θ must be finite".into()));
    }
    Ok(())
}

fn prepare(view: &Belief, family: &dyn ParametricFamily, q0: &Reference, theta: &[f64]) -> Result<()> {
    check_theta(family, theta)?;
    validate(view, &family.evaluate(theta)?, q0)
}

/// Cross term at `θ + Σ offsets`.
fn cross_at(view: &Belief, family: &dyn ParametricFamily, theta: &[f64], offsets: &[(usize, f64)]) -> Result<f64> {
    let mut t = theta.to_vec();
    for &(j, d) in offsets {
        t[j] += d;
    }
    cross_term(view, &family.evaluate(&t)?)
}

/// Step `h·max(1, |θ_j|)` rounded so that `θ_j ± h` is exact.
fn step(theta_j: f64, base: f64) -> f64 {
    let h = base * theta_j.abs().max(1.0);
    (theta_j + h) - theta_j
}

/// Gradient by central differences with step `cbrt(ε)·max(1, |θ_j|)`.
pub fn finite_difference_score(
    view: &Belief,
    family: &dyn ParametricFamily,
    q0: &Reference,
    theta: &[f64],
) -> Result<Vec<f64>> {
    prepare(view, family, q0, theta)?;
    let base = f64::EPSILON.cbrt();
    (0..theta.len())
        .map(|j| {
            let h = step(theta[j], base);
            let plus = cross_at(view, family, theta, &[(j, h)])?;
            let minus = cross_at(view, family, theta, &[(j, -h)])?;
            Ok((plus - minus) / (2.0 * h))
        })
        .collect()
}

fn second_differences(
    view: &Belief,
    family: &dyn ParametricFamily,
    theta: &[f64],
    steps: &[f64],
    center: f64,
) -> Result<DMatrix<f64>> {
    let m = theta.len();
    let mut out = DMatrix::zeros(m, m);
    for a in 0..m {
        let ha = steps[a];
        let plus = cross_at(view, family, theta, &[(a, ha)])?;
        let minus = cross_at(view, family, theta, &[(a, -ha)])?;
        out[(a, a)] = (plus - 2.0 * center + minus) / (ha * ha);
        for b in (a + 1)..m {
            let hb = steps[b];
            let pp = cross_at(view, family, theta, &[(a, ha), (b, hb)])?;
            let pm = cross_at(view, family, theta, &[(a, ha), (b, -hb)])?;
            let mp = cross_at(view, family, theta, &[(a, -ha), (b, hb)])?;
            let mm = cross_at(view, family, theta, &[(a, -ha), (b, -hb)])?;
            let v = (pp - pm - mp + mm) / (4.0 * ha * hb);
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}

/// Hessian by second central differences at steps `h` and `h/2`, combined by
/// Richardson extrapolation. `h = ε^⅙·max(1, |θ_j|)` balances the fourth-order
/// truncation error of the extrapolated estimate against rounding.
pub fn finite_difference_matrix(
    view: &Belief,
    family: &dyn ParametricFamily,
    q0: &Reference,
    theta: &[f64],
) -> Result<DMatrix<f64>> {
    prepare(view, family, q0, theta)?;
    let center = cross_at(view, family, theta, &[])?;
    let base = f64::EPSILON.powf(1.0 / 6.0);
    let coarse: Vec<f64> = theta.iter().map(|t| step(*t, base)).collect();
    let fine: Vec<f64> = theta.iter().map(|t| step(*t, 0.5 * base)).collect();
    let h1 = second_differences(view, family, theta, &coarse, center)?;
    let h2 = second_differences(view, family, theta, &fine, center)?;
    Ok((h2 * 4.0 - h1) / 3.0)
}

/// Generalized Fisher score; closed form when the family provides one.
pub fn fisher_score(
    view: &Belief,
    family: &dyn ParametricFamily,
    q0: &Reference,
    theta: &[f64],
) -> Result<Vec<f64>> {
    check_theta(family, theta)?;
    match family.analytic_score(view, theta) {
        Some(score) => {
            prepare(view, family, q0, theta)?;
            score
        }
        None => finite_difference_score(view, family, q0, theta),
    }
}

/// Generalized Fisher matrix; closed form when the family provides one.
pub fn fisher_matrix(
    view: &Belief,
    family: &dyn ParametricFamily,
    q0: &Reference,
    theta: &[f64],
) -> Result<DMatrix<f64>> {
    check_theta(family, theta)?;
    match family.analytic_hessian(view, theta) {
        Some(hessian) => {
            prepare(view, family, q0, theta)?;
            hessian
        }
        None => finite_difference_matrix(view, family, q0, theta),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_family(var: f64) -> GaussianLocationFamily {
        GaussianLocationFamily::new(SpdMatrix::scaled_identity(1, var).unwrap())
    }

    fn scalar_view(mean: f64, var: f64) -> Belief {
        Belief::Gaussian(Gaussian::from_rows(vec![mean], vec![vec![var]]).unwrap())
    }

    #[test]
    fn gaussian_score_and_matrix() {
        let fam = scalar_family(0.49);
        let view = scalar_view(1.3, 0.49);
        let s = fisher_score(&view, &fam, &Reference::Flat, &[0.2]).unwrap();
        assert!((s[0] - 1.1 / 0.49).abs() < 1e-12);
        let at_opt = fisher_score(&view, &fam, &Reference::Flat, &[1.3]).unwrap();
        assert_eq!(at_opt[0], 0.0);
        let h = fisher_matrix(&view, &fam, &Reference::Flat, &[1.3]).unwrap();
        assert!((h[(0, 0)] + 1.0 / 0.49).abs() < 1e-12);

        let fd = finite_difference_score(&view, &fam, &Reference::Flat, &[0.2]).unwrap();
        assert!((fd[0] - s[0]).abs() < 1e-8);
        let fdh = finite_difference_matrix(&view, &fam, &Reference::Flat, &[1.3]).unwrap();
        assert!((fdh[(0, 0)] - h[(0, 0)]).abs() < 1e-6 * h[(0, 0)].abs());
    }

    #[test]
    fn two_dim_location_matrix() {
        let fam = GaussianLocationFamily::new(SpdMatrix::scaled_identity(2, 0.25).unwrap());
        let view = Belief::Gaussian(Gaussian::from_rows(vec![0.5, -1.0], vec![vec![0.25, 0.0], vec![0.0, 0.25]]).unwrap());
        let q0 = Reference::Gaussian(Gaussian::isotropic(2, 1.0).unwrap());
        let h = fisher_matrix(&view, &fam, &q0, &[0.5, -1.0]).unwrap();
        assert!((h + DMatrix::identity(2, 2) * 4.0).amax() < 1e-12);
        let fd = finite_difference_matrix(&view, &fam, &q0, &[0.5, -1.0]).unwrap();
        assert!((fd + DMatrix::identity(2, 2) * 4.0).amax() < 1e-6);
    }

    #[test]
    fn softmax_matches_closed_form() {
        let kernel = vec![vec![1.0, 0.0, -1.0, 2.0], vec![0.5, 1.0, 0.0, -0.5]];
        let fam = CategoricalSoftmaxFamily::new(kernel.clone()).unwrap();
        let view = Belief::Categorical(Categorical::new(vec![0.1, 0.4, 0.3, 0.2]).unwrap());
        let q0 = Reference::Weights(BeliefWeights::unit(4).unwrap());
        let theta = [0.3, -0.7];
        let Belief::Categorical(p) = fam.evaluate(&theta).unwrap() else { unreachable!() };
        let Belief::Categorical(v) = &view else { unreachable!() };
        // score = E_view[K] − E_P[K]; Hessian = −Cov_P[K]
        let s = fisher_score(&view, &fam, &q0, &theta).unwrap();
        for j in 0..2 {
            let expected = v.expect(&kernel[j]).unwrap() - p.expect(&kernel[j]).unwrap();
            assert!((s[j] - expected).abs() < 1e-9, "{} vs {expected}", s[j]);
        }
        let h = fisher_matrix(&view, &fam, &q0, &theta).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                let ka = p.expect(&kernel[a]).unwrap();
                let kb = p.expect(&kernel[b]).unwrap();
                let prod: Vec<f64> = (0..4).map(|x| (kernel[a][x] - ka) * (kernel[b][x] - kb)).collect();
                let expected = -p.expect(&prod).unwrap();
                assert!((h[(a, b)] - expected).abs() < 1e-7, "{} vs {expected}", h[(a, b)]);
            }
        }
        assert_eq!(h[(0, 1)], h[(1, 0)]);
    }

    #[test]
    fn reference_scaling_does_not_matter() {
        let fam = CategoricalSoftmaxFamily::new(vec![vec![1.0, 2.0, 3.0]]).unwrap();
        let view = Belief::Categorical(Categorical::new(vec![0.2, 0.5, 0.3]).unwrap());
        let w = BeliefWeights::new(vec![0.3, 0.3, 0.4]).unwrap();
        let a = fisher_score(&view, &fam, &Reference::Weights(w.clone()), &[0.4]).unwrap();
        let b = fisher_score(&view, &fam, &Reference::Weights(w.scaled(17.0).unwrap()), &[0.4]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        let fam = scalar_family(1.0);
        let view = scalar_view(0.0, 1.0);
        assert!(matches!(
            fisher_score(&view, &fam, &Reference::Flat, &[0.0, 1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
        let cat = Belief::Categorical(Categorical::uniform(2).unwrap());
        assert!(matches!(fisher_score(&cat, &fam, &Reference::Flat, &[0.0]), Err(Error::EvaluationFailure(_))));

        // view puts mass where q0 vanishes: info is infinite
        let soft = CategoricalSoftmaxFamily::new(vec![vec![0.0, 1.0]]).unwrap();
        let q0 = Reference::Weights(BeliefWeights::new(vec![1.0, 0.0]).unwrap());
        let view = Belief::Categorical(Categorical::new(vec![0.5, 0.5]).unwrap());
        assert!(matches!(fisher_score(&view, &soft, &q0, &[0.0]), Err(Error::NonFiniteInfo)));

        let failing = FnFamily::new(1, |_t: &[f64]| Err(Error::EvaluationFailure("boom".into())));
        assert!(matches!(
            finite_difference_score(&view, &failing, &Reference::Flat, &[0.0]),
            Err(Error::EvaluationFailure(_))
        ));
    }

    #[test]
    fn registry_round_trip() {
        let spec: FamilySpec =
            serde_json::from_str(r#"{"family":"gaussian-location","noise_cov":[[0.25,0],[0,0.25]]}"#).unwrap();
        assert_eq!(spec.build().unwrap().param_dim(), 2);
        let spec: FamilySpec =
            serde_json::from_str(r#"{"family":"categorical-softmax","kernel":[[1,2,3]]}"#).unwrap();
        assert_eq!(spec.build().unwrap().param_dim(), 1);
    }
}
