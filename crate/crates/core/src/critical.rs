//! Information-critical distributions and information-annealed inference.
//!
//! Among all distributions `r` meeting expectation constraints
//! `E_r[f_i] = φ_i`, the one minimizing `info(r, r, q0)` is the exponential
//! tilt `r ∝ q0 · exp(Σ λ_i f_i)`. With unit weights for `q0` this is the
//! maximum-entropy distribution.
//!
//! The multipliers are found by damped Newton on the convex dual
//! `ln Z(λ) = ln Σ q0 · exp(Σ λ_i (f_i − φ_i))`, whose gradient is the
//! constraint residual and whose Hessian is the covariance of the centered
//! kernels under the current tilt.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{self, Gaussian, LocationModel};
use crate::measures::{self, BeliefWeights, Categorical, CompensatedSum};

/// Default constraint residual tolerance (∞-norm).
pub const DEFAULT_TOL: f64 = 1e-10;
pub const MAX_ITERATIONS: usize = 200;
/// Multiplier norm beyond which the constraints are declared infeasible.
pub const MAX_MULTIPLIER_NORM: f64 = 1e6;

/// `E_r[kernel] = target`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationConstraint {
    pub kernel: Vec<f64>,
    pub target: f64,
}

impl ExpectationConstraint {
    pub fn new(kernel: Vec<f64>, target: f64) -> Self {
        ExpectationConstraint { kernel, target }
    }
}

#[derive(Debug, Clone)]
pub struct CriticalSolution {
    pub distribution: Categorical,
    pub multipliers: Vec<f64>,
    pub iterations: usize,
    /// ∞-norm of `E_r[f_i] − φ_i` at the returned distribution.
    pub residual: f64,
}

/// Serialized solver output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub lambda: Vec<f64>,
    pub probs: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
}

impl From<&CriticalSolution> for SolverReport {
    fn from(s: &CriticalSolution) -> Self {
        SolverReport {
            lambda: s.multipliers.clone(),
            probs: s.distribution.probs().to_vec(),
            residual: s.residual,
            iterations: s.iterations,
        }
    }
}

/// Dual state at one multiplier vector, restricted to the support of `q0`.
struct DualPoint {
    log_partition: f64,
    probs: Vec<f64>,
    gradient: DVector<f64>,
}

struct Dual<'a> {
    log_q0: Vec<f64>,
    /// centered kernels, `kernels[j][s]` for support position `s`
    kernels: &'a [Vec<f64>],
}

impl Dual<'_> {
    fn eval(&self, lambda: &DVector<f64>) -> DualPoint {
        let exponents: Vec<f64> = (0..self.log_q0.len())
            .map(|s| {
                self.log_q0[s] + self.kernels.iter().zip(lambda.iter()).map(|(g, l)| l * g[s]).sum::<f64>()
            })
            .collect();
        let shift = exponents.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let unnorm: Vec<f64> = exponents.iter().map(|e| (e - shift).exp()).collect();
        let z = measures::compensated_sum(unnorm.iter().copied());
        let probs: Vec<f64> = unnorm.iter().map(|u| u / z).collect();
        let gradient = DVector::from_iterator(
            self.kernels.len(),
            self.kernels.iter().map(|g| measures::compensated_sum(g.iter().zip(&probs).map(|(g, p)| g * p))),
        );
        DualPoint { log_partition: shift + z.ln(), probs, gradient }
    }

    fn hessian(&self, point: &DualPoint) -> DMatrix<f64> {
        let m = self.kernels.len();
        DMatrix::from_fn(m, m, |a, b| {
            let mut acc = CompensatedSum::new();
            for (s, p) in point.probs.iter().enumerate() {
                acc.add(p * (self.kernels[a][s] - point.gradient[a]) * (self.kernels[b][s] - point.gradient[b]));
            }
            acc.total()
        })
    }

    /// Backtracking on the dual objective along `dir`. Near the optimum
    /// rounding can mask the Armijo decrease, so a step whose objective change
    /// is at rounding level is accepted when it shrinks the residual.
    fn line_search(
        &self,
        lambda: &DVector<f64>,
        point: &DualPoint,
        dir: &DVector<f64>,
    ) -> Option<(DVector<f64>, DualPoint)> {
        let slope = point.gradient.dot(dir);
        if !(slope < 0.0) {
            return None;
        }
        let residual = point.gradient.amax();
        let noise = 8.0 * f64::EPSILON * point.log_partition.abs().max(1.0);
        let mut t = 1.0;
        while t >= 1e-12 {
            let candidate = lambda + dir * t;
            let trial = self.eval(&candidate);
            let change = trial.log_partition - point.log_partition;
            let armijo = change <= 1e-4 * t * slope;
            let flat = change <= noise && trial.gradient.amax() < residual;
            if trial.log_partition.is_finite() && (armijo || flat) {
                return Some((candidate, trial));
            }
            t *= 0.5;
        }
        None
    }

    /// Fallback for ill-conditioned duals: settle for a clear drop in the residual.
    fn residual_search(
        &self,
        lambda: &DVector<f64>,
        point: &DualPoint,
        dir: &DVector<f64>,
    ) -> Option<(DVector<f64>, DualPoint)> {
        let residual = point.gradient.amax();
        let mut t = 1.0;
        while t >= 1e-4 {
            let candidate = lambda + dir * t;
            let trial = self.eval(&candidate);
            if trial.log_partition.is_finite() && trial.gradient.amax() < 0.9 * residual {
                return Some((candidate, trial));
            }
            t *= 0.5;
        }
        None
    }
}

/// Solve `(H + μI) x = −g`, raising the ridge `μ` until the factorization succeeds.
fn newton_direction(hessian: &DMatrix<f64>, gradient: &DVector<f64>) -> Option<DVector<f64>> {
    let m = hessian.nrows();
    let scale = hessian.diagonal().amax().max(f64::MIN_POSITIVE);
    let mut ridge = 0.0;
    for _ in 0..40 {
        let damped = hessian + DMatrix::identity(m, m) * ridge;
        if let Some(chol) = damped.cholesky() {
            let step = chol.solve(&(-gradient));
            if step.iter().all(|v| v.is_finite()) {
                return Some(step);
            }
        }
        ridge = if ridge == 0.0 { 1e-14 * scale } else { ridge * 10.0 };
    }
    None
}

/// Distribution minimizing `info(r, r, q0)` subject to the constraints.
pub fn min_info_distribution(
    q0: &BeliefWeights,
    constraints: &[ExpectationConstraint],
    tol: f64,
) -> Result<CriticalSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig(format!("tolerance must be positive, got {tol}")));
    }
    let n = q0.len();
    for c in constraints {
        if c.kernel.len() != n {
            return Err(Error::SupportMismatch { expected: n, found: c.kernel.len() });
        }
        if !c.target.is_finite() || c.kernel.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("constraint kernels and targets must be finite".into()));
        }
    }
    if constraints.is_empty() {
        return Ok(CriticalSolution {
            distribution: q0.normalized(),
            multipliers: Vec::new(),
            iterations: 0,
            residual: 0.0,
        });
    }

    let support: Vec<usize> = (0..n).filter(|&i| q0.weights()[i] > 0.0).collect();
    for (j, c) in constraints.iter().enumerate() {
        let (lo, hi) = support
            .iter()
            .map(|&i| c.kernel[i])
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
        if c.target < lo - tol || c.target > hi + tol {
            return Err(Error::Infeasible(format!(
                "constraint {j}: target {} outside achievable range [{lo}, {hi}]",
                c.target
            )));
        }
    }

    let kernels: Vec<Vec<f64>> =
        constraints.iter().map(|c| support.iter().map(|&i| c.kernel[i] - c.target).collect()).collect();
    let dual = Dual { log_q0: support.iter().map(|&i| q0.weights()[i].ln()).collect(), kernels: &kernels };

    let mut lambda = DVector::zeros(constraints.len());
    let mut point = dual.eval(&lambda);
    let mut iterations = 0;
    loop {
        let residual = point.gradient.amax();
        if residual <= tol {
            let mut probs = vec![0.0; n];
            for (s, &i) in support.iter().enumerate() {
                probs[i] = point.probs[s];
            }
            return Ok(CriticalSolution {
                distribution: Categorical::new(probs)?,
                multipliers: lambda.iter().copied().collect(),
                iterations,
                residual,
            });
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::NoConvergence { iterations, residual });
        }
        iterations += 1;

        let hessian = dual.hessian(&point);
        let newton = newton_direction(&hessian, &point.gradient)
            .ok_or_else(|| Error::Infeasible("dual Hessian is degenerate".into()))?;
        let steepest = -&point.gradient;
        let next = dual
            .line_search(&lambda, &point, &newton)
            .or_else(|| dual.line_search(&lambda, &point, &steepest))
            .or_else(|| dual.residual_search(&lambda, &point, &newton));
        let (candidate, trial) =
            next.ok_or_else(|| Error::Infeasible(format!("line search stalled at residual {residual:e}")))?;
        lambda = candidate;
        point = trial;
        if lambda.norm() > MAX_MULTIPLIER_NORM {
            return Err(Error::Infeasible(format!(
                "multipliers diverged (norm {:e}); targets lie outside the achievable hull",
                lambda.norm()
            )));
        }
    }
}

/// Maximum-entropy distribution over `support_size` outcomes.
pub fn max_entropy_distribution(
    support_size: usize,
    constraints: &[ExpectationConstraint],
    tol: f64,
) -> Result<CriticalSolution> {
    min_info_distribution(&BeliefWeights::unit(support_size)?, constraints, tol)
}

/// Distribution minimizing `info(r, r, q0)` subject to `info(r, states[i], q0) = targets[i]`.
///
/// The solution has the form `r ∝ q0 · Π (states[i]/q0)^λ_i`.
pub fn constrained_info_distribution(
    q0: &BeliefWeights,
    states: &[BeliefWeights],
    targets: &[f64],
    tol: f64,
) -> Result<CriticalSolution> {
    if states.len() != targets.len() {
        return Err(Error::SupportMismatch { expected: states.len(), found: targets.len() });
    }
    let constraints = states
        .iter()
        .zip(targets)
        .enumerate()
        .map(|(k, (state, &target))| {
            if state.len() != q0.len() {
                return Err(Error::SupportMismatch { expected: q0.len(), found: state.len() });
            }
            let kernel = q0
                .weights()
                .iter()
                .zip(state.weights())
                .enumerate()
                .map(|(i, (&w0, &wi))| match (w0 > 0.0, wi > 0.0) {
                    (false, _) => Ok(0.0),
                    (true, true) => Ok(wi.ln() - w0.ln()),
                    (true, false) => Err(Error::UndefinedKernel { state: k, index: i }),
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok(ExpectationConstraint { kernel, target })
        })
        .collect::<Result<Vec<_>>>()?;
    min_info_distribution(q0, &constraints, tol)
}

/// Tempered posterior `r ∝ prior · likelihood^λ`.
pub fn anneal(prior: &Categorical, likelihood: &BeliefWeights, lambda: f64) -> Result<Categorical> {
    if prior.len() != likelihood.len() {
        return Err(Error::SupportMismatch { expected: prior.len(), found: likelihood.len() });
    }
    if !lambda.is_finite() {
        return Err(Error::InvalidConfig(format!("annealing exponent must be finite, got {lambda}")));
    }
    if lambda == 0.0 {
        return Ok(prior.clone());
    }
    let pairs = prior.probs().iter().zip(likelihood.weights());
    if lambda == 1.0 {
        let unnorm: Vec<f64> = pairs.map(|(p, l)| p * l).collect();
        let z = measures::compensated_sum(unnorm.iter().copied());
        if !(z > 0.0) {
            return Err(Error::DegenerateResult);
        }
        return Categorical::new(unnorm.into_iter().map(|u| u / z).collect());
    }
    let log_unnorm: Vec<f64> = pairs
        .map(|(&p, &l)| {
            if p == 0.0 {
                Ok(f64::NEG_INFINITY)
            } else if l == 0.0 && lambda < 0.0 {
                Err(Error::InvalidDistribution(
                    "likelihood vanishes on the prior support under a negative exponent".into(),
                ))
            } else {
                Ok(p.ln() + lambda * l.ln())
            }
        })
        .collect::<Result<_>>()?;
    let shift = log_unnorm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Err(Error::DegenerateResult);
    }
    let unnorm: Vec<f64> = log_unnorm.iter().map(|v| (v - shift).exp()).collect();
    let z = measures::compensated_sum(unnorm.iter().copied());
    Categorical::new(unnorm.into_iter().map(|u| u / z).collect())
}

/// `info(anneal(λ), posterior, prior)` and its derivative in λ (the variance of
/// `ln likelihood` under the annealed belief).
fn annealed_info(
    prior: &Categorical,
    likelihood: &BeliefWeights,
    posterior: &BeliefWeights,
    lambda: f64,
) -> Result<(f64, f64, Categorical)> {
    let r = anneal(prior, likelihood, lambda)?;
    let value = measures::info(&r, posterior, &prior.to_weights())?.nats();
    let log_l: Vec<f64> = likelihood.weights().iter().map(|l| if *l > 0.0 { l.ln() } else { 0.0 }).collect();
    let mean = r.expect(&log_l)?;
    let centered: Vec<f64> = log_l.iter().map(|v| (v - mean) * (v - mean)).collect();
    let slope = r.expect(&centered)?;
    Ok((value, slope, r))
}

/// Find `λ ≥ 0` with `info(anneal(λ), posterior, prior) = target` within `tol`.
///
/// The annealed information is nondecreasing in λ (its derivative is a
/// variance), so a safeguarded Newton iteration on a bracket converges.
pub fn solve_annealing_lambda(
    prior: &Categorical,
    likelihood: &BeliefWeights,
    target: f64,
    tol: f64,
) -> Result<(f64, Categorical)> {
    if !(tol > 0.0) || !target.is_finite() {
        return Err(Error::InvalidConfig("tolerance must be positive and target finite".into()));
    }
    let posterior = anneal(prior, likelihood, 1.0)?.to_weights();
    let eval = |lambda: f64| annealed_info(prior, likelihood, &posterior, lambda);

    // Supremum as λ → ∞: all mass on the likelihood's maximizers.
    let log_z1 = measures::compensated_sum(
        prior.probs().iter().zip(likelihood.weights()).map(|(p, l)| p * l),
    )
    .ln();
    let sup = prior
        .probs()
        .iter()
        .zip(likelihood.weights())
        .filter(|(p, l)| **p > 0.0 && **l > 0.0)
        .map(|(_, l)| l.ln() - log_z1)
        .fold(f64::NEG_INFINITY, f64::max);

    let (f0, _, r0) = eval(0.0)?;
    if (f0 - target).abs() <= tol {
        return Ok((0.0, r0));
    }
    let out_of_range = || Error::TargetOutOfRange { target, lo: f0, hi: sup };
    if target < f0 {
        return Err(out_of_range());
    }
    let (f1, _, r1) = eval(1.0)?;
    if (f1 - target).abs() <= tol {
        return Ok((1.0, r1));
    }
    if target >= sup {
        return Err(out_of_range());
    }

    let (mut lo, mut hi) = (0.0, 1.0);
    let mut f_hi = f1;
    while f_hi < target {
        lo = hi;
        hi *= 2.0;
        if hi > MAX_MULTIPLIER_NORM {
            return Err(out_of_range());
        }
        f_hi = eval(hi)?.0;
    }
    if (f_hi - target).abs() <= tol {
        return Ok((hi, anneal(prior, likelihood, hi)?));
    }

    let mut lambda = 0.5 * (lo + hi);
    for _ in 0..MAX_ITERATIONS {
        let (value, slope, r) = eval(lambda)?;
        let gap = value - target;
        if gap.abs() <= tol {
            return Ok((lambda, r));
        }
        if gap < 0.0 {
            lo = lambda;
        } else {
            hi = lambda;
        }
        let newton = lambda - gap / slope;
        lambda = if slope > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let residual = (eval(lambda)?.0 - target).abs();
    Err(Error::NoConvergence { iterations: MAX_ITERATIONS, residual })
}

/// Gaussian posterior with the likelihood raised to `λ`: effective count `λ·n`.
pub fn anneal_gaussian(
    prior: &Gaussian,
    model: &LocationModel,
    n: usize,
    sample_mean: &DVector<f64>,
    lambda: f64,
) -> Result<Gaussian> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::NegativeLambda(lambda));
    }
    if lambda == 1.0 {
        return gaussian::posterior(prior, model, n, sample_mean);
    }
    if n == 0 {
        return Err(Error::InvalidCount("annealed posterior needs at least one sample".into()));
    }
    gaussian::conjugate_update(prior, model, lambda * n as f64, sample_mean)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn die() -> Vec<f64> {
        (1..=6).map(f64::from).collect()
    }

    /// Brute-force oracle for a single-constraint tilt of unit weights: scan λ
    /// on a uniform grid and keep the point with the smallest residual.
    fn grid_tilt(kernel: &[f64], target: f64, lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let tilt = |l: f64| {
            let w: Vec<f64> = kernel.iter().map(|k| (l * k).exp()).collect();
            let z: f64 = w.iter().sum();
            w.into_iter().map(|x| x / z).collect::<Vec<f64>>()
        };
        let steps = ((hi - lo) / step).round() as usize;
        let (mut best_l, mut best_r) = (lo, f64::INFINITY);
        for k in 0..=steps {
            let l = lo + step * k as f64;
            let p = tilt(l);
            let r = (p.iter().zip(kernel).map(|(p, k)| p * k).sum::<f64>() - target).abs();
            if r < best_r {
                best_r = r;
                best_l = l;
            }
        }
        tilt(best_l)
    }

    #[test]
    fn unconstrained_returns_normalized_reference() {
        let q0 = BeliefWeights::new(vec![1.0, 3.0, 0.0, 4.0]).unwrap();
        let s = min_info_distribution(&q0, &[], DEFAULT_TOL).unwrap();
        assert_eq!(s.distribution, q0.normalized());
        assert!(s.multipliers.is_empty());
        let s = max_entropy_distribution(4, &[], DEFAULT_TOL).unwrap();
        assert_eq!(s.distribution.probs(), &[0.25; 4]);
    }

    #[test]
    fn fair_die_mean_is_uniform() {
        let s = max_entropy_distribution(6, &[ExpectationConstraint::new(die(), 3.5)], DEFAULT_TOL).unwrap();
        for p in s.distribution.probs() {
            assert!((p - 1.0 / 6.0).abs() < 1e-12);
        }
        assert!(s.multipliers[0].abs() < 1e-10);
    }

    #[test]
    fn loaded_die_matches_grid_oracle() {
        let s = max_entropy_distribution(6, &[ExpectationConstraint::new(die(), 4.5)], DEFAULT_TOL).unwrap();
        assert!(s.residual <= 1e-10);
        let oracle = grid_tilt(&die(), 4.5, -5.0, 5.0, 1e-6);
        for (p, o) in s.distribution.probs().iter().zip(&oracle) {
            assert!((p - o).abs() < 1e-6, "{p} vs {o}");
        }
        let unit = BeliefWeights::unit(6).unwrap();
        let m = min_info_distribution(&unit, &[ExpectationConstraint::new(die(), 4.5)], DEFAULT_TOL).unwrap();
        assert_eq!(m.distribution, s.distribution);
    }

    #[test]
    fn symmetric_kernel_gives_symmetric_solution() {
        let support = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let kernel: Vec<f64> = support.iter().map(|z| z * z).collect();
        let s = max_entropy_distribution(5, &[ExpectationConstraint::new(kernel, 1.2)], DEFAULT_TOL).unwrap();
        let p = s.distribution.probs();
        assert!((p[0] - p[4]).abs() < 1e-14 && (p[1] - p[3]).abs() < 1e-14);
    }

    #[test]
    fn solution_has_exponential_family_form() {
        let q0 = BeliefWeights::new(vec![0.5, 1.0, 2.0, 0.0, 1.5]).unwrap();
        let cs = vec![
            ExpectationConstraint::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], 3.4),
            ExpectationConstraint::new(vec![0.0, 1.0, 0.0, 1.0, 1.0], 0.55),
        ];
        let s = min_info_distribution(&q0, &cs, DEFAULT_TOL).unwrap();
        let p = s.distribution.probs();
        assert_eq!(p[3], 0.0);
        let offsets: Vec<f64> = [0, 1, 2, 4]
            .iter()
            .map(|&i| (p[i] / q0.weights()[i]).ln() - cs.iter().zip(&s.multipliers).map(|(c, l)| l * c.kernel[i]).sum::<f64>())
            .collect();
        for o in &offsets {
            assert!((o - offsets[0]).abs() < 1e-8);
        }
    }

    #[test]
    fn infeasible_targets_are_reported() {
        let c = ExpectationConstraint::new(die(), 6.5);
        assert!(matches!(max_entropy_distribution(6, &[c], DEFAULT_TOL), Err(Error::Infeasible(_))));
        // each target individually attainable, jointly not
        let cs = vec![
            ExpectationConstraint::new(vec![1.0, 0.0, 0.0], 0.8),
            ExpectationConstraint::new(vec![0.0, 1.0, 0.0], 0.8),
        ];
        assert!(matches!(max_entropy_distribution(3, &cs, DEFAULT_TOL), Err(Error::Infeasible(_))));
        let c = ExpectationConstraint::new(vec![1.0; 3], 2.0);
        assert!(matches!(max_entropy_distribution(3, &[c], DEFAULT_TOL), Err(Error::Infeasible(_))));
    }

    #[test]
    fn constrained_info_self_consistency() {
        let q0 = Categorical::uniform(4).unwrap().to_weights();
        let q1 = Categorical::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let target = measures::kl(&q1, &q0).unwrap().nats();
        let s = constrained_info_distribution(&q0, &[q1.to_weights()], &[target], DEFAULT_TOL).unwrap();
        assert!((s.multipliers[0] - 1.0).abs() < 1e-8);
        for (p, q) in s.distribution.probs().iter().zip(q1.probs()) {
            assert!((p - q).abs() < 1e-10);
        }
    }

    #[test]
    fn constrained_info_zero_targets_return_reference() {
        let q0 = BeliefWeights::new(vec![1.0, 2.0, 1.0]).unwrap();
        // a state with E_{q0}[ln(q1/q0)] = 0 relative to normalized q0
        let q1 = BeliefWeights::new(vec![1.0, 2.0, 1.0]).unwrap().scaled(1.0).unwrap();
        let s = constrained_info_distribution(&q0, &[q1], &[0.0], DEFAULT_TOL).unwrap();
        for (p, q) in s.distribution.probs().iter().zip(q0.normalized().probs()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn constrained_info_undefined_kernel() {
        let q0 = BeliefWeights::new(vec![1.0, 1.0]).unwrap();
        let q1 = BeliefWeights::new(vec![1.0, 0.0]).unwrap();
        assert!(matches!(
            constrained_info_distribution(&q0, &[q1], &[0.1], DEFAULT_TOL),
            Err(Error::UndefinedKernel { state: 0, index: 1 })
        ));
    }

    #[test]
    fn anneal_endpoints_and_midpoint() {
        let prior = Categorical::new(vec![0.2, 0.5, 0.3]).unwrap();
        let like = BeliefWeights::new(vec![0.9, 0.05, 0.4]).unwrap();
        assert_eq!(anneal(&prior, &like, 0.0).unwrap(), prior);
        let bayes: Vec<f64> = {
            let u: Vec<f64> = prior.probs().iter().zip(like.weights()).map(|(p, l)| p * l).collect();
            let z: f64 = u.iter().sum();
            u.iter().map(|x| x / z).collect()
        };
        for (a, b) in anneal(&prior, &like, 1.0).unwrap().probs().iter().zip(&bayes) {
            assert!((a - b).abs() < 1e-15);
        }
        let half = anneal(&Categorical::uniform(2).unwrap(), &BeliefWeights::new(vec![4.0, 1.0]).unwrap(), 0.5).unwrap();
        assert!((half.probs()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((half.probs()[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn anneal_degenerate_and_invalid() {
        let prior = Categorical::new(vec![1.0, 0.0]).unwrap();
        let like = BeliefWeights::new(vec![0.0, 1.0]).unwrap();
        assert!(matches!(anneal(&prior, &like, 0.7), Err(Error::DegenerateResult)));
        assert!(matches!(anneal(&prior, &like, 1.0), Err(Error::DegenerateResult)));
        assert!(anneal(&prior, &like, -0.5).is_err());
    }

    #[test]
    fn annealing_solver_endpoints() {
        let prior = Categorical::new(vec![0.3, 0.3, 0.4]).unwrap();
        let like = BeliefWeights::new(vec![0.2, 0.9, 0.5]).unwrap();
        let post = anneal(&prior, &like, 1.0).unwrap();
        let at_one = measures::kl(&post, &prior.to_weights()).unwrap().nats();
        let (l, r) = solve_annealing_lambda(&prior, &like, at_one, 1e-10).unwrap();
        assert_eq!(l, 1.0);
        assert_eq!(r, post);
        let at_zero = measures::info(&prior, &post.to_weights(), &prior.to_weights()).unwrap().nats();
        assert!(at_zero < 0.0);
        let (l, r) = solve_annealing_lambda(&prior, &like, at_zero, 1e-10).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(r, prior);
    }

    #[test]
    fn annealing_solver_matches_grid_scan() {
        let prior = Categorical::new(vec![0.1, 0.25, 0.15, 0.3, 0.2]).unwrap();
        let like = BeliefWeights::new(vec![0.05, 0.6, 0.3, 0.9, 0.1]).unwrap();
        let post = anneal(&prior, &like, 1.0).unwrap().to_weights();
        let f = |l: f64| measures::info(&anneal(&prior, &like, l).unwrap(), &post, &prior.to_weights()).unwrap().nats();
        let target = 0.5 * (f(0.0) + f(1.0)) + 0.1;
        let (lambda, _) = solve_annealing_lambda(&prior, &like, target, 1e-12).unwrap();
        // dense grid scan oracle
        let (mut best, mut best_gap) = (0.0, f64::INFINITY);
        for k in 0..=1_500_000 {
            let l = k as f64 * 1e-6;
            let gap = (f(l) - target).abs();
            if gap < best_gap {
                best_gap = gap;
                best = l;
            }
        }
        assert!((lambda - best).abs() < 1e-6, "{lambda} vs {best}");
    }

    #[test]
    fn annealing_solver_out_of_range() {
        let prior = Categorical::new(vec![0.5, 0.5]).unwrap();
        let like = BeliefWeights::new(vec![0.8, 0.2]).unwrap();
        assert!(matches!(
            solve_annealing_lambda(&prior, &like, -5.0, 1e-10),
            Err(Error::TargetOutOfRange { .. })
        ));
        // supremum is ln(0.8 / 0.5)
        assert!(matches!(
            solve_annealing_lambda(&prior, &like, (1.6f64).ln() + 1e-3, 1e-10),
            Err(Error::TargetOutOfRange { .. })
        ));
        let (l, _) = solve_annealing_lambda(&prior, &like, (1.6f64).ln() - 1e-3, 1e-10).unwrap();
        assert!(l > 1.0);
    }

    #[test]
    fn gaussian_annealing() {
        let prior = Gaussian::isotropic(2, 1.0).unwrap();
        let model = LocationModel::isotropic(2, 0.5).unwrap();
        let ybar = DVector::from_row_slice(&[0.0, 0.0]);
        let a0 = anneal_gaussian(&prior, &model, 10, &ybar, 0.0).unwrap();
        assert_eq!(a0.cov().matrix(), prior.cov().matrix());
        let a1 = anneal_gaussian(&prior, &model, 10, &ybar, 1.0).unwrap();
        let p = gaussian::posterior(&prior, &model, 10, &ybar).unwrap();
        assert_eq!(a1.cov().matrix(), p.cov().matrix());
        let half = anneal_gaussian(&prior, &model, 10, &ybar, 0.5).unwrap();
        assert!((half.cov().matrix() - DMatrix::identity(2, 2) / 21.0).amax() < 1e-15);
        assert!(matches!(anneal_gaussian(&prior, &model, 10, &ybar, -0.1), Err(Error::NegativeLambda(_))));
    }
}
