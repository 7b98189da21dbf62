//! Discrete-support information functionals.
//!
//! Information gained by a change of belief from `q0` to `q1` is measured as an
//! expectation in the *view* of a third distribution:
//!
//! ```text
//! I_view(q1; q0) = Σ_i view[i] · ln(q1[i] / q0[i])
//! ```
//!
//! Entropy, cross entropy, KL divergence, realization information and mutual
//! information are all special cases obtained by choosing the view and the
//! two belief states. `q0` and `q1` are [`BeliefWeights`], which need not be
//! normalized (unit weights are the usual improper reference); the view is
//! always a normalized [`Categorical`].
//!
//! Summation is restricted to the support of the view, so `0·ln(x/0)` and
//! `0·ln(0/x)` contribute nothing. On the view's support a vanishing `q1`
//! drives the result to `-inf` and a vanishing `q0` drives it to `+inf`.
//! Both at once cannot arise from a coherent Bayesian sequence and is an error.
//!
//! All values are in nats internally; [`InfoValue::bits`] converts.

use std::f64::consts::LN_2;
use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

/// Absolute tolerance on the total mass of a [`Categorical`].
pub const NORMALIZATION_TOL: f64 = 1e-12;

/// Neumaier-compensated accumulator.
#[derive(Debug, Default, Clone, Copy)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator of reals.
pub fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add(v);
    }
    acc.total()
}

/// Presentation unit for information values.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    #[default]
    Bits,
    Nats,
}

impl Units {
    /// Convert a value in nats to this unit. Infinities pass through.
    pub fn from_nats(self, nats: f64) -> f64 {
        match self {
            Units::Nats => nats,
            Units::Bits => nats / LN_2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Units::Bits => "bits",
            Units::Nats => "nats",
        }
    }
}

impl fmt::Display for Units {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An information value in nats. May be `+inf` or `-inf`, never NaN.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct InfoValue(f64);

impl InfoValue {
    pub const ZERO: InfoValue = InfoValue(0.0);
    pub const POS_INF: InfoValue = InfoValue(f64::INFINITY);
    pub const NEG_INF: InfoValue = InfoValue(f64::NEG_INFINITY);

    pub fn from_nats(nats: f64) -> Self {
        debug_assert!(!nats.is_nan());
        InfoValue(nats)
    }

    pub fn from_bits(bits: f64) -> Self {
        InfoValue::from_nats(bits * LN_2)
    }

    pub fn nats(self) -> f64 {
        self.0
    }

    pub fn bits(self) -> f64 {
        self.0 / LN_2
    }

    pub fn in_units(self, units: Units) -> f64 {
        units.from_nats(self.0)
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }
}

impl fmt::Display for InfoValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            v if v == f64::INFINITY => f.write_str("+inf"),
            v if v == f64::NEG_INFINITY => f.write_str("-inf"),
            v => write!(f, "{v}"),
        }
    }
}

/// Finite values serialize as numbers (nats); infinities as `"+inf"` / `"-inf"`.
impl Serialize for InfoValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            serializer.serialize_f64(self.0)
        } else {
            serializer.serialize_str(&self.to_string())
        }
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::SupportMismatch { expected, found })
    }
}

/// A normalized probability distribution over a finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CategoricalRepr", into = "CategoricalRepr")]
pub struct Categorical {
    probs: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct CategoricalRepr {
    probs: Vec<f64>,
}

impl TryFrom<CategoricalRepr> for Categorical {
    type Error = Error;
    fn try_from(repr: CategoricalRepr) -> Result<Self> {
        Categorical::new(repr.probs)
    }
}

impl From<Categorical> for CategoricalRepr {
    fn from(c: Categorical) -> Self {
        CategoricalRepr { probs: c.probs }
    }
}

impl Categorical {
    /// Validate a probability vector. Entries in `[-1e-12, 0)` are clamped to zero.
    pub fn new(mut probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        for (i, p) in probs.iter_mut().enumerate() {
            if !p.is_finite() {
                return Err(Error::InvalidDistribution(format!("entry {i} is not finite")));
            }
            if *p < 0.0 {
                if *p >= -NORMALIZATION_TOL {
                    *p = 0.0;
                } else {
                    return Err(Error::InvalidDistribution(format!("entry {i} is negative ({p})")));
                }
            }
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidDistribution(format!("entries sum to {total}, not 1")));
        }
        Ok(Categorical { probs })
    }

    /// Normalize a nonnegative weight vector with positive total mass.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let w = BeliefWeights::new(weights.to_vec())?;
        Ok(w.normalized())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        Ok(Categorical { probs: vec![1.0 / n as f64; n] })
    }

    /// All mass on `outcome`.
    pub fn delta(n: usize, outcome: usize) -> Result<Self> {
        if outcome >= n {
            return Err(Error::IndexOutOfRange { index: outcome, len: n });
        }
        let mut probs = vec![0.0; n];
        probs[outcome] = 1.0;
        Ok(Categorical { probs })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Expectation of `f` under this distribution.
    pub fn expect(&self, f: &[f64]) -> Result<f64> {
        check_len(self.len(), f.len())?;
        Ok(compensated_sum(
            self.probs.iter().zip(f).filter(|(p, _)| **p > 0.0).map(|(p, v)| p * v),
        ))
    }

    pub fn to_weights(&self) -> BeliefWeights {
        BeliefWeights { weights: self.probs.clone() }
    }
}

/// A nonnegative, not necessarily normalized, belief over a finite support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "WeightsRepr", into = "WeightsRepr")]
pub struct BeliefWeights {
    weights: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct WeightsRepr {
    weights: Vec<f64>,
}

impl TryFrom<WeightsRepr> for BeliefWeights {
    type Error = Error;
    fn try_from(repr: WeightsRepr) -> Result<Self> {
        BeliefWeights::new(repr.weights)
    }
}

impl From<BeliefWeights> for WeightsRepr {
    fn from(w: BeliefWeights) -> Self {
        WeightsRepr { weights: w.weights }
    }
}

impl From<&Categorical> for BeliefWeights {
    fn from(c: &Categorical) -> Self {
        c.to_weights()
    }
}

impl BeliefWeights {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        for (i, w) in weights.iter().enumerate() {
            if !w.is_finite() || *w < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "weight {i} must be finite and nonnegative, got {w}"
                )));
            }
        }
        if !weights.iter().any(|w| *w > 0.0) {
            return Err(Error::InvalidDistribution("all weights are zero".into()));
        }
        Ok(BeliefWeights { weights })
    }

    /// Constant unit weight on every outcome (the improper reference).
    pub fn unit(n: usize) -> Result<Self> {
        BeliefWeights::new(vec![1.0; n])
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        compensated_sum(self.weights.iter().copied())
    }

    pub fn normalized(&self) -> Categorical {
        let total = self.total();
        Categorical { probs: self.weights.iter().map(|w| w / total).collect() }
    }

    /// Multiply every weight by a positive constant.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::InvalidDistribution(format!("scale factor must be positive, got {factor}")));
        }
        BeliefWeights::new(self.weights.iter().map(|w| w * factor).collect())
    }
}

/// A joint distribution over a `rows × cols` grid, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "JointRepr", into = "JointRepr")]
pub struct JointCategorical {
    rows: usize,
    cols: usize,
    flat: Categorical,
}

#[derive(Serialize, Deserialize)]
struct JointRepr {
    probs: Vec<Vec<f64>>,
}

impl TryFrom<JointRepr> for JointCategorical {
    type Error = Error;
    fn try_from(repr: JointRepr) -> Result<Self> {
        JointCategorical::new(repr.probs)
    }
}

impl From<JointCategorical> for JointRepr {
    fn from(j: JointCategorical) -> Self {
        JointRepr { probs: j.flat.probs.chunks(j.cols).map(<[f64]>::to_vec).collect() }
    }
}

impl JointCategorical {
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let rows = matrix.len();
        let cols = matrix.first().map_or(0, Vec::len);
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDistribution("empty joint table".into()));
        }
        if let Some(bad) = matrix.iter().find(|r| r.len() != cols) {
            return Err(Error::SupportMismatch { expected: cols, found: bad.len() });
        }
        let flat = Categorical::new(matrix.into_iter().flatten().collect())?;
        Ok(JointCategorical { rows, cols, flat })
    }

    pub fn from_flat(rows: usize, cols: usize, probs: Vec<f64>) -> Result<Self> {
        check_len(rows * cols, probs.len())?;
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDistribution("empty joint table".into()));
        }
        Ok(JointCategorical { rows, cols, flat: Categorical::new(probs)? })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.flat.probs[row * self.cols + col]
    }

    /// The joint as a distribution over the flattened grid.
    pub fn flattened(&self) -> &Categorical {
        &self.flat
    }

    /// Marginal over the row variable.
    pub fn row_marginal(&self) -> Categorical {
        let probs = self
            .flat
            .probs
            .chunks(self.cols)
            .map(|r| compensated_sum(r.iter().copied()))
            .collect();
        Categorical { probs }
    }

    /// Marginal over the column variable.
    pub fn col_marginal(&self) -> Categorical {
        let probs = (0..self.cols)
            .map(|c| compensated_sum((0..self.rows).map(|r| self.get(r, c))))
            .collect();
        Categorical { probs }
    }

    /// Distribution of the column variable given `row`; `None` when the row has no mass.
    pub fn conditional_on_row(&self, row: usize) -> Option<Categorical> {
        let slice = &self.flat.probs[row * self.cols..(row + 1) * self.cols];
        let total = compensated_sum(slice.iter().copied());
        (total > 0.0).then(|| Categorical { probs: slice.iter().map(|p| p / total).collect() })
    }

    /// Distribution of the row variable given `col`; `None` when the column has no mass.
    pub fn conditional_on_col(&self, col: usize) -> Option<Categorical> {
        let column: Vec<f64> = (0..self.rows).map(|r| self.get(r, col)).collect();
        let total = compensated_sum(column.iter().copied());
        (total > 0.0).then(|| Categorical { probs: column.iter().map(|p| p / total).collect() })
    }

    /// Outer product of the two marginals, over the flattened grid.
    pub fn product_of_marginals(&self) -> BeliefWeights {
        let (r, c) = (self.row_marginal(), self.col_marginal());
        let weights = r
            .probs
            .iter()
            .flat_map(|pr| c.probs.iter().map(move |pc| pr * pc))
            .collect();
        BeliefWeights { weights }
    }
}

/// `ln(q1/q0)` at one outcome, with signed infinities when exactly one side vanishes.
fn log_ratio(q1: f64, q0: f64, index: usize) -> Result<f64> {
    match (q1 > 0.0, q0 > 0.0) {
        (true, true) => Ok(q1.ln() - q0.ln()),
        (false, true) => Ok(f64::NEG_INFINITY),
        (true, false) => Ok(f64::INFINITY),
        (false, false) => Err(Error::UndefinedRatio { index }),
    }
}

/// Information from `q0` to `q1` in the view of `view`.
pub fn info(view: &Categorical, q1: &BeliefWeights, q0: &BeliefWeights) -> Result<InfoValue> {
    check_len(view.len(), q1.len())?;
    check_len(view.len(), q0.len())?;
    let mut acc = CompensatedSum::new();
    let (mut pos_inf, mut neg_inf) = (false, false);
    for (i, &r) in view.probs.iter().enumerate() {
        if r == 0.0 {
            continue;
        }
        let d = log_ratio(q1.weights[i], q0.weights[i], i)?;
        if d == f64::INFINITY {
            pos_inf = true;
        } else if d == f64::NEG_INFINITY {
            neg_inf = true;
        } else {
            acc.add(r * d);
        }
    }
    match (pos_inf, neg_inf) {
        (true, true) => Err(Error::ConflictingDivergence),
        (true, false) => Ok(InfoValue::POS_INF),
        (false, true) => Ok(InfoValue::NEG_INF),
        (false, false) => Ok(InfoValue::from_nats(acc.total())),
    }
}

/// Pointwise information density `ln(q1[outcome] / q0[outcome])`.
pub fn info_density(q1: &BeliefWeights, q0: &BeliefWeights, outcome: usize) -> Result<InfoValue> {
    check_len(q1.len(), q0.len())?;
    if outcome >= q1.len() {
        return Err(Error::IndexOutOfRange { index: outcome, len: q1.len() });
    }
    log_ratio(q1.weights[outcome], q0.weights[outcome], outcome).map(InfoValue::from_nats)
}

/// Weighted-Lᵖ norm of the information density, weighted by the view.
///
/// A pseudometric between `q1` and `q0`: nonnegative, symmetric, and zero
/// exactly when the two agree on the view's support.
pub fn pseudometric_lp(view: &Categorical, q1: &BeliefWeights, q0: &BeliefWeights, p: f64) -> Result<InfoValue> {
    if !(p >= 1.0) {
        return Err(Error::InvalidOrder(p));
    }
    check_len(view.len(), q1.len())?;
    check_len(view.len(), q0.len())?;
    let mut acc = CompensatedSum::new();
    let mut diverges = false;
    for (i, &r) in view.probs.iter().enumerate() {
        if r == 0.0 {
            continue;
        }
        let d = log_ratio(q1.weights[i], q0.weights[i], i)?;
        if d.is_infinite() {
            diverges = true;
        } else {
            acc.add(r * d.abs().powf(p));
        }
    }
    if diverges {
        return Ok(InfoValue::POS_INF);
    }
    let total = acc.total();
    let norm = if p == 1.0 { total } else { total.powf(1.0 / p) };
    Ok(InfoValue::from_nats(norm))
}

/// Variance of the information density under the view. Units are nats².
pub fn info_variance(view: &Categorical, q1: &BeliefWeights, q0: &BeliefWeights) -> Result<f64> {
    let phi = info(view, q1, q0)?;
    if !phi.is_finite() {
        return Err(Error::NonFiniteInfo);
    }
    let phi = phi.nats();
    let mut acc = CompensatedSum::new();
    for (i, &r) in view.probs.iter().enumerate() {
        if r > 0.0 {
            let d = log_ratio(q1.weights[i], q0.weights[i], i)?;
            acc.add(r * (d - phi) * (d - phi));
        }
    }
    Ok(acc.total())
}

/// Entropy, as information from `q` to unit weights in the view of `q`.
pub fn entropy(q: &Categorical) -> InfoValue {
    let unit = BeliefWeights { weights: vec![1.0; q.len()] };
    info(q, &unit, &q.to_weights()).expect("entropy of a valid categorical is finite")
}

/// Cross entropy of `q` in the view of `view`.
pub fn cross_entropy(view: &Categorical, q: &BeliefWeights) -> Result<InfoValue> {
    check_len(view.len(), q.len())?;
    let unit = BeliefWeights { weights: vec![1.0; q.len()] };
    info(view, &unit, q)
}

/// Information gained by the realization of `outcome`: `ln(1/q[outcome])`.
pub fn realization_info(q: &BeliefWeights, outcome: usize) -> Result<InfoValue> {
    let unit = BeliefWeights { weights: vec![1.0; q.len()] };
    info_density(&unit, q, outcome)
}

/// KL divergence of `q1` from `q0`: information in the view of the updated belief itself.
pub fn kl(q1: &Categorical, q0: &BeliefWeights) -> Result<InfoValue> {
    info(q1, &q1.to_weights(), q0)
}

/// Entropy difference `H(q1) − H(q0)`. A change of uncertainty, signed.
pub fn lindley(q1: &Categorical, q0: &Categorical) -> InfoValue {
    InfoValue::from_nats(entropy(q1).nats() - entropy(q0).nats())
}

/// Mutual information between the row and column variables of `joint`.
pub fn mutual_information(joint: &JointCategorical) -> InfoValue {
    let flat = joint.flattened();
    info(flat, &flat.to_weights(), &joint.product_of_marginals())
        .expect("marginal products are positive wherever the joint is")
}

/// Directional derivative of `info(view, q1 + ε·eta, q0)` at `ε = 0`.
///
/// `eta` must preserve normalization (sum to zero). The result is
/// `Σ view[i]·eta[i]/q1[i]`, which is positive whenever `eta` moves `q1`
/// toward the view on every outcome.
pub fn perturbation_derivative(
    view: &Categorical,
    q1: &Categorical,
    q0: &BeliefWeights,
    eta: &[f64],
) -> Result<f64> {
    check_len(view.len(), eta.len())?;
    let scale: f64 = eta.iter().map(|e| e.abs()).sum();
    let drift = compensated_sum(eta.iter().copied());
    if !scale.is_finite() || drift.abs() > 1e-12 * scale.max(1.0) {
        return Err(Error::InvalidPerturbation(format!("perturbation sums to {drift}, not 0")));
    }
    if !info(view, &q1.to_weights(), q0)?.is_finite() {
        return Err(Error::NonFiniteInfo);
    }
    let mut acc = CompensatedSum::new();
    for (i, (&e, &q)) in eta.iter().zip(&q1.probs).enumerate() {
        if e == 0.0 {
            continue;
        }
        if q == 0.0 {
            return Err(Error::ZeroDenominator { index: i });
        }
        acc.add(view.probs[i] * e / q);
    }
    Ok(acc.total())
}
