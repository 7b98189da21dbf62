//! Small summary-statistics helpers shared by the experiment harnesses.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{compensated_sum, CompensatedSum};

/// Equal-width bins over `[lo, hi)`; out-of-range values are counted separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
}

/// Histogram range and bin count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl BinSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() || self.count == 0 {
            return Err(Error::InvalidConfig(format!(
                "histogram needs finite lo < hi and at least one bin, got ({}, {}, {})",
                self.lo, self.hi, self.count
            )));
        }
        Ok(())
    }
}

impl Histogram {
    pub fn new(spec: BinSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Histogram { lo: spec.lo, hi: spec.hi, counts: vec![0; spec.count], underflow: 0, overflow: 0 })
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    /// `(lo, hi)` edges of bin `i`.
    pub fn edges(&self, i: usize) -> (f64, f64) {
        let w = self.width();
        (self.lo + w * i as f64, self.lo + w * (i + 1) as f64)
    }

    /// NaN is counted as overflow.
    pub fn add(&mut self, x: f64) {
        if x < self.lo {
            self.underflow += 1;
        } else if x >= self.hi || x.is_nan() {
            self.overflow += 1;
        } else {
            let i = ((x - self.lo) / self.width()) as usize;
            // x just below hi can round up to the bin count
            let i = i.min(self.counts.len() - 1);
            self.counts[i] += 1;
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.underflow + self.overflow
    }
}

/// Median of a sample (mean of the two middle values for even sizes).
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n % 2 == 1 { sorted[n / 2] } else { 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]) })
}

/// Sample mean and (population) variance, compensated.
pub fn mean_variance(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let n = values.len() as f64;
    let mean = compensated_sum(values.iter().copied()) / n;
    let mut acc = CompensatedSum::new();
    for v in values {
        acc.add((v - mean) * (v - mean));
    }
    Ok((mean, acc.total() / n))
}
