//! Seeded Monte-Carlo study of first-inference information in a Gaussian
//! location model observed in successive batches.
//!
//! Each experiment draws a ground truth θ from the prior, observes batches of
//! noisy samples, and updates the posterior after every batch. For every
//! stage `k` it records `info(post_k; post_1; prior)`: the information gained
//! by the first inference as judged by the later, better-informed view.
//!
//! Randomness is keyed by `(master_seed, experiment_index, stage)` through
//! ChaCha stream and word-position selection, so any experiment can be
//! regenerated on its own and ensembles are identical for any worker count.

use std::io::Write;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian::{self, Gaussian, LocationModel};
use crate::measures::Units;
use crate::stats::{self, BinSpec, Histogram};

/// Experiments evaluated per parallel chunk.
const CHUNK: usize = 1 << 16;
/// Word offset separating the random streams of successive stages.
const STAGE_STRIDE: u128 = 1 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    #[default]
    Genuine,
    /// The first batch is generated by an independent alternate ground truth.
    Inconsistent,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dim: usize,
    /// Defaults to `N(0, I)` of dimension `dim`.
    pub prior: Option<Gaussian>,
    pub noise_sigma: f64,
    pub batch_sizes: Vec<usize>,
    pub num_experiments: u64,
    pub master_seed: u64,
    pub scenario: Scenario,
    /// Bin edges in bits.
    pub histogram_bins: BinSpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dim: 2,
            prior: None,
            noise_sigma: 0.5,
            batch_sizes: vec![10, 10, 20, 40],
            num_experiments: 100_000,
            master_seed: 0,
            scenario: Scenario::Genuine,
            histogram_bins: BinSpec { lo: -20.0, hi: 20.0, count: 400 },
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::InvalidConfig("dim must be positive".into()));
        }
        if let Some(p) = &self.prior {
            if p.dim() != self.dim {
                return Err(Error::DimensionMismatch { expected: self.dim, found: p.dim() });
            }
        }
        if !(self.noise_sigma > 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidConfig(format!("noise_sigma must be positive, got {}", self.noise_sigma)));
        }
        if self.batch_sizes.is_empty() || self.batch_sizes.contains(&0) {
            return Err(Error::InvalidConfig("batch_sizes must be nonempty with every size at least 1".into()));
        }
        self.histogram_bins.validate()
    }

    pub fn prior(&self) -> Result<Gaussian> {
        match &self.prior {
            Some(p) => Ok(p.clone()),
            None => Gaussian::isotropic(self.dim, 1.0),
        }
    }

    pub fn model(&self) -> Result<LocationModel> {
        LocationModel::isotropic(self.dim, self.noise_sigma)
    }

    pub fn stages(&self) -> usize {
        self.batch_sizes.len()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub experiment_id: u64,
    pub true_theta: Vec<f64>,
    pub alt_theta: Option<Vec<f64>>,
    /// Sample mean of each batch.
    pub batch_means: Vec<Vec<f64>>,
    pub stage_posteriors: Vec<Gaussian>,
    /// `info(post_k; post_1; prior)` in nats, one entry per stage.
    pub first_inference_info_per_view: Vec<f64>,
    /// `ln post_1(θ) − ln prior(θ)` at the true θ, in nats.
    pub realization_limit_info: f64,
}

fn stage_rng(master_seed: u64, index: u64, stage: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng.set_word_pos(stage as u128 * STAGE_STRIDE);
    rng
}

/// `mean + L z` with `z` standard normal and `L` the Cholesky factor of `cov`.
fn draw(rng: &mut ChaCha8Rng, g: &Gaussian) -> DVector<f64> {
    let z = DVector::from_fn(g.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
    g.mean() + g.cov().factor() * z
}

/// Runs one experiment, fully determined by `(config.master_seed, index)`.
pub fn run_experiment(config: &ExperimentConfig, index: u64) -> Result<ExperimentRecord> {
    config.validate()?;
    let prior = config.prior()?;
    let model = config.model()?;
    run_prepared(config, &prior, &model, index)
}

fn run_prepared(
    config: &ExperimentConfig,
    prior: &Gaussian,
    model: &LocationModel,
    index: u64,
) -> Result<ExperimentRecord> {
    let mut rng = stage_rng(config.master_seed, index, 0);
    let theta = draw(&mut rng, prior);
    let alt_theta = match config.scenario {
        Scenario::Genuine => None,
        Scenario::Inconsistent => Some(draw(&mut rng, prior)),
    };
    let noise = Gaussian::from_parts(DVector::zeros(config.dim), model.noise_cov().clone())?;

    let mut batch_means = Vec::with_capacity(config.stages());
    let mut posteriors: Vec<Gaussian> = Vec::with_capacity(config.stages());
    for (k, &n) in config.batch_sizes.iter().enumerate() {
        let mut rng = stage_rng(config.master_seed, index, k + 1);
        let truth = match (&alt_theta, k) {
            (Some(alt), 0) => alt,
            _ => &theta,
        };
        let mut sum = DVector::zeros(config.dim);
        for _ in 0..n {
            sum += truth + draw(&mut rng, &noise);
        }
        let ybar = sum / n as f64;
        let previous = posteriors.last().unwrap_or(prior);
        let next = gaussian::posterior(previous, model, n, &ybar)?;
        batch_means.push(ybar.iter().copied().collect());
        posteriors.push(next);
    }

    let first = &posteriors[0];
    let infos = posteriors
        .iter()
        .map(|view| Ok(gaussian::info_gaussian_view(view, first, prior)?.nats()))
        .collect::<Result<Vec<f64>>>()?;
    let realization = gaussian::realization_limit_info(&theta, first, prior)?.nats();
    Ok(ExperimentRecord {
        experiment_id: index,
        true_theta: theta.iter().copied().collect(),
        alt_theta: alt_theta.map(|t| t.iter().copied().collect()),
        batch_means,
        stage_posteriors: posteriors,
        first_inference_info_per_view: infos,
        realization_limit_info: realization,
    })
}

/// An extreme value and the experiment producing it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extreme {
    pub experiment_id: u64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSummary {
    pub stage: usize,
    pub histogram_bits: Histogram,
    pub mean: f64,
    pub variance: f64,
    pub median: f64,
    pub min: Extreme,
    pub max: Extreme,
    pub fraction_negative: f64,
}

/// Laplace location and scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceFit {
    pub location: f64,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSummary {
    pub units: Units,
    pub master_seed: u64,
    pub scenario: Scenario,
    pub num_experiments: u64,
    pub stages: Vec<StageSummary>,
    pub realization_limit: LaplaceFit,
    pub realization_limit_mean: f64,
    /// Mutual information between θ and the first batch.
    pub mutual_info: f64,
    /// Lower bound on the stage-1 value from the covariances alone.
    pub covariance_floor: f64,
}

impl EnsembleSummary {
    /// Same summary with every information value expressed in `units`.
    /// Histograms keep their bit-valued bins.
    pub fn in_units(&self, units: Units) -> EnsembleSummary {
        let factor = units.from_nats(1.0) / self.units.from_nats(1.0);
        let scale = |v: f64| v * factor;
        let mut out = self.clone();
        out.units = units;
        for s in &mut out.stages {
            s.mean = scale(s.mean);
            s.variance *= factor * factor;
            s.median = scale(s.median);
            s.min.value = scale(s.min.value);
            s.max.value = scale(s.max.value);
        }
        out.realization_limit = LaplaceFit {
            location: scale(self.realization_limit.location),
            scale: scale(self.realization_limit.scale),
        };
        out.realization_limit_mean = scale(self.realization_limit_mean);
        out.mutual_info = scale(self.mutual_info);
        out.covariance_floor = scale(self.covariance_floor);
        out
    }
}

/// Maximum-likelihood Laplace fit: sample median and mean absolute deviation from it.
pub fn laplace_fit(values: &[f64]) -> Result<LaplaceFit> {
    if values.len() < 2 {
        return Err(Error::EmptyInput);
    }
    let location = stats::median(values)?;
    let deviations: Vec<f64> = values.iter().map(|v| (v - location).abs()).collect();
    let (scale, _) = stats::mean_variance(&deviations)?;
    Ok(LaplaceFit { location, scale })
}

/// `KL(N(0, B) ‖ N(0, A))` for the stage-1 posterior covariance `B`: the
/// first-inference information with the mean shift removed.
pub fn covariance_floor(config: &ExperimentConfig) -> Result<f64> {
    let prior = config.prior()?;
    let model = config.model()?;
    let post = gaussian::posterior(&prior, &model, config.batch_sizes[0], prior.mean())?;
    Ok(gaussian::kl_gaussian(&post.with_mean(prior.mean().clone())?, &prior)?.nats())
}

/// Per-stage accumulator over the ensemble, filled in experiment order.
struct StageAccumulator {
    histogram: Histogram,
    values: Vec<f64>,
    min: Extreme,
    max: Extreme,
    negative: u64,
}

impl StageAccumulator {
    fn new(bins: BinSpec, capacity: usize) -> Result<Self> {
        Ok(StageAccumulator {
            histogram: Histogram::new(bins)?,
            values: Vec::with_capacity(capacity),
            min: Extreme { experiment_id: 0, value: f64::INFINITY },
            max: Extreme { experiment_id: 0, value: f64::NEG_INFINITY },
            negative: 0,
        })
    }

    fn add(&mut self, id: u64, nats: f64) {
        self.histogram.add(Units::Bits.from_nats(nats));
        self.values.push(nats);
        if nats < self.min.value {
            self.min = Extreme { experiment_id: id, value: nats };
        }
        if nats > self.max.value {
            self.max = Extreme { experiment_id: id, value: nats };
        }
        if nats < 0.0 {
            self.negative += 1;
        }
    }

    fn finish(self, stage: usize) -> Result<StageSummary> {
        let (mean, variance) = stats::mean_variance(&self.values)?;
        Ok(StageSummary {
            stage,
            median: stats::median(&self.values)?,
            fraction_negative: self.negative as f64 / self.values.len() as f64,
            histogram_bits: self.histogram,
            mean,
            variance,
            min: self.min,
            max: self.max,
        })
    }
}

/// Runs the ensemble and summarizes it. Values are in nats.
pub fn run_ensemble(config: &ExperimentConfig) -> Result<EnsembleSummary> {
    run_ensemble_with(config, |_| Ok(()))
}

/// As [`run_ensemble`], handing every record to `sink` in experiment order.
pub fn run_ensemble_with<F>(config: &ExperimentConfig, mut sink: F) -> Result<EnsembleSummary>
where
    F: FnMut(&ExperimentRecord) -> Result<()>,
{
    config.validate()?;
    if config.num_experiments == 0 {
        return Err(Error::InvalidConfig("num_experiments must be at least 1".into()));
    }
    let prior = config.prior()?;
    let model = config.model()?;
    let n = config.num_experiments;
    let capacity = usize::try_from(n).unwrap_or(usize::MAX).min(1 << 24);
    let mut stages = (0..config.stages())
        .map(|_| StageAccumulator::new(config.histogram_bins, capacity))
        .collect::<Result<Vec<_>>>()?;
    let mut realization = Vec::with_capacity(capacity);

    let mut start = 0u64;
    while start < n {
        let end = (start + CHUNK as u64).min(n);
        let records = (start..end)
            .into_par_iter()
            .map(|i| run_prepared(config, &prior, &model, i))
            .collect::<Result<Vec<_>>>()?;
        for r in &records {
            for (acc, &v) in stages.iter_mut().zip(&r.first_inference_info_per_view) {
                acc.add(r.experiment_id, v);
            }
            realization.push(r.realization_limit_info);
            sink(r)?;
        }
        start = end;
    }

    let realization_limit = if realization.len() >= 2 {
        laplace_fit(&realization)?
    } else {
        LaplaceFit { location: realization[0], scale: 0.0 }
    };
    Ok(EnsembleSummary {
        units: Units::Nats,
        master_seed: config.master_seed,
        scenario: config.scenario,
        num_experiments: n,
        stages: stages.into_iter().enumerate().map(|(k, acc)| acc.finish(k + 1)).collect::<Result<_>>()?,
        realization_limit,
        realization_limit_mean: stats::mean_variance(&realization)?.0,
        mutual_info: gaussian::mutual_info_gaussian(&prior, &model, config.batch_sizes[0])?.nats(),
        covariance_floor: covariance_floor(config)?,
    })
}

/// The three quantities bracketing model information due to inference, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundsReport {
    /// `KL(posterior predictive ‖ prior predictive)`
    pub predictive_kl: f64,
    /// `KL(posterior ‖ prior)`
    pub model_kl: f64,
    /// `ln P(ȳ | posterior predictive) − ln P(ȳ | prior predictive)`
    pub realized_log_ratio: f64,
    pub pass: bool,
}

pub const BOUNDS_SLACK: f64 = 1e-9;

/// Checks `predictive_kl ≤ model_kl ≤ realized_log_ratio` for an update on
/// `n` samples with mean `ybar`.
pub fn bounds_audit(prior: &Gaussian, model: &LocationModel, n: usize, ybar: &DVector<f64>) -> Result<BoundsReport> {
    if n == 0 {
        return Ok(BoundsReport { predictive_kl: 0.0, model_kl: 0.0, realized_log_ratio: 0.0, pass: true });
    }
    let post = gaussian::posterior(prior, model, n, ybar)?;
    let prior_pred = gaussian::predictive(prior, model, n)?;
    let post_pred = gaussian::predictive(&post, model, n)?;
    let predictive_kl = gaussian::kl_gaussian(&post_pred, &prior_pred)?.nats();
    let model_kl = gaussian::kl_gaussian(&post, prior)?.nats();
    let realized_log_ratio = post_pred.log_pdf(ybar)? - prior_pred.log_pdf(ybar)?;
    let pass = predictive_kl <= model_kl + BOUNDS_SLACK && model_kl <= realized_log_ratio + BOUNDS_SLACK;
    Ok(BoundsReport { predictive_kl, model_kl, realized_log_ratio, pass })
}

/// Histogram CSV: `stage,bin_lo,bin_hi,count`, bins in bits. Underflow and
/// overflow rows use infinite outer edges.
pub fn write_histogram_csv<W: Write>(summary: &EnsembleSummary, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["stage", "bin_lo", "bin_hi", "count"])?;
    for s in &summary.stages {
        let h = &s.histogram_bits;
        let stage = s.stage.to_string();
        w.write_record([stage.as_str(), "-inf", &fmt_real(h.lo), &h.underflow.to_string()])?;
        for (i, c) in h.counts.iter().enumerate() {
            let (lo, hi) = h.edges(i);
            w.write_record([stage.as_str(), &fmt_real(lo), &fmt_real(hi), &c.to_string()])?;
        }
        w.write_record([stage.as_str(), &fmt_real(h.hi), "+inf", &h.overflow.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Streams one CSV row per experiment:
/// `id,theta_0..,info_stage_1..,realization_limit` in the chosen units.
pub struct RecordCsvWriter<W: Write> {
    writer: csv::Writer<W>,
    units: Units,
}

impl<W: Write> RecordCsvWriter<W> {
    pub fn new(out: W, config: &ExperimentConfig, units: Units) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(out);
        let mut header = vec!["id".to_string()];
        header.extend((0..config.dim).map(|i| format!("theta_{i}")));
        header.extend((1..=config.stages()).map(|k| format!("info_stage_{k}")));
        header.push("realization_limit".into());
        writer.write_record(&header)?;
        Ok(RecordCsvWriter { writer, units })
    }

    pub fn write(&mut self, r: &ExperimentRecord) -> Result<()> {
        let mut row = vec![r.experiment_id.to_string()];
        row.extend(r.true_theta.iter().map(|t| fmt_real(*t)));
        row.extend(r.first_inference_info_per_view.iter().map(|v| fmt_real(self.units.from_nats(*v))));
        row.push(fmt_real(self.units.from_nats(r.realization_limit_info)));
        self.writer.write_record(&row)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.writer.flush()?;
        Ok(())
    }
}

/// Round-trip exact real formatting shared by the CSV writers.
pub fn fmt_real(v: f64) -> String {
    if v == f64::INFINITY {
        "+inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        format!("{v:.16e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: u64, seed: u64) -> ExperimentConfig {
        ExperimentConfig { num_experiments: n, master_seed: seed, ..Default::default() }
    }

    #[test]
    fn config_defaults_and_validation() {
        let c: ExperimentConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c.dim, 2);
        assert_eq!(c.batch_sizes, vec![10, 10, 20, 40]);
        assert_eq!(c.histogram_bins.count, 400);
        c.validate().unwrap();
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"bogus": 1}"#).is_err());
        for bad in [
            ExperimentConfig { batch_sizes: vec![], ..Default::default() },
            ExperimentConfig { batch_sizes: vec![10, 0], ..Default::default() },
            ExperimentConfig { noise_sigma: 0.0, ..Default::default() },
            ExperimentConfig { histogram_bins: BinSpec { lo: 1.0, hi: 0.0, count: 3 }, ..Default::default() },
            ExperimentConfig { prior: Some(Gaussian::isotropic(3, 1.0).unwrap()), ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn records_are_reproducible_and_independent_of_order() {
        let c = small(10, 42);
        let a = run_experiment(&c, 7).unwrap();
        let _ = run_experiment(&c, 3).unwrap();
        let b = run_experiment(&c, 7).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let other = run_experiment(&c, 8).unwrap();
        assert_ne!(a.true_theta, other.true_theta);
    }

    #[test]
    fn covariance_floor_default() {
        let floor = covariance_floor(&ExperimentConfig::default()).unwrap();
        assert!((floor - ((41.0f64).ln() - 40.0 / 41.0)).abs() < 1e-14);
        assert!((Units::Bits.from_nats(floor) - 3.950045).abs() < 1e-6);
        let c = small(200, 1);
        for i in 0..200 {
            let r = run_experiment(&c, i).unwrap();
            assert!(r.first_inference_info_per_view[0] >= floor - 1e-9);
            assert_eq!(r.first_inference_info_per_view.len(), 4);
        }
    }

    #[test]
    fn inconsistent_records_carry_alternate_truth() {
        let c = ExperimentConfig { scenario: Scenario::Inconsistent, ..small(1, 9) };
        let r = run_experiment(&c, 0).unwrap();
        assert!(r.alt_theta.is_some());
        let g = run_experiment(&small(1, 9), 0).unwrap();
        assert!(g.alt_theta.is_none());
        assert_eq!(g.true_theta, r.true_theta);
    }

    #[test]
    fn single_experiment_summary_matches_record() {
        let c = small(1, 5);
        let r = run_experiment(&c, 0).unwrap();
        let s = run_ensemble(&c).unwrap();
        for (k, stage) in s.stages.iter().enumerate() {
            let v = r.first_inference_info_per_view[k];
            assert_eq!(stage.mean, v);
            assert_eq!(stage.median, v);
            assert_eq!(stage.min, Extreme { experiment_id: 0, value: v });
            assert_eq!(stage.max, stage.min);
            assert_eq!(stage.variance, 0.0);
            assert_eq!(stage.histogram_bits.total(), 1);
        }
        assert_eq!(s.realization_limit.location, r.realization_limit_info);
    }

    #[test]
    fn unit_conversion_of_summary() {
        let s = run_ensemble(&small(50, 3)).unwrap();
        let b = s.in_units(Units::Bits);
        assert!((b.mutual_info - (41.0f64).log2()).abs() < 1e-12);
        assert!((b.stages[0].mean - s.stages[0].mean / std::f64::consts::LN_2).abs() < 1e-12);
        assert_eq!(b.in_units(Units::Nats).units, Units::Nats);
    }

    #[test]
    fn laplace_fit_basics() {
        let f = laplace_fit(&[1.0, 5.0]).unwrap();
        assert_eq!(f, LaplaceFit { location: 3.0, scale: 2.0 });
        assert!(laplace_fit(&[1.0]).is_err());
    }

    #[test]
    fn bounds_audit_degenerate_and_generic() {
        let prior = Gaussian::isotropic(2, 1.0).unwrap();
        let model = LocationModel::isotropic(2, 0.5).unwrap();
        let y = DVector::from_row_slice(&[0.3, -2.0]);
        let zero = bounds_audit(&prior, &model, 0, &y).unwrap();
        assert_eq!((zero.predictive_kl, zero.model_kl, zero.realized_log_ratio), (0.0, 0.0, 0.0));
        let r = bounds_audit(&prior, &model, 10, &y).unwrap();
        assert!(r.pass && r.predictive_kl < r.model_kl && r.model_kl < r.realized_log_ratio);
    }

    #[test]
    fn csv_writers() {
        let c = small(3, 11);
        let mut buf = Vec::new();
        let mut w = RecordCsvWriter::new(&mut buf, &c, Units::Bits).unwrap();
        let s = run_ensemble_with(&c, |r| w.write(r)).unwrap();
        w.finish().unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "id,theta_0,theta_1,info_stage_1,info_stage_2,info_stage_3,info_stage_4,realization_limit");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,"));

        let mut buf = Vec::new();
        write_histogram_csv(&s, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 402);
        let total: u64 = text.lines().skip(1).filter(|l| l.starts_with("1,")).map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap()).sum();
        assert_eq!(total, 3);
    }
}
