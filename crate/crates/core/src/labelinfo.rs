//! Label information for classifier prediction logs.
//!
//! For a record with predicted probabilities `q1`, claimed label `y` and an
//! uninformed baseline `q0`, the total information `log(1/q0[y])` carried by
//! the label splits into
//!
//! - predictive information `log(q1[y]/q0[y])`, which is negative when the
//!   classifier moved away from the label, and
//! - residual information `log(1/q1[y])` still to be learned from the label.

use std::collections::HashSet;
use std::io::{Read, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::fmt_real;
use crate::measures::{self, BeliefWeights, Categorical, Units};
use crate::stats::{self, BinSpec, Histogram};

/// Per-record probability sums may deviate from 1 by this much in CSV input.
pub const CSV_SUM_TOL: f64 = 1e-6;
/// Maximum allowed violation of `predictive + residual = total`, in bits.
pub const CONSERVATION_TOL_BITS: f64 = 1e-9;

pub const DEFAULT_BINS: BinSpec = BinSpec { lo: -20.0, hi: 20.0, count: 160 };

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub label: usize,
    pub probs: Categorical,
    /// Defaults to uniform over the classes.
    pub baseline: Option<BeliefWeights>,
    /// Ground truth for synthetic or audited data.
    pub mislabeled: Option<bool>,
}

impl PredictionRecord {
    pub fn new(id: impl Into<String>, label: usize, probs: Categorical) -> Result<Self> {
        let record = PredictionRecord { id: id.into(), label, probs, baseline: None, mislabeled: None };
        record.validate()?;
        Ok(record)
    }

    pub fn with_baseline(mut self, baseline: BeliefWeights) -> Result<Self> {
        self.baseline = Some(baseline);
        self.validate()?;
        Ok(self)
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.num_classes();
        if self.label >= k {
            return Err(Error::IndexOutOfRange { index: self.label, len: k });
        }
        if let Some(b) = &self.baseline {
            if b.len() != k {
                return Err(Error::SupportMismatch { expected: k, found: b.len() });
            }
        }
        Ok(())
    }

    fn baseline_weights(&self) -> Result<BeliefWeights> {
        match &self.baseline {
            Some(b) => Ok(b.normalized().to_weights()),
            None => BeliefWeights::new(vec![1.0 / self.num_classes() as f64; self.num_classes()]),
        }
    }
}

/// `log(q1[y]/q0[y])` in nats: the information from the baseline to the
/// prediction in the view of the label.
pub fn predictive_label_info(record: &PredictionRecord) -> Result<f64> {
    record.validate()?;
    let view = Categorical::delta(record.num_classes(), record.label)?;
    Ok(measures::info(&view, &record.probs.to_weights(), &record.baseline_weights()?)?.nats())
}

/// `log(1/q1[y])` in nats.
pub fn residual_label_info(record: &PredictionRecord) -> Result<f64> {
    record.validate()?;
    Ok(measures::realization_info(&record.probs.to_weights(), record.label)?.nats())
}

/// `log(1/q0[y])` in nats.
pub fn total_label_info(record: &PredictionRecord) -> Result<f64> {
    record.validate()?;
    Ok(measures::realization_info(&record.baseline_weights()?, record.label)?.nats())
}

/// Information from `q0` to a generative predictive belief `q1` in its own view.
pub fn generative_predictive_info(q1: &Categorical, q0: &BeliefWeights) -> Result<f64> {
    Ok(measures::kl(q1, q0)?.nats())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRow {
    pub id: String,
    pub label: usize,
    pub predictive: f64,
    pub residual: f64,
    pub total: f64,
    pub negative: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mislabeled: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub count: usize,
    /// Mean predictive information over records where it is finite.
    pub mean_predictive: Option<f64>,
    pub median_predictive: f64,
    pub fraction_negative: f64,
    pub negative_infinite: usize,
    pub positive_infinite: usize,
    pub histogram_bits: Histogram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MislabelGroups {
    pub genuine: Option<GroupSummary>,
    pub mislabeled: Option<GroupSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelInfoReport {
    pub units: Units,
    pub num_classes: usize,
    /// Sorted by id.
    pub rows: Vec<LabelRow>,
    pub summary: GroupSummary,
    /// Present when every record carries a mislabeled flag.
    pub groups: Option<MislabelGroups>,
    /// Ids by ascending predictive information, ties broken by id.
    pub ranking: Vec<String>,
    /// Largest `|predictive + residual − total|` over finite rows, in bits.
    pub conservation_max_error_bits: f64,
    pub conservation_ok: bool,
}

fn summarize(rows: &[&LabelRow], bins: BinSpec) -> Result<GroupSummary> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut histogram = Histogram::new(bins)?;
    let mut finite = Vec::with_capacity(rows.len());
    let (mut neg_inf, mut pos_inf, mut negative) = (0, 0, 0);
    for r in rows {
        let v = r.predictive;
        if v == f64::NEG_INFINITY {
            neg_inf += 1;
        } else if v == f64::INFINITY {
            pos_inf += 1;
        } else {
            finite.push(v);
        }
        if r.negative {
            negative += 1;
        }
        histogram.add(Units::Bits.from_nats(v));
    }
    let all: Vec<f64> = rows.iter().map(|r| r.predictive).collect();
    Ok(GroupSummary {
        count: rows.len(),
        mean_predictive: if finite.is_empty() { None } else { Some(stats::mean_variance(&finite)?.0) },
        median_predictive: stats::median(&all)?,
        fraction_negative: negative as f64 / rows.len() as f64,
        negative_infinite: neg_inf,
        positive_infinite: pos_inf,
        histogram_bits: histogram,
    })
}

pub fn analyze(records: &[PredictionRecord]) -> Result<LabelInfoReport> {
    analyze_with_bins(records, DEFAULT_BINS)
}

/// Per-record label information, conservation audit, ranking and summaries.
/// Values are in nats; the histogram is binned in bits.
pub fn analyze_with_bins(records: &[PredictionRecord], bins: BinSpec) -> Result<LabelInfoReport> {
    let first = records.first().ok_or(Error::EmptyInput)?;
    let k = first.num_classes();
    if let Some(r) = records.iter().find(|r| r.num_classes() != k) {
        return Err(Error::InconsistentClassCount { expected: k, found: r.num_classes() });
    }
    let mut seen = HashSet::with_capacity(records.len());
    if let Some(dup) = records.iter().find(|r| !seen.insert(r.id.as_str())) {
        return Err(Error::InvalidRecord(format!("duplicate record id {:?}", dup.id)));
    }

    let mut rows = records
        .par_iter()
        .map(|r| {
            let predictive = predictive_label_info(r)?;
            Ok(LabelRow {
                id: r.id.clone(),
                label: r.label,
                predictive,
                residual: residual_label_info(r)?,
                total: total_label_info(r)?,
                negative: predictive < 0.0,
                mislabeled: r.mislabeled,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.id.cmp(&b.id));

    let conservation_max_error_bits = rows
        .iter()
        .filter(|r| r.predictive.is_finite() && r.residual.is_finite() && r.total.is_finite())
        .map(|r| Units::Bits.from_nats((r.predictive + r.residual - r.total).abs()))
        .fold(0.0, f64::max);

    let mut order: Vec<&LabelRow> = rows.iter().collect();
    order.sort_by(|a, b| a.predictive.total_cmp(&b.predictive).then_with(|| a.id.cmp(&b.id)));
    let ranking = order.iter().map(|r| r.id.clone()).collect();

    let all: Vec<&LabelRow> = rows.iter().collect();
    let groups = if rows.iter().all(|r| r.mislabeled.is_some()) {
        let pick = |flag: bool| {
            let sel: Vec<&LabelRow> = rows.iter().filter(|r| r.mislabeled == Some(flag)).collect();
            if sel.is_empty() {
                Ok(None)
            } else {
                summarize(&sel, bins).map(Some)
            }
        };
        Some(MislabelGroups { genuine: pick(false)?, mislabeled: pick(true)? })
    } else {
        None
    };

    Ok(LabelInfoReport {
        units: Units::Nats,
        num_classes: k,
        summary: summarize(&all, bins)?,
        groups,
        ranking,
        conservation_ok: conservation_max_error_bits <= CONSERVATION_TOL_BITS,
        conservation_max_error_bits,
        rows,
    })
}

impl GroupSummary {
    fn rescale(&mut self, factor: f64) {
        self.mean_predictive = self.mean_predictive.map(|m| m * factor);
        self.median_predictive *= factor;
    }
}

impl LabelInfoReport {
    /// Same report with every information value expressed in `units`.
    pub fn in_units(&self, units: Units) -> LabelInfoReport {
        let factor = units.from_nats(1.0) / self.units.from_nats(1.0);
        let mut out = self.clone();
        out.units = units;
        for r in &mut out.rows {
            r.predictive *= factor;
            r.residual *= factor;
            r.total *= factor;
        }
        out.summary.rescale(factor);
        if let Some(g) = &mut out.groups {
            for s in [&mut g.genuine, &mut g.mislabeled].into_iter().flatten() {
                s.rescale(factor);
            }
        }
        out
    }
}

/// Synthetic classifier log: `confidence` on the true class, the rest spread
/// evenly, and the claimed label replaced by a uniformly chosen wrong class
/// with probability `mislabel_fraction`.
pub fn generate_synthetic(
    num_records: usize,
    num_classes: usize,
    confidence: f64,
    mislabel_fraction: f64,
    seed: u64,
) -> Result<Vec<PredictionRecord>> {
    if num_classes < 2 {
        return Err(Error::InvalidConfig("need at least two classes".into()));
    }
    let k = num_classes as f64;
    if !(confidence >= 1.0 / k - 1e-15 && confidence <= 1.0) {
        return Err(Error::InvalidConfig(format!("confidence must lie in [1/{num_classes}, 1], got {confidence}")));
    }
    if !(0.0..=1.0).contains(&mislabel_fraction) {
        return Err(Error::InvalidConfig(format!("mislabel_fraction must lie in [0, 1], got {mislabel_fraction}")));
    }
    let rest = (1.0 - confidence) / (k - 1.0);
    let width = num_records.saturating_sub(1).to_string().len().max(6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..num_records)
        .map(|i| {
            let truth = rng.random_range(0..num_classes);
            let flip = rng.random::<f64>() < mislabel_fraction;
            let label = if flip {
                let other = rng.random_range(0..num_classes - 1);
                if other >= truth {
                    other + 1
                } else {
                    other
                }
            } else {
                truth
            };
            let probs = (0..num_classes).map(|c| if c == truth { confidence } else { rest }).collect();
            let mut r = PredictionRecord::new(format!("s{i:0width$}"), label, Categorical::new(probs)?)?;
            r.mislabeled = Some(flip);
            Ok(r)
        })
        .collect()
}

fn parse_field<T: std::str::FromStr>(value: &str, what: &str, line: usize) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidRecord(format!("line {line}: cannot parse {what} from {value:?}")))
}

fn parse_flag(value: &str, line: usize) -> Result<bool> {
    match value.trim() {
        "1" | "true" | "TRUE" | "True" => Ok(true),
        "0" | "false" | "FALSE" | "False" => Ok(false),
        other => Err(Error::InvalidRecord(format!("line {line}: mislabeled flag {other:?}"))),
    }
}

/// Indices of columns named `{prefix}0 .. {prefix}{k-1}`.
fn numbered_columns(headers: &csv::StringRecord, prefix: &str) -> Result<Vec<usize>> {
    let mut cols = Vec::new();
    loop {
        let name = format!("{prefix}{}", cols.len());
        match headers.iter().position(|h| h.trim() == name) {
            Some(i) => cols.push(i),
            None => break,
        }
    }
    let stray = headers.iter().filter(|h| {
        h.trim().strip_prefix(prefix).is_some_and(|rest| !rest.is_empty() && rest.bytes().all(|b| b.is_ascii_digit()))
    });
    if stray.count() != cols.len() {
        return Err(Error::InvalidRecord(format!("{prefix} columns must be numbered contiguously from 0")));
    }
    Ok(cols)
}

/// Renormalizes probabilities that sum to 1 within [`CSV_SUM_TOL`].
fn tolerant_categorical(mut values: Vec<f64>, line: usize) -> Result<Categorical> {
    if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidRecord(format!("line {line}: probabilities must be finite and nonnegative")));
    }
    let sum = measures::compensated_sum(values.iter().copied());
    if (sum - 1.0).abs() > CSV_SUM_TOL {
        return Err(Error::InvalidRecord(format!("line {line}: probabilities sum to {sum}")));
    }
    for v in &mut values {
        *v /= sum;
    }
    Categorical::new(values)
}

/// Reads `id,label,p0..p{k-1}` with optional `baseline0..` and `mislabeled` columns.
pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<PredictionRecord>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let headers = reader.headers()?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let id_col = column("id").ok_or_else(|| Error::InvalidRecord("missing id column".into()))?;
    let label_col = column("label").ok_or_else(|| Error::InvalidRecord("missing label column".into()))?;
    let mislabeled_col = column("mislabeled");
    let p_cols = numbered_columns(&headers, "p")?;
    let b_cols = numbered_columns(&headers, "baseline")?;
    if p_cols.is_empty() {
        return Err(Error::InvalidRecord("no probability columns p0..".into()));
    }
    if !b_cols.is_empty() && b_cols.len() != p_cols.len() {
        return Err(Error::InconsistentClassCount { expected: p_cols.len(), found: b_cols.len() });
    }

    let mut records = Vec::new();
    for (row, result) in reader.records().enumerate() {
        let rec = result?;
        let line = row + 2;
        let get = |i: usize| rec.get(i).unwrap_or("");
        let probs: Vec<f64> =
            p_cols.iter().map(|&c| parse_field(get(c), "probability", line)).collect::<Result<_>>()?;
        let mut r = PredictionRecord {
            id: get(id_col).to_string(),
            label: parse_field(get(label_col), "label", line)?,
            probs: tolerant_categorical(probs, line)?,
            baseline: None,
            mislabeled: mislabeled_col.map(|c| parse_flag(get(c), line)).transpose()?,
        };
        if !b_cols.is_empty() {
            let b: Vec<f64> = b_cols.iter().map(|&c| parse_field(get(c), "baseline", line)).collect::<Result<_>>()?;
            r.baseline = Some(BeliefWeights::new(b)?);
        }
        r.validate().map_err(|e| Error::InvalidRecord(format!("line {line}: {e}")))?;
        records.push(r);
    }
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(records)
}

/// Writes records in the format read by [`read_records_csv`].
pub fn write_records_csv<W: Write>(records: &[PredictionRecord], out: W) -> Result<()> {
    let first = records.first().ok_or(Error::EmptyInput)?;
    let k = first.num_classes();
    if let Some(r) = records.iter().find(|r| r.num_classes() != k) {
        return Err(Error::InconsistentClassCount { expected: k, found: r.num_classes() });
    }
    let with_baseline = records.iter().any(|r| r.baseline.is_some());
    let with_flag = records.iter().all(|r| r.mislabeled.is_some());
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend((0..k).map(|i| format!("p{i}")));
    if with_baseline {
        header.extend((0..k).map(|i| format!("baseline{i}")));
    }
    if with_flag {
        header.push("mislabeled".into());
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![r.id.clone(), r.label.to_string()];
        row.extend(r.probs.probs().iter().map(|p| fmt_real(*p)));
        if with_baseline {
            let b = r.baseline_weights()?;
            row.extend(b.weights().iter().map(|p| fmt_real(*p)));
        }
        if let (true, Some(flag)) = (with_flag, r.mislabeled) {
            row.push(if flag { "1".into() } else { "0".into() });
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-record CSV: `id,label,predictive_<u>,residual_<u>,total_<u>,negative_flag`.
pub fn write_report_csv<W: Write>(report: &LabelInfoReport, out: W) -> Result<()> {
    let u = report.units.as_str();
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "id".to_string(),
        "label".to_string(),
        format!("predictive_{u}"),
        format!("residual_{u}"),
        format!("total_{u}"),
        "negative_flag".to_string(),
    ])?;
    for r in &report.rows {
        w.write_record([
            r.id.clone(),
            r.label.to_string(),
            fmt_real(r.predictive),
            fmt_real(r.residual),
            fmt_real(r.total),
            u8::from(r.negative).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
