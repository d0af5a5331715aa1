//! Per-run drop analysis.
//!
//! A run's drop is the number of runs it differs from significantly under
//! gold qrels but not under the alternative qrels: its share of false
//! negatives. The signed difference of significance counts is reported too,
//! but it can go negative when the alternative adds significances.

use std::io::Write;

use crate::error::{Error, Result};
use crate::metrics::csv_err;
use crate::significance::{PairId, SignificanceSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RunSignificanceCounts {
    pub run_tag: String,
    pub count: usize,
}

/// Number of significant pairs each run takes part in.
pub fn per_run_counts(sig: &SignificanceSet) -> Vec<RunSignificanceCounts> {
    degrees(sig.num_runs(), sig.pairs().iter().copied())
        .into_iter()
        .zip(sig.run_tags())
        .map(|(count, tag)| RunSignificanceCounts {
            run_tag: tag.clone(),
            count,
        })
        .collect()
}

fn degrees(m: usize, pairs: impl Iterator<Item = PairId>) -> Vec<usize> {
    let mut deg = vec![0; m];
    for p in pairs {
        deg[p.a()] += 1;
        deg[p.b()] += 1;
    }
    deg
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunDrop {
    pub run_tag: String,
    pub gold_count: usize,
    pub alt_count: usize,
    pub drop: usize,
}

impl RunDrop {
    pub fn signed_delta(&self) -> i64 {
        self.gold_count as i64 - self.alt_count as i64
    }
}

/// Min, inclusive-median quartiles, max and mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FiveNumberSummary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

impl FiveNumberSummary {
    /// Quartiles are medians of the lower and upper halves, each including
    /// the overall median when the count is odd. Fails on empty input.
    pub fn from_values(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidArgument("summary of no values".into()));
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        let half = n.div_ceil(2);
        Ok(Self {
            min: v[0],
            q1: median_sorted(&v[..half]),
            median: median_sorted(&v),
            q3: median_sorted(&v[n - half..]),
            max: v[n - 1],
            mean: v.iter().sum::<f64>() / n as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DropReport {
    pub per_run: Vec<RunDrop>,
    pub summary: FiveNumberSummary,
}

impl DropReport {
    pub fn total_drop(&self) -> usize {
        self.per_run.iter().map(|r| r.drop).sum()
    }
}

pub fn per_run_drops(gold: &SignificanceSet, alt: &SignificanceSet) -> Result<DropReport> {
    if gold.run_tags() != alt.run_tags() {
        return Err(Error::PoolMismatch);
    }
    let m = gold.num_runs();
    let gold_counts = degrees(m, gold.pairs().iter().copied());
    let alt_counts = degrees(m, alt.pairs().iter().copied());
    let drops = degrees(m, gold.pairs().iter().copied().filter(|&p| !alt.contains(p)));
    let per_run: Vec<RunDrop> = (0..m)
        .map(|r| RunDrop {
            run_tag: gold.run_tags()[r].clone(),
            gold_count: gold_counts[r],
            alt_count: alt_counts[r],
            drop: drops[r],
        })
        .collect();
    let values: Vec<f64> = per_run.iter().map(|r| r.drop as f64).collect();
    Ok(DropReport {
        summary: FiveNumberSummary::from_values(&values)?,
        per_run,
    })
}

pub const DROPS_HEADER: [&str; 5] = ["run", "gold_count", "alt_count", "drop", "signed_delta"];
pub const SUMMARY_HEADER: [&str; 8] = ["dataset", "metric", "min", "q1", "median", "q3", "max", "mean"];

pub fn write_drops_csv<W: Write>(out: W, report: &DropReport) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DROPS_HEADER).map_err(csv_err)?;
    for r in &report.per_run {
        w.write_record([
            r.run_tag.clone(),
            r.gold_count.to_string(),
            r.alt_count.to_string(),
            r.drop.to_string(),
            r.signed_delta().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Validation(e.to_string()))
}

pub fn summary_record(dataset: &str, metric: &str, s: &FiveNumberSummary) -> Vec<String> {
    let mut rec = vec![dataset.to_owned(), metric.to_owned()];
    rec.extend([s.min, s.q1, s.median, s.q3, s.max, s.mean].iter().map(|v| format!("{v}")));
    rec
}

pub fn write_summary_csv<W: Write>(out: W, rows: &[(String, String, FiveNumberSummary)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER).map_err(csv_err)?;
    for (d, m, s) in rows {
        w.write_record(summary_record(d, m, s)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Validation(e.to_string()))
}
