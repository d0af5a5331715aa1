//! Confusion between gold and alternative significance decisions.
//!
//! Rates are normalized by the gold class sizes: TP and FN over gold
//! significant pairs, TN and FP over gold non-significant pairs. A rate whose
//! gold class is empty is undefined and reported as `None` (`NA`).

use std::io::Write;

use crate::error::{Error, Result};
use crate::metrics::csv_err;
use crate::numfmt;
use crate::significance::{PairId, SignificanceSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    TruePositive,
    FalseNegative,
    TrueNegative,
    FalsePositive,
}

impl Label {
    pub fn from_decisions(gold_significant: bool, alt_significant: bool) -> Self {
        match (gold_significant, alt_significant) {
            (true, true) => Label::TruePositive,
            (true, false) => Label::FalseNegative,
            (false, false) => Label::TrueNegative,
            (false, true) => Label::FalsePositive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairClassification {
    pub pair: PairId,
    pub gold_significant: bool,
    pub alt_significant: bool,
    pub label: Label,
}

/// Labels every canonical pair. Both sets must come from the same run pool.
pub fn classify_pairs(gold: &SignificanceSet, alt: &SignificanceSet) -> Result<Vec<PairClassification>> {
    if gold.run_tags() != alt.run_tags() {
        return Err(Error::PoolMismatch);
    }
    Ok(PairId::all(gold.num_runs())
        .map(|pair| {
            let g = gold.contains(pair);
            let a = alt.contains(pair);
            PairClassification {
                pair,
                gold_significant: g,
                alt_significant: a,
                label: Label::from_decisions(g, a),
            }
        })
        .collect())
}

/// Label counts and the derived percentages.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionRates {
    pub tp: usize,
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
    pub tp_pct: Option<f64>,
    pub fn_pct: Option<f64>,
    pub tn_pct: Option<f64>,
    pub fp_pct: Option<f64>,
}

impl ConfusionRates {
    pub fn from_counts(tp: usize, fn_: usize, tn: usize, fp: usize) -> Self {
        let pct = |k: usize, total: usize| (total > 0).then(|| (100 * k) as f64 / total as f64);
        Self {
            tp,
            fn_,
            tn,
            fp,
            tp_pct: pct(tp, tp + fn_),
            fn_pct: pct(fn_, tp + fn_),
            tn_pct: pct(tn, tn + fp),
            fp_pct: pct(fp, tn + fp),
        }
    }

    pub fn gold_positive_count(&self) -> usize {
        self.tp + self.fn_
    }

    pub fn gold_negative_count(&self) -> usize {
        self.tn + self.fp
    }
}

pub fn confusion_rates(classifications: &[PairClassification]) -> ConfusionRates {
    let count = |l: Label| classifications.iter().filter(|c| c.label == l).count();
    ConfusionRates::from_counts(
        count(Label::TruePositive),
        count(Label::FalseNegative),
        count(Label::TrueNegative),
        count(Label::FalsePositive),
    )
}

pub const CONFUSION_HEADER: [&str; 8] = ["dataset", "metric", "tp", "fn", "tn", "fp", "gold_pos", "gold_neg"];

/// One `dataset,metric,tp,fn,tn,fp,gold_pos,gold_neg` row. Percentages are
/// written at full precision; `NA` marks an empty gold class.
pub fn confusion_record(dataset: &str, metric: &str, r: &ConfusionRates) -> Vec<String> {
    vec![
        dataset.to_owned(),
        metric.to_owned(),
        numfmt::opt(r.tp_pct),
        numfmt::opt(r.fn_pct),
        numfmt::opt(r.tn_pct),
        numfmt::opt(r.fp_pct),
        r.gold_positive_count().to_string(),
        r.gold_negative_count().to_string(),
    ]
}

pub fn write_confusion_csv<W: Write>(out: W, rows: &[(String, String, ConfusionRates)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CONFUSION_HEADER).map_err(csv_err)?;
    for (dataset, metric, r) in rows {
        w.write_record(confusion_record(dataset, metric, r)).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Validation(e.to_string()))
}
