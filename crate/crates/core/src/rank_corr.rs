//! Correlation between the p-value rankings of run pairs.
//!
//! Pairs are ranked by p-value ascending, so the most clearly different
//! pairs come first. Two rankings over the same pairs are compared with
//! Kendall's tau-b, which treats equal p-values as ties, and with
//! rank-biased overlap over the fully ordered lists (ties broken by pair id).

use std::collections::HashMap;
use std::io::Write;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::metrics::csv_err;
use crate::numfmt;
use crate::significance::{PValueTable, PairId};

pub const DEFAULT_RBO_P: f64 = 0.07;

/// Pairs ordered by `(p-value, pair id)` ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct PairRanking {
    items: Vec<PairId>,
    pvalues: Vec<f64>,
    tie_groups: Vec<Range<usize>>,
}

impl PairRanking {
    /// Ranks arbitrary `(pair, p)` items.
    pub fn from_pvalues(mut scored: Vec<(PairId, f64)>) -> Self {
        scored.sort_by(|x, y| x.1.total_cmp(&y.1).then(x.0.cmp(&y.0)));
        let mut tie_groups = Vec::new();
        let mut start = 0;
        for i in 1..=scored.len() {
            if i == scored.len() || scored[i].1 != scored[start].1 {
                tie_groups.push(start..i);
                start = i;
            }
        }
        let (items, pvalues) = scored.into_iter().unzip();
        Self {
            items,
            pvalues,
            tie_groups,
        }
    }

    pub fn items(&self) -> &[PairId] {
        &self.items
    }

    pub fn pvalues(&self) -> &[f64] {
        &self.pvalues
    }

    /// Position ranges whose items share one p-value.
    pub fn tie_groups(&self) -> &[Range<usize>] {
        &self.tie_groups
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

pub fn rank_pairs_by_pvalue(table: &PValueTable) -> PairRanking {
    PairRanking::from_pvalues(table.iter().collect())
}

/// The alt p-value of each gold item, in gold order.
fn aligned_pvalues(gold: &PairRanking, alt: &PairRanking) -> Result<Vec<f64>> {
    if gold.len() != alt.len() {
        return Err(Error::ItemMismatch);
    }
    let alt_p: HashMap<PairId, f64> = alt.items.iter().copied().zip(alt.pvalues.iter().copied()).collect();
    gold.items
        .iter()
        .map(|item| alt_p.get(item).copied().ok_or(Error::ItemMismatch))
        .collect()
}

/// Sum over tie groups of `k (k - 1) / 2` for a sorted sequence.
fn tied_pairs(sorted: &[(f64, f64)], key: impl Fn(&(f64, f64)) -> f64) -> u64 {
    let mut total = 0;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if key(&w[0]) == key(&w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Sorts by the second coordinate with a stable merge sort, returning the
/// number of inversions (pairs with strictly decreasing second coordinate).
fn merge_count(v: &mut [(f64, f64)], buf: &mut Vec<(f64, f64)>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_count(&mut v[..mid], buf) + merge_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j].1 < v[i].1 {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Kendall's tau-b between the p-values the two rankings assign to each
/// pair, in O(n log n).
///
/// `(C - D) / sqrt((n0 - n1) (n0 - n2))`, where `n1` and `n2` count item
/// pairs tied in gold and in alt respectively. Undefined, and an error, when
/// either side has a single p-value for all items.
pub fn kendall_tau(gold: &PairRanking, alt: &PairRanking) -> Result<f64> {
    let y = aligned_pvalues(gold, alt)?;
    let n = y.len();
    if n < 2 {
        return Err(Error::InvalidArgument("tau needs at least 2 items".into()));
    }
    let mut v: Vec<(f64, f64)> = gold.pvalues.iter().copied().zip(y).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let n0 = (n as u64) * (n as u64 - 1) / 2;
    let n1 = tied_pairs(&v, |p| p.0);
    let mut joint = 0u64;
    let mut run = 1u64;
    for w in v.windows(2) {
        if w[0] == w[1] {
            run += 1;
        } else {
            joint += run * (run - 1) / 2;
            run = 1;
        }
    }
    joint += run * (run - 1) / 2;

    let mut buf = Vec::with_capacity(n);
    let discordant = merge_count(&mut v, &mut buf);
    let n2 = tied_pairs(&v, |p| p.1);

    // pairs untied on both sides are concordant or discordant
    let untied = n0 + joint - n1 - n2;
    let concordant = untied - discordant;
    let denom = ((n0 - n1) as f64) * ((n0 - n2) as f64);
    if denom == 0.0 {
        return Err(Error::DegenerateRanking);
    }
    Ok((concordant as f64 - discordant as f64) / denom.sqrt())
}

/// Rank-biased overlap of two rankings over the same items, with the
/// conjoint closed-form extrapolation.
///
/// With agreement `A_d = |top_d(gold) ∩ top_d(alt)| / d` and weights
/// `w_d = (1 - p) p^(d-1)`, RBO is `Σ w_d A_d + p^k`, where `k` is the list
/// length. Since `Σ w_d + p^k = 1`, it is evaluated as `1 - Σ w_d (1 - A_d)`.
pub fn rbo(gold: &PairRanking, alt: &PairRanking, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidArgument(format!("RBO persistence must be in (0, 1), got {p}")));
    }
    if gold.len() != alt.len() {
        return Err(Error::ItemMismatch);
    }
    let index: HashMap<PairId, usize> = gold.items.iter().enumerate().map(|(i, &it)| (it, i)).collect();
    if index.len() != gold.len() {
        return Err(Error::ItemMismatch);
    }
    let alt_idx = alt
        .items
        .iter()
        .map(|it| index.get(it).copied().ok_or(Error::ItemMismatch))
        .collect::<Result<Vec<_>>>()?;

    let k = gold.len();
    let mut seen_gold = vec![false; k];
    let mut seen_alt = vec![false; k];
    let mut overlap = 0usize;
    let mut weight = 1.0 - p;
    let mut loss = 0.0;
    for (d, &a) in alt_idx.iter().enumerate() {
        let g = d;
        if g == a {
            overlap += 1;
        } else {
            if seen_alt[g] {
                overlap += 1;
            }
            if seen_gold[a] {
                overlap += 1;
            }
        }
        seen_gold[g] = true;
        seen_alt[a] = true;
        let depth = d + 1;
        loss += weight * (depth - overlap) as f64 / depth as f64;
        weight *= p;
    }
    Ok(1.0 - loss)
}

/// Correlations between one gold and one alternative p-value ranking.
/// `kendall_tau` is `None` when tau-b is undefined (a side with all p equal).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationReport {
    pub kendall_tau: Option<f64>,
    pub rbo: f64,
    pub rbo_p: f64,
}

pub fn correlate(gold: &PValueTable, alt: &PValueTable, rbo_p: f64) -> Result<CorrelationReport> {
    if gold.run_tags() != alt.run_tags() {
        return Err(Error::PoolMismatch);
    }
    let g = rank_pairs_by_pvalue(gold);
    let a = rank_pairs_by_pvalue(alt);
    let kendall_tau = match kendall_tau(&g, &a) {
        Ok(t) => Some(t),
        Err(Error::DegenerateRanking) => None,
        Err(e) => return Err(e),
    };
    Ok(CorrelationReport {
        kendall_tau,
        rbo: rbo(&g, &a, rbo_p)?,
        rbo_p,
    })
}

pub const CORRELATION_HEADER: [&str; 5] = ["dataset", "metric", "tau", "rbo", "rbo_p"];

pub fn write_correlation_csv<W: Write>(out: W, rows: &[(String, String, CorrelationReport)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CORRELATION_HEADER).map_err(csv_err)?;
    for (dataset, metric, c) in rows {
        w.write_record([
            dataset.clone(),
            metric.clone(),
            numfmt::opt(c.kendall_tau),
            format!("{}", c.rbo),
            format!("{}", c.rbo_p),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Validation(e.to_string()))
}
