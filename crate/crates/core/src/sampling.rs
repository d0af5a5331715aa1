//! Topic undersampling replicates.
//!
//! The alternative topic set is usually much larger than the gold one, which
//! gives its significance tests more power. Each replicate draws a random
//! alternative topic subset as large as the gold set, reruns the test on it
//! and compares against the fixed gold decisions. Per-iteration rates are
//! then averaged.

use std::collections::BTreeSet;
use std::io::Write;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::agreement::{classify_pairs, confusion_rates, ConfusionRates};
use crate::error::{Error, Result};
use crate::fairness::{per_run_drops, DropReport, FiveNumberSummary};
use crate::metrics::{build_score_matrix, csv_err, MetricSpec, ScoreMatrix};
use crate::numfmt;
use crate::rank_corr::{correlate, CorrelationReport};
use crate::seeds::derive_seed;
use crate::significance::{randomized_tukey_hsd, significant_set, PValueTable, SignificanceSet};
use crate::trec_io::{Qrels, RunPool, TopicId};

pub const DEFAULT_ITERATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReplicateConfig {
    pub iterations: usize,
    pub seed: u64,
    /// Topics per sample; normally the gold topic count.
    pub target_size: usize,
}

/// Draws `size` topics uniformly without replacement. The result depends
/// only on `(topics, size, seed, iteration)`.
pub fn undersample_topics(
    topics: &BTreeSet<TopicId>,
    size: usize,
    seed: u64,
    iteration: u64,
) -> Result<BTreeSet<TopicId>> {
    if size > topics.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot sample {size} topics from {}",
            topics.len()
        )));
    }
    let pool: Vec<&TopicId> = topics.iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "undersample", iteration));
    Ok(index::sample(&mut rng, pool.len(), size)
        .into_iter()
        .map(|i| pool[i].clone())
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationResult {
    pub topics: Vec<TopicId>,
    pub rates: ConfusionRates,
    pub correlation: CorrelationReport,
    pub drops: DropReport,
}

/// Mean and sample standard deviation of one field over iterations.
/// Iterations where the field is undefined are skipped and counted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldStats {
    pub mean: Option<f64>,
    pub stddev: Option<f64>,
    pub excluded: usize,
}

impl FieldStats {
    pub fn from_values(values: impl IntoIterator<Item = Option<f64>>) -> Self {
        let mut present = Vec::new();
        let mut excluded = 0;
        for v in values {
            match v {
                Some(x) => present.push(x),
                None => excluded += 1,
            }
        }
        let n = present.len();
        let mean = (n > 0).then(|| present.iter().sum::<f64>() / n as f64);
        let stddev = mean.filter(|_| n > 1).map(|mu| {
            (present.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (n - 1) as f64).sqrt()
        });
        Self {
            mean,
            stddev,
            excluded,
        }
    }
}

/// Per-run drop values averaged over iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanRunDrop {
    pub run_tag: String,
    pub gold_count: f64,
    pub alt_count: f64,
    pub drop: f64,
    pub signed_delta: f64,
}

/// Column names of the per-iteration fields, in CSV order.
pub const REPLICATE_FIELDS: [&str; 12] = [
    "tp", "fn", "tn", "fp", "tau", "rbo", "drop_min", "drop_q1", "drop_median", "drop_q3", "drop_max", "drop_mean",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateReport {
    pub per_iteration: Vec<IterationResult>,
    /// Aligned with [`REPLICATE_FIELDS`].
    pub fields: Vec<FieldStats>,
    pub mean_run_drops: Vec<MeanRunDrop>,
    /// Distribution of the per-run mean drops.
    pub mean_drop_summary: FiveNumberSummary,
    pub rbo_p: f64,
    pub gold_positive_count: usize,
    pub gold_negative_count: usize,
}

fn field_values(it: &IterationResult) -> [Option<f64>; 12] {
    let r = &it.rates;
    let s = &it.drops.summary;
    [
        r.tp_pct,
        r.fn_pct,
        r.tn_pct,
        r.fp_pct,
        it.correlation.kendall_tau,
        Some(it.correlation.rbo),
        Some(s.min),
        Some(s.q1),
        Some(s.median),
        Some(s.q3),
        Some(s.max),
        Some(s.mean),
    ]
}

impl ReplicateReport {
    fn from_iterations(per_iteration: Vec<IterationResult>, rbo_p: f64, gold: &SignificanceSet) -> Result<Self> {
        let rows: Vec<[Option<f64>; 12]> = per_iteration.iter().map(field_values).collect();
        let fields = (0..REPLICATE_FIELDS.len())
            .map(|f| FieldStats::from_values(rows.iter().map(|r| r[f])))
            .collect();

        let k = per_iteration.len() as f64;
        let m = gold.num_runs();
        let mean_run_drops: Vec<MeanRunDrop> = (0..m)
            .map(|r| {
                let avg = |f: &dyn Fn(&IterationResult) -> f64| per_iteration.iter().map(f).sum::<f64>() / k;
                MeanRunDrop {
                    run_tag: gold.run_tags()[r].clone(),
                    gold_count: avg(&|it| it.drops.per_run[r].gold_count as f64),
                    alt_count: avg(&|it| it.drops.per_run[r].alt_count as f64),
                    drop: avg(&|it| it.drops.per_run[r].drop as f64),
                    signed_delta: avg(&|it| it.drops.per_run[r].signed_delta() as f64),
                }
            })
            .collect();
        let drops: Vec<f64> = mean_run_drops.iter().map(|d| d.drop).collect();
        let gold_pos = gold.len();
        Ok(Self {
            mean_drop_summary: FiveNumberSummary::from_values(&drops)?,
            per_iteration,
            fields,
            mean_run_drops,
            rbo_p,
            gold_positive_count: gold_pos,
            gold_negative_count: crate::trec_io::pair_count(m) - gold_pos,
        })
    }

    pub fn field(&self, name: &str) -> Option<&FieldStats> {
        REPLICATE_FIELDS
            .iter()
            .position(|&f| f == name)
            .map(|i| &self.fields[i])
    }

    /// Mean TP, FN, TN and FP percentages.
    pub fn mean_rates(&self) -> (Option<f64>, Option<f64>, Option<f64>, Option<f64>) {
        let f = |n| self.field(n).and_then(|s| s.mean);
        (f("tp"), f("fn"), f("tn"), f("fp"))
    }

    /// One row per iteration, then `mean` and `stddev` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let header = std::iter::once("iteration").chain(REPLICATE_FIELDS);
        w.write_record(header).map_err(csv_err)?;
        for (i, it) in self.per_iteration.iter().enumerate() {
            let cells = std::iter::once(i.to_string()).chain(field_values(it).into_iter().map(numfmt::opt));
            w.write_record(cells).map_err(csv_err)?;
        }
        let footer = |label: &str, pick: fn(&FieldStats) -> Option<f64>| {
            std::iter::once(label.to_owned())
                .chain(self.fields.iter().map(|f| numfmt::opt(pick(f))))
                .collect::<Vec<_>>()
        };
        w.write_record(footer("mean", |f| f.mean)).map_err(csv_err)?;
        w.write_record(footer("stddev", |f| f.stddev)).map_err(csv_err)?;
        w.flush().map_err(|e| Error::Validation(e.to_string()))
    }
}

/// Evaluation parameters shared by every replicate.
///
/// All Tukey tests of one audit use `tukey_seed`, so the gold side and every
/// replicate see the same permutation streams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestParams {
    pub permutations: u64,
    pub alpha: f64,
    pub rbo_p: f64,
    pub tukey_seed: u64,
}

/// Seed of every Tukey test in an audit with master seed `master`.
pub fn tukey_seed(master: u64) -> u64 {
    derive_seed(master, "tukey", 0)
}

/// Replicates against precomputed gold p-values and the full alternative
/// score matrix; each sample is a column subset of `alt_matrix`.
pub fn replicates_against_gold(
    gold_pvalues: &PValueTable,
    alt_matrix: &ScoreMatrix,
    cfg: &ReplicateConfig,
    params: &TestParams,
) -> Result<ReplicateReport> {
    if cfg.iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be at least 1".into()));
    }
    if alt_matrix.run_tags() != gold_pvalues.run_tags() {
        return Err(Error::PoolMismatch);
    }
    let gold_sig = significant_set(gold_pvalues, params.alpha)?;
    let universe: BTreeSet<TopicId> = alt_matrix.topic_ids().iter().cloned().collect();
    if cfg.target_size == 0 || cfg.target_size > universe.len() {
        return Err(Error::InvalidArgument(format!(
            "target size {} must be in 1..={}",
            cfg.target_size,
            universe.len()
        )));
    }

    let per_iteration = (0..cfg.iterations)
        .into_par_iter()
        .map(|i| {
            let run = || -> Result<IterationResult> {
                let topics = undersample_topics(&universe, cfg.target_size, cfg.seed, i as u64)?;
                let sub = alt_matrix.select_topics(&topics)?;
                let alt_p = randomized_tukey_hsd(&sub, params.permutations, params.tukey_seed)?;
                let alt_sig = significant_set(&alt_p, params.alpha)?;
                Ok(IterationResult {
                    topics: topics.into_iter().collect(),
                    rates: confusion_rates(&classify_pairs(&gold_sig, &alt_sig)?),
                    correlation: correlate(gold_pvalues, &alt_p, params.rbo_p)?,
                    drops: per_run_drops(&gold_sig, &alt_sig)?,
                })
            };
            run().map_err(|e| Error::Replicate {
                iteration: i,
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    ReplicateReport::from_iterations(per_iteration, params.rbo_p, &gold_sig)
}

/// Full replicate experiment from raw inputs. Gold scores and p-values are
/// computed once on the gold topics; alternative topics are sampled down to
/// `cfg.target_size` from the scorable alternative topics.
#[allow(clippy::too_many_arguments)]
pub fn run_replicates(
    pool: &RunPool,
    gold_qrels: &Qrels,
    alt_qrels: &Qrels,
    spec: &MetricSpec,
    cfg: &ReplicateConfig,
    permutations: u64,
    alpha: f64,
    rbo_p: f64,
) -> Result<ReplicateReport> {
    let (gold_matrix, _) = build_score_matrix(pool, gold_qrels, spec, None)?;
    let params = TestParams {
        permutations,
        alpha,
        rbo_p,
        tukey_seed: tukey_seed(cfg.seed),
    };
    let gold_p = randomized_tukey_hsd(&gold_matrix, permutations, params.tukey_seed)?;
    let (alt_matrix, _) = build_score_matrix(pool, alt_qrels, spec, None)?;
    replicates_against_gold(&gold_p, &alt_matrix, cfg, &params)
}
