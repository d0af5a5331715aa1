//! Significance-preservation audits for alternative relevance judgments.
//!
//! Given a pool of retrieval runs, a gold qrels set and an alternative qrels
//! set (for example machine-generated labels on a disjoint topic set), this
//! crate scores every run under both, computes pairwise p-values with the
//! randomized Tukey HSD permutation test, and reports how well the
//! alternative judgments reproduce the gold significance decisions:
//! confusion rates, correlations between p-value rankings of run pairs, and
//! per-run counts of lost significant differences.

pub mod agreement;
pub mod config;
pub mod error;
pub mod fairness;
pub mod metrics;
pub mod pipeline;
pub mod rank_corr;
pub mod sampling;
pub mod seeds;
pub mod significance;
pub mod trec_io;

mod numfmt;

use std::fmt;

pub use agreement::{classify_pairs, confusion_rates, ConfusionRates, Label, PairClassification};
pub use error::{Error, Result};
pub use fairness::{per_run_counts, per_run_drops, DropReport, FiveNumberSummary, RunDrop};
pub use metrics::{
    average_precision, binarize, build_score_matrix, ndcg_at_k, Gain, MetricKind, MetricSpec,
    ScoreMatrix,
};
pub use rank_corr::{correlate, kendall_tau, rank_pairs_by_pvalue, rbo, CorrelationReport, PairRanking};
pub use sampling::{run_replicates, undersample_topics, ReplicateConfig, ReplicateReport};
pub use significance::{
    exact_tukey_hsd, randomized_tukey_hsd, significant_set, PValueTable, PairId, SignificanceSet,
};
pub use trec_io::{
    parse_qrels_file, parse_run_file, validate_collection, CollectionStats, DocId, Qrels,
    RankedList, Run, RunPool, TopicId,
};

/// A non-fatal diagnostic raised while loading or scoring.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Warning(String);

impl Warning {
    pub fn new(message: impl Into<String>) -> Self {
        Self(message.into())
    }

    pub fn message(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}
