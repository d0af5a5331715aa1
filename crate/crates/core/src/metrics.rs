//! Per-topic effectiveness (AP, NDCG@k) and run × topic score matrices.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::numfmt;
use crate::trec_io::{Qrels, RankedList, RunPool, TopicId};
use crate::Warning;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    Ap,
    Ndcg,
}

/// Gain function applied to relevance grades in DCG.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Gain {
    /// `gain(g) = g`
    #[default]
    Linear,
    /// `gain(g) = 2^g - 1`
    Exponential,
}

impl Gain {
    fn apply(self, grade: u32) -> f64 {
        match self {
            Gain::Linear => f64::from(grade),
            Gain::Exponential => 2f64.powi(grade as i32) - 1.0,
        }
    }
}

/// Which metric to compute and how deep.
///
/// `relevance_threshold` is the minimum grade counted as relevant by AP.
/// NDCG uses raw grades and ignores it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MetricSpec {
    pub kind: MetricKind,
    pub cutoff: usize,
    pub relevance_threshold: u32,
    pub gain: Gain,
}

pub const DEFAULT_CUTOFF: usize = 1000;
pub const DEFAULT_RELEVANCE_THRESHOLD: u32 = 2;

impl MetricSpec {
    pub fn new(kind: MetricKind, cutoff: usize, relevance_threshold: u32, gain: Gain) -> Result<Self> {
        if cutoff == 0 {
            return Err(Error::InvalidArgument("cutoff must be at least 1".into()));
        }
        if relevance_threshold == 0 {
            return Err(Error::InvalidArgument(
                "relevance threshold must be at least 1".into(),
            ));
        }
        Ok(Self {
            kind,
            cutoff,
            relevance_threshold,
            gain,
        })
    }

    pub fn ap(cutoff: usize, relevance_threshold: u32) -> Result<Self> {
        Self::new(MetricKind::Ap, cutoff, relevance_threshold, Gain::Linear)
    }

    pub fn ndcg(cutoff: usize) -> Result<Self> {
        Self::new(MetricKind::Ndcg, cutoff, DEFAULT_RELEVANCE_THRESHOLD, Gain::Linear)
    }

    /// Grade at or above which a document makes a topic scorable.
    fn min_relevant_grade(&self) -> u32 {
        match self.kind {
            MetricKind::Ap => self.relevance_threshold,
            MetricKind::Ndcg => 1,
        }
    }
}

impl fmt::Display for MetricSpec {
    /// `ap@1000/rel>=2`, `ndcg@1000` or `ndcg-exp@1000`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match (self.kind, self.gain) {
            (MetricKind::Ap, _) => write!(f, "ap@{}/rel>={}", self.cutoff, self.relevance_threshold),
            (MetricKind::Ndcg, Gain::Linear) => write!(f, "ndcg@{}", self.cutoff),
            (MetricKind::Ndcg, Gain::Exponential) => write!(f, "ndcg-exp@{}", self.cutoff),
        }
    }
}

impl FromStr for MetricSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("unrecognized metric label {s:?}"));
        let (name, rest) = s.split_once('@').ok_or_else(bad)?;
        match name {
            "ap" => {
                let (cutoff, rel) = rest.split_once("/rel>=").ok_or_else(bad)?;
                Self::ap(
                    cutoff.parse().map_err(|_| bad())?,
                    rel.parse().map_err(|_| bad())?,
                )
            }
            "ndcg" | "ndcg-exp" => {
                let gain = if name == "ndcg" {
                    Gain::Linear
                } else {
                    Gain::Exponential
                };
                Self::new(
                    MetricKind::Ndcg,
                    rest.parse().map_err(|_| bad())?,
                    DEFAULT_RELEVANCE_THRESHOLD,
                    gain,
                )
            }
            _ => Err(bad()),
        }
    }
}

/// Maps grades to {0, 1}: 1 when `grade >= threshold`.
pub fn binarize(qrels: &Qrels, threshold: u32) -> Result<Qrels> {
    if threshold == 0 {
        return Err(Error::InvalidArgument(
            "binarization threshold must be at least 1".into(),
        ));
    }
    let mut out = Qrels::new(format!("{}@rel>={threshold}", qrels.name()));
    for (topic, docs) in qrels.iter() {
        for (doc, &grade) in docs {
            out.insert(topic.clone(), doc.clone(), u32::from(grade >= threshold));
        }
    }
    Ok(out)
}

/// Average precision over the first `cutoff` retrieved documents.
///
/// Any positive grade counts as relevant, so graded qrels should be passed
/// through [`binarize`] first. Unjudged documents are non-relevant. The
/// normalizer is the total number of relevant documents for the topic,
/// retrieved or not.
pub fn average_precision(list: &RankedList, qrels: &Qrels, topic: &TopicId, cutoff: usize) -> Result<f64> {
    let num_rel = qrels.count_at_least(topic.as_str(), 1);
    if num_rel == 0 {
        return Err(Error::NoRelevant {
            topic: topic.to_string(),
        });
    }
    let judged = qrels.topic(topic.as_str());
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (i, doc) in list.docs().take(cutoff).enumerate() {
        let relevant = judged.and_then(|j| j.get(doc)).is_some_and(|&g| g > 0);
        if relevant {
            hits += 1;
            sum += hits as f64 / (i + 1) as f64;
        }
    }
    Ok(sum / num_rel as f64)
}

/// NDCG at depth `k` with a `log2(rank + 1)` discount.
///
/// The ideal ordering is built from every judged document of the topic.
pub fn ndcg_at_k(list: &RankedList, qrels: &Qrels, topic: &TopicId, k: usize, gain: Gain) -> Result<f64> {
    let judged = qrels.topic(topic.as_str());
    let mut ideal: Vec<u32> = judged
        .map(|j| j.values().copied().filter(|&g| g > 0).collect())
        .unwrap_or_default();
    if ideal.is_empty() {
        return Err(Error::NoRelevant {
            topic: topic.to_string(),
        });
    }
    ideal.sort_unstable_by(|a, b| b.cmp(a));

    let discount = |i: usize| ((i + 2) as f64).log2();
    let idcg: f64 = ideal
        .iter()
        .take(k)
        .enumerate()
        .map(|(i, &g)| gain.apply(g) / discount(i))
        .sum();
    let dcg: f64 = list
        .docs()
        .take(k)
        .enumerate()
        .filter_map(|(i, doc)| {
            let g = *judged?.get(doc)?;
            (g > 0).then(|| gain.apply(g) / discount(i))
        })
        .sum();
    Ok(dcg / idcg)
}

/// Per-run, per-topic scores for one metric under one qrels set.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    run_tags: Vec<String>,
    topic_ids: Vec<TopicId>,
    /// Row-major, `run_tags.len() × topic_ids.len()`.
    values: Vec<f64>,
    metric: MetricSpec,
    qrels_name: String,
}

impl ScoreMatrix {
    /// Builds a matrix from rows. Every value must be finite and in `[0, 1]`.
    pub fn from_rows(
        run_tags: Vec<String>,
        topic_ids: Vec<TopicId>,
        rows: Vec<Vec<f64>>,
        metric: MetricSpec,
        qrels_name: impl Into<String>,
    ) -> Result<Self> {
        if rows.len() != run_tags.len() {
            return Err(Error::Validation(format!(
                "{} rows for {} runs",
                rows.len(),
                run_tags.len()
            )));
        }
        let mut values = Vec::with_capacity(rows.len() * topic_ids.len());
        for (tag, row) in run_tags.iter().zip(rows) {
            if row.len() != topic_ids.len() {
                return Err(Error::Validation(format!(
                    "run {tag} has {} values for {} topics",
                    row.len(),
                    topic_ids.len()
                )));
            }
            for (topic, &v) in topic_ids.iter().zip(&row) {
                if !v.is_finite() {
                    return Err(Error::NonFiniteScore {
                        run: tag.clone(),
                        topic: topic.to_string(),
                    });
                }
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::Validation(format!(
                        "score {v} for run {tag} on topic {topic} is outside [0, 1]"
                    )));
                }
            }
            values.extend(row);
        }
        Ok(Self {
            run_tags,
            topic_ids,
            values,
            metric,
            qrels_name: qrels_name.into(),
        })
    }

    pub fn run_tags(&self) -> &[String] {
        &self.run_tags
    }

    pub fn topic_ids(&self) -> &[TopicId] {
        &self.topic_ids
    }

    pub fn num_runs(&self) -> usize {
        self.run_tags.len()
    }

    pub fn num_topics(&self) -> usize {
        self.topic_ids.len()
    }

    pub fn metric(&self) -> MetricSpec {
        self.metric
    }

    pub fn qrels_name(&self) -> &str {
        &self.qrels_name
    }

    pub fn get(&self, run: usize, topic: usize) -> f64 {
        self.values[run * self.topic_ids.len() + topic]
    }

    pub fn row(&self, run: usize) -> &[f64] {
        let n = self.topic_ids.len();
        &self.values[run * n..(run + 1) * n]
    }

    /// Copies column `topic` (one value per run) into a new vector.
    pub fn column(&self, topic: usize) -> Vec<f64> {
        (0..self.num_runs()).map(|r| self.get(r, topic)).collect()
    }

    /// Per-run mean over topics.
    pub fn run_means(&self) -> Vec<f64> {
        let n = self.num_topics() as f64;
        (0..self.num_runs())
            .map(|r| self.row(r).iter().sum::<f64>() / n)
            .collect()
    }

    /// Keeps only the columns whose topic is in `topics`.
    pub fn select_topics(&self, topics: &BTreeSet<TopicId>) -> Result<Self> {
        let keep: Vec<usize> = (0..self.num_topics())
            .filter(|&t| topics.contains(&self.topic_ids[t]))
            .collect();
        if keep.is_empty() {
            return Err(Error::EmptyTopicSet(self.qrels_name.clone()));
        }
        let rows = (0..self.num_runs())
            .map(|r| keep.iter().map(|&t| self.get(r, t)).collect())
            .collect();
        Self::from_rows(
            self.run_tags.clone(),
            keep.iter().map(|&t| self.topic_ids[t].clone()).collect(),
            rows,
            self.metric,
            self.qrels_name.clone(),
        )
    }

    /// Writes `run,<topic>,...` CSV preceded by a `#` line naming the metric
    /// and qrels.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Validation(format!("writing score matrix: {e}"));
        writeln!(out, "# metric={} qrels={}", self.metric, self.qrels_name).map_err(io)?;
        let mut w = csv::Writer::from_writer(out);
        let header = std::iter::once("run").chain(self.topic_ids.iter().map(TopicId::as_str));
        w.write_record(header).map_err(csv_err)?;
        for (r, tag) in self.run_tags.iter().enumerate() {
            let cells = std::iter::once(tag.clone()).chain(self.row(r).iter().map(|&v| numfmt::sig10(v)));
            w.write_record(cells).map_err(csv_err)?;
        }
        w.flush().map_err(io)?;
        Ok(())
    }

    /// Reads the format produced by [`ScoreMatrix::write_csv`]. Without the
    /// leading `#` line the metric defaults to `ap@1000/rel>=2` and the qrels
    /// name to `unknown`.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut text = String::new();
        let mut input = input;
        input
            .read_to_string(&mut text)
            .map_err(|e| Error::parse(0, e.to_string()))?;
        let mut metric = MetricSpec::ap(DEFAULT_CUTOFF, DEFAULT_RELEVANCE_THRESHOLD)?;
        let mut qrels_name = "unknown".to_owned();
        if let Some(first) = text.lines().next() {
            if let Some(meta) = first.strip_prefix('#') {
                for (k, v) in meta.split_whitespace().filter_map(|kv| kv.split_once('=')) {
                    match k {
                        "metric" => metric = v.parse()?,
                        "qrels" => qrels_name = v.to_owned(),
                        _ => {}
                    }
                }
            }
        }
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header = rdr.headers().map_err(csv_err)?.clone();
        if header.get(0) != Some("run") {
            return Err(Error::parse(1, "score matrix header must start with 'run'"));
        }
        let topic_ids = header
            .iter()
            .skip(1)
            .map(TopicId::new)
            .collect::<Result<Vec<_>>>()?;
        let mut run_tags = Vec::new();
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != topic_ids.len() + 1 {
                return Err(Error::parse(
                    line,
                    format!("expected {} fields, found {}", topic_ids.len() + 1, rec.len()),
                ));
            }
            run_tags.push(rec[0].to_owned());
            let row = rec
                .iter()
                .skip(1)
                .map(|s| {
                    s.parse::<f64>()
                        .map_err(|_| Error::parse(line, format!("invalid score {s:?}")))
                })
                .collect::<Result<Vec<_>>>()?;
            rows.push(row);
        }
        Self::from_rows(run_tags, topic_ids, rows, metric, qrels_name)
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::parse(line, e.to_string())
}

/// Scores every run on every scorable topic.
///
/// Columns are the qrels topics (optionally restricted to `topics`) that have
/// at least one relevant document: grade >= the AP threshold, or any
/// positive grade for NDCG. Other topics are dropped with a warning. Runs
/// with no list for a topic score 0 there.
pub fn build_score_matrix(
    pool: &RunPool,
    qrels: &Qrels,
    spec: &MetricSpec,
    topics: Option<&BTreeSet<TopicId>>,
) -> Result<(ScoreMatrix, Vec<Warning>)> {
    if let Some(requested) = topics {
        if let Some(t) = requested.iter().find(|t| qrels.topic(t.as_str()).is_none()) {
            return Err(Error::InvalidArgument(format!(
                "topic {t} is not judged in {}",
                qrels.name()
            )));
        }
    }
    let mut warnings = Vec::new();
    let min_grade = spec.min_relevant_grade();
    let topic_ids: Vec<TopicId> = qrels
        .topics()
        .filter(|t| topics.is_none_or(|set| set.contains(*t)))
        .filter(|t| {
            let keep = qrels.count_at_least(t.as_str(), min_grade) > 0;
            if !keep {
                warnings.push(Warning::new(format!(
                    "topic {t} has no documents with grade >= {min_grade} in {}; excluded",
                    qrels.name()
                )));
            }
            keep
        })
        .cloned()
        .collect();
    if topic_ids.is_empty() {
        return Err(Error::EmptyTopicSet(qrels.name().to_owned()));
    }

    let binary;
    let judged = match spec.kind {
        MetricKind::Ap => {
            binary = binarize(qrels, spec.relevance_threshold)?;
            &binary
        }
        MetricKind::Ndcg => qrels,
    };
    let empty = RankedList::default();
    let rows = pool
        .runs()
        .par_iter()
        .map(|run| {
            topic_ids
                .iter()
                .map(|topic| {
                    let list = run.list(topic.as_str()).unwrap_or(&empty);
                    match spec.kind {
                        MetricKind::Ap => average_precision(list, judged, topic, spec.cutoff),
                        MetricKind::Ndcg => ndcg_at_k(list, judged, topic, spec.cutoff, spec.gain),
                    }
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let matrix = ScoreMatrix::from_rows(pool.tags(), topic_ids, rows, *spec, qrels.name())?;
    Ok((matrix, warnings))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trec_io::{parse_qrels_file, parse_run_file};

    fn qrels(text: &str) -> Qrels {
        parse_qrels_file(text.as_bytes(), "q").unwrap().0
    }

    fn topic(s: &str) -> TopicId {
        TopicId::new(s).unwrap()
    }

    fn list(docs: &[&str]) -> RankedList {
        RankedList::from_ranked_docs(docs.iter().copied()).unwrap()
    }

    #[test]
    fn binarize_thresholds() {
        let q = qrels("1 0 a 0\n1 0 b 1\n1 0 c 2\n1 0 d 3");
        let b = binarize(&q, 2).unwrap();
        let grades: Vec<_> = ["a", "b", "c", "d"].iter().map(|d| b.grade("1", d).unwrap()).collect();
        assert_eq!(grades, [0, 0, 1, 1]);
        assert_eq!(b.name(), "q@rel>=2");

        let b = binarize(&q, 1).unwrap();
        assert_eq!(b.grade("1", "d"), Some(1));
        assert_eq!(b.grade("1", "a"), Some(0));

        let zeros = binarize(&qrels("1 0 a 0\n1 0 b 0"), 1).unwrap();
        assert_eq!(zeros.count_at_least("1", 1), 0);
        assert!(binarize(&q, 0).is_err());
    }

    #[test]
    fn ap_examples() {
        let q = qrels("1 0 r1 1\n1 0 n1 0\n1 0 r2 1\n1 0 x 0");
        let t = topic("1");
        assert_eq!(average_precision(&list(&["n1", "r1", "n2", "r2"]), &q, &t, 1000).unwrap(), 0.5);

        let single = qrels("1 0 r 1");
        assert_eq!(average_precision(&list(&["r", "z"]), &single, &t, 1000).unwrap(), 1.0);

        let three = qrels("1 0 a 1\n1 0 b 1\n1 0 c 1");
        assert_eq!(average_precision(&list(&["x", "y"]), &three, &t, 1000).unwrap(), 0.0);

        assert!(matches!(
            average_precision(&list(&["x"]), &qrels("1 0 a 0"), &t, 1000),
            Err(Error::NoRelevant { .. })
        ));
    }

    #[test]
    fn ap_respects_cutoff() {
        let q = qrels("1 0 a 1\n1 0 b 1");
        let t = topic("1");
        // b at rank 3 falls outside cutoff 2
        assert_eq!(average_precision(&list(&["a", "x", "b"]), &q, &t, 2).unwrap(), 0.5);
    }

    #[test]
    fn ndcg_examples() {
        let q = qrels("1 0 two 2\n1 0 one 1\n1 0 zero 0");
        let t = topic("1");
        let v = ndcg_at_k(&list(&["zero", "two", "one"]), &q, &t, 10, Gain::Linear).unwrap();
        let dcg = 2.0 / 3f64.log2() + 1.0 / 2.0;
        let idcg = 2.0 + 1.0 / 3f64.log2();
        assert!((v - dcg / idcg).abs() < 1e-15);
        assert!((v - 0.6697).abs() < 1e-4);

        assert_eq!(ndcg_at_k(&list(&["two", "one", "zero"]), &q, &t, 10, Gain::Linear).unwrap(), 1.0);
        assert_eq!(ndcg_at_k(&list(&[]), &q, &t, 10, Gain::Linear).unwrap(), 0.0);
        assert!(ndcg_at_k(&list(&["a"]), &qrels("1 0 a 0"), &t, 10, Gain::Linear).is_err());
    }

    #[test]
    fn ndcg_exponential_gain() {
        let q = qrels("1 0 a 2\n1 0 b 1");
        let t = topic("1");
        let v = ndcg_at_k(&list(&["b", "a"]), &q, &t, 10, Gain::Exponential).unwrap();
        let expect = (1.0 + 3.0 / 3f64.log2()) / (3.0 + 1.0 / 3f64.log2());
        assert!((v - expect).abs() < 1e-15);
    }

    #[test]
    fn metric_labels_round_trip() {
        for spec in [
            MetricSpec::ap(1000, 2).unwrap(),
            MetricSpec::ap(10, 1).unwrap(),
            MetricSpec::ndcg(1000).unwrap(),
            MetricSpec::new(MetricKind::Ndcg, 5, 2, Gain::Exponential).unwrap(),
        ] {
            assert_eq!(spec.to_string().parse::<MetricSpec>().unwrap(), spec);
        }
        assert!("mrr@10".parse::<MetricSpec>().is_err());
        assert!(MetricSpec::ap(0, 2).is_err());
        assert!(MetricSpec::ap(10, 0).is_err());
    }

    fn pool() -> RunPool {
        let a = parse_run_file("1 Q0 a 1 3 A\n1 Q0 b 2 2 A\n2 Q0 c 1 1 A\n3 Q0 e 1 1 A".as_bytes(), None).unwrap();
        let b = parse_run_file("1 Q0 b 1 3 B\n3 Q0 f 1 1 B".as_bytes(), None).unwrap();
        RunPool::new(vec![b, a]).unwrap()
    }

    #[test]
    fn matrix_shape_and_rules() {
        let q = qrels("1 0 a 2\n1 0 b 1\n2 0 c 2\n3 0 e 1\n3 0 f 2\n4 0 g 0");
        let (m, w) = build_score_matrix(&pool(), &q, &MetricSpec::ndcg(1000).unwrap(), None).unwrap();
        assert_eq!(m.run_tags(), ["A", "B"]);
        let topics: Vec<_> = m.topic_ids().iter().map(|t| t.to_string()).collect();
        assert_eq!(topics, ["1", "2", "3"]);
        assert_eq!(w.len(), 1, "topic 4 has no relevant docs");
        assert_eq!(m.get(0, 0), 1.0);
        assert_eq!(m.get(1, 1), 0.0, "B retrieved nothing for topic 2");

        // topic 3 survives binarization at 2 through f
        let (ap, w) = build_score_matrix(&pool(), &q, &MetricSpec::ap(1000, 2).unwrap(), None).unwrap();
        assert_eq!(ap.num_topics(), 3);
        assert_eq!(w.len(), 1);
        assert_eq!(ap.get(0, 0), 1.0);
        assert_eq!(ap.get(1, 0), 0.0);
    }

    #[test]
    fn matrix_errors() {
        let q = qrels("1 0 a 0\n2 0 b 1");
        let spec = MetricSpec::ap(1000, 2).unwrap();
        assert!(matches!(
            build_score_matrix(&pool(), &q, &spec, None),
            Err(Error::EmptyTopicSet(_))
        ));
        let subset: BTreeSet<_> = [topic("9")].into();
        assert!(matches!(
            build_score_matrix(&pool(), &q, &spec, Some(&subset)),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn subset_equals_column_slice() {
        let q = qrels("1 0 a 2\n1 0 b 1\n2 0 c 2\n3 0 e 1\n3 0 f 2");
        let spec = MetricSpec::ndcg(1000).unwrap();
        let (full, _) = build_score_matrix(&pool(), &q, &spec, None).unwrap();
        let subset: BTreeSet<_> = [topic("1"), topic("3")].into();
        let (part, _) = build_score_matrix(&pool(), &q, &spec, Some(&subset)).unwrap();
        assert_eq!(part, full.select_topics(&subset).unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let q = qrels("1 0 a 2\n1 0 b 1\n2 0 c 2\n3 0 e 1\n3 0 f 2");
        let (m, _) = build_score_matrix(&pool(), &q, &MetricSpec::ndcg(100).unwrap(), None).unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("# metric=ndcg@100 qrels=q\nrun,1,2,3\n"), "{text}");
        let back = ScoreMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.metric(), m.metric());
        assert_eq!(back.run_tags(), m.run_tags());
        for r in 0..m.num_runs() {
            for t in 0..m.num_topics() {
                assert!((back.get(r, t) - m.get(r, t)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_out_of_range_values() {
        let spec = MetricSpec::ndcg(10).unwrap();
        assert!(ScoreMatrix::from_rows(vec!["a".into()], vec![topic("1")], vec![vec![1.5]], spec, "q").is_err());
        assert!(matches!(
            ScoreMatrix::from_rows(vec!["a".into()], vec![topic("1")], vec![vec![f64::NAN]], spec, "q"),
            Err(Error::NonFiniteScore { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn scores_in_unit_interval_and_ideal_is_one(
                (grades, order) in prop::collection::vec(0u32..4, 1..20).prop_flat_map(|g| {
                    let idx: Vec<usize> = (0..g.len()).collect();
                    (Just(g), Just(idx).prop_shuffle())
                }),
            ) {
                prop_assume!(grades.iter().any(|&g| g >= 2));
                let mut text = String::new();
                for (i, g) in grades.iter().enumerate() {
                    text.push_str(&format!("1 0 d{i} {g}\n"));
                }
                let q = qrels(&text);
                let t = topic("1");
                let docs: Vec<String> = order.iter().map(|i| format!("d{i}")).collect();
                let l = RankedList::from_ranked_docs(docs.clone()).unwrap();
                let ap = average_precision(&l, &binarize(&q, 2).unwrap(), &t, 1000).unwrap();
                let nd = ndcg_at_k(&l, &q, &t, 1000, Gain::Linear).unwrap();
                prop_assert!((0.0..=1.0).contains(&ap));
                prop_assert!((0.0..=1.0 + 1e-12).contains(&nd));

                let mut ideal = docs.clone();
                ideal.sort_by_key(|d| std::cmp::Reverse(q.grade("1", d).unwrap()));
                let il = RankedList::from_ranked_docs(ideal).unwrap();
                prop_assert_eq!(average_precision(&il, &binarize(&q, 2).unwrap(), &t, 1000).unwrap(), 1.0);
                prop_assert!((ndcg_at_k(&il, &q, &t, 1000, Gain::Linear).unwrap() - 1.0).abs() < 1e-12);
            }

            #[test]
            fn swapping_better_doc_up_never_hurts_ndcg(
                grades in prop::collection::vec(0u32..4, 2..15),
                i in 0usize..15,
                j in 0usize..15,
            ) {
                prop_assume!(grades.iter().any(|&g| g > 0));
                let n = grades.len();
                let (a, b) = (i % n, j % n);
                let (hi, lo) = (a.max(b), a.min(b));
                prop_assume!(grades[hi] > grades[lo]);
                let text: String = grades.iter().enumerate().map(|(k, g)| format!("1 0 d{k} {g}\n")).collect();
                let q = qrels(&text);
                let t = topic("1");
                let docs: Vec<String> = (0..n).map(|k| format!("d{k}")).collect();
                let mut swapped = docs.clone();
                swapped.swap(hi, lo);
                let before = ndcg_at_k(&RankedList::from_ranked_docs(docs).unwrap(), &q, &t, 1000, Gain::Linear).unwrap();
                let after = ndcg_at_k(&RankedList::from_ranked_docs(swapped).unwrap(), &q, &t, 1000, Gain::Linear).unwrap();
                prop_assert!(after >= before - 1e-15);
            }

            #[test]
            fn ap_ignores_tail_after_last_relevant(
                head in prop::collection::vec(any::<bool>(), 1..10),
                tail in 0usize..10,
            ) {
                prop_assume!(head.iter().any(|&r| r));
                let text: String = head.iter().enumerate().map(|(k, r)| format!("1 0 h{k} {}\n", u8::from(*r))).collect();
                let q = qrels(&text);
                let t = topic("1");
                let last = head.iter().rposition(|&r| r).unwrap();
                let base: Vec<String> = (0..=last).map(|k| format!("h{k}")).collect();
                let mut extended = base.clone();
                extended.extend((0..tail).map(|k| format!("tail{k}")));
                let a = average_precision(&RankedList::from_ranked_docs(base).unwrap(), &q, &t, 1000).unwrap();
                let b = average_precision(&RankedList::from_ranked_docs(extended).unwrap(), &q, &t, 1000).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
