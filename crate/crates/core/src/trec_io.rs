//! TREC run and qrels parsing.
//!
//! Run lines are `topic Q0 docid rank score tag`; qrels lines are
//! `topic iteration docid grade`. Fields are separated by any mix of spaces
//! and tabs. Blank lines and lines starting with `#` are skipped.
//!
//! Retrieved lists are re-sorted by score descending, with score ties broken
//! by document id in descending byte order. This is the ordering used by
//! `trec_eval`, and both AP and NDCG depend on it. The rank column is ignored.

use std::borrow::Borrow;
use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::fs;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::Warning;

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            /// Builds an id from a non-empty token without whitespace.
            pub fn new(value: impl Into<String>) -> Result<Self> {
                let value = value.into();
                if value.is_empty() || value.chars().any(char::is_whitespace) {
                    return Err(Error::Validation(format!(
                        "{} must be a non-empty token, got {value:?}",
                        stringify!($name)
                    )));
                }
                Ok(Self(value))
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl Borrow<str> for $name {
            fn borrow(&self) -> &str {
                &self.0
            }
        }
    };
}

string_id!(
    /// Topic identifier. Compared as an exact string, so `"019"` and `"19"`
    /// are different topics.
    TopicId
);
string_id!(
    /// Document identifier.
    DocId
);

/// Graded relevance judgments keyed by (topic, document).
#[derive(Debug, Clone, PartialEq)]
pub struct Qrels {
    name: String,
    judgments: BTreeMap<TopicId, HashMap<DocId, u32>>,
}

impl Qrels {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            judgments: BTreeMap::new(),
        }
    }

    /// Inserts a judgment. Returns the previous grade, if any.
    pub fn insert(&mut self, topic: TopicId, doc: DocId, grade: u32) -> Option<u32> {
        self.judgments.entry(topic).or_default().insert(doc, grade)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn grade(&self, topic: &str, doc: &str) -> Option<u32> {
        self.judgments.get(topic)?.get(doc).copied()
    }

    /// Judgments for one topic.
    pub fn topic(&self, topic: &str) -> Option<&HashMap<DocId, u32>> {
        self.judgments.get(topic)
    }

    /// Topics with at least one judgment, in sorted order.
    pub fn topics(&self) -> impl Iterator<Item = &TopicId> {
        self.judgments.keys()
    }

    pub fn num_topics(&self) -> usize {
        self.judgments.len()
    }

    pub fn num_judgments(&self) -> usize {
        self.judgments.values().map(HashMap::len).sum()
    }

    /// Number of documents in `topic` with grade at least `min_grade`.
    pub fn count_at_least(&self, topic: &str, min_grade: u32) -> usize {
        self.judgments
            .get(topic)
            .map_or(0, |docs| docs.values().filter(|&&g| g >= min_grade).count())
    }

    pub(crate) fn iter(&self) -> impl Iterator<Item = (&TopicId, &HashMap<DocId, u32>)> {
        self.judgments.iter()
    }
}

/// One topic's retrieved documents, sorted by (score desc, doc id desc).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedList {
    entries: Vec<(DocId, f64)>,
}

fn entry_order(a: &(DocId, f64), b: &(DocId, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| b.0.cmp(&a.0))
}

impl RankedList {
    /// Sorts `entries` into ranking order. Fails on duplicate documents or
    /// non-finite scores.
    pub fn new(mut entries: Vec<(DocId, f64)>) -> Result<Self> {
        if let Some((doc, _)) = entries.iter().find(|(_, s)| !s.is_finite()) {
            return Err(Error::Validation(format!("non-finite score for document {doc}")));
        }
        entries.sort_by(entry_order);
        let mut seen = BTreeSet::new();
        for (doc, _) in &entries {
            if !seen.insert(doc) {
                return Err(Error::Validation(format!("duplicate document {doc}")));
            }
        }
        Ok(Self { entries })
    }

    /// Builds a list whose order is exactly `docs` (rank 1 first).
    pub fn from_ranked_docs<I, S>(docs: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let docs = docs
            .into_iter()
            .map(|d| DocId::new(d))
            .collect::<Result<Vec<_>>>()?;
        let n = docs.len();
        let entries = docs
            .into_iter()
            .enumerate()
            .map(|(i, d)| (d, (n - i) as f64))
            .collect();
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in rank order.
    pub fn entries(&self) -> &[(DocId, f64)] {
        &self.entries
    }

    pub fn docs(&self) -> impl Iterator<Item = &DocId> {
        self.entries.iter().map(|(d, _)| d)
    }
}

/// A named retrieval run.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    tag: String,
    lists: BTreeMap<TopicId, RankedList>,
}

impl Run {
    pub fn new(tag: impl Into<String>, lists: BTreeMap<TopicId, RankedList>) -> Result<Self> {
        let tag = tag.into();
        if tag.is_empty() {
            return Err(Error::Validation("run tag must be non-empty".into()));
        }
        Ok(Self { tag, lists })
    }

    pub fn tag(&self) -> &str {
        &self.tag
    }

    pub fn list(&self, topic: &str) -> Option<&RankedList> {
        self.lists.get(topic)
    }

    pub fn lists(&self) -> &BTreeMap<TopicId, RankedList> {
        &self.lists
    }

    /// Writes the run in TREC format with ranks recomputed from list order.
    pub fn write_trec<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for (topic, list) in &self.lists {
            for (rank, (doc, score)) in list.entries.iter().enumerate() {
                writeln!(out, "{topic} Q0 {doc} {} {score:?} {}", rank + 1, self.tag)?;
            }
        }
        Ok(())
    }
}

/// Runs sorted by tag.
#[derive(Debug, Clone, PartialEq)]
pub struct RunPool {
    runs: Vec<Run>,
}

impl RunPool {
    pub fn new(mut runs: Vec<Run>) -> Result<Self> {
        runs.sort_by(|a, b| a.tag.cmp(&b.tag));
        if let Some(w) = runs.windows(2).find(|w| w[0].tag == w[1].tag) {
            return Err(Error::Validation(format!("duplicate run tag {}", w[0].tag)));
        }
        Ok(Self { runs })
    }

    pub fn runs(&self) -> &[Run] {
        &self.runs
    }

    pub fn len(&self) -> usize {
        self.runs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.runs.is_empty()
    }

    pub fn tags(&self) -> Vec<String> {
        self.runs.iter().map(|r| r.tag.clone()).collect()
    }
}

fn content_lines<R: BufRead>(input: R) -> impl Iterator<Item = Result<(usize, String)>> {
    input
        .lines()
        .enumerate()
        .filter_map(|(i, line)| match line {
            Err(e) => Some(Err(Error::parse(i + 1, e.to_string()))),
            Ok(l) => {
                let t = l.trim();
                if t.is_empty() || t.starts_with('#') {
                    None
                } else {
                    Some(Ok((i + 1, t.to_owned())))
                }
            }
        })
}

/// Parses a TREC run file.
pub fn parse_run_file<R: BufRead>(input: R, tag_override: Option<&str>) -> Result<Run> {
    let mut tag: Option<String> = None;
    let mut raw: BTreeMap<TopicId, Vec<(DocId, f64)>> = BTreeMap::new();
    let mut seen: HashMap<(String, String), usize> = HashMap::new();

    for item in content_lines(input) {
        let (lineno, line) = item?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 6 {
            return Err(Error::parse(
                lineno,
                format!("expected 6 fields, found {}", fields.len()),
            ));
        }
        let score: f64 = fields[4]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("invalid score {:?}", fields[4])))?;
        if !score.is_finite() {
            return Err(Error::parse(lineno, format!("non-finite score {:?}", fields[4])));
        }
        match &tag {
            None => tag = Some(fields[5].to_owned()),
            Some(t) if t != fields[5] => {
                return Err(Error::parse(
                    lineno,
                    format!("mixed run tags {t:?} and {:?}", fields[5]),
                ));
            }
            Some(_) => {}
        }
        if let Some(first) = seen.insert((fields[0].to_owned(), fields[2].to_owned()), lineno) {
            return Err(Error::Validation(format!(
                "line {lineno}: document {} retrieved twice for topic {} (first at line {first})",
                fields[2], fields[0]
            )));
        }
        let topic = TopicId::new(fields[0])?;
        let doc = DocId::new(fields[2])?;
        raw.entry(topic).or_default().push((doc, score));
    }

    let Some(file_tag) = tag else {
        return Err(Error::Validation("run file is empty".into()));
    };
    let lists = raw
        .into_iter()
        .map(|(t, e)| Ok((t, RankedList::new(e)?)))
        .collect::<Result<BTreeMap<_, _>>>()?;
    Run::new(tag_override.map_or(file_tag, str::to_owned), lists)
}

/// Parses a TREC qrels file. Negative grades are clamped to 0, and repeated
/// identical judgments are accepted; both produce a warning.
pub fn parse_qrels_file<R: BufRead>(input: R, name: &str) -> Result<(Qrels, Vec<Warning>)> {
    let mut qrels = Qrels::new(name);
    let mut warnings = Vec::new();

    for item in content_lines(input) {
        let (lineno, line) = item?;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(Error::parse(
                lineno,
                format!("expected 4 fields, found {}", fields.len()),
            ));
        }
        let raw_grade: i64 = fields[3]
            .parse()
            .map_err(|_| Error::parse(lineno, format!("invalid grade {:?}", fields[3])))?;
        let grade = if raw_grade < 0 {
            warnings.push(Warning::new(format!(
                "{name} line {lineno}: negative grade {raw_grade} clamped to 0"
            )));
            0
        } else {
            u32::try_from(raw_grade)
                .map_err(|_| Error::parse(lineno, format!("grade {raw_grade} too large")))?
        };
        let topic = TopicId::new(fields[0])?;
        let doc = DocId::new(fields[2])?;
        match qrels.insert(topic, doc, grade) {
            Some(prev) if prev != grade => {
                return Err(Error::Validation(format!(
                    "line {lineno}: conflicting grades {prev} and {grade} for topic {} document {}",
                    fields[0], fields[2]
                )));
            }
            Some(_) => warnings.push(Warning::new(format!(
                "{name} line {lineno}: duplicate judgment for topic {} document {}",
                fields[0], fields[2]
            ))),
            None => {}
        }
    }
    Ok((qrels, warnings))
}

/// Reads a qrels file from disk, naming it after the file name.
pub fn read_qrels(path: &Path) -> Result<(Qrels, Vec<Warning>)> {
    let file = fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    let name = path
        .file_name()
        .map_or_else(|| "qrels".to_owned(), |s| s.to_string_lossy().into_owned());
    parse_qrels_file(std::io::BufReader::new(file), &name).map_err(|e| e.in_file(path))
}

/// Regular, non-hidden files in `dir`, sorted by name.
pub fn run_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let io_err = |source| Error::Io {
        path: dir.to_owned(),
        source,
    };
    let mut paths = Vec::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let entry = entry.map_err(io_err)?;
        let hidden = entry.file_name().to_string_lossy().starts_with('.');
        if !hidden && entry.file_type().map_err(io_err)?.is_file() {
            paths.push(entry.path());
        }
    }
    paths.sort();
    Ok(paths)
}

/// Parses every run file in `dir` into a pool.
pub fn read_run_dir(dir: &Path) -> Result<RunPool> {
    let paths = run_files(dir)?;
    let runs = paths
        .par_iter()
        .map(|path| {
            let file = fs::File::open(path).map_err(|source| Error::Io {
                path: path.clone(),
                source,
            })?;
            parse_run_file(std::io::BufReader::new(file), None).map_err(|e| e.in_file(path))
        })
        .collect::<Result<Vec<_>>>()?;
    RunPool::new(runs)
}

/// Number of unordered pairs among `m` runs.
pub const fn pair_count(m: usize) -> usize {
    if m < 2 {
        0
    } else {
        m * (m - 1) / 2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectionStats {
    pub runs: usize,
    pub pairs: usize,
    pub qrels_topics: usize,
    /// Topics with at least one document of positive grade.
    pub relevant_topics: usize,
    pub avg_judgments_per_topic: f64,
    /// Per run (pool order): qrels topics for which the run retrieved nothing.
    pub missing_topics: Vec<(String, usize)>,
}

/// Summarizes a pool against one qrels set. Runs missing qrels topics are
/// reported as warnings; those cells score 0.
pub fn validate_collection(pool: &RunPool, qrels: &Qrels) -> Result<(CollectionStats, Vec<Warning>)> {
    let m = pool.len();
    if m < 2 {
        return Err(Error::InsufficientRuns(m));
    }
    let qrels_topics = qrels.num_topics();
    let relevant_topics = qrels
        .topics()
        .filter(|t| qrels.count_at_least(t.as_str(), 1) > 0)
        .count();
    let avg_judgments_per_topic = if qrels_topics == 0 {
        0.0
    } else {
        qrels.num_judgments() as f64 / qrels_topics as f64
    };
    let mut warnings = Vec::new();
    let missing_topics = pool
        .runs()
        .iter()
        .map(|run| {
            let missing = qrels
                .topics()
                .filter(|t| run.list(t.as_str()).is_none())
                .count();
            if missing > 0 {
                warnings.push(Warning::new(format!(
                    "run {} has no results for {missing} topic(s) judged in {}; scored 0",
                    run.tag(),
                    qrels.name()
                )));
            }
            (run.tag().to_owned(), missing)
        })
        .collect();
    Ok((
        CollectionStats {
            runs: m,
            pairs: pair_count(m),
            qrels_topics,
            relevant_topics,
            avg_judgments_per_topic,
            missing_topics,
        },
        warnings,
    ))
}
