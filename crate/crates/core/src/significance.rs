//! Pairwise p-values by the two-sided randomized Tukey HSD test.
//!
//! For runs `i` and `j` the observed statistic is `|mean_i - mean_j|` over
//! topics. Each permutation independently shuffles every topic column across
//! runs and records the range `max mean - min mean` of the permuted run
//! means, i.e. the largest pairwise difference. The p-value of a pair is the
//! fraction of permutations whose range reaches the pair's observed
//! difference, so every pair is tested against the same family-wise null
//! distribution.
//!
//! Randomness is counter-based: permutation `b` uses ChaCha stream `b` and
//! topic `t` starts at a fixed word offset inside it. Any permutation can be
//! regenerated on its own, so results do not depend on how the work is
//! split across threads.

use std::collections::BTreeSet;
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metrics::{csv_err, ScoreMatrix};
use crate::trec_io::pair_count;

/// Permuted ranges within this distance below an observed difference still
/// count as reaching it. Means are sums of the same values added in
/// different orders, so mathematically equal statistics can differ by a few
/// ulps.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Largest number of within-topic assignments [`exact_tukey_hsd`] enumerates.
pub const EXACT_LIMIT: f64 = 1e7;

/// Words reserved per topic inside one permutation's stream.
const TOPIC_STRIDE_BITS: u32 = 32;

/// Permutations handed to a worker at a time.
const CHUNK: u64 = 512;

/// An unordered pair of run indices, stored with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PairId {
    a: usize,
    b: usize,
}

impl PairId {
    /// Canonicalizes `(x, y)`. Fails when `x == y`.
    pub fn new(x: usize, y: usize) -> Result<Self> {
        if x == y {
            return Err(Error::InvalidArgument(format!("pair of run {x} with itself")));
        }
        Ok(Self {
            a: x.min(y),
            b: x.max(y),
        })
    }

    pub fn a(self) -> usize {
        self.a
    }

    pub fn b(self) -> usize {
        self.b
    }

    pub fn contains(self, run: usize) -> bool {
        self.a == run || self.b == run
    }

    /// Position of this pair in canonical order among `m` runs.
    pub fn index(self, m: usize) -> usize {
        self.a * (2 * m - self.a - 1) / 2 + (self.b - self.a - 1)
    }

    /// All pairs among `m` runs in canonical order.
    pub fn all(m: usize) -> impl Iterator<Item = PairId> {
        (0..m).flat_map(move |a| (a + 1..m).map(move |b| PairId { a, b }))
    }
}

/// P-values for every canonical run pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PValueTable {
    run_tags: Vec<String>,
    /// Canonical pair order.
    pvalues: Vec<f64>,
    permutations: u64,
    seed: u64,
    metric: String,
    qrels_name: String,
    alpha_hint: f64,
}

impl PValueTable {
    /// Builds a table from exceedance counts out of `permutations`.
    pub fn from_counts(
        run_tags: Vec<String>,
        counts: &[u64],
        permutations: u64,
        seed: u64,
        metric: impl Into<String>,
        qrels_name: impl Into<String>,
    ) -> Result<Self> {
        if counts.len() != pair_count(run_tags.len()) {
            return Err(Error::Validation(format!(
                "{} counts for {} runs",
                counts.len(),
                run_tags.len()
            )));
        }
        if permutations == 0 || counts.iter().any(|&c| c > permutations) {
            return Err(Error::Validation("exceedance count out of range".into()));
        }
        Ok(Self {
            run_tags,
            pvalues: counts.iter().map(|&c| c as f64 / permutations as f64).collect(),
            permutations,
            seed,
            metric: metric.into(),
            qrels_name: qrels_name.into(),
            alpha_hint: 0.05,
        })
    }

    pub fn with_alpha_hint(mut self, alpha: f64) -> Self {
        self.alpha_hint = alpha;
        self
    }

    pub fn run_tags(&self) -> &[String] {
        &self.run_tags
    }

    pub fn num_runs(&self) -> usize {
        self.run_tags.len()
    }

    pub fn len(&self) -> usize {
        self.pvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pvalues.is_empty()
    }

    pub fn permutations(&self) -> u64 {
        self.permutations
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn metric(&self) -> &str {
        &self.metric
    }

    pub fn qrels_name(&self) -> &str {
        &self.qrels_name
    }

    pub fn alpha_hint(&self) -> f64 {
        self.alpha_hint
    }

    pub fn pvalue(&self, pair: PairId) -> f64 {
        self.pvalues[pair.index(self.num_runs())]
    }

    /// `(pair, p)` in canonical pair order.
    pub fn iter(&self) -> impl Iterator<Item = (PairId, f64)> + '_ {
        PairId::all(self.num_runs()).zip(self.pvalues.iter().copied())
    }

    /// Writes `run_a,run_b,pvalue` CSV preceded by a `#` provenance line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let io = |e: std::io::Error| Error::Validation(format!("writing p-values: {e}"));
        writeln!(
            out,
            "# permutations={} seed={} metric={} qrels={} alpha_hint={}",
            self.permutations,
            self.seed,
            self.metric,
            self.qrels_name.replace(char::is_whitespace, "_"),
            self.alpha_hint
        )
        .map_err(io)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["run_a", "run_b", "pvalue"]).map_err(csv_err)?;
        for (pair, p) in self.iter() {
            w.write_record([
                self.run_tags[pair.a].as_str(),
                self.run_tags[pair.b].as_str(),
                &format!("{p}"),
            ])
            .map_err(csv_err)?;
        }
        w.flush().map_err(io)?;
        Ok(())
    }

    /// Reads the format produced by [`PValueTable::write_csv`]. Rows must be
    /// in canonical pair order and p-values on the `1/B` grid.
    pub fn read_csv<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input
            .read_to_string(&mut text)
            .map_err(|e| Error::parse(0, e.to_string()))?;
        let meta = text
            .lines()
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .ok_or_else(|| Error::parse(1, "missing '# permutations=...' line"))?;
        let mut permutations = None;
        let mut seed = 0;
        let mut metric = String::new();
        let mut qrels_name = String::new();
        let mut alpha_hint = 0.05;
        for (k, v) in meta.split_whitespace().filter_map(|kv| kv.split_once('=')) {
            let bad = || Error::parse(1, format!("invalid {k} value {v:?}"));
            match k {
                "permutations" => permutations = Some(v.parse::<u64>().map_err(|_| bad())?),
                "seed" => seed = v.parse().map_err(|_| bad())?,
                "metric" => metric = v.to_owned(),
                "qrels" => qrels_name = v.to_owned(),
                "alpha_hint" => alpha_hint = v.parse().map_err(|_| bad())?,
                _ => {}
            }
        }
        let permutations = permutations.ok_or_else(|| Error::parse(1, "missing permutations"))?;

        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .from_reader(text.as_bytes());
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(csv_err)?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            if rec.len() != 3 {
                return Err(Error::parse(line, "expected run_a,run_b,pvalue"));
            }
            let p: f64 = rec[2]
                .parse()
                .map_err(|_| Error::parse(line, format!("invalid p-value {:?}", &rec[2])))?;
            rows.push((rec[0].to_owned(), rec[1].to_owned(), p, line));
        }
        let Some(first) = rows.first() else {
            return Err(Error::Validation("p-value table is empty".into()));
        };
        let mut run_tags = vec![first.0.clone()];
        run_tags.extend(rows.iter().take_while(|r| r.0 == first.0).map(|r| r.1.clone()));
        let m = run_tags.len();
        if rows.len() != pair_count(m) {
            return Err(Error::Validation(format!(
                "{} rows, expected {} for {m} runs",
                rows.len(),
                pair_count(m)
            )));
        }
        let mut counts = Vec::with_capacity(rows.len());
        for (pair, (a, b, p, line)) in PairId::all(m).zip(&rows) {
            if *a != run_tags[pair.a] || *b != run_tags[pair.b] {
                return Err(Error::parse(*line, "rows are not in canonical pair order"));
            }
            let scaled = p * permutations as f64;
            let count = scaled.round();
            if !(0.0..=1.0).contains(p) || (scaled - count).abs() > 1e-6 {
                return Err(Error::parse(
                    *line,
                    format!("p-value {p} is not a multiple of 1/{permutations}"),
                ));
            }
            counts.push(count as u64);
        }
        Ok(Self::from_counts(run_tags, &counts, permutations, seed, metric, qrels_name)?
            .with_alpha_hint(alpha_hint))
    }
}

/// Pairs significant at level `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignificanceSet {
    run_tags: Vec<String>,
    alpha: f64,
    significant: BTreeSet<PairId>,
}

impl SignificanceSet {
    pub fn new(run_tags: Vec<String>, alpha: f64, significant: BTreeSet<PairId>) -> Result<Self> {
        let m = run_tags.len();
        if significant.iter().any(|p| p.b >= m) {
            return Err(Error::Validation("pair index out of range".into()));
        }
        Ok(Self {
            run_tags,
            alpha,
            significant,
        })
    }

    pub fn run_tags(&self) -> &[String] {
        &self.run_tags
    }

    pub fn num_runs(&self) -> usize {
        self.run_tags.len()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn pairs(&self) -> &BTreeSet<PairId> {
        &self.significant
    }

    pub fn contains(&self, pair: PairId) -> bool {
        self.significant.contains(&pair)
    }

    pub fn len(&self) -> usize {
        self.significant.len()
    }

    pub fn is_empty(&self) -> bool {
        self.significant.is_empty()
    }
}

/// Pairs whose p-value is strictly below `alpha`.
pub fn significant_set(table: &PValueTable, alpha: f64) -> Result<SignificanceSet> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must be in (0, 1), got {alpha}")));
    }
    let significant = table.iter().filter(|&(_, p)| p < alpha).map(|(pair, _)| pair).collect();
    SignificanceSet::new(table.run_tags.clone(), alpha, significant)
}

fn check_matrix(matrix: &ScoreMatrix) -> Result<()> {
    let m = matrix.num_runs();
    if m < 2 {
        return Err(Error::InsufficientRuns(m));
    }
    if matrix.num_topics() == 0 {
        return Err(Error::EmptyTopicSet(matrix.qrels_name().to_owned()));
    }
    Ok(())
}

/// Column-major copy: `columns[t * m + r]`.
fn columns(matrix: &ScoreMatrix) -> Vec<f64> {
    (0..matrix.num_topics()).flat_map(|t| matrix.column(t)).collect()
}

/// Observed `|mean_i - mean_j|` per canonical pair.
fn observed_differences(means: &[f64]) -> Vec<f64> {
    PairId::all(means.len())
        .map(|p| (means[p.a] - means[p.b]).abs())
        .collect()
}

/// Per-run means of a column-major matrix, summed in topic order.
fn means_of(cols: &[f64], m: usize, sums: &mut [f64]) -> f64 {
    let n = cols.len() / m;
    sums.iter_mut().for_each(|s| *s = 0.0);
    for col in cols.chunks_exact(m) {
        for (s, v) in sums.iter_mut().zip(col) {
            *s += v;
        }
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in sums.iter_mut() {
        *s /= n as f64;
        lo = lo.min(*s);
        hi = hi.max(*s);
    }
    hi - lo
}

fn exceedance_counts(observed: &[f64], mut ranges: Vec<f64>) -> Vec<u64> {
    ranges.sort_unstable_by(f64::total_cmp);
    observed
        .iter()
        .map(|&d| {
            let below = ranges.partition_point(|&r| r < d - TIE_TOLERANCE);
            (ranges.len() - below) as u64
        })
        .collect()
}

/// Randomized Tukey HSD with `permutations` random within-topic shuffles.
///
/// Output is a deterministic function of `(matrix, permutations, seed)`.
pub fn randomized_tukey_hsd(matrix: &ScoreMatrix, permutations: u64, seed: u64) -> Result<PValueTable> {
    check_matrix(matrix)?;
    if permutations == 0 {
        return Err(Error::InvalidArgument("permutations must be at least 1".into()));
    }
    let m = matrix.num_runs();
    let n = matrix.num_topics();
    let cols = columns(matrix);
    let observed = observed_differences(&matrix.run_means());
    let base = ChaCha8Rng::seed_from_u64(seed);

    let chunks = permutations.div_ceil(CHUNK);
    let ranges: Vec<f64> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut permuted = vec![0.0; m * n];
            let mut sums = vec![0.0; m];
            let mut rng = base.clone();
            let end = ((c + 1) * CHUNK).min(permutations);
            (c * CHUNK..end)
                .map(|b| {
                    rng.set_stream(b);
                    for (t, (dst, src)) in permuted
                        .chunks_exact_mut(m)
                        .zip(cols.chunks_exact(m))
                        .enumerate()
                    {
                        rng.set_word_pos((t as u128) << TOPIC_STRIDE_BITS);
                        dst.copy_from_slice(src);
                        dst.shuffle(&mut rng);
                    }
                    means_of(&permuted, m, &mut sums)
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let counts = exceedance_counts(&observed, ranges);
    PValueTable::from_counts(
        matrix.run_tags().to_vec(),
        &counts,
        permutations,
        seed,
        matrix.metric().to_string(),
        matrix.qrels_name(),
    )
}

fn all_permutations(m: usize) -> Vec<Vec<usize>> {
    if m == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in all_permutations(m - 1) {
        for pos in 0..m {
            let mut p = rest.clone();
            p.insert(pos, m - 1);
            out.push(p);
        }
    }
    out
}

/// Tukey HSD by enumerating every one of the `(m!)^n` within-topic
/// assignments. Only feasible for tiny matrices; the table's permutation
/// count is the number of assignments and its seed is 0.
pub fn exact_tukey_hsd(matrix: &ScoreMatrix) -> Result<PValueTable> {
    check_matrix(matrix)?;
    let m = matrix.num_runs();
    let n = matrix.num_topics();
    let factorial: f64 = (1..=m).map(|k| k as f64).product();
    let assignments = factorial.powi(n as i32);
    if assignments > EXACT_LIMIT {
        return Err(Error::TooLarge {
            assignments,
            limit: EXACT_LIMIT,
        });
    }
    let perms = all_permutations(m);
    let cols = columns(matrix);
    let observed = observed_differences(&matrix.run_means());

    let mut odometer = vec![0usize; n];
    let mut permuted = vec![0.0; m * n];
    let mut sums = vec![0.0; m];
    let mut ranges = Vec::with_capacity(assignments as usize);
    loop {
        for (t, &k) in odometer.iter().enumerate() {
            for (r, &src) in perms[k].iter().enumerate() {
                permuted[t * m + r] = cols[t * m + src];
            }
        }
        ranges.push(means_of(&permuted, m, &mut sums));

        let mut t = 0;
        while t < n {
            odometer[t] += 1;
            if odometer[t] < perms.len() {
                break;
            }
            odometer[t] = 0;
            t += 1;
        }
        if t == n {
            break;
        }
    }
    let total = ranges.len() as u64;
    let counts = exceedance_counts(&observed, ranges);
    PValueTable::from_counts(
        matrix.run_tags().to_vec(),
        &counts,
        total,
        0,
        matrix.metric().to_string(),
        matrix.qrels_name(),
    )
}
