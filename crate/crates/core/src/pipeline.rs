//! End-to-end audit: load, score, test, compare, report.

use std::fmt::Write as _;
use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::agreement::{classify_pairs, confusion_rates, write_confusion_csv, ConfusionRates};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::fairness::{per_run_drops, write_drops_csv, write_summary_csv, DropReport, DROPS_HEADER};
use crate::metrics::{build_score_matrix, csv_err, ScoreMatrix};
use crate::numfmt;
use crate::rank_corr::{correlate, write_correlation_csv, CorrelationReport};
use crate::sampling::{replicates_against_gold, tukey_seed, ReplicateConfig, ReplicateReport, TestParams};
use crate::significance::{randomized_tukey_hsd, significant_set, PValueTable};
use crate::trec_io::{read_qrels, run_files, validate_collection, CollectionStats, Qrels, RunPool};
use crate::Warning;

/// Identifies the tool build and the exact inputs of an audit.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub config: String,
    /// `(label, sha256)` per input file.
    pub inputs: Vec<(String, String)>,
}

impl Provenance {
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "tool = {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"));
        s.push_str(&self.config);
        for (label, digest) in &self.inputs {
            let _ = writeln!(s, "input {label} sha256 = {digest}");
        }
        s
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub dataset: String,
    pub metric: String,
    pub gold_stats: CollectionStats,
    pub alt_stats: CollectionStats,
    pub gold_matrix: ScoreMatrix,
    pub alt_matrix: ScoreMatrix,
    pub gold_pvalues: PValueTable,
    pub alt_pvalues: PValueTable,
    pub confusion: ConfusionRates,
    pub correlation: CorrelationReport,
    pub drops: DropReport,
    pub replicates: Option<ReplicateReport>,
    pub warnings: Vec<Warning>,
    pub provenance: Provenance,
}

/// Runs every stage on in-memory inputs.
pub fn audit(pool: &RunPool, gold_qrels: &Qrels, alt_qrels: &Qrels, cfg: &ExperimentConfig) -> Result<AuditReport> {
    let mut warnings = Vec::new();
    let (gold_stats, w) = validate_collection(pool, gold_qrels).map_err(|e| e.at_stage("validate"))?;
    warnings.extend(w);
    let (alt_stats, w) = validate_collection(pool, alt_qrels).map_err(|e| e.at_stage("validate"))?;
    warnings.extend(w);

    let (gold_matrix, w) =
        build_score_matrix(pool, gold_qrels, &cfg.metric, None).map_err(|e| e.at_stage("score gold"))?;
    warnings.extend(w);
    let (alt_matrix, w) =
        build_score_matrix(pool, alt_qrels, &cfg.metric, None).map_err(|e| e.at_stage("score alternative"))?;
    warnings.extend(w);

    let params = TestParams {
        permutations: cfg.permutations,
        alpha: cfg.alpha,
        rbo_p: cfg.rbo_p,
        tukey_seed: tukey_seed(cfg.seed),
    };
    let gold_pvalues = randomized_tukey_hsd(&gold_matrix, params.permutations, params.tukey_seed)
        .map_err(|e| e.at_stage("tukey gold"))?
        .with_alpha_hint(cfg.alpha);
    let alt_pvalues = randomized_tukey_hsd(&alt_matrix, params.permutations, params.tukey_seed)
        .map_err(|e| e.at_stage("tukey alternative"))?
        .with_alpha_hint(cfg.alpha);

    let compare = || -> Result<_> {
        let gold_sig = significant_set(&gold_pvalues, cfg.alpha)?;
        let alt_sig = significant_set(&alt_pvalues, cfg.alpha)?;
        Ok((
            confusion_rates(&classify_pairs(&gold_sig, &alt_sig)?),
            correlate(&gold_pvalues, &alt_pvalues, cfg.rbo_p)?,
            per_run_drops(&gold_sig, &alt_sig)?,
        ))
    };
    let (confusion, correlation, drops) = compare().map_err(|e| e.at_stage("compare"))?;

    let replicates = if cfg.undersample {
        let rc = ReplicateConfig {
            iterations: cfg.iterations,
            seed: cfg.seed,
            target_size: gold_matrix.num_topics(),
        };
        Some(replicates_against_gold(&gold_pvalues, &alt_matrix, &rc, &params).map_err(|e| e.at_stage("undersample"))?)
    } else {
        None
    };

    Ok(AuditReport {
        dataset: cfg.dataset.clone(),
        metric: cfg.metric.to_string(),
        gold_stats,
        alt_stats,
        gold_matrix,
        alt_matrix,
        gold_pvalues,
        alt_pvalues,
        confusion,
        correlation,
        drops,
        replicates,
        warnings,
        provenance: Provenance {
            config: cfg.echo(),
            inputs: Vec::new(),
        },
    })
}

/// Loads inputs named by `cfg` and runs [`audit`].
pub fn run_audit(cfg: &ExperimentConfig) -> Result<AuditReport> {
    let mut inputs = Vec::new();
    for path in run_files(&cfg.runs_dir).map_err(|e| e.at_stage("load runs"))? {
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        inputs.push((format!("run {name}"), sha256_file(&path)?));
    }
    inputs.push(("gold_qrels".into(), sha256_file(&cfg.gold_qrels)?));
    inputs.push(("alt_qrels".into(), sha256_file(&cfg.alt_qrels)?));

    let pool = crate::trec_io::read_run_dir(&cfg.runs_dir).map_err(|e| e.at_stage("load runs"))?;
    let (gold, mut warnings) = read_qrels(&cfg.gold_qrels).map_err(|e| e.at_stage("load gold qrels"))?;
    let (alt, w) = read_qrels(&cfg.alt_qrels).map_err(|e| e.at_stage("load alternative qrels"))?;
    warnings.extend(w);

    let mut report = audit(&pool, &gold, &alt, cfg)?;
    warnings.append(&mut report.warnings);
    report.warnings = warnings;
    report.provenance.inputs = inputs;
    Ok(report)
}

pub const PROVENANCE_FILE: &str = "provenance.txt";

const UNDERSAMPLED_FILES: [&str; 5] = [
    "replicates.csv",
    "confusion_undersampled.csv",
    "correlation_undersampled.csv",
    "drops_undersampled.csv",
    "drops_summary_undersampled.csv",
];

fn create(dir: &Path, name: &str) -> Result<BufWriter<fs::File>> {
    let path = dir.join(name);
    fs::File::create(&path)
        .map(BufWriter::new)
        .map_err(|source| Error::Io { path, source })
}

fn collection_csv(report: &AuditReport, out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "side",
        "qrels",
        "runs",
        "pairs",
        "qrels_topics",
        "relevant_topics",
        "avg_judgments_per_topic",
        "scored_topics",
    ])
    .map_err(csv_err)?;
    for (side, stats, matrix) in [
        ("gold", &report.gold_stats, &report.gold_matrix),
        ("alt", &report.alt_stats, &report.alt_matrix),
    ] {
        w.write_record([
            side.to_owned(),
            matrix.qrels_name().to_owned(),
            stats.runs.to_string(),
            stats.pairs.to_string(),
            stats.qrels_topics.to_string(),
            stats.relevant_topics.to_string(),
            format!("{}", stats.avg_judgments_per_topic),
            matrix.num_topics().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Validation(e.to_string()))
}

fn mean_drops_csv(rep: &ReplicateReport, out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DROPS_HEADER).map_err(csv_err)?;
    for d in &rep.mean_run_drops {
        w.write_record([
            d.run_tag.clone(),
            format!("{}", d.gold_count),
            format!("{}", d.alt_count),
            format!("{}", d.drop),
            format!("{}", d.signed_delta),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::Validation(e.to_string()))
}

/// Writes every report file into `dir`, returning their paths.
///
/// An existing provenance file with different content means the directory
/// holds results of other inputs or settings; that is refused unless
/// `force` is set.
pub fn write_reports(report: &AuditReport, dir: &Path, force: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_owned(),
        source,
    })?;
    let provenance = report.provenance.render();
    let prov_path = dir.join(PROVENANCE_FILE);
    if let Ok(existing) = fs::read_to_string(&prov_path) {
        if existing != provenance && !force {
            return Err(Error::Stale(format!(
                "{} was produced from different inputs or settings; use --force to overwrite",
                dir.display()
            )));
        }
    }

    let d = &report.dataset;
    let m = &report.metric;
    let mut written = Vec::new();
    let mut emit = |name: &str, f: &dyn Fn(BufWriter<fs::File>) -> Result<()>| -> Result<()> {
        f(create(dir, name)?)?;
        written.push(dir.join(name));
        Ok(())
    };
    emit("collection.csv", &|w| collection_csv(report, w))?;
    emit("scores_gold.csv", &|w| report.gold_matrix.write_csv(w))?;
    emit("scores_alt.csv", &|w| report.alt_matrix.write_csv(w))?;
    emit("pvalues_gold.csv", &|w| report.gold_pvalues.write_csv(w))?;
    emit("pvalues_alt.csv", &|w| report.alt_pvalues.write_csv(w))?;
    emit("confusion.csv", &|w| write_confusion_csv(w, &[(d.clone(), m.clone(), report.confusion)]))?;
    emit("correlation.csv", &|w| {
        write_correlation_csv(w, &[(d.clone(), m.clone(), report.correlation)])
    })?;
    emit("drops.csv", &|w| write_drops_csv(w, &report.drops))?;
    emit("drops_summary.csv", &|w| {
        write_summary_csv(w, &[(d.clone(), m.clone(), report.drops.summary)])
    })?;
    if let Some(rep) = &report.replicates {
        emit("replicates.csv", &|w| rep.write_csv(w))?;
        emit("confusion_undersampled.csv", &|w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(crate::agreement::CONFUSION_HEADER).map_err(csv_err)?;
            let (tp, fn_, tn, fp) = rep.mean_rates();
            out.write_record([
                d.clone(),
                m.clone(),
                numfmt::opt(tp),
                numfmt::opt(fn_),
                numfmt::opt(tn),
                numfmt::opt(fp),
                rep.gold_positive_count.to_string(),
                rep.gold_negative_count.to_string(),
            ])
            .map_err(csv_err)?;
            out.flush().map_err(|e| Error::Validation(e.to_string()))
        })?;
        emit("correlation_undersampled.csv", &|w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(crate::rank_corr::CORRELATION_HEADER).map_err(csv_err)?;
            let mean = |n| rep.field(n).and_then(|f| f.mean);
            out.write_record([
                d.clone(),
                m.clone(),
                numfmt::opt(mean("tau")),
                numfmt::opt(mean("rbo")),
                format!("{}", rep.rbo_p),
            ])
            .map_err(csv_err)?;
            out.flush().map_err(|e| Error::Validation(e.to_string()))
        })?;
        emit("drops_undersampled.csv", &|w| mean_drops_csv(rep, w))?;
        emit("drops_summary_undersampled.csv", &|w| {
            write_summary_csv(w, &[(d.clone(), m.clone(), rep.mean_drop_summary)])
        })?;
    }
    if report.replicates.is_none() {
        for name in UNDERSAMPLED_FILES {
            let path = dir.join(name);
            if path.exists() {
                fs::remove_file(&path).map_err(|source| Error::Io { path, source })?;
            }
        }
    }
    emit("summary.txt", &|mut w| {
        use std::io::Write;
        w.write_all(render_summary(report).as_bytes())
            .and_then(|_| w.flush())
            .map_err(|source| Error::Io {
                path: dir.join("summary.txt"),
                source,
            })
    })?;
    fs::write(&prov_path, provenance).map_err(|source| Error::Io {
        path: prov_path.clone(),
        source,
    })?;
    written.push(prov_path);
    Ok(written)
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |x| format!("{x:.0}%"))
}

fn opt2(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_owned(), |x| format!("{x:.2}"))
}

/// Plain-text digest of the report. Only formats values that also appear in
/// the CSV files.
pub fn render_summary(r: &AuditReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "dataset: {}    metric: {}", r.dataset, r.metric);
    let _ = writeln!(s, "runs: {}    pairs: {}", r.gold_stats.runs, r.gold_stats.pairs);
    let _ = writeln!(
        s,
        "scored topics: gold {}    alternative {}",
        r.gold_matrix.num_topics(),
        r.alt_matrix.num_topics()
    );
    let _ = writeln!(
        s,
        "permutations: {}    alpha: {}    seed: {}",
        r.gold_pvalues.permutations(),
        r.gold_pvalues.alpha_hint(),
        r.gold_pvalues.seed()
    );
    let c = &r.confusion;
    let _ = writeln!(s, "\n[full topic sets]  confusion.csv, correlation.csv, drops_summary.csv");
    let _ = writeln!(
        s,
        "  TP {}  FN {}  TN {}  FP {}    gold significant {}  gold not significant {}",
        pct(c.tp_pct),
        pct(c.fn_pct),
        pct(c.tn_pct),
        pct(c.fp_pct),
        c.gold_positive_count(),
        c.gold_negative_count()
    );
    let _ = writeln!(
        s,
        "  Kendall's tau {}  RBO (p = {}) {:.2}",
        opt2(r.correlation.kendall_tau),
        r.correlation.rbo_p,
        r.correlation.rbo
    );
    let d = &r.drops.summary;
    let _ = writeln!(
        s,
        "  drops: min {} q1 {} median {} q3 {} max {} mean {:.2}",
        d.min, d.q1, d.median, d.q3, d.max, d.mean
    );

    if let Some(rep) = &r.replicates {
        let (tp, fn_, tn, fp) = rep.mean_rates();
        let mean = |n| rep.field(n).and_then(|f| f.mean);
        let _ = writeln!(
            s,
            "\n[undersampled, mean of {} iterations of {} topics]  replicates.csv, confusion_undersampled.csv, correlation_undersampled.csv, drops_summary_undersampled.csv",
            rep.per_iteration.len(),
            r.gold_matrix.num_topics()
        );
        let _ = writeln!(s, "  TP {}  FN {}  TN {}  FP {}", pct(tp), pct(fn_), pct(tn), pct(fp));
        let _ = writeln!(
            s,
            "  Kendall's tau {}  RBO (p = {}) {}",
            opt2(mean("tau")),
            rep.rbo_p,
            opt2(mean("rbo"))
        );
        let excluded: Vec<String> = ["tp", "tn", "tau"]
            .iter()
            .filter_map(|&n| {
                let f = rep.field(n)?;
                (f.excluded > 0).then(|| format!("{n} undefined in {} iteration(s)", f.excluded))
            })
            .collect();
        if !excluded.is_empty() {
            let _ = writeln!(s, "  excluded from means: {}", excluded.join(", "));
        }
        let d = &rep.mean_drop_summary;
        let _ = writeln!(
            s,
            "  per-run mean drops: min {:.2} q1 {:.2} median {:.2} q3 {:.2} max {:.2} mean {:.2}",
            d.min, d.q1, d.median, d.q3, d.max, d.mean
        );
    }
    s
}
