use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sigaudit::agreement::write_confusion_csv;
use sigaudit::config::{parse_gain, parse_metric_kind, PartialConfig, DEFAULT_ALPHA, DEFAULT_PERMUTATIONS};
use sigaudit::fairness::{write_drops_csv, write_summary_csv};
use sigaudit::metrics::{DEFAULT_CUTOFF, DEFAULT_RELEVANCE_THRESHOLD};
use sigaudit::pipeline::{run_audit, write_reports};
use sigaudit::rank_corr::{write_correlation_csv, DEFAULT_RBO_P};
use sigaudit::sampling::tukey_seed;
use sigaudit::trec_io::{read_qrels, read_run_dir};
use sigaudit::{
    build_score_matrix, classify_pairs, confusion_rates, correlate, per_run_drops, randomized_tukey_hsd,
    significant_set, Error, Gain, MetricKind, MetricSpec, PValueTable, Result, ScoreMatrix, Warning,
};

/// Audit whether alternative relevance judgments preserve the pairwise
/// significance decisions of gold judgments.
#[derive(Parser)]
#[command(name = "sigaudit", version)]
struct Cli {
    /// Worker threads for parallel stages [default: available parallelism]
    #[arg(long, global = true, env = "SIGAUDIT_WORKERS", value_parser = clap::value_parser!(u32).range(1..))]
    workers: Option<u32>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score every run on every topic and write a score matrix CSV.
    Score(ScoreArgs),
    /// Randomized Tukey HSD p-values for every run pair.
    Tukey(TukeyArgs),
    /// Confusion rates of alternative significance decisions against gold.
    Agree(CompareArgs),
    /// Kendall's tau-b and RBO between p-value rankings of run pairs.
    Corr(CorrArgs),
    /// Per-run counts of gold significant differences lost.
    Drops(CompareArgs),
    /// Run the whole pipeline and write all reports.
    Audit(AuditArgs),
}

#[derive(Args)]
struct MetricArgs {
    /// ap or ndcg
    #[arg(long, default_value = "ap", value_parser = parse_kind)]
    metric: MetricKind,
    #[arg(long, default_value_t = DEFAULT_CUTOFF)]
    cutoff: usize,
    /// Minimum grade counted as relevant by AP
    #[arg(long, default_value_t = DEFAULT_RELEVANCE_THRESHOLD)]
    rel_threshold: u32,
    /// NDCG gain: linear or exponential
    #[arg(long, default_value = "linear", value_parser = parse_gain_arg)]
    gain: Gain,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    runs: PathBuf,
    #[arg(long)]
    qrels: PathBuf,
    #[command(flatten)]
    metric: MetricArgs,
    /// Output file [default: stdout]
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct TukeyArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PERMUTATIONS, value_parser = clap::value_parser!(u64).range(1..))]
    permutations: u64,
    /// Master seed; the test seed is derived from it
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Significance level recorded in the output header
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    /// Gold p-value CSV
    #[arg(long)]
    gold: PathBuf,
    /// Alternative p-value CSV
    #[arg(long)]
    alt: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value = "dataset")]
    dataset: String,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CorrArgs {
    #[arg(long)]
    gold: PathBuf,
    #[arg(long)]
    alt: PathBuf,
    #[arg(long, default_value_t = DEFAULT_RBO_P)]
    rbo_p: f64,
    #[arg(long, default_value = "dataset")]
    dataset: String,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AuditArgs {
    /// Flat key = value config file; flags override its values
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    runs: Option<PathBuf>,
    #[arg(long)]
    gold_qrels: Option<PathBuf>,
    #[arg(long)]
    alt_qrels: Option<PathBuf>,
    #[arg(long, value_parser = parse_kind)]
    metric: Option<MetricKind>,
    #[arg(long)]
    cutoff: Option<usize>,
    #[arg(long)]
    rel_threshold: Option<u32>,
    #[arg(long, value_parser = parse_gain_arg)]
    gain: Option<Gain>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    permutations: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    rbo_p: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    iterations: Option<u64>,
    /// Also run the undersampled replicates
    #[arg(long)]
    undersample: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Label used in report rows
    #[arg(long)]
    dataset: Option<String>,
    /// Overwrite an output directory produced from other inputs
    #[arg(long)]
    force: bool,
}

fn parse_kind(s: &str) -> std::result::Result<MetricKind, String> {
    parse_metric_kind(s).map_err(|e| e.to_string())
}

fn parse_gain_arg(s: &str) -> std::result::Result<Gain, String> {
    parse_gain(s).map_err(|e| e.to_string())
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|source| Error::Io {
            path: p.to_owned(),
            source,
        })?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn read_pvalues(path: &Path) -> Result<PValueTable> {
    PValueTable::read_csv(open(path)?).map_err(|e| e.in_file(path))
}

fn warn_all(warnings: &[Warning]) {
    for w in warnings {
        eprintln!("warning: {w}");
    }
}

fn cmd_score(a: ScoreArgs) -> Result<()> {
    let m = a.metric;
    let spec = MetricSpec::new(m.metric, m.cutoff, m.rel_threshold, m.gain)?;
    let (qrels, mut warnings) = read_qrels(&a.qrels)?;
    let pool = read_run_dir(&a.runs)?;
    let (matrix, w) = build_score_matrix(&pool, &qrels, &spec, None)?;
    warnings.extend(w);
    warn_all(&warnings);
    matrix.write_csv(output(a.out.as_deref())?)
}

fn cmd_tukey(a: TukeyArgs) -> Result<()> {
    let matrix = ScoreMatrix::read_csv(open(&a.scores)?).map_err(|e| e.in_file(&a.scores))?;
    let table = randomized_tukey_hsd(&matrix, a.permutations, tukey_seed(a.seed))?.with_alpha_hint(a.alpha);
    table.write_csv(output(a.out.as_deref())?)
}

fn cmd_agree(a: CompareArgs) -> Result<()> {
    let (gold, alt) = (read_pvalues(&a.gold)?, read_pvalues(&a.alt)?);
    let rates = confusion_rates(&classify_pairs(
        &significant_set(&gold, a.alpha)?,
        &significant_set(&alt, a.alpha)?,
    )?);
    write_confusion_csv(output(a.out.as_deref())?, &[(a.dataset, gold.metric().to_owned(), rates)])
}

fn cmd_corr(a: CorrArgs) -> Result<()> {
    let (gold, alt) = (read_pvalues(&a.gold)?, read_pvalues(&a.alt)?);
    let report = correlate(&gold, &alt, a.rbo_p)?;
    write_correlation_csv(output(a.out.as_deref())?, &[(a.dataset, gold.metric().to_owned(), report)])
}

fn cmd_drops(a: CompareArgs) -> Result<()> {
    let (gold, alt) = (read_pvalues(&a.gold)?, read_pvalues(&a.alt)?);
    let report = per_run_drops(&significant_set(&gold, a.alpha)?, &significant_set(&alt, a.alpha)?)?;
    let mut out = output(a.out.as_deref())?;
    write_drops_csv(&mut out, &report)?;
    eprintln!("total drop {}", report.total_drop());
    let mut summary = Vec::new();
    write_summary_csv(&mut summary, &[(a.dataset, gold.metric().to_owned(), report.summary)])?;
    eprint!("{}", String::from_utf8_lossy(&summary));
    Ok(())
}

fn cmd_audit(a: AuditArgs) -> Result<()> {
    let file = match &a.config {
        Some(p) => PartialConfig::from_file(p)?,
        None => PartialConfig::default(),
    };
    let flags = PartialConfig {
        runs_dir: a.runs,
        gold_qrels: a.gold_qrels,
        alt_qrels: a.alt_qrels,
        metric: a.metric,
        cutoff: a.cutoff,
        rel_threshold: a.rel_threshold,
        gain: a.gain,
        permutations: a.permutations,
        alpha: a.alpha,
        rbo_p: a.rbo_p,
        iterations: a.iterations.map(|i| i as usize),
        undersample: a.undersample.then_some(true),
        seed: a.seed,
        output_dir: a.output_dir,
        dataset: a.dataset,
        force: a.force.then_some(true),
    };
    let cfg = file.overlay(flags).resolve()?;
    let report = run_audit(&cfg)?;
    warn_all(&report.warnings);
    write_reports(&report, &cfg.output_dir, cfg.force)?;
    print!("{}", sigaudit::pipeline::render_summary(&report));
    Ok(())
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Score(a) => cmd_score(a),
        Command::Tukey(a) => cmd_tukey(a),
        Command::Agree(a) => cmd_agree(a),
        Command::Corr(a) => cmd_corr(a),
        Command::Drops(a) => cmd_drops(a),
        Command::Audit(a) => cmd_audit(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        builder = builder.num_threads(n as usize);
    }
    let result = builder
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
        .and_then(|pool| pool.install(|| dispatch(cli.command)));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
