//! Audit configuration: flat `key = value` files overlaid by command-line
//! flags.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{Gain, MetricKind, MetricSpec, DEFAULT_CUTOFF, DEFAULT_RELEVANCE_THRESHOLD};
use crate::rank_corr::DEFAULT_RBO_P;
use crate::sampling::DEFAULT_ITERATIONS;

pub const DEFAULT_PERMUTATIONS: u64 = 100_000;
pub const DEFAULT_ALPHA: f64 = 0.05;
pub const DEFAULT_SEED: u64 = 0;

/// Fully resolved audit settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub runs_dir: PathBuf,
    pub gold_qrels: PathBuf,
    pub alt_qrels: PathBuf,
    pub metric: MetricSpec,
    pub permutations: u64,
    pub alpha: f64,
    pub rbo_p: f64,
    pub iterations: usize,
    pub undersample: bool,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub dataset: String,
    pub force: bool,
}

impl ExperimentConfig {
    /// Settings that determine results, as `key = value` lines. Paths and
    /// output options are left out; inputs are identified by digest.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "dataset = {}", self.dataset);
        let _ = writeln!(s, "metric = {}", self.metric);
        let _ = writeln!(s, "permutations = {}", self.permutations);
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "rbo_p = {}", self.rbo_p);
        let _ = writeln!(s, "undersample = {}", self.undersample);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "seed = {}", self.seed);
        s
    }
}

/// Settings from one source; unset fields fall through to the next layer.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialConfig {
    pub runs_dir: Option<PathBuf>,
    pub gold_qrels: Option<PathBuf>,
    pub alt_qrels: Option<PathBuf>,
    pub metric: Option<MetricKind>,
    pub cutoff: Option<usize>,
    pub rel_threshold: Option<u32>,
    pub gain: Option<Gain>,
    pub permutations: Option<u64>,
    pub alpha: Option<f64>,
    pub rbo_p: Option<f64>,
    pub iterations: Option<usize>,
    pub undersample: Option<bool>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub dataset: Option<String>,
    pub force: Option<bool>,
}

pub fn parse_metric_kind(s: &str) -> Result<MetricKind> {
    match s.to_ascii_lowercase().as_str() {
        "ap" | "map" => Ok(MetricKind::Ap),
        "ndcg" => Ok(MetricKind::Ndcg),
        _ => Err(Error::Config(format!("unknown metric {s:?} (expected ap or ndcg)"))),
    }
}

pub fn parse_gain(s: &str) -> Result<Gain> {
    match s.to_ascii_lowercase().as_str() {
        "linear" => Ok(Gain::Linear),
        "exponential" | "exp" => Ok(Gain::Exponential),
        _ => Err(Error::Config(format!("unknown gain {s:?} (expected linear or exponential)"))),
    }
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" | "on" => Some(true),
        "false" | "no" | "0" | "off" => Some(false),
        _ => None,
    }
}

impl PartialConfig {
    /// Parses config file text. Relative paths resolve against `base_dir`.
    pub fn from_text(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let lineno = i + 1;
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| Error::Config(format!("line {lineno}: expected key = value")))?;
            let bad = || Error::Config(format!("line {lineno}: invalid value {value:?} for {key}"));
            let path = || base_dir.join(value);
            match key {
                "runs_dir" => cfg.runs_dir = Some(path()),
                "gold_qrels" => cfg.gold_qrels = Some(path()),
                "alt_qrels" => cfg.alt_qrels = Some(path()),
                "output_dir" => cfg.output_dir = Some(path()),
                "metric" => cfg.metric = Some(parse_metric_kind(value)?),
                "gain" => cfg.gain = Some(parse_gain(value)?),
                "cutoff" => cfg.cutoff = Some(value.parse().map_err(|_| bad())?),
                "rel_threshold" => cfg.rel_threshold = Some(value.parse().map_err(|_| bad())?),
                "permutations" => cfg.permutations = Some(value.parse().map_err(|_| bad())?),
                "alpha" => cfg.alpha = Some(value.parse().map_err(|_| bad())?),
                "rbo_p" => cfg.rbo_p = Some(value.parse().map_err(|_| bad())?),
                "iterations" => cfg.iterations = Some(value.parse().map_err(|_| bad())?),
                "seed" => cfg.seed = Some(value.parse().map_err(|_| bad())?),
                "undersample" => cfg.undersample = Some(parse_bool(value).ok_or_else(bad)?),
                "force" => cfg.force = Some(parse_bool(value).ok_or_else(bad)?),
                "dataset" => cfg.dataset = Some(value.to_owned()),
                _ => return Err(Error::Config(format!("line {lineno}: unknown key {key:?}"))),
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_owned(),
            source,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_text(&text, base).map_err(|e| e.in_file(path))
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(self, top: PartialConfig) -> PartialConfig {
        PartialConfig {
            runs_dir: top.runs_dir.or(self.runs_dir),
            gold_qrels: top.gold_qrels.or(self.gold_qrels),
            alt_qrels: top.alt_qrels.or(self.alt_qrels),
            metric: top.metric.or(self.metric),
            cutoff: top.cutoff.or(self.cutoff),
            rel_threshold: top.rel_threshold.or(self.rel_threshold),
            gain: top.gain.or(self.gain),
            permutations: top.permutations.or(self.permutations),
            alpha: top.alpha.or(self.alpha),
            rbo_p: top.rbo_p.or(self.rbo_p),
            iterations: top.iterations.or(self.iterations),
            undersample: top.undersample.or(self.undersample),
            seed: top.seed.or(self.seed),
            output_dir: top.output_dir.or(self.output_dir),
            dataset: top.dataset.or(self.dataset),
            force: top.force.or(self.force),
        }
    }

    /// Applies defaults and validates ranges.
    pub fn resolve(self) -> Result<ExperimentConfig> {
        let need = |v: Option<PathBuf>, key: &str| v.ok_or_else(|| Error::Config(format!("missing required setting {key}")));
        let metric = MetricSpec::new(
            self.metric.unwrap_or(MetricKind::Ap),
            self.cutoff.unwrap_or(DEFAULT_CUTOFF),
            self.rel_threshold.unwrap_or(DEFAULT_RELEVANCE_THRESHOLD),
            self.gain.unwrap_or_default(),
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        let permutations = self.permutations.unwrap_or(DEFAULT_PERMUTATIONS);
        if permutations == 0 {
            return Err(Error::Config("permutations must be at least 1".into()));
        }
        let alpha = self.alpha.unwrap_or(DEFAULT_ALPHA);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!("alpha must be in (0, 1), got {alpha}")));
        }
        let rbo_p = self.rbo_p.unwrap_or(DEFAULT_RBO_P);
        if !(rbo_p > 0.0 && rbo_p < 1.0) {
            return Err(Error::Config(format!("rbo_p must be in (0, 1), got {rbo_p}")));
        }
        let iterations = self.iterations.unwrap_or(DEFAULT_ITERATIONS);
        if iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        Ok(ExperimentConfig {
            runs_dir: need(self.runs_dir, "runs_dir")?,
            gold_qrels: need(self.gold_qrels, "gold_qrels")?,
            alt_qrels: need(self.alt_qrels, "alt_qrels")?,
            output_dir: need(self.output_dir, "output_dir")?,
            metric,
            permutations,
            alpha,
            rbo_p,
            iterations,
            undersample: self.undersample.unwrap_or(false),
            seed: self.seed.unwrap_or(DEFAULT_SEED),
            dataset: self.dataset.unwrap_or_else(|| "dataset".to_owned()),
            force: self.force.unwrap_or(false),
        })
    }
}
