//! Command-line front end.
//!
//! Every command reads an optional flat `key=value` config file, then applies
//! `--set key=value` pairs, then dedicated flags. Exit codes: 0 on success,
//! 1 on invalid input, 2 on a failed computation.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::Value;

use crate::baselines::FeatureMode;
use crate::data::{load_dataset_dir, parse_key_values, write_atomic, Dataset, Stance};
use crate::distant::{expand_seeds, expanded_labels_csv, pmi_scores};
use crate::error::{Error, Result};
use crate::graph::{build_snapshots, build_window_snapshots, polarity_csv, polarity_timeseries, EmbeddingConfig};
use crate::harness::{
    robustness_experiment, rolling_nowcast_many, timings_csv, HarnessConfig, ModelKind, ModelSpec, RobustnessConfig,
};
use crate::synth::{generate, GenConfig};
use crate::text::{ngram_polarity_scores, ngram_scores_csv};

pub const CACHE_ENV: &str = "TMKL_CACHE_DIR";

#[derive(Debug, Parser)]
#[command(name = "tmkl", version, about = "Stance nowcasting with temporal convolution kernels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset directory.
    Synth(SynthArgs),
    /// Expand seed accounts into training labels by PMI.
    Expand(ExpandArgs),
    /// Run the rolling daily nowcast for one or more models.
    Nowcast(NowcastArgs),
    /// Measure the F1 change under appended Gaussian noise.
    Robustness(RobustnessArgs),
    /// Write n-gram polarity and network polarity tables.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// Flat key=value config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Config override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory (or file for `expand`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub days: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Threshold factor in [0, 1].
    #[arg(long)]
    pub n: Option<f64>,
    /// Use retweets up to the end of this evaluation day.
    #[arg(long)]
    pub day: Option<usize>,
}

#[derive(Debug, Args)]
pub struct NowcastArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub run: RunArgs,
    /// Comma-separated model names, or `all`.
    #[arg(long)]
    pub model: Option<String>,
    /// TEXT, NETWORK or BOTH (baselines only).
    #[arg(long)]
    pub mode: Option<String>,
}

#[derive(Debug, Args)]
pub struct RobustnessArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub run: RunArgs,
    /// Noise dimensions per user.
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub runs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Training labels replacing the dataset's own.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Kernel cache directory; falls back to `TMKL_CACHE_DIR`.
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// Sliding snapshot window; cumulative when absent.
    #[arg(long)]
    pub window_days: Option<u32>,
    #[arg(long)]
    pub ngram_max: Option<usize>,
}

/// Fully resolved settings of one command.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub data: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub models: Vec<ModelSpec>,
    pub seed: u64,
    pub jobs: usize,
    pub harness: HarnessConfig,
    pub generator: GenConfig,
    pub expand_n: f64,
    pub expand_day: Option<usize>,
    pub robustness: RobustnessConfig,
    pub window_days: Option<u32>,
    pub ngram_max: usize,
}

const KEYS: &[&str] = &[
    "data",
    "out",
    "labels",
    "model",
    "mode",
    "seed",
    "jobs",
    "cache_dir",
    "folds",
    "tick_hours",
    "horizon",
    "normalize",
    "grid_c",
    "grid_gamma",
    "grid_lambda",
    "embedding_dim",
    "embedding_samples",
    "embedding_negatives",
    "smo_tol",
    "silp_eps",
    "silp_max_iters",
    "cv_max_iter",
    "n",
    "day",
    "k",
    "runs",
    "zero_noise",
    "window_days",
    "ngram_max",
];

fn parse<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    map.get(key)
        .map(|v| {
            v.parse()
                .map_err(|_| Error::invalid(format!("`{key}` has invalid value `{v}`")))
        })
        .transpose()
}

fn parse_list(map: &BTreeMap<String, String>, key: &str) -> Result<Option<Vec<f64>>> {
    map.get(key)
        .map(|v| {
            v.split(',')
                .map(|x| {
                    x.trim()
                        .parse()
                        .map_err(|_| Error::invalid(format!("`{key}` has invalid entry `{x}`")))
                })
                .collect()
        })
        .transpose()
}

/// Applies keys naming `GenConfig` fields, typed after the defaults.
fn generator_from(map: &BTreeMap<String, String>) -> Result<(GenConfig, Vec<String>)> {
    let mut value = serde_json::to_value(GenConfig::default())?;
    let obj = value.as_object_mut().expect("struct serialises to an object");
    let mut used = Vec::new();
    for (k, v) in map {
        let Some(slot) = obj.get_mut(k) else { continue };
        let parsed = match slot {
            Value::Number(n) if n.is_f64() => v.parse::<f64>().ok().and_then(|x| serde_json::Number::from_f64(x).map(Value::Number)),
            Value::Number(n) if n.is_i64() && n.as_i64().is_some_and(|x| x < 0) => v.parse::<i64>().ok().map(Value::from),
            Value::Number(_) => v
                .parse::<u64>()
                .ok()
                .map(Value::from)
                .or_else(|| v.parse::<i64>().ok().map(Value::from)),
            _ => None,
        };
        *slot = parsed.ok_or_else(|| Error::invalid(format!("`{k}` has invalid value `{v}`")))?;
        used.push(k.clone());
    }
    let cfg: GenConfig = serde_json::from_value(value).map_err(|e| Error::invalid(e.to_string()))?;
    Ok((cfg, used))
}

fn parse_models(map: &BTreeMap<String, String>) -> Result<Vec<ModelSpec>> {
    let mode: Option<FeatureMode> = parse(map, "mode")?;
    let names = map.get("model").map(String::as_str).unwrap_or("mckl");
    if names == "all" {
        let mut out = Vec::new();
        for k in ModelKind::ALL {
            match k.fixed_mode() {
                Some(_) => out.push(ModelSpec::new(k, None)?),
                None => {
                    for m in [FeatureMode::Text, FeatureMode::Network, FeatureMode::Both] {
                        out.push(ModelSpec::new(k, Some(m))?);
                    }
                }
            }
        }
        return Ok(out);
    }
    let mut out: Vec<ModelSpec> = Vec::new();
    for name in names.split(',') {
        let spec = ModelSpec::new(name.trim().parse()?, mode)?;
        if !out.contains(&spec) {
            out.push(spec);
        }
    }
    Ok(out)
}

impl ExperimentConfig {
    /// Builds and validates the settings from merged key/value pairs.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let (mut generator, gen_keys) = generator_from(map)?;
        if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str()) && !gen_keys.contains(k)) {
            return Err(Error::invalid(format!("unknown config key `{k}`")));
        }
        let seed = parse(map, "seed")?.unwrap_or(0);
        generator.seed = seed;
        let mut h = HarnessConfig {
            seed,
            ..HarnessConfig::default()
        };
        if let Some(v) = parse(map, "folds")? {
            h.folds = v;
        }
        if let Some(v) = parse(map, "tick_hours")? {
            h.tick_hours = v;
        }
        h.horizon = parse(map, "horizon")?;
        if let Some(v) = parse(map, "normalize")? {
            h.normalize = v;
        }
        if let Some(v) = parse_list(map, "grid_c")? {
            h.grid.c = v;
        }
        if let Some(v) = parse_list(map, "grid_gamma")? {
            h.grid.gamma = v;
        }
        if let Some(v) = parse_list(map, "grid_lambda")? {
            h.grid.lambda = v;
        }
        if let Some(v) = parse(map, "embedding_dim")? {
            h.embedding.dim = v;
        }
        if let Some(v) = parse(map, "embedding_samples")? {
            h.embedding.samples_per_edge = v;
        }
        if let Some(v) = parse(map, "embedding_negatives")? {
            h.embedding.negatives = v;
        }
        if let Some(v) = parse(map, "smo_tol")? {
            h.smo.tol = v;
            h.silp.smo.tol = v;
        }
        if let Some(v) = parse(map, "silp_eps")? {
            h.silp.eps = v;
        }
        if let Some(v) = parse(map, "silp_max_iters")? {
            h.silp.max_iters = v;
        }
        if let Some(v) = parse(map, "cv_max_iter")? {
            h.cv_max_iter = v;
        }
        h.cache_dir = map
            .get("cache_dir")
            .map(PathBuf::from)
            .or_else(|| std::env::var_os(CACHE_ENV).filter(|v| !v.is_empty()).map(PathBuf::from));
        if h.grid.c.iter().chain(&h.grid.gamma).chain(&h.grid.lambda).any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::invalid("grid values must be positive and finite"));
        }
        if h.horizon == Some(0) {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        let robustness = RobustnessConfig {
            k: parse(map, "k")?.unwrap_or(25),
            runs: parse(map, "runs")?.unwrap_or(20),
            seed,
            zero_noise: parse(map, "zero_noise")?.unwrap_or(false),
        };
        let jobs = parse(map, "jobs")?.unwrap_or(1);
        if jobs == 0 {
            return Err(Error::invalid("jobs must be at least 1"));
        }
        let expand_n = parse(map, "n")?.unwrap_or(0.5);
        if !(0.0..=1.0).contains(&expand_n) {
            return Err(Error::invalid("n must lie in [0, 1]"));
        }
        Ok(ExperimentConfig {
            data: map.get("data").map(PathBuf::from),
            out: map.get("out").map(PathBuf::from),
            labels: map.get("labels").map(PathBuf::from),
            models: parse_models(map)?,
            seed,
            jobs,
            harness: h,
            generator,
            expand_n,
            expand_day: parse(map, "day")?,
            robustness,
            window_days: parse(map, "window_days")?,
            ngram_max: parse(map, "ngram_max")?.unwrap_or(2),
        })
    }

    fn data(&self) -> Result<&Path> {
        self.data.as_deref().ok_or_else(|| Error::invalid("`--data` is required"))
    }

    fn out(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| Error::invalid("`--out` is required"))
    }

    /// Loads the dataset, swapping in `labels` when given.
    ///
    /// Replacement labels never include test users.
    fn dataset(&self) -> Result<Dataset> {
        let (mut ds, report) = load_dataset_dir(self.data()?, &BTreeMap::new())?;
        if !report.flagged_users.is_empty() {
            log::warn!("{} users have no embedded token", report.flagged_users.len());
        }
        if let Some(p) = &self.labels {
            let mut labels = crate::data::read_labels(p)?;
            let before = labels.len();
            labels.retain(|u, _| !ds.test_labels.contains_key(u));
            if labels.len() < before {
                log::info!("dropped {} test users from {}", before - labels.len(), p.display());
            }
            ds.labels = labels;
        }
        Ok(ds)
    }
}

fn merged(common: &Common, flags: Vec<(&str, Option<String>)>) -> Result<BTreeMap<String, String>> {
    let mut map = match &common.config {
        Some(p) => parse_key_values(&fs::read_to_string(p).map_err(|e| Error::io(p, e))?)?,
        None => BTreeMap::new(),
    };
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::invalid(format!("`--set` expects KEY=VALUE, got `{kv}`")))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let common_flags = [
        ("seed", common.seed.map(|v| v.to_string())),
        ("jobs", common.jobs.map(|v| v.to_string())),
        ("out", common.out.as_ref().map(|p| p.display().to_string())),
    ];
    for (k, v) in common_flags.into_iter().chain(flags) {
        if let Some(v) = v {
            map.insert(k.to_string(), v);
        }
    }
    Ok(map)
}

fn path_flag(p: &Option<PathBuf>) -> Option<String> {
    p.as_ref().map(|p| p.display().to_string())
}

fn run_flags(r: &RunArgs) -> Vec<(&'static str, Option<String>)> {
    vec![
        ("data", path_flag(&r.data)),
        ("labels", path_flag(&r.labels)),
        ("horizon", r.horizon.map(|v| v.to_string())),
        ("cache_dir", path_flag(&r.cache_dir)),
    ]
}

/// Resolves a parsed command line into its settings.
pub fn resolve(command: &Command) -> Result<ExperimentConfig> {
    let map = match command {
        Command::Synth(a) => merged(&a.common, vec![("days", a.days.map(|v| v.to_string()))])?,
        Command::Expand(a) => merged(
            &a.common,
            vec![
                ("data", path_flag(&a.data)),
                ("n", a.n.map(|v| v.to_string())),
                ("day", a.day.map(|v| v.to_string())),
            ],
        )?,
        Command::Nowcast(a) => {
            let mut f = run_flags(&a.run);
            f.push(("model", a.model.clone()));
            f.push(("mode", a.mode.clone()));
            merged(&a.common, f)?
        }
        Command::Robustness(a) => {
            let mut f = run_flags(&a.run);
            f.push(("k", a.k.map(|v| v.to_string())));
            f.push(("runs", a.runs.map(|v| v.to_string())));
            merged(&a.common, f)?
        }
        Command::Analyze(a) => merged(
            &a.common,
            vec![
                ("data", path_flag(&a.data)),
                ("labels", path_flag(&a.labels)),
                ("window_days", a.window_days.map(|v| v.to_string())),
                ("ngram_max", a.ngram_max.map(|v| v.to_string())),
            ],
        )?,
    };
    ExperimentConfig::from_map(&map)
}

/// Writes the generated dataset files into `out`.
pub fn cmd_synth(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let out = cfg.out()?;
    let ds = generate(&cfg.generator)?;
    ds.write_dir(out)?;
    let files = ds.to_files()?;
    Ok(files.entries().iter().map(|(name, _)| out.join(name)).collect())
}

/// Writes `id,label,score` for the expanded label set.
pub fn cmd_expand(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let ds = cfg.dataset()?;
    let until = match cfg.expand_day {
        Some(d) => ds.day_boundary(d),
        None => ds.end_ts(),
    };
    let scores = pmi_scores(&ds.retweets, &ds.seeds, until)?;
    let labels = expand_seeds(&scores, cfg.expand_n, &ds.seeds)?;
    let out = match &cfg.out {
        Some(p) if p.extension().is_some() => p.clone(),
        Some(p) => p.join("expanded_labels.csv"),
        None => cfg.data()?.join("expanded_labels.csv"),
    };
    write_atomic(&out, expanded_labels_csv(&labels, &scores).as_bytes())?;
    let yes = labels.values().filter(|l| **l == Stance::Yes).count();
    log::info!("expanded {} seeds to {} users ({} YES)", ds.seeds.len(), labels.len(), yes);
    Ok(out)
}

/// Writes `<model>.json`, `<model>.csv` and `timings.csv` into `out`.
pub fn cmd_nowcast(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let out = cfg.out()?;
    let ds = cfg.dataset()?;
    let result = rolling_nowcast_many(&ds, &cfg.models, &cfg.harness)?;
    let mut written = Vec::new();
    for r in &result.reports {
        let json = out.join(format!("{}.json", r.model));
        write_atomic(&json, r.to_json()?.as_bytes())?;
        let csv = out.join(format!("{}.csv", r.model));
        write_atomic(&csv, r.to_csv().as_bytes())?;
        log::info!("{}: mean macro-F1 {:.4}", r.model, r.mean_macro_f1());
        written.extend([json, csv]);
    }
    let t = out.join("timings.csv");
    write_atomic(&t, timings_csv(&result.timings).as_bytes())?;
    written.push(t);
    Ok(written)
}

/// Writes `robustness.csv` and `robustness.json` into `out`.
pub fn cmd_robustness(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let out = cfg.out()?;
    let ds = cfg.dataset()?;
    let report = robustness_experiment(&ds, &cfg.harness, &cfg.robustness)?;
    let csv = out.join("robustness.csv");
    write_atomic(&csv, report.to_csv().as_bytes())?;
    let json = out.join("robustness.json");
    let mut body = serde_json::to_string_pretty(&report)?;
    body.push('\n');
    write_atomic(&json, body.as_bytes())?;
    for s in &report.summary {
        log::info!("{}: mean dF {:+.4}, std {:.4}", s.model, s.mean_delta_f1, s.std_delta_f1);
    }
    Ok(vec![csv, json])
}

/// Writes `polarity.csv` and, when tweets carry tokens, `ngrams.csv`.
pub fn cmd_analyze(cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let out = cfg.out()?;
    let ds = cfg.dataset()?;
    let mut written = Vec::new();
    let tokens = ds.user_tokens(ds.end_ts());
    if tokens.values().any(|t| !t.is_empty()) {
        let users: Vec<(String, Vec<Vec<String>>)> = tokens.into_iter().collect();
        let scores = ngram_polarity_scores(&users, &ds.labels, 1..=cfg.ngram_max.max(1))?;
        let p = out.join("ngrams.csv");
        write_atomic(&p, ngram_scores_csv(&scores).as_bytes())?;
        written.push(p);
    } else {
        log::warn!("tweets carry no tokens; skipping n-gram analysis");
    }
    let ticks = match cfg.window_days {
        Some(w) => build_window_snapshots(&ds, cfg.harness.tick_hours, w)?,
        None => build_snapshots(&ds, cfg.harness.tick_hours)?,
    };
    let emb = EmbeddingConfig {
        seed: cfg.seed,
        ..cfg.harness.embedding
    };
    let points = polarity_timeseries(&ticks, &ds.labels, &ds.test_labels, &emb)?;
    let p = out.join("polarity.csv");
    write_atomic(&p, polarity_csv(&points).as_bytes())?;
    written.push(p);
    Ok(written)
}

/// Runs a resolved command inside a pool of `cfg.jobs` threads.
pub fn execute(command: &Command, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::invalid(e.to_string()))?;
    pool.install(|| match command {
        Command::Synth(_) => cmd_synth(cfg),
        Command::Expand(_) => cmd_expand(cfg).map(|p| vec![p]),
        Command::Nowcast(_) => cmd_nowcast(cfg),
        Command::Robustness(_) => cmd_robustness(cfg),
        Command::Analyze(_) => cmd_analyze(cfg),
    })
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = resolve(&cli.command).and_then(|cfg| execute(&cli.command, &cfg));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                1
            } else {
                2
            }
        }
    }
}
