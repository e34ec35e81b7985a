//! Batch command-line interface.
//!
//! Every command writes its outputs into `--out` together with a
//! `manifest.json` holding the resolved configuration, seed and options.
//! Passing that manifest back as `--config` reproduces the run; flags given
//! explicitly still take precedence over the manifest.

pub mod corpus;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::domain::{ExperimentRecord, Label};
use crate::error::{Error, Result};
use crate::evaluation::{
    final_week_observations, histogram, run_accuracy_study, run_comparison, AccuracyStudyConfig,
    ComparisonConfig, Method, PooledFilter, DEFAULT_BINS,
};
use crate::meta_models::{extract_aes, fit, fit_pooled, FitConfig, MixtureParams, RunSummary};
use crate::simulation::{
    accuracy_records, accuracy_replication, simulate_trajectory_corpus, AccuracySimConfig,
    TrajectorySimConfig,
};
use crate::utility::{optimize_aes, UtilityConfig};

pub const GENERATOR: &str = concat!("aes-select ", env!("CARGO_PKG_VERSION"));
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Parser)]
#[command(name = "aes-select", version, about = "Assumed effect size selection for experiment power analysis")]
pub struct Cli {
    /// Cap on worker threads; defaults to the machine's parallelism.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// JSON config, or a manifest from an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: Option<Kind>,
    },
    /// Fit one estimator to the final-week effects of a corpus.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: Option<FitMethod>,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Grid-search the utility-maximizing AES.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Compare estimators on a trajectory corpus, or run the accuracy study.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        kind: Option<Kind>,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Comma-separated subset of pooled_mle, two_layer_gmm, three_layer_gmm, utility_max.
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<String>>,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Histogram and summary of a corpus's observed effects.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        bins: Option<usize>,
        /// Week whose effects are binned; defaults to each experiment's last.
        #[arg(long)]
        week: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Accuracy,
    Trajectory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitMethod {
    Pooled,
    Gmm2,
    Gmm3,
}

fn enum_name<E: ValueEnum>(v: &E) -> String {
    v.to_possible_value().expect("no skipped variants").get_name().to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub generator: String,
    pub seed: u64,
    pub options: BTreeMap<String, String>,
    pub config: Value,
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PooledCommandConfig {
    pub pooled_filter: PooledFilter,
}

impl Default for PooledCommandConfig {
    fn default() -> Self {
        PooledCommandConfig {
            pooled_filter: PooledFilter::All,
        }
    }
}

/// Report-only settings for the `report` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    pub unit_label: String,
}

// ---------------------------------------------------------------------------
// config resolution

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn read_json_file(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::config(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::config(format!("{}: line {}: {e}", path.display(), e.line())))
}

/// Loaded `--config` file: either a plain config object or a manifest.
struct Loaded {
    overlay: Option<Value>,
    manifest: Option<Manifest>,
}

fn load(path: Option<&Path>, command: &str) -> Result<Loaded> {
    let Some(path) = path else {
        return Ok(Loaded {
            overlay: None,
            manifest: None,
        });
    };
    let value = read_json_file(path)?;
    let is_manifest = value.get("command").is_some() && value.get("generator").is_some();
    if is_manifest {
        let m: Manifest = serde_json::from_value(value)
            .map_err(|e| Error::config(format!("{}: malformed manifest: {e}", path.display())))?;
        if m.command != command {
            return Err(Error::config(format!(
                "manifest {} is for `{}`, not `{command}`",
                path.display(),
                m.command
            )));
        }
        Ok(Loaded {
            overlay: Some(m.config.clone()),
            manifest: Some(m),
        })
    } else {
        Ok(Loaded {
            overlay: Some(value),
            manifest: None,
        })
    }
}

impl Loaded {
    fn config<T: Serialize + DeserializeOwned>(&self, base: T) -> Result<T> {
        let Some(overlay) = &self.overlay else {
            return Ok(base);
        };
        let mut v = serde_json::to_value(base).map_err(|e| Error::config(e.to_string()))?;
        merge(&mut v, overlay.clone());
        serde_json::from_value(v).map_err(|e| Error::config(format!("invalid config: {e}")))
    }

    fn option(&self, key: &str) -> Option<&str> {
        self.manifest.as_ref()?.options.get(key).map(String::as_str)
    }

    fn option_enum<E: ValueEnum>(&self, key: &str) -> Result<Option<E>> {
        self.option(key)
            .map(|s| E::from_str(s, true).map_err(|e| Error::config(format!("manifest option {key}: {e}"))))
            .transpose()
    }

    fn option_parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.option(key)
            .map(|s| s.parse().map_err(|_| Error::config(format!("manifest option {key}: bad value `{s}`"))))
            .transpose()
    }

    fn seed(&self, flag: Option<u64>, config_seed: u64) -> u64 {
        flag.or(self.manifest.as_ref().map(|m| m.seed)).unwrap_or(config_seed)
    }
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::config(format!("missing --{flag}")))
}

// ---------------------------------------------------------------------------
// output

struct Output {
    dir: PathBuf,
    written: Vec<String>,
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    generator: &'a str,
    command: &'a str,
    seed: u64,
    config: &'a Value,
    result: &'a T,
}

impl Output {
    fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)
            .map_err(|e| Error::config(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::config(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut buf = serde_json::to_vec_pretty(value).map_err(|e| Error::config(e.to_string()))?;
        buf.push(b'\n');
        self.bytes(name, &buf)
    }

    fn table<T: Serialize>(&mut self, stem: &str, rows: &[T], format: Format) -> Result<()> {
        match format {
            Format::Json => self.json(&format!("{stem}.json"), rows),
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                for r in rows {
                    w.serialize(r).map_err(|e| Error::config(e.to_string()))?;
                }
                let buf = w.into_inner().map_err(|e| Error::config(e.to_string()))?;
                self.bytes(&format!("{stem}.csv"), &buf)
            }
        }
    }

    fn finish(mut self, command: &str, seed: u64, options: BTreeMap<String, String>, config: Value) -> Result<()> {
        let manifest = Manifest {
            command: command.to_string(),
            generator: GENERATOR.to_string(),
            seed,
            options,
            config,
            outputs: self.written.clone(),
        };
        self.json(MANIFEST_FILE, &manifest)
    }
}

fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    serde_json::to_value(v).map_err(|e| Error::config(e.to_string()))
}

// ---------------------------------------------------------------------------
// commands

pub fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::config("--threads must be at least 1"));
        }
        // Fails only if a pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match cli.command {
        Command::Simulate { common, kind } => cmd_simulate(&common, kind),
        Command::Fit { common, method, corpus } => cmd_fit(&common, method, corpus),
        Command::Optimize { common, corpus } => cmd_optimize(&common, corpus),
        Command::Evaluate {
            common,
            kind,
            corpus,
            methods,
            bins,
        } => cmd_evaluate(&common, kind, corpus, methods, bins),
        Command::Report {
            common,
            corpus,
            bins,
            week,
        } => cmd_report(&common, corpus, bins, week),
    }
}

fn format_of(common: &Common, loaded: &Loaded) -> Result<Format> {
    Ok(common
        .format
        .or(loaded.option_enum("format")?)
        .unwrap_or(Format::Csv))
}

fn corpus_path(flag: Option<PathBuf>, loaded: &Loaded) -> Result<PathBuf> {
    required(flag.or_else(|| loaded.option("corpus").map(PathBuf::from)), "corpus")
}

fn path_string(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn cmd_simulate(common: &Common, kind: Option<Kind>) -> Result<()> {
    let loaded = load(common.config.as_deref(), "simulate")?;
    let kind = required(kind.or(loaded.option_enum("kind")?), "kind")?;
    let format = format_of(common, &loaded)?;
    let mut out = Output::create(&common.out)?;
    let name = match format {
        Format::Csv => "corpus.csv",
        Format::Json => "corpus.json",
    };

    let (seed, config, records) = match kind {
        Kind::Accuracy => {
            let mut cfg = loaded.config(AccuracySimConfig::default())?;
            cfg.seed = loaded.seed(common.seed, cfg.seed);
            cfg.validate()?;
            let records = accuracy_records(&accuracy_replication(&cfg, 0)?);
            (cfg.seed, to_value(&cfg)?, records)
        }
        Kind::Trajectory => {
            let mut cfg = loaded.config(TrajectorySimConfig::default())?;
            cfg.seed = loaded.seed(common.seed, cfg.seed);
            let records = simulate_trajectory_corpus(&cfg)?;
            (cfg.seed, to_value(&cfg)?, records)
        }
    };
    write_corpus(&mut out, name, &records, format)?;

    let options = BTreeMap::from([
        ("kind".to_string(), enum_name(&kind)),
        ("format".to_string(), enum_name(&format)),
    ]);
    out.finish("simulate", seed, options, config)
}

fn write_corpus(out: &mut Output, name: &str, records: &[ExperimentRecord], format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut buf = Vec::new();
            corpus::write_csv(records, &mut buf)?;
            out.bytes(name, &buf)
        }
        Format::Json => out.json(name, records),
    }
}

#[derive(Serialize)]
struct MixtureFitResult<'a> {
    method: &'a str,
    n_observations: usize,
    aes: Option<f64>,
    aes_error: Option<String>,
    params: &'a MixtureParams,
    best_start: usize,
    runs: &'a [RunSummary],
}

#[derive(Serialize)]
struct PooledFitResult<'a> {
    method: &'a str,
    n_observations: usize,
    aes: Option<f64>,
    aes_error: Option<String>,
    mu0: f64,
    tau2: f64,
    loglik: f64,
}

fn cmd_fit(common: &Common, method: Option<FitMethod>, corpus_flag: Option<PathBuf>) -> Result<()> {
    let loaded = load(common.config.as_deref(), "fit")?;
    let method = required(method.or(loaded.option_enum("method")?), "method")?;
    let corpus_path = corpus_path(corpus_flag, &loaded)?;
    let records = corpus::read_corpus(&corpus_path)?;
    let data = final_week_observations(&records)?;
    let mut out = Output::create(&common.out)?;
    let method_name = enum_name(&method);

    let (seed, config) = match method {
        FitMethod::Pooled => {
            let cfg = loaded.config(PooledCommandConfig::default())?;
            let seed = loaded.seed(common.seed, 0);
            let subset = cfg.pooled_filter.apply(&data);
            let f = fit_pooled(&subset).map_err(|e| e.for_method("pooled"))?;
            let (aes, aes_error) = if f.mu0 > 0.0 {
                (Some(f.mu0), None)
            } else {
                (None, Some(format!("pooled mean {} is not positive", f.mu0)))
            };
            let config = to_value(&cfg)?;
            out.json(
                "fit.json",
                &Envelope {
                    generator: GENERATOR,
                    command: "fit",
                    seed,
                    config: &config,
                    result: &PooledFitResult {
                        method: &method_name,
                        n_observations: subset.len(),
                        aes,
                        aes_error,
                        mu0: f.mu0,
                        tau2: f.tau2,
                        loglik: f.loglik,
                    },
                },
            )?;
            (seed, config)
        }
        FitMethod::Gmm2 | FitMethod::Gmm3 => {
            let base = if method == FitMethod::Gmm2 {
                FitConfig::two_layer()
            } else {
                FitConfig::three_layer()
            };
            let mut cfg = loaded.config(base)?;
            cfg.seed = loaded.seed(common.seed, cfg.seed);
            let outcome = fit(&data, &cfg).map_err(|e| e.for_method(method_name.clone()))?;
            let (aes, aes_error) = match extract_aes(&outcome.params) {
                Ok(a) => (Some(a), None),
                Err(e) => (None, Some(e.to_string())),
            };
            let config = to_value(&cfg)?;
            out.json(
                "fit.json",
                &Envelope {
                    generator: GENERATOR,
                    command: "fit",
                    seed: cfg.seed,
                    config: &config,
                    result: &MixtureFitResult {
                        method: &method_name,
                        n_observations: data.len(),
                        aes,
                        aes_error,
                        params: &outcome.params,
                        best_start: outcome.best_start,
                        runs: &outcome.runs,
                    },
                },
            )?;
            (cfg.seed, config)
        }
    };
    let options = BTreeMap::from([
        ("method".to_string(), method_name),
        ("corpus".to_string(), path_string(&corpus_path)),
    ]);
    out.finish("fit", seed, options, config)
}

#[derive(Serialize)]
struct ProfileRow {
    aes: f64,
    mean_reward: f64,
    is_best: bool,
}

fn cmd_optimize(common: &Common, corpus_flag: Option<PathBuf>) -> Result<()> {
    let loaded = load(common.config.as_deref(), "optimize")?;
    let corpus_path = corpus_path(corpus_flag, &loaded)?;
    let format = format_of(common, &loaded)?;
    let records = corpus::read_corpus(&corpus_path)?;
    let cfg = loaded.config(UtilityConfig::default())?;
    let seed = loaded.seed(common.seed, 0);
    let opt = optimize_aes(&records, &cfg)?;

    let mut out = Output::create(&common.out)?;
    let config = to_value(&cfg)?;
    out.json(
        "optimum.json",
        &Envelope {
            generator: GENERATOR,
            command: "optimize",
            seed,
            config: &config,
            result: &opt,
        },
    )?;
    let rows: Vec<ProfileRow> = opt
        .profile
        .iter()
        .map(|p| ProfileRow {
            aes: p.aes,
            mean_reward: p.mean_reward,
            is_best: p.aes == opt.best_aes,
        })
        .collect();
    out.table("profile", &rows, format)?;
    let options = BTreeMap::from([
        ("corpus".to_string(), path_string(&corpus_path)),
        ("format".to_string(), enum_name(&format)),
    ]);
    out.finish("optimize", seed, options, config)
}

#[derive(Serialize)]
struct HistogramRow {
    bin: usize,
    lower: f64,
    upper: f64,
    count: u64,
}

fn histogram_rows(values: &[f64], bins: usize) -> Result<Vec<HistogramRow>> {
    let h = histogram(values, bins)?;
    Ok(h.counts
        .iter()
        .enumerate()
        .map(|(i, &count)| HistogramRow {
            bin: i,
            lower: h.edges[i],
            upper: h.edges[i + 1],
            count,
        })
        .collect())
}

#[derive(Serialize)]
struct AccuracyRow {
    method: Method,
    mse: Option<f64>,
    mae: Option<f64>,
    n_estimates: usize,
    n_failures: usize,
}

#[derive(Serialize)]
struct EstimateRow {
    method: Method,
    replication: usize,
    estimate: f64,
}

#[derive(Serialize)]
struct Labelled<'a, T: Serialize> {
    unit_label: &'a str,
    #[serde(flatten)]
    report: &'a T,
}

fn cmd_evaluate(
    common: &Common,
    kind: Option<Kind>,
    corpus_flag: Option<PathBuf>,
    methods: Option<Vec<String>>,
    bins: Option<usize>,
) -> Result<()> {
    let loaded = load(common.config.as_deref(), "evaluate")?;
    let kind = kind.or(loaded.option_enum("kind")?).unwrap_or(Kind::Trajectory);
    let format = format_of(common, &loaded)?;
    let bins = bins.or(loaded.option_parse("bins")?).unwrap_or(DEFAULT_BINS);
    let mut options = BTreeMap::from([
        ("kind".to_string(), enum_name(&kind)),
        ("format".to_string(), enum_name(&format)),
        ("bins".to_string(), bins.to_string()),
    ]);

    match kind {
        Kind::Trajectory => {
            let corpus_path = corpus_path(corpus_flag, &loaded)?;
            let records = corpus::read_corpus(&corpus_path)?;
            let mut cfg = loaded.config(ComparisonConfig::default())?;
            if let Some(names) = methods {
                cfg.methods = names
                    .iter()
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| Method::parse(s).ok_or_else(|| Error::config(format!("unknown method `{s}`"))))
                    .collect::<Result<_>>()?;
            }
            let seed = loaded.seed(common.seed, cfg.three_layer.seed);
            cfg = cfg.with_seed(seed);
            let report = run_comparison(&records, &cfg)?;

            let mut out = Output::create(&common.out)?;
            let config = to_value(&cfg)?;
            out.json(
                "report.json",
                &Envelope {
                    generator: GENERATOR,
                    command: "evaluate",
                    seed,
                    config: &config,
                    result: &report,
                },
            )?;
            out.table("report", &report.rows, Format::Csv)?;
            if let Some(profile) = &report.utility_profile {
                let best = report.row(Method::UtilityMax).map(|r| r.estimated_aes);
                let rows: Vec<ProfileRow> = profile
                    .iter()
                    .map(|p| ProfileRow {
                        aes: p.aes,
                        mean_reward: p.mean_reward,
                        is_best: Some(p.aes) == best,
                    })
                    .collect();
                out.table("profile", &rows, format)?;
            }
            let effects: Vec<f64> = final_week_observations(&records)?.iter().map(|o| o.d).collect();
            out.table("histogram", &histogram_rows(&effects, bins)?, format)?;
            options.insert("corpus".to_string(), path_string(&corpus_path));
            out.finish("evaluate", seed, options, config)
        }
        Kind::Accuracy => {
            if methods.is_some() {
                return Err(Error::config("--methods applies to trajectory evaluation only"));
            }
            let mut cfg = loaded.config(AccuracyStudyConfig::default())?;
            let seed = loaded.seed(common.seed, cfg.sim.seed);
            cfg = cfg.with_seed(seed);
            let report = run_accuracy_study(&cfg)?;

            let mut out = Output::create(&common.out)?;
            let config = to_value(&cfg)?;
            out.json(
                "accuracy.json",
                &Envelope {
                    generator: GENERATOR,
                    command: "evaluate",
                    seed,
                    config: &config,
                    result: &report,
                },
            )?;
            let rows: Vec<AccuracyRow> = report
                .methods
                .iter()
                .map(|m| AccuracyRow {
                    method: m.method,
                    mse: m.mse,
                    mae: m.mae,
                    n_estimates: m.estimates.len(),
                    n_failures: m.failures.len(),
                })
                .collect();
            out.table("accuracy", &rows, Format::Csv)?;
            let mut estimates = Vec::new();
            for m in &report.methods {
                let failed: Vec<usize> = m.failures.iter().map(|f| f.replication).collect();
                let ok = (0..report.replications).filter(|r| !failed.contains(r));
                for (replication, &estimate) in ok.zip(&m.estimates) {
                    estimates.push(EstimateRow {
                        method: m.method,
                        replication,
                        estimate,
                    });
                }
            }
            out.table("estimates", &estimates, format)?;
            let first: Vec<f64> = accuracy_replication(&cfg.sim, 0)?.iter().map(|o| o.d).collect();
            out.table("histogram", &histogram_rows(&first, bins)?, format)?;
            out.finish("evaluate", seed, options, config)
        }
    }
}

#[derive(Serialize)]
struct CorpusSummary {
    experiments: usize,
    week: Option<usize>,
    max_weeks: usize,
    label_counts: BTreeMap<String, usize>,
    mean_effect: f64,
    mean_effect_se2: f64,
}

fn cmd_report(common: &Common, corpus_flag: Option<PathBuf>, bins: Option<usize>, week: Option<usize>) -> Result<()> {
    let loaded = load(common.config.as_deref(), "report")?;
    let corpus_path = corpus_path(corpus_flag, &loaded)?;
    let format = format_of(common, &loaded)?;
    let bins = bins.or(loaded.option_parse("bins")?).unwrap_or(DEFAULT_BINS);
    let week = match week {
        Some(w) => Some(w),
        None => loaded.option_parse("week")?,
    };
    let cfg = loaded.config(ReportConfig::default())?;
    let seed = loaded.seed(common.seed, 0);
    let records = corpus::read_corpus(&corpus_path)?;

    let mut effects = Vec::with_capacity(records.len());
    let mut se2 = Vec::with_capacity(records.len());
    for r in &records {
        let w = week.unwrap_or(r.weeks);
        effects.push(r.effect_at(w)?);
        se2.push(r.se2_at(w)?);
    }
    let mut label_counts = BTreeMap::new();
    for r in &records {
        let key = r.latent_label.map_or("none", Label::as_str);
        *label_counts.entry(key.to_string()).or_insert(0) += 1;
    }
    let n = records.len() as f64;
    let summary = CorpusSummary {
        experiments: records.len(),
        week,
        max_weeks: records.iter().map(|r| r.weeks).max().unwrap_or(0),
        label_counts,
        mean_effect: effects.iter().sum::<f64>() / n,
        mean_effect_se2: se2.iter().sum::<f64>() / n,
    };

    let mut out = Output::create(&common.out)?;
    let config = to_value(&cfg)?;
    out.json(
        "summary.json",
        &Envelope {
            generator: GENERATOR,
            command: "report",
            seed,
            config: &config,
            result: &Labelled {
                unit_label: &cfg.unit_label,
                report: &summary,
            },
        },
    )?;
    out.table("histogram", &histogram_rows(&effects, bins)?, format)?;
    let mut options = BTreeMap::from([
        ("corpus".to_string(), path_string(&corpus_path)),
        ("format".to_string(), enum_name(&format)),
        ("bins".to_string(), bins.to_string()),
    ]);
    if let Some(w) = week {
        options.insert("week".to_string(), w.to_string());
    }
    out.finish("report", seed, options, config)
}

/// Process exit code for an error: 3 for numerical failures, 2 otherwise.
pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        3
    } else {
        2
    }
}
