//! Command-line front end: run configuration, subcommands and result files.
//!
//! Settings come from an optional JSON run configuration; command-line flags
//! override it. Exit codes: 0 success, 2 input or configuration error,
//! 3 numerical failure.

use std::collections::HashMap;
use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::apsp::{run_two_step, ApspConfig};
use crate::baselines::{fit_baseline, BaselineConfig, Method};
use crate::data::{apply_standardization, fit_standardization, ingest_csv, ColumnKind, Dataset, Role, StandardizationMap, StandardizationPolicy};
use crate::error::{Error, Result};
use crate::mcmc::derive_seed;
use crate::multi::MultiPriorSpec;
use crate::null::{calibrate_null, select, DirPipeline, NullPipeline, NullThresholds, PooledPipeline, TwoStepPipeline};
use crate::posterior::{FitResult, SelectionRule};
use crate::sim::{read_metrics_csv, run_benchmark, BenchmarkConfig};

const DEFAULT_SEED: u64 = 2023;

/// Which pipeline the permutation null reruns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NullKind {
    #[default]
    TwoStep,
    Pooled,
    Dir,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NullSettings {
    pub enabled: bool,
    pub replicates: usize,
    pub pipeline: NullKind,
}

impl Default for NullSettings {
    fn default() -> Self {
        NullSettings {
            enabled: true,
            replicates: 200,
            pipeline: NullKind::TwoStep,
        }
    }
}

/// Contents of the `--config` JSON file. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub external: Option<PathBuf>,
    pub internal: Option<PathBuf>,
    pub outcome: String,
    pub standardization: StandardizationPolicy,
    /// Top-level seed; overrides `benchmark.seed` when set.
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub apsp: ApspConfig,
    pub null: NullSettings,
    /// Methods run by `baseline`.
    pub methods: Vec<Method>,
    pub baselines: BaselineConfig,
    pub benchmark: BenchmarkConfig,
    /// Metrics table read by `report`.
    pub metrics: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            external: None,
            internal: None,
            outcome: "y".into(),
            standardization: StandardizationPolicy::Pooled,
            seed: None,
            workers: None,
            out: None,
            apsp: ApspConfig::default(),
            null: NullSettings::default(),
            methods: vec![Method::Pp],
            baselines: BaselineConfig::default(),
            benchmark: BenchmarkConfig::default(),
            metrics: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    fn seed(&self) -> u64 {
        self.seed.unwrap_or(DEFAULT_SEED)
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "apsp", version, about = "Bayesian variable selection with borrowing from external data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub global: GlobalArgs,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for replicate-level parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Permutation replicates (fit, calibrate-null) or benchmark replicates (simulate).
    #[arg(long, global = true)]
    pub replicates: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Skip the permutation null and select by PIP > 0.5.
    #[arg(long, global = true)]
    pub no_null: bool,
    /// Power-prior discount.
    #[arg(long, global = true)]
    pub a0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub external: Option<PathBuf>,
    #[arg(long)]
    pub internal: Option<PathBuf>,
    /// Outcome column name.
    #[arg(long)]
    pub outcome: Option<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// External fit, borrowing prior, internal fit and null-calibrated selection.
    Fit(DataArgs),
    /// Simulation benchmark: metrics.csv, summary.csv, summary.json.
    Simulate,
    /// Permutation-null thresholds only.
    CalibrateNull(DataArgs),
    /// Comparison methods on one (external, internal) pair.
    Baseline {
        #[command(flatten)]
        data: DataArgs,
        /// Method names, e.g. PP, MPP, MAP, CP, SSP, LASSO, HP.
        #[arg(long = "method", value_delimiter = ',')]
        methods: Vec<Method>,
    },
    /// SVG charts from a metrics table.
    Report {
        /// metrics.csv written by `simulate`.
        metrics: Option<PathBuf>,
    },
}

impl std::str::FromStr for NullKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.to_string()))
            .map_err(|_| Error::InvalidConfig(format!("unknown null pipeline `{s}`")))
    }
}

struct StderrLogger;

impl log::Log for StderrLogger {
    fn enabled(&self, metadata: &log::Metadata) -> bool {
        metadata.level() <= log::Level::Warn
    }

    fn log(&self, record: &log::Record) {
        if self.enabled(record.metadata()) {
            eprintln!("{}: {}", record.level().as_str().to_lowercase(), record.args());
        }
    }

    fn flush(&self) {}
}

static LOGGER: StderrLogger = StderrLogger;

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    if log::set_logger(&LOGGER).is_ok() {
        log::set_max_level(log::LevelFilter::Warn);
    }
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Merges the configuration file and flags.
pub fn resolve_config(global: &GlobalArgs) -> Result<RunConfig> {
    let mut cfg = match &global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = global.seed {
        cfg.seed = Some(s);
    }
    if let Some(w) = global.workers {
        cfg.workers = Some(w);
    }
    if let Some(o) = &global.out {
        cfg.out = Some(o.clone());
    }
    if global.no_null {
        cfg.null.enabled = false;
        cfg.benchmark.null.enabled = false;
    }
    if let Some(a0) = global.a0 {
        cfg.baselines.a0 = a0;
        cfg.benchmark.baselines.a0 = a0;
    }
    if let Some(seed) = cfg.seed {
        cfg.benchmark.seed = seed;
    }
    if cfg.workers.is_some() {
        cfg.benchmark.workers = cfg.workers;
    }
    if matches!(cfg.workers, Some(0)) {
        return Err(Error::InvalidConfig("workers must be at least 1".into()));
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = resolve_config(&cli.global)?;
    let replicates = cli.global.replicates;
    if replicates == Some(0) {
        return Err(Error::InvalidConfig("replicates must be at least 1".into()));
    }
    match cli.command {
        Command::Fit(data) => {
            apply_data_args(&mut cfg, data);
            if let Some(r) = replicates {
                cfg.null.replicates = r;
            }
            with_pool(cfg.workers, || cmd_fit(&cfg))
        }
        Command::CalibrateNull(data) => {
            apply_data_args(&mut cfg, data);
            if let Some(r) = replicates {
                cfg.null.replicates = r;
            }
            with_pool(cfg.workers, || cmd_calibrate_null(&cfg))
        }
        Command::Baseline { data, methods } => {
            apply_data_args(&mut cfg, data);
            if !methods.is_empty() {
                cfg.methods = methods;
            }
            cmd_baseline(&cfg)
        }
        Command::Simulate => {
            if let Some(r) = replicates {
                cfg.benchmark.replicates = r;
            }
            cmd_simulate(&cfg)
        }
        Command::Report { metrics } => {
            if metrics.is_some() {
                cfg.metrics = metrics;
            }
            cmd_report(&cfg)
        }
    }
}

fn apply_data_args(cfg: &mut RunConfig, data: DataArgs) {
    if data.external.is_some() {
        cfg.external = data.external;
    }
    if data.internal.is_some() {
        cfg.internal = data.internal;
    }
    if let Some(o) = data.outcome {
        cfg.outcome = o;
    }
}

fn with_pool<T: Send>(workers: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?
            .install(f),
        None => f(),
    }
}

/// Standardized (external, internal) pair with its map.
pub struct LoadedData {
    pub external: Dataset,
    pub internal: Dataset,
    pub map: StandardizationMap,
}

/// Ingests both files (internal column kinds follow the external file),
/// checks the shared schema and standardizes.
pub fn load_pair(cfg: &RunConfig) -> Result<LoadedData> {
    let need = |p: &Option<PathBuf>, what: &str| -> Result<PathBuf> {
        let p = p
            .clone()
            .ok_or_else(|| Error::InvalidConfig(format!("no {what} data file given (--{what} or config)")))?;
        if !p.is_file() {
            return Err(Error::InvalidInput(format!("{what} data file {} does not exist", p.display())));
        }
        Ok(p)
    };
    let ext_path = need(&cfg.external, "external")?;
    let int_path = need(&cfg.internal, "internal")?;
    let (ext, report) = ingest_csv(&ext_path, &cfg.outcome, Role::External, None)?;
    warn_dropped(&ext_path, report.dropped_rows);
    let mut ext_names: Vec<&str> = ext.columns().iter().map(|c| c.name.as_str()).collect();
    let (int_probe, _) = ingest_csv(&int_path, &cfg.outcome, Role::Internal, None)?;
    let mut int_names: Vec<&str> = int_probe.columns().iter().map(|c| c.name.as_str()).collect();
    ext_names.sort_unstable();
    int_names.sort_unstable();
    if ext_names != int_names {
        let mut odd: Vec<&str> = ext_names
            .iter()
            .filter(|n| !int_names.contains(n))
            .chain(int_names.iter().filter(|n| !ext_names.contains(n)))
            .copied()
            .collect();
        odd.sort_unstable();
        return Err(Error::SchemaMismatch(format!(
            "covariates differ between files; offending columns: {}",
            odd.join(", ")
        )));
    }
    let kinds: HashMap<String, ColumnKind> = ext.columns().iter().map(|c| (c.name.clone(), c.kind)).collect();
    let (int, report) = ingest_csv(&int_path, &cfg.outcome, Role::Internal, Some(&kinds))?;
    warn_dropped(&int_path, report.dropped_rows);
    let int = int.select_columns(&ext.column_names())?;
    let map = fit_standardization(&[&ext, &int], cfg.standardization)?;
    Ok(LoadedData {
        external: apply_standardization(&ext, &map)?,
        internal: apply_standardization(&int, &map)?,
        map,
    })
}

fn warn_dropped(path: &Path, dropped: usize) {
    if dropped > 0 {
        log::warn!("{}: dropped {dropped} rows with missing values", path.display());
    }
}

fn prepare_out(cfg: &RunConfig) -> Result<PathBuf> {
    let dir = cfg.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

fn null_pipeline(cfg: &RunConfig) -> Box<dyn NullPipeline> {
    match cfg.null.pipeline {
        NullKind::TwoStep => Box::new(TwoStepPipeline(cfg.apsp)),
        NullKind::Pooled => Box::new(PooledPipeline {
            prior: cfg.apsp.prior,
            chain: cfg.apsp.chain,
        }),
        NullKind::Dir => Box::new(DirPipeline {
            external: cfg.apsp,
            prior: MultiPriorSpec::from_base(cfg.apsp.prior),
        }),
    }
}

fn run_null(cfg: &RunConfig, data: &LoadedData) -> Result<NullThresholds> {
    let pipeline = null_pipeline(cfg);
    calibrate_null(
        &data.external,
        &data.internal,
        pipeline.as_ref(),
        cfg.null.replicates,
        derive_seed(cfg.seed(), "null", 0),
    )
}

fn cmd_fit(cfg: &RunConfig) -> Result<()> {
    cfg.apsp.chain.validate()?;
    let data = load_pair(cfg)?;
    let out = prepare_out(cfg)?;
    let two = run_two_step(&data.external, &data.internal, &cfg.apsp, derive_seed(cfg.seed(), "fit", 0))?;
    for w in &two.warnings {
        log::warn!("{w}");
    }
    let mut internal = two.internal.clone();
    let thresholds = if cfg.null.enabled {
        let t = run_null(cfg, &data)?;
        internal.fit.reselect(SelectionRule::PipPerCovariate { thresholds: t.c_hat.clone() });
        debug_assert_eq!(internal.fit.selected, select(&internal.pips(), &t)?);
        Some(t)
    } else {
        internal.fit.reselect(SelectionRule::Pip { threshold: 0.5 });
        None
    };
    let original = data.map.coefficient_to_original(&data.internal, &internal.fit.means());
    let report = serde_json::json!({
        "seed": cfg.seed(),
        "standardization": data.map,
        "external": {
            "fit": serde_json::from_str::<serde_json::Value>(&two.external_fit.to_json()?)?,
            "summary": two.summary,
        },
        "prior": two.prior,
        "internal": serde_json::from_str::<serde_json::Value>(&internal.to_json()?)?,
        "mean_original_scale": original,
        "warnings": two.warnings,
    });
    write_text(&out.join("fit.json"), &serde_json::to_string_pretty(&report)?)?;
    let mut w = csv::Writer::from_writer(create(&out.join("selection.csv"))?);
    w.write_record(["covariate", "pip", "threshold", "selected", "mean", "mean_original"])?;
    for (k, c) in internal.fit.coefficients.iter().enumerate() {
        w.write_record([
            c.name.clone(),
            c.pip.unwrap_or(f64::NAN).to_string(),
            internal.fit.rule.threshold_for(k).unwrap_or(f64::NAN).to_string(),
            internal.fit.selected[k].to_string(),
            c.mean.to_string(),
            original[k].to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(out.join("selection.csv"), e))?;
    if let Some(t) = thresholds {
        write_text(&out.join("thresholds.json"), &t.to_json()?)?;
        t.save_matrix_csv(out.join("null_pips.csv"))?;
    }
    Ok(())
}

fn cmd_calibrate_null(cfg: &RunConfig) -> Result<()> {
    cfg.apsp.chain.validate()?;
    let data = load_pair(cfg)?;
    let out = prepare_out(cfg)?;
    let t = run_null(cfg, &data)?;
    write_text(&out.join("thresholds.json"), &t.to_json()?)?;
    t.save_matrix_csv(out.join("null_pips.csv"))
}

fn write_fit_table(path: &Path, fit: &FitResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(["covariate", "mean", "variance", "ci_low", "ci_high", "pip", "selected"])?;
    for (c, s) in fit.coefficients.iter().zip(&fit.selected) {
        w.write_record([
            c.name.clone(),
            c.mean.to_string(),
            c.variance.to_string(),
            c.ci95.0.to_string(),
            c.ci95.1.to_string(),
            c.pip.map(|p| p.to_string()).unwrap_or_default(),
            s.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn cmd_baseline(cfg: &RunConfig) -> Result<()> {
    cfg.baselines.validate()?;
    if cfg.methods.is_empty() {
        return Err(Error::InvalidConfig("no baseline method given".into()));
    }
    let data = load_pair(cfg)?;
    let out = prepare_out(cfg)?;
    for &m in &cfg.methods {
        let fit = fit_baseline(m, &data.internal, &data.external, &cfg.baselines, cfg.seed())?;
        let stem = m.name().to_lowercase();
        write_text(&out.join(format!("{stem}_fit.json")), &fit.to_json()?)?;
        write_fit_table(&out.join(format!("{stem}_selection.csv")), &fit)?;
    }
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig) -> Result<()> {
    cfg.benchmark.validate()?;
    let out = prepare_out(cfg)?;
    let result = run_benchmark(&cfg.benchmark)?;
    if result.failed() > 0 {
        log::warn!("{} method fits failed; see the status column of metrics.csv", result.failed());
    }
    result.save(out)
}

fn cmd_report(cfg: &RunConfig) -> Result<()> {
    let path = cfg
        .metrics
        .clone()
        .ok_or_else(|| Error::InvalidConfig("no metrics file given".into()))?;
    let rows = read_metrics_csv(&path)?;
    let out = prepare_out(cfg)?;
    crate::report::write_report(&rows, out)?;
    Ok(())
}
