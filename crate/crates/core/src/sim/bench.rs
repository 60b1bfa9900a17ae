use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scenario::{generate_scenario, Scenario, ScenarioData, ScenarioSpec};
use super::{score_rmse, score_selection};
use crate::apsp::{run_two_step, ApspConfig};
use crate::baselines::{fit_baseline, BaselineConfig, Method};
use crate::error::{Error, Result};
use crate::mcmc::{derive_seed, ChainSpec};
use crate::multi::{fit_apsp_multi, MultiPriorSpec, SourcePosterior};
use crate::null::{calibrate_null, select, DirPipeline, TwoStepPipeline};
use crate::ssp::{fit_ssp, summarize_external};

/// Methods the benchmark can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BenchMethod {
    Apsp,
    /// Single-source Dirichlet variant of the borrowing prior.
    ApspDir,
    Baseline(Method),
}

impl BenchMethod {
    /// Column order of the summary table.
    pub const TABLE: [BenchMethod; 8] = [
        BenchMethod::Apsp,
        BenchMethod::Baseline(Method::Ssp),
        BenchMethod::Baseline(Method::Lasso),
        BenchMethod::Baseline(Method::Hp),
        BenchMethod::Baseline(Method::Pp),
        BenchMethod::Baseline(Method::Map),
        BenchMethod::Baseline(Method::Mpp),
        BenchMethod::Baseline(Method::Cp),
    ];

    pub fn name(self) -> &'static str {
        match self {
            BenchMethod::Apsp => "APSP",
            BenchMethod::ApspDir => "APSP-Dir",
            BenchMethod::Baseline(m) => m.name(),
        }
    }

    fn order(self) -> usize {
        BenchMethod::TABLE
            .iter()
            .position(|&m| m == self)
            .unwrap_or(BenchMethod::TABLE.len())
    }
}

impl FromStr for BenchMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "APSP" => Ok(BenchMethod::Apsp),
            "APSP-DIR" => Ok(BenchMethod::ApspDir),
            _ => s.parse().map(BenchMethod::Baseline),
        }
    }
}

impl std::fmt::Display for BenchMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for BenchMethod {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

impl<'de> Deserialize<'de> for BenchMethod {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Empirical-null settings used inside the benchmark.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchNull {
    /// When false, the borrowing methods select by PIP > 0.5.
    pub enabled: bool,
    pub replicates: usize,
    pub chain: ChainSpec,
}

impl Default for BenchNull {
    fn default() -> Self {
        BenchNull {
            enabled: true,
            replicates: 20,
            chain: ChainSpec {
                n_iter: 1200,
                n_burn: 200,
                thin: 1,
                ..ChainSpec::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BenchmarkConfig {
    pub scenarios: Vec<Scenario>,
    pub methods: Vec<BenchMethod>,
    pub n_internal: Vec<usize>,
    pub n_external: usize,
    pub noise_sd: f64,
    pub replicates: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global pool.
    pub workers: Option<usize>,
    pub apsp: ApspConfig,
    pub null: BenchNull,
    pub baselines: BaselineConfig,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            scenarios: Scenario::ALL.to_vec(),
            methods: BenchMethod::TABLE.to_vec(),
            n_internal: vec![10, 20, 30],
            n_external: 50,
            noise_sd: 1.0,
            replicates: 200,
            seed: 2023,
            workers: None,
            apsp: ApspConfig::default(),
            null: BenchNull::default(),
            baselines: BaselineConfig::default(),
        }
    }
}

impl BenchmarkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidConfig("replicates must be at least 1".into()));
        }
        if self.scenarios.is_empty() || self.methods.is_empty() || self.n_internal.is_empty() {
            return Err(Error::InvalidConfig("scenarios, methods and n_internal must be non-empty".into()));
        }
        if self.null.enabled && self.null.replicates == 0 {
            return Err(Error::InvalidConfig("null replicates must be at least 1".into()));
        }
        if matches!(self.workers, Some(0)) {
            return Err(Error::InvalidConfig("workers must be at least 1".into()));
        }
        self.apsp.chain.validate()?;
        self.null.chain.validate()?;
        self.baselines.validate()?;
        for &n in &self.n_internal {
            self.spec(Scenario::IdenticalSignals, n, 0).validate()?;
        }
        Ok(())
    }

    fn spec(&self, scenario: Scenario, n_internal: usize, seed: u64) -> ScenarioSpec {
        ScenarioSpec {
            scenario,
            n_internal,
            n_external: self.n_external,
            noise_sd: self.noise_sd,
            seed,
        }
    }

    /// Seed of the data for one (scenario, n, replicate) cell; shared by all methods.
    pub fn data_seed(&self, scenario: Scenario, n_internal: usize, replicate: usize) -> u64 {
        derive_seed(self.seed, &format!("data/{scenario}/{n_internal}"), replicate as u64)
    }

    fn fit_seed(&self, scenario: Scenario, n_internal: usize, method: BenchMethod, replicate: usize) -> u64 {
        derive_seed(self.seed, &format!("fit/{scenario}/{n_internal}/{method}"), replicate as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub scenario: String,
    pub method: String,
    pub n_internal: usize,
    pub replicate: usize,
    pub correctness_pct: f64,
    pub fdr: f64,
    pub tdr: f64,
    pub rmse: f64,
    /// `ok`, or `failed: <reason>`.
    pub status: String,
}

impl MetricsRow {
    pub fn ok(&self) -> bool {
        self.status == "ok"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub scenario: String,
    pub n_internal: usize,
    pub method: String,
    pub n_ok: usize,
    pub n_failed: usize,
    pub correctness_mean: f64,
    pub correctness_sd: f64,
    pub fdr_mean: f64,
    pub fdr_sd: f64,
    pub tdr_mean: f64,
    pub tdr_sd: f64,
    pub rmse_mean: f64,
    pub rmse_sd: f64,
}

#[derive(Debug, Clone)]
pub struct BenchmarkResult {
    pub rows: Vec<MetricsRow>,
    pub summary: Vec<SummaryCell>,
}

/// Selection flags and standardized-scale estimates of one method.
fn run_method(method: BenchMethod, data: &ScenarioData, cfg: &BenchmarkConfig, seed: u64) -> Result<(Vec<bool>, Vec<f64>)> {
    let (ext, int) = (&data.external, &data.internal);
    match method {
        BenchMethod::Apsp => {
            let fit = run_two_step(ext, int, &cfg.apsp, seed)?;
            let pips = fit.internal.pips();
            let selected = if cfg.null.enabled {
                let pipeline = TwoStepPipeline(ApspConfig {
                    chain: cfg.null.chain,
                    ..cfg.apsp
                });
                let t = calibrate_null(ext, int, &pipeline, cfg.null.replicates, derive_seed(seed, "null", 0))?;
                select(&pips, &t)?
            } else {
                fit.internal.fit.selected.clone()
            };
            Ok((selected, fit.internal.fit.means()))
        }
        BenchMethod::ApspDir => {
            let ext_chain = cfg.apsp.chain.with_seed(derive_seed(seed, "external-ssp", 0));
            let int_chain = cfg.apsp.chain.with_seed(derive_seed(seed, "internal-dir", 0));
            let ext_fit = fit_ssp(ext, &cfg.apsp.prior, &ext_chain)?;
            let summary = summarize_external(&ext_fit, cfg.apsp.borrow_threshold)?;
            let prior = MultiPriorSpec::from_base(cfg.apsp.prior);
            let sources = [SourcePosterior::from_summary("external", &summary)];
            let fit = fit_apsp_multi(int, &sources, &prior, &int_chain)?;
            let pips = fit.fit.pips();
            let selected = if cfg.null.enabled {
                let pipeline = DirPipeline {
                    external: ApspConfig {
                        chain: cfg.null.chain,
                        ..cfg.apsp
                    },
                    prior,
                };
                let t = calibrate_null(ext, int, &pipeline, cfg.null.replicates, derive_seed(seed, "null", 0))?;
                select(&pips, &t)?
            } else {
                fit.fit.selected.clone()
            };
            Ok((selected, fit.fit.means()))
        }
        BenchMethod::Baseline(m) => {
            let fit = fit_baseline(m, int, ext, &cfg.baselines, seed)?;
            Ok((fit.selected.clone(), fit.means()))
        }
    }
}

fn replicate_rows(cfg: &BenchmarkConfig, scenario: Scenario, n: usize, rep: usize) -> Vec<MetricsRow> {
    let spec = cfg.spec(scenario, n, cfg.data_seed(scenario, n, rep));
    let data = generate_scenario(&spec);
    cfg.methods
        .iter()
        .map(|&method| {
            let outcome = match &data {
                Ok(data) => run_method(method, data, cfg, cfg.fit_seed(scenario, n, method, rep)).and_then(
                    |(selected, beta_std)| {
                        let score = score_selection(&selected, &data.truth())?;
                        let rmse = score_rmse(&data.to_original(&beta_std), &data.beta_internal)?;
                        Ok((score, rmse))
                    },
                ),
                Err(e) => Err(Error::InvalidInput(format!("data generation failed: {e}"))),
            };
            let base = MetricsRow {
                scenario: scenario.name().to_string(),
                method: method.name().to_string(),
                n_internal: n,
                replicate: rep,
                correctness_pct: f64::NAN,
                fdr: f64::NAN,
                tdr: f64::NAN,
                rmse: f64::NAN,
                status: "ok".into(),
            };
            match outcome {
                Ok((s, rmse)) => MetricsRow {
                    correctness_pct: s.correctness_pct,
                    fdr: s.fdr,
                    tdr: s.tdr,
                    rmse,
                    ..base
                },
                Err(e) => {
                    log::warn!("{method} failed on {scenario}/n={n}/replicate {rep}: {e}");
                    MetricsRow {
                        status: format!("failed: {e}"),
                        ..base
                    }
                }
            }
        })
        .collect()
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    match values.len() {
        0 => (f64::NAN, f64::NAN),
        1 => (values[0], 0.0),
        _ => (crate::mcmc::mean(values), crate::mcmc::variance(values).sqrt()),
    }
}

/// Per (scenario, n, method) mean and sd over successful rows.
pub fn summarize_rows(rows: &[MetricsRow]) -> Vec<SummaryCell> {
    let mut groups: BTreeMap<(usize, usize, usize, String, String), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        let s_order = r.scenario.parse::<Scenario>().map_or(usize::MAX, |s| s.number());
        let m_order = r.method.parse::<BenchMethod>().map_or(usize::MAX, |m| m.order());
        groups
            .entry((r.n_internal, s_order, m_order, r.scenario.clone(), r.method.clone()))
            .or_default()
            .push(r);
    }
    groups
        .into_iter()
        .map(|((n, _, _, scenario, method), rs)| {
            let ok: Vec<&&MetricsRow> = rs.iter().filter(|r| r.ok()).collect();
            let col = |f: fn(&MetricsRow) -> f64| mean_sd(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
            let (cm, cs) = col(|r| r.correctness_pct);
            let (fm, fs) = col(|r| r.fdr);
            let (tm, ts) = col(|r| r.tdr);
            let (rm, rsd) = col(|r| r.rmse);
            SummaryCell {
                scenario,
                n_internal: n,
                method,
                n_ok: ok.len(),
                n_failed: rs.len() - ok.len(),
                correctness_mean: cm,
                correctness_sd: cs,
                fdr_mean: fm,
                fdr_sd: fs,
                tdr_mean: tm,
                tdr_sd: ts,
                rmse_mean: rm,
                rmse_sd: rsd,
            }
        })
        .collect()
}

/// Runs every method on every (scenario, n, replicate) cell. Rows come back
/// sorted by scenario, n, replicate and method, whatever the completion order.
pub fn run_benchmark(cfg: &BenchmarkConfig) -> Result<BenchmarkResult> {
    cfg.validate()?;
    let mut tasks = Vec::new();
    for &s in &cfg.scenarios {
        for &n in &cfg.n_internal {
            for rep in 0..cfg.replicates {
                tasks.push((s, n, rep));
            }
        }
    }
    let work = || -> Vec<MetricsRow> {
        tasks
            .par_iter()
            .flat_map_iter(|&(s, n, rep)| replicate_rows(cfg, s, n, rep))
            .collect()
    };
    let mut rows = match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("cannot start worker pool: {e}")))?
            .install(work),
        None => work(),
    };
    rows.sort_by(|a, b| {
        let key = |r: &MetricsRow| {
            (
                r.scenario.parse::<Scenario>().map_or(usize::MAX, |s| s.number()),
                r.n_internal,
                r.replicate,
                r.method.parse::<BenchMethod>().map_or(usize::MAX, |m| m.order()),
            )
        };
        key(a).cmp(&key(b)).then_with(|| a.method.cmp(&b.method))
    });
    let summary = summarize_rows(&rows);
    Ok(BenchmarkResult { rows, summary })
}

impl BenchmarkResult {
    pub fn failed(&self) -> usize {
        self.rows.iter().filter(|r| !r.ok()).count()
    }

    pub fn cell(&self, scenario: Scenario, n_internal: usize, method: BenchMethod) -> Option<&SummaryCell> {
        self.summary
            .iter()
            .find(|c| c.scenario == scenario.name() && c.n_internal == n_internal && c.method == method.name())
    }

    pub fn write_metrics_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for r in &self.rows {
            w.serialize(r)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Wide layout: one row per (n, scenario), one "mean (sd)" correctness
    /// column per method.
    pub fn write_summary_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut methods: Vec<(usize, String)> = Vec::new();
        for c in &self.summary {
            let key = (c.method.parse::<BenchMethod>().map_or(usize::MAX, |m| m.order()), c.method.clone());
            if !methods.contains(&key) {
                methods.push(key);
            }
        }
        methods.sort();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["n_internal".to_string(), "scenario".to_string()];
        header.extend(methods.iter().map(|(_, m)| m.clone()));
        w.write_record(&header)?;
        let mut keys: Vec<(usize, usize, String)> = Vec::new();
        for c in &self.summary {
            let k = (c.n_internal, c.scenario.parse::<Scenario>().map_or(usize::MAX, |s| s.number()), c.scenario.clone());
            if !keys.contains(&k) {
                keys.push(k);
            }
        }
        keys.sort();
        for (n, _, scenario) in keys {
            let mut rec = vec![n.to_string(), scenario.clone()];
            for (_, m) in &methods {
                let cell = self
                    .summary
                    .iter()
                    .find(|c| c.n_internal == n && c.scenario == scenario && &c.method == m);
                rec.push(cell.map_or(String::new(), |c| {
                    format!("{:.1} ({:.1})", c.correctness_mean, c.correctness_sd)
                }));
            }
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Out<'a> {
            failed_rows: usize,
            cells: &'a [SummaryCell],
        }
        Ok(serde_json::to_string_pretty(&Out {
            failed_rows: self.failed(),
            cells: &self.summary,
        })?)
    }

    /// Writes metrics.csv, summary.csv and summary.json into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let open = |name: &str| -> Result<std::io::BufWriter<std::fs::File>> {
            let p = dir.join(name);
            Ok(std::io::BufWriter::new(std::fs::File::create(&p).map_err(|e| Error::io(&p, e))?))
        };
        self.write_metrics_csv(open("metrics.csv")?)?;
        self.write_summary_csv(open("summary.csv")?)?;
        let p = dir.join("summary.json");
        std::fs::write(&p, self.summary_json()?).map_err(|e| Error::io(&p, e))?;
        Ok(())
    }
}

pub fn read_metrics_csv(path: impl AsRef<Path>) -> Result<Vec<MetricsRow>> {
    let p = path.as_ref();
    let mut r = csv::Reader::from_path(p)?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<MetricsRow>, _>>()?;
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> BenchmarkConfig {
        let chain = ChainSpec {
            n_iter: 300,
            n_burn: 100,
            thin: 1,
            ..ChainSpec::default()
        };
        let mut cfg = BenchmarkConfig {
            scenarios: vec![Scenario::IdenticalSignals, Scenario::NoOverlap],
            methods: vec![BenchMethod::Baseline(Method::Ssp), BenchMethod::Baseline(Method::Pp)],
            n_internal: vec![10, 20],
            replicates: 2,
            ..Default::default()
        };
        cfg.apsp.chain = chain;
        cfg.baselines.chain = chain;
        cfg
    }

    #[test]
    fn one_row_per_cell_and_method() {
        let mut cfg = quick();
        cfg.replicates = 1;
        cfg.methods = vec![BenchMethod::Baseline(Method::Ssp)];
        let res = run_benchmark(&cfg).unwrap();
        assert_eq!(res.rows.len(), 2 * 2);
        assert!(res.rows.iter().all(|r| r.ok()));
    }

    #[test]
    fn summary_mean_is_row_mean() {
        let res = run_benchmark(&quick()).unwrap();
        for c in &res.summary {
            let vals: Vec<f64> = res
                .rows
                .iter()
                .filter(|r| r.scenario == c.scenario && r.method == c.method && r.n_internal == c.n_internal)
                .map(|r| r.correctness_pct)
                .collect();
            assert_eq!(vals.len(), 2);
            assert!((c.correctness_mean - (vals[0] + vals[1]) / 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn summary_ignores_row_order() {
        let res = run_benchmark(&quick()).unwrap();
        let mut shuffled = res.rows.clone();
        shuffled.reverse();
        shuffled.swap(0, 3);
        assert_eq!(summarize_rows(&shuffled), res.summary);
    }

    #[test]
    fn failures_are_flagged_not_dropped() {
        let mut cfg = quick();
        cfg.replicates = 1;
        cfg.baselines.nig.v_beta = -1.0;
        let res = run_benchmark(&cfg).unwrap();
        assert_eq!(res.rows.len(), 8);
        let pp: Vec<&MetricsRow> = res.rows.iter().filter(|r| r.method == "PP").collect();
        assert!(pp.iter().all(|r| r.status.starts_with("failed")));
        assert!(res.rows.iter().filter(|r| r.method == "SSP").all(|r| r.ok()));
        assert_eq!(res.failed(), 4);
    }

    #[test]
    fn methods_parse() {
        for m in BenchMethod::TABLE {
            assert_eq!(m.name().parse::<BenchMethod>().unwrap(), m);
        }
        assert_eq!("apsp-dir".parse::<BenchMethod>().unwrap(), BenchMethod::ApspDir);
        assert!("nope".parse::<BenchMethod>().is_err());
    }
}
