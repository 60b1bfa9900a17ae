//! Permutation null for the internal inclusion probabilities.
//!
//! Each replicate concatenates (Yᴱ, Yᴵ), permutes it, splits it back into
//! the original block sizes, reruns a pipeline on the permuted blocks and
//! records the internal PIPs. The threshold Ĉ_k is the replicate mean.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::apsp::{run_two_step, ApspConfig};
use crate::data::{check_same_schema, Dataset};
use crate::error::{Error, Result};
use crate::mcmc::{derive_seed, ChainSpec, SamplerRng};
use crate::multi::{fit_apsp_multi, MultiPriorSpec, SourcePosterior};
use crate::ssp::{fit_ssp, summarize_external, SspPriorSpec};

/// Above this many sampler iterations a calibration logs a runtime warning.
const RUNTIME_WARN_ITERATIONS: usize = 50_000_000;

/// Produces internal PIPs from an (external, internal) pair.
pub trait NullPipeline: Sync {
    fn internal_pips(&self, ext: &Dataset, int: &Dataset, seed: u64) -> Result<Vec<f64>>;

    /// Sampler iterations per call, for the runtime warning.
    fn cost(&self) -> usize;
}

/// External spike-and-slab fit → borrowing prior → internal fit.
#[derive(Debug, Clone, Copy, Default)]
pub struct TwoStepPipeline(pub ApspConfig);

impl NullPipeline for TwoStepPipeline {
    fn internal_pips(&self, ext: &Dataset, int: &Dataset, seed: u64) -> Result<Vec<f64>> {
        Ok(run_two_step(ext, int, &self.0, seed)?.internal.pips())
    }

    fn cost(&self) -> usize {
        2 * self.0.chain.n_iter
    }
}

/// One spike-and-slab fit on the stacked permuted data (sensitivity option).
#[derive(Debug, Clone, Copy, Default)]
pub struct PooledPipeline {
    pub prior: SspPriorSpec,
    pub chain: ChainSpec,
}

impl NullPipeline for PooledPipeline {
    fn internal_pips(&self, ext: &Dataset, int: &Dataset, seed: u64) -> Result<Vec<f64>> {
        let stacked = ext.stack(int, "pooled")?;
        Ok(fit_ssp(&stacked, &self.prior, &self.chain.with_seed(seed))?.pips())
    }

    fn cost(&self) -> usize {
        self.chain.n_iter
    }
}

/// External fit → single-source Dirichlet mixture on the internal data.
#[derive(Debug, Clone)]
pub struct DirPipeline {
    pub external: ApspConfig,
    pub prior: MultiPriorSpec,
}

impl NullPipeline for DirPipeline {
    fn internal_pips(&self, ext: &Dataset, int: &Dataset, seed: u64) -> Result<Vec<f64>> {
        let ext_chain = self.external.chain.with_seed(derive_seed(seed, "external-ssp", 0));
        let int_chain = self.external.chain.with_seed(derive_seed(seed, "internal-dir", 0));
        let fit = fit_ssp(ext, &self.external.prior, &ext_chain)?;
        let summary = summarize_external(&fit, self.external.borrow_threshold)?;
        let sources = [SourcePosterior::from_summary("external", &summary)];
        Ok(fit_apsp_multi(int, &sources, &self.prior, &int_chain)?.fit.pips())
    }

    fn cost(&self) -> usize {
        2 * self.external.chain.n_iter
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullThresholds {
    pub covariates: Vec<String>,
    pub c_hat: Vec<f64>,
    pub n_replicates: usize,
    pub seed: u64,
    /// replicates × K matrix of permuted PIPs.
    pub replicate_pips: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct ThresholdEntry {
    covariate: String,
    c_hat: f64,
    n_replicates: usize,
    seed: u64,
}

impl NullThresholds {
    /// Monte Carlo standard error of each Ĉ_k.
    pub fn standard_errors(&self) -> Vec<f64> {
        let n = self.replicate_pips.len();
        if n < 2 {
            return vec![f64::NAN; self.c_hat.len()];
        }
        (0..self.c_hat.len())
            .map(|k| {
                let col: Vec<f64> = self.replicate_pips.iter().map(|r| r[k]).collect();
                (crate::mcmc::variance(&col) / n as f64).sqrt()
            })
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.covariates.iter().position(|c| c == name).map(|i| self.c_hat[i])
    }

    pub fn to_json(&self) -> Result<String> {
        let entries: Vec<ThresholdEntry> = self
            .covariates
            .iter()
            .zip(&self.c_hat)
            .map(|(c, &v)| ThresholdEntry {
                covariate: c.clone(),
                c_hat: v,
                n_replicates: self.n_replicates,
                seed: self.seed,
            })
            .collect();
        Ok(serde_json::to_string_pretty(&entries)?)
    }

    /// Reads thresholds written by [`NullThresholds::to_json`]; the replicate
    /// matrix is not part of that format.
    pub fn from_json(s: &str) -> Result<Self> {
        let entries: Vec<ThresholdEntry> = serde_json::from_str(s)?;
        let first = entries
            .first()
            .ok_or_else(|| Error::InvalidInput("threshold file is empty".into()))?;
        Ok(NullThresholds {
            n_replicates: first.n_replicates,
            seed: first.seed,
            covariates: entries.iter().map(|e| e.covariate.clone()).collect(),
            c_hat: entries.iter().map(|e| e.c_hat).collect(),
            replicate_pips: Vec::new(),
        })
    }

    pub fn write_matrix_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["replicate".to_string()];
        header.extend(self.covariates.iter().cloned());
        w.write_record(&header)?;
        for (j, row) in self.replicate_pips.iter().enumerate() {
            let mut rec = vec![j.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_matrix_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let p = path.as_ref();
        let f = std::fs::File::create(p).map_err(|e| Error::io(p, e))?;
        self.write_matrix_csv(std::io::BufWriter::new(f))
    }
}

/// Outcome permutation for replicate `j`, split into (external, internal).
pub fn permuted_outcomes(ext: &Dataset, int: &Dataset, seed: u64, j: usize) -> (Vec<f64>, Vec<f64>) {
    let mut y: Vec<f64> = ext.y().iter().chain(int.y()).copied().collect();
    y.shuffle(&mut SamplerRng::seed_from_u64(derive_seed(seed, "null-perm", j as u64)));
    let int_y = y.split_off(ext.n());
    (y, int_y)
}

/// Runs `n_replicates` permutation replicates (in parallel on the current
/// rayon pool) and averages the internal PIPs.
pub fn calibrate_null(
    ext: &Dataset,
    int: &Dataset,
    pipeline: &dyn NullPipeline,
    n_replicates: usize,
    seed: u64,
) -> Result<NullThresholds> {
    check_same_schema(&[ext, int])?;
    if n_replicates == 0 {
        return Err(Error::InvalidConfig("null calibration needs at least one replicate".into()));
    }
    let work = n_replicates.saturating_mul(pipeline.cost());
    if work > RUNTIME_WARN_ITERATIONS {
        log::warn!("null calibration will run {work} sampler iterations; this may take a while");
    }
    let replicate_pips = (0..n_replicates)
        .into_par_iter()
        .map(|j| {
            let (ye, yi) = permuted_outcomes(ext, int, seed, j);
            let pe = ext.with_outcome(ye)?;
            let pi = int.with_outcome(yi)?;
            pipeline.internal_pips(&pe, &pi, derive_seed(seed, "null-fit", j as u64))
        })
        .collect::<Result<Vec<_>>>()?;
    let k = int.k();
    let c_hat = (0..k)
        .map(|c| replicate_pips.iter().map(|r| r[c]).sum::<f64>() / n_replicates as f64)
        .collect();
    Ok(NullThresholds {
        covariates: int.column_names(),
        c_hat,
        n_replicates,
        seed,
        replicate_pips,
    })
}

/// selected_k = pip_k > Ĉ_k (strict).
pub fn select(pips: &[f64], thresholds: &NullThresholds) -> Result<Vec<bool>> {
    if pips.len() != thresholds.c_hat.len() {
        return Err(Error::InvalidInput(format!(
            "{} PIPs against {} thresholds",
            pips.len(),
            thresholds.c_hat.len()
        )));
    }
    Ok(pips.iter().zip(&thresholds.c_hat).map(|(p, c)| p > c).collect())
}
