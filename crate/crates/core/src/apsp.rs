//! Adaptive posterior-informed shrinkage prior and the internal-data fit.
//!
//! For covariate k the coefficient prior is a mixture of
//! - a spike N(0, v_spike) with weight 1 − π_k,
//! - when the external fit flags k (δ_k = 1), an informative component
//!   N(β̂ᴱ_k, τ²_k · var̂ᴱ_k) with weight π_k, τ²_k ~ Gamma(a_τ, b_τ),
//! - otherwise the non-informative slab N(0, v_slab) with weight π_k.
//!
//! With every δ_k = 0 the sampler is the external spike-and-slab sampler,
//! draw for draw.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{run_mixture, Design};
use crate::mcmc::{derive_seed, ChainSpec};
use crate::posterior::{FitResult, SelectionRule};
use crate::ssp::{
    fit_ssp, mixture_fit_result, summarize_external, ExternalSummary, SspPriorSpec,
    DEFAULT_BORROW_THRESHOLD,
};

/// Default Gamma(shape, rate) hyperprior of the informative-variance multiplier.
pub const DEFAULT_TAU_HYPER: (f64, f64) = (2.0, 2.0);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApspCovariatePrior {
    pub name: String,
    pub delta: u8,
    pub informative_mean: f64,
    pub informative_base_var: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApspPriorSpec {
    pub covariates: Vec<ApspCovariatePrior>,
    pub base: SspPriorSpec,
    pub a_tau: f64,
    pub b_tau: f64,
}

impl ApspPriorSpec {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if !(self.a_tau > 0.0 && self.b_tau > 0.0) {
            return Err(Error::InvalidConfig("tau hyperparameters must be positive".into()));
        }
        for c in &self.covariates {
            if c.delta > 1 {
                return Err(Error::InvalidConfig(format!("delta for `{}` is not 0/1", c.name)));
            }
            if c.delta == 1 && !(c.informative_base_var > 0.0 && c.informative_base_var.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "borrowed covariate `{}` has non-positive external variance",
                    c.name
                )));
            }
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&ApspCovariatePrior> {
        self.covariates.iter().find(|c| c.name == name)
    }

    pub fn deltas(&self) -> Vec<u8> {
        self.covariates.iter().map(|c| c.delta).collect()
    }
}

/// Prior built from an external summary, plus warnings for covariates that
/// could not borrow.
#[derive(Debug, Clone)]
pub struct BuiltPrior {
    pub prior: ApspPriorSpec,
    pub warnings: Vec<String>,
}

/// Aligns the external summary with the internal covariates by name.
///
/// Internal covariates missing from the external summary fall back to the
/// slab with a warning. A flagged covariate with zero external variance is
/// an error.
pub fn build_apsp_prior(
    ext: &ExternalSummary,
    internal_covariates: &[String],
    defaults: &SspPriorSpec,
    tau_hyper: (f64, f64),
) -> Result<BuiltPrior> {
    let mut warnings = Vec::new();
    let mut covariates = Vec::with_capacity(internal_covariates.len());
    for name in internal_covariates {
        let entry = match ext.get(name) {
            Some(e) if e.delta_hat == 1 => {
                if !(e.var_hat > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "`{name}` is flagged for borrowing but its external variance is {}",
                        e.var_hat
                    )));
                }
                ApspCovariatePrior {
                    name: name.clone(),
                    delta: 1,
                    informative_mean: e.beta_hat,
                    informative_base_var: e.var_hat,
                }
            }
            found => {
                if found.is_none() {
                    let msg = format!("covariate `{name}` has no external counterpart; using the slab");
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
                ApspCovariatePrior {
                    name: name.clone(),
                    delta: 0,
                    informative_mean: 0.0,
                    informative_base_var: defaults.v_slab,
                }
            }
        };
        covariates.push(entry);
    }
    let prior = ApspPriorSpec {
        covariates,
        base: *defaults,
        a_tau: tau_hyper.0,
        b_tau: tau_hyper.1,
    };
    prior.validate()?;
    Ok(BuiltPrior { prior, warnings })
}

/// Internal fit under the borrowing prior.
#[derive(Debug, Clone)]
pub struct ApspFitResult {
    pub fit: FitResult,
    pub delta: Vec<u8>,
    /// Retained γ draws per covariate.
    pub gamma_draws: Vec<Vec<f64>>,
    /// Retained τ² draws per covariate; empty where δ = 0 (τ² is not used).
    pub tau_draws: Vec<Vec<f64>>,
    pub tau_acceptance: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct CovariateReport<'a> {
    name: &'a str,
    mean: f64,
    variance: f64,
    ci95: (f64, f64),
    pip: Option<f64>,
    delta: u8,
    tau_beta_mean: Option<f64>,
    selected: bool,
    threshold: Option<f64>,
}

#[derive(Serialize)]
struct FitReport<'a> {
    method: &'a str,
    intercept: Option<f64>,
    covariates: Vec<CovariateReport<'a>>,
    diagnostics: &'a crate::mcmc::ChainDiagnostics,
}

impl ApspFitResult {
    pub fn pips(&self) -> Vec<f64> {
        self.fit.pips()
    }

    pub fn tau_means(&self) -> Vec<Option<f64>> {
        self.tau_draws
            .iter()
            .map(|d| (!d.is_empty()).then(|| crate::mcmc::mean(d)))
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let taus = self.tau_means();
        let covariates = self
            .fit
            .coefficients
            .iter()
            .enumerate()
            .map(|(k, c)| CovariateReport {
                name: &c.name,
                mean: c.mean,
                variance: c.variance,
                ci95: c.ci95,
                pip: c.pip,
                delta: self.delta[k],
                tau_beta_mean: taus[k],
                selected: self.fit.selected[k],
                threshold: self.fit.rule.threshold_for(k),
            })
            .collect();
        Ok(serde_json::to_string_pretty(&FitReport {
            method: &self.fit.method,
            intercept: self.fit.intercept,
            covariates,
            diagnostics: &self.fit.diagnostics,
        })?)
    }
}

/// Gibbs-within-Metropolis fit of the internal data under `prior`.
pub fn fit_apsp(ds_internal: &Dataset, prior: &ApspPriorSpec, chain: &ChainSpec) -> Result<ApspFitResult> {
    prior.validate()?;
    let aligned: Vec<&ApspCovariatePrior> = ds_internal
        .columns()
        .iter()
        .map(|c| {
            prior.get(&c.name).ok_or_else(|| {
                Error::SchemaMismatch(format!("prior has no entry for covariate `{}`", c.name))
            })
        })
        .collect::<Result<_>>()?;
    let informative = aligned
        .iter()
        .map(|c| (c.delta == 1).then_some((c.informative_mean, c.informative_base_var)))
        .collect();
    let mixture = prior.base.mixture(informative, (prior.a_tau, prior.b_tau));
    let design = Design::new(ds_internal);
    let draws = run_mixture(&design, &mixture, chain)?;
    let mut fit = mixture_fit_result(
        "APSP",
        ds_internal,
        &draws,
        SelectionRule::Pip { threshold: DEFAULT_BORROW_THRESHOLD },
    )?;
    let delta: Vec<u8> = aligned.iter().map(|c| c.delta).collect();
    let tau_acceptance: Vec<Option<f64>> = draws.tau_acceptance.iter().map(|a| a.rate()).collect();
    for (k, col) in ds_internal.columns().iter().enumerate() {
        if delta[k] == 1 {
            fit.diagnostics
                .push(format!("tau2[{}]", col.name), &draws.tau[k], tau_acceptance[k]);
        }
    }
    Ok(ApspFitResult {
        fit,
        delta,
        gamma_draws: draws.gamma,
        tau_draws: draws.tau,
        tau_acceptance,
    })
}

/// Settings of the full external → prior → internal pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ApspConfig {
    pub prior: SspPriorSpec,
    pub tau_hyper: (f64, f64),
    pub borrow_threshold: f64,
    pub chain: ChainSpec,
}

impl Default for ApspConfig {
    fn default() -> Self {
        ApspConfig {
            prior: SspPriorSpec::default(),
            tau_hyper: DEFAULT_TAU_HYPER,
            borrow_threshold: DEFAULT_BORROW_THRESHOLD,
            chain: ChainSpec::default(),
        }
    }
}

/// Every intermediate of the two-step pipeline.
#[derive(Debug, Clone)]
pub struct TwoStepFit {
    pub external_fit: FitResult,
    pub summary: ExternalSummary,
    pub prior: ApspPriorSpec,
    pub internal: ApspFitResult,
    pub warnings: Vec<String>,
}

/// External spike-and-slab fit, summary, prior construction and internal
/// fit. Chain seeds for the two fits are derived from `seed`.
pub fn run_two_step(ext: &Dataset, int: &Dataset, cfg: &ApspConfig, seed: u64) -> Result<TwoStepFit> {
    let ext_chain = cfg.chain.with_seed(derive_seed(seed, "external-ssp", 0));
    let int_chain = cfg.chain.with_seed(derive_seed(seed, "internal-apsp", 0));
    let external_fit = fit_ssp(ext, &cfg.prior, &ext_chain)?;
    let summary = summarize_external(&external_fit, cfg.borrow_threshold)?;
    let built = build_apsp_prior(&summary, &int.column_names(), &cfg.prior, cfg.tau_hyper)?;
    let internal = fit_apsp(int, &built.prior, &int_chain)?;
    Ok(TwoStepFit {
        external_fit,
        summary,
        prior: built.prior,
        internal,
        warnings: built.warnings,
    })
}
