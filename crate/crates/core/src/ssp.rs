//! Spike-and-slab fit of the external dataset and the summary handed to the
//! borrowing prior.
//!
//! Prior per covariate: β_k | γ_k ~ γ_k N(0, v_slab) + (1 − γ_k) N(0, v_spike),
//! γ_k ~ Bernoulli(π_k), π_k ~ Beta(a_π, b_π); the noise precision has a
//! Gamma(a_σ, b_σ) prior (shape–rate).

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{run_mixture, Design, MixtureDraws, MixturePrior};
use crate::mcmc::{ChainDiagnostics, ChainSpec};
use crate::posterior::{CoefficientPosterior, FitResult, SelectionRule};

/// Default PIP cut-off for flagging an external covariate as a signal.
pub const DEFAULT_BORROW_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SspPriorSpec {
    pub v_slab: f64,
    pub v_spike: f64,
    pub a_pi: f64,
    pub b_pi: f64,
    pub a_sigma: f64,
    pub b_sigma: f64,
}

impl Default for SspPriorSpec {
    fn default() -> Self {
        SspPriorSpec {
            v_slab: 100.0,
            v_spike: 1e-4,
            a_pi: 1.0,
            b_pi: 1.0,
            a_sigma: 0.01,
            b_sigma: 0.01,
        }
    }
}

impl SspPriorSpec {
    pub fn validate(&self) -> Result<()> {
        let all = [self.v_slab, self.v_spike, self.a_pi, self.b_pi, self.a_sigma, self.b_sigma];
        if all.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("prior hyperparameters must be positive".into()));
        }
        if self.v_spike > self.v_slab {
            return Err(Error::InvalidConfig(format!(
                "spike variance {} must not exceed slab variance {}",
                self.v_spike, self.v_slab
            )));
        }
        Ok(())
    }

    pub(crate) fn mixture(&self, informative: Vec<Option<(f64, f64)>>, tau: (f64, f64)) -> MixturePrior {
        MixturePrior {
            informative,
            v_slab: self.v_slab,
            v_spike: self.v_spike,
            a_pi: self.a_pi,
            b_pi: self.b_pi,
            a_tau: tau.0,
            b_tau: tau.1,
            a_sigma: self.a_sigma,
            b_sigma: self.b_sigma,
        }
    }
}

/// Builds the per-coefficient posterior list and diagnostics from mixture draws.
pub(crate) fn mixture_fit_result(
    method: &str,
    ds: &Dataset,
    draws: &MixtureDraws,
    rule: SelectionRule,
) -> Result<FitResult> {
    let mut diag = ChainDiagnostics::default();
    let mut coefs = Vec::with_capacity(ds.k());
    for (j, col) in ds.columns().iter().enumerate() {
        let pip = crate::mcmc::mean(&draws.gamma[j]);
        diag.push(format!("beta[{}]", col.name), &draws.beta[j], None);
        coefs.push(CoefficientPosterior::from_draws(
            &col.name,
            draws.beta[j].clone(),
            Some(pip),
        )?);
    }
    diag.push("precision", &draws.precision, None);
    let intercept = crate::mcmc::mean(&draws.intercept);
    Ok(FitResult::new(method, coefs, Some(intercept), rule, diag))
}

/// Gibbs sampler for the spike-and-slab regression of `ds`.
///
/// The returned fit selects covariates by PIP > 0.5.
pub fn fit_ssp(ds: &Dataset, prior: &SspPriorSpec, chain: &ChainSpec) -> Result<FitResult> {
    prior.validate()?;
    let design = Design::new(ds);
    let mixture = prior.mixture(vec![None; ds.k()], (1.0, 1.0));
    let draws = run_mixture(&design, &mixture, chain)?;
    mixture_fit_result(
        "SSP",
        ds,
        &draws,
        SelectionRule::Pip { threshold: DEFAULT_BORROW_THRESHOLD },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalCovariate {
    pub name: String,
    pub beta_hat: f64,
    pub var_hat: f64,
    pub pip: f64,
    pub delta_hat: u8,
}

/// External posterior means/variances, PIPs and borrow flags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalSummary {
    pub covariates: Vec<ExternalCovariate>,
    pub threshold_used: f64,
}

impl ExternalSummary {
    pub fn get(&self, name: &str) -> Option<&ExternalCovariate> {
        self.covariates.iter().find(|c| c.name == name)
    }

    pub fn borrowed(&self) -> impl Iterator<Item = &ExternalCovariate> {
        self.covariates.iter().filter(|c| c.delta_hat == 1)
    }
}

/// Unconditional posterior moments plus δ̂_k = 1{PIP_k > threshold}.
pub fn summarize_external(fit: &FitResult, threshold: f64) -> Result<ExternalSummary> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "borrow threshold {threshold} outside (0, 1)"
        )));
    }
    let covariates = fit
        .coefficients
        .iter()
        .map(|c| {
            let pip = c.pip.ok_or_else(|| {
                Error::InvalidInput(format!("fit has no PIP for `{}`", c.name))
            })?;
            Ok(ExternalCovariate {
                name: c.name.clone(),
                beta_hat: c.mean,
                var_hat: c.variance,
                pip,
                delta_hat: u8::from(pip > threshold),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ExternalSummary {
        covariates,
        threshold_used: threshold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Column, ColumnKind, Role};
    use crate::mcmc::ChainDiagnostics;

    fn fit_with_pips(pips: &[f64]) -> FitResult {
        let coefs = pips
            .iter()
            .enumerate()
            .map(|(i, p)| CoefficientPosterior {
                name: format!("x{i}"),
                mean: 1.0,
                variance: 0.04,
                ci95: (0.6, 1.4),
                pip: Some(*p),
                draws: None,
            })
            .collect();
        FitResult::new("SSP", coefs, None, SelectionRule::Pip { threshold: 0.5 }, ChainDiagnostics::default())
    }

    #[test]
    fn delta_rule_is_strict() {
        let s = summarize_external(&fit_with_pips(&[0.9, 0.5, 0.3]), 0.5).unwrap();
        let d: Vec<u8> = s.covariates.iter().map(|c| c.delta_hat).collect();
        assert_eq!(d, vec![1, 0, 0]);
        assert_eq!(s.threshold_used, 0.5);
        assert!(summarize_external(&fit_with_pips(&[0.9]), 1.0).is_err());
    }

    #[test]
    fn prior_validation() {
        SspPriorSpec::default().validate().unwrap();
        let bad = SspPriorSpec { v_spike: 200.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let neg = SspPriorSpec { a_pi: 0.0, ..Default::default() };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn zero_outcome_has_no_signal() {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.7).sin(), (t * 1.3).cos(), (i % 2) as f64]
            })
            .collect();
        let ds = Dataset::from_rows(
            "zero",
            Role::External,
            "y",
            vec![
                Column::new("a", ColumnKind::Continuous),
                Column::new("b", ColumnKind::Continuous),
                Column::new("c", ColumnKind::Binary),
            ],
            &rows,
            vec![0.0; 30],
        )
        .unwrap();
        let fit = fit_ssp(&ds, &SspPriorSpec::default(), &ChainSpec::default()).unwrap();
        for c in &fit.coefficients {
            assert!(c.pip.unwrap() < 0.5, "{c:?}");
            assert!(c.mean.abs() < 0.05, "{c:?}");
            let d = c.draws.as_ref().unwrap();
            assert_eq!(d.len(), 2000);
        }
    }
}
