//! Method-independent posterior summaries and the uniform fit schema.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mcmc::{summarize, ChainDiagnostics};

/// Posterior summary of one regression coefficient.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientPosterior {
    pub name: String,
    pub mean: f64,
    pub variance: f64,
    pub ci95: (f64, f64),
    /// Posterior inclusion probability; absent for methods without an
    /// inclusion indicator.
    pub pip: Option<f64>,
    #[serde(skip)]
    pub draws: Option<Vec<f64>>,
}

impl CoefficientPosterior {
    /// Summary computed from retained draws (which are kept).
    pub fn from_draws(name: impl Into<String>, draws: Vec<f64>, pip: Option<f64>) -> Result<Self> {
        let s = summarize(&draws)?;
        Ok(CoefficientPosterior {
            name: name.into(),
            mean: s.mean,
            variance: s.variance,
            ci95: s.ci95,
            pip,
            draws: Some(draws),
        })
    }

    pub fn excludes_zero(&self) -> bool {
        self.ci95.0 > 0.0 || self.ci95.1 < 0.0
    }

    /// Rescales mean, variance, interval and draws by `factor`.
    pub(crate) fn rescaled(&self, factor: f64) -> Self {
        let (lo, hi) = (self.ci95.0 * factor, self.ci95.1 * factor);
        CoefficientPosterior {
            name: self.name.clone(),
            mean: self.mean * factor,
            variance: self.variance * factor * factor,
            ci95: (lo.min(hi), lo.max(hi)),
            pip: self.pip,
            draws: self
                .draws
                .as_ref()
                .map(|d| d.iter().map(|v| v * factor).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SelectionRule {
    /// PIP strictly above a common threshold.
    Pip { threshold: f64 },
    /// PIP strictly above per-covariate thresholds.
    PipPerCovariate { thresholds: Vec<f64> },
    /// 95% credible interval excludes zero.
    CredibleInterval,
    /// Point estimate is nonzero.
    NonZero,
}

impl SelectionRule {
    pub fn apply(&self, coefs: &[CoefficientPosterior]) -> Vec<bool> {
        match self {
            SelectionRule::Pip { threshold } => coefs
                .iter()
                .map(|c| c.pip.is_some_and(|p| p > *threshold))
                .collect(),
            SelectionRule::PipPerCovariate { thresholds } => coefs
                .iter()
                .zip(thresholds)
                .map(|(c, t)| c.pip.is_some_and(|p| p > *t))
                .collect(),
            SelectionRule::CredibleInterval => coefs.iter().map(|c| c.excludes_zero()).collect(),
            SelectionRule::NonZero => coefs.iter().map(|c| c.mean != 0.0).collect(),
        }
    }

    /// Threshold applied to covariate `k`, where meaningful.
    pub fn threshold_for(&self, k: usize) -> Option<f64> {
        match self {
            SelectionRule::Pip { threshold } => Some(*threshold),
            SelectionRule::PipPerCovariate { thresholds } => thresholds.get(k).copied(),
            _ => None,
        }
    }
}

/// Posterior of a regression fit, uniform across methods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub method: String,
    pub coefficients: Vec<CoefficientPosterior>,
    pub intercept: Option<f64>,
    pub rule: SelectionRule,
    pub selected: Vec<bool>,
    #[serde(default)]
    pub diagnostics: ChainDiagnostics,
}

impl FitResult {
    pub fn new(
        method: impl Into<String>,
        coefficients: Vec<CoefficientPosterior>,
        intercept: Option<f64>,
        rule: SelectionRule,
        diagnostics: ChainDiagnostics,
    ) -> Self {
        let selected = rule.apply(&coefficients);
        FitResult {
            method: method.into(),
            coefficients,
            intercept,
            rule,
            selected,
            diagnostics,
        }
    }

    /// Replaces the selection rule and recomputes the flags.
    pub fn reselect(&mut self, rule: SelectionRule) {
        self.selected = rule.apply(&self.coefficients);
        self.rule = rule;
    }

    pub fn means(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.mean).collect()
    }

    pub fn pips(&self) -> Vec<f64> {
        self.coefficients.iter().map(|c| c.pip.unwrap_or(f64::NAN)).collect()
    }

    pub fn names(&self) -> Vec<String> {
        self.coefficients.iter().map(|c| c.name.clone()).collect()
    }

    pub fn coefficient(&self, name: &str) -> Option<&CoefficientPosterior> {
        self.coefficients.iter().find(|c| c.name == name)
    }

    /// Coefficients divided by per-column scales (standardized → original).
    pub fn to_original_scale(&self, scales: &[f64]) -> FitResult {
        let mut out = self.clone();
        out.coefficients = self
            .coefficients
            .iter()
            .zip(scales)
            .map(|(c, s)| c.rescaled(1.0 / s))
            .collect();
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn coef(pip: Option<f64>, ci: (f64, f64)) -> CoefficientPosterior {
        CoefficientPosterior {
            name: "x".into(),
            mean: 0.5 * (ci.0 + ci.1),
            variance: 1.0,
            ci95: ci,
            pip,
            draws: None,
        }
    }

    #[test]
    fn pip_rule_is_strict() {
        let cs = vec![coef(Some(0.7), (0.0, 1.0)), coef(Some(0.4), (0.0, 1.0))];
        let sel = SelectionRule::PipPerCovariate { thresholds: vec![0.4, 0.4] }.apply(&cs);
        assert_eq!(sel, vec![true, false]);
        let none = SelectionRule::Pip { threshold: 0.5 }.apply(&[coef(Some(0.0), (0.0, 0.0))]);
        assert_eq!(none, vec![false]);
    }

    #[test]
    fn credible_interval_rule() {
        let cs = vec![coef(None, (0.1, 1.0)), coef(None, (-1.0, 0.5)), coef(None, (-2.0, -0.1))];
        assert_eq!(SelectionRule::CredibleInterval.apply(&cs), vec![true, false, true]);
    }

    #[test]
    fn draws_match_moments() {
        let d: Vec<f64> = (0..101).map(|i| (i as f64 * 0.37).sin()).collect();
        let c = CoefficientPosterior::from_draws("x", d.clone(), Some(0.5)).unwrap();
        let m = d.iter().sum::<f64>() / d.len() as f64;
        assert!((c.mean - m).abs() <= 1e-10 * m.abs().max(1e-300) || (c.mean - m).abs() < 1e-15);
        assert!(c.ci95.0 <= c.ci95.1);
        let r = c.rescaled(-2.0);
        assert!(r.ci95.0 <= r.ci95.1);
        assert!((r.variance - 4.0 * c.variance).abs() < 1e-12);
    }
}
