//! Power prior with a fixed discount and the normalized (modified) power
//! prior with a Beta prior on the discount.
//!
//! The base prior is normal–inverse-gamma: β | σ² ~ N(0, σ² V₀) with
//! V₀ = diag(v_intercept, v_beta, …), σ² ~ IG(a, b). Raising the external
//! likelihood to a₀ keeps the posterior in the same family, so the fixed-a₀
//! posterior is closed form and the normalizing constant of the power prior
//! is available exactly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;

use super::linalg::{cholesky, gaussian_from_precision, log_det, SuffStats};
use crate::data::{check_same_schema, Dataset};
use crate::error::{Error, Result};
use crate::kernel::gamma_rate;
use crate::mcmc::{Acceptance, ChainDiagnostics, ChainSpec};
use crate::posterior::{CoefficientPosterior, FitResult, SelectionRule};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NigPrior {
    pub v_intercept: f64,
    pub v_beta: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for NigPrior {
    fn default() -> Self {
        NigPrior {
            v_intercept: 1e4,
            v_beta: 100.0,
            a: 0.01,
            b: 0.01,
        }
    }
}

impl NigPrior {
    pub fn validate(&self) -> Result<()> {
        if [self.v_intercept, self.v_beta, self.a, self.b].iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(Error::InvalidConfig("normal-inverse-gamma prior parameters must be positive".into()))
        }
    }

    fn prior_precision(&self, dim: usize) -> DMatrix<f64> {
        DMatrix::from_fn(dim, dim, |i, j| match (i == j, i) {
            (true, 0) => 1.0 / self.v_intercept,
            (true, _) => 1.0 / self.v_beta,
            _ => 0.0,
        })
    }

    fn log_det_prior_precision(&self, dim: usize) -> f64 {
        -self.v_intercept.ln() - (dim - 1) as f64 * self.v_beta.ln()
    }
}

/// Normal–inverse-gamma posterior over (intercept, β, σ²).
#[derive(Debug, Clone)]
pub struct NigPosterior {
    /// Posterior mean, intercept first.
    pub mean: DVector<f64>,
    /// Posterior precision matrix of β (up to the σ² factor).
    pub precision: DMatrix<f64>,
    pub a_n: f64,
    pub b_n: f64,
    /// Log marginal likelihood of the (weighted) data.
    pub log_evidence: f64,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
}

impl NigPosterior {
    pub(crate) fn from_stats(stats: &SuffStats, prior: &NigPrior) -> Result<Self> {
        let dim = stats.xty.len();
        let precision = prior.prior_precision(dim) + &stats.xtx;
        let chol = cholesky(precision.clone(), "posterior precision")?;
        let mean = chol.solve(&stats.xty);
        let a_n = prior.a + 0.5 * stats.n;
        let quad = mean.dot(&stats.xty);
        let b_n = prior.b + 0.5 * (stats.yty - quad).max(0.0);
        let log_evidence = -0.5 * stats.n * (2.0 * std::f64::consts::PI).ln()
            + 0.5 * prior.log_det_prior_precision(dim)
            - 0.5 * log_det(&chol)
            + prior.a * prior.b.ln()
            - a_n * b_n.ln()
            + ln_gamma(a_n)
            - ln_gamma(prior.a);
        Ok(NigPosterior {
            mean,
            precision,
            a_n,
            b_n,
            log_evidence,
            chol,
        })
    }

    /// Marginal covariance of the coefficients, (b_n/(a_n − 1)) Λ⁻¹.
    pub fn covariance(&self) -> DMatrix<f64> {
        let inv = self.chol.inverse();
        inv * (self.b_n / (self.a_n - 1.0))
    }

    /// Coefficient summaries from the Student-t marginals (intercept excluded).
    pub(crate) fn coefficients(&self, names: &[String]) -> Vec<CoefficientPosterior> {
        let inv = self.chol.inverse();
        let dof = 2.0 * self.a_n;
        let t = StudentsT::new(0.0, 1.0, dof).expect("positive degrees of freedom");
        let q = t.inverse_cdf(0.975);
        names
            .iter()
            .enumerate()
            .map(|(k, name)| {
                let m = self.mean[k + 1];
                let scale = (self.b_n / self.a_n * inv[(k + 1, k + 1)]).sqrt();
                CoefficientPosterior {
                    name: name.clone(),
                    mean: m,
                    variance: self.b_n / (self.a_n - 1.0) * inv[(k + 1, k + 1)],
                    ci95: (m - q * scale, m + q * scale),
                    pip: None,
                    draws: None,
                }
            })
            .collect()
    }

    fn draw(&self, rng: &mut crate::mcmc::SamplerRng) -> (f64, DVector<f64>) {
        let sigma2 = 1.0 / gamma_rate(rng, self.a_n, self.b_n);
        let h = &self.precision * &self.mean;
        let theta = gaussian_from_precision(&self.chol, &h, sigma2.sqrt(), rng);
        (sigma2, theta)
    }
}

fn check_a0(a0: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&a0) {
        return Err(Error::InvalidConfig(format!("a0 = {a0} outside [0, 1]")));
    }
    Ok(())
}

/// Closed-form posterior ∝ L(internal) · L(external)^a₀ · π₀.
pub fn power_prior_posterior(int: &Dataset, ext: &Dataset, a0: f64, prior: &NigPrior) -> Result<NigPosterior> {
    check_a0(a0)?;
    prior.validate()?;
    check_same_schema(&[int, ext])?;
    let stats = SuffStats::new(int).weighted_sum(&SuffStats::new(ext), a0);
    NigPosterior::from_stats(&stats, prior)
}

/// Power prior fit; selects by 95% credible interval excluding zero.
pub fn fit_power_prior(int: &Dataset, ext: &Dataset, a0: f64, prior: &NigPrior) -> Result<FitResult> {
    let post = power_prior_posterior(int, ext, a0, prior)?;
    Ok(FitResult::new(
        "PP",
        post.coefficients(&int.column_names()),
        Some(post.mean[0]),
        SelectionRule::CredibleInterval,
        ChainDiagnostics::default(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum A0Prior {
    Beta { a: f64, b: f64 },
    /// Degenerate prior: the discount is known.
    Fixed(f64),
}

impl Default for A0Prior {
    fn default() -> Self {
        A0Prior::Beta { a: 1.0, b: 1.0 }
    }
}

#[derive(Debug, Clone)]
pub struct MppFit {
    pub fit: FitResult,
    /// Retained discount draws (empty for a fixed discount).
    pub a0_draws: Vec<f64>,
    pub a0_mean: f64,
}

/// Log posterior of a₀ under the normalized power prior, up to a constant.
fn log_a0_posterior(a0: f64, int: &SuffStats, ext: &SuffStats, prior: &NigPrior, beta: (f64, f64)) -> Result<f64> {
    let joint = NigPosterior::from_stats(&int.weighted_sum(ext, a0), prior)?;
    let norm = NigPosterior::from_stats(&ext.scaled(a0), prior)?;
    Ok((beta.0 - 1.0) * a0.ln() + (beta.1 - 1.0) * (1.0 - a0).ln() + joint.log_evidence - norm.log_evidence)
}

/// Normalized power prior with a Beta prior on a₀.
///
/// a₀ moves by random-walk Metropolis on the log-odds scale against its
/// exact marginal posterior; (σ², β) are drawn from their conditional
/// normal–inverse-gamma posterior at each retained a₀.
pub fn fit_modified_power_prior(
    int: &Dataset,
    ext: &Dataset,
    a0_prior: A0Prior,
    prior: &NigPrior,
    chain: &ChainSpec,
) -> Result<MppFit> {
    check_same_schema(&[int, ext])?;
    prior.validate()?;
    let (a, b) = match a0_prior {
        A0Prior::Fixed(a0) => {
            let mut fit = fit_power_prior(int, ext, a0, prior)?;
            fit.method = "MPP".into();
            return Ok(MppFit { fit, a0_draws: Vec::new(), a0_mean: a0 });
        }
        A0Prior::Beta { a, b } => (a, b),
    };
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::InvalidConfig("a0 Beta prior must be positive".into()));
    }
    chain.validate()?;
    let s_int = SuffStats::new(int);
    let s_ext = SuffStats::new(ext);
    let mut rng = chain.rng();
    let mut a0 = 0.5;
    let mut lp = log_a0_posterior(a0, &s_int, &s_ext, prior, (a, b))?;
    let mut acc = Acceptance::default();
    let k = int.k();
    let mut a0_draws = Vec::with_capacity(chain.retained());
    let mut beta_draws = vec![Vec::with_capacity(chain.retained()); k];
    let mut intercepts = Vec::with_capacity(chain.retained());

    for iter in 0..chain.n_iter {
        let eta = (a0 / (1.0 - a0)).ln() + chain.mh_step * rng.sample::<f64, _>(StandardNormal);
        let prop = 1.0 / (1.0 + (-eta).exp());
        let u: f64 = rng.random();
        let mut accepted = false;
        if prop > 0.0 && prop < 1.0 {
            let lp_prop = log_a0_posterior(prop, &s_int, &s_ext, prior, (a, b))?;
            // Jacobian of the logit transform
            let log_ratio = lp_prop - lp + (prop * (1.0 - prop)).ln() - (a0 * (1.0 - a0)).ln();
            if u.ln() < log_ratio {
                a0 = prop;
                lp = lp_prop;
                accepted = true;
            }
        }
        acc.record(accepted);
        if chain.keeps(iter) {
            let post = NigPosterior::from_stats(&s_int.weighted_sum(&s_ext, a0), prior)?;
            let (_, theta) = post.draw(&mut rng);
            if theta.iter().any(|v| !v.is_finite()) {
                return Err(Error::Divergence(format!("non-finite draw at iteration {iter}")));
            }
            a0_draws.push(a0);
            intercepts.push(theta[0]);
            for j in 0..k {
                beta_draws[j].push(theta[j + 1]);
            }
        }
    }

    let mut diag = ChainDiagnostics::default();
    diag.push("a0", &a0_draws, acc.rate());
    let coefs = int
        .column_names()
        .into_iter()
        .zip(beta_draws)
        .map(|(name, d)| CoefficientPosterior::from_draws(name, d, None))
        .collect::<Result<Vec<_>>>()?;
    let a0_mean = crate::mcmc::mean(&a0_draws);
    Ok(MppFit {
        fit: FitResult::new(
            "MPP",
            coefs,
            Some(crate::mcmc::mean(&intercepts)),
            SelectionRule::CredibleInterval,
            diag,
        ),
        a0_draws,
        a0_mean,
    })
}
