//! Horseshoe regression with half-Cauchy local and global scales written as
//! scale mixtures of inverse-gamma variables:
//! λ² | ν ~ IG(1/2, 1/ν), ν ~ IG(1/2, 1), and likewise τ² | ξ, ξ.
//! β_k | λ_k, τ, σ ~ N(0, λ_k² τ² σ²), p(σ²) ∝ 1/σ², flat intercept.

use nalgebra::DVector;

use super::linalg::{cholesky, gaussian_from_precision, SuffStats};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::gamma_rate;
use crate::mcmc::{ChainDiagnostics, ChainSpec, SamplerRng};
use crate::posterior::{CoefficientPosterior, FitResult, SelectionRule};

const SCALE_BOUNDS: (f64, f64) = (1e-12, 1e12);

fn inv_gamma(rng: &mut SamplerRng, shape: f64, scale: f64) -> f64 {
    (1.0 / gamma_rate(rng, shape, scale)).clamp(SCALE_BOUNDS.0, SCALE_BOUNDS.1)
}

/// Gibbs sampler; selection by 95% credible interval excluding zero.
pub fn fit_horseshoe(ds: &Dataset, chain: &ChainSpec) -> Result<FitResult> {
    chain.validate()?;
    let k = ds.k();
    let n = ds.n() as f64;
    let stats = SuffStats::new(ds);
    let mut rng = chain.rng();
    let mut lambda2 = vec![1.0; k];
    let mut nu = vec![1.0; k];
    let mut tau2 = 1.0;
    let mut xi = 1.0;
    let mut sigma2 = crate::mcmc::variance(ds.y()).max(1e-8);
    let cap = chain.retained();
    let mut beta_draws = vec![Vec::with_capacity(cap); k];
    let mut intercepts = Vec::with_capacity(cap);
    let mut tau_draws = Vec::with_capacity(cap);

    for iter in 0..chain.n_iter {
        let mut a = stats.xtx.clone();
        for j in 0..k {
            a[(j + 1, j + 1)] += 1.0 / (lambda2[j] * tau2);
        }
        let chol = cholesky(a, "horseshoe precision")?;
        let theta: DVector<f64> = gaussian_from_precision(&chol, &stats.xty, sigma2.sqrt(), &mut rng);
        let beta = theta.rows(1, k);

        let shrink: f64 = (0..k).map(|j| beta[j] * beta[j] / lambda2[j]).sum();
        let rss = stats.rss(&theta);
        sigma2 = 1.0 / gamma_rate(&mut rng, 0.5 * (n + k as f64), 0.5 * (rss + shrink / tau2));

        for j in 0..k {
            lambda2[j] = inv_gamma(&mut rng, 1.0, 1.0 / nu[j] + beta[j] * beta[j] / (2.0 * tau2 * sigma2));
            nu[j] = inv_gamma(&mut rng, 1.0, 1.0 + 1.0 / lambda2[j]);
        }
        let shrink: f64 = (0..k).map(|j| beta[j] * beta[j] / lambda2[j]).sum();
        tau2 = inv_gamma(&mut rng, 0.5 * (k as f64 + 1.0), 1.0 / xi + shrink / (2.0 * sigma2));
        xi = inv_gamma(&mut rng, 1.0, 1.0 + 1.0 / tau2);

        if theta.iter().any(|v| !v.is_finite()) || !sigma2.is_finite() {
            return Err(Error::Divergence(format!("HP: non-finite state at iteration {iter}")));
        }
        if chain.keeps(iter) {
            intercepts.push(theta[0]);
            tau_draws.push(tau2);
            for j in 0..k {
                beta_draws[j].push(beta[j]);
            }
        }
    }

    let mut diag = ChainDiagnostics::default();
    diag.push("tau2", &tau_draws, None);
    let coefs = ds
        .column_names()
        .into_iter()
        .zip(beta_draws)
        .map(|(name, d)| CoefficientPosterior::from_draws(name, d, None))
        .collect::<Result<Vec<_>>>()?;
    Ok(FitResult::new(
        "HP",
        coefs,
        Some(crate::mcmc::mean(&intercepts)),
        SelectionRule::CredibleInterval,
        diag,
    ))
}
