//! Gibbs building blocks for Gaussian linear regression with per-coefficient
//! Gaussian mixture priors.
//!
//! Each coefficient update integrates the coefficient out of every candidate
//! prior component against the partial-residual likelihood, draws the
//! component, then draws the coefficient from its conjugate normal. The
//! intercept has a flat prior and is never subject to selection.
//!
//! Covariates are swept in lexicographic order of their names, so results do
//! not depend on the column order of the input.

use rand::Rng;
use rand_distr::{Beta, Distribution, Gamma, StandardNormal};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mcmc::{Acceptance, ChainSpec, SamplerRng};

pub(crate) struct Design {
    n: usize,
    x: Vec<f64>,
    col_sq: Vec<f64>,
    y: Vec<f64>,
    sweep: Vec<usize>,
}

impl Design {
    pub fn new(ds: &Dataset) -> Self {
        let n = ds.n();
        let x = ds.x_col_major().to_vec();
        let col_sq = (0..ds.k())
            .map(|j| ds.column(j).iter().map(|v| v * v).sum())
            .collect();
        let mut sweep: Vec<usize> = (0..ds.k()).collect();
        sweep.sort_by(|&a, &b| ds.columns()[a].name.cmp(&ds.columns()[b].name));
        Design {
            n,
            x,
            col_sq,
            y: ds.y().to_vec(),
            sweep,
        }
    }

    pub fn k(&self) -> usize {
        self.col_sq.len()
    }

    pub fn sweep(&self) -> &[usize] {
        &self.sweep
    }

    fn column(&self, j: usize) -> &[f64] {
        &self.x[j * self.n..(j + 1) * self.n]
    }
}

/// One candidate prior component for a coefficient.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Component {
    pub log_weight: f64,
    pub mean: f64,
    pub var: f64,
}

/// Regression state: intercept, coefficients, residuals and noise precision.
pub(crate) struct LinearState<'a> {
    design: &'a Design,
    pub intercept: f64,
    pub beta: Vec<f64>,
    resid: Vec<f64>,
    pub precision: f64,
}

impl<'a> LinearState<'a> {
    pub fn new(design: &'a Design) -> Self {
        let n = design.n as f64;
        let ybar = design.y.iter().sum::<f64>() / n;
        let var = design.y.iter().map(|v| (v - ybar).powi(2)).sum::<f64>() / (n - 1.0);
        LinearState {
            design,
            intercept: ybar,
            beta: vec![0.0; design.k()],
            resid: design.y.iter().map(|v| v - ybar).collect(),
            precision: if var > 0.0 { 1.0 / var } else { 1.0 },
        }
    }

    pub fn update_intercept(&mut self, rng: &mut SamplerRng) {
        let n = self.design.n as f64;
        let shift = self.resid.iter().sum::<f64>() / n;
        let z: f64 = rng.sample(StandardNormal);
        let delta = shift + z / (n * self.precision).sqrt();
        for r in &mut self.resid {
            *r -= delta;
        }
        self.intercept += delta;
    }

    /// Draws the component index with the coefficient integrated out, then
    /// the coefficient given the component. Returns the component index.
    pub fn update_coefficient(
        &mut self,
        k: usize,
        components: &[Component],
        rng: &mut SamplerRng,
    ) -> usize {
        let col = self.design.column(k);
        let s = self.design.col_sq[k];
        let old = self.beta[k];
        let b = col.iter().zip(&self.resid).map(|(x, r)| x * r).sum::<f64>() + s * old;
        let phi = self.precision;

        let mut best = f64::NEG_INFINITY;
        let mut scratch = [(0.0f64, 0.0f64, 0.0f64); 8];
        let mut heap;
        let stats: &mut [(f64, f64, f64)] = if components.len() <= scratch.len() {
            &mut scratch[..components.len()]
        } else {
            heap = vec![(0.0, 0.0, 0.0); components.len()];
            &mut heap
        };
        for (c, slot) in components.iter().zip(stats.iter_mut()) {
            let prec = phi * s + 1.0 / c.var;
            let mu = (phi * b + c.mean / c.var) / prec;
            let lm = c.log_weight - 0.5 * (c.var * prec).ln() + 0.5 * prec * mu * mu
                - 0.5 * c.mean * c.mean / c.var;
            *slot = (lm, mu, prec);
            best = best.max(lm);
        }
        let total: f64 = stats.iter().map(|st| (st.0 - best).exp()).sum();
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = stats.len() - 1;
        for (j, st) in stats.iter().enumerate() {
            acc += (st.0 - best).exp();
            if u < acc {
                chosen = j;
                break;
            }
        }
        let (_, mu, prec) = stats[chosen];
        let z: f64 = rng.sample(StandardNormal);
        let new = mu + z / prec.sqrt();
        let diff = new - old;
        for (r, x) in self.resid.iter_mut().zip(col) {
            *r -= x * diff;
        }
        self.beta[k] = new;
        chosen
    }

    pub fn rss(&self) -> f64 {
        self.resid.iter().map(|r| r * r).sum()
    }

    /// Conjugate Gamma (shape–rate) update of the noise precision.
    pub fn update_precision(&mut self, a_sigma: f64, b_sigma: f64, rng: &mut SamplerRng) {
        let shape = a_sigma + 0.5 * self.design.n as f64;
        let rate = b_sigma + 0.5 * self.rss();
        self.precision = gamma_rate(rng, shape, rate);
    }

    pub fn check_finite(&self, iter: usize) -> Result<()> {
        if !self.intercept.is_finite()
            || !self.precision.is_finite()
            || self.precision <= 0.0
            || self.beta.iter().any(|b| !b.is_finite())
        {
            return Err(Error::Divergence(format!(
                "non-finite state at iteration {iter} (precision {}, intercept {})",
                self.precision, self.intercept
            )));
        }
        Ok(())
    }
}

/// Gamma draw parameterized by shape and rate. Invalid parameters (an
/// overflowed rate, say) give NaN, which the callers' finiteness checks
/// turn into a divergence error.
pub(crate) fn gamma_rate(rng: &mut SamplerRng, shape: f64, rate: f64) -> f64 {
    Gamma::new(shape, 1.0 / rate).map_or(f64::NAN, |g| g.sample(rng))
}

pub(crate) fn beta_draw(rng: &mut SamplerRng, a: f64, b: f64) -> f64 {
    Beta::new(a, b).map_or(f64::NAN, |d| d.sample(rng))
}

/// Log of a Gamma draw with shape `a` and unit rate, stable for tiny shapes.
pub(crate) fn log_gamma_draw(rng: &mut SamplerRng, shape: f64) -> f64 {
    if shape >= 1.0 {
        gamma_rate(rng, shape, 1.0).ln()
    } else {
        let g = gamma_rate(rng, shape + 1.0, 1.0);
        let u: f64 = rng.random::<f64>();
        g.ln() + u.max(f64::MIN_POSITIVE).ln() / shape
    }
}

pub(crate) fn log_normal_density(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * (2.0 * std::f64::consts::PI * var).ln() - 0.5 * (x - mean).powi(2) / var
}

/// Log density of Gamma(shape, rate) up to a constant in x.
pub(crate) fn log_gamma_kernel(x: f64, shape: f64, rate: f64) -> f64 {
    (shape - 1.0) * x.ln() - rate * x
}

/// Random-walk Metropolis step on log(x) for a positive scalar.
pub(crate) fn mh_log_scale(
    rng: &mut SamplerRng,
    current: f64,
    step: f64,
    log_target: impl Fn(f64) -> f64,
) -> (f64, bool) {
    let z: f64 = rng.sample(StandardNormal);
    let proposal = current * (step * z).exp();
    let u: f64 = rng.random::<f64>();
    if !(proposal > 0.0 && proposal.is_finite()) {
        return (current, false);
    }
    let log_ratio = log_target(proposal) - log_target(current) + proposal.ln() - current.ln();
    if u.ln() < log_ratio {
        (proposal, true)
    } else {
        (current, false)
    }
}

/// Hyperparameters of the two/three-component mixture prior shared by the
/// external spike-and-slab fit and the internal borrowing fit.
#[derive(Debug, Clone)]
pub(crate) struct MixturePrior {
    /// Per covariate (original column order): informative component
    /// (mean, base variance) replacing the slab when present.
    pub informative: Vec<Option<(f64, f64)>>,
    pub v_slab: f64,
    pub v_spike: f64,
    pub a_pi: f64,
    pub b_pi: f64,
    pub a_tau: f64,
    pub b_tau: f64,
    pub a_sigma: f64,
    pub b_sigma: f64,
}

/// Retained draws of the mixture sampler, per covariate in column order.
pub(crate) struct MixtureDraws {
    pub beta: Vec<Vec<f64>>,
    pub gamma: Vec<Vec<f64>>,
    pub tau: Vec<Vec<f64>>,
    pub intercept: Vec<f64>,
    pub precision: Vec<f64>,
    pub tau_acceptance: Vec<Acceptance>,
}

pub(crate) fn run_mixture(
    design: &Design,
    prior: &MixturePrior,
    chain: &ChainSpec,
) -> Result<MixtureDraws> {
    chain.validate()?;
    let k = design.k();
    let keep = chain.retained();
    let mut rng = chain.rng();
    let mut state = LinearState::new(design);
    let mut pi = vec![0.5f64; k];
    let mut gamma = vec![0.0; k];
    let mut tau = vec![1.0f64; k];
    let mut acc = vec![Acceptance::default(); k];

    let mut out = MixtureDraws {
        beta: vec![Vec::with_capacity(keep); k],
        gamma: vec![Vec::with_capacity(keep); k],
        tau: vec![Vec::with_capacity(keep); k],
        intercept: Vec::with_capacity(keep),
        precision: Vec::with_capacity(keep),
        tau_acceptance: Vec::new(),
    };

    for iter in 0..chain.n_iter {
        state.update_intercept(&mut rng);
        for &j in design.sweep() {
            let (lw_in, lw_out) = (pi[j].ln(), (1.0 - pi[j]).ln());
            let first = match prior.informative[j] {
                Some((m, v0)) => Component { log_weight: lw_in, mean: m, var: tau[j] * v0 },
                None => Component { log_weight: lw_in, mean: 0.0, var: prior.v_slab },
            };
            let spike = Component { log_weight: lw_out, mean: 0.0, var: prior.v_spike };
            let idx = state.update_coefficient(j, &[first, spike], &mut rng);
            gamma[j] = if idx == 0 { 1.0 } else { 0.0 };
        }
        for &j in design.sweep() {
            pi[j] = beta_draw(&mut rng, prior.a_pi + gamma[j], prior.b_pi + 1.0 - gamma[j]);
        }
        for &j in design.sweep() {
            let Some((m, v0)) = prior.informative[j] else { continue };
            let beta_j = state.beta[j];
            let active = gamma[j] == 1.0;
            let (next, ok) = mh_log_scale(&mut rng, tau[j], chain.mh_step, |t| {
                let mut lp = log_gamma_kernel(t, prior.a_tau, prior.b_tau);
                if active {
                    lp += log_normal_density(beta_j, m, t * v0);
                }
                lp
            });
            tau[j] = next;
            acc[j].record(ok);
        }
        state.update_precision(prior.a_sigma, prior.b_sigma, &mut rng);
        state.check_finite(iter)?;

        if chain.keeps(iter) {
            for j in 0..k {
                out.beta[j].push(state.beta[j]);
                out.gamma[j].push(gamma[j]);
                if prior.informative[j].is_some() {
                    out.tau[j].push(tau[j]);
                }
            }
            out.intercept.push(state.intercept);
            out.precision.push(state.precision);
        }
    }
    out.tau_acceptance = acc;
    Ok(out)
}
