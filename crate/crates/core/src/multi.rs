//! Borrowing from several external sources with Dirichlet-weighted source
//! selection.
//!
//! Each coefficient chooses one of M + 2 prior components through a
//! categorical indicator ν_k: slab N(0, v_slab), spike N(0, v_spike), or the
//! informative component N(β̂_{k,m}, τ²_{k,m} var̂_{k,m}) of source m. The
//! component probabilities are Dirichlet(α_k) with Gamma hyperpriors on α,
//! and τ²_{k,m} ~ Gamma(ζ_k, ξ_k) with ζ_k, ξ_k uniform.
//!
//! Sources are processed in lexicographic order of their ids and results are
//! reported in the caller's order, so permuting the source list permutes the
//! reported weights and nothing else.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::kernel::{gamma_rate, log_gamma_draw, log_normal_density, mh_log_scale, Component, Design, LinearState};
use crate::mcmc::{Acceptance, ChainDiagnostics, ChainSpec};
use crate::posterior::{CoefficientPosterior, FitResult, SelectionRule};
use crate::ssp::{ExternalSummary, SspPriorSpec, DEFAULT_BORROW_THRESHOLD};

pub const SLAB: usize = 0;
pub const SPIKE: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceCovariate {
    pub name: String,
    pub beta_hat: f64,
    pub var_hat: f64,
}

/// Posterior summary of one external source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourcePosterior {
    pub id: String,
    pub covariates: Vec<SourceCovariate>,
}

impl SourcePosterior {
    /// Offers every covariate of an external summary.
    pub fn from_summary(id: impl Into<String>, summary: &ExternalSummary) -> Self {
        SourcePosterior {
            id: id.into(),
            covariates: summary
                .covariates
                .iter()
                .map(|c| SourceCovariate {
                    name: c.name.clone(),
                    beta_hat: c.beta_hat,
                    var_hat: c.var_hat,
                })
                .collect(),
        }
    }

    pub fn get(&self, name: &str) -> Option<&SourceCovariate> {
        self.covariates.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaPrior {
    /// α_{k,j} ~ Gamma(shape, rate), updated by Metropolis on log α.
    Gamma { shape: f64, rate: f64 },
    /// Fixed concentrations per internal covariate (column order), each of
    /// length M + 2 ordered slab, spike, sources in caller order.
    Fixed(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiPriorSpec {
    pub base: SspPriorSpec,
    pub alpha: AlphaPrior,
    pub zeta_range: (f64, f64),
    pub xi_range: (f64, f64),
}

impl Default for MultiPriorSpec {
    fn default() -> Self {
        MultiPriorSpec {
            base: SspPriorSpec::default(),
            alpha: AlphaPrior::Gamma { shape: 1.0, rate: 1.0 },
            zeta_range: (0.5, 5.0),
            xi_range: (0.5, 5.0),
        }
    }
}

impl MultiPriorSpec {
    pub fn from_base(base: SspPriorSpec) -> Self {
        MultiPriorSpec { base, ..Default::default() }
    }
}

/// Concentrations that mimic the two-step borrow flags with one source:
/// flagged covariates choose between the source and the spike, the rest
/// between the slab and the spike.
pub fn flag_equivalent_alpha(deltas: &[u8], a_pi: f64, b_pi: f64) -> AlphaPrior {
    const OFF: f64 = 1e-8;
    AlphaPrior::Fixed(
        deltas
            .iter()
            .map(|&d| if d == 1 { vec![OFF, b_pi, a_pi] } else { vec![a_pi, b_pi, OFF] })
            .collect(),
    )
}

/// Dirichlet/categorical state of one covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureWeightState {
    /// Component probabilities, slab, spike, then sources (caller order).
    pub probabilities: Vec<f64>,
    pub concentration: Vec<f64>,
    pub indicator: Vec<u8>,
}

/// Posterior mean of the component indicator for one covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentWeights {
    pub covariate: String,
    pub slab: f64,
    pub spike: f64,
    pub sources: Vec<(String, f64)>,
}

impl ComponentWeights {
    pub fn source(&self, id: &str) -> Option<f64> {
        self.sources.iter().find(|(s, _)| s == id).map(|(_, w)| *w)
    }

    pub fn all(&self) -> Vec<f64> {
        let mut v = vec![self.slab, self.spike];
        v.extend(self.sources.iter().map(|(_, w)| *w));
        v
    }
}

#[derive(Debug, Clone)]
pub struct MultiFitResult {
    /// PIP here is E[1 − ν_spike].
    pub fit: FitResult,
    pub component_weights: Vec<ComponentWeights>,
    pub final_state: Vec<MixtureWeightState>,
}

impl MultiFitResult {
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Report<'a> {
            fit: &'a FitResult,
            component_weights: &'a [ComponentWeights],
        }
        Ok(serde_json::to_string_pretty(&Report {
            fit: &self.fit,
            component_weights: &self.component_weights,
        })?)
    }
}

struct CovariateState {
    /// Offered component indices (internal ordering: slab, spike, sorted sources).
    offered: Vec<usize>,
    ln_pi: Vec<f64>,
    alpha: Vec<f64>,
    nu: usize,
    tau: Vec<f64>,
    zeta: f64,
    xi: f64,
}

fn ln_gamma_density(x: f64, shape: f64, rate: f64) -> f64 {
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Gibbs sampler for the multi-source model on the internal data.
pub fn fit_apsp_multi(
    ds_internal: &Dataset,
    sources: &[SourcePosterior],
    prior: &MultiPriorSpec,
    chain: &ChainSpec,
) -> Result<MultiFitResult> {
    if sources.is_empty() {
        return Err(Error::InvalidInput("at least one external source is required".into()));
    }
    run_multi(ds_internal, sources, prior, chain)
}

pub(crate) fn run_multi(
    ds: &Dataset,
    sources: &[SourcePosterior],
    prior: &MultiPriorSpec,
    chain: &ChainSpec,
) -> Result<MultiFitResult> {
    prior.base.validate()?;
    chain.validate()?;
    let m = sources.len();
    let k = ds.k();
    let ncomp = m + 2;
    for (lo, hi) in [prior.zeta_range, prior.xi_range] {
        if !(lo > 0.0 && hi > lo) {
            return Err(Error::InvalidConfig("uniform hyperprior ranges must be 0 < a < b".into()));
        }
    }

    // canonical source order
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| sources[a].id.cmp(&sources[b].id));
    for w in order.windows(2) {
        if sources[w[0]].id == sources[w[1]].id {
            return Err(Error::InvalidInput(format!("duplicate source id `{}`", sources[w[0]].id)));
        }
    }
    // internal component c ↔ caller component
    let to_caller = |c: usize| if c < 2 { c } else { 2 + order[c - 2] };

    let fixed_alpha = match &prior.alpha {
        AlphaPrior::Fixed(a) => {
            if a.len() != k || a.iter().any(|v| v.len() != ncomp || v.iter().any(|x| !(*x > 0.0))) {
                return Err(Error::InvalidConfig(format!(
                    "fixed concentrations must be {k} positive vectors of length {ncomp}"
                )));
            }
            Some(a)
        }
        AlphaPrior::Gamma { shape, rate } => {
            if !(*shape > 0.0 && *rate > 0.0) {
                return Err(Error::InvalidConfig("alpha hyperprior must be positive".into()));
            }
            None
        }
    };

    let mut info: Vec<Vec<Option<(f64, f64)>>> = vec![vec![None; m]; k];
    for (j, col) in ds.columns().iter().enumerate() {
        for (slot, &s) in order.iter().enumerate() {
            if let Some(c) = sources[s].get(&col.name) {
                if !(c.var_hat > 0.0 && c.var_hat.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "source `{}` offers `{}` with variance {}",
                        sources[s].id, col.name, c.var_hat
                    )));
                }
                info[j][slot] = Some((c.beta_hat, c.var_hat));
            }
        }
    }

    let zeta0 = 0.5 * (prior.zeta_range.0 + prior.zeta_range.1);
    let xi0 = 0.5 * (prior.xi_range.0 + prior.xi_range.1);
    let mut states: Vec<CovariateState> = (0..k)
        .map(|j| {
            let mut offered = vec![SLAB, SPIKE];
            offered.extend((0..m).filter(|&s| info[j][s].is_some()).map(|s| s + 2));
            let alpha = match fixed_alpha {
                Some(a) => (0..ncomp).map(|c| a[j][to_caller(c)]).collect(),
                None => vec![1.0; ncomp],
            };
            let mut ln_pi = vec![f64::NEG_INFINITY; ncomp];
            let w = (offered.len() as f64).ln();
            for &c in &offered {
                ln_pi[c] = -w;
            }
            CovariateState {
                offered,
                ln_pi,
                alpha,
                nu: SPIKE,
                tau: vec![1.0; m],
                zeta: zeta0,
                xi: xi0,
            }
        })
        .collect();

    let design = Design::new(ds);
    let mut state = LinearState::new(&design);
    let mut rng = chain.rng();
    let keep = chain.retained();
    let mut beta_draws = vec![Vec::with_capacity(keep); k];
    let mut nu_counts = vec![vec![0usize; ncomp]; k];
    let mut intercept_draws = Vec::with_capacity(keep);
    let mut precision_draws = Vec::with_capacity(keep);
    let mut tau_acc = Acceptance::default();
    let mut alpha_acc = Acceptance::default();
    let mut comps: Vec<Component> = Vec::with_capacity(ncomp);

    for iter in 0..chain.n_iter {
        state.update_intercept(&mut rng);
        for &j in design.sweep() {
            let st = &states[j];
            comps.clear();
            for &c in &st.offered {
                let (mean, var) = match c {
                    SLAB => (0.0, prior.base.v_slab),
                    SPIKE => (0.0, prior.base.v_spike),
                    _ => {
                        let (b, v) = info[j][c - 2].expect("offered source");
                        (b, st.tau[c - 2] * v)
                    }
                };
                comps.push(Component { log_weight: st.ln_pi[c], mean, var });
            }
            let idx = state.update_coefficient(j, &comps, &mut rng);
            states[j].nu = states[j].offered[idx];
        }

        for &j in design.sweep() {
            let st = &mut states[j];
            // π_k | ν_k ~ Dirichlet(α_k + onehot(ν_k)) over offered components
            let logs: Vec<f64> = st
                .offered
                .iter()
                .map(|&c| log_gamma_draw(&mut rng, st.alpha[c] + f64::from(u8::from(c == st.nu))))
                .collect();
            let mx = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = mx + logs.iter().map(|l| (l - mx).exp()).sum::<f64>().ln();
            for (&c, l) in st.offered.iter().zip(&logs) {
                st.ln_pi[c] = l - lse;
            }

            if let AlphaPrior::Gamma { shape, rate } = prior.alpha {
                for oi in 0..st.offered.len() {
                    let c = st.offered[oi];
                    let rest: f64 = st.offered.iter().filter(|&&o| o != c).map(|&o| st.alpha[o]).sum();
                    let ln_pi_c = st.ln_pi[c];
                    let (next, ok) = mh_log_scale(&mut rng, st.alpha[c], chain.mh_step, |a| {
                        ln_gamma(a + rest) - ln_gamma(a) + (a - 1.0) * ln_pi_c + (shape - 1.0) * a.ln() - rate * a
                    });
                    st.alpha[c] = next;
                    alpha_acc.record(ok);
                }
            }

            let beta_j = state.beta[j];
            for s in 0..m {
                let Some((b, v)) = info[j][s] else { continue };
                if st.nu == s + 2 {
                    let (zeta, xi) = (st.zeta, st.xi);
                    let (next, ok) = mh_log_scale(&mut rng, st.tau[s], chain.mh_step, |t| {
                        ln_gamma_density(t, zeta, xi) + log_normal_density(beta_j, b, t * v)
                    });
                    st.tau[s] = next;
                    tau_acc.record(ok);
                } else {
                    st.tau[s] = gamma_rate(&mut rng, st.zeta, st.xi).max(1e-300);
                }
            }

            let taus: Vec<f64> = (0..m).filter(|&s| info[j][s].is_some()).map(|s| st.tau[s]).collect();
            if !taus.is_empty() {
                let xi = st.xi;
                let (lo, hi) = prior.zeta_range;
                st.zeta = mh_log_scale(&mut rng, st.zeta, chain.mh_step, |z| {
                    if z < lo || z > hi {
                        return f64::NEG_INFINITY;
                    }
                    taus.iter().map(|&t| ln_gamma_density(t, z, xi)).sum()
                })
                .0;
                let zeta = st.zeta;
                let (lo, hi) = prior.xi_range;
                st.xi = mh_log_scale(&mut rng, st.xi, chain.mh_step, |x| {
                    if x < lo || x > hi {
                        return f64::NEG_INFINITY;
                    }
                    taus.iter().map(|&t| ln_gamma_density(t, zeta, x)).sum()
                })
                .0;
            }
        }

        state.update_precision(prior.base.a_sigma, prior.base.b_sigma, &mut rng);
        state.check_finite(iter)?;

        if chain.keeps(iter) {
            for j in 0..k {
                beta_draws[j].push(state.beta[j]);
                nu_counts[j][states[j].nu] += 1;
            }
            intercept_draws.push(state.intercept);
            precision_draws.push(state.precision);
        }
    }

    let mut diag = ChainDiagnostics::default();
    let mut coefs = Vec::with_capacity(k);
    let mut weights = Vec::with_capacity(k);
    for (j, col) in ds.columns().iter().enumerate() {
        let w: Vec<f64> = nu_counts[j].iter().map(|&c| c as f64 / keep as f64).collect();
        let pip = 1.0 - w[SPIKE];
        diag.push(format!("beta[{}]", col.name), &beta_draws[j], None);
        coefs.push(CoefficientPosterior::from_draws(&col.name, std::mem::take(&mut beta_draws[j]), Some(pip))?);
        let mut by_caller = vec![0.0; m];
        for (slot, &s) in order.iter().enumerate() {
            by_caller[s] = w[slot + 2];
        }
        weights.push(ComponentWeights {
            covariate: col.name.clone(),
            slab: w[SLAB],
            spike: w[SPIKE],
            sources: sources.iter().map(|s| s.id.clone()).zip(by_caller).collect(),
        });
    }
    diag.push("precision", &precision_draws, None);
    if let Some(rate) = tau_acc.rate() {
        diag.scalars.push(crate::mcmc::ScalarDiagnostic {
            name: "tau2 (pooled)".into(),
            ess: f64::NAN,
            rhat: f64::NAN,
            acceptance: Some(rate),
        });
    }
    if let Some(rate) = alpha_acc.rate() {
        diag.scalars.push(crate::mcmc::ScalarDiagnostic {
            name: "alpha (pooled)".into(),
            ess: f64::NAN,
            rhat: f64::NAN,
            acceptance: Some(rate),
        });
    }

    let final_state = states
        .iter()
        .map(|st| {
            let mut probabilities = vec![0.0; ncomp];
            let mut concentration = vec![0.0; ncomp];
            let mut indicator = vec![0u8; ncomp];
            for c in 0..ncomp {
                let cc = to_caller(c);
                probabilities[cc] = st.ln_pi[c].exp();
                concentration[cc] = st.alpha[c];
            }
            indicator[to_caller(st.nu)] = 1;
            MixtureWeightState { probabilities, concentration, indicator }
        })
        .collect();

    let intercept = crate::mcmc::mean(&intercept_draws);
    let fit = FitResult::new(
        "APSP-Dir",
        coefs,
        Some(intercept),
        SelectionRule::Pip { threshold: DEFAULT_BORROW_THRESHOLD },
        diag,
    );
    Ok(MultiFitResult {
        fit,
        component_weights: weights,
        final_state,
    })
}
