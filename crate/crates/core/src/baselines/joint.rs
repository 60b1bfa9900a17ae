//! Two-study hierarchical samplers: the meta-analytic-combined form of the
//! MAP prior and the commensurate prior.
//!
//! Both share one Gibbs scan. The coefficient vector
//! θ = (αᴱ, βᴱ_1..βᴱ_K, αᴵ, βᴵ_1..βᴵ_K) is drawn as a Gaussian block; the two
//! studies keep separate intercepts and noise precisions. The priors differ
//! only in the 2 × 2 precision coupling (βᴱ_k, βᴵ_k) and in how its
//! hyperparameter is updated.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::linalg::{cholesky, gaussian_from_precision, SuffStats};
use crate::data::{check_same_schema, Dataset};
use crate::error::{Error, Result};
use crate::kernel::{gamma_rate, mh_log_scale};
use crate::mcmc::{Acceptance, ChainDiagnostics, ChainSpec};
use crate::posterior::{CoefficientPosterior, FitResult, SelectionRule};

/// Noise-precision Gamma(shape, rate) prior shared by both studies.
const NOISE_PRIOR: (f64, f64) = (0.01, 0.01);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MapSettings {
    /// Scale of the half-normal prior on the heterogeneity ψ_k.
    pub sigma_psi: f64,
    /// Variance of the normal prior on the shared mean μ_k.
    pub v_mu: f64,
}

impl Default for MapSettings {
    fn default() -> Self {
        MapSettings { sigma_psi: 1.0, v_mu: 100.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Commensurability {
    /// ν_k ~ Gamma(shape, rate).
    Gamma { shape: f64, rate: f64 },
    /// ν_k held fixed.
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommensurateSettings {
    pub nu: Commensurability,
    /// Variance of the normal prior on βᴱ_k.
    pub v_external: f64,
}

impl Default for CommensurateSettings {
    fn default() -> Self {
        CommensurateSettings {
            nu: Commensurability::Gamma { shape: 1.0, rate: 1.0 },
            v_external: 100.0,
        }
    }
}

enum Coupling {
    Map(MapSettings),
    Cp(CommensurateSettings),
}

impl Coupling {
    fn initial(&self) -> f64 {
        match self {
            Coupling::Map(s) => s.sigma_psi,
            Coupling::Cp(s) => match s.nu {
                Commensurability::Gamma { shape, rate } => shape / rate,
                Commensurability::Fixed(nu) => nu,
            },
        }
    }

    /// (diagonal E, diagonal I, off-diagonal) of the 2 × 2 prior precision.
    fn block(&self, h: f64) -> (f64, f64, f64) {
        match self {
            Coupling::Map(s) => {
                let a = 1.0 / (h * h);
                let w = 1.0 / s.v_mu;
                let d = (a * a + a * w) / (2.0 * a + w);
                (d, d, -a * a / (2.0 * a + w))
            }
            Coupling::Cp(s) => (1.0 / s.v_external + h, h, -h),
        }
    }

    fn update(&self, h: f64, be: f64, bi: f64, step: f64, rng: &mut crate::mcmc::SamplerRng) -> (f64, Option<bool>) {
        match self {
            Coupling::Map(s) => {
                let d = be - bi;
                let m = 0.5 * (be + bi);
                let (v_mu, sp) = (s.v_mu, s.sigma_psi);
                let target = |psi: f64| {
                    let p2 = psi * psi;
                    let vm = v_mu + 0.5 * p2;
                    -0.5 * (2.0 * p2).ln() - d * d / (4.0 * p2) - 0.5 * vm.ln() - m * m / (2.0 * vm)
                        - p2 / (2.0 * sp * sp)
                };
                let (v, acc) = mh_log_scale(rng, h, step, target);
                (v, Some(acc))
            }
            Coupling::Cp(s) => match s.nu {
                Commensurability::Fixed(nu) => (nu, None),
                Commensurability::Gamma { shape, rate } => {
                    let d = bi - be;
                    (gamma_rate(rng, shape + 0.5, rate + 0.5 * d * d), None)
                }
            },
        }
    }

    fn name(&self) -> &'static str {
        match self {
            Coupling::Map(_) => "psi",
            Coupling::Cp(_) => "nu",
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            Coupling::Map(s) => s.sigma_psi > 0.0 && s.v_mu > 0.0,
            Coupling::Cp(s) => {
                s.v_external > 0.0
                    && match s.nu {
                        Commensurability::Gamma { shape, rate } => shape > 0.0 && rate > 0.0,
                        Commensurability::Fixed(nu) => nu > 0.0 && nu.is_finite(),
                    }
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig("hierarchical prior settings must be positive".into()))
        }
    }
}

/// Posterior draws of the two-study sampler.
#[derive(Debug, Clone)]
pub struct JointDraws {
    pub beta_internal: Vec<Vec<f64>>,
    pub beta_external: Vec<Vec<f64>>,
    pub intercept_internal: Vec<f64>,
    /// ψ_k (MAP) or ν_k (CP) per covariate.
    pub hyper: Vec<Vec<f64>>,
}

fn run_joint(
    method: &str,
    int: &Dataset,
    ext: &Dataset,
    coupling: Coupling,
    chain: &ChainSpec,
) -> Result<(FitResult, JointDraws)> {
    check_same_schema(&[int, ext])?;
    chain.validate()?;
    coupling.validate()?;
    let k = int.k();
    let dim = k + 1;
    let s_e = SuffStats::new(ext);
    let s_i = SuffStats::new(int);
    let mut rng = chain.rng();
    let mut phi_e = 1.0;
    let mut phi_i = 1.0;
    let mut hyper = vec![coupling.initial(); k];
    let mut acc = vec![Acceptance::default(); k];
    let cap = chain.retained();
    let mut draws = JointDraws {
        beta_internal: vec![Vec::with_capacity(cap); k],
        beta_external: vec![Vec::with_capacity(cap); k],
        intercept_internal: Vec::with_capacity(cap),
        hyper: vec![Vec::with_capacity(cap); k],
    };

    for iter in 0..chain.n_iter {
        let mut p = DMatrix::zeros(2 * dim, 2 * dim);
        p.view_mut((0, 0), (dim, dim)).copy_from(&(&s_e.xtx * phi_e));
        p.view_mut((dim, dim), (dim, dim)).copy_from(&(&s_i.xtx * phi_i));
        for j in 0..k {
            let (de, di, off) = coupling.block(hyper[j]);
            let (e, i) = (1 + j, dim + 1 + j);
            p[(e, e)] += de;
            p[(i, i)] += di;
            p[(e, i)] += off;
            p[(i, e)] += off;
        }
        let mut h = DVector::zeros(2 * dim);
        h.rows_mut(0, dim).copy_from(&(&s_e.xty * phi_e));
        h.rows_mut(dim, dim).copy_from(&(&s_i.xty * phi_i));
        let chol = cholesky(p, "joint precision")?;
        let theta = gaussian_from_precision(&chol, &h, 1.0, &mut rng);

        let th_e = theta.rows(0, dim).into_owned();
        let th_i = theta.rows(dim, dim).into_owned();
        phi_e = gamma_rate(&mut rng, NOISE_PRIOR.0 + 0.5 * s_e.n, NOISE_PRIOR.1 + 0.5 * s_e.rss(&th_e));
        phi_i = gamma_rate(&mut rng, NOISE_PRIOR.0 + 0.5 * s_i.n, NOISE_PRIOR.1 + 0.5 * s_i.rss(&th_i));

        for j in 0..k {
            let (v, a) = coupling.update(hyper[j], th_e[1 + j], th_i[1 + j], chain.mh_step, &mut rng);
            hyper[j] = v;
            if let Some(a) = a {
                acc[j].record(a);
            }
        }

        if theta.iter().any(|v| !v.is_finite()) || !(phi_e.is_finite() && phi_i.is_finite()) {
            return Err(Error::Divergence(format!("{method}: non-finite state at iteration {iter}")));
        }
        if chain.keeps(iter) {
            draws.intercept_internal.push(th_i[0]);
            for j in 0..k {
                draws.beta_internal[j].push(th_i[1 + j]);
                draws.beta_external[j].push(th_e[1 + j]);
                draws.hyper[j].push(hyper[j]);
            }
        }
    }

    let mut diag = ChainDiagnostics::default();
    let names = int.column_names();
    for (j, name) in names.iter().enumerate() {
        diag.push(format!("{}[{name}]", coupling.name()), &draws.hyper[j], acc[j].rate());
    }
    let coefs = names
        .iter()
        .zip(&draws.beta_internal)
        .map(|(name, d)| CoefficientPosterior::from_draws(name.clone(), d.clone(), None))
        .collect::<Result<Vec<_>>>()?;
    let fit = FitResult::new(
        method,
        coefs,
        Some(crate::mcmc::mean(&draws.intercept_internal)),
        SelectionRule::CredibleInterval,
        diag,
    );
    Ok((fit, draws))
}

/// MAP prior in its joint (meta-analytic-combined) form:
/// βᴱ_k, βᴵ_k ~ N(μ_k, ψ_k²), μ_k ~ N(0, v_μ), ψ_k ~ half-N(σ_ψ).
/// μ_k is integrated out; ψ_k moves by log-scale Metropolis.
pub fn fit_map(int: &Dataset, ext: &Dataset, settings: &MapSettings, chain: &ChainSpec) -> Result<FitResult> {
    run_joint("MAP", int, ext, Coupling::Map(*settings), chain).map(|(f, _)| f)
}

/// MAP fit returning the raw draws as well.
pub fn fit_map_draws(
    int: &Dataset,
    ext: &Dataset,
    settings: &MapSettings,
    chain: &ChainSpec,
) -> Result<(FitResult, JointDraws)> {
    run_joint("MAP", int, ext, Coupling::Map(*settings), chain)
}

/// Commensurate prior: βᴱ_k ~ N(0, v), βᴵ_k | βᴱ_k ~ N(βᴱ_k, 1/ν_k).
/// With a Gamma prior, ν_k is drawn from its conjugate conditional.
pub fn fit_commensurate(
    int: &Dataset,
    ext: &Dataset,
    settings: &CommensurateSettings,
    chain: &ChainSpec,
) -> Result<FitResult> {
    run_joint("CP", int, ext, Coupling::Cp(*settings), chain).map(|(f, _)| f)
}

pub fn fit_commensurate_draws(
    int: &Dataset,
    ext: &Dataset,
    settings: &CommensurateSettings,
    chain: &ChainSpec,
) -> Result<(FitResult, JointDraws)> {
    run_joint("CP", int, ext, Coupling::Cp(*settings), chain)
}
