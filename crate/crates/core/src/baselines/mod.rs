//! Comparison methods. Every method returns a [`FitResult`] whose selection
//! rule follows the method: nonzero coefficients for LASSO, 95% credible
//! intervals excluding zero for the Bayesian borrowing and shrinkage priors.

mod horseshoe;
mod joint;
mod lasso;
pub(crate) mod linalg;
mod power;

use serde::{Deserialize, Serialize};

pub use horseshoe::fit_horseshoe;
pub use joint::{
    fit_commensurate, fit_commensurate_draws, fit_map, fit_map_draws, Commensurability, CommensurateSettings,
    JointDraws, MapSettings,
};
pub use lasso::{fit_lasso, lambda_max, lasso_at, CvRule, LassoFit, LassoSettings};
pub use power::{
    fit_modified_power_prior, fit_power_prior, power_prior_posterior, A0Prior, MppFit, NigPosterior, NigPrior,
};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mcmc::{derive_seed, ChainSpec};
use crate::posterior::FitResult;
use crate::ssp::{fit_ssp, SspPriorSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "SSP")]
    Ssp,
    #[serde(rename = "LASSO")]
    Lasso,
    #[serde(rename = "HP")]
    Hp,
    #[serde(rename = "PP")]
    Pp,
    #[serde(rename = "MPP")]
    Mpp,
    #[serde(rename = "MAP")]
    Map,
    #[serde(rename = "CP")]
    Cp,
}

impl Method {
    pub const ALL: [Method; 7] = [
        Method::Ssp,
        Method::Lasso,
        Method::Hp,
        Method::Pp,
        Method::Mpp,
        Method::Map,
        Method::Cp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Ssp => "SSP",
            Method::Lasso => "LASSO",
            Method::Hp => "HP",
            Method::Pp => "PP",
            Method::Mpp => "MPP",
            Method::Map => "MAP",
            Method::Cp => "CP",
        }
    }

    /// Whether the method uses the external data.
    pub fn borrows(self) -> bool {
        matches!(self, Method::Pp | Method::Mpp | Method::Map | Method::Cp)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method `{s}`")))
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Tuning of every baseline; the method to run is chosen separately.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BaselineConfig {
    pub ssp: SspPriorSpec,
    pub lasso: LassoSettings,
    pub nig: NigPrior,
    /// Discount of the power prior.
    pub a0: f64,
    pub a0_prior: A0Prior,
    pub map: MapSettings,
    pub commensurate: CommensurateSettings,
    pub chain: ChainSpec,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            ssp: SspPriorSpec::default(),
            lasso: LassoSettings::default(),
            nig: NigPrior::default(),
            a0: 1.0,
            a0_prior: A0Prior::default(),
            map: MapSettings::default(),
            commensurate: CommensurateSettings::default(),
            chain: ChainSpec::default(),
        }
    }
}

impl BaselineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.a0) {
            return Err(Error::InvalidConfig(format!("a0 = {} outside [0, 1]", self.a0)));
        }
        self.ssp.validate()?;
        self.lasso.validate()?;
        self.chain.validate()
    }
}

/// Runs one baseline. Internal-only methods ignore `ext`. The chain seed is
/// derived from `seed` and the method name.
pub fn fit_baseline(method: Method, int: &Dataset, ext: &Dataset, cfg: &BaselineConfig, seed: u64) -> Result<FitResult> {
    cfg.validate()?;
    let chain = cfg.chain.with_seed(derive_seed(seed, method.name(), 0));
    match method {
        Method::Ssp => fit_ssp(int, &cfg.ssp, &chain),
        Method::Lasso => fit_lasso(int, &cfg.lasso, chain.seed).map(|f| f.fit),
        Method::Hp => fit_horseshoe(int, &chain),
        Method::Pp => fit_power_prior(int, ext, cfg.a0, &cfg.nig),
        Method::Mpp => fit_modified_power_prior(int, ext, cfg.a0_prior, &cfg.nig, &chain).map(|f| f.fit),
        Method::Map => fit_map(int, ext, &cfg.map, &chain),
        Method::Cp => fit_commensurate(int, ext, &cfg.commensurate, &chain),
    }
}
