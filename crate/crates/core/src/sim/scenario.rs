use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{apply_standardization, fit_standardization, Column, ColumnKind, Dataset, Role, StandardizationMap, StandardizationPolicy};
use crate::error::{Error, Result};
use crate::mcmc::{derive_seed, SamplerRng};
use rand::SeedableRng;

/// Number of covariates in every scenario.
pub const K: usize = 15;

/// Relationship between the internal and external signal sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// Internal coefficients equal the external ones.
    IdenticalSignals,
    /// Same signal set, different effect sizes.
    SamePattern,
    /// Signal sets overlap partially.
    PartialOverlap,
    /// Disjoint signal sets.
    NoOverlap,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::IdenticalSignals,
        Scenario::SamePattern,
        Scenario::PartialOverlap,
        Scenario::NoOverlap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::IdenticalSignals => "identical-signals",
            Scenario::SamePattern => "same-pattern",
            Scenario::PartialOverlap => "partial-overlap",
            Scenario::NoOverlap => "no-overlap",
        }
    }

    /// 1-based scenario number.
    pub fn number(self) -> usize {
        Scenario::ALL.iter().position(|&s| s == self).unwrap() + 1
    }

    /// True internal coefficients, X1..X15.
    pub fn internal_beta(self) -> [f64; K] {
        let mut b = [0.0; K];
        let terms: &[(usize, f64)] = match self {
            Scenario::IdenticalSignals => EXTERNAL_TERMS,
            Scenario::SamePattern => &[(1, 0.8), (2, 1.8), (6, -1.0), (7, -1.7), (11, 0.3), (12, 1.4)],
            Scenario::PartialOverlap => &[(2, 1.0), (3, 1.6), (7, -0.8), (8, -1.2), (12, 0.8), (13, 1.5)],
            Scenario::NoOverlap => &[(3, 1.0), (4, 1.6), (8, -0.8), (9, -1.2), (13, 0.8), (14, 1.5)],
        };
        for &(j, v) in terms {
            b[j - 1] = v;
        }
        b
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s || sc.number().to_string() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scenario `{s}`")))
    }
}

const EXTERNAL_TERMS: &[(usize, f64)] = &[(1, 0.5), (2, 1.5), (6, -0.6), (7, -1.5), (11, 0.4), (12, 1.2)];

/// True external coefficients, X1..X15.
pub fn external_beta() -> [f64; K] {
    let mut b = [0.0; K];
    for &(j, v) in EXTERNAL_TERMS {
        b[j - 1] = v;
    }
    b
}

pub fn covariate_names() -> Vec<String> {
    (1..=K).map(|j| format!("X{j}")).collect()
}

fn columns() -> Vec<Column> {
    (1..=K)
        .map(|j| {
            let kind = if j > 10 { ColumnKind::Binary } else { ColumnKind::Continuous };
            Column::new(format!("X{j}"), kind)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub scenario: Scenario,
    pub n_internal: usize,
    pub n_external: usize,
    pub noise_sd: f64,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn new(scenario: Scenario, n_internal: usize, seed: u64) -> Self {
        ScenarioSpec {
            scenario,
            n_internal,
            n_external: 50,
            noise_sd: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_internal < 2 || self.n_external < 2 {
            return Err(Error::InvalidConfig("scenario sample sizes must be at least 2".into()));
        }
        if !(self.noise_sd > 0.0 && self.noise_sd.is_finite()) {
            return Err(Error::InvalidConfig("noise_sd must be positive".into()));
        }
        Ok(())
    }
}

/// Generated pair, standardized with a pooled map, plus the raw data and truth.
#[derive(Debug, Clone)]
pub struct ScenarioData {
    pub external: Dataset,
    pub internal: Dataset,
    pub raw_external: Dataset,
    pub raw_internal: Dataset,
    pub beta_internal: Vec<f64>,
    pub beta_external: Vec<f64>,
    pub map: StandardizationMap,
}

impl ScenarioData {
    /// Signal indicator per covariate in the internal truth.
    pub fn truth(&self) -> Vec<bool> {
        self.beta_internal.iter().map(|b| *b != 0.0).collect()
    }

    /// Converts standardized-scale internal coefficients to the original scale.
    pub fn to_original(&self, beta_std: &[f64]) -> Vec<f64> {
        self.map.coefficient_to_original(&self.internal, beta_std)
    }
}

fn draw_dataset(name: &str, role: Role, n: usize, beta: &[f64], noise_sd: f64, rng: &mut SamplerRng) -> Result<Dataset> {
    let mut x = vec![0.0; n * K];
    for j in 0..K {
        for i in 0..n {
            x[j * n + i] = match j {
                0..=4 => rng.sample(StandardNormal),
                5..=9 => rng.random_range(-1.0..1.0),
                _ => f64::from(u8::from(rng.random_bool(0.5))),
            };
        }
    }
    let y = (0..n)
        .map(|i| {
            let mean: f64 = (0..K).map(|j| x[j * n + i] * beta[j]).sum();
            mean + noise_sd * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Dataset::new(name, role, "y", columns(), x, y)
}

/// Draws the external and internal datasets independently with seeds
/// derived from `spec.seed` and standardizes both with a pooled map.
pub fn generate_scenario(spec: &ScenarioSpec) -> Result<ScenarioData> {
    generate_with_betas(spec, &external_beta(), &spec.scenario.internal_beta())
}

/// Like [`generate_scenario`] with explicit coefficient vectors.
pub fn generate_with_betas(spec: &ScenarioSpec, beta_ext: &[f64; K], beta_int: &[f64; K]) -> Result<ScenarioData> {
    spec.validate()?;
    let mut rng_e = SamplerRng::seed_from_u64(derive_seed(spec.seed, "external", 0));
    let mut rng_i = SamplerRng::seed_from_u64(derive_seed(spec.seed, "internal", 0));
    let raw_external = draw_dataset("external", Role::External, spec.n_external, beta_ext, spec.noise_sd, &mut rng_e)?;
    let raw_internal = draw_dataset("internal", Role::Internal, spec.n_internal, beta_int, spec.noise_sd, &mut rng_i)?;
    let map = fit_standardization(&[&raw_external, &raw_internal], StandardizationPolicy::Pooled)?;
    Ok(ScenarioData {
        external: apply_standardization(&raw_external, &map)?,
        internal: apply_standardization(&raw_internal, &map)?,
        raw_external,
        raw_internal,
        beta_internal: beta_int.to_vec(),
        beta_external: beta_ext.to_vec(),
        map,
    })
}
