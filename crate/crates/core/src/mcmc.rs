//! Chain configuration, seeded generators, posterior summaries and
//! convergence diagnostics shared by every sampler.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub type SamplerRng = ChaCha8Rng;

/// Minimum number of retained draws a chain must produce.
pub const MIN_RETAINED: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainSpec {
    pub n_iter: usize,
    pub n_burn: usize,
    pub thin: usize,
    pub seed: u64,
    /// Random-walk step on the log scale for non-conjugate scalars.
    pub mh_step: f64,
}

impl Default for ChainSpec {
    fn default() -> Self {
        ChainSpec {
            n_iter: 6000,
            n_burn: 2000,
            thin: 2,
            seed: 2023,
            mh_step: 1.0,
        }
    }
}

impl ChainSpec {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn retained(&self) -> usize {
        if self.thin == 0 || self.n_burn >= self.n_iter {
            return 0;
        }
        (self.n_iter - self.n_burn) / self.thin
    }

    pub fn validate(&self) -> Result<()> {
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thin must be at least 1".into()));
        }
        if self.n_burn >= self.n_iter {
            return Err(Error::InvalidConfig(format!(
                "n_burn ({}) must be below n_iter ({})",
                self.n_burn, self.n_iter
            )));
        }
        if self.retained() < MIN_RETAINED {
            return Err(Error::InvalidConfig(format!(
                "chain retains {} draws; at least {MIN_RETAINED} required",
                self.retained()
            )));
        }
        if !(self.mh_step > 0.0 && self.mh_step.is_finite()) {
            return Err(Error::InvalidConfig("mh_step must be positive".into()));
        }
        Ok(())
    }

    /// Whether iteration `iter` (0-based) is kept.
    pub fn keeps(&self, iter: usize) -> bool {
        iter >= self.n_burn && (iter - self.n_burn).is_multiple_of(self.thin) && self.retained_index(iter) < self.retained()
    }

    fn retained_index(&self, iter: usize) -> usize {
        (iter - self.n_burn) / self.thin
    }

    pub fn rng(&self) -> SamplerRng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// Derives an independent sub-seed from a parent seed and a label.
///
/// Distinct labels give unrelated ChaCha keys, so adding a component never
/// perturbs the streams of others.
pub fn derive_seed(parent: u64, label: &str, index: u64) -> u64 {
    let digest = Sha256::new()
        .chain_update(parent.to_le_bytes())
        .chain_update((label.len() as u64).to_le_bytes())
        .chain_update(label.as_bytes())
        .chain_update(index.to_le_bytes())
        .finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b)
}

/// Moments and interval of a vector of draws.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawSummary {
    pub mean: f64,
    pub variance: f64,
    pub ci95: (f64, f64),
    sorted: Vec<f64>,
}

impl DrawSummary {
    /// Empirical quantile with linear interpolation between order statistics.
    pub fn quantile(&self, p: f64) -> f64 {
        quantile_sorted(&self.sorted, p)
    }
}

pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let p = p.clamp(0.0, 1.0);
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance with the n − 1 denominator (0 for a single value).
pub fn variance(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64
}

pub fn summarize(draws: &[f64]) -> Result<DrawSummary> {
    if draws.is_empty() {
        return Err(Error::InvalidInput("cannot summarize zero draws".into()));
    }
    if draws.iter().any(|d| !d.is_finite()) {
        return Err(Error::InvalidInput("draws contain non-finite values".into()));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(DrawSummary {
        mean: mean(draws),
        variance: variance(draws),
        ci95: (quantile_sorted(&sorted, 0.025), quantile_sorted(&sorted, 0.975)),
        sorted,
    })
}

/// Split-chain potential scale reduction of a single chain.
///
/// The chain is cut into two halves treated as separate chains. Constant
/// draws give 1; zero within-half variance with distinct halves gives +∞.
pub fn split_rhat(draws: &[f64]) -> Result<f64> {
    if draws.len() < 4 {
        return Err(Error::InvalidInput("split R-hat needs at least 4 draws".into()));
    }
    let half = draws.len() / 2;
    let (a, b) = (&draws[..half], &draws[draws.len() - half..]);
    let n = half as f64;
    let (ma, mb) = (mean(a), mean(b));
    let w = 0.5 * (variance(a) + variance(b));
    let grand = 0.5 * (ma + mb);
    let between = n * ((ma - grand).powi(2) + (mb - grand).powi(2));
    if w <= 0.0 {
        return Ok(if between <= 0.0 { 1.0 } else { f64::INFINITY });
    }
    let var_plus = (n - 1.0) / n * w + between / n;
    Ok((var_plus / w).sqrt().max(1.0))
}

/// Effective sample size from the initial-positive-sequence estimator.
pub fn effective_sample_size(draws: &[f64]) -> f64 {
    let n = draws.len();
    if n < 4 {
        return n as f64;
    }
    let m = mean(draws);
    let c0 = draws.iter().map(|d| (d - m).powi(2)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return n as f64;
    }
    let autocov = |lag: usize| -> f64 {
        draws[..n - lag]
            .iter()
            .zip(&draws[lag..])
            .map(|(a, b)| (a - m) * (b - m))
            .sum::<f64>()
            / n as f64
    };
    let mut tau = -1.0;
    let mut lag = 0;
    while lag + 1 < n {
        let pair = (autocov(lag) + autocov(lag + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        lag += 2;
    }
    let tau = tau.max(1.0 / n as f64);
    (n as f64 / tau).min(n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalarDiagnostic {
    pub name: String,
    pub ess: f64,
    pub rhat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceptance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    pub scalars: Vec<ScalarDiagnostic>,
}

impl ChainDiagnostics {
    pub fn push(&mut self, name: impl Into<String>, draws: &[f64], acceptance: Option<f64>) {
        let rhat = split_rhat(draws).unwrap_or(1.0);
        self.scalars.push(ScalarDiagnostic {
            name: name.into(),
            ess: effective_sample_size(draws),
            rhat,
            acceptance,
        });
    }

    pub fn get(&self, name: &str) -> Option<&ScalarDiagnostic> {
        self.scalars.iter().find(|s| s.name == name)
    }
}

/// Counts accepted proposals of one Metropolis-updated scalar.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Acceptance {
    pub accepted: u64,
    pub proposed: u64,
}

impl Acceptance {
    pub fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    pub fn rate(&self) -> Option<f64> {
        (self.proposed > 0).then(|| self.accepted as f64 / self.proposed as f64)
    }
}
