//! L1-penalized least squares by cyclic coordinate descent with
//! cross-validated penalty.
//!
//! Objective: (1/2n)‖y − α − Xβ‖² + λ‖β‖₁, intercept unpenalized (handled by
//! centering on the training rows).

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::mcmc::{ChainDiagnostics, SamplerRng};
use crate::posterior::{CoefficientPosterior, FitResult, SelectionRule};
use rand::SeedableRng;

const TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CvRule {
    /// λ minimizing mean cross-validated error.
    Min,
    /// Largest λ whose error is within one standard error of the minimum.
    OneSe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LassoSettings {
    pub n_lambda: usize,
    /// λ_min / λ_max.
    pub lambda_ratio: f64,
    /// Fold count; `None` means leave-one-out for n ≤ 15, else 5.
    pub folds: Option<usize>,
    pub rule: CvRule,
}

impl Default for LassoSettings {
    fn default() -> Self {
        LassoSettings {
            n_lambda: 50,
            lambda_ratio: 1e-3,
            folds: None,
            rule: CvRule::OneSe,
        }
    }
}

impl LassoSettings {
    pub fn validate(&self) -> Result<()> {
        if self.n_lambda < 20 {
            return Err(Error::InvalidConfig("LASSO grid needs at least 20 values".into()));
        }
        if !(self.lambda_ratio > 0.0 && self.lambda_ratio < 1.0) {
            return Err(Error::InvalidConfig("lambda_ratio must lie in (0, 1)".into()));
        }
        if matches!(self.folds, Some(f) if f < 2) {
            return Err(Error::InvalidConfig("need at least 2 folds".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LassoFit {
    pub fit: FitResult,
    pub lambdas: Vec<f64>,
    pub cv_error: Vec<f64>,
    pub lambda_chosen: f64,
    /// True when a degenerate fold forced the empty model.
    pub fell_back: bool,
}

/// Column-major training block with centered columns.
struct Problem {
    x: Vec<Vec<f64>>,
    y: Vec<f64>,
    x_mean: Vec<f64>,
    y_mean: f64,
    col_sq: Vec<f64>,
    n: f64,
}

impl Problem {
    fn new(ds: &Dataset, rows: &[usize]) -> Self {
        let n = rows.len() as f64;
        let yr: Vec<f64> = rows.iter().map(|&i| ds.y()[i]).collect();
        let y_mean = yr.iter().sum::<f64>() / n;
        let mut x = Vec::with_capacity(ds.k());
        let mut x_mean = Vec::with_capacity(ds.k());
        let mut col_sq = Vec::with_capacity(ds.k());
        for j in 0..ds.k() {
            let col = ds.column(j);
            let m = rows.iter().map(|&i| col[i]).sum::<f64>() / n;
            let c: Vec<f64> = rows.iter().map(|&i| col[i] - m).collect();
            col_sq.push(c.iter().map(|v| v * v).sum::<f64>() / n);
            x.push(c);
            x_mean.push(m);
        }
        Problem {
            x,
            y: yr.iter().map(|v| v - y_mean).collect(),
            x_mean,
            y_mean,
            col_sq,
            n,
        }
    }

    fn lambda_max(&self) -> f64 {
        self.x
            .iter()
            .map(|c| (c.iter().zip(&self.y).map(|(a, b)| a * b).sum::<f64>() / self.n).abs())
            .fold(0.0, f64::max)
    }

    fn constant_y(&self) -> bool {
        self.y.iter().all(|v| v.abs() < 1e-12)
    }

    /// Coordinate descent at `lambda`, warm-started from `beta`.
    fn solve(&self, lambda: f64, beta: &mut [f64]) {
        let mut resid: Vec<f64> = self.y.clone();
        for (j, b) in beta.iter().enumerate() {
            if *b != 0.0 {
                for (r, x) in resid.iter_mut().zip(&self.x[j]) {
                    *r -= x * b;
                }
            }
        }
        for _ in 0..MAX_SWEEPS {
            let mut max_delta: f64 = 0.0;
            for j in 0..beta.len() {
                if self.col_sq[j] == 0.0 {
                    continue;
                }
                let xj = &self.x[j];
                let rho = xj.iter().zip(&resid).map(|(a, r)| a * r).sum::<f64>() / self.n + self.col_sq[j] * beta[j];
                let new = soft_threshold(rho, lambda) / self.col_sq[j];
                let delta = new - beta[j];
                if delta != 0.0 {
                    for (r, x) in resid.iter_mut().zip(xj) {
                        *r -= x * delta;
                    }
                    max_delta = max_delta.max(delta.abs() * self.col_sq[j].sqrt());
                    beta[j] = new;
                }
            }
            if max_delta < TOL {
                break;
            }
        }
    }

    fn intercept(&self, beta: &[f64]) -> f64 {
        self.y_mean - self.x_mean.iter().zip(beta).map(|(m, b)| m * b).sum::<f64>()
    }
}

fn soft_threshold(z: f64, g: f64) -> f64 {
    if z > g {
        z - g
    } else if z < -g {
        z + g
    } else {
        0.0
    }
}

/// Coefficients at a single penalty (λ = 0 is ordinary least squares).
pub fn lasso_at(ds: &Dataset, lambda: f64) -> (f64, Vec<f64>) {
    let rows: Vec<usize> = (0..ds.n()).collect();
    let p = Problem::new(ds, &rows);
    let mut beta = vec![0.0; ds.k()];
    p.solve(lambda, &mut beta);
    (p.intercept(&beta), beta)
}

/// λ_max = max_k |x_kᵀ(y − ȳ)| / n over centered columns.
pub fn lambda_max(ds: &Dataset) -> f64 {
    let rows: Vec<usize> = (0..ds.n()).collect();
    Problem::new(ds, &rows).lambda_max()
}

fn path(p: &Problem, lambdas: &[f64]) -> Vec<Vec<f64>> {
    let mut beta = vec![0.0; p.x.len()];
    lambdas
        .iter()
        .map(|&l| {
            p.solve(l, &mut beta);
            beta.clone()
        })
        .collect()
}

fn fold_assignment(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut SamplerRng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in idx.iter().enumerate() {
        fold[i] = pos % folds;
    }
    fold
}

/// Cross-validated LASSO; selection = nonzero coefficients at the chosen λ.
pub fn fit_lasso(ds: &Dataset, settings: &LassoSettings, seed: u64) -> Result<LassoFit> {
    settings.validate()?;
    let n = ds.n();
    let all: Vec<usize> = (0..n).collect();
    let full = Problem::new(ds, &all);
    let lmax = full.lambda_max();
    let m = settings.n_lambda;
    let lambdas: Vec<f64> = (0..m)
        .map(|i| lmax * settings.lambda_ratio.powf(i as f64 / (m - 1) as f64))
        .collect();

    let folds = settings.folds.unwrap_or(if n <= 15 { n } else { 5 }).min(n);
    let assign = if folds == n { all.clone() } else { fold_assignment(n, folds, seed) };
    let mut fold_err = vec![vec![0.0; m]; folds];
    let mut degenerate = full.constant_y() || lmax == 0.0;
    for f in 0..folds {
        if degenerate {
            break;
        }
        let train: Vec<usize> = all.iter().copied().filter(|&i| assign[i] != f).collect();
        let test: Vec<usize> = all.iter().copied().filter(|&i| assign[i] == f).collect();
        let p = Problem::new(ds, &train);
        if p.constant_y() {
            degenerate = true;
            break;
        }
        for (l, beta) in path(&p, &lambdas).iter().enumerate() {
            let a = p.intercept(beta);
            fold_err[f][l] = test
                .iter()
                .map(|&i| {
                    let pred = a + (0..ds.k()).map(|j| ds.value(i, j) * beta[j]).sum::<f64>();
                    (ds.y()[i] - pred).powi(2)
                })
                .sum::<f64>()
                / test.len() as f64;
        }
    }

    let cv_error: Vec<f64> = (0..m)
        .map(|l| fold_err.iter().map(|e| e[l]).sum::<f64>() / folds as f64)
        .collect();
    let (chosen, fell_back) = if degenerate {
        (0, true)
    } else {
        let best = (0..m)
            .min_by(|&a, &b| cv_error[a].total_cmp(&cv_error[b]))
            .expect("non-empty grid");
        let chosen = match settings.rule {
            CvRule::Min => best,
            CvRule::OneSe => {
                let errs: Vec<f64> = fold_err.iter().map(|e| e[best]).collect();
                let se = (crate::mcmc::variance(&errs) / folds as f64).sqrt();
                (0..=best).find(|&l| cv_error[l] <= cv_error[best] + se).unwrap_or(best)
            }
        };
        (chosen, false)
    };

    let lambda_chosen = lambdas[chosen];
    let mut beta = vec![0.0; ds.k()];
    if !fell_back {
        // recompute along the path for warm starts
        for &l in &lambdas[..=chosen] {
            full.solve(l, &mut beta);
        }
    }
    let intercept = full.intercept(&beta);
    let coefs = ds
        .column_names()
        .into_iter()
        .zip(&beta)
        .map(|(name, &b)| CoefficientPosterior {
            name,
            mean: b,
            variance: 0.0,
            ci95: (b, b),
            pip: None,
            draws: None,
        })
        .collect();
    Ok(LassoFit {
        fit: FitResult::new(
            "LASSO",
            coefs,
            Some(intercept),
            SelectionRule::NonZero,
            ChainDiagnostics::default(),
        ),
        lambdas,
        cv_error,
        lambda_chosen,
        fell_back,
    })
}
