//! Simulation scenarios, selection and estimation metrics, and the
//! replicate-level benchmark runner.

mod bench;
mod scenario;

pub use bench::{
    read_metrics_csv, run_benchmark, summarize_rows, BenchMethod, BenchNull, BenchmarkConfig, BenchmarkResult, MetricsRow, SummaryCell,
};
pub use scenario::{
    covariate_names, external_beta, generate_scenario, generate_with_betas, Scenario, ScenarioData, ScenarioSpec, K,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionScore {
    pub correctness_pct: f64,
    pub fdr: f64,
    pub tdr: f64,
}

/// Correctness, false discovery rate and true discovery rate of a selection.
/// Ratios with an empty denominator are 0.
pub fn score_selection(selected: &[bool], truth: &[bool]) -> Result<SelectionScore> {
    if selected.len() != truth.len() || truth.is_empty() {
        return Err(Error::InvalidInput(format!(
            "selection of length {} against truth of length {}",
            selected.len(),
            truth.len()
        )));
    }
    let (mut tp, mut fp, mut tn, mut fneg) = (0usize, 0usize, 0usize, 0usize);
    for (&s, &t) in selected.iter().zip(truth) {
        match (s, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fneg += 1,
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    Ok(SelectionScore {
        correctness_pct: 100.0 * (tp + tn) as f64 / truth.len() as f64,
        fdr: ratio(fp, tp + fp),
        tdr: ratio(tp, tp + fneg),
    })
}

/// √(mean squared componentwise error).
pub fn score_rmse(beta_hat: &[f64], beta_true: &[f64]) -> Result<f64> {
    if beta_hat.len() != beta_true.len() || beta_true.is_empty() {
        return Err(Error::InvalidInput("coefficient vectors differ in length".into()));
    }
    let ss: f64 = beta_hat.iter().zip(beta_true).map(|(a, b)| (a - b).powi(2)).sum();
    Ok((ss / beta_true.len() as f64).sqrt())
}
