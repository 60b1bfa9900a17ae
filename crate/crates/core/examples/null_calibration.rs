//! Permutation-null thresholds for the internal inclusion probabilities and
//! the resulting selection, next to the fixed 0.5 cut.
//!
//! cargo run --release --example null_calibration -- [replicates]

use apsp::apsp::{run_two_step, ApspConfig};
use apsp::null::{calibrate_null, select, TwoStepPipeline};
use apsp::sim::{generate_scenario, score_selection, Scenario, ScenarioSpec};

fn main() -> apsp::Result<()> {
    let n_null: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(50);
    let sim = generate_scenario(&ScenarioSpec::new(Scenario::NoOverlap, 20, 5))?;
    let cfg = ApspConfig::default();
    let two = run_two_step(&sim.external, &sim.internal, &cfg, 5)?;
    let thresholds = calibrate_null(&sim.external, &sim.internal, &TwoStepPipeline(cfg), n_null, 5)?;
    let pips = two.internal.pips();
    let by_null = select(&pips, &thresholds)?;
    let by_half: Vec<bool> = pips.iter().map(|p| *p > 0.5).collect();
    let se = thresholds.standard_errors();
    println!("{:<5} {:>6} {:>6} {:>13} {:>5} {:>5}", "", "truth", "pip", "C_hat (se)", "null", "0.5");
    for k in 0..pips.len() {
        println!(
            "{:<5} {:>6.2} {:>6.3} {:>6.3} ({:.3}) {:>5} {:>5}",
            thresholds.covariates[k], sim.beta_internal[k], pips[k], thresholds.c_hat[k], se[k], by_null[k], by_half[k]
        );
    }
    let truth = sim.truth();
    for (label, sel) in [("permutation null", &by_null), ("PIP > 0.5", &by_half)] {
        let s = score_selection(sel, &truth)?;
        println!("{label:<17} correctness {:.1}%, FDR {:.2}, TDR {:.2}", s.correctness_pct, s.fdr, s.tdr);
    }
    Ok(())
}
