//! Every comparison method on one simulated replicate.
//!
//! cargo run --release --example baselines -- [scenario 1-4]

use apsp::baselines::{fit_baseline, BaselineConfig, Method};
use apsp::sim::{generate_scenario, score_rmse, score_selection, Scenario, ScenarioSpec};

fn main() -> apsp::Result<()> {
    let scenario: Scenario = std::env::args().nth(1).as_deref().unwrap_or("4").parse()?;
    let sim = generate_scenario(&ScenarioSpec::new(scenario, 20, 3))?;
    let truth = sim.truth();
    let cfg = BaselineConfig::default();
    println!("scenario {scenario}, n = 20");
    println!("{:<6} {:>12} {:>6} {:>6} {:>6}  selected", "method", "correctness", "FDR", "TDR", "RMSE");
    for m in Method::ALL {
        let fit = fit_baseline(m, &sim.internal, &sim.external, &cfg, 3)?;
        let s = score_selection(&fit.selected, &truth)?;
        let rmse = score_rmse(&sim.to_original(&fit.means()), &sim.beta_internal)?;
        let chosen: Vec<String> = fit.names().into_iter().zip(&fit.selected).filter(|(_, s)| **s).map(|(n, _)| n).collect();
        println!(
            "{:<6} {:>11.1}% {:>6.2} {:>6.2} {:>6.3}  {}",
            m,
            s.correctness_pct,
            s.fdr,
            s.tdr,
            rmse,
            chosen.join(" ")
        );
    }
    Ok(())
}
