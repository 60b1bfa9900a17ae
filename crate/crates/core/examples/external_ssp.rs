//! Spike-and-slab fit of an external dataset and its borrow summary.
//!
//! cargo run --release --example external_ssp

use apsp::mcmc::ChainSpec;
use apsp::sim::{generate_scenario, Scenario, ScenarioSpec};
use apsp::ssp::{fit_ssp, summarize_external, SspPriorSpec};

fn main() -> apsp::Result<()> {
    let sim = generate_scenario(&ScenarioSpec::new(Scenario::IdenticalSignals, 20, 7))?;
    let fit = fit_ssp(&sim.external, &SspPriorSpec::default(), &ChainSpec::default())?;
    let summary = summarize_external(&fit, 0.5)?;
    println!("{:<5} {:>7} {:>8} {:>8} {:>6} {:>6}", "", "true", "beta", "var", "pip", "delta");
    for (c, truth) in summary.covariates.iter().zip(&sim.beta_external) {
        println!(
            "{:<5} {:>7.2} {:>8.3} {:>8.4} {:>6.3} {:>6}",
            c.name, truth, c.beta_hat, c.var_hat, c.pip, c.delta_hat
        );
    }
    let borrowed: Vec<&str> = summary.borrowed().map(|c| c.name.as_str()).collect();
    println!("borrowed: {}", borrowed.join(" "));
    if let Some(sigma2) = fit.diagnostics.get("precision") {
        println!("noise precision: ess {:.0}, split R-hat {:.3}", sigma2.ess, sigma2.rhat);
    }
    Ok(())
}
