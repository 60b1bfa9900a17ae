//! External fit → borrowing prior → internal fit, on data where the
//! internal and external signals only partly agree.
//!
//! cargo run --release --example two_step

use apsp::apsp::{run_two_step, ApspConfig};
use apsp::sim::{generate_scenario, Scenario, ScenarioSpec};

fn main() -> apsp::Result<()> {
    let sim = generate_scenario(&ScenarioSpec::new(Scenario::PartialOverlap, 20, 11))?;
    let two = run_two_step(&sim.external, &sim.internal, &ApspConfig::default(), 11)?;
    for w in &two.warnings {
        println!("warning: {w}");
    }
    let fit = &two.internal;
    let taus = fit.tau_means();
    let original = sim.to_original(&fit.fit.means());
    println!(
        "{:<5} {:>6} {:>6} {:>6} {:>8} {:>9} {:>7} {:>7}",
        "", "truth", "delta", "pip", "mean", "original", "tau2", "accept"
    );
    for (k, c) in fit.fit.coefficients.iter().enumerate() {
        println!(
            "{:<5} {:>6.2} {:>6} {:>6.3} {:>8.3} {:>9.3} {:>7} {:>7}",
            c.name,
            sim.beta_internal[k],
            fit.delta[k],
            c.pip.unwrap_or(f64::NAN),
            c.mean,
            original[k],
            taus[k].map_or("-".into(), |t| format!("{t:.3}")),
            fit.tau_acceptance[k].map_or("-".into(), |a| format!("{a:.2}")),
        );
    }
    Ok(())
}
