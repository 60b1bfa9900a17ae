//! Reduced simulation benchmark printed as a scenario-by-method grid.
//!
//! cargo run --release --example benchmark -- [replicates] [n_internal] [null replicates]

use apsp::sim::{run_benchmark, BenchMethod, BenchNull, BenchmarkConfig, Scenario};

fn main() -> apsp::Result<()> {
    let mut args = std::env::args().skip(1);
    let mut next = || args.next().and_then(|s| s.parse().ok());
    let replicates = next().unwrap_or(10);
    let n_internal = vec![next().unwrap_or(20)];
    let null = BenchNull { replicates: next().unwrap_or(20), ..BenchNull::default() };
    let cfg = BenchmarkConfig { replicates, n_internal, null, ..BenchmarkConfig::default() };
    let started = std::time::Instant::now();
    let result = run_benchmark(&cfg)?;
    let n = cfg.n_internal[0];
    println!("correctness %, mean (sd) over {} replicates, n = {n}", cfg.replicates);
    print!("{:<18}", "scenario");
    for m in BenchMethod::TABLE {
        print!("{:>14}", m.name());
    }
    println!();
    for s in Scenario::ALL {
        print!("{:<18}", s.name());
        for m in BenchMethod::TABLE {
            let c = result.cell(s, n, m).expect("cell present");
            print!("{:>14}", format!("{:.1} ({:.1})", c.correctness_mean, c.correctness_sd));
        }
        println!();
    }
    println!("failed fits: {}; {:.1} s", result.failed(), started.elapsed().as_secs_f64());
    Ok(())
}
