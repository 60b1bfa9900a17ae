//! Small benchmark written to disk, then rendered as SVG charts.
//!
//! cargo run --release --example report -- [out_dir]

use apsp::report::write_report;
use apsp::sim::{read_metrics_csv, run_benchmark, BenchMethod, BenchmarkConfig};
use apsp::baselines::Method;

fn main() -> apsp::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("apsp-report"), Into::into);
    let cfg = BenchmarkConfig {
        replicates: 5,
        n_internal: vec![20],
        methods: vec![BenchMethod::Apsp, BenchMethod::Baseline(Method::Ssp), BenchMethod::Baseline(Method::Pp)],
        ..BenchmarkConfig::default()
    };
    run_benchmark(&cfg)?.save(&dir)?;
    let rows = read_metrics_csv(dir.join("metrics.csv"))?;
    for path in write_report(&rows, &dir)? {
        println!("{}", path.display());
    }
    Ok(())
}
