//! Writes one simulated (external, internal) pair to CSV, reads it back and
//! standardizes both files with a pooled map.
//!
//! cargo run --example ingest_standardize -- [out_dir]

use std::collections::HashMap;

use apsp::data::{apply_standardization, fit_standardization, ingest_csv, Role, StandardizationPolicy};
use apsp::sim::{generate_scenario, Scenario, ScenarioSpec};

fn main() -> apsp::Result<()> {
    let dir = std::env::args().nth(1).map_or_else(|| std::env::temp_dir().join("apsp-data"), Into::into);
    std::fs::create_dir_all(&dir).expect("create output directory");
    let sim = generate_scenario(&ScenarioSpec::new(Scenario::PartialOverlap, 20, 2023))?;
    let ext_path = dir.join("external.csv");
    let int_path = dir.join("internal.csv");
    sim.raw_external.save_csv(&ext_path)?;
    sim.raw_internal.save_csv(&int_path)?;

    let (ext, report) = ingest_csv(&ext_path, "y", Role::External, None)?;
    let kinds: HashMap<_, _> = ext.columns().iter().map(|c| (c.name.clone(), c.kind)).collect();
    let (int, _) = ingest_csv(&int_path, "y", Role::Internal, Some(&kinds))?;
    println!("external: n = {}, K = {}, dropped rows = {}", ext.n(), ext.k(), report.dropped_rows);
    println!("internal: n = {}, K = {}", int.n(), int.k());

    let map = fit_standardization(&[&ext, &int], StandardizationPolicy::Pooled)?;
    let ext_std = apply_standardization(&ext, &map)?;
    println!("{:<6} {:>9} {:>9}", "column", "center", "scale");
    for e in map.entries() {
        println!("{:<6} {:>9.4} {:>9.4}", e.column, e.center, e.scale);
    }
    let x1 = ext_std.column(0);
    println!("standardized X1 in the external file: mean {:.4}", x1.iter().sum::<f64>() / x1.len() as f64);
    println!("files written to {}", dir.display());
    Ok(())
}
