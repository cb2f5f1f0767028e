//! The randomized verification suites behind `critmeasure verify`, run with
//! reduced instance counts.
//!
//! Run with `cargo run --release --example verify_suites`.

use critmeasure::verify::{run_all, VerifyConfig};

fn main() -> critmeasure::Result<()> {
    let cfg = VerifyConfig {
        prox_instances: 200,
        lemma_instances: 100,
        ..VerifyConfig::default()
    };
    let outcomes = run_all(&cfg)?;
    for o in &outcomes {
        println!("{o}");
    }
    let passed = outcomes.iter().filter(|o| o.ok()).count();
    println!("{passed}/{} suites passed", outcomes.len());
    Ok(())
}
