//! Refinement study for the Poisson control problem with
//! `beta = 0.001`, `l = -1`, `u = 1 + 0.1 sin(2 pi x)` and `y_d = 100 x^2`.
//!
//! Run with `cargo run --release --example linear_study [out_dir]`.

use std::path::PathBuf;

use critmeasure::problems::{ProblemId, ProblemSpec};
use critmeasure::study::{run_study, StudyConfig};

fn main() -> critmeasure::Result<()> {
    let cfg = StudyConfig::new(ProblemSpec::preset(ProblemId::Linear), vec![16, 32, 64, 128, 256]);
    let res = run_study(&cfg)?;

    println!("n_ref = {}", cfg.n_ref);
    println!("{:>6} {:>12} {:>12} {:>12} {:>12} {:>12}", "n", "chi_nor", "chi_can", "chi_gap", "budget_nor", "budget_can");
    for p in &res.points {
        let r = &p.report;
        println!(
            "{:>6} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e} {:>12.4e}",
            p.n, r.chi_nor, r.chi_can, r.chi_gap, r.budget_nor, r.budget_can
        );
    }
    for fit in &res.rates {
        println!("rate chi_{}: {:.3}", fit.measure, fit.rate);
    }
    println!("budget: {:?}", res.budget);
    for w in res.warnings.iter().chain(res.failures.iter().map(|f| &f.1)) {
        println!("warning: {w}");
    }
    println!("bounds hold: {}", res.all_bounds_hold(0.0));

    if let Some(dir) = std::env::args().nth(1).map(PathBuf::from) {
        res.write_outputs(&dir)?;
        println!("wrote {}", dir.display());
    }
    Ok(())
}
