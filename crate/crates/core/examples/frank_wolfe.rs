//! Proximal gradient and Frank-Wolfe on the same discrete semilinear control
//! problem, with the discrete gap measure as the Frank-Wolfe stopping test.
//!
//! Run with `cargo run --release --example frank_wolfe [trace.csv]`.

use std::fs::File;

use critmeasure::criticality::{chi_can_h, chi_gap_h};
use critmeasure::problems::{Problem, ProblemId};
use critmeasure::solvers::{solve, Method, SolveConfig};
use critmeasure::Mesh1D;

fn main() -> critmeasure::Result<()> {
    let p = Problem::preset(ProblemId::Semilinear)?;
    let f = p.objective.as_ref();
    let mesh = Mesh1D::uniform(64)?;
    let d = p.regularizer.discretize(&mesh)?;

    let pg = solve(f, &d, &SolveConfig::default())?;
    let fw_cfg = SolveConfig {
        method: Method::FrankWolfe,
        tol: 1e-8,
        ..SolveConfig::default()
    };
    let fw = solve(f, &d, &fw_cfg)?;

    for (name, res) in [("pg", &pg), ("fw", &fw)] {
        println!(
            "{name}: {} iterations, converged {}, final chi_{} {:.3e}, F = {:.10}",
            res.iters,
            res.converged,
            res.measure_kind.name(),
            res.final_measure,
            res.objective_trace.last().copied().unwrap_or(f64::NAN)
        );
        println!(
            "    chi_can_h {:.3e}, chi_gap_h {:.3e}",
            chi_can_h(f, &d, 1.0, &res.u_star)?,
            chi_gap_h(f, &d, &res.u_star, 0.0)?
        );
    }
    println!("max |u_pg - u_fw| = {:.3e}", pg.u_star.sub(&fw.u_star).max_abs());

    if let Some(path) = std::env::args().nth(1) {
        fw.write_trace_csv(File::create(&path)?)?;
        println!("wrote {path}");
    }
    Ok(())
}
