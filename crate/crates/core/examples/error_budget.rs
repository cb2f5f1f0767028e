//! Assembling an error budget by hand and evaluating the three bounds
//! over a range of mesh sizes.
//!
//! Run with `cargo run --example error_budget`.

use critmeasure::criticality::{ErrorBudget, Modulus};

fn main() -> critmeasure::Result<()> {
    let budget = ErrorBudget {
        tau: 1.0,
        l_grad: 0.05,
        ell_grad: 2.0,
        l_phi: 0.001,
        diam_w: 4.0,
        rho_pi: ErrorBudget::projection_modulus(),
        rho_prox: Modulus::linear(2.2 / std::f64::consts::PI),
        rho_grad: Modulus::new(0.3, 2.0)?,
        rho_proj: Modulus::linear(2.2 / std::f64::consts::PI),
    };
    budget.validate()?;
    println!("{:>6} {:>12} {:>12} {:>12}", "n", "budget_nor", "budget_can", "budget_gap");
    for n in [16, 32, 64, 128, 256] {
        let h = 1.0 / n as f64;
        println!(
            "{n:>6} {:>12.4e} {:>12.4e} {:>12.4e}",
            budget.budget_nor(h),
            budget.budget_can(h),
            budget.budget_gap(h)
        );
    }
    Ok(())
}
