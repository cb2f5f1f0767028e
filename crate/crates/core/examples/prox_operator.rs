//! The cellwise proximal map of `beta |u|_1 + indicator[l, u]`:
//! soft thresholding followed by clamping.
//!
//! Run with `cargo run --example prox_operator`.

use critmeasure::regularizer::{prox_scalar, DiscreteRegularizer};
use critmeasure::{CellFn, Mesh1D};

fn main() -> critmeasure::Result<()> {
    let (beta, tau) = (0.5, 1.0);
    println!("scalar prox with threshold {} on [-1, 2]", beta / tau);
    for w in [-3.0, -0.8, -0.2, 0.0, 0.4, 1.7, 5.0] {
        println!("  prox({w:>5}) = {:>5.2}", prox_scalar(w, beta / tau, -1.0, 2.0));
    }

    let mesh = Mesh1D::uniform(5)?;
    let lower = CellFn::new(mesh.clone(), vec![0.0, -0.25, -0.5, -0.75, -1.0])?;
    let upper = CellFn::constant(mesh.clone(), 1.0);
    let reg = DiscreteRegularizer::new(beta, lower, upper)?;
    let w = CellFn::new(mesh.clone(), vec![-2.0, 0.3, 0.9, -0.6, 3.0])?;
    let p = reg.prox(tau, &w)?;
    println!("cell  w      lower  upper  prox");
    for k in 0..mesh.n_cells() {
        println!(
            "{k:>4} {:>6.2} {:>6.2} {:>6.2} {:>6.2}",
            w.values()[k],
            reg.lower().values()[k],
            reg.upper().values()[k],
            p.values()[k]
        );
    }
    println!("phi(prox) = {:.4}", reg.value(&p));
    Ok(())
}
