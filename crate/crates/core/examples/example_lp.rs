//! The box-constrained LP `min int u` over `-x <= u <= 1`, whose solution
//! `Pi_h(-x)` is discretely optimal on every mesh. The reference measures
//! then reduce to `||Pi_h xi - Pi_ref xi||`, which tends to `h / (2 sqrt 3)`.
//!
//! Run with `cargo run --release --example example_lp`.

use critmeasure::criticality::{chi_can_h, chi_can_ref, chi_nor_h, chi_nor_ref, postprocess_v};
use critmeasure::problems::{Problem, ProblemId};
use critmeasure::solvers::{solve, SolveConfig};
use critmeasure::Mesh1D;

fn main() -> critmeasure::Result<()> {
    let p = Problem::preset(ProblemId::ExampleLp)?;
    let f = p.objective.as_ref();
    println!("{:>4} {:>8} {:>10} {:>12} {:>12} {:>12}", "n", "n_ref", "chi_h", "chi_nor", "chi_can", "h/(2 sqrt 3)");
    for n in [4, 8, 16, 32, 64] {
        let mesh = Mesh1D::uniform(n)?;
        let reference = mesh.refine_nested(64)?;
        let d = p.regularizer.discretize(&mesh)?;
        let res = solve(f, &d, &SolveConfig::default())?;
        let u = &res.u_star;
        let v = postprocess_v(u, &f.gradient(u)?, 1.0);
        let chi_h = chi_nor_h(f, &d, 1.0, &v)?.max(chi_can_h(f, &d, 1.0, u)?);
        let nor = chi_nor_ref(f, &p.regularizer, &reference, 1.0, &v)?;
        let can = chi_can_ref(f, &p.regularizer, &reference, 1.0, u)?;
        println!(
            "{:>4} {:>8} {:>10.1e} {:>12.6} {:>12.6} {:>12.6}",
            n,
            reference.n_cells(),
            chi_h,
            nor,
            can,
            mesh.h() / 12f64.sqrt()
        );
    }
    Ok(())
}
