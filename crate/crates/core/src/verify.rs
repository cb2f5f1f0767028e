//! Seeded randomized checks of the measure inequalities and of the
//! discretization building blocks, reported as pass/fail counts.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::criticality::{chi_can_h, chi_gap_h, chi_nor_h};
use crate::error::Result;
use crate::fe_space::{CellFn, SampledFn};
use crate::mesh::Mesh1D;
use crate::objective::SmoothObjective;
use crate::pde::{PdeKind, ReducedProblem};
use crate::problems::{Problem, ProblemId, ProblemSpec};
use crate::regularizer::{prox_scalar, DiscreteRegularizer};

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub passed: usize,
    pub failed: usize,
    /// Largest `excess` recorded; negative values are the margin left by
    /// the closest passing check.
    pub worst: f64,
}

impl SuiteOutcome {
    fn new(name: &'static str) -> Self {
        SuiteOutcome {
            name,
            passed: 0,
            failed: 0,
            worst: f64::NEG_INFINITY,
        }
    }

    /// Records a check whose violation is `excess` (pass iff `excess <= 0`).
    fn record(&mut self, excess: f64) {
        if excess <= 0.0 {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        if excess.is_nan() {
            self.worst = f64::NAN;
        } else {
            self.worst = self.worst.max(excess);
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0 && self.passed > 0
    }
}

impl fmt::Display for SuiteOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {:<22} passed {:>5}  failed {:>3}  worst excess {:.3e}",
            if self.ok() { "PASS" } else { "FAIL" },
            self.name,
            self.passed,
            self.failed,
            self.worst
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VerifyConfig {
    pub seed: u64,
    pub prox_instances: usize,
    pub lemma_instances: usize,
    pub fd_instances_per_kind: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 2024,
            prox_instances: 1000,
            lemma_instances: 500,
            fd_instances_per_kind: 20,
        }
    }
}

pub fn run_all(cfg: &VerifyConfig) -> Result<Vec<SuiteOutcome>> {
    Ok(vec![
        prox_oracle(cfg.seed, cfg.prox_instances),
        lemma_can_nor(cfg.seed + 1, cfg.lemma_instances)?,
        lemma_can_gap(cfg.seed + 2, cfg.lemma_instances)?,
        gap_monotone_in_nu(cfg.seed + 3, cfg.lemma_instances)?,
        finite_differences(cfg.seed + 4, cfg.fd_instances_per_kind)?,
        fem_exactness()?,
    ])
}

/// Minimizer of `0.5 (v - w)^2 + t |v|` over `[lo, hi]` by a grid of step
/// 1e-3 followed by a grid of step 1e-6 around the coarse winner; the
/// objective is convex, so the coarse winner is within one step of the
/// minimizer.
pub fn brute_force_prox(w: f64, t: f64, lo: f64, hi: f64) -> f64 {
    let q = |v: f64| 0.5 * (v - w).powi(2) + t * v.abs();
    let scan = |a: f64, b: f64, step: f64| {
        let n = ((b - a) / step).ceil() as usize;
        (0..=n)
            .map(|i| (a + i as f64 * step).min(b))
            .fold((a, q(a)), |best, v| if q(v) < best.1 { (v, q(v)) } else { best })
            .0
    };
    let coarse = scan(lo, hi, 1e-3);
    scan((coarse - 2e-3).max(lo), (coarse + 2e-3).min(hi), 1e-6)
}

pub fn prox_oracle(seed: u64, instances: usize) -> SuiteOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SuiteOutcome::new("prox_oracle");
    for _ in 0..instances {
        let beta = rng.gen_range(0.0..2.0);
        let tau = rng.gen_range(0.1..10.0);
        let lo = rng.gen_range(-3.0..1.0);
        let hi = lo + rng.gen_range(0.0..4.0);
        let w = rng.gen_range(-5.0..5.0);
        let closed = prox_scalar(w, beta / tau, lo, hi);
        out.record((closed - brute_force_prox(w, beta / tau, lo, hi)).abs() - 2e-6);
    }
    out
}

/// A random discrete instance: smooth part, `psi_h` and step `tau`.
struct Instance {
    f: Arc<dyn SmoothObjective>,
    reg: DiscreteRegularizer,
    tau: f64,
}

fn random_instance(rng: &mut ChaCha8Rng) -> Result<Instance> {
    let id = [ProblemId::Linear, ProblemId::Semilinear, ProblemId::Bilinear][rng.gen_range(0..3)];
    let f = Problem::preset(id)?.objective;
    let n = [4, 8, 16, 32][rng.gen_range(0..4)];
    let mesh = Mesh1D::uniform(n)?;
    let lo = if id == ProblemId::Bilinear {
        rng.gen_range(0.0..1.0)
    } else {
        rng.gen_range(-3.0..0.5)
    };
    let hi = lo + rng.gen_range(0.1..4.0);
    let beta = rng.gen_range(0.0..0.05);
    let reg = DiscreteRegularizer::new(beta, CellFn::constant(mesh.clone(), lo), CellFn::constant(mesh, hi))?;
    Ok(Instance {
        f,
        reg,
        tau: rng.gen_range(0.1..10.0),
    })
}

fn random_cellfn(rng: &mut ChaCha8Rng, mesh: &Arc<Mesh1D>, lo: &CellFn, hi: &CellFn, pad: f64) -> CellFn {
    CellFn::from_fn(mesh.clone(), |k| {
        rng.gen_range(lo.values()[k] - pad..=hi.values()[k] + pad)
    })
}

/// `chi_can(prox(v)) <= chi_nor(v) / tau`.
pub fn lemma_can_nor(seed: u64, instances: usize) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SuiteOutcome::new("lemma_can_nor");
    for _ in 0..instances {
        let inst = random_instance(&mut rng)?;
        let mesh = inst.reg.mesh().clone();
        let v = random_cellfn(&mut rng, &mesh, inst.reg.lower(), inst.reg.upper(), 2.0);
        let u = inst.reg.prox(inst.tau, &v)?;
        let can = chi_can_h(inst.f.as_ref(), &inst.reg, inst.tau, &u)?;
        let nor = chi_nor_h(inst.f.as_ref(), &inst.reg, inst.tau, &v)?;
        out.record(can - nor / inst.tau - 1e-10);
    }
    Ok(out)
}

/// `(tau - nu/2) chi_can(u)^2 <= chi_gap(u; nu)` for feasible `u`.
pub fn lemma_can_gap(seed: u64, instances: usize) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SuiteOutcome::new("lemma_can_gap");
    for _ in 0..instances {
        let inst = random_instance(&mut rng)?;
        let mesh = inst.reg.mesh().clone();
        let u = random_cellfn(&mut rng, &mesh, inst.reg.lower(), inst.reg.upper(), 0.0);
        let nu = rng.gen_range(0.0..2.0 * inst.tau);
        let can = chi_can_h(inst.f.as_ref(), &inst.reg, inst.tau, &u)?;
        let gap = chi_gap_h(inst.f.as_ref(), &inst.reg, &u, nu)?;
        out.record((inst.tau - nu / 2.0) * can * can - gap - 1e-10);
    }
    Ok(out)
}

/// `chi_gap(u; 0) >= chi_gap(u; nu) >= 0` for feasible `u`.
pub fn gap_monotone_in_nu(seed: u64, instances: usize) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SuiteOutcome::new("gap_monotone_in_nu");
    for _ in 0..instances {
        let inst = random_instance(&mut rng)?;
        let mesh = inst.reg.mesh().clone();
        let u = random_cellfn(&mut rng, &mesh, inst.reg.lower(), inst.reg.upper(), 0.0);
        let nu = rng.gen_range(0.0..20.0);
        let g0 = chi_gap_h(inst.f.as_ref(), &inst.reg, &u, 0.0)?;
        let gn = chi_gap_h(inst.f.as_ref(), &inst.reg, &u, nu)?;
        out.record((gn - g0 - 1e-10).max(-gn - 1e-12));
    }
    Ok(out)
}

/// Central differences with `eps = 1e-5` against adjoint gradients,
/// relative error 1e-6. The data `y_d = x`, `g = 10` keep directional
/// derivatives well above the rounding level of the difference quotient.
pub fn finite_differences(seed: u64, per_kind: usize) -> Result<SuiteOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = SuiteOutcome::new("finite_differences");
    for (id, lo, hi) in [
        (ProblemId::Linear, -5.0, 5.0),
        (ProblemId::Semilinear, -20.0, 20.0),
        (ProblemId::Bilinear, 0.0, 15.0),
    ] {
        let mut spec = ProblemSpec::preset(id);
        spec.target = "x".into();
        spec.source = "constant(10)".into();
        let f = spec.build()?.objective;
        for _ in 0..per_kind {
            let mesh = Mesh1D::uniform(rng.gen_range(4..=48))?;
            let u = CellFn::from_fn(mesh.clone(), |_| rng.gen_range(lo..hi));
            let d = CellFn::from_fn(mesh.clone(), |_| rng.gen_range(-1.0..1.0));
            let eps = 1e-5;
            let fd = (f.value(&u.axpy(eps, &d))? - f.value(&u.axpy(-eps, &d))?) / (2.0 * eps);
            let ad = f.gradient(&u)?.dot(&d);
            out.record((fd - ad).abs() / ad.abs().max(1e-8) - 1e-6);
        }
    }
    Ok(out)
}

/// Nodal exactness of the Poisson solve and the `1/240` objective value.
pub fn fem_exactness() -> Result<SuiteOutcome> {
    let mut out = SuiteOutcome::new("fem_exactness");
    let zero = SampledFn::constant(0.0);
    let p = ReducedProblem::new(PdeKind::Linear, zero.clone(), zero);
    for n in [2, 3, 4, 7, 16, 64, 255, 1024] {
        let mesh = Mesh1D::uniform(n)?;
        let y = p.solve_state(&CellFn::constant(mesh.clone(), 1.0))?.state;
        let err = (1..n)
            .map(|i| {
                let x = mesh.edges()[i];
                (y.node(i) - x * (1.0 - x) / 2.0).abs()
            })
            .fold(0.0, f64::max);
        out.record(err - 1e-12);
    }
    let fine = Mesh1D::uniform(1 << 17)?;
    let j = p.objective(&CellFn::constant(fine, 1.0))?;
    out.record((j - 1.0 / 240.0).abs() - 1e-12);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_prox_examples() {
        assert!((brute_force_prox(0.8, 0.5, -1.0, 1.0) - 0.3).abs() <= 1e-6);
        assert!(brute_force_prox(0.3, 0.5, -1.0, 1.0).abs() <= 1e-6);
        assert!((brute_force_prox(2.0, 0.0, -1.0, 1.0) - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn small_suites_pass() {
        let cfg = VerifyConfig {
            seed: 7,
            prox_instances: 50,
            lemma_instances: 30,
            fd_instances_per_kind: 3,
        };
        for s in run_all(&cfg).unwrap() {
            assert!(s.ok(), "{s}");
        }
    }

    #[test]
    fn outcome_formatting() {
        let mut s = SuiteOutcome::new("demo");
        s.record(-1.0);
        assert!(s.to_string().starts_with("PASS demo"));
        s.record(0.5);
        assert!(!s.ok());
        assert_eq!(s.worst, 0.5);
    }
}
