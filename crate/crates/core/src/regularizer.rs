//! The composite term `psi(u) = beta ||u||_{L1} + I_[l, u](u)` and its
//! discretization `psi_h` with cell-averaged bounds.
//!
//! On piecewise constants both proximity operators reduce to a cellwise
//! soft-threshold followed by a clamp onto the (discretized) box.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::fe_space::{CellFn, Dg0Projection, SampledFn};
use crate::mesh::Mesh1D;

/// `max(lo, min(w, hi))`; unlike `f64::clamp` this never panics.
#[inline]
pub fn clamp_box(w: f64, lo: f64, hi: f64) -> f64 {
    lo.max(w.min(hi))
}

/// Scalar `prox` of `t|.| + I_[lo, hi]`: threshold first, then project.
#[inline]
pub fn prox_scalar(w: f64, t: f64, lo: f64, hi: f64) -> f64 {
    let shrunk = w - clamp_box(w, -t, t);
    clamp_box(shrunk, lo, hi)
}

/// Minimizer and minimum of `g v + beta |v|` over `v in [lo, hi]`.
///
/// The objective is piecewise linear, so the minimum sits at `lo`, `hi` or
/// the kink `0`. Ties go to the candidate with the smaller magnitude.
pub fn linear_min_scalar(g: f64, beta: f64, lo: f64, hi: f64) -> (f64, f64) {
    let f = |v: f64| g * v + beta * v.abs();
    let mut best = (lo, f(lo));
    let mut consider = |v: f64| {
        let fv = f(v);
        if fv < best.1 || (fv == best.1 && v.abs() < best.0.abs()) {
            best = (v, fv);
        }
    };
    consider(hi);
    if lo <= 0.0 && 0.0 <= hi {
        consider(0.0);
    }
    best
}

/// `beta ||.||_{L1} + I_[lower, upper]` with analytic bounds.
#[derive(Debug, Clone)]
pub struct CompositeRegularizer {
    beta: f64,
    lower: SampledFn,
    upper: SampledFn,
    lower_h1: f64,
    upper_h1: f64,
}

impl CompositeRegularizer {
    /// The bounds must carry their H1 seminorms and satisfy `lower <= upper`
    /// at 1025 sample points.
    pub fn new(beta: f64, lower: SampledFn, upper: SampledFn) -> Result<Self> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(invalid("beta", format!("must be finite and >= 0, got {beta}")));
        }
        let lower_h1 = lower
            .h1_seminorm()
            .ok_or_else(|| Error::MissingSeminorm(lower.label().to_string()))?;
        let upper_h1 = upper
            .h1_seminorm()
            .ok_or_else(|| Error::MissingSeminorm(upper.label().to_string()))?;
        for i in 0..=1024 {
            let x = i as f64 / 1024.0;
            if lower.eval(x) > upper.eval(x) {
                return Err(invalid("bounds", format!("lower > upper at x = {x}")));
            }
        }
        Ok(CompositeRegularizer {
            beta,
            lower,
            upper,
            lower_h1,
            upper_h1,
        })
    }

    /// Pure box constraint.
    pub fn box_only(lower: SampledFn, upper: SampledFn) -> Result<Self> {
        Self::new(0.0, lower, upper)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn lower(&self) -> &SampledFn {
        &self.lower
    }

    pub fn upper(&self) -> &SampledFn {
        &self.upper
    }

    pub fn lower_h1(&self) -> f64 {
        self.lower_h1
    }

    pub fn upper_h1(&self) -> f64 {
        self.upper_h1
    }

    pub fn has_constant_bounds(&self) -> bool {
        self.lower.as_constant().is_some() && self.upper.as_constant().is_some()
    }

    /// Cell averages of the bounds.
    pub fn discretize_bounds(&self, mesh: &Arc<Mesh1D>) -> Result<(CellFn, CellFn)> {
        let lo = self.lower.project_dg0(mesh)?;
        let mut hi = self.upper.project_dg0(mesh)?;
        // averages preserve ordering; this only removes rounding inversions
        for (u, l) in hi.values_mut().iter_mut().zip(lo.values()) {
            *u = u.max(*l);
        }
        Ok((lo, hi))
    }

    /// `psi_h` on `mesh`.
    pub fn discretize(&self, mesh: &Arc<Mesh1D>) -> Result<DiscreteRegularizer> {
        let (lower, upper) = self.discretize_bounds(mesh)?;
        Ok(DiscreteRegularizer {
            beta: self.beta,
            lower,
            upper,
        })
    }

    pub fn prox_discrete(&self, mesh: &Arc<Mesh1D>, tau: f64, w: &CellFn) -> Result<CellFn> {
        self.discretize(mesh)?.prox(tau, w)
    }

    /// Surrogate of the continuous `prox_{psi/tau}` at a piecewise constant:
    /// the prox with bounds averaged on the nested reference mesh.
    pub fn prox_continuous_at_cellfn(
        &self,
        tau: f64,
        w: &CellFn,
        reference: &Arc<Mesh1D>,
    ) -> Result<CellFn> {
        let fine = w.inject(reference)?;
        self.discretize(reference)?.prox(tau, &fine)
    }

    pub fn project_box(&self, mesh: &Arc<Mesh1D>, w: &CellFn) -> Result<CellFn> {
        self.discretize(mesh)?.project(w)
    }

    /// `(1/pi) h (|l|_{H1} + |u|_{H1})`, bounding the distance between the
    /// continuous and discrete prox at piecewise constants.
    pub fn rho_prox(&self, h: f64) -> f64 {
        h * (self.lower_h1 + self.upper_h1) / PI
    }

    /// Same bound for the box projections.
    pub fn rho_proj(&self, h: f64) -> f64 {
        self.rho_prox(h)
    }

    /// Lipschitz constant of `beta ||.||_{L1}` with respect to the L2 norm on
    /// the unit interval.
    pub fn l1_lipschitz(&self) -> f64 {
        self.beta
    }
}

/// `psi_h`: L1 weight plus cellwise box `[lower_h, upper_h]` on one mesh.
#[derive(Debug, Clone)]
pub struct DiscreteRegularizer {
    beta: f64,
    lower: CellFn,
    upper: CellFn,
}

impl DiscreteRegularizer {
    pub fn new(beta: f64, lower: CellFn, upper: CellFn) -> Result<Self> {
        if !(beta >= 0.0) {
            return Err(invalid("beta", "must be >= 0"));
        }
        if !lower.mesh().same_as(upper.mesh()) {
            return Err(invalid("bounds", "lower and upper live on different meshes"));
        }
        if lower.values().iter().zip(upper.values()).any(|(l, u)| l > u) {
            return Err(invalid("bounds", "lower > upper on some cell"));
        }
        Ok(DiscreteRegularizer { beta, lower, upper })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn mesh(&self) -> &Arc<Mesh1D> {
        self.lower.mesh()
    }

    pub fn lower(&self) -> &CellFn {
        &self.lower
    }

    pub fn upper(&self) -> &CellFn {
        &self.upper
    }

    fn check_mesh(&self, w: &CellFn) -> Result<()> {
        if w.mesh().same_as(self.mesh()) {
            Ok(())
        } else {
            Err(invalid("w", "argument lives on a different mesh than the bounds"))
        }
    }

    /// `prox_{psi_h / tau}(w)`.
    pub fn prox(&self, tau: f64, w: &CellFn) -> Result<CellFn> {
        if !(tau > 0.0) {
            return Err(invalid("tau", format!("must be > 0, got {tau}")));
        }
        self.check_mesh(w)?;
        let t = self.beta / tau;
        let lo = self.lower.values();
        let hi = self.upper.values();
        Ok(CellFn::from_fn(w.mesh().clone(), |k| {
            prox_scalar(w.values()[k], t, lo[k], hi[k])
        }))
    }

    /// Projection onto `[lower_h, upper_h]`.
    pub fn project(&self, w: &CellFn) -> Result<CellFn> {
        self.check_mesh(w)?;
        let lo = self.lower.values();
        let hi = self.upper.values();
        Ok(CellFn::from_fn(w.mesh().clone(), |k| {
            clamp_box(w.values()[k], lo[k], hi[k])
        }))
    }

    /// The real-valued part `beta ||u||_{L1}`.
    pub fn phi(&self, u: &CellFn) -> f64 {
        self.beta * u.l1_norm()
    }

    pub fn is_feasible(&self, u: &CellFn, tol: f64) -> bool {
        u.values()
            .iter()
            .zip(self.lower.values().iter().zip(self.upper.values()))
            .all(|(v, (l, h))| *v >= l - tol && *v <= h + tol)
    }

    /// `psi_h(u)`, infinite outside the box.
    pub fn value(&self, u: &CellFn) -> f64 {
        if self.is_feasible(u, 0.0) {
            self.phi(u)
        } else {
            f64::INFINITY
        }
    }

    /// Cellwise minimizer of `(g, v) + beta ||v||_{L1}` over the box.
    pub fn linear_minimizer(&self, g: &CellFn) -> CellFn {
        let lo = self.lower.values();
        let hi = self.upper.values();
        CellFn::from_fn(g.mesh().clone(), |k| {
            linear_min_scalar(g.values()[k], self.beta, lo[k], hi[k]).0
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit_box(beta: f64) -> CompositeRegularizer {
        CompositeRegularizer::new(beta, SampledFn::constant(-1.0), SampledFn::constant(1.0)).unwrap()
    }

    /// Argmin of `0.5 (v - w)^2 + t |v|` over `[lo, hi]` by two-level grid search.
    fn brute_prox(w: f64, t: f64, lo: f64, hi: f64) -> f64 {
        let f = |v: f64| 0.5 * (v - w).powi(2) + t * v.abs();
        let scan = |a: f64, b: f64, step: f64| {
            let n = ((b - a) / step).ceil() as usize;
            (0..=n)
                .map(|i| (a + i as f64 * step).min(b))
                .min_by(|x, y| f(*x).partial_cmp(&f(*y)).unwrap())
                .unwrap()
        };
        let coarse = scan(lo, hi, 1e-3);
        scan((coarse - 2e-3).max(lo), (coarse + 2e-3).min(hi), 1e-6)
    }

    #[test]
    fn prox_examples() {
        let m = Mesh1D::uniform(1).unwrap();
        let w = |v| CellFn::constant(m.clone(), v);
        assert_eq!(unit_box(0.0).prox_discrete(&m, 1.0, &w(2.0)).unwrap().values(), &[1.0]);
        assert_eq!(unit_box(0.5).prox_discrete(&m, 1.0, &w(0.3)).unwrap().values(), &[0.0]);
        let p = unit_box(0.5).prox_discrete(&m, 1.0, &w(0.8)).unwrap().values()[0];
        assert_relative_eq!(p, 0.3, epsilon = 1e-15);
        assert!((p - brute_prox(0.8, 0.5, -1.0, 1.0)).abs() <= 1e-6);
        assert!(unit_box(0.5).prox_discrete(&m, 0.0, &w(0.8)).is_err());
        assert!(unit_box(0.5).prox_discrete(&m, -1.0, &w(0.8)).is_err());
    }

    #[test]
    fn discretized_bounds() {
        let m2 = Mesh1D::uniform(2).unwrap();
        let (l, u) = unit_box(0.0).discretize_bounds(&m2).unwrap();
        assert_eq!(l.values(), &[-1.0, -1.0]);
        assert_eq!(u.values(), &[1.0, 1.0]);

        let r = CompositeRegularizer::box_only(
            SampledFn::new("-x", |x| -x).with_seminorm(1.0),
            SampledFn::constant(1.0),
        )
        .unwrap();
        let (l, _) = r.discretize_bounds(&m2).unwrap();
        assert_relative_eq!(l.values()[0], -0.25, epsilon = 1e-15);
        assert_relative_eq!(l.values()[1], -0.75, epsilon = 1e-15);

        let upper = SampledFn::new("1+0.1 sin", |x| 1.0 + 0.1 * (2.0 * PI * x).sin())
            .with_seminorm(0.1 * 2f64.sqrt() * PI);
        let r = CompositeRegularizer::box_only(SampledFn::constant(-1.0), upper).unwrap();
        let m4 = Mesh1D::uniform(4).unwrap();
        let (_, u) = r.discretize_bounds(&m4).unwrap();
        for k in 0..4 {
            let (a, b) = m4.cell(k);
            let exact = 1.0 + 0.1 * ((2.0 * PI * a).cos() - (2.0 * PI * b).cos()) / (2.0 * PI * (b - a));
            assert_relative_eq!(u.values()[k], exact, epsilon = 1e-10);
        }
    }

    #[test]
    fn rho_prox_values() {
        assert_eq!(unit_box(0.1).rho_prox(0.3), 0.0);
        let r = CompositeRegularizer::box_only(
            SampledFn::new("-x", |x| -x).with_seminorm(1.0),
            SampledFn::constant(1.0),
        )
        .unwrap();
        assert_relative_eq!(r.rho_prox(0.5), 0.5 / PI);
        let r = CompositeRegularizer::new(
            0.001,
            SampledFn::constant(-1.0),
            SampledFn::new("u", |x| 1.0 + 0.1 * (2.0 * PI * x).sin()).with_seminorm(0.1 * 2f64.sqrt() * PI),
        )
        .unwrap();
        assert_relative_eq!(r.rho_prox(1.0 / 16.0), 0.1 * 2f64.sqrt() / 16.0, epsilon = 1e-15);
    }

    #[test]
    fn project_box_examples() {
        let m = Mesh1D::uniform(3).unwrap();
        let r = unit_box(0.7);
        let w = CellFn::new(m.clone(), vec![0.5, -0.2, 0.9]).unwrap();
        assert_eq!(r.project_box(&m, &w).unwrap(), w);
        let w = CellFn::new(m.clone(), vec![5.0, -5.0, 0.0]).unwrap();
        assert_eq!(r.project_box(&m, &w).unwrap().values(), &[1.0, -1.0, 0.0]);
    }

    #[test]
    fn continuous_prox_surrogate() {
        let m = Mesh1D::uniform(4).unwrap();
        let fine = m.refine_nested(8).unwrap();
        // constant bounds: independent of the reference mesh
        let r = unit_box(0.3);
        let w = CellFn::new(m.clone(), vec![1.7, 0.2, -0.9, -0.1]).unwrap();
        let coarse = r.prox_discrete(&m, 1.0, &w).unwrap();
        let surrogate = r.prox_continuous_at_cellfn(1.0, &w, &fine).unwrap();
        assert_eq!(coarse.inject(&fine).unwrap(), surrogate);

        // Example box [-x, 1] without L1 term: prox(Pi_h l - 1) = Pi_ref l
        let xi = SampledFn::new("-x", |x| -x).with_seminorm(1.0);
        let r = CompositeRegularizer::box_only(xi.clone(), SampledFn::constant(1.0)).unwrap();
        let v = xi.project_dg0(&m).unwrap().map(|v| v - 1.0);
        let p = r.prox_continuous_at_cellfn(1.0, &v, &fine).unwrap();
        let expect = xi.project_dg0(&fine).unwrap();
        for (a, b) in p.values().iter().zip(expect.values()) {
            assert_relative_eq!(a, b, epsilon = 1e-15);
        }
        assert_eq!(r.project_box(&m, &v).unwrap(), xi.project_dg0(&m).unwrap());

        // a dead zone covering every input gives median(l, 0, u)
        let r = CompositeRegularizer::new(
            10.0,
            SampledFn::new("x-0.5", |x| x - 0.5).with_seminorm(1.0),
            SampledFn::new("x+0.2", |x| x + 0.2).with_seminorm(1.0),
        )
        .unwrap();
        let w = CellFn::new(m.clone(), vec![2.0, -1.5, 0.3, 1.0]).unwrap();
        let p = r.prox_continuous_at_cellfn(1.0, &w, &fine).unwrap();
        let (lo, hi) = r.discretize_bounds(&fine).unwrap();
        for k in 0..fine.n_cells() {
            let wk = w.values()[k / 8];
            let b = brute_prox(wk, 10.0, lo.values()[k], hi.values()[k]);
            assert!((p.values()[k] - b).abs() <= 2e-6);
            let med = clamp_box(0.0, lo.values()[k], hi.values()[k]);
            assert_relative_eq!(p.values()[k], med, epsilon = 1e-15);
        }
        assert!(r.prox_continuous_at_cellfn(1.0, &w, &Mesh1D::uniform(6).unwrap()).is_err());
    }

    #[test]
    fn linear_minimizer_candidates() {
        assert_eq!(linear_min_scalar(0.5, 1.0, -1.0, 1.0), (0.0, 0.0));
        assert_eq!(linear_min_scalar(-2.0, 1.0, -1.0, 1.0), (1.0, -1.0));
        assert_eq!(linear_min_scalar(2.0, 1.0, 0.5, 1.0), (0.5, 1.5));
        // tie between 0 and 1 goes to 0
        assert_eq!(linear_min_scalar(-1.0, 1.0, -1.0, 1.0).0, 0.0);
    }

    #[test]
    fn rejects_bad_data() {
        assert!(CompositeRegularizer::new(-1.0, SampledFn::constant(0.0), SampledFn::constant(1.0)).is_err());
        assert!(CompositeRegularizer::new(0.0, SampledFn::constant(1.0), SampledFn::constant(0.0)).is_err());
        assert!(CompositeRegularizer::new(0.0, SampledFn::new("x", |x| x), SampledFn::constant(2.0)).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(256))]

            #[test]
            fn prox_is_nonexpansive_and_feasible(
                beta in 0.0f64..2.0,
                tau in 0.1f64..5.0,
                w1 in proptest::collection::vec(-5.0f64..5.0, 8),
                w2 in proptest::collection::vec(-5.0f64..5.0, 8),
            ) {
                let m = Mesh1D::uniform(8).unwrap();
                let r = CompositeRegularizer::new(
                    beta,
                    SampledFn::new("l", |x| -1.0 - x).with_seminorm(1.0),
                    SampledFn::new("u", |x| 0.5 + x * x).with_seminorm(2.0 / 3f64.sqrt()),
                ).unwrap();
                let d = r.discretize(&m).unwrap();
                let a = CellFn::new(m.clone(), w1).unwrap();
                let b = CellFn::new(m.clone(), w2).unwrap();
                let pa = d.prox(tau, &a).unwrap();
                let pb = d.prox(tau, &b).unwrap();
                prop_assert!(pa.sub(&pb).l2_norm() <= a.sub(&b).l2_norm() + 1e-14);
                prop_assert!(d.is_feasible(&pa, 0.0));
            }

            #[test]
            fn projection_maps_box_into_discrete_box(samples in proptest::collection::vec(0.0f64..1.0, 16)) {
                // v = l + s (u - l) with s piecewise constant on a fine mesh lies in [l, u]
                let fine = Mesh1D::uniform(64).unwrap();
                let coarse = Mesh1D::uniform(4).unwrap();
                let lo = SampledFn::new("l", |x| (3.0 * x).sin() - 1.0).with_seminorm(2.0);
                let hi = SampledFn::new("u", |x| x * x + 0.2).with_seminorm(1.2);
                let r = CompositeRegularizer::box_only(lo.clone(), hi.clone()).unwrap();
                let (lf, uf) = r.discretize_bounds(&fine).unwrap();
                let v = CellFn::from_fn(fine.clone(), |k| {
                    let s = samples[k % 16];
                    lf.values()[k] + s * (uf.values()[k] - lf.values()[k])
                });
                let pv = v.project_dg0(&coarse).unwrap();
                // box averaged on the fine mesh, then on the coarse one, equals Pi_h of the bounds
                let d = r.discretize(&coarse).unwrap();
                prop_assert!(d.is_feasible(&pv, 1e-12));
                prop_assert!(pv.l1_norm() <= v.l1_norm() + 1e-14);
            }
        }
    }
}
