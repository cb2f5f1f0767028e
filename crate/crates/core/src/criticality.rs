//! Criticality measures for `min f(u) + psi(u)`:
//!
//! * normal map:  `|| tau (v - prox(v)) + grad f(prox(v)) ||`
//! * canonical:   `|| u - prox(u - grad f(u) / tau) ||`
//! * gap:         `sup_v (grad f(u), u - v) + phi(u) - phi(v) - (nu/2) ||u - v||^2`
//!
//! Each has a discrete version on the mesh of its argument and a reference
//! version evaluated on a nested fine mesh, which stands in for the
//! continuous measure. [`ErrorBudget`] evaluates the discretization terms
//! that separate the two.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{invalid, Result};
use crate::fe_space::CellFn;
use crate::mesh::Mesh1D;
use crate::objective::SmoothObjective;
use crate::regularizer::{clamp_box, linear_min_scalar, CompositeRegularizer, DiscreteRegularizer};

/// Normal map measure on the mesh of `v`.
pub fn chi_nor_h(
    f: &dyn SmoothObjective,
    reg: &DiscreteRegularizer,
    tau: f64,
    v: &CellFn,
) -> Result<f64> {
    let u = reg.prox(tau, v)?;
    let g = f.gradient(&u)?;
    let residual = CellFn::from_fn(v.mesh().clone(), |k| {
        tau * (v.values()[k] - u.values()[k]) + g.values()[k]
    });
    Ok(residual.l2_norm())
}

/// Normal map measure of `v` evaluated on a nested reference mesh.
pub fn chi_nor_ref(
    f: &dyn SmoothObjective,
    reg: &CompositeRegularizer,
    reference: &Arc<Mesh1D>,
    tau: f64,
    v: &CellFn,
) -> Result<f64> {
    let fine = v.inject(reference)?;
    chi_nor_h(f, &reg.discretize(reference)?, tau, &fine)
}

/// Canonical measure on the mesh of `u`.
pub fn chi_can_h(
    f: &dyn SmoothObjective,
    reg: &DiscreteRegularizer,
    tau: f64,
    u: &CellFn,
) -> Result<f64> {
    let g = f.gradient(u)?;
    chi_can_with_gradient(reg, tau, u, &g)
}

pub(crate) fn chi_can_with_gradient(
    reg: &DiscreteRegularizer,
    tau: f64,
    u: &CellFn,
    g: &CellFn,
) -> Result<f64> {
    let w = reg.prox(tau, &u.axpy(-1.0 / tau, g))?;
    Ok(u.sub(&w).l2_norm())
}

pub fn chi_can_ref(
    f: &dyn SmoothObjective,
    reg: &CompositeRegularizer,
    reference: &Arc<Mesh1D>,
    tau: f64,
    u: &CellFn,
) -> Result<f64> {
    let fine = u.inject(reference)?;
    chi_can_h(f, &reg.discretize(reference)?, tau, &fine)
}

/// Per-cell maximum of `-g v - beta |v| - (nu/2)(u - v)^2` over `[lo, hi]`.
fn cell_gap_sup(g: f64, beta: f64, nu: f64, u: f64, lo: f64, hi: f64) -> f64 {
    if nu == 0.0 {
        return -linear_min_scalar(g, beta, lo, hi).1;
    }
    let q = |v: f64| -g * v - beta * v.abs() - 0.5 * nu * (u - v).powi(2);
    // concave on each side of the kink: clamp each vertex into its piece
    let mut best = q(lo).max(q(hi));
    if hi >= 0.0 {
        let a = lo.max(0.0);
        best = best.max(q(clamp_box(u - (g + beta) / nu, a, hi)));
    }
    if lo <= 0.0 {
        let b = hi.min(0.0);
        best = best.max(q(clamp_box(u - (g - beta) / nu, lo, b)));
    }
    if lo <= 0.0 && hi >= 0.0 {
        best = best.max(q(0.0));
    }
    best
}

pub(crate) fn chi_gap_with_gradient(reg: &DiscreteRegularizer, u: &CellFn, g: &CellFn, nu: f64) -> f64 {
    let beta = reg.beta();
    let lo = reg.lower().values();
    let hi = reg.upper().values();
    u.mesh()
        .cell_sizes()
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let (uk, gk) = (u.values()[k], g.values()[k]);
            h * (gk * uk + beta * uk.abs() + cell_gap_sup(gk, beta, nu, uk, lo[k], hi[k]))
        })
        .sum()
}

/// Gap function over the discretized box on the mesh of `u`; `nu > 0`
/// selects the regularized variant. The indicator part of `psi_h` is left
/// out, so the value is finite for infeasible `u`.
pub fn chi_gap_h(f: &dyn SmoothObjective, reg: &DiscreteRegularizer, u: &CellFn, nu: f64) -> Result<f64> {
    if !(nu >= 0.0) {
        return Err(invalid("nu", format!("must be >= 0, got {nu}")));
    }
    let g = f.gradient(u)?;
    Ok(chi_gap_with_gradient(reg, u, &g, nu))
}

pub fn chi_gap_ref(
    f: &dyn SmoothObjective,
    reg: &CompositeRegularizer,
    reference: &Arc<Mesh1D>,
    u: &CellFn,
    nu: f64,
) -> Result<f64> {
    let fine = u.inject(reference)?;
    chi_gap_h(f, &reg.discretize(reference)?, &fine, nu)
}

/// `v = u - grad / tau`, the point at which the normal map vanishes when
/// `u` is critical.
pub fn postprocess_v(u: &CellFn, grad: &CellFn, tau: f64) -> CellFn {
    u.axpy(-1.0 / tau, grad)
}

/// Projection of `u` onto the box discretized on the reference mesh.
pub fn postprocess_u_bar(u: &CellFn, reg: &CompositeRegularizer, reference: &Arc<Mesh1D>) -> Result<CellFn> {
    reg.discretize(reference)?.project(&u.inject(reference)?)
}

/// A modulus `h -> coefficient * h^order`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modulus {
    pub coefficient: f64,
    pub order: f64,
}

impl Modulus {
    pub const ZERO: Modulus = Modulus {
        coefficient: 0.0,
        order: 1.0,
    };

    pub fn new(coefficient: f64, order: f64) -> Result<Self> {
        if !(coefficient >= 0.0) || !(order > 0.0) {
            return Err(invalid(
                "modulus",
                format!("need coefficient >= 0 and order > 0, got {coefficient}, {order}"),
            ));
        }
        Ok(Modulus { coefficient, order })
    }

    pub fn linear(coefficient: f64) -> Self {
        Modulus {
            coefficient,
            order: 1.0,
        }
    }

    pub fn eval(&self, h: f64) -> f64 {
        if h <= 0.0 {
            0.0
        } else {
            self.coefficient * h.powf(self.order)
        }
    }
}

/// Constants and moduli that bound the gap between continuous and discrete
/// criticality measures.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBudget {
    pub tau: f64,
    /// Lipschitz constant of the gradient on the bounded set `W_U`.
    pub l_grad: f64,
    /// Bound on the H1 norm of the gradient on `W_U`.
    pub ell_grad: f64,
    /// Lipschitz constant of `phi` on `W_U`.
    pub l_phi: f64,
    pub diam_w: f64,
    /// Piecewise constant projection error per unit H1 norm, `h / pi`.
    pub rho_pi: Modulus,
    pub rho_prox: Modulus,
    pub rho_grad: Modulus,
    pub rho_proj: Modulus,
}

impl ErrorBudget {
    pub fn validate(&self) -> Result<()> {
        let consts = [self.l_grad, self.ell_grad, self.l_phi, self.diam_w];
        if !(self.tau > 0.0) || consts.iter().any(|c| !(*c >= 0.0)) {
            return Err(invalid("budget", "tau must be > 0 and all constants >= 0"));
        }
        Ok(())
    }

    /// Projection modulus with the convex-domain constant `1/pi`.
    pub fn projection_modulus() -> Modulus {
        Modulus::linear(1.0 / PI)
    }

    /// `(tau + L) rho_prox(h) + rho_grad(h) + rho_pi(h) ell`
    pub fn budget_nor(&self, h: f64) -> f64 {
        (self.tau + self.l_grad) * self.rho_prox.eval(h)
            + self.rho_grad.eval(h)
            + self.rho_pi.eval(h) * self.ell_grad
    }

    /// `rho_grad(h) / tau + rho_prox(h) + rho_pi(h) ell / tau`
    pub fn budget_can(&self, h: f64) -> f64 {
        self.rho_grad.eval(h) / self.tau
            + self.rho_prox.eval(h)
            + self.rho_pi.eval(h) * self.ell_grad / self.tau
    }

    /// `(ell + L_phi) rho_proj(h) + diam(W) [L rho_proj(h) + rho_pi(h) ell + rho_grad(h)]`
    pub fn budget_gap(&self, h: f64) -> f64 {
        (self.ell_grad + self.l_phi) * self.rho_proj.eval(h)
            + self.diam_w
                * (self.l_grad * self.rho_proj.eval(h)
                    + self.rho_pi.eval(h) * self.ell_grad
                    + self.rho_grad.eval(h))
    }
}

/// Reference measures and budgets at one mesh size.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticalityReport {
    pub h: f64,
    pub h_ref: f64,
    pub chi_nor: f64,
    pub chi_can: f64,
    pub chi_gap: f64,
    pub budget_nor: f64,
    pub budget_can: f64,
    pub budget_gap: f64,
    /// Discrete measures on the study mesh (not part of the CSV row).
    pub chi_nor_h: f64,
    pub chi_can_h: f64,
    pub chi_gap_h: f64,
}

impl CriticalityReport {
    pub const CSV_HEADER: [&'static str; 8] = [
        "h",
        "h_ref",
        "chi_nor",
        "chi_can",
        "chi_gap",
        "budget_nor",
        "budget_can",
        "budget_gap",
    ];

    pub fn csv_record(&self) -> [String; 8] {
        [
            self.h,
            self.h_ref,
            self.chi_nor,
            self.chi_can,
            self.chi_gap,
            self.budget_nor,
            self.budget_can,
            self.budget_gap,
        ]
        .map(|v| v.to_string())
    }

    /// `chi_ref <= chi_h + budget` for the normal map and canonical measures.
    pub fn satisfies_bounds(&self, slack: f64) -> (bool, bool) {
        (
            self.chi_nor <= self.chi_nor_h + self.budget_nor + slack,
            self.chi_can <= self.chi_can_h + self.budget_can + slack,
        )
    }
}
