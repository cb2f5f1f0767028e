//! Smooth parts `f(u)` of composite problems as seen by the criticality
//! measures and solvers.

use std::sync::Arc;

use crate::error::Result;
use crate::fe_space::{gauss5, CellFn, Dg0Projection, NodalFn, PiecewisePolynomial, SampledFn};
use crate::mesh::Mesh1D;

/// A differentiable reduced objective evaluated at piecewise constant controls.
pub trait SmoothObjective: Send + Sync {
    /// `j_h(u)` on the mesh of `u`.
    fn value(&self, u: &CellFn) -> Result<f64>;

    /// The discrete gradient `Pi_h grad J_h(u)` on the mesh of `u`.
    fn gradient(&self, u: &CellFn) -> Result<CellFn>;

    fn value_and_gradient(&self, u: &CellFn) -> Result<(f64, CellFn)> {
        Ok((self.value(u)?, self.gradient(u)?))
    }

    /// The gradient before projection onto piecewise constants.
    fn gradient_field(&self, u: &CellFn) -> Result<GradientField>;

    /// Exponent `p` in the gradient discretization error model `C h^p`.
    fn gradient_error_order(&self) -> f64;

    /// `||grad J_h(u) - grad J_ref(u)||_{L2}` where the reference gradient is
    /// computed on a nested refinement of the mesh of `u`.
    fn gradient_error(&self, u: &CellFn, reference: &Arc<Mesh1D>) -> Result<f64> {
        let coarse = self.gradient_field(u)?;
        let fine = self.gradient_field(&u.inject(reference)?)?;
        Ok(coarse.l2_distance(&fine, reference))
    }
}

/// Unprojected gradient representations.
#[derive(Debug, Clone)]
pub enum GradientField {
    /// Mesh-independent gradient given analytically.
    Analytic(SampledFn),
    /// Adjoint state `p_h`.
    Nodal(NodalFn),
    /// `-y_h p_h` from a potential-type control term.
    NegProduct(NodalFn, NodalFn),
}

impl GradientField {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            GradientField::Analytic(f) => f.eval(x),
            GradientField::Nodal(p) => p.eval(x),
            GradientField::NegProduct(y, p) => {
                let k = y.mesh().locate(x);
                -y.eval_in_cell(k, x) * p.eval_in_cell(k, x)
            }
        }
    }

    /// L2 distance by five-point Gauss quadrature on `mesh`; exact when
    /// `mesh` refines the meshes of both fields.
    pub fn l2_distance(&self, other: &GradientField, mesh: &Mesh1D) -> f64 {
        (0..mesh.n_cells())
            .map(|k| {
                let (a, b) = mesh.cell(k);
                gauss5(a, b)
                    .iter()
                    .map(|&(x, w)| w * (self.eval(x) - other.eval(x)).powi(2))
                    .sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Full H1 norm `sqrt(||g||^2 + |g|_{H1}^2)`.
    pub fn h1_norm(&self) -> f64 {
        match self {
            GradientField::Analytic(f) => {
                let m = Mesh1D::uniform(256).expect("nonzero");
                let l2: f64 = (0..m.n_cells())
                    .map(|k| {
                        let (a, b) = m.cell(k);
                        gauss5(a, b).iter().map(|&(x, w)| w * f.eval(x).powi(2)).sum::<f64>()
                    })
                    .sum();
                (l2 + f.h1_seminorm().unwrap_or(f64::INFINITY).powi(2)).sqrt()
            }
            GradientField::Nodal(p) => (p.l2_norm().powi(2) + p.h1_seminorm().powi(2)).sqrt(),
            GradientField::NegProduct(y, p) => {
                let m = y.mesh();
                let mut total = 0.0;
                for k in 0..m.n_cells() {
                    let (a, b) = m.cell(k);
                    let hk = b - a;
                    let (y0, y1) = y.cell_ends(k);
                    let (p0, p1) = p.cell_ends(k);
                    let (dy, dp) = ((y1 - y0) / hk, (p1 - p0) / hk);
                    for (x, w) in gauss5(a, b) {
                        let t = (x - a) / hk;
                        let yv = y0 + t * (y1 - y0);
                        let pv = p0 + t * (p1 - p0);
                        total += w * ((yv * pv).powi(2) + (dy * pv + yv * dp).powi(2));
                    }
                }
                total.sqrt()
            }
        }
    }
}

/// `f(u) = (w, u)` with a fixed weight `w`; the gradient is `w` itself.
#[derive(Debug, Clone)]
pub struct LinearObjective {
    weight: SampledFn,
}

impl LinearObjective {
    pub fn new(weight: SampledFn) -> Self {
        LinearObjective { weight }
    }

    pub fn weight(&self) -> &SampledFn {
        &self.weight
    }
}

impl SmoothObjective for LinearObjective {
    fn value(&self, u: &CellFn) -> Result<f64> {
        Ok(self.weight.project_dg0(u.mesh())?.dot(u))
    }

    fn gradient(&self, u: &CellFn) -> Result<CellFn> {
        self.weight.project_dg0(u.mesh())
    }

    fn gradient_field(&self, _u: &CellFn) -> Result<GradientField> {
        Ok(GradientField::Analytic(self.weight.clone()))
    }

    fn gradient_error_order(&self) -> f64 {
        1.0
    }

    fn gradient_error(&self, _u: &CellFn, _reference: &Arc<Mesh1D>) -> Result<f64> {
        Ok(0.0)
    }
}
