//! Reduced tracking objectives `0.5 ||S_h(u) - y_target||^2` for three 1D
//! model equations with homogeneous Dirichlet conditions, discretized by P1
//! elements for the state and piecewise constants for the control:
//!
//! * linear:     `-y'' = u`
//! * semilinear: `-y'' + y^3 = u + g`
//! * bilinear:   `-y'' + u y = g`
//!
//! Gradients come from one adjoint solve with the transposed Jacobian.

use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::fe_space::{gauss3, gauss5, CellFn, Dg0Projection, NodalFn, SampledFn};
use crate::mesh::Mesh1D;
use crate::objective::{GradientField, SmoothObjective};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PdeKind {
    Linear,
    Semilinear,
    Bilinear,
}

impl PdeKind {
    /// Exponent of the gradient discretization error `C h^p`; the bilinear
    /// value is the conjectured linear rate.
    pub fn gradient_error_order(self) -> f64 {
        match self {
            PdeKind::Linear | PdeKind::Semilinear => 2.0,
            PdeKind::Bilinear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            PdeKind::Linear => "linear",
            PdeKind::Semilinear => "semilinear",
            PdeKind::Bilinear => "bilinear",
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NewtonSettings {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tol: 1e-12,
            max_iters: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct StateSolveReport {
    pub state: NodalFn,
    pub newton_iters: usize,
    /// Size of the last Newton correction relative to `1 + ||y||_inf`; zero
    /// for the linear equations, which are solved directly.
    pub residual_norm: f64,
}

#[derive(Debug, Clone)]
pub struct ReducedProblem {
    kind: PdeKind,
    target: SampledFn,
    source: SampledFn,
    state_mesh: Option<Arc<Mesh1D>>,
    newton: NewtonSettings,
}

/// Symmetric tridiagonal matrix on the interior nodes.
#[derive(Debug, Clone)]
struct Tridiagonal {
    diag: Vec<f64>,
    /// `off[i]` couples unknowns `i` and `i + 1`.
    off: Vec<f64>,
}

impl Tridiagonal {
    fn zeros(n: usize) -> Self {
        Tridiagonal {
            diag: vec![0.0; n],
            off: vec![0.0; n.saturating_sub(1)],
        }
    }

    /// Adds a 2x2 element matrix for the cell between nodes `k` and `k + 1`
    /// (full node numbering, boundary rows dropped).
    fn add_cell(&mut self, k: usize, n_cells: usize, a: [[f64; 2]; 2]) {
        let left = k >= 1;
        let right = k + 1 < n_cells;
        if left {
            self.diag[k - 1] += a[0][0];
        }
        if right {
            self.diag[k] += a[1][1];
        }
        if left && right {
            self.off[k - 1] += a[0][1];
        }
    }

    fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let mut s = self.diag[i] * x[i];
                if i > 0 {
                    s += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    s += self.off[i] * x[i + 1];
                }
                s
            })
            .collect()
    }

    /// Thomas algorithm without pivoting; the systems assembled here are
    /// symmetric positive definite for admissible data. Two steps of
    /// iterative refinement with an error-free residual remove most of the
    /// rounding error of the elimination on fine meshes.
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.diag.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        let (c, pivots) = self.factor()?;
        let sweep = |b: &[f64]| -> Vec<f64> {
            let mut d = vec![0.0; n];
            for i in 0..n {
                let prev = if i > 0 { self.off[i - 1] * d[i - 1] } else { 0.0 };
                d[i] = (b[i] - prev) / pivots[i];
            }
            for i in (0..n - 1).rev() {
                d[i] -= c[i] * d[i + 1];
            }
            d
        };
        let mut x = sweep(rhs);
        for _ in 0..2 {
            let r = self.residual(rhs, &x);
            for (xi, di) in x.iter_mut().zip(sweep(&r)) {
                *xi += di;
            }
        }
        Ok(x)
    }

    fn factor(&self) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.diag.len();
        let scale = self.diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let mut c = vec![0.0; n];
        let mut pivots = vec![0.0; n];
        for i in 0..n {
            let pivot = if i > 0 {
                self.diag[i] - self.off[i - 1] * c[i - 1]
            } else {
                self.diag[0]
            };
            if !(pivot > 1e-14 * scale) {
                return Err(Error::SingularSystem(format!(
                    "pivot {pivot:e} at row {i} (matrix not positive definite)"
                )));
            }
            if i + 1 < n {
                c[i] = self.off[i] / pivot;
            }
            pivots[i] = pivot;
        }
        Ok((c, pivots))
    }

    /// `b - A x` accumulated in double-double arithmetic.
    fn residual(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        let n = self.diag.len();
        (0..n)
            .map(|i| {
                let (mut hi, mut lo) = (b[i], 0.0);
                let mut add = |a: f64, v: f64| {
                    let p = -a * v;
                    let e = (-a).mul_add(v, -p);
                    let s = hi + p;
                    let bb = s - hi;
                    lo += (hi - (s - bb)) + (p - bb) + e;
                    hi = s;
                };
                add(self.diag[i], x[i]);
                if i > 0 {
                    add(self.off[i - 1], x[i - 1]);
                }
                if i + 1 < n {
                    add(self.off[i], x[i + 1]);
                }
                hi + lo
            })
            .collect()
    }
}

fn stiffness(mesh: &Mesh1D) -> Tridiagonal {
    let n = mesh.n_cells();
    let mut a = Tridiagonal::zeros(n - 1);
    for (k, &h) in mesh.cell_sizes().iter().enumerate() {
        let s = 1.0 / h;
        a.add_cell(k, n, [[s, -s], [-s, s]]);
    }
    a
}

/// Mass matrix weighted by a piecewise constant coefficient.
fn weighted_mass(mesh: &Mesh1D, coeff: &[f64]) -> Tridiagonal {
    let n = mesh.n_cells();
    let mut a = Tridiagonal::zeros(n - 1);
    for (k, &h) in mesh.cell_sizes().iter().enumerate() {
        let c = coeff[k] * h / 6.0;
        a.add_cell(k, n, [[2.0 * c, c], [c, 2.0 * c]]);
    }
    a
}

fn add(a: &mut Tridiagonal, b: &Tridiagonal) {
    a.diag.iter_mut().zip(&b.diag).for_each(|(x, y)| *x += y);
    a.off.iter_mut().zip(&b.off).for_each(|(x, y)| *x += y);
}

/// Load vector `(f, phi_i)` for piecewise constant `f`.
fn cell_load(mesh: &Mesh1D, f: &[f64]) -> Vec<f64> {
    let n = mesh.n_cells();
    let h = mesh.cell_sizes();
    (1..n).map(|i| 0.5 * (f[i - 1] * h[i - 1] + f[i] * h[i])).collect()
}

/// Load vector `(g, phi_i)` by five-point Gauss quadrature per cell.
fn sampled_load(mesh: &Mesh1D, g: &SampledFn) -> Vec<f64> {
    let n = mesh.n_cells();
    let mut b = vec![0.0; n + 1];
    for k in 0..n {
        let (x0, x1) = mesh.cell(k);
        for (x, w) in gauss5(x0, x1) {
            let t = (x - x0) / (x1 - x0);
            let gv = g.eval(x);
            b[k] += w * gv * (1.0 - t);
            b[k + 1] += w * gv * t;
        }
    }
    b[1..n].to_vec()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl ReducedProblem {
    pub fn new(kind: PdeKind, target: SampledFn, source: SampledFn) -> Self {
        ReducedProblem {
            kind,
            target,
            source,
            state_mesh: None,
            newton: NewtonSettings::default(),
        }
    }

    /// Solve states on a fixed mesh that refines every control mesh used.
    /// Without this, the state lives on the mesh of the control.
    pub fn with_state_mesh(mut self, mesh: Arc<Mesh1D>) -> Self {
        self.state_mesh = Some(mesh);
        self
    }

    pub fn with_newton(mut self, newton: NewtonSettings) -> Self {
        self.newton = newton;
        self
    }

    pub fn kind(&self) -> PdeKind {
        self.kind
    }

    pub fn target(&self) -> &SampledFn {
        &self.target
    }

    pub fn source(&self) -> &SampledFn {
        &self.source
    }

    /// Control represented on the state mesh.
    fn control_on_state_mesh(&self, u: &CellFn) -> Result<CellFn> {
        match &self.state_mesh {
            None => Ok(u.clone()),
            Some(m) => u.inject(m),
        }
    }

    fn check_mesh(mesh: &Mesh1D) -> Result<()> {
        if mesh.n_cells() < 2 {
            return Err(invalid("mesh", "state meshes need at least one interior node"));
        }
        Ok(())
    }

    /// Galerkin state `y_h = S_h(u)`.
    pub fn solve_state(&self, u: &CellFn) -> Result<StateSolveReport> {
        let uc = self.control_on_state_mesh(u)?;
        let mesh = uc.mesh().clone();
        Self::check_mesh(&mesh)?;
        let k = stiffness(&mesh);
        match self.kind {
            PdeKind::Linear => {
                let y = k.solve(&cell_load(&mesh, uc.values()))?;
                Ok(StateSolveReport {
                    state: NodalFn::new(mesh, y)?,
                    newton_iters: 0,
                    residual_norm: 0.0,
                })
            }
            PdeKind::Bilinear => {
                let mut a = k;
                add(&mut a, &weighted_mass(&mesh, uc.values()));
                let y = a.solve(&sampled_load(&mesh, &self.source))?;
                Ok(StateSolveReport {
                    state: NodalFn::new(mesh, y)?,
                    newton_iters: 0,
                    residual_norm: 0.0,
                })
            }
            PdeKind::Semilinear => {
                let mut b = cell_load(&mesh, uc.values());
                b.iter_mut()
                    .zip(sampled_load(&mesh, &self.source))
                    .for_each(|(x, g)| *x += g);
                self.newton_solve(&mesh, &k, &b)
            }
        }
    }

    /// `(y^3, phi_i)` and, optionally, the Jacobian `(3 y^2 phi_j, phi_i)`;
    /// three-point Gauss integrates both exactly.
    fn cubic_terms(mesh: &Mesh1D, y: &NodalFn, jacobian: bool) -> (Vec<f64>, Option<Tridiagonal>) {
        let n = mesh.n_cells();
        let mut r = vec![0.0; n + 1];
        let mut jac = jacobian.then(|| Tridiagonal::zeros(n - 1));
        for k in 0..n {
            let (x0, x1) = mesh.cell(k);
            let (y0, y1) = y.cell_ends(k);
            let mut e = [[0.0; 2]; 2];
            for (x, w) in gauss3(x0, x1) {
                let t = (x - x0) / (x1 - x0);
                let phi = [1.0 - t, t];
                let yv = y0 * phi[0] + y1 * phi[1];
                r[k] += w * yv.powi(3) * phi[0];
                r[k + 1] += w * yv.powi(3) * phi[1];
                for a in 0..2 {
                    for b in 0..2 {
                        e[a][b] += w * 3.0 * yv * yv * phi[a] * phi[b];
                    }
                }
            }
            if let Some(j) = jac.as_mut() {
                j.add_cell(k, n, e);
            }
        }
        (r[1..n].to_vec(), jac)
    }

    fn newton_solve(&self, mesh: &Arc<Mesh1D>, k: &Tridiagonal, b: &[f64]) -> Result<StateSolveReport> {
        let residual = |y: &NodalFn| -> Vec<f64> {
            let (cubic, _) = Self::cubic_terms(mesh, y, false);
            let ky = k.mul(y.nodal_values());
            ky.iter()
                .zip(&cubic)
                .zip(b)
                .map(|((a, c), f)| a + c - f)
                .collect()
        };
        let mut y = NodalFn::zeros(mesh.clone());
        let mut last = f64::INFINITY;
        for iter in 0..self.newton.max_iters {
            let (cubic, jac) = Self::cubic_terms(mesh, &y, true);
            let mut jac = jac.expect("requested");
            add(&mut jac, k);
            let ky = k.mul(y.nodal_values());
            let r: Vec<f64> = ky.iter().zip(&cubic).zip(b).map(|((a, c), f)| a + c - f).collect();
            let step = jac.solve(&r)?;
            let scale = 1.0 + inf_norm(y.nodal_values());
            last = inf_norm(&step) / scale;
            let r0 = l2(&r);
            if last <= self.newton.tol {
                let next: Vec<f64> = y.nodal_values().iter().zip(&step).map(|(a, s)| a - s).collect();
                return Ok(StateSolveReport {
                    state: NodalFn::new(mesh.clone(), next)?,
                    newton_iters: iter + 1,
                    residual_norm: last,
                });
            }
            // damped step: halve until the residual norm decreases
            let mut t = 1.0;
            let trial = loop {
                let cand: Vec<f64> = y
                    .nodal_values()
                    .iter()
                    .zip(&step)
                    .map(|(a, s)| a - t * s)
                    .collect();
                let cand = NodalFn::new(mesh.clone(), cand)?;
                if l2(&residual(&cand)) <= (1.0 - 1e-4 * t) * r0 || t < 1.0 / 1024.0 {
                    break cand;
                }
                t *= 0.5;
            };
            y = trial;
        }
        Err(Error::NewtonDiverged {
            iters: self.newton.max_iters,
            residual: last,
        })
    }

    /// Adjoint state `p_h` for the state `y`, solving the transposed
    /// linearized system with right-hand side `y_h - y_target`.
    pub fn solve_adjoint(&self, u: &CellFn, y: &NodalFn) -> Result<NodalFn> {
        let uc = self.control_on_state_mesh(u)?;
        let mesh = y.mesh().clone();
        let mut a = stiffness(&mesh);
        match self.kind {
            PdeKind::Linear => {}
            PdeKind::Semilinear => {
                let (_, jac) = Self::cubic_terms(&mesh, y, true);
                add(&mut a, &jac.expect("requested"));
            }
            PdeKind::Bilinear => add(&mut a, &weighted_mass(&mesh, uc.values())),
        }
        let ones = vec![1.0; mesh.n_cells()];
        let my = weighted_mass(&mesh, &ones).mul(y.nodal_values());
        let rhs: Vec<f64> = my
            .iter()
            .zip(sampled_load(&mesh, &self.target))
            .map(|(a, t)| a - t)
            .collect();
        NodalFn::new(mesh, a.solve(&rhs)?)
    }

    /// `0.5 ||y_h - y_target||^2` with five-point Gauss quadrature per cell.
    pub fn tracking_value(&self, y: &NodalFn) -> f64 {
        let mesh = y.mesh();
        0.5 * (0..mesh.n_cells())
            .map(|k| {
                let (x0, x1) = mesh.cell(k);
                let (y0, y1) = y.cell_ends(k);
                gauss5(x0, x1)
                    .iter()
                    .map(|&(x, w)| {
                        let t = (x - x0) / (x1 - x0);
                        w * (y0 + t * (y1 - y0) - self.target.eval(x)).powi(2)
                    })
                    .sum::<f64>()
            })
            .sum::<f64>()
    }

    pub fn objective(&self, u: &CellFn) -> Result<f64> {
        Ok(self.tracking_value(&self.solve_state(u)?.state))
    }

    /// Gradient field together with the state mesh cell averages of it.
    fn gradient_parts(&self, u: &CellFn) -> Result<(f64, GradientField, CellFn)> {
        let y = self.solve_state(u)?.state;
        let value = self.tracking_value(&y);
        let p = self.solve_adjoint(u, &y)?;
        let mesh = y.mesh().clone();
        let avg = match self.kind {
            PdeKind::Linear | PdeKind::Semilinear => CellFn::from_fn(mesh.clone(), |k| {
                let (a, b) = p.cell_ends(k);
                0.5 * (a + b)
            }),
            PdeKind::Bilinear => CellFn::from_fn(mesh.clone(), |k| {
                let (y0, y1) = y.cell_ends(k);
                let (p0, p1) = p.cell_ends(k);
                -(2.0 * y0 * p0 + y0 * p1 + y1 * p0 + 2.0 * y1 * p1) / 6.0
            }),
        };
        let field = match self.kind {
            PdeKind::Linear | PdeKind::Semilinear => GradientField::Nodal(p),
            PdeKind::Bilinear => GradientField::NegProduct(y, p),
        };
        Ok((value, field, avg))
    }

    /// `grad j_h(u) = Pi_h grad J_h(u)` on the mesh of `u`.
    pub fn gradient(&self, u: &CellFn) -> Result<CellFn> {
        let (_, _, avg) = self.gradient_parts(u)?;
        avg.project_dg0(u.mesh())
    }

    /// `C h^p` with the order of this equation.
    pub fn rho_grad(&self, constant: f64, h: f64) -> f64 {
        constant * h.powf(self.kind.gradient_error_order())
    }

    /// Smallest `C` with `||grad J_h(u) - grad J_ref(u)|| <= C h^p` over the
    /// given controls, each compared against the reference mesh.
    pub fn calibrate_gradient_constant(&self, controls: &[CellFn], reference: &Arc<Mesh1D>) -> Result<f64> {
        let p = self.kind.gradient_error_order();
        let mut c = 0.0f64;
        for u in controls {
            let err = SmoothObjective::gradient_error(self, u, reference)?;
            c = c.max(err / u.mesh().h().powf(p));
        }
        Ok(c)
    }
}

impl SmoothObjective for ReducedProblem {
    fn value(&self, u: &CellFn) -> Result<f64> {
        self.objective(u)
    }

    fn gradient(&self, u: &CellFn) -> Result<CellFn> {
        ReducedProblem::gradient(self, u)
    }

    fn value_and_gradient(&self, u: &CellFn) -> Result<(f64, CellFn)> {
        let (v, _, avg) = self.gradient_parts(u)?;
        Ok((v, avg.project_dg0(u.mesh())?))
    }

    fn gradient_field(&self, u: &CellFn) -> Result<GradientField> {
        Ok(self.gradient_parts(u)?.1)
    }

    fn gradient_error_order(&self) -> f64 {
        self.kind.gradient_error_order()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn zero() -> SampledFn {
        SampledFn::constant(0.0)
    }

    #[test]
    fn tridiagonal_solve_matches_product() {
        let t = Tridiagonal {
            diag: vec![4.0, 5.0, 6.0, 3.0],
            off: vec![1.0, -2.0, 0.5],
        };
        let x = vec![1.0, -1.0, 2.0, 0.25];
        let b = t.mul(&x);
        let sol = t.solve(&b).unwrap();
        for (a, e) in sol.iter().zip(&x) {
            assert_relative_eq!(a, e, epsilon = 1e-14);
        }
        let bad = Tridiagonal { diag: vec![1.0, 1.0], off: vec![1.0] };
        assert!(bad.solve(&[1.0, 1.0]).is_err());
    }

    #[test]
    fn linear_state_is_nodally_exact() {
        for n in [2, 7, 64] {
            let m = Mesh1D::uniform(n).unwrap();
            let p = ReducedProblem::new(PdeKind::Linear, zero(), zero());
            let y = p.solve_state(&CellFn::constant(m.clone(), 1.0)).unwrap().state;
            for (i, v) in y.nodal_values().iter().enumerate() {
                let x = m.edges()[i + 1];
                assert!((v - x * (1.0 - x) / 2.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn trivial_states() {
        let m = Mesh1D::uniform(16).unwrap();
        let semi = ReducedProblem::new(PdeKind::Semilinear, zero(), zero());
        let r = semi.solve_state(&CellFn::zeros(m.clone())).unwrap();
        assert!(r.state.nodal_values().iter().all(|&v| v == 0.0));

        let bil = ReducedProblem::new(PdeKind::Bilinear, zero(), SampledFn::constant(1.0));
        let lin = ReducedProblem::new(PdeKind::Linear, zero(), zero());
        let yb = bil.solve_state(&CellFn::zeros(m.clone())).unwrap().state;
        let yl = lin.solve_state(&CellFn::constant(m.clone(), 1.0)).unwrap().state;
        for (a, b) in yb.nodal_values().iter().zip(yl.nodal_values()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn semilinear_newton_converges() {
        let m = Mesh1D::uniform(128).unwrap();
        let g = SampledFn::new("g", |x| 10.0 * (8.0 * std::f64::consts::PI * x).cos());
        let p = ReducedProblem::new(PdeKind::Semilinear, zero(), g);
        let u = CellFn::from_fn(m.clone(), |k| 30.0 * ((k % 5) as f64 - 2.0));
        let r = p.solve_state(&u).unwrap();
        assert!(r.residual_norm <= 1e-12);
        assert!(r.newton_iters >= 2 && r.newton_iters < 50);

        let strict = p.clone().with_newton(NewtonSettings { tol: 1e-12, max_iters: 1 });
        assert!(matches!(strict.solve_state(&u), Err(Error::NewtonDiverged { .. })));
    }

    #[test]
    fn objective_values() {
        let m = Mesh1D::uniform(32).unwrap();
        let p = ReducedProblem::new(PdeKind::Linear, SampledFn::constant(1.0), zero());
        assert_relative_eq!(p.objective(&CellFn::zeros(m.clone())).unwrap(), 0.5, epsilon = 1e-15);

        // tracking the discrete state itself gives zero
        let u = CellFn::constant(m.clone(), 1.0);
        let y = ReducedProblem::new(PdeKind::Linear, zero(), zero()).solve_state(&u).unwrap().state;
        let yc = y.clone();
        let p = ReducedProblem::new(PdeKind::Linear, SampledFn::new("y_h", move |x| {
            use crate::fe_space::PiecewisePolynomial;
            yc.eval(x)
        }), zero());
        assert!(p.objective(&u).unwrap() <= 1e-28);
        assert!(p.gradient(&u).unwrap().max_abs() <= 1e-10);
    }

    #[test]
    fn linear_gradient_matches_green_function_oracle() {
        // The adjoint solves -p'' = I_h y with y = x(1-x)/2, and 1D P1 Galerkin
        // solutions are nodally exact, so p_h(x_i) = int G(x_i, s) I_h y(s) ds
        // with G(x, s) = min(x, s)(1 - max(x, s)); Simpson is exact per cell.
        let n = 16;
        let m = Mesh1D::uniform(n).unwrap();
        let p = ReducedProblem::new(PdeKind::Linear, zero(), zero());
        let g = p.gradient(&CellFn::constant(m.clone(), 1.0)).unwrap();
        let y = |x: f64| x * (1.0 - x) / 2.0;
        let green = |x: f64, s: f64| x.min(s) * (1.0 - x.max(s));
        let node = |i: usize| -> f64 {
            let xi = m.edges()[i];
            (0..n)
                .map(|k| {
                    let (a, b) = m.cell(k);
                    let iy = |s: f64| y(a) + (s - a) / (b - a) * (y(b) - y(a));
                    let f = |s: f64| green(xi, s) * iy(s);
                    (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
                })
                .sum()
        };
        // continuous adjoint p = (x - 2x^3 + x^4)/24 for comparison
        let anti = |x: f64| (x * x / 2.0 - x.powi(4) / 2.0 + x.powi(5) / 5.0) / 24.0;
        for k in 0..n {
            let avg = 0.5 * (node(k) + node(k + 1));
            assert!((g.values()[k] - avg).abs() <= 1e-15);
            let (a, b) = m.cell(k);
            let cont = (anti(b) - anti(a)) / (b - a);
            let err = (g.values()[k] - cont).abs();
            assert!(err <= m.h() * m.h() * 0.05);
        }
    }

    fn fd_check(problem: &ReducedProblem, n: usize, lo: f64, hi: f64, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Mesh1D::uniform(n).unwrap();
        for _ in 0..5 {
            let u = CellFn::from_fn(m.clone(), |_| rng.gen_range(lo..hi));
            let d = CellFn::from_fn(m.clone(), |_| rng.gen_range(-1.0..1.0));
            let g = problem.gradient(&u).unwrap();
            let eps = 1e-5;
            let fp = problem.objective(&u.axpy(eps, &d)).unwrap();
            let fm = problem.objective(&u.axpy(-eps, &d)).unwrap();
            let fd = (fp - fm) / (2.0 * eps);
            let ad = g.dot(&d);
            assert!((fd - ad).abs() <= 1e-6 * ad.abs().max(1e-8), "fd {fd} adjoint {ad}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let pi = std::f64::consts::PI;
        let target = SampledFn::new("t", move |x| 1.0 + (2.0 * pi * x).sin());
        let g = SampledFn::new("g", move |x| 10.0 * (8.0 * pi * x).cos() + 5.0);
        fd_check(&ReducedProblem::new(PdeKind::Linear, target.clone(), zero()), 24, -5.0, 5.0, 1);
        fd_check(&ReducedProblem::new(PdeKind::Semilinear, target.clone(), g.clone()), 24, -20.0, 20.0, 2);
        fd_check(&ReducedProblem::new(PdeKind::Bilinear, target, g), 24, 0.0, 15.0, 3);
    }

    #[test]
    fn coarse_controls_on_fine_state_mesh() {
        let coarse = Mesh1D::uniform(8).unwrap();
        let fine = coarse.refine_nested(4).unwrap();
        let target = SampledFn::new("t", |x| x * x);
        let p = ReducedProblem::new(PdeKind::Linear, target.clone(), zero()).with_state_mesh(fine.clone());
        let u = CellFn::from_fn(coarse.clone(), |k| k as f64 * 0.1);
        let direct = ReducedProblem::new(PdeKind::Linear, target, zero());
        let g_fine = direct.gradient(&u.inject(&fine).unwrap()).unwrap();
        let g = p.gradient(&u).unwrap();
        let expect = g_fine.project_dg0(&coarse).unwrap();
        for (a, b) in g.values().iter().zip(expect.values()) {
            assert_relative_eq!(a, b, epsilon = 1e-14);
        }
        assert_relative_eq!(p.objective(&u).unwrap(), direct.objective(&u.inject(&fine).unwrap()).unwrap());
    }

    #[test]
    fn objective_converges_under_refinement() {
        let target = SampledFn::new("t", |x| 100.0 * x * x);
        let p = ReducedProblem::new(PdeKind::Linear, target, zero());
        let u_of = |m: &Arc<Mesh1D>| SampledFn::new("u", |x| 1.0 - x).project_dg0(m).unwrap();
        let vals: Vec<f64> = [16, 32, 64, 128]
            .iter()
            .map(|&n| {
                let m = Mesh1D::uniform(n).unwrap();
                p.objective(&u_of(&m)).unwrap()
            })
            .collect();
        for w in vals.windows(3) {
            let order = ((w[0] - w[1]) / (w[1] - w[2])).abs().log2();
            assert!(order >= 1.9, "observed order {order}");
        }
    }

    #[test]
    fn bilinear_larger_potential_gives_smaller_state() {
        let m = Mesh1D::uniform(32).unwrap();
        let p = ReducedProblem::new(PdeKind::Bilinear, zero(), SampledFn::constant(1.0));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..10 {
            let u = CellFn::from_fn(m.clone(), |_| rng.gen_range(0.0..10.0));
            let bump = CellFn::from_fn(m.clone(), |_| rng.gen_range(0.0..5.0));
            let y0 = p.solve_state(&u).unwrap().state;
            let y1 = p.solve_state(&u.axpy(1.0, &bump)).unwrap().state;
            assert!(y1.l2_norm() <= y0.l2_norm());
        }
    }

    #[test]
    fn gradient_error_order_is_quadratic_for_linear() {
        let target = SampledFn::new("t", |x| 100.0 * x * x);
        let p = ReducedProblem::new(PdeKind::Linear, target, zero());
        let reference = Mesh1D::uniform(2048).unwrap();
        let errs: Vec<f64> = [16, 32, 64]
            .iter()
            .map(|&n| {
                let m = Mesh1D::uniform(n).unwrap();
                SmoothObjective::gradient_error(&p, &CellFn::constant(m, 1.0), &reference).unwrap()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((1.8..2.2).contains(&order), "order {order}");
        }
        let ctrl: Vec<CellFn> = [16, 32]
            .iter()
            .map(|&n| CellFn::constant(Mesh1D::uniform(n).unwrap(), 1.0))
            .collect();
        let c = p.calibrate_gradient_constant(&ctrl, &reference).unwrap();
        assert_relative_eq!(c, errs[0].max(errs[1] * 4.0) * 256.0, max_relative = 1e-12);
        assert_eq!(p.rho_grad(1.0, 0.25), 1.0 / 16.0);
        assert_eq!(p.rho_grad(3.0, 0.0), 0.0);
    }
}
