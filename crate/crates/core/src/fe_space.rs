//! Discrete function spaces on a [`Mesh1D`].
//!
//! * [`CellFn`]: piecewise constants (the control space).
//! * [`NodalFn`]: continuous piecewise linears vanishing at 0 and 1 (the state space).
//! * [`SampledFn`]: analytic data evaluated pointwise before discretization.
//!
//! The L2 projection onto piecewise constants is the cell average; it is
//! provided for every kind of input through [`Dg0Projection`].

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::sync::Arc;

use crate::error::{invalid, Error, Result};
use crate::mesh::Mesh1D;

const GAUSS5_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GAUSS5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Five-point Gauss-Legendre rule mapped to `[a, b]`; exact up to degree 9.
pub fn gauss5(a: f64, b: f64) -> [(f64, f64); 5] {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut out = [(0.0, 0.0); 5];
    for (o, (x, w)) in out.iter_mut().zip(GAUSS5_NODES.iter().zip(GAUSS5_WEIGHTS)) {
        *o = (c + r * x, r * w);
    }
    out
}

/// Three-point Gauss-Legendre rule mapped to `[a, b]`; exact up to degree 5.
pub fn gauss3(a: f64, b: f64) -> [(f64, f64); 3] {
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let s = (0.6f64).sqrt();
    [
        (c - r * s, r * 5.0 / 9.0),
        (c, r * 8.0 / 9.0),
        (c + r * s, r * 5.0 / 9.0),
    ]
}

/// A real function on `[0, 1]` given by a closure.
#[derive(Clone)]
pub struct SampledFn {
    label: String,
    eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    constant: Option<f64>,
    h1_seminorm: Option<f64>,
}

impl SampledFn {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        SampledFn {
            label: label.into(),
            eval: Arc::new(f),
            constant: None,
            h1_seminorm: None,
        }
    }

    /// Constant function; its cell averages are reproduced exactly.
    pub fn constant(c: f64) -> Self {
        SampledFn {
            label: format!("constant({c})"),
            eval: Arc::new(move |_| c),
            constant: Some(c),
            h1_seminorm: Some(0.0),
        }
    }

    /// Attaches the H1 seminorm `|v|_{H^1(0,1)}`.
    pub fn with_seminorm(mut self, s: f64) -> Self {
        self.h1_seminorm = Some(s);
        self
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn as_constant(&self) -> Option<f64> {
        self.constant
    }

    pub fn h1_seminorm(&self) -> Option<f64> {
        self.h1_seminorm
    }

    /// Average over `[a, b]` by five-point Gauss quadrature.
    pub fn average(&self, a: f64, b: f64) -> f64 {
        if let Some(c) = self.constant {
            return c;
        }
        gauss5(a, b).iter().map(|&(x, w)| w * self.eval(x)).sum::<f64>() / (b - a)
    }

    pub fn min_max(&self, samples: usize) -> (f64, f64) {
        if let Some(c) = self.constant {
            return (c, c);
        }
        (0..=samples)
            .map(|i| self.eval(i as f64 / samples as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }
}

impl fmt::Debug for SampledFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SampledFn")
            .field("label", &self.label)
            .field("h1_seminorm", &self.h1_seminorm)
            .finish()
    }
}

/// Piecewise constant function, one value per cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFn {
    mesh: Arc<Mesh1D>,
    values: Vec<f64>,
}

impl CellFn {
    pub fn new(mesh: Arc<Mesh1D>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.n_cells() {
            return Err(invalid(
                "values",
                format!("expected {} cell values, got {}", mesh.n_cells(), values.len()),
            ));
        }
        Ok(CellFn { mesh, values })
    }

    pub fn constant(mesh: Arc<Mesh1D>, c: f64) -> Self {
        let n = mesh.n_cells();
        CellFn { mesh, values: vec![c; n] }
    }

    pub fn zeros(mesh: Arc<Mesh1D>) -> Self {
        Self::constant(mesh, 0.0)
    }

    pub fn from_fn(mesh: Arc<Mesh1D>, f: impl FnMut(usize) -> f64) -> Self {
        let values = (0..mesh.n_cells()).map(f).collect();
        CellFn { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh1D> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Cellwise map, keeping the mesh.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> CellFn {
        CellFn {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Cellwise combination with a function on the same mesh.
    pub fn zip_map(&self, other: &CellFn, f: impl Fn(f64, f64) -> f64) -> CellFn {
        debug_assert!(self.mesh.same_as(&other.mesh));
        CellFn {
            mesh: self.mesh.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self + alpha * other`
    pub fn axpy(&self, alpha: f64, other: &CellFn) -> CellFn {
        self.zip_map(other, |a, b| a + alpha * b)
    }

    pub fn sub(&self, other: &CellFn) -> CellFn {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, alpha: f64) -> CellFn {
        self.map(|v| alpha * v)
    }

    /// L2 inner product on a common mesh.
    pub fn dot(&self, other: &CellFn) -> f64 {
        debug_assert!(self.mesh.same_as(&other.mesh));
        self.mesh
            .cell_sizes()
            .iter()
            .zip(self.values.iter().zip(&other.values))
            .map(|(h, (a, b))| h * a * b)
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn l1_norm(&self) -> f64 {
        self.mesh
            .cell_sizes()
            .iter()
            .zip(&self.values)
            .map(|(h, v)| h * v.abs())
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Representation of the same function on a nested refinement.
    pub fn inject(&self, fine: &Arc<Mesh1D>) -> Result<CellFn> {
        if self.mesh.same_as(fine) {
            return Ok(self.clone());
        }
        let map = self.mesh.refinement_map(fine)?;
        Ok(CellFn {
            mesh: fine.clone(),
            values: map.iter().map(|&k| self.values[k]).collect(),
        })
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "x_left", "value"])?;
        for (k, v) in self.values.iter().enumerate() {
            w.write_record(&[k.to_string(), self.mesh.edges()[k].to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Continuous piecewise linear function with zero boundary values, stored
/// by its interior nodal values.
#[derive(Debug, Clone, PartialEq)]
pub struct NodalFn {
    mesh: Arc<Mesh1D>,
    nodal: Vec<f64>,
}

impl NodalFn {
    pub fn new(mesh: Arc<Mesh1D>, nodal: Vec<f64>) -> Result<Self> {
        if nodal.len() != mesh.n_interior_nodes() {
            return Err(invalid(
                "nodal_values",
                format!(
                    "expected {} interior values, got {}",
                    mesh.n_interior_nodes(),
                    nodal.len()
                ),
            ));
        }
        Ok(NodalFn { mesh, nodal })
    }

    pub fn zeros(mesh: Arc<Mesh1D>) -> Self {
        let n = mesh.n_interior_nodes();
        NodalFn { mesh, nodal: vec![0.0; n] }
    }

    /// Nodal interpolant of `f` (boundary values are ignored).
    pub fn interpolate(mesh: Arc<Mesh1D>, f: impl Fn(f64) -> f64) -> Self {
        let nodal = mesh.edges()[1..mesh.n_cells()].iter().map(|&x| f(x)).collect();
        NodalFn { mesh, nodal }
    }

    pub fn mesh(&self) -> &Arc<Mesh1D> {
        &self.mesh
    }

    pub fn nodal_values(&self) -> &[f64] {
        &self.nodal
    }

    /// Value at node `i` of the full node list `0..=n` (boundary nodes are zero).
    pub fn node(&self, i: usize) -> f64 {
        if i == 0 || i == self.mesh.n_cells() {
            0.0
        } else {
            self.nodal[i - 1]
        }
    }

    /// Endpoint values on cell `k`.
    pub fn cell_ends(&self, k: usize) -> (f64, f64) {
        (self.node(k), self.node(k + 1))
    }

    pub fn l2_norm(&self) -> f64 {
        (0..self.mesh.n_cells())
            .map(|k| {
                let (a, b) = self.cell_ends(k);
                self.mesh.cell_sizes()[k] / 3.0 * (a * a + a * b + b * b)
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn h1_seminorm(&self) -> f64 {
        (0..self.mesh.n_cells())
            .map(|k| {
                let (a, b) = self.cell_ends(k);
                (b - a).powi(2) / self.mesh.cell_sizes()[k]
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["index", "x_node", "value"])?;
        for (i, v) in self.nodal.iter().enumerate() {
            w.write_record(&[
                (i + 1).to_string(),
                self.mesh.edges()[i + 1].to_string(),
                v.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// A function that is polynomial on every cell of its mesh.
pub trait PiecewisePolynomial {
    fn mesh(&self) -> &Arc<Mesh1D>;

    /// Value at `x` using the polynomial piece of cell `k`.
    fn eval_in_cell(&self, k: usize, x: f64) -> f64;

    fn eval(&self, x: f64) -> f64 {
        self.eval_in_cell(self.mesh().locate(x), x)
    }
}

impl PiecewisePolynomial for CellFn {
    fn mesh(&self) -> &Arc<Mesh1D> {
        &self.mesh
    }

    fn eval_in_cell(&self, k: usize, _x: f64) -> f64 {
        self.values[k]
    }
}

impl PiecewisePolynomial for NodalFn {
    fn mesh(&self) -> &Arc<Mesh1D> {
        &self.mesh
    }

    fn eval_in_cell(&self, k: usize, x: f64) -> f64 {
        let (a, b) = self.mesh.cell(k);
        let (ya, yb) = self.cell_ends(k);
        let t = (x - a) / (b - a);
        ya + t * (yb - ya)
    }
}

/// Exact L2(0,1) inner product of two piecewise linear functions whose
/// meshes are nested (one refines the other).
pub fn l2_inner<A, B>(a: &A, b: &B) -> Result<f64>
where
    A: PiecewisePolynomial + ?Sized,
    B: PiecewisePolynomial + ?Sized,
{
    let (ma, mb) = (a.mesh(), b.mesh());
    let simpson = |fine: &Mesh1D, ka: &dyn Fn(usize) -> usize, kb: &dyn Fn(usize) -> usize| {
        (0..fine.n_cells())
            .map(|i| {
                let (x0, x1) = fine.cell(i);
                let xm = 0.5 * (x0 + x1);
                let (ia, ib) = (ka(i), kb(i));
                let f = |x: f64| a.eval_in_cell(ia, x) * b.eval_in_cell(ib, x);
                (x1 - x0) / 6.0 * (f(x0) + 4.0 * f(xm) + f(x1))
            })
            .sum::<f64>()
    };
    if ma.same_as(mb) {
        return Ok(simpson(ma, &|i| i, &|i| i));
    }
    if mb.n_cells() >= ma.n_cells() {
        let map = ma.refinement_map(mb)?;
        Ok(simpson(mb, &|i| map[i], &|i| i))
    } else {
        let map = mb.refinement_map(ma)?;
        Ok(simpson(ma, &|i| i, &|i| map[i]))
    }
}

/// The L2 projection onto piecewise constants on a mesh.
pub trait Dg0Projection {
    fn project_dg0(&self, mesh: &Arc<Mesh1D>) -> Result<CellFn>;
}

impl Dg0Projection for SampledFn {
    fn project_dg0(&self, mesh: &Arc<Mesh1D>) -> Result<CellFn> {
        let mut values = Vec::with_capacity(mesh.n_cells());
        for k in 0..mesh.n_cells() {
            let (a, b) = mesh.cell(k);
            let v = self.average(a, b);
            if !v.is_finite() {
                return Err(Error::NonFiniteQuadrature { cell: k });
            }
            values.push(v);
        }
        Ok(CellFn { mesh: mesh.clone(), values })
    }
}

impl Dg0Projection for NodalFn {
    fn project_dg0(&self, mesh: &Arc<Mesh1D>) -> Result<CellFn> {
        let own = CellFn::from_fn(self.mesh.clone(), |k| {
            let (a, b) = self.cell_ends(k);
            0.5 * (a + b)
        });
        own.project_dg0(mesh)
    }
}

impl Dg0Projection for CellFn {
    /// Averages onto a coarser mesh refined by `self.mesh()`.
    fn project_dg0(&self, mesh: &Arc<Mesh1D>) -> Result<CellFn> {
        if self.mesh.same_as(mesh) {
            return Ok(self.clone());
        }
        let map = mesh.refinement_map(&self.mesh)?;
        let mut acc = vec![0.0; mesh.n_cells()];
        for (i, &k) in map.iter().enumerate() {
            acc[k] += self.mesh.cell_sizes()[i] * self.values[i];
        }
        for (v, h) in acc.iter_mut().zip(mesh.cell_sizes()) {
            *v /= h;
        }
        Ok(CellFn { mesh: mesh.clone(), values: acc })
    }
}

/// Upper bound `(1/pi) h |v|_{H^1}` on `||Pi_h v - v||_{L2}`.
pub fn projection_error_bound(v: &SampledFn, mesh: &Mesh1D) -> Result<f64> {
    let s = v
        .h1_seminorm()
        .ok_or_else(|| Error::MissingSeminorm(v.label().to_string()))?;
    Ok(mesh.h() * s / PI)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sin2pi() -> SampledFn {
        SampledFn::new("sin(2 pi x)", |x| (2.0 * PI * x).sin()).with_seminorm(2f64.sqrt() * PI)
    }

    #[test]
    fn projection_of_constants_and_linears() {
        let m = Mesh1D::uniform(7).unwrap();
        let c = SampledFn::constant(3.25).project_dg0(&m).unwrap();
        assert!(c.values().iter().all(|&v| v == 3.25));

        let m2 = Mesh1D::uniform(2).unwrap();
        let x = SampledFn::new("x", |x| x).project_dg0(&m2).unwrap();
        assert_relative_eq!(x.values()[0], 0.25, epsilon = 1e-15);
        assert_relative_eq!(x.values()[1], 0.75, epsilon = 1e-15);
    }

    #[test]
    fn projection_of_sine_matches_antiderivative() {
        let m = Mesh1D::uniform(4).unwrap();
        let p = sin2pi().project_dg0(&m).unwrap();
        for k in 0..4 {
            let (a, b) = m.cell(k);
            // antiderivative -cos(2 pi x) / (2 pi)
            let exact = ((2.0 * PI * a).cos() - (2.0 * PI * b).cos()) / (2.0 * PI) / (b - a);
            assert_relative_eq!(p.values()[k], exact, epsilon = 1e-9);
        }
        assert_relative_eq!(p.values()[0], 2.0 / PI, epsilon = 1e-9);
    }

    #[test]
    fn inner_products() {
        let m2 = Mesh1D::uniform(2).unwrap();
        let one = CellFn::constant(m2.clone(), 1.0);
        assert_relative_eq!(l2_inner(&one, &one).unwrap(), 1.0);

        let x = NodalFn::new(m2.clone(), vec![0.5]).unwrap();
        // the interpolant of x on uniform(2) with zero boundary is the hat; its integral is 1/4
        assert_relative_eq!(l2_inner(&x, &one).unwrap(), 0.25, epsilon = 1e-15);

        let odd = CellFn::new(m2.clone(), vec![1.0, -1.0]).unwrap();
        assert_relative_eq!(l2_inner(&odd, &x).unwrap(), 0.0, epsilon = 1e-15);

        // mixed meshes: coarse hat against fine piecewise constant
        let m8 = Mesh1D::uniform(8).unwrap();
        let fine_one = CellFn::constant(m8.clone(), 1.0);
        assert_relative_eq!(l2_inner(&x, &fine_one).unwrap(), 0.25, epsilon = 1e-15);
        let m3 = Mesh1D::uniform(3).unwrap();
        assert!(l2_inner(&CellFn::constant(m3, 1.0), &x).is_err());
    }

    #[test]
    fn linear_function_integrates_to_half() {
        // x on [0,1] does not vanish at 1, so use a fine cell representation.
        let m = Mesh1D::uniform(2).unwrap();
        let x = SampledFn::new("x", |x| x).project_dg0(&m).unwrap();
        let one = CellFn::constant(m, 1.0);
        assert_relative_eq!(l2_inner(&x, &one).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn norms_of_nodal_functions() {
        let m = Mesh1D::uniform(4).unwrap();
        let hat = NodalFn::new(m.clone(), vec![0.0, 1.0, 0.0]).unwrap();
        // hat of width 0.5 and height 1: ||.||^2 = 2 * h / 3, |.|^2 = 2 / h
        assert_relative_eq!(hat.l2_norm().powi(2), 2.0 * 0.25 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(hat.h1_seminorm().powi(2), 8.0, epsilon = 1e-14);
        assert_relative_eq!(l2_inner(&hat, &hat).unwrap(), hat.l2_norm().powi(2), epsilon = 1e-15);
    }

    #[test]
    fn projection_error_bounds() {
        let m = Mesh1D::uniform(4).unwrap();
        assert_eq!(projection_error_bound(&SampledFn::constant(2.0), &m).unwrap(), 0.0);
        let x = SampledFn::new("x", |x| x).with_seminorm(1.0);
        assert_relative_eq!(projection_error_bound(&x, &m).unwrap(), 0.25 / PI);
        let m10 = Mesh1D::uniform(10).unwrap();
        assert_relative_eq!(
            projection_error_bound(&sin2pi(), &m10).unwrap(),
            0.1 * 2f64.sqrt(),
            epsilon = 1e-15
        );
        assert!(projection_error_bound(&SampledFn::new("bare", |x| x), &m).is_err());
    }

    #[test]
    fn projection_error_for_identity_is_h_over_2sqrt3() {
        for n in [4, 16, 64] {
            let m = Mesh1D::uniform(n).unwrap();
            let p = SampledFn::new("x", |x| x).project_dg0(&m).unwrap();
            // ||Pi_h x - x||^2 = sum_K int_K (x - c_K)^2 evaluated in closed form
            let err2: f64 = (0..n)
                .map(|k| {
                    let (a, b) = m.cell(k);
                    let c = p.values()[k];
                    ((b - c).powi(3) - (a - c).powi(3)) / 3.0
                })
                .sum();
            let h = m.h();
            assert_relative_eq!(err2.sqrt(), h / (2.0 * 3f64.sqrt()), max_relative = 1e-10);
            assert!(err2.sqrt() <= h / PI);
        }
    }

    #[test]
    fn fine_to_coarse_projection_and_injection() {
        let m = Mesh1D::uniform(3).unwrap();
        let fine = m.refine_nested(5).unwrap();
        let u = CellFn::new(m.clone(), vec![1.5, -2.0, 0.25]).unwrap();
        let back = u.inject(&fine).unwrap().project_dg0(&m).unwrap();
        for (a, b) in back.values().iter().zip(u.values()) {
            assert!((a - b).abs() <= 1e-14 * b.abs().max(1.0));
        }
        assert!(u.inject(&Mesh1D::uniform(4).unwrap()).is_err());
    }

    #[test]
    fn csv_output() {
        let m = Mesh1D::uniform(2).unwrap();
        let mut buf = Vec::new();
        CellFn::new(m.clone(), vec![1.0, 2.0]).unwrap().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,x_left,value\n0,0,1\n1,0.5,2\n");
        let mut buf = Vec::new();
        NodalFn::new(m, vec![0.125]).unwrap().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "index,x_node,value\n1,0.5,0.125\n");
    }
}
