//! Producers of approximate discrete critical points: a proximal gradient
//! method stopped on the canonical measure and a conditional gradient
//! (Frank-Wolfe) method stopped on the gap function.

use std::io::Write;

use crate::criticality::{chi_can_with_gradient, chi_gap_with_gradient};
use crate::error::{invalid, Result};
use crate::fe_space::CellFn;
use crate::objective::SmoothObjective;
use crate::regularizer::DiscreteRegularizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ProxGrad,
    FrankWolfe,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// Constant step size, typically `1 / L`.
    Fixed(f64),
    /// Backtracking with shrink `factor` and sufficient decrease constant `c`.
    Backtracking { factor: f64, c: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeasureKind {
    Nor,
    Can,
    Gap,
}

impl MeasureKind {
    pub fn name(self) -> &'static str {
        match self {
            MeasureKind::Nor => "nor",
            MeasureKind::Can => "can",
            MeasureKind::Gap => "gap",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub method: Method,
    pub tau: f64,
    pub tol: f64,
    pub max_iters: usize,
    pub step_rule: StepRule,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            method: Method::ProxGrad,
            tau: 1.0,
            tol: 1e-10,
            max_iters: 5000,
            step_rule: StepRule::Backtracking { factor: 0.5, c: 1e-4 },
        }
    }
}

impl SolveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(invalid("tol", "must be > 0"));
        }
        if self.max_iters == 0 {
            return Err(invalid("max_iters", "must be >= 1"));
        }
        if !(self.tau > 0.0) {
            return Err(invalid("tau", "must be > 0"));
        }
        match self.step_rule {
            StepRule::Fixed(s) if !(s > 0.0) => Err(invalid("step", "fixed step must be > 0")),
            StepRule::Backtracking { factor, c } if !(factor > 0.0 && factor < 1.0 && c > 0.0) => {
                Err(invalid("step", "backtracking needs 0 < factor < 1 and c > 0"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub u_star: CellFn,
    pub iters: usize,
    pub final_measure: f64,
    pub measure_kind: MeasureKind,
    /// `f(u_k) + psi_h(u_k)` including the initial point.
    pub objective_trace: Vec<f64>,
    pub measure_trace: Vec<f64>,
    pub converged: bool,
}

impl SolveResult {
    /// Trace as CSV with columns `iter,objective,measure`.
    pub fn write_trace_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["iter", "objective", "measure"])?;
        for (i, (o, m)) in self.objective_trace.iter().zip(&self.measure_trace).enumerate() {
            w.write_record(&[i.to_string(), o.to_string(), m.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn solve(f: &dyn SmoothObjective, reg: &DiscreteRegularizer, cfg: &SolveConfig) -> Result<SolveResult> {
    match cfg.method {
        Method::ProxGrad => prox_grad(f, reg, cfg),
        Method::FrankWolfe => frank_wolfe(f, reg, cfg),
    }
}

/// Forward-backward iteration `u+ = prox_{s psi_h}(u - s grad f(u))`,
/// started at the box projection of zero and stopped once
/// `chi_can_h(u; tau) <= tol`.
pub fn prox_grad(f: &dyn SmoothObjective, reg: &DiscreteRegularizer, cfg: &SolveConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let tau = cfg.tau;
    let mut u = reg.project(&CellFn::zeros(reg.mesh().clone()))?;
    let (mut fu, mut g) = f.value_and_gradient(&u)?;
    let mut objective_trace = vec![fu + reg.phi(&u)];
    let mut measure_trace = Vec::new();
    let mut step = 1.0 / tau;
    let mut best = (f64::INFINITY, u.clone());

    for iter in 0..cfg.max_iters {
        let measure = chi_can_with_gradient(reg, tau, &u, &g)?;
        measure_trace.push(measure);
        if measure < best.0 {
            best = (measure, u.clone());
        }
        if measure <= cfg.tol {
            return Ok(SolveResult {
                u_star: u,
                iters: iter,
                final_measure: measure,
                measure_kind: MeasureKind::Can,
                objective_trace,
                measure_trace,
                converged: true,
            });
        }
        let current = fu + reg.phi(&u);
        let (next, f_next, g_next) = match cfg.step_rule {
            StepRule::Fixed(s) => {
                let next = reg.prox(1.0 / s, &u.axpy(-s, &g))?;
                let (fv, gv) = f.value_and_gradient(&next)?;
                (next, fv, gv)
            }
            StepRule::Backtracking { factor, c } => {
                // try a longer step first, then shrink until sufficient decrease
                let mut s = (step / factor).min(1e8);
                let noise = 64.0 * f64::EPSILON * current.abs().max(1.0);
                loop {
                    let next = reg.prox(1.0 / s, &u.axpy(-s, &g))?;
                    let fv = f.value(&next)?;
                    let moved = next.sub(&u).l2_norm();
                    let decrease = c / s * moved * moved;
                    let accept = if s < 1e-12 {
                        true
                    } else if decrease > noise {
                        fv + reg.phi(&next) <= current - decrease
                    } else {
                        // decrease below rounding of F: test the local Lipschitz
                        // constant of the gradient instead
                        let gv = f.gradient(&next)?;
                        if gv.sub(&g).l2_norm() * s <= moved {
                            step = s;
                            break (next, fv, gv);
                        }
                        false
                    };
                    if accept {
                        step = s;
                        let gv = f.gradient(&next)?;
                        break (next, fv, gv);
                    }
                    s *= factor;
                }
            }
        };
        u = next;
        fu = f_next;
        g = g_next;
        objective_trace.push(fu + reg.phi(&u));
    }
    let measure = chi_can_with_gradient(reg, tau, &u, &g)?;
    measure_trace.push(measure);
    if measure < best.0 {
        best = (measure, u);
    }
    Ok(SolveResult {
        u_star: best.1,
        iters: cfg.max_iters,
        final_measure: best.0,
        measure_kind: MeasureKind::Can,
        objective_trace,
        measure_trace,
        converged: best.0 <= cfg.tol,
    })
}

/// Conditional gradient method with the cellwise linear minimization
/// oracle over the discretized box, stopped once `chi_gap_h(u) <= tol`.
///
/// The step is the best of the open-loop step `2/(k+2)`, the full step and
/// the minimizer of a quadratic model along the segment; the model is exact
/// for quadratic `f`.
pub fn frank_wolfe(f: &dyn SmoothObjective, reg: &DiscreteRegularizer, cfg: &SolveConfig) -> Result<SolveResult> {
    cfg.validate()?;
    let composite = |u: &CellFn| -> Result<f64> { Ok(f.value(u)? + reg.phi(u)) };
    let mut u = reg.project(&CellFn::zeros(reg.mesh().clone()))?;
    let (fu, mut g) = f.value_and_gradient(&u)?;
    let mut fval = fu + reg.phi(&u);
    let mut objective_trace = vec![fval];
    let mut measure_trace = Vec::new();

    for k in 0..cfg.max_iters {
        let gap = chi_gap_with_gradient(reg, &u, &g, 0.0);
        measure_trace.push(gap);
        if gap <= cfg.tol {
            return Ok(SolveResult {
                u_star: u,
                iters: k,
                final_measure: gap,
                measure_kind: MeasureKind::Gap,
                objective_trace,
                measure_trace,
                converged: true,
            });
        }
        let vertex = reg.linear_minimizer(&g);
        let dir = vertex.sub(&u);
        let f_full = composite(&vertex)?;
        // f(u + d) - f(u) - (g, d) is the curvature term of the quadratic model
        let curvature = f.value(&vertex)? - (fval - reg.phi(&u)) - g.dot(&dir);
        let mut candidates = vec![(1.0, f_full)];
        let open_loop = 2.0 / (k as f64 + 2.0);
        if open_loop < 1.0 {
            candidates.push((open_loop, composite(&u.axpy(open_loop, &dir))?));
        }
        if curvature > 0.0 {
            let t = (gap / (2.0 * curvature)).clamp(0.0, 1.0);
            if t > 0.0 && t < 1.0 {
                candidates.push((t, composite(&u.axpy(t, &dir))?));
            }
        }
        let (t, value) = candidates
            .into_iter()
            .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
            .expect("nonempty");
        u = if t == 1.0 { vertex } else { u.axpy(t, &dir) };
        fval = value;
        g = f.gradient(&u)?;
        objective_trace.push(fval);
    }
    let gap = chi_gap_with_gradient(reg, &u, &g, 0.0);
    measure_trace.push(gap);
    Ok(SolveResult {
        u_star: u,
        iters: cfg.max_iters,
        final_measure: gap,
        measure_kind: MeasureKind::Gap,
        objective_trace,
        measure_trace,
        converged: gap <= cfg.tol,
    })
}
