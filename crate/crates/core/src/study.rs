//! Mesh refinement studies: solve on a sequence of meshes, evaluate the
//! reference measures on one nested fine mesh, calibrate the error budget
//! and fit convergence rates.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::criticality::{
    chi_can_h, chi_can_ref, chi_gap_h, chi_gap_ref, chi_nor_h, chi_nor_ref, postprocess_u_bar, postprocess_v,
    CriticalityReport, ErrorBudget, Modulus,
};
use crate::error::{invalid, Error, Result};
use crate::fe_space::CellFn;
use crate::mesh::Mesh1D;
use crate::objective::SmoothObjective;
use crate::problems::{Problem, ProblemSpec};
use crate::solvers::{solve, SolveConfig, SolveResult};

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub problem: ProblemSpec,
    pub mesh_sizes: Vec<usize>,
    pub n_ref: usize,
    pub tau: f64,
    pub solver: SolveConfig,
    /// Random controls in `W_U` used to estimate the gradient constants.
    pub budget_samples: usize,
    pub seed: u64,
}

impl StudyConfig {
    /// Reference mesh with `64 * max(mesh_sizes)` cells.
    pub fn new(problem: ProblemSpec, mesh_sizes: Vec<usize>) -> Self {
        let n_ref = 64 * mesh_sizes.iter().copied().max().unwrap_or(1);
        StudyConfig {
            problem,
            mesh_sizes,
            n_ref,
            tau: 1.0,
            solver: SolveConfig::default(),
            budget_samples: 8,
            seed: 0x5eed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mesh_sizes.is_empty() {
            return Err(invalid("mesh_sizes", "must not be empty"));
        }
        if self.mesh_sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("mesh_sizes", "must be strictly increasing"));
        }
        if self.mesh_sizes[0] == 0 || self.n_ref == 0 {
            return Err(invalid("mesh_sizes", "sizes must be positive"));
        }
        if let Some(n) = self.mesh_sizes.iter().find(|&&n| !self.n_ref.is_multiple_of(n)) {
            return Err(invalid("n_ref", format!("{} is not a multiple of {n}", self.n_ref)));
        }
        if !(self.tau > 0.0) {
            return Err(invalid("tau", "must be > 0"));
        }
        self.solver.validate()
    }
}

/// Outcome of the pipeline at one mesh size.
#[derive(Debug, Clone)]
pub struct StudyPoint {
    pub n: usize,
    pub solve: SolveResult,
    pub report: CriticalityReport,
}

/// Least-squares fit of `log e = rate * log h + intercept`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub measure: String,
    pub rate: f64,
    pub intercept: f64,
    pub points: Vec<(f64, f64)>,
    /// Mesh widths whose value was exactly zero and left out of the fit.
    pub excluded_zeros: Vec<f64>,
    /// Root mean square of the log residuals.
    pub residual: f64,
}

impl RateFit {
    pub fn eval(&self, h: f64) -> f64 {
        self.intercept.exp() * h.powf(self.rate)
    }
}

/// Ordinary least squares on `(log h, log e)`; points with `e == 0` are
/// excluded and listed.
pub fn fit_rate(measure: &str, points: &[(f64, f64)]) -> Result<RateFit> {
    let mut used = Vec::new();
    let mut excluded_zeros = Vec::new();
    for &(h, e) in points {
        if !(h > 0.0) || !(e >= 0.0) || !e.is_finite() {
            return Err(invalid("points", format!("need h > 0 and finite e >= 0, got ({h}, {e})")));
        }
        if e == 0.0 {
            excluded_zeros.push(h);
        } else {
            used.push((h, e));
        }
    }
    if used.len() < 2 {
        return Err(Error::InsufficientData(used.len()));
    }
    let logs: Vec<(f64, f64)> = used.iter().map(|&(h, e)| (h.ln(), e.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("points", "all mesh widths are equal"));
    }
    let rate = sxy / sxx;
    let intercept = my - rate * mx;
    let residual = (logs.iter().map(|p| (p.1 - rate * p.0 - intercept).powi(2)).sum::<f64>() / n).sqrt();
    Ok(RateFit {
        measure: measure.to_string(),
        rate,
        intercept,
        points: used,
        excluded_zeros,
        residual,
    })
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub config: StudyConfig,
    pub points: Vec<StudyPoint>,
    pub reports: Vec<CriticalityReport>,
    pub rates: Vec<RateFit>,
    pub budget: ErrorBudget,
    /// Mesh sizes whose solve or evaluation failed, with the error message.
    pub failures: Vec<(usize, String)>,
    pub warnings: Vec<String>,
}

impl StudyResult {
    pub fn rate(&self, measure: &str) -> Option<&RateFit> {
        self.rates.iter().find(|r| r.measure == measure)
    }

    /// Whether every point converged and satisfies the normal map and
    /// canonical inequalities with the calibrated budget.
    pub fn all_bounds_hold(&self, slack: f64) -> bool {
        self.failures.is_empty()
            && self.points.iter().all(|p| {
                let (nor, can) = p.report.satisfies_bounds(slack);
                p.solve.converged && nor && can
            })
    }

    pub fn study_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CriticalityReport::CSV_HEADER)?;
        for r in &self.reports {
            w.write_record(r.csv_record())?;
        }
        into_string(w)
    }

    pub fn rates_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["measure", "rate", "intercept"])?;
        for r in &self.rates {
            w.write_record([r.measure.clone(), r.rate.to_string(), r.intercept.to_string()])?;
        }
        into_string(w)
    }

    /// Log-log scatter of the reference measures with their fitted lines.
    pub fn rates_svg(&self) -> String {
        let series: Vec<Series> = MEASURES
            .iter()
            .zip(["#1f77b4", "#d62728", "#2ca02c"])
            .map(|(&m, color)| {
                let pts = self
                    .reports
                    .iter()
                    .map(|r| (r.h, measure_value(r, m)))
                    .filter(|p| p.1 > 0.0)
                    .collect();
                (m, color, pts)
            })
            .collect();
        render_svg(&series, &self.rates)
    }

    /// Writes `study.csv`, `rates.csv` and `rates.svg` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("study.csv"), self.study_csv()?)?;
        fs::write(dir.join("rates.csv"), self.rates_csv()?)?;
        fs::write(dir.join("rates.svg"), self.rates_svg())?;
        Ok(())
    }
}

fn into_string(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub const MEASURES: [&str; 3] = ["nor", "can", "gap"];

fn measure_value(r: &CriticalityReport, measure: &str) -> f64 {
    match measure {
        "nor" => r.chi_nor,
        "can" => r.chi_can,
        _ => r.chi_gap,
    }
}

/// Per-point quantities feeding the budget calibration.
struct Samples {
    /// `||grad J_h(u) - grad J_ref(u)|| / h^p` at the study point.
    grad_const: f64,
    /// H1 norms of reference gradients.
    ell: f64,
    /// Difference quotients of the reference gradient.
    lip: f64,
}

struct PointOutput {
    point: StudyPoint,
    samples: Samples,
}

fn thread_pool() -> rayon::ThreadPool {
    let threads = std::env::var("CRITMEASURE_THREADS")
        .ok()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool")
}

/// `(||grad J_ref(a) - grad J_ref(b)|| / ||a - b||, max H1 norm)` for two
/// controls on the reference mesh; the quotient is 0 when `a == b`.
fn gradient_pair(f: &dyn SmoothObjective, a: &CellFn, b: &CellFn, reference: &Mesh1D) -> Result<(f64, f64)> {
    let ga = f.gradient_field(a)?;
    let gb = f.gradient_field(b)?;
    let ell = ga.h1_norm().max(gb.h1_norm());
    let dist = a.sub(b).l2_norm();
    let lip = if dist > 0.0 {
        ga.l2_distance(&gb, reference) / dist
    } else {
        0.0
    };
    Ok((lip, ell))
}

fn run_point(problem: &Problem, cfg: &StudyConfig, n: usize, reference: &Arc<Mesh1D>) -> Result<PointOutput> {
    let f = problem.objective.as_ref();
    let reg = &problem.regularizer;
    let tau = cfg.tau;
    let mesh = Mesh1D::uniform(n)?;
    let discrete = reg.discretize(&mesh)?;
    let result = solve(f, &discrete, &SolveConfig { tau, ..cfg.solver })?;
    let u = result.u_star.clone();
    let grad = f.gradient(&u)?;
    let v = postprocess_v(&u, &grad, tau);
    let u_bar = postprocess_u_bar(&u, reg, reference)?;

    let report = CriticalityReport {
        h: mesh.h(),
        h_ref: reference.h(),
        chi_nor: chi_nor_ref(f, reg, reference, tau, &v)?,
        chi_can: chi_can_ref(f, reg, reference, tau, &u)?,
        chi_gap: chi_gap_ref(f, reg, reference, &u_bar, 0.0)?,
        budget_nor: 0.0,
        budget_can: 0.0,
        budget_gap: 0.0,
        chi_nor_h: chi_nor_h(f, &discrete, tau, &v)?,
        chi_can_h: chi_can_h(f, &discrete, tau, &u)?,
        chi_gap_h: chi_gap_h(f, &discrete, &u, 0.0)?,
    };

    let p = f.gradient_error_order();
    let prox_h = discrete.prox(tau, &v)?;
    let grad_const = f
        .gradient_error(&u, reference)?
        .max(f.gradient_error(&prox_h, reference)?)
        / mesh.h().powf(p);
    let prox_ref = reg.prox_continuous_at_cellfn(tau, &v, reference)?;
    let (l1, e1) = gradient_pair(f, &prox_h.inject(reference)?, &prox_ref, reference)?;
    let (l2, e2) = gradient_pair(f, &u.inject(reference)?, &u_bar, reference)?;
    Ok(PointOutput {
        point: StudyPoint {
            n,
            solve: result,
            report,
        },
        samples: Samples {
            grad_const,
            ell: e1.max(e2),
            lip: l1.max(l2),
        },
    })
}

/// Random pairs of piecewise constant controls in
/// `W_U = [min l - 1, max u + 1]`, clipped at 0 from below for potential
/// terms that need nonnegative controls.
fn random_samples(problem: &Problem, cfg: &StudyConfig, reference: &Arc<Mesh1D>) -> Result<Samples> {
    let (lo, hi) = w_u(problem);
    let lo = if problem.id.pde_kind() == Some(crate::pde::PdeKind::Bilinear) {
        lo.max(0.0)
    } else {
        lo
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let coarse = Mesh1D::uniform(16)?;
    let pairs: Vec<(CellFn, CellFn)> = (0..cfg.budget_samples)
        .map(|_| {
            let a = CellFn::from_fn(coarse.clone(), |_| rng.gen_range(lo..=hi));
            let b = CellFn::from_fn(coarse.clone(), |_| rng.gen_range(lo..=hi));
            (a, b)
        })
        .collect();
    let corners = [CellFn::constant(coarse.clone(), lo), CellFn::constant(coarse.clone(), hi)];
    let f = problem.objective.as_ref();
    let mut out = Samples {
        grad_const: 0.0,
        ell: 0.0,
        lip: 0.0,
    };
    let evals: Vec<Result<(f64, f64)>> = pairs
        .par_iter()
        .map(|(a, b)| gradient_pair(f, &a.inject(reference)?, &b.inject(reference)?, reference))
        .chain(corners.par_iter().map(|c| {
            let c = c.inject(reference)?;
            gradient_pair(f, &c, &c, reference)
        }))
        .collect();
    for e in evals {
        let (lip, ell) = e?;
        out.lip = out.lip.max(lip);
        out.ell = out.ell.max(ell);
    }
    Ok(out)
}

/// Interval `[min l - 1, max u + 1]` containing all controls of interest.
pub fn w_u(problem: &Problem) -> (f64, f64) {
    let lo = problem.regularizer.lower().min_max(4096).0 - 1.0;
    let hi = problem.regularizer.upper().min_max(4096).1 + 1.0;
    (lo, hi)
}

pub fn run_study(cfg: &StudyConfig) -> Result<StudyResult> {
    cfg.validate()?;
    let problem = cfg.problem.build()?;
    let reference = Mesh1D::uniform(cfg.n_ref)?;

    let (outputs, extra) = thread_pool().install(|| {
        let outputs: Vec<(usize, Result<PointOutput>)> = cfg
            .mesh_sizes
            .par_iter()
            .map(|&n| (n, run_point(&problem, cfg, n, &reference)))
            .collect();
        (outputs, random_samples(&problem, cfg, &reference))
    });
    let extra = extra?;

    let mut points = Vec::new();
    let mut failures = Vec::new();
    let mut warnings = Vec::new();
    let (mut grad_const, mut ell, mut lip) = (0.0f64, extra.ell, extra.lip);
    for (n, out) in outputs {
        match out {
            Ok(o) => {
                if !o.point.solve.converged {
                    warnings.push(format!("n = {n}: solver stopped at max_iters without reaching tol"));
                }
                grad_const = grad_const.max(o.samples.grad_const);
                ell = ell.max(o.samples.ell);
                lip = lip.max(o.samples.lip);
                points.push(o.point);
            }
            Err(e) => failures.push((n, e.to_string())),
        }
    }

    let reg = &problem.regularizer;
    let rho_prox = Modulus::linear((reg.lower_h1() + reg.upper_h1()) / std::f64::consts::PI);
    let (lo, hi) = w_u(&problem);
    let budget = ErrorBudget {
        tau: cfg.tau,
        l_grad: lip,
        ell_grad: ell,
        l_phi: reg.l1_lipschitz(),
        diam_w: hi - lo,
        rho_pi: ErrorBudget::projection_modulus(),
        rho_prox,
        rho_grad: Modulus::new(grad_const, problem.objective.gradient_error_order())?,
        rho_proj: rho_prox,
    };
    budget.validate()?;
    for p in &mut points {
        let h = p.report.h;
        p.report.budget_nor = budget.budget_nor(h);
        p.report.budget_can = budget.budget_can(h);
        p.report.budget_gap = budget.budget_gap(h);
    }
    let reports: Vec<CriticalityReport> = points.iter().map(|p| p.report.clone()).collect();

    let mut rates = Vec::new();
    for m in MEASURES {
        let pts: Vec<(f64, f64)> = reports.iter().map(|r| (r.h, measure_value(r, m))).collect();
        match fit_rate(m, &pts) {
            Ok(fit) => {
                if !fit.excluded_zeros.is_empty() {
                    warnings.push(format!(
                        "chi_{m}: {} zero value(s) excluded from the fit",
                        fit.excluded_zeros.len()
                    ));
                }
                rates.push(fit);
            }
            Err(e) => warnings.push(format!("chi_{m}: no rate fit ({e})")),
        }
    }

    Ok(StudyResult {
        config: cfg.clone(),
        points,
        reports,
        rates,
        budget,
        failures,
        warnings,
    })
}

/// Measure name, stroke colour and `(h, value)` points.
type Series<'a> = (&'a str, &'a str, Vec<(f64, f64)>);

fn render_svg(series: &[Series], fits: &[RateFit]) -> String {
    let (w, hgt, margin) = (640.0, 480.0, 60.0);
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.2.iter().copied()).collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{hgt}" viewBox="0 0 {w} {hgt}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{w}" height="{hgt}" fill="white"/>"#);
    if all.is_empty() {
        let _ = writeln!(svg, r#"<text x="{margin}" y="{margin}">no positive data</text>"#);
        svg.push_str("</svg>\n");
        return svg;
    }
    let lx: Vec<f64> = all.iter().map(|p| p.0.log10()).collect();
    let ly: Vec<f64> = all.iter().map(|p| p.1.log10()).collect();
    let fmin = |v: &[f64]| v.iter().cloned().fold(f64::INFINITY, f64::min).floor();
    let fmax = |v: &[f64]| v.iter().cloned().fold(f64::NEG_INFINITY, f64::max).ceil();
    let (x0, mut x1, y0, mut y1) = (fmin(&lx), fmax(&lx), fmin(&ly), fmax(&ly));
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |lxv: f64| margin + (lxv - x0) / (x1 - x0) * (w - 2.0 * margin);
    let py = |lyv: f64| hgt - margin - (lyv - y0) / (y1 - y0) * (hgt - 2.0 * margin);

    let _ = writeln!(
        svg,
        r#"<rect x="{margin}" y="{margin}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - 2.0 * margin,
        hgt - 2.0 * margin
    );
    for d in (x0 as i32)..=(x1 as i32) {
        let x = px(d as f64);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.1}" y="{:.1}" font-size="12" text-anchor="middle">1e{d}</text>"#,
            hgt - margin + 18.0
        );
    }
    for d in (y0 as i32)..=(y1 as i32) {
        let y = py(d as f64);
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{y:.1}" font-size="12" text-anchor="end">1e{d}</text>"#,
            margin - 6.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="14" text-anchor="middle">h</text>"#,
        w / 2.0,
        hgt - 15.0
    );

    for (i, (name, color, pts)) in series.iter().enumerate() {
        for &(h, e) in pts {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="{color}"/>"#,
                px(h.log10()),
                py(e.log10())
            );
        }
        let label = match fits.iter().find(|f| f.measure == *name) {
            Some(fit) => {
                let (ha, hb) = pts.iter().fold((f64::INFINITY, 0.0f64), |(a, b), p| (a.min(p.0), b.max(p.0)));
                let _ = writeln!(
                    svg,
                    r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="1.5"/>"#,
                    px(ha.log10()),
                    py(fit.eval(ha).log10()),
                    px(hb.log10()),
                    py(fit.eval(hb).log10())
                );
                format!("chi_{name}: rate {:.3}", fit.rate)
            }
            None => format!("chi_{name}: no fit"),
        };
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" font-size="13" fill="{color}">{label}</text>"#,
            margin + 10.0,
            margin + 20.0 + 18.0 * i as f64
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::ProblemId;
    use approx::assert_relative_eq;

    #[test]
    fn exact_power_laws() {
        let hs = [0.25, 0.125, 0.0625];
        let lin: Vec<_> = hs.iter().map(|&h| (h, 0.25 * h)).collect();
        let fit = fit_rate("nor", &lin).unwrap();
        assert_relative_eq!(fit.rate, 1.0, epsilon = 1e-12);
        assert_relative_eq!(fit.intercept, 0.25f64.ln(), epsilon = 1e-12);
        assert!(fit.residual <= 1e-12);
        let quad: Vec<_> = hs.iter().map(|&h| (h, 3.0 * h * h)).collect();
        assert_relative_eq!(fit_rate("can", &quad).unwrap().rate, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn three_point_fit_matches_normal_equations() {
        let pts = [(0.25, 0.066), (0.125, 0.0312), (0.0625, 0.0159)];
        // log h is equispaced with step ln 2, so the slope is the difference
        // of the outer log values over 2 ln 2
        let expect = (0.066f64.ln() - 0.0159f64.ln()) / (2.0 * 2f64.ln());
        let fit = fit_rate("nor", &pts).unwrap();
        assert_relative_eq!(fit.rate, expect, epsilon = 1e-12);
        assert!((fit.rate - 1.03).abs() < 0.005);
    }

    #[test]
    fn zeros_are_excluded() {
        let fit = fit_rate("gap", &[(0.5, 0.0), (0.25, 0.1), (0.125, 0.05)]).unwrap();
        assert_eq!(fit.excluded_zeros, vec![0.5]);
        assert_eq!(fit.points.len(), 2);
        assert!(matches!(fit_rate("gap", &[(0.5, 0.0), (0.25, 0.1)]), Err(Error::InsufficientData(1))));
    }

    #[test]
    fn config_validation() {
        let spec = ProblemSpec::preset(ProblemId::ExampleLp);
        let mut cfg = StudyConfig::new(spec, vec![4, 8, 16]);
        assert_eq!(cfg.n_ref, 1024);
        assert!(cfg.validate().is_ok());
        cfg.n_ref = 1000;
        assert!(cfg.validate().is_err());
        cfg.n_ref = 1024;
        cfg.mesh_sizes = vec![8, 4];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn example_lp_study() {
        let spec = ProblemSpec::preset(ProblemId::ExampleLp);
        let mut cfg = StudyConfig::new(spec, vec![4, 8, 16, 32]);
        cfg.n_ref = 2048;
        let res = run_study(&cfg).unwrap();
        assert!(res.failures.is_empty());
        let nor = res.rate("nor").unwrap();
        assert!((0.98..=1.02).contains(&nor.rate), "rate {}", nor.rate);
        for w in res.reports.windows(2) {
            assert!(w[1].chi_nor < w[0].chi_nor);
        }
        for r in &res.reports {
            let exact = r.h / 12f64.sqrt() * (1.0 - (r.h_ref / r.h).powi(2)).sqrt();
            assert_relative_eq!(r.chi_nor, exact, max_relative = 1e-10);
            assert_relative_eq!(r.chi_can, exact, max_relative = 1e-10);
        }
        assert!(res.all_bounds_hold(1e-12));
        assert!(res.study_csv().unwrap().starts_with("h,h_ref,chi_nor,chi_can,chi_gap,budget_nor,budget_can,budget_gap\n"));
        assert!(res.rates_csv().unwrap().starts_with("measure,rate,intercept\nnor,"));
        assert!(res.rates_svg().contains("<svg"));
    }

    #[test]
    fn single_mesh_study_reports_without_fit() {
        let spec = ProblemSpec::preset(ProblemId::ExampleLp);
        let res = run_study(&StudyConfig::new(spec, vec![8])).unwrap();
        assert_eq!(res.reports.len(), 1);
        assert!(res.rates.is_empty());
        assert_eq!(res.warnings.len(), 3);
    }
}
