//! The `critmeasure` command line: `solve`, `study`, `verify` and
//! `example-lp`.
//!
//! Exit codes: 0 when every check passes, 1 when a check fails or a
//! computation errors, 2 for invalid command lines or configuration.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{parse_entries, parse_override, Config};
use crate::criticality::{chi_can_h, chi_can_ref, chi_nor_h, chi_nor_ref, postprocess_v, CriticalityReport};
use crate::error::{Error, Result};
use crate::mesh::Mesh1D;
use crate::problems::{Problem, ProblemId};
use crate::solvers::solve;
use crate::study::run_study;
use crate::verify::{run_all, VerifyConfig};

#[derive(Debug, Parser)]
#[command(
    name = "critmeasure",
    version,
    about = "Criticality measures and discretization error budgets for 1D composite control problems"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one instance and print its criticality report.
    Solve(CommonArgs),
    /// Run a mesh refinement study and fit convergence rates.
    Study(CommonArgs),
    /// Run the randomized inequality and oracle suites.
    Verify(CommonArgs),
    /// Compare the measures of the example linear program with their exact values.
    ExampleLp(CommonArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Pg,
    Fw,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Configuration file with [problem], [regularizer], [solver] and [study] sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Mesh size for `solve`; comma separated mesh sizes for `study` and `example-lp`.
    #[arg(long)]
    n: Option<String>,
    /// Cells of the reference mesh (default 64 times the largest mesh size).
    #[arg(long = "n-ref")]
    n_ref: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    /// Output directory for CSV and SVG files.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// linear, semilinear, bilinear or example-lp.
    #[arg(long)]
    problem: Option<String>,
    /// Configuration override `section.key=value`; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

/// Runs the command line with process stdout and stderr.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if code == 0 {
                write!(out, "{}", e.render())
            } else {
                write!(err, "{}", e.render())
            };
            return code;
        }
    };
    let (name, args) = match &cli.command {
        Command::Solve(a) => ("solve", a),
        Command::Study(a) => ("study", a),
        Command::Verify(a) => ("verify", a),
        Command::ExampleLp(a) => ("example-lp", a),
    };
    let (cfg, mesh_sizes_given) = match load_config(name, args) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return 2;
        }
    };
    let result = match name {
        "solve" => cmd_solve(&cfg, out, err),
        "study" => cmd_study(&cfg, out, err),
        "verify" => cmd_verify(&cfg, out),
        _ => cmd_example_lp(&cfg, mesh_sizes_given, out),
    };
    match result {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if is_config_error(&e) {
                2
            } else {
                1
            }
        }
    }
}

fn is_config_error(e: &Error) -> bool {
    matches!(
        e,
        Error::Config(_) | Error::UnknownKey(_) | Error::InvalidParameter { .. } | Error::MissingSeminorm(_)
    )
}

/// Merges the config file, flags and `--set` overrides; also reports
/// whether mesh sizes were given explicitly.
fn load_config(command: &str, args: &CommonArgs) -> Result<(Config, bool)> {
    let mut entries = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
            parse_entries(&text)?
        }
        None => Vec::new(),
    };
    let mut push = |k: &str, v: String| entries.push((k.to_string(), v));
    if command == "example-lp" {
        push("problem.name", "example_lp".into());
    }
    if let Some(p) = &args.problem {
        if command == "example-lp" && p.parse::<ProblemId>()? != ProblemId::ExampleLp {
            return Err(Error::Config("example-lp only runs the example_lp problem".into()));
        }
        push("problem.name", p.clone());
    }
    if let Some(n) = &args.n {
        let key = if command == "solve" { "study.n" } else { "study.mesh_sizes" };
        push(key, n.clone());
    }
    if let Some(v) = args.n_ref {
        push("study.n_ref", v.to_string());
    }
    if let Some(v) = args.tau {
        push("solver.tau", v.to_string());
    }
    if let Some(v) = args.tol {
        push("solver.tol", v.to_string());
    }
    if let Some(m) = args.method {
        let v = match m {
            MethodArg::Pg => "pg",
            MethodArg::Fw => "fw",
        };
        push("solver.method", v.into());
    }
    if let Some(o) = &args.out {
        push("study.out", o.display().to_string());
    }
    for s in &args.set {
        entries.push(parse_override(s)?);
    }
    let given = entries.iter().any(|(k, _)| k == "study.mesh_sizes");
    Ok((Config::from_entries(&entries)?, given))
}

fn print_report_table(out: &mut dyn Write, rows: &[(usize, &CriticalityReport)]) -> Result<()> {
    writeln!(
        out,
        "{:>7} {:>12} {:>12} {:>12} {:>12} {:>12} {:>12}",
        "n", "chi_nor", "chi_can", "chi_gap", "budget_nor", "budget_can", "budget_gap"
    )?;
    for (n, r) in rows {
        writeln!(
            out,
            "{:>7} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e}",
            n, r.chi_nor, r.chi_can, r.chi_gap, r.budget_nor, r.budget_can, r.budget_gap
        )?;
    }
    Ok(())
}

fn cmd_solve(cfg: &Config, out: &mut dyn Write, err: &mut dyn Write) -> Result<bool> {
    let mut study = Config {
        mesh_sizes: vec![cfg.n],
        ..cfg.clone()
    }
    .study();
    if cfg.n_ref.is_none() {
        study.n_ref = 64 * cfg.n;
    }
    let res = run_study(&study)?;
    if let Some((_, msg)) = res.failures.first() {
        writeln!(err, "solve failed: {msg}")?;
        return Ok(false);
    }
    let p = &res.points[0];
    writeln!(
        out,
        "problem {} n {} n_ref {} method {:?} iters {} converged {} final measure {:.3e}",
        cfg.problem.id,
        cfg.n,
        study.n_ref,
        cfg.solver.method,
        p.solve.iters,
        p.solve.converged,
        p.solve.final_measure
    )?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CriticalityReport::CSV_HEADER)?;
    w.write_record(p.report.csv_record())?;
    let row = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.write_all(&row)?;
    if let Some(dir) = &cfg.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.csv"), &row)?;
        p.solve.u_star.write_csv(fs::File::create(dir.join("u_star.csv"))?)?;
        p.solve.write_trace_csv(fs::File::create(dir.join("trace.csv"))?)?;
        writeln!(out, "wrote {}", dir.display())?;
    }
    let (nor, can) = p.report.satisfies_bounds(0.0);
    for w in &res.warnings {
        writeln!(err, "warning: {w}")?;
    }
    Ok(p.solve.converged && nor && can)
}

fn cmd_study(cfg: &Config, out: &mut dyn Write, err: &mut dyn Write) -> Result<bool> {
    let study = cfg.study();
    let res = run_study(&study)?;
    writeln!(out, "problem {} n_ref {}", cfg.problem.id, study.n_ref)?;
    let rows: Vec<_> = res.points.iter().map(|p| (p.n, &p.report)).collect();
    print_report_table(out, &rows)?;
    for fit in &res.rates {
        writeln!(out, "rate chi_{}: {:.4} (intercept {:.4})", fit.measure, fit.rate, fit.intercept)?;
    }
    for (n, msg) in &res.failures {
        writeln!(err, "n = {n} failed: {msg}")?;
    }
    for w in &res.warnings {
        writeln!(err, "warning: {w}")?;
    }
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("study_out"));
    res.write_outputs(&dir)?;
    writeln!(out, "wrote {}", dir.display())?;
    let ok = res.all_bounds_hold(0.0);
    writeln!(out, "budget inequalities: {}", if ok { "hold" } else { "VIOLATED" })?;
    Ok(ok)
}

fn cmd_verify(cfg: &Config, out: &mut dyn Write) -> Result<bool> {
    let suites = run_all(&VerifyConfig {
        seed: cfg.seed,
        ..VerifyConfig::default()
    })?;
    for s in &suites {
        writeln!(out, "{s}")?;
    }
    let passed = suites.iter().filter(|s| s.ok()).count();
    writeln!(out, "{passed}/{} suites passed", suites.len())?;
    Ok(passed == suites.len())
}

/// `||Pi_h xi - Pi_ref xi||` for `xi = -x` on nested uniform meshes.
pub fn example_lp_exact(n: usize, n_ref: usize) -> f64 {
    let h = 1.0 / n as f64;
    let r = n as f64 / n_ref as f64;
    h / 12f64.sqrt() * (1.0 - r * r).sqrt()
}

fn cmd_example_lp(cfg: &Config, mesh_sizes_given: bool, out: &mut dyn Write) -> Result<bool> {
    let sizes = if mesh_sizes_given {
        cfg.mesh_sizes.clone()
    } else {
        vec![4, 8, 16, 32, 64]
    };
    let tau = cfg.solver.tau;
    let problem = Problem::preset(ProblemId::ExampleLp)?;
    let f = problem.objective.as_ref();
    let reg = &problem.regularizer;
    if let Some(&n) = sizes.iter().find(|&&n| n == 0 || tau * 0.5 / n as f64 > 1.0) {
        return Err(Error::Config(format!("example-lp needs n >= 1 and tau <= 2n, got n = {n}")));
    }
    writeln!(
        out,
        "{:>5} {:>7} {:>13} {:>13} {:>13} {:>13} {:>10} {:>9}",
        "n", "n_ref", "chi_nor", "chi_can", "exact", "h/4", "rel(h/4)", "2h/h_ref"
    )?;
    let mut csv = csv::Writer::from_writer(Vec::new());
    csv.write_record(["n", "h", "h_ref", "chi_nor", "chi_can", "exact", "h_over_4"])?;
    let mut ok = true;
    for n in sizes {
        let n_ref = cfg.n_ref.unwrap_or(64 * n);
        let mesh = Mesh1D::uniform(n)?;
        let reference = Mesh1D::uniform(n_ref)?;
        mesh.refinement_map(&reference)?;
        let discrete = reg.discretize(&mesh)?;
        let res = solve(f, &discrete, &cfg.solver)?;
        let u = &res.u_star;
        let v = postprocess_v(u, &f.gradient(u)?, tau);
        let nor = chi_nor_ref(f, reg, &reference, tau, &v)?;
        let can = chi_can_ref(f, reg, &reference, tau, u)?;
        let discrete_zero = chi_nor_h(f, &discrete, tau, &v)? <= 1e-14 && chi_can_h(f, &discrete, tau, u)? <= 1e-14;
        let exact = example_lp_exact(n, n_ref);
        let h = mesh.h();
        let quarter = h / 4.0;
        let rel_quarter = ((nor - quarter) / quarter).abs().max(((can - quarter) / quarter).abs());
        let row_ok = res.converged
            && discrete_zero
            && (nor - tau * exact).abs() <= 1e-9 * exact
            && (can - exact).abs() <= 1e-9 * exact;
        ok &= row_ok;
        writeln!(
            out,
            "{:>5} {:>7} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e} {:>10.4} {:>9.4}{}",
            n,
            n_ref,
            nor,
            can,
            exact,
            quarter,
            rel_quarter,
            2.0 * reference.h() / h,
            if row_ok { "" } else { "  MISMATCH" }
        )?;
        csv.write_record([n as f64, h, reference.h(), nor, can, exact, quarter].map(|v| v.to_string()))?;
    }
    writeln!(out, "exact = (h/sqrt(12)) sqrt(1 - (h_ref/h)^2) = ||Pi_h xi - Pi_ref xi||; chi_nor carries a factor tau")?;
    if let Some(dir) = &cfg.out {
        write_file(dir, "example_lp.csv", csv)?;
        writeln!(out, "wrote {}", dir.display())?;
    }
    Ok(ok)
}

fn write_file(dir: &Path, name: &str, w: csv::Writer<Vec<u8>>) -> Result<()> {
    fs::create_dir_all(dir)?;
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    fs::write(dir.join(name), bytes)?;
    Ok(())
}
