use std::path::PathBuf;
use std::process::{Command, Output};

fn critmeasure(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critmeasure"))
        .args(args)
        .env("CRITMEASURE_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("critmeasure-{}-{name}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn help_and_version_exit_zero() {
    for args in [&["--help"][..], &["--version"], &["study", "--help"]] {
        assert_eq!(critmeasure(args).status.code(), Some(0), "{args:?}");
    }
}

#[test]
fn usage_and_config_errors_exit_two() {
    let cases: [&[&str]; 5] = [
        &[],
        &["frobnicate"],
        &["study", "--set", "solver.tolerance=1"],
        &["study", "--n", "16,12"],
        &["solve", "--problem", "nonsense"],
    ];
    for args in cases {
        let o = critmeasure(args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let dir = scratch("badcfg");
    let cfg = dir.join("bad.toml");
    std::fs::write(&cfg, "[mesh]\nn = 3\n").unwrap();
    let o = critmeasure(&["study", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("mesh"));
}

#[test]
fn study_writes_outputs() {
    let dir = scratch("study");
    let o = critmeasure(&["study", "--problem", "linear", "--n", "8,16,32", "--n-ref", "1024", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("budget inequalities: hold"));
    let study = std::fs::read_to_string(dir.join("study.csv")).unwrap();
    let mut lines = study.lines();
    assert_eq!(lines.next(), Some("h,h_ref,chi_nor,chi_can,chi_gap,budget_nor,budget_can,budget_gap"));
    assert_eq!(lines.count(), 3);
    let rates = std::fs::read_to_string(dir.join("rates.csv")).unwrap();
    assert!(rates.starts_with("measure,rate,intercept\n"));
    assert_eq!(rates.lines().count(), 4);
    let svg = std::fs::read_to_string(dir.join("rates.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn study_output_is_deterministic() {
    let run = |tag: &str, threads: &str| {
        let dir = scratch(tag);
        let o = Command::new(env!("CARGO_BIN_EXE_critmeasure"))
            .args(["study", "--problem", "semilinear", "--n", "8,16", "--n-ref", "512", "--out", dir.to_str().unwrap()])
            .env("CRITMEASURE_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0));
        (std::fs::read(dir.join("study.csv")).unwrap(), std::fs::read(dir.join("rates.csv")).unwrap())
    };
    assert_eq!(run("det1", "1"), run("det2", "4"));
}

#[test]
fn config_file_and_overrides() {
    let dir = scratch("cfg");
    let cfg = dir.join("bilinear.toml");
    std::fs::write(&cfg, "[problem]\nname = bilinear\n\n[study]\nmesh_sizes = 8, 16\nn_ref = 512\n").unwrap();
    let o = critmeasure(&["study", "--config", cfg.to_str().unwrap(), "--set", "solver.method=fw", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("bilinear"));
}

#[test]
fn solve_writes_solution_and_trace() {
    let dir = scratch("solve");
    let o = critmeasure(&["solve", "--problem", "semilinear", "--n", "32", "--out", dir.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    for f in ["report.csv", "u_star.csv", "trace.csv"] {
        assert!(dir.join(f).is_file(), "{f}");
    }
    let trace = std::fs::read_to_string(dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("iter,objective,measure\n"));
    let u = std::fs::read_to_string(dir.join("u_star.csv")).unwrap();
    assert_eq!(u.lines().count(), 33);
}

#[test]
fn solve_reports_nonconvergence() {
    let o = critmeasure(&["solve", "--problem", "semilinear", "--n", "32", "--set", "solver.max_iters=2"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn example_lp_and_verify() {
    let o = critmeasure(&["example-lp"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let o = critmeasure(&["example-lp", "--n", "16", "--n-ref", "1024"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("1.803999e-2"));
    let o = critmeasure(&["verify"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("6/6 suites passed"));
}
