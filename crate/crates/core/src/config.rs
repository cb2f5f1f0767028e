//! Flat `key = value` configuration files with `[problem]`,
//! `[regularizer]`, `[solver]` and `[study]` sections.
//!
//! ```text
//! [problem]
//! name = linear            # linear | semilinear | bilinear | example_lp
//! target = hundred_x_squared
//!
//! [regularizer]
//! beta = 0.001
//! lower = constant(-1)
//! upper = upper_sine
//!
//! [solver]
//! method = pg              # pg | fw
//! tol = 1e-10
//!
//! [study]
//! mesh_sizes = 16, 32, 64, 128, 256
//! n_ref = 16384
//! ```
//!
//! Missing keys take the values of the named problem preset. Entries are
//! collected first and applied afterwards, so their order does not matter;
//! a repeated key keeps its last value.

use std::path::PathBuf;

use crate::error::{Error, Result};
use crate::problems::{ProblemId, ProblemSpec};
use crate::solvers::{Method, SolveConfig, StepRule};
use crate::study::StudyConfig;

pub const KEYS: [&str; 20] = [
    "problem.name",
    "problem.target",
    "problem.source",
    "regularizer.beta",
    "regularizer.lower",
    "regularizer.upper",
    "solver.method",
    "solver.tau",
    "solver.tol",
    "solver.max_iters",
    "solver.step",
    "solver.step_size",
    "solver.backtrack_factor",
    "solver.backtrack_c",
    "study.mesh_sizes",
    "study.n_ref",
    "study.n",
    "study.seed",
    "study.budget_samples",
    "study.out",
];

/// Parsed and validated configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub problem: ProblemSpec,
    pub solver: SolveConfig,
    pub mesh_sizes: Vec<usize>,
    /// `None` selects `64 * max(mesh_sizes)`.
    pub n_ref: Option<usize>,
    /// Mesh size for single solves.
    pub n: usize,
    pub seed: u64,
    pub budget_samples: usize,
    pub out: Option<PathBuf>,
}

impl Default for Config {
    fn default() -> Self {
        Config::for_problem(ProblemId::Linear)
    }
}

impl Config {
    pub fn for_problem(id: ProblemId) -> Self {
        Config {
            problem: ProblemSpec::preset(id),
            solver: SolveConfig::default(),
            mesh_sizes: vec![16, 32, 64, 128, 256],
            n_ref: None,
            n: 64,
            seed: 0x5eed,
            budget_samples: 8,
            out: None,
        }
    }

    /// Parses file contents followed by `overrides` (`section.key`, value).
    pub fn parse(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let mut entries = parse_entries(text)?;
        for (k, v) in overrides {
            check_key(k)?;
            entries.push((k.clone(), v.clone()));
        }
        Self::from_entries(&entries)
    }

    pub fn from_entries(entries: &[(String, String)]) -> Result<Self> {
        let last = |key: &str| entries.iter().rev().find(|(k, _)| k == key).map(|(_, v)| v.as_str());
        let id = match last("problem.name") {
            Some(v) => v.parse()?,
            None => ProblemId::Linear,
        };
        let mut cfg = Config::for_problem(id);
        let mut step = "backtracking".to_string();
        let mut step_size = None;
        let (mut factor, mut c) = (0.5, 1e-4);
        // apply in key order for determinism; only the last value counts
        for key in KEYS {
            let Some(value) = last(key) else { continue };
            match key {
                "problem.name" => {}
                "problem.target" => cfg.problem.target = value.to_string(),
                "problem.source" => cfg.problem.source = value.to_string(),
                "regularizer.beta" => cfg.problem.beta = num(key, value)?,
                "regularizer.lower" => cfg.problem.lower = value.to_string(),
                "regularizer.upper" => cfg.problem.upper = value.to_string(),
                "solver.method" => {
                    cfg.solver.method = match value {
                        "pg" | "prox_grad" => Method::ProxGrad,
                        "fw" | "frank_wolfe" => Method::FrankWolfe,
                        _ => return Err(Error::Config(format!("{key}: expected pg or fw, got `{value}`"))),
                    }
                }
                "solver.tau" => cfg.solver.tau = num(key, value)?,
                "solver.tol" => cfg.solver.tol = num(key, value)?,
                "solver.max_iters" => cfg.solver.max_iters = num(key, value)?,
                "solver.step" => step = value.to_string(),
                "solver.step_size" => step_size = Some(num(key, value)?),
                "solver.backtrack_factor" => factor = num(key, value)?,
                "solver.backtrack_c" => c = num(key, value)?,
                "study.mesh_sizes" => {
                    cfg.mesh_sizes = value
                        .split(',')
                        .map(|s| num(key, s))
                        .collect::<Result<Vec<usize>>>()?
                }
                "study.n_ref" => cfg.n_ref = Some(num(key, value)?),
                "study.n" => cfg.n = num(key, value)?,
                "study.seed" => cfg.seed = num(key, value)?,
                "study.budget_samples" => cfg.budget_samples = num(key, value)?,
                "study.out" => cfg.out = Some(PathBuf::from(value)),
                _ => unreachable!("KEYS and match arms agree"),
            }
        }
        cfg.solver.step_rule = match step.as_str() {
            "backtracking" => StepRule::Backtracking { factor, c },
            "fixed" => StepRule::Fixed(
                step_size.ok_or_else(|| Error::Config("solver.step = fixed needs solver.step_size".into()))?,
            ),
            other => {
                return Err(Error::Config(format!(
                    "solver.step: expected backtracking or fixed, got `{other}`"
                )))
            }
        };
        cfg.solver.validate().map_err(|e| Error::Config(e.to_string()))?;
        if cfg.n == 0 {
            return Err(Error::Config("study.n must be >= 1".into()));
        }
        Ok(cfg)
    }

    /// Study configuration with the resolved reference mesh size.
    pub fn study(&self) -> StudyConfig {
        let mut s = StudyConfig::new(self.problem.clone(), self.mesh_sizes.clone());
        if let Some(n_ref) = self.n_ref {
            s.n_ref = n_ref;
        }
        s.tau = self.solver.tau;
        s.solver = self.solver;
        s.seed = self.seed;
        s.budget_samples = self.budget_samples;
        s
    }
}

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse `{}`", value.trim())))
}

fn check_key(key: &str) -> Result<()> {
    if KEYS.contains(&key) {
        Ok(())
    } else {
        Err(Error::UnknownKey(key.to_string()))
    }
}

/// `(section.key, value)` pairs in file order. `#` starts a comment.
pub fn parse_entries(text: &str) -> Result<Vec<(String, String)>> {
    let mut section: Option<String> = None;
    let mut out = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if !["problem", "regularizer", "solver", "study"].contains(&name) {
                return Err(Error::UnknownKey(format!("[{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected `key = value`", lineno + 1)))?;
        let sec = section
            .as_deref()
            .ok_or_else(|| Error::Config(format!("line {}: key outside of a section", lineno + 1)))?;
        let key = format!("{sec}.{}", k.trim());
        check_key(&key)?;
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

/// Splits a `section.key=value` override.
pub fn parse_override(s: &str) -> Result<(String, String)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
    let k = k.trim().to_string();
    check_key(&k)?;
    Ok((k, v.trim().to_string()))
}
