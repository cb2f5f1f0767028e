//! Named data functions and the preset problem instances.
//!
//! Functions are looked up by name so configuration files can select them
//! without an expression language. `constant(c)` is accepted for any
//! decimal `c`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fe_space::SampledFn;
use crate::objective::{LinearObjective, SmoothObjective};
use crate::pde::{PdeKind, ReducedProblem};
use crate::regularizer::CompositeRegularizer;

/// Names accepted by [`lookup`] besides `constant(c)`.
pub const REGISTRY: [&str; 9] = [
    "zero",
    "x",
    "neg_x",
    "hundred_x_squared",
    "upper_sine",
    "semilinear_target",
    "semilinear_source",
    "ramp_upper",
    "bilinear_target",
];

/// Resolves a registry name to a function carrying its H1 seminorm.
pub fn lookup(name: &str) -> Result<SampledFn> {
    let name = name.trim();
    if let Some(arg) = name.strip_prefix("constant(").and_then(|s| s.strip_suffix(')')) {
        let c: f64 = arg
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad constant in `{name}`")))?;
        return Ok(SampledFn::constant(c));
    }
    let f = match name {
        "zero" => SampledFn::constant(0.0),
        "x" => SampledFn::new("x", |x| x).with_seminorm(1.0),
        "neg_x" => SampledFn::new("neg_x", |x| -x).with_seminorm(1.0),
        "hundred_x_squared" => {
            SampledFn::new("hundred_x_squared", |x| 100.0 * x * x).with_seminorm(200.0 / 3f64.sqrt())
        }
        "upper_sine" => SampledFn::new("upper_sine", |x| 1.0 + 0.1 * (2.0 * PI * x).sin())
            .with_seminorm(0.1 * 2f64.sqrt() * PI),
        "semilinear_target" => {
            let f = |x: f64| 2.0 * (4.0 * PI * x).sin() * (2.0 * x).exp();
            let df = |x: f64| (2.0 * x).exp() * (8.0 * PI * (4.0 * PI * x).cos() + 4.0 * (4.0 * PI * x).sin());
            SampledFn::new("semilinear_target", f).with_seminorm(l2_norm_of(df))
        }
        "semilinear_source" => SampledFn::new("semilinear_source", |x| 10.0 * (8.0 * PI * x).cos())
            .with_seminorm(40.0 * 2f64.sqrt() * PI),
        "ramp_upper" => SampledFn::new("ramp_upper", |x| if x < 0.25 { 0.0 } else { -5.0 + 20.0 * x })
            .with_seminorm(10.0 * 3f64.sqrt()),
        "bilinear_target" => SampledFn::new("bilinear_target", |x| 1.0 + (2.0 * PI * x).sin())
            .with_seminorm(2f64.sqrt() * PI),
        other => {
            return Err(Error::Config(format!(
                "unknown function `{other}`; expected constant(c) or one of {}",
                REGISTRY.join(", ")
            )))
        }
    };
    Ok(f)
}

/// `||f||_{L2(0,1)}` by composite Gauss quadrature on 4096 cells.
fn l2_norm_of(f: impl Fn(f64) -> f64) -> f64 {
    let n = 4096;
    (0..n)
        .map(|k| {
            let (a, b) = (k as f64 / n as f64, (k + 1) as f64 / n as f64);
            crate::fe_space::gauss5(a, b).iter().map(|&(x, w)| w * f(x).powi(2)).sum::<f64>()
        })
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ProblemId {
    ExampleLp,
    Linear,
    Semilinear,
    Bilinear,
}

impl ProblemId {
    pub const ALL: [ProblemId; 4] = [
        ProblemId::ExampleLp,
        ProblemId::Linear,
        ProblemId::Semilinear,
        ProblemId::Bilinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemId::ExampleLp => "example_lp",
            ProblemId::Linear => "linear",
            ProblemId::Semilinear => "semilinear",
            ProblemId::Bilinear => "bilinear",
        }
    }

    pub fn pde_kind(self) -> Option<PdeKind> {
        match self {
            ProblemId::ExampleLp => None,
            ProblemId::Linear => Some(PdeKind::Linear),
            ProblemId::Semilinear => Some(PdeKind::Semilinear),
            ProblemId::Bilinear => Some(PdeKind::Bilinear),
        }
    }
}

impl fmt::Display for ProblemId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "example_lp" | "example-lp" => Ok(ProblemId::ExampleLp),
            "linear" => Ok(ProblemId::Linear),
            "semilinear" => Ok(ProblemId::Semilinear),
            "bilinear" => Ok(ProblemId::Bilinear),
            other => Err(Error::Config(format!(
                "unknown problem `{other}`; expected linear, semilinear, bilinear or example_lp"
            ))),
        }
    }
}

/// Data of a problem instance by registry name. For the example LP the
/// `target` is the weight `w` of `f(u) = (w, u)` and `source` is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub id: ProblemId,
    pub beta: f64,
    pub lower: String,
    pub upper: String,
    pub target: String,
    pub source: String,
}

impl ProblemSpec {
    pub fn preset(id: ProblemId) -> Self {
        let (beta, lower, upper, target, source) = match id {
            ProblemId::ExampleLp => (0.0, "neg_x", "constant(1)", "constant(1)", "zero"),
            ProblemId::Linear => (0.001, "constant(-1)", "upper_sine", "hundred_x_squared", "zero"),
            ProblemId::Semilinear => (
                0.0055,
                "constant(-10)",
                "ramp_upper",
                "semilinear_target",
                "semilinear_source",
            ),
            ProblemId::Bilinear => (0.0001, "zero", "ramp_upper", "bilinear_target", "semilinear_source"),
        };
        ProblemSpec {
            id,
            beta,
            lower: lower.into(),
            upper: upper.into(),
            target: target.into(),
            source: source.into(),
        }
    }

    pub fn build(&self) -> Result<Problem> {
        let regularizer = CompositeRegularizer::new(self.beta, lookup(&self.lower)?, lookup(&self.upper)?)?;
        let target = lookup(&self.target)?;
        let objective: Arc<dyn SmoothObjective> = match self.id.pde_kind() {
            None => Arc::new(LinearObjective::new(target)),
            Some(kind) => {
                if kind == PdeKind::Bilinear && regularizer.lower().min_max(1024).0 < 0.0 {
                    return Err(Error::Config(
                        "bilinear problems need a nonnegative lower bound".into(),
                    ));
                }
                Arc::new(ReducedProblem::new(kind, target, lookup(&self.source)?))
            }
        };
        Ok(Problem {
            id: self.id,
            objective,
            regularizer,
        })
    }
}

/// A ready-to-solve composite problem `min f(u) + psi(u)`.
#[derive(Clone)]
pub struct Problem {
    pub id: ProblemId,
    pub objective: Arc<dyn SmoothObjective>,
    pub regularizer: CompositeRegularizer,
}

impl Problem {
    pub fn preset(id: ProblemId) -> Result<Self> {
        ProblemSpec::preset(id).build()
    }
}

impl fmt::Debug for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Problem")
            .field("id", &self.id)
            .field("regularizer", &self.regularizer)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Seminorm by a fine centered difference quotient and midpoint rule.
    fn numeric_seminorm(f: &SampledFn) -> f64 {
        let n = 400_000;
        let d = 1e-7;
        let mut total = 0.0;
        for i in 0..n {
            let x = (i as f64 + 0.5) / n as f64;
            let df = (f.eval(x + d) - f.eval(x - d)) / (2.0 * d);
            total += df * df / n as f64;
        }
        total.sqrt()
    }

    #[test]
    fn seminorms_match_numerical_differentiation() {
        for name in REGISTRY {
            let f = lookup(name).unwrap();
            let s = f.h1_seminorm().unwrap();
            assert_relative_eq!(s, numeric_seminorm(&f), max_relative = 1e-4, epsilon = 1e-9);
        }
    }

    #[test]
    fn constants_parse() {
        let f = lookup("constant(-2.5)").unwrap();
        assert_eq!(f.as_constant(), Some(-2.5));
        assert_eq!(f.h1_seminorm(), Some(0.0));
        assert!(matches!(lookup("constant(abc)"), Err(Error::Config(_))));
        assert!(matches!(lookup("cosh"), Err(Error::Config(_))));
    }

    #[test]
    fn presets_build() {
        for id in ProblemId::ALL {
            let p = Problem::preset(id).unwrap();
            assert_eq!(p.id, id);
            assert_eq!(id.name().parse::<ProblemId>().unwrap(), id);
        }
        assert_eq!("example-lp".parse::<ProblemId>().unwrap(), ProblemId::ExampleLp);
        assert!("quadratic".parse::<ProblemId>().is_err());
    }

    #[test]
    fn bilinear_rejects_negative_lower_bound() {
        let mut spec = ProblemSpec::preset(ProblemId::Bilinear);
        spec.lower = "constant(-1)".into();
        assert!(spec.build().is_err());
    }
}
