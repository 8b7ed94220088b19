//! Run configuration shared by flags and `key = value` config files.
//!
//! Every config key is also a long flag of the same name, and both go
//! through [`RunConfig::set`], so a file and a command line describe runs in
//! exactly the same vocabulary.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use interp_solve_core::diagnostics::ResidualKind;
use interp_solve_core::solvers::{BatchMode, SolverKind};
use interp_solve_core::Point;

pub const PROBLEMS: [&str; 4] = ["quadratic", "polar", "forsaken", "lne-forsaken"];

pub const CHECKS: [&str; 7] = [
    "km",
    "last-iterate",
    "bounded-iterates",
    "la2",
    "cegplus",
    "h-cocoercivity",
    "slope",
];

/// Keys in serialization order.
pub const KEYS: [&str; 22] = [
    "problem",
    "a",
    "b",
    "rho",
    "L",
    "solver",
    "gamma",
    "lambda",
    "tau",
    "alpha",
    "K",
    "sigma0",
    "batch",
    "z0",
    "seed",
    "output",
    "checks",
    "target",
    "budget",
    "residual",
    "residual-gamma",
    "permissive",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gamma {
    /// `1/L`, or `0.9/L` when CEG+ bounds are checked.
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tau {
    Fixed(usize),
    AutoBest,
    AutoLast,
}

#[derive(Debug, Clone, PartialEq)]
pub enum StartPoint {
    /// Per-problem default start.
    Default,
    Origin,
    Coords(Point),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Checks {
    /// Checks whose hypotheses match the solver.
    Auto,
    List(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResidualGamma {
    /// Solver stepsize, capped at `1/L` when `L` is known.
    Auto,
    Value(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub problem: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub rho: Option<f64>,
    pub lipschitz: Option<f64>,
    pub solver: SolverKind,
    pub gamma: Gamma,
    pub lambda: f64,
    pub tau: Tau,
    pub alpha: f64,
    pub outer_iters: usize,
    pub sigma0: f64,
    pub batch: BatchMode,
    pub z0: StartPoint,
    pub seed: u64,
    pub output: PathBuf,
    pub checks: Checks,
    pub target: Option<f64>,
    pub budget: Option<u64>,
    pub residual: Option<ResidualKind>,
    pub residual_gamma: ResidualGamma,
    pub permissive: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            problem: "quadratic".into(),
            a: None,
            b: None,
            rho: None,
            lipschitz: None,
            solver: SolverKind::Rapp,
            gamma: Gamma::Auto,
            lambda: 0.5,
            tau: Tau::Fixed(10),
            alpha: 0.25,
            outer_iters: 100,
            sigma0: 0.0,
            batch: BatchMode::Fixed(1),
            z0: StartPoint::Default,
            seed: 0,
            output: PathBuf::from("trajectory.csv"),
            checks: Checks::Auto,
            target: None,
            budget: None,
            residual: None,
            residual_gamma: ResidualGamma::Auto,
            permissive: false,
        }
    }
}

fn float(key: &str, value: &str) -> Result<f64> {
    let v: f64 = value
        .parse()
        .map_err(|_| anyhow!("{key}: '{value}' is not a number"))?;
    if !v.is_finite() {
        bail!("{key}: '{value}' is not finite");
    }
    Ok(v)
}

fn optional_float(key: &str, value: &str) -> Result<Option<f64>> {
    if value == "none" {
        Ok(None)
    } else {
        float(key, value).map(Some)
    }
}

fn integer<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| anyhow!("{key}: '{value}' is not a non-negative integer"))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => bail!("{key}: '{value}' is not a boolean"),
    }
}

/// Shortest decimal that parses back to the same `f64`.
fn fmt_float(v: f64) -> String {
    format!("{v:e}")
}

impl RunConfig {
    /// Sets `key` from its textual form, validating names immediately.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "problem" => {
                if !PROBLEMS.contains(&value) {
                    bail!("unknown problem '{value}' (expected one of {})", PROBLEMS.join(", "));
                }
                self.problem = value.to_string();
            }
            "a" => self.a = optional_float(key, value)?,
            "b" => self.b = optional_float(key, value)?,
            "rho" => self.rho = optional_float(key, value)?,
            "L" => self.lipschitz = optional_float(key, value)?,
            "solver" => self.solver = value.parse()?,
            "gamma" => {
                self.gamma = match value {
                    "auto" => Gamma::Auto,
                    v => Gamma::Value(float(key, v)?),
                }
            }
            "lambda" => self.lambda = float(key, value)?,
            "tau" => {
                self.tau = match value {
                    "auto-best" => Tau::AutoBest,
                    "auto-last" => Tau::AutoLast,
                    v => Tau::Fixed(integer(key, v)?),
                }
            }
            "alpha" => self.alpha = float(key, value)?,
            "K" => self.outer_iters = integer(key, value)?,
            "sigma0" => self.sigma0 = float(key, value)?,
            "batch" => {
                self.batch = match value {
                    "best" => BatchMode::BestIterate,
                    "last" => BatchMode::LastIterate,
                    v => BatchMode::Fixed(integer(key, v)?),
                }
            }
            "z0" => {
                self.z0 = match value {
                    "default" => StartPoint::Default,
                    "origin" => StartPoint::Origin,
                    v => StartPoint::Coords(Point::new(
                        v.split(',')
                            .map(|c| float(key, c.trim()))
                            .collect::<Result<Vec<_>>>()?,
                    )),
                }
            }
            "seed" => self.seed = integer(key, value)?,
            "output" => self.output = PathBuf::from(value),
            "checks" => {
                self.checks = match value {
                    "auto" => Checks::Auto,
                    "none" | "" => Checks::List(Vec::new()),
                    v => {
                        let list: Vec<String> = v.split(',').map(|c| c.trim().to_string()).collect();
                        if let Some(bad) = list.iter().find(|c| !CHECKS.contains(&c.as_str())) {
                            bail!("unknown check '{bad}' (expected one of {})", CHECKS.join(", "));
                        }
                        Checks::List(list)
                    }
                }
            }
            "target" => self.target = optional_float(key, value)?,
            "budget" => {
                self.budget = match value {
                    "none" => None,
                    v => Some(integer(key, v)?),
                }
            }
            "residual" => {
                self.residual = match value {
                    "auto" => None,
                    v => Some(v.parse()?),
                }
            }
            "residual-gamma" => {
                self.residual_gamma = match value {
                    "auto" => ResidualGamma::Auto,
                    v => ResidualGamma::Value(float(key, v)?),
                }
            }
            "permissive" => self.permissive = parse_bool(key, value)?,
            _ => bail!("unknown config key '{key}'"),
        }
        Ok(())
    }

    /// Textual value of `key`, the inverse of [`RunConfig::set`].
    pub fn get(&self, key: &str) -> Option<String> {
        let opt = |v: Option<f64>| v.map(fmt_float).unwrap_or_else(|| "none".into());
        Some(match key {
            "problem" => self.problem.clone(),
            "a" => opt(self.a),
            "b" => opt(self.b),
            "rho" => opt(self.rho),
            "L" => opt(self.lipschitz),
            "solver" => self.solver.to_string(),
            "gamma" => match self.gamma {
                Gamma::Auto => "auto".into(),
                Gamma::Value(v) => fmt_float(v),
            },
            "lambda" => fmt_float(self.lambda),
            "tau" => match self.tau {
                Tau::Fixed(n) => n.to_string(),
                Tau::AutoBest => "auto-best".into(),
                Tau::AutoLast => "auto-last".into(),
            },
            "alpha" => fmt_float(self.alpha),
            "K" => self.outer_iters.to_string(),
            "sigma0" => fmt_float(self.sigma0),
            "batch" => match self.batch {
                BatchMode::Fixed(n) => n.to_string(),
                BatchMode::BestIterate => "best".into(),
                BatchMode::LastIterate => "last".into(),
            },
            "z0" => match &self.z0 {
                StartPoint::Default => "default".into(),
                StartPoint::Origin => "origin".into(),
                StartPoint::Coords(p) => p
                    .coords()
                    .iter()
                    .map(|c| fmt_float(*c))
                    .collect::<Vec<_>>()
                    .join(","),
            },
            "seed" => self.seed.to_string(),
            "output" => self.output.display().to_string(),
            "checks" => match &self.checks {
                Checks::Auto => "auto".into(),
                Checks::List(l) if l.is_empty() => "none".into(),
                Checks::List(l) => l.join(","),
            },
            "target" => opt(self.target),
            "budget" => self
                .budget
                .map(|b| b.to_string())
                .unwrap_or_else(|| "none".into()),
            "residual" => self
                .residual
                .map(|r| r.to_string())
                .unwrap_or_else(|| "auto".into()),
            "residual-gamma" => match self.residual_gamma {
                ResidualGamma::Auto => "auto".into(),
                ResidualGamma::Value(v) => fmt_float(v),
            },
            "permissive" => self.permissive.to_string(),
            _ => return None,
        })
    }

    /// `(key, value)` pairs in [`KEYS`] order.
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        KEYS.iter()
            .map(|k| (*k, self.get(k).expect("every key has a value")))
            .collect()
    }

    /// Applies `key = value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected 'key = value'", i + 1))?;
            self.set(key.trim(), value)
                .with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        self.apply_text(&text)
            .with_context(|| format!("in config {}", path.display()))
    }

    pub fn checks_include(&self, name: &str) -> bool {
        match &self.checks {
            Checks::Auto => auto_checks(self.solver, self.tau).contains(&name),
            Checks::List(l) => l.iter().any(|c| c == name),
        }
    }

    /// Checks to run, in [`CHECKS`] order.
    pub fn resolved_checks(&self) -> Vec<&'static str> {
        CHECKS.iter().copied().filter(|c| self.checks_include(c)).collect()
    }
}

/// Checks whose hypotheses are matched by `solver`.
pub fn auto_checks(solver: SolverKind, tau: Tau) -> &'static [&'static str] {
    match solver {
        SolverKind::KmExact | SolverKind::Rapp | SolverKind::RelaxedPp => {
            &["km", "last-iterate", "bounded-iterates"]
        }
        SolverKind::Cegplus | SolverKind::Fbf => &["cegplus"],
        SolverKind::LaGda if tau == Tau::Fixed(2) => &["la2"],
        _ => &[],
    }
}

impl fmt::Display for RunConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.entries() {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_default_and_custom() {
        let mut c = RunConfig::default();
        let text = c.to_string();
        let mut back = RunConfig::default();
        back.apply_text(&text).unwrap();
        assert_eq!(back, c);

        for (k, v) in [
            ("problem", "forsaken"),
            ("rho", "-0.3333333333333333"),
            ("gamma", "0.1"),
            ("tau", "auto-last"),
            ("z0", "0.1,-0.7"),
            ("checks", "km,slope"),
            ("batch", "best"),
            ("target", "1e-4"),
            ("budget", "100000"),
            ("residual", "estimated:60"),
            ("residual-gamma", "0.07"),
            ("permissive", "true"),
        ] {
            c.set(k, v).unwrap();
        }
        let mut back = RunConfig::default();
        back.apply_text(&c.to_string()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.rho, Some(-1.0 / 3.0));
    }

    #[test]
    fn unknown_names_are_rejected() {
        let mut c = RunConfig::default();
        assert!(c.set("solver", "adam").is_err());
        assert!(c.set("problem", "rosenbrock").is_err());
        assert!(c.set("checks", "km,nope").is_err());
        assert!(c.set("colour", "red").is_err());
        assert!(c.set("gamma", "NaN").is_err());
        assert!(c.apply_text("solver rapp").is_err());
    }

    #[test]
    fn comments_and_blank_lines() {
        let mut c = RunConfig::default();
        c.apply_text("# experiment\n\nsolver = la-gda\n  tau = 2 \n").unwrap();
        assert_eq!(c.solver, SolverKind::LaGda);
        assert_eq!(c.resolved_checks(), vec!["la2"]);
    }
}
