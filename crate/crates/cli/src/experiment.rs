//! Single runs: config resolution, execution, diagnostics and output files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use interp_solve_core::diagnostics::{
    self, check_cegplus_bounds, check_h_cocoercivity, check_iterate_bound, check_km_bound,
    check_la2_bound, check_last_iterate, residual, slope_fit, BoundReport, ResidualKind,
    ResidualSeries,
};
use interp_solve_core::problems::{self, ProblemSpec};
use interp_solve_core::solvers::{
    self, tau_schedule, ScheduleMode, SolverParams, TargetRule, Trajectory, Validation,
};
use interp_solve_core::{Error, Point};
use serde_json::{json, Value};

use crate::config::{Gamma, ResidualGamma, RunConfig, StartPoint, Tau};

/// Samples drawn for the H-cocoercivity check.
const COCOERCIVITY_SAMPLES: usize = 10_000;
/// Inner steps of the estimated resolvent used by the resolvent-residual bounds.
const REFERENCE_TAU: usize = 50;

/// A config turned into concrete library inputs.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub problem: ProblemSpec,
    pub params: SolverParams,
    pub z0: Point,
    pub residual_kind: ResidualKind,
    pub residual_gamma: f64,
    pub checks: Vec<&'static str>,
}

fn build_problem(cfg: &RunConfig) -> Result<ProblemSpec> {
    let mut p = match cfg.problem.as_str() {
        "quadratic" => {
            let by_constants = cfg.rho.is_some() || cfg.lipschitz.is_some();
            if by_constants && (cfg.a.is_some() || cfg.b.is_some()) {
                bail!("quadratic takes either a/b or rho/L, not both");
            }
            return Ok(if by_constants {
                problems::quadratic_from_constants(
                    cfg.lipschitz.unwrap_or(1.0),
                    cfg.rho.unwrap_or(0.0),
                )?
            } else {
                problems::quadratic_field(cfg.a.unwrap_or(1.0), cfg.b.unwrap_or(0.0))?
            });
        }
        "polar" => problems::polar_game_field(cfg.a.unwrap_or(problems::POLAR_DEFAULT_A))?,
        "forsaken" => problems::forsaken_field(cfg.a.unwrap_or(problems::FORSAKEN_A))?,
        "lne-forsaken" => {
            let mut p = problems::forsaken_field(cfg.a.unwrap_or(problems::LNE_FORSAKEN_A))?;
            p.name = "lne-forsaken".into();
            p
        }
        other => bail!("unknown problem '{other}'"),
    };
    if cfg.b.is_some() {
        bail!("{} has no 'b' parameter", p.name);
    }
    // metadata overrides for the nonlinear problems
    if let Some(rho) = cfg.rho {
        p.rho = Some(rho);
    }
    if let Some(l) = cfg.lipschitz {
        if !(l > 0.0) {
            bail!("L must be > 0, got {l}");
        }
        p.lipschitz = Some(l);
    }
    Ok(p)
}

fn default_start(problem: &str) -> Point {
    match problem {
        "quadratic" => Point::from([1.0, 0.0]),
        "polar" => Point::from([1.0, 1.0]),
        _ => Point::from([0.5, 0.5]),
    }
}

pub fn resolve(cfg: &RunConfig) -> Result<Resolved> {
    let problem = build_problem(cfg)?;
    let checks = cfg.resolved_checks();
    let need_l = |what: &str| {
        problem
            .lipschitz
            .ok_or_else(|| anyhow!("{what} needs a Lipschitz constant; pass --L"))
    };
    let gamma = match cfg.gamma {
        Gamma::Value(g) => g,
        Gamma::Auto if checks.contains(&"cegplus") => 0.9 / need_l("--gamma auto")?,
        Gamma::Auto => 1.0 / need_l("--gamma auto")?,
    };
    if !(gamma > 0.0) {
        bail!("gamma must be > 0, got {gamma}");
    }
    let tau = match cfg.tau {
        Tau::Fixed(n) => n,
        Tau::AutoBest | Tau::AutoLast => {
            let mode = if cfg.tau == Tau::AutoBest {
                ScheduleMode::Best
            } else {
                ScheduleMode::Last
            };
            tau_schedule(cfg.outer_iters, gamma * need_l("--tau auto")?, mode)?
        }
    };
    let z0 = match &cfg.z0 {
        StartPoint::Default => default_start(&cfg.problem),
        StartPoint::Origin => Point::zeros(problem.dim()),
        StartPoint::Coords(p) => p.clone(),
    };
    z0.ensure_dim(problem.dim())?;
    let residual_kind = cfg
        .residual
        .unwrap_or_else(|| ResidualKind::default_for(&problem));
    let residual_gamma = match cfg.residual_gamma {
        ResidualGamma::Value(g) => g,
        ResidualGamma::Auto => match problem.lipschitz {
            Some(l) => gamma.min(1.0 / l),
            None => gamma,
        },
    };
    residual(&problem, &z0, residual_gamma, residual_kind)
        .with_context(|| format!("residual '{residual_kind}'"))?;
    let params = SolverParams {
        gamma,
        lambda: cfg.lambda,
        tau,
        alpha: cfg.alpha,
        outer_iters: cfg.outer_iters,
        sigma0: cfg.sigma0,
        batch_mode: cfg.batch,
        seed: cfg.seed,
        validation: if cfg.permissive {
            Validation::Permissive
        } else {
            Validation::Strict
        },
        max_oracle_calls: cfg.budget,
        target: cfg.target.map(|value| TargetRule {
            value,
            kind: residual_kind,
            gamma: residual_gamma,
        }),
    };
    params.check_basic()?;
    Ok(Resolved {
        problem,
        params,
        z0,
        residual_kind,
        residual_gamma,
        checks,
    })
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Finished,
    Diverged,
    Failed,
}

/// What a sweep summary needs from one run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub status: Status,
    pub stop_reason: String,
    pub iterations: usize,
    pub oracle_calls: u64,
    pub final_residual: f64,
    /// `(bound name, Some(holds))`, or `None` when inapplicable.
    pub bounds: Vec<(String, Option<bool>)>,
    pub error: Option<String>,
}

pub fn json_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .with_context(|| format!("cannot write {}", path.display()))
}

/// Resolves, runs and writes `cfg.output` plus its `.json` sibling.
///
/// Config and parameter errors are returned as `Err`; divergence and inner
/// loop failures still write the partial trajectory and are reported in the
/// outcome.
pub fn execute(cfg: &RunConfig) -> Result<RunOutcome> {
    let resolved = resolve(cfg)?;
    let csv_path = cfg.output.clone();
    let json_path = json_path(&csv_path);
    let mut csv = create(&csv_path)?;
    let json = create(&json_path)?;

    let (traj, status, error) = match solvers::run_solver(
        cfg.solver,
        &resolved.problem,
        &resolved.params,
        &resolved.z0,
    ) {
        Ok(t) => (t, Status::Finished, None),
        Err(e) => match e.partial_trajectory().cloned() {
            Some(t) => {
                let status = if matches!(e, Error::Divergence { .. }) {
                    Status::Diverged
                } else {
                    Status::Failed
                };
                (t, status, Some(e.to_string()))
            }
            None => {
                drop((csv, json));
                let _ = std::fs::remove_file(&csv_path);
                let _ = std::fs::remove_file(&json_path);
                return Err(e.into());
            }
        },
    };

    let residuals: Vec<f64> = traj
        .iterates
        .iter()
        .map(|z| {
            residual(&resolved.problem, z, resolved.residual_gamma, resolved.residual_kind)
                .unwrap_or(f64::NAN)
        })
        .collect();
    let z_star = diagnostics::reference_zero(&resolved.problem, &resolved.z0).cloned();
    write_csv(&mut csv, &traj, &residuals, z_star.as_ref())
        .with_context(|| format!("writing {}", csv_path.display()))?;

    let bounds = if status == Status::Finished {
        bound_reports(&resolved, &traj, z_star.as_ref())
    } else {
        Vec::new()
    };
    let slopes = if resolved.checks.contains(&"slope") {
        slope_fits(&resolved, &residuals)
    } else {
        Value::Null
    };
    let stop_reason = match status {
        Status::Finished => traj.stop_reason.name().to_string(),
        Status::Diverged => "diverged".to_string(),
        Status::Failed => "error".to_string(),
    };
    let final_residual = residuals.last().copied().unwrap_or(f64::NAN);
    let report = json!({
        "config": cfg.entries().into_iter().map(|(k, v)| (k.to_string(), Value::String(v))).collect::<serde_json::Map<_, _>>(),
        "resolved": {
            "gamma": resolved.params.gamma,
            "tau": resolved.params.tau,
            "z0": resolved.z0.coords(),
            "residual": resolved.residual_kind.to_string(),
            "residual_gamma": resolved.residual_gamma,
            "checks": resolved.checks,
        },
        "problem": resolved.problem.summary(),
        "solver": cfg.solver.name(),
        "params": resolved.params,
        "stop_reason": stop_reason,
        "error": error,
        "iterations": traj.steps(),
        "oracle_calls": traj.total_calls(),
        "final_residual": final_residual,
        "reference_zero": z_star.as_ref().map(|z| z.coords().to_vec()),
        "warnings": traj.warnings,
        "bounds": bounds,
        "slope_fits": slopes,
    });
    let mut json = json;
    serde_json::to_writer_pretty(&mut json, &report)?;
    writeln!(json)?;
    json.flush()
        .with_context(|| format!("writing {}", json_path.display()))?;

    Ok(RunOutcome {
        status,
        stop_reason,
        iterations: traj.steps(),
        oracle_calls: traj.total_calls(),
        final_residual,
        bounds: bounds
            .iter()
            .map(|b| (b.bound_name.clone(), b.outcome()))
            .collect(),
        error,
    })
}

fn write_csv(
    out: &mut impl Write,
    traj: &Trajectory,
    residuals: &[f64],
    z_star: Option<&Point>,
) -> std::io::Result<()> {
    let dim = traj.first().dim();
    write!(out, "iter,oracle_calls,residual,dist_to_zero")?;
    for i in 0..dim {
        write!(out, ",z_{i}")?;
    }
    writeln!(out)?;
    for (k, z) in traj.iterates.iter().enumerate() {
        let dist = z_star.map(|s| z.dist(s)).unwrap_or(f64::NAN);
        write!(
            out,
            "{k},{},{:.16e},{:.16e}",
            traj.oracle_calls[k], residuals[k], dist
        )?;
        for c in z.coords() {
            write!(out, ",{c:.16e}")?;
        }
        writeln!(out)?;
    }
    out.flush()
}

/// Resolvent residuals at the solver stepsize, as the KM bounds require.
fn resolvent_series(resolved: &Resolved, traj: &Trajectory) -> std::result::Result<ResidualSeries, String> {
    let p = &resolved.problem;
    let gamma = resolved.params.gamma;
    let kind = if p.has_closed_form_resolvent() {
        ResidualKind::ExactResolvent
    } else {
        ResidualKind::EstimatedResolvent {
            tau_ref: REFERENCE_TAU,
        }
    };
    ResidualSeries::from_trajectory(p, traj, gamma, kind).map_err(|e| e.to_string())
}

fn bound_reports(resolved: &Resolved, traj: &Trajectory, z_star: Option<&Point>) -> Vec<BoundReport> {
    let mut out = Vec::new();
    let Some(z_star) = z_star else {
        for c in resolved.checks.iter().filter(|c| **c != "slope") {
            out.push(BoundReport::inapplicable(c, "problem has no known zero"));
        }
        return out;
    };
    let series = if resolved.checks.iter().any(|c| *c == "km" || *c == "last-iterate") {
        Some(resolvent_series(resolved, traj))
    } else {
        None
    };
    for check in &resolved.checks {
        let reports: std::result::Result<Vec<BoundReport>, String> = match *check {
            "km" | "last-iterate" => match series.as_ref().expect("series computed") {
                Ok(s) if *check == "km" => check_km_bound(traj, s, z_star)
                    .map(|r| vec![r])
                    .map_err(|e| e.to_string()),
                Ok(s) => check_last_iterate(traj, s, z_star).map_err(|e| e.to_string()),
                Err(e) => Err(e.clone()),
            },
            "bounded-iterates" => check_iterate_bound(traj, z_star)
                .map(|r| vec![r])
                .map_err(|e| e.to_string()),
            "la2" => check_la2_bound(traj, &resolved.problem, &resolved.params, z_star)
                .map(|r| vec![r])
                .map_err(|e| e.to_string()),
            "cegplus" => check_cegplus_bounds(traj, &resolved.problem, &resolved.params, z_star)
                .map_err(|e| e.to_string()),
            "h-cocoercivity" => check_h_cocoercivity(
                &resolved.problem,
                resolved.params.gamma,
                COCOERCIVITY_SAMPLES,
                resolved.params.seed,
            )
            .map(|r| vec![r])
            .map_err(|e| e.to_string()),
            _ => continue,
        };
        match reports {
            Ok(r) => out.extend(r),
            Err(reason) => out.push(BoundReport::inapplicable(check, reason)),
        }
    }
    out
}

fn slope_fits(resolved: &Resolved, residuals: &[f64]) -> Value {
    let checkpoints: Vec<usize> = std::iter::successors(Some(10usize), |c| c.checked_mul(10))
        .take_while(|c| *c < residuals.len())
        .collect();
    if checkpoints.len() < 2 {
        return json!({"error": "slope fits need K >= 100"});
    }
    let series = ResidualSeries::new(
        residuals.to_vec(),
        resolved.residual_kind,
        resolved.residual_gamma,
    );
    match series.and_then(|s| slope_fit(&s, &checkpoints)) {
        Ok(fit) => json!({"checkpoints": checkpoints, "fit": fit}),
        Err(e) => json!({"checkpoints": checkpoints, "error": e.to_string()}),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(pairs: &[(&str, &str)]) -> RunConfig {
        let mut c = RunConfig::default();
        for (k, v) in pairs {
            c.set(k, v).unwrap();
        }
        c
    }

    #[test]
    fn auto_gamma_and_tau() {
        let r = resolve(&cfg(&[("problem", "forsaken"), ("solver", "la-gda")])).unwrap();
        assert!((r.params.gamma - 1.0 / 12.4026).abs() < 1e-4);
        assert_eq!(r.residual_kind, ResidualKind::StepNorm);

        let r = resolve(&cfg(&[("problem", "polar"), ("solver", "cegplus")])).unwrap();
        assert!((r.params.gamma * r.problem.lipschitz.unwrap() - 0.9).abs() < 1e-15);

        let r = resolve(&cfg(&[
            ("rho", "-0.3"),
            ("L", "1"),
            ("gamma", "0.7"),
            ("K", "1000"),
            ("tau", "auto-last"),
        ]))
        .unwrap();
        assert_eq!(r.params.tau, tau_schedule(1000, 0.7, ScheduleMode::Last).unwrap());
        assert_eq!(r.checks, vec!["km", "last-iterate", "bounded-iterates"]);
    }

    #[test]
    fn invalid_configs() {
        assert!(resolve(&cfg(&[("a", "1"), ("rho", "-0.3")])).is_err());
        assert!(resolve(&cfg(&[("problem", "polar"), ("b", "1")])).is_err());
        assert!(resolve(&cfg(&[("z0", "1,2,3")])).is_err());
        assert!(resolve(&cfg(&[("tau", "0")])).is_err());
        assert!(resolve(&cfg(&[("residual", "operator"), ("problem", "forsaken")])).is_err());
    }
}
