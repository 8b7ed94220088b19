//! Parameter grids and figure presets fanned out over a worker pool.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::experiment::{self, RunOutcome, Status};

/// One planned run: a label plus the overrides applied to the base config.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub label: String,
    pub overrides: Vec<(String, String)>,
}

impl Point {
    fn new(label: &str, overrides: &[(&str, &str)]) -> Self {
        Point {
            label: label.to_string(),
            overrides: overrides
                .iter()
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect(),
        }
    }
}

/// Parses `key=v1,v2,...`; values containing commas (start points) are
/// separated by `;` instead.
pub fn parse_axis(spec: &str) -> Result<(String, Vec<String>)> {
    let (key, values) = spec
        .split_once('=')
        .ok_or_else(|| anyhow!("grid axis '{spec}' must look like key=v1,v2"))?;
    let sep = if values.contains(';') { ';' } else { ',' };
    let values: Vec<String> = values
        .split(sep)
        .map(|v| v.trim().to_string())
        .filter(|v| !v.is_empty())
        .collect();
    if values.is_empty() {
        bail!("grid axis '{key}' has no values");
    }
    Ok((key.trim().to_string(), values))
}

/// Cartesian product of the axes, last axis varying fastest.
pub fn grid_points(axes: &[(String, Vec<String>)]) -> Vec<Point> {
    let mut points = vec![Point {
        label: String::new(),
        overrides: Vec::new(),
    }];
    for (key, values) in axes {
        points = points
            .into_iter()
            .flat_map(|p| {
                values.iter().map(move |v| {
                    let mut q = p.clone();
                    q.overrides.push((key.clone(), v.clone()));
                    q
                })
            })
            .collect();
    }
    for p in &mut points {
        p.label = p
            .overrides
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ");
    }
    points
}

pub const PRESETS: [&str; 2] = ["fig-forsaken", "fig-la"];

/// Method sets of the figure presets. Each run gets a 10⁵ oracle-call budget.
pub fn preset_points(name: &str) -> Result<Vec<Point>> {
    let common: &[(&str, &str)] = &[("budget", "100000"), ("K", "100000"), ("z0", "default")];
    let with = |label: &str, own: &[(&str, &str)]| {
        let mut all = common.to_vec();
        all.extend_from_slice(own);
        Point::new(label, &all)
    };
    match name {
        "fig-forsaken" => {
            let l = interp_solve_core::problems::forsaken()
                .lipschitz
                .ok_or_else(|| anyhow!("forsaken has no Lipschitz constant"))?;
            let inv_l = format!("{:e}", 1.0 / l);
            let four_inv_l = format!("{:e}", 4.0 / l);
            let base = [("problem", "forsaken"), ("residual", "step"), ("residual-gamma", inv_l.as_str())];
            let mut runs = Vec::new();
            for (label, own) in [
                ("la-gda", vec![("solver", "la-gda"), ("tau", "20"), ("lambda", "0.2"), ("gamma", inv_l.as_str())]),
                ("la-cegplus", vec![("solver", "la-cegplus"), ("tau", "20"), ("lambda", "0.2"), ("gamma", inv_l.as_str()), ("alpha", "0.25")]),
                ("rapp", vec![("solver", "rapp"), ("tau", "10"), ("lambda", "0.2"), ("gamma", four_inv_l.as_str()), ("permissive", "true")]),
                ("app", vec![("solver", "rapp"), ("tau", "10"), ("lambda", "1"), ("gamma", four_inv_l.as_str()), ("permissive", "true")]),
            ] {
                let mut o = base.to_vec();
                o.extend(own);
                runs.push(with(label, &o));
            }
            Ok(runs)
        }
        "fig-la" => {
            let mut runs = Vec::new();
            for (problem, pspec) in [
                ("polar", vec![("problem", "polar")]),
                ("quadratic", vec![("problem", "quadratic"), ("rho", "-3.333333333333333e-1"), ("L", "1")]),
            ] {
                for (method, own) in [
                    ("la-gda-tau2", vec![("solver", "la-gda"), ("tau", "2")]),
                    ("la-gda-tau10", vec![("solver", "la-gda"), ("tau", "10")]),
                    ("la-eg", vec![("solver", "la-eg"), ("tau", "10")]),
                    ("la-cegplus", vec![("solver", "la-cegplus"), ("tau", "10"), ("alpha", "0.1")]),
                ] {
                    let mut o = pspec.clone();
                    o.extend([("gamma", "auto"), ("lambda", "0.1"), ("permissive", "true"), ("checks", "none")]);
                    o.extend(own);
                    runs.push(with(&format!("{problem} {method}"), &o));
                }
            }
            Ok(runs)
        }
        other => bail!("unknown preset '{other}' (expected one of {})", PRESETS.join(", ")),
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Runs every point into `dir/run_NNN.{csv,json}` and writes `dir/summary.csv`
/// in point order. Returns the outcomes, `Err` per point for config errors.
pub fn sweep(
    base: &RunConfig,
    points: &[Point],
    dir: &Path,
    jobs: usize,
) -> Result<Vec<std::result::Result<RunOutcome, String>>> {
    if points.is_empty() {
        bail!("sweep grid is empty");
    }
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let summary_path = dir.join("summary.csv");
    std::fs::write(&summary_path, "")
        .with_context(|| format!("cannot write {}", summary_path.display()))?;
    let width = points.len().saturating_sub(1).to_string().len().max(3);
    let configs: Vec<std::result::Result<RunConfig, String>> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let mut cfg = base.clone();
            for (k, v) in &p.overrides {
                cfg.set(k, v).map_err(|e| format!("{e:#}"))?;
            }
            cfg.output = dir.join(format!("run_{i:0width$}.csv"));
            Ok(cfg)
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .context("building worker pool")?;
    let outcomes: Vec<std::result::Result<RunOutcome, String>> = pool.install(|| {
        configs
            .par_iter()
            .map(|c| match c {
                Ok(cfg) => experiment::execute(cfg).map_err(|e| format!("{e:#}")),
                Err(e) => Err(e.clone()),
            })
            .collect()
    });

    let mut summary = String::from(
        "run,label,stop_reason,final_residual,oracle_calls,iterations,bounds,error\n",
    );
    for (i, (p, o)) in points.iter().zip(&outcomes).enumerate() {
        match o {
            Ok(o) => {
                let bounds = o
                    .bounds
                    .iter()
                    .map(|(name, ok)| {
                        let flag = match ok {
                            Some(true) => "pass",
                            Some(false) => "fail",
                            None => "n/a",
                        };
                        format!("{name}={flag}")
                    })
                    .collect::<Vec<_>>()
                    .join(";");
                let _ = writeln!(
                    summary,
                    "{i},{},{},{:.16e},{},{},{},{}",
                    csv_field(&p.label),
                    o.stop_reason,
                    o.final_residual,
                    o.oracle_calls,
                    o.iterations,
                    csv_field(&bounds),
                    csv_field(o.error.as_deref().unwrap_or(""))
                );
            }
            Err(e) => {
                let _ = writeln!(summary, "{i},{},error,,,,,{}", csv_field(&p.label), csv_field(e));
            }
        }
    }
    std::fs::write(&summary_path, summary)
        .with_context(|| format!("writing {}", summary_path.display()))?;
    Ok(outcomes)
}

/// Exit status of a sweep: 0 when some run finished, 2 when every run that
/// got going diverged, 1 otherwise.
pub fn exit_code(outcomes: &[std::result::Result<RunOutcome, String>]) -> i32 {
    let statuses: Vec<Status> = outcomes.iter().filter_map(|o| o.as_ref().ok().map(|o| o.status)).collect();
    if statuses.contains(&Status::Finished) {
        0
    } else if !statuses.is_empty() && statuses.iter().all(|s| *s == Status::Diverged) {
        2
    } else {
        1
    }
}
