//! Checks of recorded trajectories against convergence bounds.
//!
//! Every check returns a [`BoundReport`] holding per-index `lhs ≤ rhs` pairs.
//! Checks whose hypotheses fail return an inapplicable report rather than an
//! error; missing inputs are [`Error::Diagnostics`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::problems::{sample_pairs, ProblemSpec};
use crate::solvers::{SolverKind, SolverParams, Trajectory};

use super::residual::ResidualSeries;

pub const BOUND_ABS_TOL: f64 = 1e-9;
pub const BOUND_REL_TOL: f64 = 1e-9;
/// Absolute tolerance of the Fejér monotonicity check.
pub const FEJER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound_name: String,
    pub applicable: bool,
    pub inapplicable_reason: Option<String>,
    pub lhs: Vec<f64>,
    pub rhs: Vec<f64>,
    pub satisfied: Vec<bool>,
    /// `min_i (rhs_i − lhs_i)`; `None` when there are no indices.
    pub margin: Option<f64>,
    /// `sup_j ‖z^j − z*‖` over the trajectory.
    pub d_estimate: f64,
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub notes: Vec<String>,
}

impl BoundReport {
    pub fn evaluate(name: &str, lhs: Vec<f64>, rhs: Vec<f64>, d_estimate: f64) -> Self {
        Self::evaluate_with_tol(name, lhs, rhs, d_estimate, BOUND_ABS_TOL, BOUND_REL_TOL)
    }

    pub fn evaluate_with_tol(
        name: &str,
        lhs: Vec<f64>,
        rhs: Vec<f64>,
        d_estimate: f64,
        abs_tol: f64,
        rel_tol: f64,
    ) -> Self {
        debug_assert_eq!(lhs.len(), rhs.len());
        let satisfied = lhs
            .iter()
            .zip(&rhs)
            .map(|(l, r)| *l <= r + abs_tol + rel_tol * r.abs())
            .collect();
        let margin = lhs
            .iter()
            .zip(&rhs)
            .map(|(l, r)| r - l)
            .reduce(f64::min);
        BoundReport {
            bound_name: name.to_string(),
            applicable: true,
            inapplicable_reason: None,
            lhs,
            rhs,
            satisfied,
            margin,
            d_estimate,
            abs_tol,
            rel_tol,
            notes: Vec::new(),
        }
    }

    pub fn inapplicable(name: &str, reason: impl Into<String>) -> Self {
        BoundReport {
            bound_name: name.to_string(),
            applicable: false,
            inapplicable_reason: Some(reason.into()),
            lhs: Vec::new(),
            rhs: Vec::new(),
            satisfied: Vec::new(),
            margin: None,
            d_estimate: f64::NAN,
            abs_tol: BOUND_ABS_TOL,
            rel_tol: BOUND_REL_TOL,
            notes: Vec::new(),
        }
    }

    /// `Some(pass)` for applicable reports, `None` otherwise.
    pub fn outcome(&self) -> Option<bool> {
        self.applicable.then(|| self.satisfied.iter().all(|s| *s))
    }

    pub fn holds(&self) -> bool {
        self.outcome() == Some(true)
    }

    pub fn first_violation(&self) -> Option<usize> {
        self.satisfied.iter().position(|s| !s)
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.notes.push(note.into());
        self
    }
}

/// Per-step error norms `‖e^k‖`, zero for exact schemes.
fn step_errors(traj: &Trajectory) -> Result<Vec<f64>> {
    let steps = traj.steps();
    match &traj.recorded_errors {
        Some(e) if e.len() >= steps => Ok(e[..steps].to_vec()),
        Some(e) => Err(Error::Diagnostics(format!(
            "{} recorded errors for {steps} steps",
            e.len()
        ))),
        None if traj.params.sigma0 > 0.0 => Err(Error::Diagnostics(
            "stochastic trajectory has no recorded errors".into(),
        )),
        None if matches!(traj.solver, SolverKind::Rapp | SolverKind::RelaxedPp) => Err(
            Error::Diagnostics("inexact trajectory has no recorded errors".into()),
        ),
        None => Ok(vec![0.0; steps]),
    }
}

fn check_residual_length(traj: &Trajectory, residuals: &ResidualSeries) -> Result<()> {
    if residuals.values.len() < traj.iterates.len() {
        return Err(Error::Diagnostics(format!(
            "{} residuals for {} iterates",
            residuals.values.len(),
            traj.iterates.len()
        )));
    }
    Ok(())
}

/// `ρ > −γ/2` when `ρ` is known: `J_{γS}` is then (quasi-)nonexpansive.
fn resolvent_hypothesis(traj: &Trajectory) -> Option<String> {
    let lambda = traj.params.lambda;
    if !(lambda > 0.0 && lambda < 1.0) {
        return Some(format!("lambda = {lambda} is outside (0, 1)"));
    }
    match traj.problem.rho {
        Some(rho) if traj.solver.is_resolvent_km() && rho <= -traj.params.gamma / 2.0 => Some(
            format!("rho = {rho} <= -gamma/2 = {}", -traj.params.gamma / 2.0),
        ),
        _ => None,
    }
}

fn residual_notes(traj: &Trajectory, residuals: &ResidualSeries, report: BoundReport) -> BoundReport {
    let mut report = report;
    if !residuals.kind.is_resolvent() {
        report = report.note(format!("residual kind '{}' is not a resolvent residual", residuals.kind));
    }
    if residuals.gamma != traj.params.gamma {
        report = report.note("residual stepsize differs from the solver stepsize");
    }
    if traj.errors_estimated {
        report = report.note("errors measured against an estimated resolvent");
    }
    report
}

/// Right-hand side of the averaged KM bound for every prefix `K = 1..=steps`.
fn km_rhs(traj: &Trajectory, errors: &[f64], z_star: &Point) -> Vec<f64> {
    let lambda = traj.params.lambda;
    let d0_sq = traj.first().dist(z_star).powi(2);
    let mut eps_sum = 0.0;
    (0..traj.steps())
        .map(|k| {
            let e = errors[k];
            eps_sum += 2.0 * lambda * e * traj.iterates[k].dist(z_star) + lambda * lambda * e * e;
            (d0_sq + eps_sum) / (lambda * (1.0 - lambda) * (k + 1) as f64)
        })
        .collect()
}

/// Averaged residual bound of inexact KM:
/// `(1/K) Σ_{k<K} r_k² ≤ (‖z⁰ − z*‖² + Σ_{k<K} ε_k) / (λ(1 − λ)K)` for every
/// prefix, with `ε_k = 2λ‖e^k‖‖z^k − z*‖ + λ²‖e^k‖²`.
pub fn check_km_bound(
    traj: &Trajectory,
    residuals: &ResidualSeries,
    z_star: &Point,
) -> Result<BoundReport> {
    const NAME: &str = "km";
    check_residual_length(traj, residuals)?;
    let errors = step_errors(traj)?;
    if let Some(reason) = resolvent_hypothesis(traj) {
        return Ok(BoundReport::inapplicable(NAME, reason));
    }
    let rhs = km_rhs(traj, &errors, z_star);
    let mut sum = 0.0;
    let lhs = (0..traj.steps())
        .map(|k| {
            sum += residuals.values[k].powi(2);
            sum / (k + 1) as f64
        })
        .collect();
    let report = BoundReport::evaluate(NAME, lhs, rhs, traj.diameter_from(z_star));
    Ok(residual_notes(traj, residuals, report))
}

/// Last-iterate checks for KM around an inexact resolvent.
///
/// Returns the per-step inequality `r_{k+1}² ≤ r_k² + δ_k` with
/// `δ_k = 4‖e^k‖(‖z^{k+1} − z*‖ + ‖z^k − z*‖)`, and the prefix bound
/// `r_K² ≤ km_rhs(K) + (1/K) Σ_{j<K} (j + 1) δ_j`.
pub fn check_last_iterate(
    traj: &Trajectory,
    residuals: &ResidualSeries,
    z_star: &Point,
) -> Result<Vec<BoundReport>> {
    const STEP: &str = "last-iterate-step";
    const PREFIX: &str = "last-iterate";
    if !residuals.kind.is_resolvent() {
        return Err(Error::Diagnostics(
            "last-iterate checks need resolvent residuals".into(),
        ));
    }
    check_residual_length(traj, residuals)?;
    let errors = step_errors(traj)?;
    if let Some(reason) = resolvent_hypothesis(traj) {
        return Ok(vec![
            BoundReport::inapplicable(STEP, reason.clone()),
            BoundReport::inapplicable(PREFIX, reason),
        ]);
    }
    let steps = traj.steps();
    let r_sq: Vec<f64> = residuals.values.iter().map(|r| r * r).collect();
    let delta: Vec<f64> = (0..steps)
        .map(|k| {
            4.0 * errors[k]
                * (traj.iterates[k + 1].dist(z_star) + traj.iterates[k].dist(z_star))
        })
        .collect();
    let d = traj.diameter_from(z_star);

    let step_lhs = (0..steps).map(|k| r_sq[k + 1]).collect();
    let step_rhs = (0..steps).map(|k| r_sq[k] + delta[k]).collect();
    let step = residual_notes(traj, residuals, BoundReport::evaluate(STEP, step_lhs, step_rhs, d));

    let km = km_rhs(traj, &errors, z_star);
    let mut weighted = 0.0;
    let prefix_rhs: Vec<f64> = (0..steps)
        .map(|k| {
            weighted += (k + 1) as f64 * delta[k];
            km[k] + weighted / (k + 1) as f64
        })
        .collect();
    let prefix_lhs = (0..steps).map(|k| r_sq[k + 1]).collect();
    let mut prefix = residual_notes(
        traj,
        residuals,
        BoundReport::evaluate(PREFIX, prefix_lhs, prefix_rhs.clone(), d),
    );
    let vacuous = prefix_rhs.iter().filter(|r| **r >= r_sq[0]).count();
    if vacuous > 0 {
        prefix = prefix.note(format!(
            "rhs is vacuous (>= initial squared residual) at {vacuous} of {steps} prefixes"
        ));
    }
    Ok(vec![step, prefix])
}

/// Iterate boundedness `‖z^{k+1} − z*‖ ≤ ‖z⁰ − z*‖ + λ Σ_{j≤k} ‖e^j‖`.
pub fn check_iterate_bound(traj: &Trajectory, z_star: &Point) -> Result<BoundReport> {
    const NAME: &str = "bounded-iterates";
    let errors = step_errors(traj)?;
    if let Some(reason) = resolvent_hypothesis(traj) {
        return Ok(BoundReport::inapplicable(NAME, reason));
    }
    let lambda = traj.params.lambda;
    let d0 = traj.first().dist(z_star);
    let mut acc = 0.0;
    let rhs = errors
        .iter()
        .map(|e| {
            acc += e;
            d0 + lambda * acc
        })
        .collect();
    let lhs = traj.iterates[1..].iter().map(|z| z.dist(z_star)).collect();
    Ok(BoundReport::evaluate(NAME, lhs, rhs, traj.diameter_from(z_star)))
}

/// Hypotheses of the two-step Lookahead-GDA rate; `Err` names the first
/// violated one.
pub fn la2_conditions(rho: f64, lipschitz: f64, gamma: f64, lambda: f64) -> std::result::Result<(), String> {
    if !(lambda > 0.0 && lambda < 0.5) {
        return Err(format!("lambda = {lambda} is outside (0, 1/2)"));
    }
    if gamma * lipschitz > 1.0 {
        return Err(format!("gamma*L = {} exceeds 1", gamma * lipschitz));
    }
    if !(2.0 * rho > -(1.0 - 2.0 * lambda) * gamma) {
        return Err(format!("2 rho = {} <= -(1 - 2 lambda) gamma", 2.0 * rho));
    }
    let second = 2.0 * lambda * gamma - (1.0 - gamma * gamma * lipschitz * lipschitz) * gamma;
    if !(2.0 * rho >= second) {
        return Err(format!("2 rho = {} < 2 lambda gamma - (1 - gamma^2 L^2) gamma = {second}", 2.0 * rho));
    }
    Ok(())
}

/// `λγ((1 − 2λ)γ + 2ρ)`, the denominator coefficient of the two-step rate.
pub fn la2_coefficient(rho: f64, gamma: f64, lambda: f64) -> f64 {
    lambda * gamma * ((1.0 - 2.0 * lambda) * gamma + 2.0 * rho)
}

/// Two-step Lookahead-GDA rate
/// `(1/K) Σ_{k<K} ‖F z̄^k‖² ≤ ‖z⁰ − z*‖² / (λγ((1 − 2λ)γ + 2ρ)K)` with
/// `z̄^k = z^k − γFz^k`.
pub fn check_la2_bound(
    traj: &Trajectory,
    problem: &ProblemSpec,
    params: &SolverParams,
    z_star: &Point,
) -> Result<BoundReport> {
    const NAME: &str = "la2";
    let (rho, l) = match (problem.rho, problem.lipschitz) {
        (Some(r), Some(l)) => (r, l),
        _ => {
            return Err(Error::Diagnostics(
                "two-step Lookahead bound needs rho and L metadata".into(),
            ))
        }
    };
    if traj.solver != SolverKind::LaGda || params.tau != 2 {
        return Err(Error::Diagnostics(
            "two-step Lookahead bound needs a Lookahead-GDA run with tau = 2".into(),
        ));
    }
    if problem.is_constrained() {
        return Ok(BoundReport::inapplicable(NAME, "problem is constrained"));
    }
    let (gamma, lambda) = (params.gamma, params.lambda);
    if let Err(reason) = la2_conditions(rho, l, gamma, lambda) {
        return Ok(BoundReport::inapplicable(NAME, reason));
    }
    let coef = la2_coefficient(rho, gamma, lambda);
    let d0_sq = traj.first().dist(z_star).powi(2);
    let mut sum = 0.0;
    let mut lhs = Vec::with_capacity(traj.steps());
    let mut rhs = Vec::with_capacity(traj.steps());
    for k in 0..traj.steps() {
        let z = &traj.iterates[k];
        let z_bar = z.axpy(-gamma, &problem.field.eval(z));
        sum += problem.field.eval(&z_bar).norm_sq();
        let kk = (k + 1) as f64;
        lhs.push(sum / kk);
        rhs.push(d0_sq / (coef * kk));
    }
    Ok(BoundReport::evaluate(NAME, lhs, rhs, traj.diameter_from(z_star)))
}

/// `ρ` used by the CEG+ checks: metadata, else the lower end of the
/// annotated range.
fn cegplus_rho(problem: &ProblemSpec) -> Result<(f64, Option<String>)> {
    match (problem.rho, problem.rho_range) {
        (Some(r), _) => Ok((r, None)),
        (None, Some((lo, _))) => Ok((
            lo,
            Some(format!("rho taken as {lo:e}, the lower end of the annotated range")),
        )),
        (None, None) => Err(Error::Diagnostics("CEG+ bounds need rho metadata".into())),
    }
}

/// CEG+ checks: Fejér monotonicity, the averaged step bound
/// `(1/K) Σ ‖z^k − z̄^k‖² ≤ ‖z⁰ − z*‖² / (a(1 − γ²L²)K)` and the averaged
/// distance bound `(1/K) Σ dist(0, S z̄^k)² ≤ ‖z⁰ − z*‖² / (aγ²(1 + 2ρ/γ − a)K)`,
/// where `a = 2α` is the effective relaxation and
/// `dist(0, S z̄) = ‖Hz − Hz̄‖ / γ`.
pub fn check_cegplus_bounds(
    traj: &Trajectory,
    problem: &ProblemSpec,
    params: &SolverParams,
    z_star: &Point,
) -> Result<Vec<BoundReport>> {
    const FEJER: &str = "cegplus-fejer";
    const STEP: &str = "cegplus-step";
    const DIST: &str = "cegplus-dist";
    let l = problem
        .lipschitz
        .ok_or_else(|| Error::Diagnostics("CEG+ bounds need L metadata".into()))?;
    let (rho, rho_note) = cegplus_rho(problem)?;
    let a_eff = match traj.solver {
        SolverKind::Cegplus => 2.0 * params.alpha,
        SolverKind::Fbf => 1.0,
        other => {
            return Err(Error::Diagnostics(format!(
                "CEG+ bounds need a cegplus or fbf run, got {other}"
            )))
        }
    };
    let gamma = params.gamma;
    let gl = gamma * l;
    let upper = 1.0 + 2.0 * rho / gamma;
    let d = traj.diameter_from(z_star);
    let steps = traj.steps();
    let with_note = |r: BoundReport| match &rho_note {
        Some(n) => r.note(n.clone()),
        None => r,
    };

    let base_violation = if gl > 1.0 {
        Some(format!("gamma*L = {gl} exceeds 1"))
    } else if gamma <= (-2.0 * rho).max(0.0) {
        Some(format!("gamma = {gamma} <= max(0, -2 rho)"))
    } else {
        None
    };

    let fejer = match (&base_violation, a_eff <= upper) {
        (Some(r), _) => BoundReport::inapplicable(FEJER, r.clone()),
        (None, false) => BoundReport::inapplicable(
            FEJER,
            format!("2 alpha = {a_eff} exceeds 1 + 2 rho/gamma = {upper}"),
        ),
        (None, true) => {
            let lhs = (0..steps).map(|k| traj.iterates[k + 1].dist(z_star)).collect();
            let rhs = (0..steps).map(|k| traj.iterates[k].dist(z_star)).collect();
            BoundReport::evaluate_with_tol(FEJER, lhs, rhs, d, FEJER_TOL, 0.0)
        }
    };

    let z_bars: Vec<Point> = match &traj.aux_iterates {
        Some(aux) if aux.len() >= steps => aux[..steps].to_vec(),
        _ => traj.iterates[..steps]
            .iter()
            .map(|z| {
                problem
                    .resolvent
                    .apply_unchecked(&z.axpy(-gamma, &problem.field.eval(z)))
            })
            .collect(),
    };
    let d0_sq = traj.first().dist(z_star).powi(2);
    let h = |z: &Point| z.axpy(-gamma, &problem.field.eval(z));

    let step_violation = base_violation.clone().or_else(|| {
        if gl >= 1.0 {
            Some(format!("gamma*L = {gl} is not below 1"))
        } else if !(a_eff > 0.0 && a_eff <= 1.0) {
            Some(format!("2 alpha = {a_eff} is outside (0, 1]"))
        } else if a_eff >= upper {
            Some(format!("2 alpha = {a_eff} is not below 1 + 2 rho/gamma = {upper}"))
        } else {
            None
        }
    });
    let step = match step_violation {
        Some(r) => BoundReport::inapplicable(STEP, r),
        None => {
            let coef = a_eff * (1.0 - gl * gl);
            let mut sum = 0.0;
            let mut lhs = Vec::with_capacity(steps);
            let mut rhs = Vec::with_capacity(steps);
            for (k, (z, z_bar)) in traj.iterates.iter().zip(&z_bars).take(steps).enumerate() {
                sum += z.dist(z_bar).powi(2);
                let kk = (k + 1) as f64;
                lhs.push(sum / kk);
                rhs.push(d0_sq / (coef * kk));
            }
            BoundReport::evaluate(STEP, lhs, rhs, d)
        }
    };

    let dist_violation = base_violation.or_else(|| {
        if !(a_eff > 0.0 && a_eff < 1.0) {
            Some(format!("2 alpha = {a_eff} is outside (0, 1)"))
        } else if a_eff >= upper {
            Some(format!("2 alpha = {a_eff} is not below 1 + 2 rho/gamma = {upper}"))
        } else {
            None
        }
    });
    let dist = match dist_violation {
        Some(r) => BoundReport::inapplicable(DIST, r),
        None => {
            let coef = a_eff * gamma * gamma * (upper - a_eff);
            let mut sum = 0.0;
            let mut lhs = Vec::with_capacity(steps);
            let mut rhs = Vec::with_capacity(steps);
            for (k, (z, z_bar)) in traj.iterates.iter().zip(&z_bars).take(steps).enumerate() {
                let dist = h(z).dist(&h(z_bar)) / gamma;
                sum += dist * dist;
                let kk = (k + 1) as f64;
                lhs.push(sum / kk);
                rhs.push(d0_sq / (coef * kk));
            }
            BoundReport::evaluate(DIST, lhs, rhs, d)
        }
    };
    Ok(vec![with_note(fejer), with_note(step), with_note(dist)])
}

/// Cocoercivity of `H = id − γF` on sampled pairs:
/// `½‖ΔH‖² + ½(1 − γ²L²)‖Δz‖² ≤ ⟨ΔH, Δz⟩`.
pub fn check_h_cocoercivity(
    problem: &ProblemSpec,
    gamma: f64,
    samples: usize,
    seed: u64,
) -> Result<BoundReport> {
    let l = problem
        .lipschitz
        .ok_or_else(|| Error::Diagnostics("H-cocoercivity needs L metadata".into()))?;
    if !(gamma > 0.0) || gamma * l > 1.0 {
        return Err(Error::param(format!(
            "H-cocoercivity needs 0 < gamma <= 1/L, got gamma*L = {}",
            gamma * l
        )));
    }
    let pairs = sample_pairs(problem, samples, seed);
    pairs_h_cocoercivity(problem, gamma, l, &pairs)
}

/// As [`check_h_cocoercivity`] on explicit pairs.
pub fn pairs_h_cocoercivity(
    problem: &ProblemSpec,
    gamma: f64,
    lipschitz: f64,
    pairs: &[(Point, Point)],
) -> Result<BoundReport> {
    let c = 1.0 - gamma * gamma * lipschitz * lipschitz;
    let h = |z: &Point| z.axpy(-gamma, &problem.field.eval(z));
    let mut lhs = Vec::with_capacity(pairs.len());
    let mut rhs = Vec::with_capacity(pairs.len());
    for (z, w) in pairs {
        let dz = w - z;
        let dh = &h(w) - &h(z);
        lhs.push(0.5 * dh.norm_sq() + 0.5 * c * dz.norm_sq());
        rhs.push(dh.dot(&dz));
    }
    Ok(BoundReport::evaluate("h-cocoercivity", lhs, rhs, f64::NAN))
}

/// Combines replications of an in-expectation bound: index `i` passes when the
/// mean of `lhs − rhs` is at most three standard errors above zero.
pub fn mean_over_replications(reports: &[BoundReport]) -> Result<BoundReport> {
    let first = reports
        .first()
        .ok_or_else(|| Error::Diagnostics("no replications".into()))?;
    if reports.len() < 2 {
        return Err(Error::Diagnostics("at least two replications are needed".into()));
    }
    if let Some(r) = reports.iter().find(|r| !r.applicable) {
        return Ok(BoundReport::inapplicable(
            &first.bound_name,
            r.inapplicable_reason.clone().unwrap_or_default(),
        ));
    }
    let n = first.lhs.len();
    if reports
        .iter()
        .any(|r| r.bound_name != first.bound_name || r.lhs.len() != n)
    {
        return Err(Error::Diagnostics("replications differ in bound or length".into()));
    }
    let m = reports.len() as f64;
    let mut lhs = Vec::with_capacity(n);
    let mut rhs = Vec::with_capacity(n);
    for i in 0..n {
        let gaps: Vec<f64> = reports.iter().map(|r| r.lhs[i] - r.rhs[i]).collect();
        let mean_gap = gaps.iter().sum::<f64>() / m;
        let var = gaps.iter().map(|g| (g - mean_gap).powi(2)).sum::<f64>() / (m - 1.0);
        let se = (var / m).sqrt();
        let mean_lhs = reports.iter().map(|r| r.lhs[i]).sum::<f64>() / m;
        lhs.push(mean_lhs);
        rhs.push(mean_lhs - mean_gap + 3.0 * se);
    }
    let d = reports.iter().map(|r| r.d_estimate).fold(0.0, f64::max);
    let mut report = BoundReport::evaluate(&first.bound_name, lhs, rhs, d);
    report.notes.push(format!(
        "mean over {} replications with 3 standard errors of slack",
        reports.len()
    ));
    Ok(report)
}
