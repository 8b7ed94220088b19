//! Full runs producing [`Trajectory`] records.

use crate::diagnostics::residual;
use crate::error::{Error, Result};
use crate::oracle::{EvalBudget, Oracle, StochasticOracle};
use crate::point::Point;
use crate::problems::{ProblemSpec, ProblemSummary};

use super::params::{LookaheadBase, SolverKind, SolverParams};
use super::steps::{
    cegplus_step, prox_inner, prox_reference, projected_eg_step, projected_gda_step,
};
use super::trajectory::{StopReason, Trajectory, DIVERGENCE_NORM};

/// Inner-step cap of the relaxed proximal point emulation.
pub const RELAXED_PP_INNER_CAP: usize = 1_000_000;

const RELAXED_PP_DEFAULT_TOL: f64 = 1e-13;

/// Multiplier on `τ` for the reference resolvent used to record errors on
/// nonlinear problems.
const REFERENCE_TAU_FACTOR: usize = 4;

/// Collects validation outcomes: errors when strict, warnings otherwise.
struct Validator {
    strict: bool,
    warnings: Vec<String>,
}

impl Validator {
    fn new(params: &SolverParams) -> Self {
        Validator {
            strict: params.is_strict(),
            warnings: Vec::new(),
        }
    }

    fn require(&mut self, ok: bool, msg: impl FnOnce() -> String) -> Result<()> {
        if ok {
            Ok(())
        } else if self.strict {
            Err(Error::Parameter(msg()))
        } else {
            self.warnings.push(msg());
            Ok(())
        }
    }

    fn warn(&mut self, msg: impl Into<String>) {
        self.warnings.push(msg.into());
    }

    /// `λ ∈ (0, 1)`; permissive mode also admits `λ = 1`.
    fn relaxation(&mut self, lambda: f64) -> Result<()> {
        if !(lambda > 0.0 && lambda <= 1.0) {
            return Err(Error::param(format!("lambda must be in (0, 1), got {lambda}")));
        }
        self.require(lambda < 1.0, || "lambda = 1 is outside (0, 1)".to_string())
    }

    /// `γL < 1` (or `≤ 1` when `closed`), when `L` is known.
    fn step_below_inverse_lipschitz(
        &mut self,
        problem: &ProblemSpec,
        gamma: f64,
        closed: bool,
    ) -> Result<()> {
        match problem.lipschitz {
            Some(l) => {
                let gl = gamma * l;
                let ok = if closed { gl <= 1.0 } else { gl < 1.0 };
                let rel = if closed { "<=" } else { "<" };
                self.require(ok, || format!("gamma*L = {gl} violates gamma*L {rel} 1"))
            }
            None => {
                self.warn("L unknown; gamma*L condition not validated");
                Ok(())
            }
        }
    }

    /// `γ > max(0, −2ρ)`, when `ρ` is known.
    fn step_above_cohypomonotonicity(&mut self, problem: &ProblemSpec, gamma: f64) -> Result<()> {
        match problem.rho {
            Some(rho) => {
                let lower = (-2.0 * rho).max(0.0);
                self.require(gamma > lower, || {
                    format!("gamma = {gamma} must exceed max(0, -2 rho) = {lower}")
                })
            }
            None => {
                self.warn("rho unknown; stepsize lower bound not validated");
                Ok(())
            }
        }
    }

    /// Relaxation `2α ∈ (0, 1 + 2ρ/γ)` of the CEG+ operator, when `ρ` is known.
    fn cegplus_relaxation(&mut self, problem: &ProblemSpec, gamma: f64, alpha: f64) -> Result<()> {
        match problem.rho {
            Some(rho) => {
                let upper = 1.0 + 2.0 * rho / gamma;
                self.require(2.0 * alpha < upper, || {
                    format!("2*alpha = {} must be below 1 + 2 rho/gamma = {upper}", 2.0 * alpha)
                })
            }
            None => {
                self.warn("rho unknown; CEG+ relaxation range not validated");
                Ok(())
            }
        }
    }
}

/// Per-step output of a scheme.
struct StepOut {
    next: Point,
    aux: Option<Point>,
    error: Option<f64>,
}

/// Shared outer loop: budget, target, divergence guard and recording.
struct Driver<'p> {
    problem: &'p ProblemSpec,
    oracle: StochasticOracle,
    budget: EvalBudget,
    traj: Trajectory,
    aux: Vec<Point>,
    errors: Vec<f64>,
    record_aux: bool,
    record_errors: bool,
}

impl<'p> Driver<'p> {
    fn new(
        kind: SolverKind,
        problem: &'p ProblemSpec,
        params: &SolverParams,
        z0: &Point,
        validator: Validator,
    ) -> Result<Self> {
        z0.ensure_dim(problem.dim())?;
        if !z0.is_finite() {
            return Err(Error::param("z0 must be finite"));
        }
        if let Some(rule) = &params.target {
            // surfaces unsupported residual kinds before any computation
            residual(problem, z0, rule.gamma, rule.kind)?;
        }
        let oracle = StochasticOracle::new(problem.field.clone(), params.sigma0, params.seed)?;
        let mut traj = Trajectory::start(kind, problem.summary(), params.clone(), z0.clone());
        traj.warnings = validator.warnings;
        Ok(Driver {
            problem,
            oracle,
            budget: params
                .max_oracle_calls
                .map(EvalBudget::new)
                .unwrap_or_else(EvalBudget::unlimited),
            traj,
            aux: Vec::new(),
            errors: Vec::new(),
            record_aux: true,
            record_errors: false,
        })
    }

    fn params(&self) -> &SolverParams {
        &self.traj.params
    }

    fn target_reached(&self, z: &Point) -> Result<bool> {
        match &self.params().target {
            Some(rule) => Ok(residual(self.problem, z, rule.gamma, rule.kind)? <= rule.value),
            None => Ok(false),
        }
    }

    /// Runs up to `K` outer steps. `calls_per_sample` is the number of oracle
    /// queries per step when known in advance; `step` returns `None` if it had
    /// to stop for lack of budget.
    fn run<F>(mut self, calls_per_sample: Option<u64>, mut step: F) -> Result<Trajectory>
    where
        F: FnMut(&mut StochasticOracle, &Point, u64) -> Result<Option<StepOut>>,
    {
        if self.target_reached(self.traj.first())? {
            self.traj.stop_reason = StopReason::Target;
            return Ok(self.finish());
        }
        let outer = self.params().outer_iters;
        for k in 0..outer {
            let batch = self
                .oracle
                .effective_batch(self.params().batch_mode.batch_at(k));
            if let Some(c) = calls_per_sample {
                if !self.budget.can_spend(c.saturating_mul(batch as u64)) {
                    self.traj.stop_reason = StopReason::Budget;
                    break;
                }
            } else if self.budget.remaining() == 0 {
                self.traj.stop_reason = StopReason::Budget;
                break;
            }
            self.oracle.begin_outer(k as u64, batch);
            let before = self.oracle.calls();
            let z = self.traj.last().clone();
            let out = match step(&mut self.oracle, &z, self.budget.remaining()) {
                Ok(Some(out)) => out,
                Ok(None) => {
                    self.traj.stop_reason = StopReason::Budget;
                    break;
                }
                Err(Error::Convergence { message, .. }) => {
                    let partial = Box::new(self.finish());
                    return Err(Error::Convergence { message, partial });
                }
                Err(e) => return Err(e),
            };
            let spent = self.oracle.calls() - before;
            let charged = self.budget.spend(spent);
            debug_assert!(charged, "step overran the budget");

            let norm = out.next.norm();
            if !out.next.is_finite() || norm > DIVERGENCE_NORM {
                if out.next.is_finite() {
                    self.push(out);
                }
                self.traj.stop_reason = StopReason::Diverged;
                let iteration = k + 1;
                let partial = Box::new(self.finish());
                return Err(Error::Divergence {
                    iteration,
                    norm,
                    partial,
                });
            }
            let next = out.next.clone();
            self.push(out);
            if self.target_reached(&next)? {
                self.traj.stop_reason = StopReason::Target;
                break;
            }
        }
        Ok(self.finish())
    }

    fn push(&mut self, out: StepOut) {
        self.traj.iterates.push(out.next);
        self.traj.oracle_calls.push(self.oracle.calls());
        if let Some(a) = out.aux {
            self.aux.push(a);
        }
        match out.error {
            Some(e) => self.errors.push(e),
            None => self.record_errors = false,
        }
    }

    fn finish(mut self) -> Trajectory {
        if self.record_aux && !self.aux.is_empty() {
            self.traj.aux_iterates = Some(std::mem::take(&mut self.aux));
        }
        if self.record_errors {
            self.traj.recorded_errors = Some(std::mem::take(&mut self.errors));
        }
        self.traj
    }
}

/// Inexact Krasnosel'skiĭ-Mann iteration `z^{k+1} = (1 − λ)z^k + λT(z^k)` over a
/// user-supplied map; each application of `T` counts as one call.
pub fn km_iterate<T>(mut t: T, z0: &Point, lambda: f64, outer_iters: usize) -> Result<Trajectory>
where
    T: FnMut(&Point) -> Point,
{
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::param(format!("KM needs lambda in (0, 1), got {lambda}")));
    }
    let summary = ProblemSummary {
        name: "custom".into(),
        dim: z0.dim(),
        lipschitz: None,
        rho: None,
        constrained: false,
    };
    let params = SolverParams {
        lambda,
        outer_iters,
        ..SolverParams::default()
    };
    let mut traj = Trajectory::start(SolverKind::Custom, summary, params, z0.clone());
    for k in 0..outer_iters {
        let z = traj.last().clone();
        let tz = t(&z);
        z.ensure_dim(tz.dim())?;
        let next = z.lerp(&tz, lambda);
        let norm = next.norm();
        if !next.is_finite() || norm > DIVERGENCE_NORM {
            traj.stop_reason = StopReason::Diverged;
            return Err(Error::Divergence {
                iteration: k + 1,
                norm,
                partial: Box::new(traj),
            });
        }
        traj.iterates.push(next);
        traj.oracle_calls.push(k as u64 + 1);
    }
    Ok(traj)
}

/// KM over the exact resolvent `J_{γS}` of a linear unconstrained problem.
/// One resolvent evaluation is charged per step; recorded errors are zero.
pub fn km_exact_run(problem: &ProblemSpec, params: &SolverParams, z0: &Point) -> Result<Trajectory> {
    params.check_basic()?;
    if !problem.has_closed_form_resolvent() {
        return Err(Error::Unsupported(
            "exact-resolvent KM needs a linear unconstrained problem".into(),
        ));
    }
    let mut v = Validator::new(params);
    v.relaxation(params.lambda)?;
    v.step_above_cohypomonotonicity(problem, params.gamma)?;
    let mut d = Driver::new(SolverKind::KmExact, problem, params, z0, v)?;
    d.record_errors = true;
    let (gamma, lambda) = (params.gamma, params.lambda);
    let field = problem.field.clone();
    d.run(None, move |oracle, z, _| {
        let j = field.linear_resolvent(gamma, z)?;
        // charge one evaluation for the resolvent
        oracle.eval(z, 1);
        Ok(Some(StepOut {
            next: z.lerp(&j, lambda),
            aux: Some(j),
            error: Some(0.0),
        }))
    })
}

enum Reference {
    Exact,
    Estimated(usize),
    Unavailable,
}

fn reference_resolvent(problem: &ProblemSpec, gamma: f64, tau: usize) -> Reference {
    if problem.has_closed_form_resolvent() {
        Reference::Exact
    } else if problem.lipschitz.is_some_and(|l| gamma * l < 1.0) {
        Reference::Estimated(REFERENCE_TAU_FACTOR * tau)
    } else {
        Reference::Unavailable
    }
}

/// Relaxed approximate proximal point method: `w_k` is `τ` steps of the
/// approximate proximal step from `z^k` (with minibatches `n_k`), and
/// `z^{k+1} = (1 − λ)z^k + λw_k`.
///
/// With `τ = 2`, `A ≡ 0` and exact feedback one outer step is an EG+ step.
/// `recorded_errors[k] = ‖w_k − J_{γS}(z^k)‖` uses the closed-form resolvent
/// on linear unconstrained problems and a `4τ`-step deterministic reference
/// otherwise (flagged by `errors_estimated`).
pub fn rapp_run(problem: &ProblemSpec, params: &SolverParams, z0: &Point) -> Result<Trajectory> {
    params.check_basic()?;
    let mut v = Validator::new(params);
    v.relaxation(params.lambda)?;
    v.step_below_inverse_lipschitz(problem, params.gamma, false)?;
    v.step_above_cohypomonotonicity(problem, params.gamma)?;
    let (gamma, lambda, tau) = (params.gamma, params.lambda, params.tau);
    let reference = reference_resolvent(problem, gamma, tau);
    if let Reference::Unavailable = reference {
        v.warn("no reference resolvent; inexactness not recorded");
    }
    let mut d = Driver::new(SolverKind::Rapp, problem, params, z0, v)?;
    d.record_errors = !matches!(reference, Reference::Unavailable);
    d.traj.errors_estimated = matches!(reference, Reference::Estimated(_));
    let field = problem.field.clone();
    let a = problem.resolvent.clone();
    d.run(Some(tau as u64), move |oracle, z, _| {
        let w = prox_inner(oracle, &a, z, gamma, tau);
        let error = match reference {
            Reference::Exact => Some(w.dist(&field.linear_resolvent(gamma, z)?)),
            Reference::Estimated(t_ref) => Some(w.dist(&prox_reference(&field, &a, z, gamma, t_ref))),
            Reference::Unavailable => None,
        };
        Ok(Some(StepOut {
            next: z.lerp(&w, lambda),
            aux: Some(w),
            error,
        }))
    })
}

/// Relaxed proximal point with the resolvent emulated by running the inner
/// fixed-point loop until successive iterates differ by at most `inner_tol`.
pub fn relaxed_pp_run(
    problem: &ProblemSpec,
    params: &SolverParams,
    z0: &Point,
    inner_tol: f64,
) -> Result<Trajectory> {
    params.check_basic()?;
    if !(inner_tol > 0.0) {
        return Err(Error::param(format!("inner_tol must be > 0, got {inner_tol}")));
    }
    let mut v = Validator::new(params);
    v.relaxation(params.lambda)?;
    v.step_below_inverse_lipschitz(problem, params.gamma, false)?;
    v.step_above_cohypomonotonicity(problem, params.gamma)?;
    let exact = problem.has_closed_form_resolvent();
    let mut d = Driver::new(SolverKind::RelaxedPp, problem, params, z0, v)?;
    d.record_errors = exact;
    let (gamma, lambda) = (params.gamma, params.lambda);
    let field = problem.field.clone();
    let a = problem.resolvent.clone();
    d.run(None, move |oracle, z, remaining| {
        let start = oracle.calls();
        let mut w = z.clone();
        let mut converged = false;
        for _ in 0..RELAXED_PP_INNER_CAP {
            let f = oracle.query(&w);
            let next = a.apply_unchecked(&z.axpy(-gamma, &f));
            let moved = next.dist(&w);
            w = next;
            if moved <= inner_tol {
                converged = true;
                break;
            }
            if oracle.calls() - start >= remaining {
                return Ok(None);
            }
        }
        if !converged {
            return Err(Error::Convergence {
                message: format!("inner loop exceeded {RELAXED_PP_INNER_CAP} steps"),
                partial: Box::new(Trajectory::start(
                    SolverKind::RelaxedPp,
                    ProblemSummary::default(),
                    SolverParams::default(),
                    z.clone(),
                )),
            });
        }
        let error = if exact {
            Some(w.dist(&field.linear_resolvent(gamma, z)?))
        } else {
            None
        };
        Ok(Some(StepOut {
            next: z.lerp(&w, lambda),
            aux: Some(w),
            error,
        }))
    })
}

/// Lookahead: `τ` base steps from `w⁰ = z^k`, then `z^{k+1} = (1 − λ)z^k + λw^τ`.
///
/// GDA and EG bases are projected onto the constraint through `J_{γA}`; the
/// CEG+ base uses relaxation `α`.
pub fn lookahead_run(
    problem: &ProblemSpec,
    base: LookaheadBase,
    params: &SolverParams,
    z0: &Point,
) -> Result<Trajectory> {
    params.check_basic()?;
    let mut v = Validator::new(params);
    v.relaxation(params.lambda)?;
    let (gamma, lambda, tau, alpha) = (params.gamma, params.lambda, params.tau, params.alpha);
    match base {
        LookaheadBase::CegPlus => {
            v.step_below_inverse_lipschitz(problem, gamma, true)?;
            v.step_above_cohypomonotonicity(problem, gamma)?;
            v.cegplus_relaxation(problem, gamma, alpha)?;
        }
        LookaheadBase::Gda if tau == 2 => {
            if let (Some(rho), Some(l)) = (problem.rho, problem.lipschitz) {
                let ok = lambda < 0.5
                    && gamma * l <= 1.0
                    && 2.0 * rho > -(1.0 - 2.0 * lambda) * gamma
                    && 2.0 * rho >= 2.0 * lambda * gamma - (1.0 - gamma * gamma * l * l) * gamma;
                if !ok {
                    v.warn("two-step Lookahead-GDA rate conditions do not hold");
                }
            }
        }
        _ => {}
    }
    let kind = match base {
        LookaheadBase::Gda => SolverKind::LaGda,
        LookaheadBase::Eg => SolverKind::LaEg,
        LookaheadBase::CegPlus => SolverKind::LaCegplus,
    };
    let d = Driver::new(kind, problem, params, z0, v)?;
    let a = problem.resolvent.clone();
    let per_step = tau as u64 * base.calls_per_inner_step();
    d.run(Some(per_step), move |oracle, z, _| {
        let mut w = z.clone();
        for _ in 0..tau {
            w = match base {
                LookaheadBase::Gda => projected_gda_step(oracle, &a, &w, gamma),
                LookaheadBase::Eg => projected_eg_step(oracle, &a, &w, gamma),
                LookaheadBase::CegPlus => cegplus_step(oracle, &a, &w, gamma, alpha).0,
            };
        }
        Ok(Some(StepOut {
            next: z.lerp(&w, lambda),
            aux: Some(w),
            error: None,
        }))
    })
}

/// Projected gradient descent-ascent `z^{k+1} = J_{γA}(z^k − γFz^k)`.
pub fn gda_run(problem: &ProblemSpec, params: &SolverParams, z0: &Point) -> Result<Trajectory> {
    params.check_basic()?;
    let d = Driver::new(SolverKind::Gda, problem, params, z0, Validator::new(params))?;
    let (a, gamma) = (problem.resolvent.clone(), params.gamma);
    d.run(Some(1), move |oracle, z, _| {
        Ok(Some(StepOut {
            next: projected_gda_step(oracle, &a, z, gamma),
            aux: None,
            error: None,
        }))
    })
}

/// (Projected) extragradient.
pub fn eg_run(problem: &ProblemSpec, params: &SolverParams, z0: &Point) -> Result<Trajectory> {
    params.check_basic()?;
    let d = Driver::new(SolverKind::Eg, problem, params, z0, Validator::new(params))?;
    let (a, gamma) = (problem.resolvent.clone(), params.gamma);
    d.run(Some(2), move |oracle, z, _| {
        Ok(Some(StepOut {
            next: projected_eg_step(oracle, &a, z, gamma),
            aux: None,
            error: None,
        }))
    })
}

/// KM iteration over the (projected) extragradient map.
pub fn egplus_run(problem: &ProblemSpec, params: &SolverParams, z0: &Point) -> Result<Trajectory> {
    params.check_basic()?;
    let mut v = Validator::new(params);
    v.relaxation(params.lambda)?;
    let d = Driver::new(SolverKind::Egplus, problem, params, z0, v)?;
    let (a, gamma, lambda) = (problem.resolvent.clone(), params.gamma, params.lambda);
    d.run(Some(2), move |oracle, z, _| {
        let eg = projected_eg_step(oracle, &a, z, gamma);
        Ok(Some(StepOut {
            next: z.lerp(&eg, lambda),
            aux: Some(eg),
            error: None,
        }))
    })
}

/// Constrained EG+; `aux_iterates[k]` is `z̄^k = J_{γA}(Hz^k)`.
pub fn cegplus_run(problem: &ProblemSpec, params: &SolverParams, z0: &Point) -> Result<Trajectory> {
    params.check_basic()?;
    let mut v = Validator::new(params);
    v.step_below_inverse_lipschitz(problem, params.gamma, true)?;
    v.step_above_cohypomonotonicity(problem, params.gamma)?;
    v.cegplus_relaxation(problem, params.gamma, params.alpha)?;
    cegplus_like(SolverKind::Cegplus, problem, params, z0, v, params.alpha)
}

/// Forward-backward-forward, i.e. CEG+ with `α = 1/2`.
pub fn fbf_run(problem: &ProblemSpec, params: &SolverParams, z0: &Point) -> Result<Trajectory> {
    params.check_basic()?;
    let mut v = Validator::new(params);
    v.step_below_inverse_lipschitz(problem, params.gamma, true)?;
    cegplus_like(SolverKind::Fbf, problem, params, z0, v, 0.5)
}

fn cegplus_like(
    kind: SolverKind,
    problem: &ProblemSpec,
    params: &SolverParams,
    z0: &Point,
    v: Validator,
    alpha: f64,
) -> Result<Trajectory> {
    let d = Driver::new(kind, problem, params, z0, v)?;
    let (a, gamma) = (problem.resolvent.clone(), params.gamma);
    d.run(Some(2), move |oracle, z, _| {
        let (next, w_bar) = cegplus_step(oracle, &a, z, gamma, alpha);
        Ok(Some(StepOut {
            next,
            aux: Some(w_bar),
            error: None,
        }))
    })
}

/// Dispatches on the solver name; relaxed PP uses an inner tolerance of 1e-13.
pub fn run_solver(
    kind: SolverKind,
    problem: &ProblemSpec,
    params: &SolverParams,
    z0: &Point,
) -> Result<Trajectory> {
    match kind {
        SolverKind::Gda => gda_run(problem, params, z0),
        SolverKind::Eg => eg_run(problem, params, z0),
        SolverKind::Egplus => egplus_run(problem, params, z0),
        SolverKind::Cegplus => cegplus_run(problem, params, z0),
        SolverKind::Fbf => fbf_run(problem, params, z0),
        SolverKind::KmExact => km_exact_run(problem, params, z0),
        SolverKind::RelaxedPp => relaxed_pp_run(problem, params, z0, RELAXED_PP_DEFAULT_TOL),
        SolverKind::Rapp => rapp_run(problem, params, z0),
        SolverKind::LaGda | SolverKind::LaEg | SolverKind::LaCegplus => {
            let base = kind.lookahead_base().expect("lookahead kind");
            lookahead_run(problem, base, params, z0)
        }
        SolverKind::Custom => Err(Error::Unsupported(
            "custom maps run through km_iterate".into(),
        )),
    }
}
