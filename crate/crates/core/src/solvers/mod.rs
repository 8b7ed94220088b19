//! Iteration schemes, each available as a single step and as a full run.
//!
//! Single steps take any [`Oracle`](crate::Oracle) so they can be composed
//! and property-tested against a [`CountingField`](crate::CountingField);
//! runs own a [`StochasticOracle`](crate::StochasticOracle) seeded from the
//! parameters and produce a [`Trajectory`].

mod params;
mod runs;
mod schedules;
mod steps;
mod trajectory;

pub use params::{BatchMode, LookaheadBase, SolverKind, SolverParams, TargetRule, Validation};
pub use runs::{
    cegplus_run, eg_run, egplus_run, fbf_run, gda_run, km_exact_run, km_iterate, lookahead_run,
    rapp_run, relaxed_pp_run, run_solver, RELAXED_PP_INNER_CAP,
};
pub use schedules::{batch_schedule, tau_schedule, ScheduleMode};
pub use steps::{
    approx_prox, cegplus_step, eg_step, egplus_step, fbf_step, gda_step, la_gda_tau2_closed_form,
    prox_reference, projected_eg_step, projected_gda_step,
};
pub use trajectory::{StopReason, Trajectory, DIVERGENCE_NORM};
