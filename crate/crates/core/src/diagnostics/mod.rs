//! Residuals and bound verification over recorded trajectories.

mod bounds;
mod residual;
mod slope;

pub use bounds::{
    check_cegplus_bounds, check_h_cocoercivity, check_iterate_bound, check_km_bound,
    check_la2_bound, check_last_iterate, la2_coefficient, la2_conditions, mean_over_replications,
    pairs_h_cocoercivity, BoundReport, BOUND_ABS_TOL, BOUND_REL_TOL, FEJER_TOL,
};
pub use residual::{residual, ResidualKind, ResidualSeries};
pub use slope::{fit_squared, slope_fit, SlopeFit};

use crate::point::Point;
use crate::problems::ProblemSpec;

/// Zero used by the bound checks: the known zero nearest to `z0`.
pub fn reference_zero<'a>(problem: &'a ProblemSpec, z0: &Point) -> Option<&'a Point> {
    problem.nearest_zero(z0).or(problem.known_zero.as_ref())
}
