use serde::{Deserialize, Serialize};

use crate::point::Point;
use crate::problems::ProblemSummary;

use super::params::{SolverKind, SolverParams};

/// Runs abort once an iterate leaves the ball of this radius.
pub const DIVERGENCE_NORM: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Completed,
    Budget,
    Target,
    Diverged,
}

impl StopReason {
    pub fn name(&self) -> &'static str {
        match self {
            StopReason::Completed => "completed",
            StopReason::Budget => "budget",
            StopReason::Target => "target",
            StopReason::Diverged => "diverged",
        }
    }
}

/// Record of one run.
///
/// `iterates[k]` is `z^k` and `oracle_calls[k]` the cumulative number of
/// single-sample evaluations spent to produce it. Per-step quantities
/// (`aux_iterates`, `recorded_errors`) have one entry per completed step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub solver: SolverKind,
    pub problem: ProblemSummary,
    pub params: SolverParams,
    pub iterates: Vec<Point>,
    /// `z̄^k` for CEG+/FBF, the final inner iterate `w_k^τ` otherwise.
    pub aux_iterates: Option<Vec<Point>>,
    pub oracle_calls: Vec<u64>,
    /// `‖e^k‖ = ‖w_k − J_{γS}(z^k)‖` when a reference resolvent is available.
    pub recorded_errors: Option<Vec<f64>>,
    /// Errors come from a longer inner run rather than the exact resolvent.
    pub errors_estimated: bool,
    pub stop_reason: StopReason,
    pub warnings: Vec<String>,
}

impl Trajectory {
    pub(crate) fn start(
        solver: SolverKind,
        problem: ProblemSummary,
        params: SolverParams,
        z0: Point,
    ) -> Self {
        Trajectory {
            solver,
            problem,
            params,
            iterates: vec![z0],
            aux_iterates: None,
            oracle_calls: vec![0],
            recorded_errors: None,
            errors_estimated: false,
            stop_reason: StopReason::Completed,
            warnings: Vec::new(),
        }
    }

    pub fn last(&self) -> &Point {
        self.iterates.last().expect("a trajectory always holds z0")
    }

    pub fn first(&self) -> &Point {
        &self.iterates[0]
    }

    /// Completed outer steps.
    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn total_calls(&self) -> u64 {
        *self.oracle_calls.last().unwrap_or(&0)
    }

    /// `sup_j ‖z^j − z*‖`.
    pub fn diameter_from(&self, z_star: &Point) -> f64 {
        self.iterates
            .iter()
            .map(|z| z.dist(z_star))
            .fold(0.0, f64::max)
    }
}
