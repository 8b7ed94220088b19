use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::point::Point;
use crate::problems::ProblemSpec;
use crate::solvers::{prox_reference, Trajectory};

/// Stationarity measure reported for an iterate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResidualKind {
    /// `‖z − J_{γS}(z)‖` via the closed-form resolvent of a linear field.
    ExactResolvent,
    /// `‖z − w^{τ_ref}‖` from a deterministic approximate proximal step.
    EstimatedResolvent { tau_ref: usize },
    /// `‖Fz‖`; unconstrained problems only.
    OperatorNorm,
    /// `‖z − z̄‖` with `z̄ = J_{γA}(z − γFz)`.
    StepNorm,
}

impl ResidualKind {
    pub fn is_resolvent(&self) -> bool {
        matches!(
            self,
            ResidualKind::ExactResolvent | ResidualKind::EstimatedResolvent { .. }
        )
    }

    /// Closed-form resolvent when available, the step norm otherwise.
    pub fn default_for(problem: &ProblemSpec) -> Self {
        if problem.has_closed_form_resolvent() {
            ResidualKind::ExactResolvent
        } else {
            ResidualKind::StepNorm
        }
    }
}

impl fmt::Display for ResidualKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResidualKind::ExactResolvent => f.write_str("exact"),
            ResidualKind::EstimatedResolvent { tau_ref } => write!(f, "estimated:{tau_ref}"),
            ResidualKind::OperatorNorm => f.write_str("operator"),
            ResidualKind::StepNorm => f.write_str("step"),
        }
    }
}

impl FromStr for ResidualKind {
    type Err = Error;

    /// Accepts `exact`, `estimated[:TAU]` (default 50), `operator`, `step`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(ResidualKind::ExactResolvent),
            "operator" => Ok(ResidualKind::OperatorNorm),
            "step" => Ok(ResidualKind::StepNorm),
            "estimated" => Ok(ResidualKind::EstimatedResolvent { tau_ref: 50 }),
            _ => {
                let tau = s
                    .strip_prefix("estimated:")
                    .and_then(|t| t.parse::<usize>().ok())
                    .filter(|t| *t >= 1)
                    .ok_or_else(|| Error::param(format!("unknown residual kind '{s}'")))?;
                Ok(ResidualKind::EstimatedResolvent { tau_ref: tau })
            }
        }
    }
}

/// Residual of `z` for `problem` at stepsize `gamma`.
pub fn residual(problem: &ProblemSpec, z: &Point, gamma: f64, kind: ResidualKind) -> Result<f64> {
    z.ensure_dim(problem.dim())?;
    if !(gamma > 0.0) {
        return Err(Error::param(format!("residual stepsize must be > 0, got {gamma}")));
    }
    match kind {
        ResidualKind::ExactResolvent => {
            if !problem.has_closed_form_resolvent() {
                return Err(Error::Unsupported(
                    "exact resolvent residual needs a linear unconstrained problem".into(),
                ));
            }
            Ok(z.dist(&problem.field.linear_resolvent(gamma, z)?))
        }
        ResidualKind::EstimatedResolvent { tau_ref } => {
            if tau_ref == 0 {
                return Err(Error::param("tau_ref must be >= 1"));
            }
            if let Some(l) = problem.lipschitz {
                if gamma * l >= 1.0 {
                    return Err(Error::param(format!(
                        "estimated resolvent residual needs gamma*L < 1, got {}",
                        gamma * l
                    )));
                }
            }
            let w = prox_reference(&problem.field, &problem.resolvent, z, gamma, tau_ref);
            Ok(z.dist(&w))
        }
        ResidualKind::OperatorNorm => {
            if problem.is_constrained() {
                return Err(Error::Unsupported(
                    "operator-norm residual needs an unconstrained problem".into(),
                ));
            }
            Ok(problem.field.eval(z).norm())
        }
        ResidualKind::StepNorm => {
            let h = z.axpy(-gamma, &problem.field.eval(z));
            Ok(z.dist(&problem.resolvent.apply_unchecked(&h)))
        }
    }
}

/// Residuals of every iterate of a trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualSeries {
    pub values: Vec<f64>,
    pub kind: ResidualKind,
    pub gamma: f64,
}

impl ResidualSeries {
    pub fn new(values: Vec<f64>, kind: ResidualKind, gamma: f64) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Diagnostics("residuals must be finite and >= 0".into()));
        }
        Ok(ResidualSeries { values, kind, gamma })
    }

    pub fn from_trajectory(
        problem: &ProblemSpec,
        traj: &Trajectory,
        gamma: f64,
        kind: ResidualKind,
    ) -> Result<Self> {
        let values = traj
            .iterates
            .iter()
            .map(|z| residual(problem, z, gamma, kind))
            .collect::<Result<Vec<_>>>()?;
        Self::new(values, kind, gamma)
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }

    /// `min_{j ≤ k} values[j]` for every `k`.
    pub fn running_min(&self) -> Vec<f64> {
        self.values
            .iter()
            .scan(f64::INFINITY, |m, v| {
                *m = m.min(*v);
                Some(*m)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems;

    #[test]
    fn exact_resolvent_example() {
        let q = problems::quadratic_field(1.0, 0.0).unwrap();
        let r = residual(&q, &Point::from([1.0, 0.0]), 0.5, ResidualKind::ExactResolvent).unwrap();
        assert!((r - 0.4472135955).abs() < 1e-10);
        assert!((r - 0.2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_residual_at_solutions() {
        let kinds = [
            ResidualKind::ExactResolvent,
            ResidualKind::EstimatedResolvent { tau_ref: 50 },
            ResidualKind::OperatorNorm,
            ResidualKind::StepNorm,
        ];
        let q = problems::quadratic_from_constants(1.0, -0.3).unwrap();
        for kind in kinds {
            assert!(residual(&q, &Point::zeros(2), 0.5, kind).unwrap() <= 1e-12);
        }
        for p in [problems::forsaken(), problems::polar_game()] {
            let z = p.known_zero.clone().unwrap();
            let gamma = 0.5 / p.lipschitz.unwrap();
            for kind in [ResidualKind::EstimatedResolvent { tau_ref: 50 }, ResidualKind::StepNorm] {
                assert!(residual(&p, &z, gamma, kind).unwrap() <= 1e-10);
            }
        }
    }

    #[test]
    fn unsupported_kinds() {
        let f = problems::forsaken();
        let z = Point::from([0.1, 0.2]);
        assert!(matches!(
            residual(&f, &z, 0.05, ResidualKind::ExactResolvent),
            Err(Error::Unsupported(_))
        ));
        assert!(matches!(
            residual(&f, &z, 0.05, ResidualKind::OperatorNorm),
            Err(Error::Unsupported(_))
        ));
        assert!(residual(&f, &z, 1.0, ResidualKind::EstimatedResolvent { tau_ref: 10 }).is_err());
    }

    #[test]
    fn estimated_matches_exact_on_linear_problems() {
        let q = problems::quadratic_from_constants(1.0, -0.3).unwrap();
        let gamma = 0.7;
        for (i, z) in problems::sample_points(&q, 20, 3).iter().enumerate() {
            let exact = residual(&q, z, gamma, ResidualKind::ExactResolvent).unwrap();
            let est =
                residual(&q, z, gamma, ResidualKind::EstimatedResolvent { tau_ref: 50 }).unwrap();
            let j = q.field.linear_resolvent(gamma, z).unwrap();
            let envelope = 0.7f64.powi(50) * z.dist(&j);
            assert!((exact - est).abs() <= envelope + 1e-15, "point {i}");
        }
    }

    #[test]
    fn estimated_resolvent_converges_on_forsaken() {
        let f = problems::forsaken();
        let gamma = 0.5 / f.lipschitz.unwrap();
        for z in problems::sample_points(&f, 20, 8) {
            let a = residual(&f, &z, gamma, ResidualKind::EstimatedResolvent { tau_ref: 50 }).unwrap();
            let b = residual(&f, &z, gamma, ResidualKind::EstimatedResolvent { tau_ref: 100 }).unwrap();
            // the box has diameter 3·√2
            assert!((a - b).abs() <= 0.5f64.powi(50) * 3.0 * 2f64.sqrt());
        }
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in [
            ResidualKind::ExactResolvent,
            ResidualKind::EstimatedResolvent { tau_ref: 7 },
            ResidualKind::OperatorNorm,
            ResidualKind::StepNorm,
        ] {
            assert_eq!(kind.to_string().parse::<ResidualKind>().unwrap(), kind);
        }
        assert!("estimated:0".parse::<ResidualKind>().is_err());
        assert!("nope".parse::<ResidualKind>().is_err());
    }
}
