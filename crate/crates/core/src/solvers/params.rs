use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::ResidualKind;
use crate::error::{Error, Result};

use super::schedules::{batch_schedule, ScheduleMode};

/// Minibatch size per outer iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BatchMode {
    Fixed(usize),
    /// `n_k = k²` (1-based `k`), for best-iterate guarantees.
    BestIterate,
    /// `n_k = k³` (1-based `k`), for last-iterate guarantees.
    LastIterate,
}

impl BatchMode {
    /// Batch used at the 0-based outer iteration `k`.
    pub fn batch_at(&self, k: usize) -> usize {
        let step = k as u64 + 1;
        let n = match self {
            BatchMode::Fixed(n) => return (*n).max(1),
            BatchMode::BestIterate => batch_schedule(step, ScheduleMode::Best),
            BatchMode::LastIterate => batch_schedule(step, ScheduleMode::Last),
        };
        n.map(|v| v.min(usize::MAX as u64) as usize).unwrap_or(1)
    }
}

/// How violations of sufficient convergence conditions are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Validation {
    /// Violations are parameter errors.
    #[default]
    Strict,
    /// Violations become trajectory warnings; `λ = 1` is accepted.
    Permissive,
}

/// Early stop once the residual of the current iterate reaches `value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetRule {
    pub value: f64,
    pub kind: ResidualKind,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub gamma: f64,
    pub lambda: f64,
    pub tau: usize,
    pub alpha: f64,
    pub outer_iters: usize,
    pub sigma0: f64,
    pub batch_mode: BatchMode,
    pub seed: u64,
    pub validation: Validation,
    pub max_oracle_calls: Option<u64>,
    pub target: Option<TargetRule>,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            gamma: 0.5,
            lambda: 0.5,
            tau: 1,
            alpha: 0.5,
            outer_iters: 100,
            sigma0: 0.0,
            batch_mode: BatchMode::Fixed(1),
            seed: 0,
            validation: Validation::Strict,
            max_oracle_calls: None,
            target: None,
        }
    }
}

impl SolverParams {
    pub fn is_strict(&self) -> bool {
        self.validation == Validation::Strict
    }

    /// Checks that do not depend on the solver or the problem.
    pub fn check_basic(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::param(format!("gamma must be finite and > 0, got {}", self.gamma)));
        }
        if !(self.lambda.is_finite()) {
            return Err(Error::param("lambda must be finite"));
        }
        if self.tau == 0 {
            return Err(Error::param("tau must be >= 1"));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::param(format!("alpha must be finite and > 0, got {}", self.alpha)));
        }
        if !(self.sigma0 >= 0.0 && self.sigma0.is_finite()) {
            return Err(Error::param(format!("sigma0 must be finite and >= 0, got {}", self.sigma0)));
        }
        if self.batch_mode == BatchMode::Fixed(0) {
            return Err(Error::param("fixed batch must be >= 1"));
        }
        if let Some(t) = &self.target {
            if !(t.value >= 0.0) || !(t.gamma > 0.0) {
                return Err(Error::param("target needs value >= 0 and gamma > 0"));
            }
        }
        Ok(())
    }
}

/// Inner scheme of a Lookahead run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LookaheadBase {
    Gda,
    Eg,
    CegPlus,
}

impl LookaheadBase {
    pub fn calls_per_inner_step(&self) -> u64 {
        match self {
            LookaheadBase::Gda => 1,
            LookaheadBase::Eg | LookaheadBase::CegPlus => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    Gda,
    Eg,
    Egplus,
    Cegplus,
    Fbf,
    KmExact,
    RelaxedPp,
    Rapp,
    LaGda,
    LaEg,
    LaCegplus,
    /// User-supplied map driven by [`km_iterate`](super::km_iterate).
    Custom,
}

impl SolverKind {
    pub const ALL: [SolverKind; 11] = [
        SolverKind::Gda,
        SolverKind::Eg,
        SolverKind::Egplus,
        SolverKind::Cegplus,
        SolverKind::Fbf,
        SolverKind::KmExact,
        SolverKind::RelaxedPp,
        SolverKind::Rapp,
        SolverKind::LaGda,
        SolverKind::LaEg,
        SolverKind::LaCegplus,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SolverKind::Gda => "gda",
            SolverKind::Eg => "eg",
            SolverKind::Egplus => "egplus",
            SolverKind::Cegplus => "cegplus",
            SolverKind::Fbf => "fbf",
            SolverKind::KmExact => "km-exact",
            SolverKind::RelaxedPp => "relaxed-pp",
            SolverKind::Rapp => "rapp",
            SolverKind::LaGda => "la-gda",
            SolverKind::LaEg => "la-eg",
            SolverKind::LaCegplus => "la-cegplus",
            SolverKind::Custom => "custom",
        }
    }

    pub fn lookahead_base(&self) -> Option<LookaheadBase> {
        match self {
            SolverKind::LaGda => Some(LookaheadBase::Gda),
            SolverKind::LaEg => Some(LookaheadBase::Eg),
            SolverKind::LaCegplus => Some(LookaheadBase::CegPlus),
            _ => None,
        }
    }

    /// Schemes whose outer update is a KM step around an (in)exact resolvent.
    pub fn is_resolvent_km(&self) -> bool {
        matches!(self, SolverKind::KmExact | SolverKind::RelaxedPp | SolverKind::Rapp)
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = SolverKind::ALL.iter().map(|k| k.name()).collect();
                Error::param(format!("unknown solver '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solver_names_round_trip() {
        for k in SolverKind::ALL {
            assert_eq!(k.name().parse::<SolverKind>().unwrap(), k);
        }
        assert!("adam".parse::<SolverKind>().is_err());
    }

    #[test]
    fn batch_modes() {
        assert_eq!(BatchMode::Fixed(5).batch_at(10), 5);
        assert_eq!(BatchMode::BestIterate.batch_at(2), 9);
        assert_eq!(BatchMode::LastIterate.batch_at(1), 8);
        assert_eq!(BatchMode::LastIterate.batch_at(0), 1);
    }

    #[test]
    fn basic_checks() {
        let ok = SolverParams::default();
        assert!(ok.check_basic().is_ok());
        for bad in [
            SolverParams { gamma: 0.0, ..ok.clone() },
            SolverParams { tau: 0, ..ok.clone() },
            SolverParams { alpha: -1.0, ..ok.clone() },
            SolverParams { sigma0: f64::NAN, ..ok.clone() },
            SolverParams { batch_mode: BatchMode::Fixed(0), ..ok.clone() },
        ] {
            assert!(matches!(bad.check_basic(), Err(Error::Parameter(_))));
        }
    }
}
