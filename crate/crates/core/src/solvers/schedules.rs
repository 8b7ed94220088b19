use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which guarantee a schedule targets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScheduleMode {
    Best,
    Last,
}

/// Inner iterations so that the contraction error `(γL)^τ` is `1/K` (best
/// iterate) or `1/K²` (last iterate).
pub fn tau_schedule(outer_iters: usize, gamma_l: f64, mode: ScheduleMode) -> Result<usize> {
    if !(gamma_l > 0.0 && gamma_l < 1.0) {
        return Err(Error::param(format!("tau schedule needs gamma*L in (0, 1), got {gamma_l}")));
    }
    if outer_iters == 0 {
        return Err(Error::param("tau schedule needs K >= 1"));
    }
    let k = outer_iters as f64;
    let target = match mode {
        ScheduleMode::Best => k.ln(),
        ScheduleMode::Last => 2.0 * k.ln(),
    };
    // the slack keeps exact ratios such as ln 4 / ln 2 from rounding up
    let tau = (target / (1.0 / gamma_l).ln() - 1e-12).ceil();
    Ok((tau.max(1.0)) as usize)
}

/// Minibatch size at the 1-based outer step `k` so that the variance of the
/// mean is `σ₀²/k²` or `σ₀²/k³`.
pub fn batch_schedule(k: u64, mode: ScheduleMode) -> Result<u64> {
    if k == 0 {
        return Err(Error::param("batch schedule is indexed from k = 1"));
    }
    let n = match mode {
        ScheduleMode::Best => k.checked_mul(k),
        ScheduleMode::Last => k.checked_mul(k).and_then(|v| v.checked_mul(k)),
    };
    n.ok_or_else(|| Error::param(format!("batch size overflows at k = {k}")))
}
