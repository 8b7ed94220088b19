use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::residual::ResidualSeries;

/// Least-squares fit of `log(residual²)` against `log K`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SlopeFit {
    Slope { slope: f64, intercept: f64 },
    /// The residual vanished at this checkpoint, so no power law exists.
    ConvergedExactly { checkpoint: usize },
}

impl SlopeFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            SlopeFit::Slope { slope, .. } => Some(*slope),
            SlopeFit::ConvergedExactly { .. } => None,
        }
    }
}

/// Fits the squared residual at the given iteration indices.
pub fn slope_fit(residuals: &ResidualSeries, checkpoints: &[usize]) -> Result<SlopeFit> {
    let values = checkpoints
        .iter()
        .map(|&k| {
            residuals.values.get(k).copied().ok_or_else(|| {
                Error::Diagnostics(format!(
                    "checkpoint {k} beyond {} residuals",
                    residuals.values.len()
                ))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    fit_squared(checkpoints, &values)
}

/// Same as [`slope_fit`] on explicit `(K, residual_K)` samples.
pub fn fit_squared(checkpoints: &[usize], residuals: &[f64]) -> Result<SlopeFit> {
    if checkpoints.len() < 2 || checkpoints.len() != residuals.len() {
        return Err(Error::Diagnostics("slope fit needs >= 2 matching checkpoints".into()));
    }
    if checkpoints[0] == 0 || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Diagnostics("checkpoints must be positive and increasing".into()));
    }
    if let Some(bad) = residuals.iter().find(|r| !(r.is_finite() && **r >= 0.0)) {
        return Err(Error::Diagnostics(format!("invalid residual {bad}")));
    }
    if let Some(i) = residuals.iter().position(|r| *r == 0.0) {
        return Ok(SlopeFit::ConvergedExactly {
            checkpoint: checkpoints[i],
        });
    }
    let xs: Vec<f64> = checkpoints.iter().map(|k| (*k as f64).ln()).collect();
    let ys: Vec<f64> = residuals.iter().map(|r| 2.0 * r.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit::Slope {
        slope,
        intercept: my - slope * mx,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::ResidualKind;

    fn series(f: impl Fn(usize) -> f64, n: usize) -> ResidualSeries {
        ResidualSeries::new((0..n).map(f).collect(), ResidualKind::ExactResolvent, 1.0).unwrap()
    }

    #[test]
    fn exact_power_law() {
        let s = series(|k| if k == 0 { 1.0 } else { 1.0 / k as f64 }, 1001);
        let fit = slope_fit(&s, &[10, 100, 1000]).unwrap();
        assert!((fit.slope().unwrap() + 2.0).abs() < 1e-9);
    }

    #[test]
    fn constant_series() {
        let s = series(|_| 0.3, 101);
        assert_eq!(slope_fit(&s, &[1, 10, 100]).unwrap().slope(), Some(0.0));
    }

    #[test]
    fn zero_residual_is_reported() {
        let s = series(|k| if k >= 50 { 0.0 } else { 1.0 }, 101);
        assert_eq!(
            slope_fit(&s, &[10, 100]).unwrap(),
            SlopeFit::ConvergedExactly { checkpoint: 100 }
        );
    }

    #[test]
    fn invalid_checkpoints() {
        let s = series(|_| 1.0, 10);
        assert!(slope_fit(&s, &[5]).is_err());
        assert!(slope_fit(&s, &[5, 3]).is_err());
        assert!(slope_fit(&s, &[5, 30]).is_err());
        assert!(slope_fit(&s, &[0, 3]).is_err());
    }
}
