//! Weighted least-squares lines for log-log scaling fits.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Relative errors below this are clamped so that near-exact points do
/// not take all the weight.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    /// Largest `|y_i − (intercept + slope·x_i)|`.
    pub max_abs_residual: f64,
}

/// Fits `y = a + b x` with weights `1/σ_i²`.
pub fn weighted_line(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() != sigma.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len().min(sigma.len()),
        });
    }
    if x.len() < 2 {
        return Err(Error::TooFewPoints { needed: 2, got: x.len() });
    }
    let w: Vec<f64> = sigma.iter().map(|s| 1.0 / (s * s)).collect();
    let sw: f64 = w.iter().sum();
    let mx = w.iter().zip(x).map(|(w, x)| w * x).sum::<f64>() / sw;
    let my = w.iter().zip(y).map(|(w, y)| w * y).sum::<f64>() / sw;
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * (x - mx) * (x - mx)).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * (x - mx) * (y - my)).sum();
    if !(sxx > 0.0) {
        return Err(Error::InvalidArgument("abscissae must not all coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let max_abs_residual = x
        .iter()
        .zip(y)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(LineFit {
        slope,
        intercept,
        slope_stderr: (1.0 / sxx).sqrt(),
        max_abs_residual,
    })
}

/// Fits `ln v = a + b ln δ` from values with standard errors; the
/// log-scale error of each point is `max(σ/v, RELATIVE_ERROR_FLOOR)`.
pub fn loglog(deltas: &[f64], values: &[f64], stderrs: &[f64]) -> Result<LineFit> {
    if values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidArgument("log-log fit needs positive values".into()));
    }
    let x: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let s: Vec<f64> = values
        .iter()
        .zip(stderrs)
        .map(|(v, s)| (s / v).max(RELATIVE_ERROR_FLOOR))
        .collect();
    weighted_line(&x, &y, &s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exact_power_law() {
        let d: Vec<f64> = (4..10).map(|k| 2f64.powi(-k)).collect();
        let v: Vec<f64> = d.iter().map(|d| 0.7 * d.powf(3.5)).collect();
        let f = loglog(&d, &v, &[0.0; 6]).unwrap();
        assert!((f.slope - 3.5).abs() < 1e-12);
        assert!((f.intercept - 0.7f64.ln()).abs() < 1e-10);
        assert!(f.max_abs_residual < 1e-10);
    }

    #[test]
    fn weights_favor_precise_points() {
        let x = [0.0, 1.0, 2.0];
        let y = [0.0, 1.0, 5.0];
        let tight = weighted_line(&x, &y, &[1e-3, 1e-3, 10.0]).unwrap();
        assert!((tight.slope - 1.0).abs() < 1e-4);
    }

    #[test]
    fn rejects_degenerate_input() {
        assert!(matches!(weighted_line(&[1.0], &[1.0], &[1.0]), Err(Error::TooFewPoints { .. })));
        assert!(weighted_line(&[1.0, 1.0], &[1.0, 2.0], &[1.0, 1.0]).is_err());
        assert!(loglog(&[0.1, 0.2], &[0.0, 1.0], &[1.0, 1.0]).is_err());
    }
}
