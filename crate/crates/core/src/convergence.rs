//! Log-log convergence-order fits.

use serde::Serialize;

use crate::error::{GeoError, Result};

/// Residuals at or below this are treated as roundoff.
pub const ROUNDOFF_FLOOR: f64 = 10.0 * f64::EPSILON;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum ConvergenceFit {
    /// Least-squares line `ln r = slope·ln h + intercept` through the
    /// above-floor points.
    Fit {
        slope: f64,
        intercept: f64,
        points: Vec<(f64, f64)>,
    },
    /// Fewer than three residuals above [`ROUNDOFF_FLOOR`].
    AtFloor { points: Vec<(f64, f64)> },
}

impl ConvergenceFit {
    pub fn slope(&self) -> Option<f64> {
        match self {
            ConvergenceFit::Fit { slope, .. } => Some(*slope),
            ConvergenceFit::AtFloor { .. } => None,
        }
    }

    pub fn is_at_floor(&self) -> bool {
        matches!(self, ConvergenceFit::AtFloor { .. })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        match self {
            ConvergenceFit::Fit { points, .. } | ConvergenceFit::AtFloor { points } => points,
        }
    }

    /// True when the fit is at the floor or its slope is at least `min`.
    pub fn order_at_least(&self, min: f64) -> bool {
        self.slope().is_none_or(|p| p >= min)
    }

    /// True when the fit is at the floor or its slope is within `tol` of
    /// `target`.
    pub fn order_near(&self, target: f64, tol: f64) -> bool {
        self.slope().is_none_or(|p| (p - target).abs() <= tol)
    }
}

/// Fits `ln(residual)` against `ln(h)`.
///
/// Zero residuals count as "at the floor"; negative or non-finite values and
/// non-positive steps are rejected.
pub fn convergence_order(samples: &[(f64, f64)]) -> Result<ConvergenceFit> {
    convergence_order_above(samples, ROUNDOFF_FLOOR)
}

/// [`convergence_order`] with a caller-chosen floor, for residuals built
/// from finite differences whose roundoff grows as the step shrinks.
pub fn convergence_order_above(samples: &[(f64, f64)], floor: f64) -> Result<ConvergenceFit> {
    if !(floor.is_finite() && floor >= 0.0) {
        return Err(GeoError::argument(format!("invalid roundoff floor {floor}")));
    }
    if samples.len() < 3 {
        return Err(GeoError::argument(format!(
            "convergence fit needs at least 3 samples, got {}",
            samples.len()
        )));
    }
    for &(h, r) in samples {
        if !(h.is_finite() && h > 0.0) {
            return Err(GeoError::argument(format!("non-positive step h = {h}")));
        }
        if !(r.is_finite() && r >= 0.0) {
            return Err(GeoError::argument(format!("invalid residual {r} at h = {h}")));
        }
    }
    let points = samples.to_vec();
    let used: Vec<(f64, f64)> = samples
        .iter()
        .filter(|(_, r)| *r > floor.max(ROUNDOFF_FLOOR))
        .map(|&(h, r)| (h.ln(), r.ln()))
        .collect();
    if used.len() < 3 {
        return Ok(ConvergenceFit::AtFloor { points });
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(GeoError::argument("convergence fit needs distinct steps"));
    }
    let slope = sxy / sxx;
    Ok(ConvergenceFit::Fit {
        slope,
        intercept: my - slope * mx,
        points,
    })
}

/// `[h₀, h₀/2, h₀/4, …]` with `levels` entries.
pub fn halving(h0: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|k| h0 / f64::powi(2.0, k as i32)).collect()
}
