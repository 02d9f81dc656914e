//! Finite-difference stencils used for *checking* and for the parameter
//! derivatives that have no analytic form (family-direction derivatives of
//! the coefficient matrix, section derivatives without a closed form).
//!
//! Near an interval endpoint the central stencil is replaced by a one-sided
//! stencil of the same order.

use std::ops::{Add, Mul, Sub};

use crate::bundle::Interval;
use crate::error::{GeoError, Result};

/// Anything that can be combined linearly with `f64` weights.
pub trait Linear: Clone + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}

impl<T> Linear for T where T: Clone + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> {}

fn weighted<T: Linear>(samples: &[(f64, T)], scale: f64) -> T {
    let mut iter = samples.iter();
    let (w0, v0) = iter.next().expect("non-empty stencil");
    let mut acc = v0.clone() * *w0;
    for (w, v) in iter {
        acc = acc + v.clone() * *w;
    }
    acc * scale
}

fn eval_offsets<T, F>(f: &F, x: f64, h: f64, offsets: &[(f64, f64)]) -> Result<Vec<(f64, T)>>
where
    F: Fn(f64) -> Result<T>,
{
    offsets
        .iter()
        .map(|&(k, w)| f(x + k * h).map(|v| (w, v)))
        .collect()
}

fn check_step(h: f64) -> Result<()> {
    if !(h.is_finite() && h > 0.0) {
        return Err(GeoError::argument(format!("finite-difference step must be positive, got {h}")));
    }
    Ok(())
}

/// Second-order derivative estimate of `f` at `x` inside `domain`.
pub fn diff2<T, F>(f: F, x: f64, h: f64, domain: Interval) -> Result<T>
where
    T: Linear,
    F: Fn(f64) -> Result<T>,
{
    check_step(h)?;
    domain.check("finite-difference point", x)?;
    let samples = if domain.contains(x - h) && domain.contains(x + h) {
        eval_offsets(&f, x, h, &[(-1.0, -1.0), (1.0, 1.0)])?
    } else if domain.contains(x + 2.0 * h) {
        eval_offsets(&f, x, h, &[(0.0, -3.0), (1.0, 4.0), (2.0, -1.0)])?
    } else if domain.contains(x - 2.0 * h) {
        eval_offsets(&f, x, h, &[(0.0, 3.0), (-1.0, -4.0), (-2.0, 1.0)])?
    } else {
        return Err(GeoError::argument(format!(
            "interval [{}, {}] too short for step {h}",
            domain.lo, domain.hi
        )));
    };
    Ok(weighted(&samples, 1.0 / (2.0 * h)))
}

/// Fourth-order derivative estimate of `f` at `x` inside `domain`.
pub fn diff4<T, F>(f: F, x: f64, h: f64, domain: Interval) -> Result<T>
where
    T: Linear,
    F: Fn(f64) -> Result<T>,
{
    check_step(h)?;
    domain.check("finite-difference point", x)?;
    let samples = if domain.contains(x - 2.0 * h) && domain.contains(x + 2.0 * h) {
        eval_offsets(&f, x, h, &[(-2.0, 1.0), (-1.0, -8.0), (1.0, 8.0), (2.0, -1.0)])?
    } else if domain.contains(x + 4.0 * h) {
        eval_offsets(
            &f,
            x,
            h,
            &[(0.0, -25.0), (1.0, 48.0), (2.0, -36.0), (3.0, 16.0), (4.0, -3.0)],
        )?
    } else if domain.contains(x - 4.0 * h) {
        eval_offsets(
            &f,
            x,
            h,
            &[(0.0, 25.0), (-1.0, -48.0), (-2.0, 36.0), (-3.0, -16.0), (-4.0, 3.0)],
        )?
    } else {
        return Err(GeoError::argument(format!(
            "interval [{}, {}] too short for step {h}",
            domain.lo, domain.hi
        )));
    };
    Ok(weighted(&samples, 1.0 / (12.0 * h)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const WIDE: Interval = Interval { lo: -10.0, hi: 10.0 };

    #[test]
    fn central_stencils_on_cubic() {
        let f = |x: f64| Ok::<f64, GeoError>(x * x * x);
        let d2 = diff2(f, 1.0, 1e-3, WIDE).unwrap();
        assert!((d2 - 3.0).abs() < 1e-5);
        let d4 = diff4(f, 1.0, 1e-2, WIDE).unwrap();
        assert!((d4 - 3.0).abs() < 1e-10);
    }

    #[test]
    fn one_sided_at_endpoints() {
        let dom = Interval { lo: 0.0, hi: 1.0 };
        let f = |x: f64| Ok::<f64, GeoError>(x.exp());
        let lo = diff4(f, 0.0, 1e-3, dom).unwrap();
        let hi = diff4(f, 1.0, 1e-3, dom).unwrap();
        assert!((lo - 1.0).abs() < 1e-10);
        assert!((hi - 1f64.exp()).abs() < 1e-10);
        let lo2 = diff2(f, 0.0, 1e-4, dom).unwrap();
        assert!((lo2 - 1.0).abs() < 1e-7);
    }

    #[test]
    fn rejects_bad_step_and_point() {
        let f = |x: f64| Ok::<f64, GeoError>(x);
        assert!(diff2(f, 0.0, 0.0, WIDE).is_err());
        assert!(diff2(f, 11.0, 1e-3, WIDE).is_err());
    }
}
