//! Torsion and curvature of a transport along a two-parameter family `η`.
//!
//! Both are available in operator form (commutators / differences of
//! derivations) and in component form (expressions in the coefficient
//! matrices of the row paths `η(·,t)` and column paths `η(s,·)`). The two
//! forms are computed independently so they can be checked against each
//! other.

use serde::{Deserialize, Serialize};

use crate::bundle::{CoefficientProvider, Family, Interval, Section, Section2};
use crate::derivation::derive_section;
use crate::error::{GeoError, Result};
use crate::fd;
use crate::linalg::{Matrix, Vector};
use crate::par::par_map;

/// Default step for the family-parameter derivatives in [`curvature_matrix`].
pub const DEFAULT_CURVATURE_STEP: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct TorsionValue {
    pub value: Vector,
    pub at: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvatureValue {
    pub value: Matrix,
    pub at: (f64, f64),
}

/// `Γ_{η(·,t)}(s)`.
pub fn row_coefficient(provider: &CoefficientProvider, family: &Family, s: f64, t: f64) -> Result<Matrix> {
    provider.coefficient(&family.row(t)?, s)
}

/// `Γ_{η(s,·)}(t)`.
pub fn col_coefficient(provider: &CoefficientProvider, family: &Family, s: f64, t: f64) -> Result<Matrix> {
    provider.coefficient(&family.col(s)?, t)
}

/// Component form: `Γ(s;η(·,t))·η″(s,t) − Γ(t;η(s,·))·η′(s,t)`.
pub fn torsion_components(
    provider: &CoefficientProvider,
    family: &Family,
    s: f64,
    t: f64,
) -> Result<TorsionValue> {
    provider.chart().require_tangent()?;
    family.check(s, t)?;
    let row = row_coefficient(provider, family, s, t)?;
    let col = col_coefficient(provider, family, s, t)?;
    let value = row * family.d_t(s, t) - col * family.d_s(s, t);
    Ok(TorsionValue { value, at: (s, t) })
}

/// Operator form: `D^{η(·,t)}_s η″(·,t) − D^{η(s,·)}_t η′(s,·)`.
pub fn torsion_operator(
    provider: &CoefficientProvider,
    family: &Family,
    s: f64,
    t: f64,
) -> Result<TorsionValue> {
    provider.chart().require_tangent()?;
    family.check(s, t)?;
    let n = provider.fibre_dim();
    let (f1, f2) = (family.clone(), family.clone());
    let along_row = Section::new(n, move |x| f1.d_t(x, t));
    let along_col = Section::new(n, move |y| f2.d_s(s, y));
    let first = derive_section(provider, &family.row(t)?, &along_row, s)?;
    let second = derive_section(provider, &family.col(s)?, &along_col, t)?;
    Ok(TorsionValue {
        value: first - second,
        at: (s, t),
    })
}

/// Component form of the curvature:
/// `∂_s Γ_{η(s,·)}(t) − ∂_t Γ_{η(·,t)}(s) + Γ_{η(·,t)}(s)Γ_{η(s,·)}(t) − Γ_{η(s,·)}(t)Γ_{η(·,t)}(s)`.
///
/// The two parameter derivatives are central differences over the family
/// parameters (the path itself is re-extracted at each stencil point).
pub fn curvature_matrix(
    provider: &CoefficientProvider,
    family: &Family,
    s: f64,
    t: f64,
    fd_step: f64,
) -> Result<CurvatureValue> {
    family.check(s, t)?;
    let d_col_ds = fd::diff2(|x| col_coefficient(provider, family, x, t), s, fd_step, family.domain_s())?;
    let d_row_dt = fd::diff2(|y| row_coefficient(provider, family, s, y), t, fd_step, family.domain_t())?;
    let row = row_coefficient(provider, family, s, t)?;
    let col = col_coefficient(provider, family, s, t)?;
    let value = d_col_ds - d_row_dt + &row * &col - &col * &row;
    Ok(CurvatureValue { value, at: (s, t) })
}

fn derive_col(
    provider: &CoefficientProvider,
    family: &Family,
    sec: &Section2,
    s: f64,
    t: f64,
) -> Result<Vector> {
    derive_section(provider, &family.col(s)?, &sec.along_col(s), t)
}

fn derive_row(
    provider: &CoefficientProvider,
    family: &Family,
    sec: &Section2,
    s: f64,
    t: f64,
) -> Result<Vector> {
    derive_section(provider, &family.row(t)?, &sec.along_row(t), s)
}

/// Operator form of the curvature applied to a two-parameter section:
/// `(D^{η(·,t)} ∘ D^{η(s,·)} − D^{η(s,·)} ∘ D^{η(·,t)}) σ` at `(s,t)`.
pub fn curvature_commutator(
    provider: &CoefficientProvider,
    family: &Family,
    sec: &Section2,
    s: f64,
    t: f64,
) -> Result<Vector> {
    if sec.dim() != provider.fibre_dim() {
        return Err(GeoError::argument(format!(
            "section has {} components, fibre dimension is {}",
            sec.dim(),
            provider.fibre_dim()
        )));
    }
    family.check(s, t)?;
    let h = sec.fd_step();

    // D_row applied to the field x ↦ (D_col σ)(x, t)
    let inner_col = derive_col(provider, family, sec, s, t)?;
    let d_inner_col = fd::diff4(|x| derive_col(provider, family, sec, x, t), s, h, family.domain_s())?;
    let row_of_col = d_inner_col + row_coefficient(provider, family, s, t)? * inner_col;

    let inner_row = derive_row(provider, family, sec, s, t)?;
    let d_inner_row = fd::diff4(|y| derive_row(provider, family, sec, s, y), t, h, family.domain_t())?;
    let col_of_row = d_inner_row + col_coefficient(provider, family, s, t)? * inner_row;

    Ok(row_of_col - col_of_row)
}

/// Rectangular grid of family parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub s: Interval,
    pub t: Interval,
    pub ns: usize,
    pub nt: usize,
}

impl ParamGrid {
    pub fn over(family: &Family, ns: usize, nt: usize) -> Self {
        ParamGrid {
            s: family.domain_s(),
            t: family.domain_t(),
            ns,
            nt,
        }
    }

    pub fn points(&self) -> Vec<(f64, f64)> {
        let ts = self.t.linspace(self.nt);
        self.s
            .linspace(self.ns)
            .into_iter()
            .flat_map(|s| ts.iter().map(move |&t| (s, t)))
            .collect()
    }
}

/// One sample of a field on `η(J, J′)`. Samples are keyed by their family
/// parameters; a self-intersecting family yields several samples for the
/// same base point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldSample<T> {
    pub s: f64,
    pub t: f64,
    pub point: Vector,
    pub value: T,
}

pub fn curvature_field(
    provider: &CoefficientProvider,
    family: &Family,
    grid: &ParamGrid,
    fd_step: f64,
) -> Result<Vec<FieldSample<Matrix>>> {
    par_map(grid.points(), |(s, t)| {
        curvature_matrix(provider, family, s, t, fd_step).map(|c| FieldSample {
            s,
            t,
            point: family.point(s, t),
            value: c.value,
        })
    })
    .into_iter()
    .collect()
}

pub fn torsion_field(
    provider: &CoefficientProvider,
    family: &Family,
    grid: &ParamGrid,
) -> Result<Vec<FieldSample<Vector>>> {
    par_map(grid.points(), |(s, t)| {
        torsion_components(provider, family, s, t).map(|v| FieldSample {
            s,
            t,
            point: family.point(s, t),
            value: v.value,
        })
    })
    .into_iter()
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    #[test]
    fn torsion_needs_tangent_bundle() {
        let p = zoo::make_flat(3, 2);
        let fam = Family::coordinate(unit(), unit());
        match torsion_components(&p, &fam, 0.5, 0.5) {
            Err(GeoError::Configuration(msg)) => assert!(msg.contains("tangent bundle")),
            other => panic!("{other:?}"),
        }
        assert!(torsion_operator(&p, &fam, 0.5, 0.5).is_err());
    }

    #[test]
    fn flat_model_has_nothing() {
        let p = zoo::make_flat(2, 2);
        let fam = Family::coordinate(unit(), unit());
        assert_eq!(torsion_components(&p, &fam, 0.2, 0.3).unwrap().value.norm(), 0.0);
        assert!(torsion_operator(&p, &fam, 0.2, 0.3).unwrap().value.norm() < 1e-12);
        assert_eq!(curvature_matrix(&p, &fam, 0.2, 0.3, 1e-4).unwrap().value.norm(), 0.0);
        let sec = Section2::new(2, |s, t| Vector::from_vec(vec![s * t, s + t * t]));
        assert!(curvature_commutator(&p, &fam, &sec, 0.4, 0.6).unwrap().norm() < 1e-8);
    }

    #[test]
    fn self_intersecting_family_keeps_both_samples() {
        let p = zoo::make_flat(2, 2);
        // η(s,t) = (s², t): s = ±0.5 hit the same base point
        let fam = Family::new(
            "fold",
            Interval::new(-0.5, 0.5).unwrap(),
            unit(),
            |s, t| Vector::from_vec(vec![s * s, t]),
            |s, _| Vector::from_vec(vec![2.0 * s, 0.0]),
            |_, _| Vector::from_vec(vec![0.0, 1.0]),
        );
        let grid = ParamGrid { s: fam.domain_s(), t: fam.domain_t(), ns: 3, nt: 2 };
        let field = curvature_field(&p, &fam, &grid, 1e-4).unwrap();
        assert_eq!(field.len(), 6);
        assert_eq!(field[0].point, field[4].point);
        assert_ne!(field[0].s, field[4].s);
    }
}
