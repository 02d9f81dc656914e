//! Bracket combinators on index tables and the cyclic identities of torsion
//! and curvature on multi-parameter families.
//!
//! Index tuples are zero-based. A combinator is a formal signed list of index
//! tuples; evaluating it sums the table entries term by term, so an identity
//! that "holds algebraically" is only reported as zero when the values really
//! cancel.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Neg, Sub};

use serde::Serialize;

use crate::bundle::{CoefficientProvider, MultiFamily, Section};
use crate::curvature::{curvature_matrix, torsion_components};
use crate::derivation::derive_section;
use crate::error::{GeoError, Result};
use crate::fd;
use crate::linalg::{commutator, Matrix, Vector};
use crate::par::par_map;

/// Residuals of the geometric identity checks below this are treated as
/// roundoff when fitting convergence orders. The identities are exact in the
/// continuum, and cyclic sums of finite-difference curvatures often cancel
/// down to a few ulps of the O(1) curvature entries.
pub const IDENTITY_FLOOR: f64 = 1e-12;

/// Values an index table can hold: an additive group with a shape.
pub trait TableValue:
    Clone + Add<Output = Self> + Sub<Output = Self> + Neg<Output = Self> + fmt::Debug
{
    fn shape(&self) -> (usize, usize);
}

impl TableValue for f64 {
    fn shape(&self) -> (usize, usize) {
        (1, 1)
    }
}

impl TableValue for i64 {
    fn shape(&self) -> (usize, usize) {
        (1, 1)
    }
}

impl TableValue for Matrix {
    fn shape(&self) -> (usize, usize) {
        (self.nrows(), self.ncols())
    }
}

impl TableValue for Vector {
    fn shape(&self) -> (usize, usize) {
        (self.nrows(), 1)
    }
}

/// A signed index tuple.
pub type Term = (i32, Vec<usize>);

/// `A_{x₁…x_k}` with the nested bracket `[x₁,[x₂,[…,x_k]]]` expanded:
/// `(A_{x₁ y})_{[x₁,…]} := (A_{x₁ y} − A_{y x₁})_{[x₂,…]}`.
pub fn nested_bracket_terms(xs: &[usize]) -> Vec<Term> {
    match xs.len() {
        0 => vec![],
        1 => vec![(1, xs.to_vec())],
        _ => {
            let head = xs[0];
            let mut out = Vec::new();
            for (c, tail) in nested_bracket_terms(&xs[1..]) {
                let mut front = vec![head];
                front.extend(&tail);
                let mut back = tail;
                back.push(head);
                out.push((c, front));
                out.push((-c, back));
            }
            out
        }
    }
}

/// All cyclic shifts of `xs`, starting with `xs` itself.
pub fn cyclic_shifts(xs: &[usize]) -> Vec<Vec<usize>> {
    (0..xs.len())
        .map(|r| xs[r..].iter().chain(&xs[..r]).copied().collect())
        .collect()
}

/// A table of values indexed by tuples of fixed arity over `{0,…,k−1}`.
/// Tuples may be left out; reading one that is missing is an error.
#[derive(Debug, Clone, PartialEq)]
pub struct IndexedValues<V> {
    arity: usize,
    k: usize,
    shape: Option<(usize, usize)>,
    table: BTreeMap<Vec<usize>, V>,
}

impl<V: TableValue> IndexedValues<V> {
    pub fn new(arity: usize, k: usize) -> Result<Self> {
        if !(2..=4).contains(&arity) {
            return Err(GeoError::argument(format!("arity must be 2, 3 or 4, got {arity}")));
        }
        if k == 0 {
            return Err(GeoError::argument("index range must be non-empty"));
        }
        Ok(IndexedValues {
            arity,
            k,
            shape: None,
            table: BTreeMap::new(),
        })
    }

    /// Every tuple in `{0,…,k−1}^arity` filled from `f`.
    pub fn from_fn(arity: usize, k: usize, mut f: impl FnMut(&[usize]) -> V) -> Result<Self> {
        let mut t = Self::new(arity, k)?;
        for idx in all_tuples(arity, k) {
            let v = f(&idx);
            t.insert(idx, v)?;
        }
        Ok(t)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn insert(&mut self, idx: Vec<usize>, value: V) -> Result<()> {
        self.check_tuple(&idx)?;
        let shape = value.shape();
        match self.shape {
            Some(s) if s != shape => {
                return Err(GeoError::argument(format!(
                    "value at {idx:?} has shape {shape:?}, table holds {s:?}"
                )))
            }
            _ => self.shape = Some(shape),
        }
        self.table.insert(idx, value);
        Ok(())
    }

    pub fn get(&self, idx: &[usize]) -> Result<&V> {
        self.check_tuple(idx)?;
        self.table
            .get(idx)
            .ok_or_else(|| GeoError::argument(format!("index table has no entry for {idx:?}")))
    }

    fn check_tuple(&self, idx: &[usize]) -> Result<()> {
        if idx.len() != self.arity {
            return Err(GeoError::argument(format!(
                "index tuple {idx:?} has length {}, table arity is {}",
                idx.len(),
                self.arity
            )));
        }
        if let Some(bad) = idx.iter().find(|&&i| i >= self.k) {
            return Err(GeoError::argument(format!(
                "index {bad} in {idx:?} out of range for k = {}",
                self.k
            )));
        }
        Ok(())
    }

    /// `Σ c·A[tuple]` over `terms`, summed in the order given.
    pub fn combine(&self, terms: &[Term]) -> Result<V> {
        let mut acc: Option<V> = None;
        for (c, idx) in terms {
            let v = self.get(idx)?.clone();
            let mut scaled: Option<V> = None;
            for _ in 0..c.unsigned_abs() {
                let piece = if *c < 0 { -v.clone() } else { v.clone() };
                scaled = Some(match scaled {
                    None => piece,
                    Some(s) => s + piece,
                });
            }
            if let Some(sv) = scaled {
                acc = Some(match acc {
                    None => sv,
                    Some(a) => a + sv,
                });
            }
        }
        match acc {
            Some(v) => Ok(v),
            // all coefficients were zero: produce an exact zero of the right shape
            None => {
                let (_, idx) = terms
                    .first()
                    .ok_or_else(|| GeoError::argument("empty combinator"))?;
                let v = self.get(idx)?;
                Ok(v.clone() - v.clone())
            }
        }
    }

    fn require_arity(&self, n: usize, idx: &[usize]) -> Result<()> {
        if self.arity != n || idx.len() != n {
            return Err(GeoError::argument(format!(
                "combinator over {} indices applied to an arity-{} table",
                idx.len(),
                self.arity
            )));
        }
        Ok(())
    }

    /// `(A_{ab})_{[a,b]} = A_{ab} − A_{ba}`.
    pub fn antisym2(&self, a: usize, b: usize) -> Result<V> {
        self.require_arity(2, &[a, b])?;
        self.combine(&[(1, vec![a, b]), (-1, vec![b, a])])
    }

    /// `(A_{ab})_{<a,b>} = A_{ab} + A_{ba}`.
    pub fn cyclic2(&self, a: usize, b: usize) -> Result<V> {
        self.require_arity(2, &[a, b])?;
        self.combine(&[(1, vec![a, b]), (1, vec![b, a])])
    }

    /// `A_{abc} + A_{bca} + A_{cab}`.
    pub fn cyclic3(&self, a: usize, b: usize, c: usize) -> Result<V> {
        self.require_arity(3, &[a, b, c])?;
        self.combine(&cyclic_terms(&[a, b, c]))
    }

    /// `A_{abcd} + A_{bcda} + A_{cdab} + A_{dabc}`.
    pub fn cyclic4(&self, a: usize, b: usize, c: usize, d: usize) -> Result<V> {
        self.require_arity(4, &[a, b, c, d])?;
        self.combine(&cyclic_terms(&[a, b, c, d]))
    }

    /// The nested bracket `[x₁,[x₂,…]]` over all of the table's indices.
    pub fn bracket(&self, idx: &[usize]) -> Result<V> {
        self.require_arity(self.arity, idx)?;
        self.combine(&nested_bracket_terms(idx))
    }

    /// `(A_{abc} + A_{bca} + A_{cab})_{[b,c]}`.
    pub fn antisym3(&self, a: usize, b: usize, c: usize) -> Result<V> {
        self.require_arity(3, &[a, b, c])?;
        let mut terms = cyclic_terms(&[a, b, c]);
        terms.extend(cyclic_terms(&[a, c, b]).into_iter().map(|(s, t)| (-s, t)));
        self.combine(&terms)
    }

    /// `((A_{ab})_{[a,b]})_{<a,b>}`.
    pub fn jacobi2(&self, a: usize, b: usize) -> Result<V> {
        self.require_arity(2, &[a, b])?;
        self.combine(&cyclic_of_brackets(&[a, b]))
    }

    /// `((A_{abc})_{[a,[b,c]]})_{<a,b,c>}`.
    pub fn jacobi3(&self, a: usize, b: usize, c: usize) -> Result<V> {
        self.require_arity(3, &[a, b, c])?;
        self.combine(&cyclic_of_brackets(&[a, b, c]))
    }

    /// `{(A_{abcd})_{[a,[b,[c,d]]]} + (A_{adcb})_{[a,[d,[c,b]]]}}_{<a,b,c,d>}`.
    pub fn jacobi4(&self, a: usize, b: usize, c: usize, d: usize) -> Result<V> {
        self.require_arity(4, &[a, b, c, d])?;
        let mut terms = Vec::new();
        for t in cyclic_shifts(&[a, b, c, d]) {
            terms.extend(nested_bracket_terms(&t));
            terms.extend(nested_bracket_terms(&[t[0], t[3], t[2], t[1]]));
        }
        self.combine(&terms)
    }
}

fn all_tuples(arity: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..arity {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..k).map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    out
}

fn cyclic_terms(xs: &[usize]) -> Vec<Term> {
    cyclic_shifts(xs).into_iter().map(|t| (1, t)).collect()
}

fn cyclic_of_brackets(xs: &[usize]) -> Vec<Term> {
    cyclic_shifts(xs)
        .iter()
        .flat_map(|t| nested_bracket_terms(t))
        .collect()
}

/// `{[R_{ab}, R_{cd}]}_{<a,b,c,d>}` from a table of pair matrices.
pub fn four_point_commutator_sum(
    r: &IndexedValues<Matrix>,
    a: usize,
    b: usize,
    c: usize,
    d: usize,
) -> Result<Matrix> {
    if r.arity() != 2 {
        return Err(GeoError::argument("four-point sum needs an arity-2 table"));
    }
    let mut acc: Option<Matrix> = None;
    for t in cyclic_shifts(&[a, b, c, d]) {
        let term = commutator(r.get(&[t[0], t[1]])?, r.get(&[t[2], t[3]])?);
        acc = Some(match acc {
            None => term,
            Some(x) => x + term,
        });
    }
    Ok(acc.expect("four cyclic shifts"))
}

// ---------------------------------------------------------------------------
// geometric checks

/// `ℛ^{τ_ab}(s_a, s_b)` at the family's basepoint.
pub fn pair_curvature(
    provider: &CoefficientProvider,
    mf: &MultiFamily,
    a: usize,
    b: usize,
    fd_step: f64,
) -> Result<Matrix> {
    let fam = mf.family_ab(a, b)?;
    let s = mf.basepoint();
    Ok(curvature_matrix(provider, &fam, s[a], s[b], fd_step)?.value)
}

/// `𝒯^{τ_ab}(s_a, s_b)` at the family's basepoint.
pub fn pair_torsion(provider: &CoefficientProvider, mf: &MultiFamily, a: usize, b: usize) -> Result<Vector> {
    let fam = mf.family_ab(a, b)?;
    let s = mf.basepoint();
    Ok(torsion_components(provider, &fam, s[a], s[b])?.value)
}

/// `ℛ^{τ_ab}` for every ordered pair `a ≠ b`.
pub fn curvature_table(
    provider: &CoefficientProvider,
    mf: &MultiFamily,
    fd_step: f64,
) -> Result<IndexedValues<Matrix>> {
    let k = mf.k();
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|a| (0..k).filter(move |&b| b != a).map(move |b| (a, b)))
        .collect();
    let values = par_map(pairs.clone(), |(a, b)| pair_curvature(provider, mf, a, b, fd_step));
    let mut table = IndexedValues::new(2, k)?;
    for ((a, b), v) in pairs.into_iter().zip(values) {
        table.insert(vec![a, b], v?)?;
    }
    Ok(table)
}

/// `A_{abc} = ℛ^{τ_bc}(τ̇_a)` for distinct `a, b, c`; antisymmetric in `(b,c)`.
pub fn curvature_tangent_table(
    provider: &CoefficientProvider,
    mf: &MultiFamily,
    fd_step: f64,
) -> Result<IndexedValues<Vector>> {
    let r = curvature_table(provider, mf, fd_step)?;
    let k = mf.k();
    let mut table = IndexedValues::new(3, k)?;
    for idx in all_tuples(3, k) {
        let (a, b, c) = (idx[0], idx[1], idx[2]);
        if a == b || b == c || a == c {
            continue;
        }
        let v = r.get(&[b, c])? * mf.tangent(a)?;
        table.insert(idx, v)?;
    }
    Ok(table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AntisymmetryResidual {
    /// `‖ℛ^{τ_ab}(s_a,s_b) + ℛ^{τ_ba}(s_b,s_a)‖`
    pub curvature: f64,
    /// `‖𝒯^{τ_ab}(s_a,s_b) + 𝒯^{τ_ba}(s_b,s_a)‖`, tangent bundles only.
    pub torsion: Option<f64>,
}

impl AntisymmetryResidual {
    pub fn max(&self) -> f64 {
        self.curvature.max(self.torsion.unwrap_or(0.0))
    }
}

pub fn check_antisymmetry(
    provider: &CoefficientProvider,
    mf: &MultiFamily,
    a: usize,
    b: usize,
    fd_step: f64,
) -> Result<AntisymmetryResidual> {
    let r = pair_curvature(provider, mf, a, b, fd_step)? + pair_curvature(provider, mf, b, a, fd_step)?;
    let torsion = if provider.chart().is_tangent() {
        let t = pair_torsion(provider, mf, a, b)? + pair_torsion(provider, mf, b, a)?;
        Some(t.norm())
    } else {
        None
    };
    Ok(AntisymmetryResidual {
        curvature: r.norm(),
        torsion,
    })
}

/// A fibre-vector field on the parameter box of a multi-parameter family.
pub type BoxSection = std::sync::Arc<dyn Fn(&[f64]) -> Vector + Send + Sync>;

fn triples(k: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            for c in b + 1..k {
                out.push([a, b, c]);
            }
        }
    }
    out
}

fn require_k(mf: &MultiFamily, min: usize, what: &str) -> Result<()> {
    if mf.k() < min {
        return Err(GeoError::argument(format!(
            "{what} needs k >= {min} parameters, family has k = {}",
            mf.k()
        )));
    }
    Ok(())
}

/// `s ↦ ℛ^{τ_bc}(s_b, s_c)` with the basepoint's `a`-th entry replaced by `x`.
fn curvature_along(
    provider: &CoefficientProvider,
    mf: &MultiFamily,
    a: usize,
    b: usize,
    c: usize,
    x: f64,
    fd_step: f64,
) -> Result<Matrix> {
    let mut s = mf.basepoint().to_vec();
    s[a] = x;
    pair_curvature(provider, &mf.with_basepoint(s)?, b, c, fd_step)
}

fn section_along(mf: &MultiFamily, a: usize, sec: &BoxSection, fd_step: f64, dim: usize) -> Section {
    let base = mf.basepoint().to_vec();
    let sec = sec.clone();
    Section::new(dim, move |x| {
        let mut s = base.clone();
        s[a] = x;
        sec(&s)
    })
    .with_fd_step(fd_step)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SecondBianchi {
    /// Largest `‖{𝒟^{τ_a}(ℛ^{τ_bc}) σ}_{<a,b,c>}‖` over index triples, with
    /// `𝒟(ℛ)σ = 𝒟(ℛσ) − ℛ(𝒟σ)`.
    pub operator: f64,
    /// Same cyclic sum in matrix form, `∂_a ℛ_{bc} + [Γ_a, ℛ_{bc}]`, Frobenius norm.
    pub matrix: f64,
    /// `‖operator-form vector − matrix-form sum · σ‖`.
    pub cross_check: f64,
}

/// Cyclic sum of the derivation of curvature along the third direction.
/// Both the "applied to a section" form and the matrix form are evaluated;
/// the second uses a plain central difference of the curvature field.
pub fn check_bianchi_second(
    provider: &CoefficientProvider,
    mf: &MultiFamily,
    test_sec: &BoxSection,
    fd_step: f64,
) -> Result<SecondBianchi> {
    require_k(mf, 3, "second Bianchi check")?;
    let n = provider.fibre_dim();
    let bp = mf.basepoint().to_vec();
    let sigma = test_sec(&bp);
    if sigma.len() != n {
        return Err(GeoError::argument(format!(
            "test section has {} components, fibre dimension is {n}",
            sigma.len()
        )));
    }
    let per_triple = par_map(triples(mf.k()), |abc| -> Result<(Vector, Matrix)> {
        let mut vec_sum = Vector::zeros(n);
        let mut mat_sum = Matrix::zeros(n, n);
        for t in cyclic_shifts(&abc) {
            let (a, b, c) = (t[0], t[1], t[2]);
            let path = mf.path_a(a)?;
            let r_here = pair_curvature(provider, mf, b, c, fd_step)?;

            // operator form
            let (pv, mv) = (provider.clone(), mf.clone());
            let (base, sec) = (bp.clone(), test_sec.clone());
            let product = Section::new(n, move |x| {
                let mut s = base.clone();
                s[a] = x;
                let r = curvature_along(&pv, &mv, a, b, c, x, fd_step)
                    .unwrap_or_else(|_| Matrix::from_element(n, n, f64::NAN));
                r * sec(&s)
            })
            .with_fd_step(fd_step);
            let d_product = derive_section(provider, &path, &product, bp[a])?;
            let d_sigma = derive_section(provider, &path, &section_along(mf, a, test_sec, fd_step, n), bp[a])?;
            vec_sum += d_product - &r_here * d_sigma;

            // matrix form
            let d_r = fd::diff2(
                |x| curvature_along(provider, mf, a, b, c, x, fd_step),
                bp[a],
                fd_step,
                path.domain(),
            )?;
            let gamma = provider.coefficient(&path, bp[a])?;
            mat_sum += d_r + commutator(&gamma, &r_here);
        }
        Ok((vec_sum, mat_sum))
    });
    let mut out = SecondBianchi {
        operator: 0.0,
        matrix: 0.0,
        cross_check: 0.0,
    };
    for r in per_triple {
        let (v, m) = r?;
        out.operator = out.operator.max(v.norm());
        out.matrix = out.matrix.max(m.norm());
        out.cross_check = out.cross_check.max((v - m * &sigma).norm());
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FirstBianchi {
    /// `‖{ℛ^{τ_ab}(τ̇_c)}_{<a,b,c>}‖`
    pub lhs: f64,
    /// `‖{𝒟^{τ_a}(𝒯^{τ_bc})}_{<a,b,c>}‖`
    pub rhs: f64,
    /// `‖LHS − RHS‖`
    pub residual: f64,
}

/// Cyclic sum of curvature applied to the third tangent against the cyclic
/// sum of the derivation of torsion. Maxima over index triples.
pub fn check_bianchi_first(
    provider: &CoefficientProvider,
    mf: &MultiFamily,
    fd_step: f64,
) -> Result<FirstBianchi> {
    provider.chart().require_tangent()?;
    require_k(mf, 3, "first Bianchi check")?;
    let n = provider.fibre_dim();
    let bp = mf.basepoint().to_vec();
    let per_triple = par_map(triples(mf.k()), |abc| -> Result<(Vector, Vector)> {
        let mut lhs = Vector::zeros(n);
        let mut rhs = Vector::zeros(n);
        for t in cyclic_shifts(&abc) {
            let (a, b, c) = (t[0], t[1], t[2]);
            lhs += pair_curvature(provider, mf, a, b, fd_step)? * mf.tangent(c)?;

            let (pv, mv, base) = (provider.clone(), mf.clone(), bp.clone());
            let torsion = Section::new(n, move |x| {
                let mut s = base.clone();
                s[a] = x;
                mv.with_basepoint(s)
                    .and_then(|m| pair_torsion(&pv, &m, b, c))
                    .unwrap_or_else(|_| Vector::from_element(n, f64::NAN))
            })
            .with_fd_step(fd_step);
            rhs += derive_section(provider, &mf.path_a(a)?, &torsion, bp[a])?;
        }
        Ok((lhs, rhs))
    });
    let mut out = FirstBianchi {
        lhs: 0.0,
        rhs: 0.0,
        residual: 0.0,
    };
    for r in per_triple {
        let (l, r) = r?;
        out.lhs = out.lhs.max(l.norm());
        out.rhs = out.rhs.max(r.norm());
        out.residual = out.residual.max((l - r).norm());
    }
    Ok(out)
}

/// `‖{[ℛ^{τ_ab}, ℛ^{τ_cd}] v}_{<a,b,c,d>}‖`, largest over increasing index
/// quadruples. Each pair curvature is computed once and reused.
pub fn check_four_point(
    provider: &CoefficientProvider,
    mf: &MultiFamily,
    test_vec: &Vector,
    fd_step: f64,
) -> Result<f64> {
    require_k(mf, 4, "four-point check")?;
    if test_vec.len() != provider.fibre_dim() {
        return Err(GeoError::argument(format!(
            "test vector has {} components, fibre dimension is {}",
            test_vec.len(),
            provider.fibre_dim()
        )));
    }
    let r = curvature_table(provider, mf, fd_step)?;
    let k = mf.k();
    let mut worst: f64 = 0.0;
    for a in 0..k {
        for b in a + 1..k {
            for c in b + 1..k {
                for d in c + 1..k {
                    let m = four_point_commutator_sum(&r, a, b, c, d)?;
                    worst = worst.max((m * test_vec).norm());
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bracket_expansion_matches_definition() {
        assert_eq!(nested_bracket_terms(&[0, 1]), vec![(1, vec![0, 1]), (-1, vec![1, 0])]);
        assert_eq!(
            nested_bracket_terms(&[0, 1, 2]),
            vec![(1, vec![0, 1, 2]), (-1, vec![1, 2, 0]), (-1, vec![0, 2, 1]), (1, vec![2, 1, 0])]
        );
        assert_eq!(nested_bracket_terms(&[3, 2, 1, 0]).len(), 8);
    }

    #[test]
    fn cyclic3_hand_sum() {
        let t = IndexedValues::from_fn(3, 3, |i| if i[0] == 0 { 1i64 } else { 0 }).unwrap();
        assert_eq!(t.cyclic3(0, 1, 2).unwrap(), 1);
    }

    #[test]
    fn symmetric_table_has_zero_antisymmetrization() {
        let t = IndexedValues::from_fn(2, 3, |i| (i[0] * i[1] + i[0] + i[1]) as f64).unwrap();
        assert_eq!(t.antisym2(0, 2).unwrap(), 0.0);
        assert_eq!(t.cyclic2(0, 2).unwrap(), 4.0);
    }

    #[test]
    fn missing_tuple_is_named() {
        let mut t = IndexedValues::<f64>::new(2, 3).unwrap();
        t.insert(vec![0, 1], 2.0).unwrap();
        match t.antisym2(0, 1) {
            Err(GeoError::Argument(msg)) => assert!(msg.contains("[1, 0]")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shapes_must_agree() {
        let mut t = IndexedValues::<Matrix>::new(2, 2).unwrap();
        t.insert(vec![0, 1], Matrix::zeros(2, 2)).unwrap();
        assert!(t.insert(vec![1, 0], Matrix::zeros(3, 3)).is_err());
        assert!(IndexedValues::<f64>::new(5, 2).is_err());
        assert!(t.insert(vec![0, 2], Matrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn separable_scalar_table_two_point() {
        let (f, g) = ([2i64, -3, 5], [7i64, 1, -4]);
        let t = IndexedValues::from_fn(2, 3, |i| f[i[0]] * g[i[1]]).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(t.jacobi2(a, b).unwrap(), 0);
            }
        }
    }

    #[test]
    fn jacobi_identities_on_integer_tables() {
        let t3 = IndexedValues::from_fn(3, 3, |i| (7 * i[0] * i[0] + 3 * i[1] + 11 * i[2] * i[0]) as i64 - 20).unwrap();
        assert_eq!(t3.jacobi3(0, 1, 2).unwrap(), 0);
        let t4 = IndexedValues::from_fn(4, 4, |i| {
            (i[0] * 13 + i[1] * i[1] * 5 + i[2] * i[3] * 3 + i[3] * i[0] * 7) as i64 - 40
        })
        .unwrap();
        assert_eq!(t4.jacobi4(0, 1, 2, 3).unwrap(), 0);
        // the single nested bracket itself does not vanish
        assert_ne!(t4.bracket(&[0, 1, 2, 3]).unwrap(), 0);
    }

    #[test]
    fn cyclization_remark_on_antisymmetric_table() {
        let base = IndexedValues::from_fn(3, 3, |i| (i[0] * 9 + i[1] * 4 + i[2] * i[2]) as i64).unwrap();
        let t = IndexedValues::from_fn(3, 3, |i| {
            base.get(i).unwrap() - base.get(&[i[0], i[2], i[1]]).unwrap()
        })
        .unwrap();
        let two_cyc = 2 * t.cyclic3(0, 1, 2).unwrap();
        assert_eq!(two_cyc, t.antisym3(0, 1, 2).unwrap());
    }

    #[test]
    fn four_point_commutators_cancel_on_antisymmetric_pairs() {
        let mut r = IndexedValues::<Matrix>::new(2, 4).unwrap();
        for a in 0..4 {
            for b in 0..4 {
                if a < b {
                    let m = Matrix::from_fn(3, 3, |i, j| ((i * 3 + j + a * 5 + b * 7) % 11) as f64 - 5.0);
                    r.insert(vec![a, b], m.clone()).unwrap();
                    r.insert(vec![b, a], -m).unwrap();
                }
            }
        }
        assert_eq!(four_point_commutator_sum(&r, 0, 1, 2, 3).unwrap().norm(), 0.0);
    }
}
