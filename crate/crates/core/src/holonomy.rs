//! Small-loop interpretations of torsion and curvature.
//!
//! * Pentagon defect: transporting the displacement vectors `A = δη′` and
//!   `B = εη″` along each other leaves a gap of `−δε·𝒯^η(s,t)` to second
//!   order.
//! * Loop holonomy: going around the parameter rectangle
//!   `[s,s+δ] × [t,t+ε]` gives `I − δε·ℛ^η(s,t) + O(h³)`.

use serde::Serialize;

use crate::bundle::{CoefficientProvider, Family, Interval};
pub use crate::convergence::{convergence_order, ConvergenceFit};
use crate::curvature::{curvature_matrix, torsion_components, DEFAULT_CURVATURE_STEP};
use crate::error::{GeoError, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::transport::{default_steps, transport_matrix};

fn along_row(
    provider: &CoefficientProvider,
    family: &Family,
    t: f64,
    from: f64,
    to: f64,
    steps: usize,
) -> Result<Matrix> {
    Ok(transport_matrix(provider, &family.row(t)?, from, to, steps)?.value)
}

fn along_col(
    provider: &CoefficientProvider,
    family: &Family,
    s: f64,
    from: f64,
    to: f64,
    steps: usize,
) -> Result<Matrix> {
    Ok(transport_matrix(provider, &family.col(s)?, from, to, steps)?.value)
}

fn check_rectangle(family: &Family, s: f64, t: f64, delta: f64, eps: f64) -> Result<()> {
    family.check(s, t)?;
    family.check(s + delta, t + eps)
}

/// `(L^{η(·,t)}_{s→s+δ}B − L^{η(s,·)}_{t→t+ε}A) − (B − A)`, with
/// `A = δη′(s,t)`, `B = εη″(s,t)`.
pub fn pentagon_defect(
    provider: &CoefficientProvider,
    family: &Family,
    s: f64,
    t: f64,
    delta: f64,
    eps: f64,
) -> Result<Vector> {
    provider.chart().require_tangent()?;
    check_rectangle(family, s, t, delta, eps)?;
    let a = family.d_s(s, t) * delta;
    let b = family.d_t(s, t) * eps;
    let lb = along_row(provider, family, t, s, s + delta, default_steps(0.0, delta))? * &b;
    let la = along_col(provider, family, s, t, t + eps, default_steps(0.0, eps))? * &a;
    Ok((lb - la) - (b - a))
}

/// Pieces of the two-leg transport relation.
#[derive(Debug, Clone, PartialEq)]
pub struct DoubleTransport {
    /// `L^{η(s+δ,·)}_{t→t+ε}L^{η(·,t)}_{s→s+δ}B − L^{η(·,t+ε)}_{s→s+δ}L^{η(s,·)}_{t→t+ε}A`.
    pub left: Vector,
    /// `L^{η(s,·)}_{t→t+ε}B − L^{η(·,t)}_{s→s+δ}A`.
    pub bracket: Vector,
    /// `𝒯^η(s,t)` from the component formula.
    pub torsion: Vector,
    /// `left − bracket + δε𝒯`, which is `O(h³)`.
    pub remainder: Vector,
}

pub fn double_transport_defect(
    provider: &CoefficientProvider,
    family: &Family,
    s: f64,
    t: f64,
    delta: f64,
    eps: f64,
) -> Result<DoubleTransport> {
    provider.chart().require_tangent()?;
    check_rectangle(family, s, t, delta, eps)?;
    let a = family.d_s(s, t) * delta;
    let b = family.d_t(s, t) * eps;
    let (ns, nt) = (default_steps(0.0, delta), default_steps(0.0, eps));

    let row_t = along_row(provider, family, t, s, s + delta, ns)?;
    let col_s = along_col(provider, family, s, t, t + eps, nt)?;
    let col_far = along_col(provider, family, s + delta, t, t + eps, nt)?;
    let row_far = along_row(provider, family, t + eps, s, s + delta, ns)?;

    let left = &col_far * (&row_t * &b) - &row_far * (&col_s * &a);
    let bracket = &col_s * &b - &row_t * &a;
    let torsion = torsion_components(provider, family, s, t)?.value;
    let remainder = &left - &bracket + &torsion * (delta * eps);
    Ok(DoubleTransport {
        left,
        bracket,
        torsion,
        remainder,
    })
}

/// Transport around the boundary of `[s,s+δ] × [t,t+ε]`: along `η(·,t)`,
/// up `η(s+δ,·)`, back along `η(·,t+ε)`, down `η(s,·)`. Every leg uses
/// `steps` integrator steps.
pub fn loop_holonomy(
    provider: &CoefficientProvider,
    family: &Family,
    s: f64,
    t: f64,
    delta: f64,
    eps: f64,
    steps: usize,
) -> Result<Matrix> {
    check_rectangle(family, s, t, delta, eps)?;
    let first = along_row(provider, family, t, s, s + delta, steps)?;
    let second = along_col(provider, family, s + delta, t, t + eps, steps)?;
    let third = along_row(provider, family, t + eps, s + delta, s, steps)?;
    let fourth = along_col(provider, family, s, t + eps, t, steps)?;
    Ok(fourth * third * second * first)
}

/// Same rectangle traversed the other way round.
pub fn loop_holonomy_reversed(
    provider: &CoefficientProvider,
    family: &Family,
    s: f64,
    t: f64,
    delta: f64,
    eps: f64,
    steps: usize,
) -> Result<Matrix> {
    check_rectangle(family, s, t, delta, eps)?;
    let first = along_col(provider, family, s, t, t + eps, steps)?;
    let second = along_row(provider, family, t + eps, s, s + delta, steps)?;
    let third = along_col(provider, family, s + delta, t + eps, t, steps)?;
    let fourth = along_row(provider, family, t, s + delta, s, steps)?;
    Ok(fourth * third * second * first)
}

/// The loop holonomy applied to a fibre vector at `η(s,t)`.
#[allow(clippy::too_many_arguments)]
pub fn loop_holonomy_vector(
    provider: &CoefficientProvider,
    family: &Family,
    s: f64,
    t: f64,
    delta: f64,
    eps: f64,
    steps: usize,
    a: &Vector,
) -> Result<Vector> {
    if a.len() != provider.fibre_dim() {
        return Err(GeoError::argument("vector dimension does not match fibre"));
    }
    Ok(loop_holonomy(provider, family, s, t, delta, eps, steps)? * a)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolonomyEstimate {
    /// Richardson-extrapolated limit of `−(Hol(h) − I)/h²`.
    #[serde(serialize_with = "crate::linalg::serialize_matrix")]
    pub curvature: Matrix,
    /// Highest power of `h` removed from the error by the extrapolation.
    pub richardson_order: u32,
    /// `(h, −(Hol(h) − I)/h²)` per level.
    #[serde(skip)]
    pub levels: Vec<(f64, Matrix)>,
    /// Fit of `‖−(Hol(h) − I)/h² − limit‖` against `h`.
    pub residual_fit: ConvergenceFit,
}

fn check_sequence(h_sequence: &[f64]) -> Result<()> {
    if h_sequence.len() < 3 {
        return Err(GeoError::argument(format!(
            "holonomy estimate needs at least 3 levels, got {}",
            h_sequence.len()
        )));
    }
    if h_sequence.iter().any(|h| !(h.is_finite() && *h > 0.0))
        || h_sequence.windows(2).any(|w| w[1] >= w[0])
    {
        return Err(GeoError::argument("h sequence must be positive and strictly decreasing"));
    }
    Ok(())
}

/// Estimates `ℛ^η(s,t)` from loop holonomies over a decreasing sequence of
/// square loops `δ = ε = h`.
pub fn holonomy_curvature_estimate(
    provider: &CoefficientProvider,
    family: &Family,
    s: f64,
    t: f64,
    h_sequence: &[f64],
    steps: usize,
) -> Result<HolonomyEstimate> {
    check_sequence(h_sequence)?;
    let n = provider.fibre_dim();
    let id = linalg::identity(n);
    let levels = h_sequence
        .iter()
        .map(|&h| {
            let hol = loop_holonomy(provider, family, s, t, h, h, steps)?;
            Ok((h, -(hol - &id) / (h * h)))
        })
        .collect::<Result<Vec<_>>>()?;

    // Neville extrapolation to h = 0, treating the level values as a
    // polynomial in h; removes the error terms h, h², …, h^(k−1)
    let k = levels.len();
    let mut column: Vec<Matrix> = levels.iter().map(|(_, e)| e.clone()).collect();
    for j in 1..k {
        column = (j..k)
            .map(|i| {
                let (hi, hj) = (levels[i].0, levels[i - j].0);
                let (cur, prev) = (&column[i + 1 - j], &column[i - j]);
                cur + (cur - prev) * (hi / (hj - hi))
            })
            .collect();
    }
    let curvature = column.pop().expect("at least three levels");
    let order = (k - 1) as u32;

    let residuals: Vec<(f64, f64)> = levels
        .iter()
        .map(|(h, e)| (*h, (e - &curvature).norm()))
        .collect();
    Ok(HolonomyEstimate {
        curvature,
        richardson_order: order,
        residual_fit: convergence_order(&residuals)?,
        levels,
    })
}

/// Fit of `‖Hol(h) − (I − h²ℛ)‖` for square loops, given a reference
/// curvature matrix (by default the component formula at `(s,t)`).
pub fn holonomy_remainder_fit(
    provider: &CoefficientProvider,
    family: &Family,
    s: f64,
    t: f64,
    h_sequence: &[f64],
    steps: usize,
    reference: Option<&Matrix>,
) -> Result<ConvergenceFit> {
    let owned;
    let curv = match reference {
        Some(r) => r,
        None => {
            owned = curvature_matrix(provider, family, s, t, DEFAULT_CURVATURE_STEP)?.value;
            &owned
        }
    };
    let id = linalg::identity(provider.fibre_dim());
    let samples = h_sequence
        .iter()
        .map(|&h| {
            let hol = loop_holonomy(provider, family, s, t, h, h, steps)?;
            Ok((h, (hol - (&id - curv * (h * h))).norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    convergence_order(&samples)
}

/// Fit of `‖pentagon_defect + δε𝒯‖` for `δ = ε = h`.
pub fn pentagon_remainder_fit(
    provider: &CoefficientProvider,
    family: &Family,
    s: f64,
    t: f64,
    h_sequence: &[f64],
) -> Result<ConvergenceFit> {
    let torsion = torsion_components(provider, family, s, t)?.value;
    let samples = h_sequence
        .iter()
        .map(|&h| {
            let d = pentagon_defect(provider, family, s, t, h, h)?;
            Ok((h, (d + &torsion * (h * h)).norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    convergence_order(&samples)
}

/// `∫₀^Δ e^{−σG} dσ`, read off the exponential of an augmented matrix.
fn integrated_exp(g: &Matrix, delta: f64) -> Matrix {
    let n = g.nrows();
    let mut aug = Matrix::zeros(2 * n, 2 * n);
    aug.view_mut((0, 0), (n, n)).copy_from(&(-g * delta));
    aug.view_mut((0, n), (n, n)).copy_from(&(linalg::identity(n) * delta));
    linalg::expm(&aug).view((0, n), (n, n)).into_owned()
}

/// A family of L-paths for a provider with constant coefficient matrix `G`
/// (the same on every path): `η(s,t) = x₀ + ∫_{s₀}^{s} e^{−(σ−s₀)G}a dσ +
/// ∫_{t₀}^{t} e^{−(τ−t₀)G}b dτ`.
///
/// Its partials `η′ = e^{−(s−s₀)G}a` and `η″ = e^{−(t−t₀)G}b` are
/// transported into each other along rows and columns respectively, which
/// is exactly the L-path property.
pub fn constant_coefficient_l_paths(
    g: &Matrix,
    origin: Vector,
    a: Vector,
    b: Vector,
    domain_s: Interval,
    domain_t: Interval,
) -> Result<Family> {
    let n = g.nrows();
    if !g.is_square() || origin.len() != n || a.len() != n || b.len() != n {
        return Err(GeoError::argument("L-path family needs a square G and matching vectors"));
    }
    let (s0, t0) = (domain_s.lo, domain_t.lo);
    let (g1, g2, g3) = (g.clone(), g.clone(), g.clone());
    let (a1, a2, b1, b2) = (a.clone(), a, b.clone(), b);
    Ok(Family::new(
        "l-paths",
        domain_s,
        domain_t,
        move |s, t| &origin + integrated_exp(&g1, s - s0) * &a1 + integrated_exp(&g1, t - t0) * &b1,
        move |s, _| linalg::expm(&(&g2 * -(s - s0))) * &a2,
        move |_, t| linalg::expm(&(&g3 * -(t - t0))) * &b2,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo;

    #[test]
    fn flat_loops_are_trivial() {
        let p = zoo::make_flat(2, 2);
        let fam = Family::coordinate(Interval::new(0.0, 1.0).unwrap(), Interval::new(0.0, 1.0).unwrap());
        let hol = loop_holonomy(&p, &fam, 0.2, 0.3, 0.1, 0.2, 50).unwrap();
        assert!((hol - linalg::identity(2)).norm() < 1e-12);
        assert!(pentagon_defect(&p, &fam, 0.2, 0.3, 0.1, 0.1).unwrap().norm() < 1e-12);
    }

    #[test]
    fn rectangle_outside_domain() {
        let p = zoo::make_flat(2, 2);
        let fam = Family::coordinate(Interval::new(0.0, 1.0).unwrap(), Interval::new(0.0, 1.0).unwrap());
        assert!(matches!(
            loop_holonomy(&p, &fam, 0.95, 0.5, 0.1, 0.1, 10),
            Err(GeoError::Domain { .. })
        ));
    }

    #[test]
    fn estimate_needs_three_levels() {
        let p = zoo::make_flat(2, 2);
        let fam = Family::coordinate(Interval::new(0.0, 1.0).unwrap(), Interval::new(0.0, 1.0).unwrap());
        assert!(holonomy_curvature_estimate(&p, &fam, 0.5, 0.5, &[0.02, 0.01], 10).is_err());
        assert!(holonomy_curvature_estimate(&p, &fam, 0.5, 0.5, &[0.01, 0.02, 0.04], 10).is_err());
    }

    #[test]
    fn integrated_exponential_of_zero_is_linear() {
        let m = integrated_exp(&Matrix::zeros(2, 2), 0.7);
        assert!((m - linalg::identity(2) * 0.7).norm() < 1e-14);
    }
}
