//! Data model: the bundle chart, paths, one- and multi-parameter families,
//! sections, coefficient providers and frame maps.
//!
//! The base is a single coordinate box in `R^m`, the fibre is `R^n`, and
//! every operator is an `n x n` matrix in the working frame. Velocities and
//! partials are supplied analytically by whoever builds a path or family;
//! finite differences only ever *check* them.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{GeoError, Result};
use crate::fd;
use crate::linalg::{self, Matrix, Vector};

pub type Curve = Arc<dyn Fn(f64) -> Vector + Send + Sync>;
pub type Sheet = Arc<dyn Fn(f64, f64) -> Vector + Send + Sync>;
pub type BoxMap = Arc<dyn Fn(&[f64]) -> Vector + Send + Sync>;
pub type BoxPartials = Arc<dyn Fn(&[f64]) -> Vec<Vector> + Send + Sync>;

/// Tolerance of the velocity/partial consistency check, relative to `1 + ‖v‖`.
pub const VELOCITY_CHECK_TOL: f64 = 1e-6;

/// Closed real interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(GeoError::argument(format!("invalid interval [{lo}, {hi}]")));
        }
        Ok(Interval { lo, hi })
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn check(&self, what: &str, x: f64) -> Result<()> {
        if self.contains(x) {
            Ok(())
        } else {
            Err(GeoError::domain(what, x, self.lo, self.hi))
        }
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    /// `count` equally spaced points including both ends.
    pub fn linspace(&self, count: usize) -> Vec<f64> {
        match count {
            0 => vec![],
            1 => vec![self.midpoint()],
            _ => (0..count)
                .map(|i| self.lo + self.length() * i as f64 / (count - 1) as f64)
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BundleChart {
    /// Dimension `m` of the base coordinate patch.
    pub base_dim: usize,
    /// Fibre dimension `n`.
    pub fibre_dim: usize,
}

impl BundleChart {
    pub fn new(base_dim: usize, fibre_dim: usize) -> Result<Self> {
        if base_dim == 0 || fibre_dim == 0 {
            return Err(GeoError::argument("chart dimensions must be positive"));
        }
        Ok(BundleChart { base_dim, fibre_dim })
    }

    pub fn is_tangent(&self) -> bool {
        self.base_dim == self.fibre_dim
    }

    pub fn require_tangent(&self) -> Result<()> {
        if self.is_tangent() {
            Ok(())
        } else {
            Err(GeoError::Configuration(format!(
                "torsion requires tangent bundle (fibre dim {} != base dim {})",
                self.fibre_dim, self.base_dim
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Smoothness {
    C1,
    C2,
}

fn max_velocity_error(point: &Curve, velocity: &Curve, domain: Interval, samples: usize) -> f64 {
    let h = 1e-4 * domain.length();
    // Central difference where it fits, plus both one-sided stencils so that
    // piecewise-smooth C¹ curves are judged by the smooth side of a corner.
    let candidates = |s: f64| -> Vec<Vector> {
        let mut out = Vec::with_capacity(3);
        if domain.contains(s - h) && domain.contains(s + h) {
            out.push((point(s + h) - point(s - h)) / (2.0 * h));
        }
        if domain.contains(s + 2.0 * h) {
            out.push((point(s) * -3.0 + point(s + h) * 4.0 - point(s + 2.0 * h)) / (2.0 * h));
        }
        if domain.contains(s - 2.0 * h) {
            out.push((point(s) * 3.0 - point(s - h) * 4.0 + point(s - 2.0 * h)) / (2.0 * h));
        }
        out
    };
    domain
        .linspace(samples.max(2))
        .into_iter()
        .map(|s| {
            let v = velocity(s);
            candidates(s)
                .into_iter()
                .map(|d| (&v - d).norm() / (1.0 + v.norm()))
                .fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max)
}

/// A parametrized curve `γ: [a,b] → R^m` with its analytic velocity.
#[derive(Clone)]
pub struct Path {
    label: Arc<str>,
    domain: Interval,
    point: Curve,
    velocity: Curve,
    smoothness: Smoothness,
}

impl fmt::Debug for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Path")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl Path {
    pub fn new(
        label: impl Into<String>,
        domain: Interval,
        point: impl Fn(f64) -> Vector + Send + Sync + 'static,
        velocity: impl Fn(f64) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Path {
            label: Arc::from(label.into()),
            domain,
            point: Arc::new(point),
            velocity: Arc::new(velocity),
            smoothness: Smoothness::C2,
        }
    }

    pub fn with_smoothness(mut self, smoothness: Smoothness) -> Self {
        self.smoothness = smoothness;
        self
    }

    /// Straight segment `from → to` over `[0, 1]`.
    pub fn segment(from: Vector, to: Vector) -> Self {
        let dir = &to - &from;
        let d2 = dir.clone();
        Path::new(
            "segment",
            Interval { lo: 0.0, hi: 1.0 },
            move |s| &from + &dir * s,
            move |_| d2.clone(),
        )
    }

    /// Polyline through `nodes`, leg `k` traversed over `[k, k+1]` with the
    /// smoothstep profile `3u² − 2u³`, so the velocity vanishes at the corners
    /// and the curve stays C¹.
    pub fn polyline(nodes: Vec<Vector>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(GeoError::argument("polyline needs at least two nodes"));
        }
        let legs = nodes.len() - 1;
        let nodes = Arc::new(nodes);
        let locate = move |s: f64| -> (usize, f64) {
            let k = (s.floor().max(0.0) as usize).min(legs - 1);
            (k, s - k as f64)
        };
        let n1 = Arc::clone(&nodes);
        let n2 = Arc::clone(&nodes);
        Ok(Path::new(
            format!("polyline{}", legs),
            Interval { lo: 0.0, hi: legs as f64 },
            move |s| {
                let (k, u) = locate(s);
                let w = u * u * (3.0 - 2.0 * u);
                &n1[k] + (&n1[k + 1] - &n1[k]) * w
            },
            move |s| {
                let (k, u) = locate(s);
                (&n2[k + 1] - &n2[k]) * (6.0 * u * (1.0 - u))
            },
        )
        .with_smoothness(Smoothness::C1))
    }

    /// Quadratic Bézier arc from `from` to `to` with control point `control`,
    /// over `[0, 1]`.
    pub fn quadratic_arc(from: Vector, control: Vector, to: Vector) -> Self {
        let (p0, p1, p2) = (from, control, to);
        let (q0, q1, q2) = (p0.clone(), p1.clone(), p2.clone());
        Path::new(
            "quadratic-arc",
            Interval { lo: 0.0, hi: 1.0 },
            move |u| &p0 * ((1.0 - u) * (1.0 - u)) + &p1 * (2.0 * u * (1.0 - u)) + &p2 * (u * u),
            move |u| (&q1 - &q0) * (2.0 * (1.0 - u)) + (&q2 - &q1) * (2.0 * u),
        )
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn relabel(mut self, label: impl Into<String>) -> Self {
        self.label = Arc::from(label.into());
        self
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn point(&self, s: f64) -> Vector {
        (self.point)(s)
    }

    pub fn velocity(&self, s: f64) -> Vector {
        (self.velocity)(s)
    }

    pub fn start(&self) -> Vector {
        self.point(self.domain.lo)
    }

    pub fn end(&self) -> Vector {
        self.point(self.domain.hi)
    }

    /// `γ ∘ φ` for a monotone reparametrization `φ: new_domain → domain` with
    /// derivative `dphi`.
    pub fn reparametrize(
        &self,
        new_domain: Interval,
        phi: impl Fn(f64) -> f64 + Send + Sync + 'static,
        dphi: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        let phi = Arc::new(phi);
        let phi2 = Arc::clone(&phi);
        let (p, v) = (self.point.clone(), self.velocity.clone());
        Path {
            label: Arc::from(format!("{}~reparam", self.label)),
            domain: new_domain,
            point: Arc::new(move |u| p(phi(u))),
            velocity: Arc::new(move |u| v(phi2(u)) * dphi(u)),
            smoothness: self.smoothness,
        }
    }

    /// Largest relative mismatch between the declared velocity and a central
    /// difference of the point map, over `samples` evenly spaced parameters.
    pub fn velocity_error(&self, samples: usize) -> f64 {
        max_velocity_error(&self.point, &self.velocity, self.domain, samples)
    }

    pub fn validate(&self, samples: usize) -> Result<()> {
        let err = self.velocity_error(samples);
        if err > VELOCITY_CHECK_TOL {
            return Err(GeoError::argument(format!(
                "path '{}': velocity disagrees with finite difference by {err:.3e}",
                self.label
            )));
        }
        Ok(())
    }
}

/// Two-parameter family `η: J × J′ → R^m` with partials `η′ = ∂η/∂s` and
/// `η″ = ∂η/∂t`.
#[derive(Clone)]
pub struct Family {
    label: Arc<str>,
    domain_s: Interval,
    domain_t: Interval,
    point: Sheet,
    d_s: Sheet,
    d_t: Sheet,
}

impl fmt::Debug for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Family")
            .field("label", &self.label)
            .field("domain_s", &self.domain_s)
            .field("domain_t", &self.domain_t)
            .finish_non_exhaustive()
    }
}

impl Family {
    pub fn new(
        label: impl Into<String>,
        domain_s: Interval,
        domain_t: Interval,
        point: impl Fn(f64, f64) -> Vector + Send + Sync + 'static,
        d_s: impl Fn(f64, f64) -> Vector + Send + Sync + 'static,
        d_t: impl Fn(f64, f64) -> Vector + Send + Sync + 'static,
    ) -> Self {
        Family {
            label: Arc::from(label.into()),
            domain_s,
            domain_t,
            point: Arc::new(point),
            d_s: Arc::new(d_s),
            d_t: Arc::new(d_t),
        }
    }

    /// `η(s,t) = (s,t)` on a plane chart.
    pub fn coordinate(domain_s: Interval, domain_t: Interval) -> Self {
        Family::new(
            "coordinate",
            domain_s,
            domain_t,
            |s, t| Vector::from_vec(vec![s, t]),
            |_, _| Vector::from_vec(vec![1.0, 0.0]),
            |_, _| Vector::from_vec(vec![0.0, 1.0]),
        )
    }

    /// Coordinate family in an `m`-dimensional chart: coordinates `i` and `j`
    /// of `base` are replaced by `s` and `t`.
    pub fn coordinate_plane(
        base: Vector,
        i: usize,
        j: usize,
        domain_s: Interval,
        domain_t: Interval,
    ) -> Result<Self> {
        let m = base.len();
        if i >= m || j >= m || i == j {
            return Err(GeoError::argument(format!(
                "coordinate axes ({i}, {j}) invalid for dimension {m}"
            )));
        }
        let unit = move |k: usize| {
            let mut e = Vector::zeros(m);
            e[k] = 1.0;
            e
        };
        Ok(Family::new(
            format!("coordinate[{i},{j}]"),
            domain_s,
            domain_t,
            move |s, t| {
                let mut x = base.clone();
                x[i] = s;
                x[j] = t;
                x
            },
            move |_, _| unit(i),
            move |_, _| unit(j),
        ))
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain_s(&self) -> Interval {
        self.domain_s
    }

    pub fn domain_t(&self) -> Interval {
        self.domain_t
    }

    pub fn point(&self, s: f64, t: f64) -> Vector {
        (self.point)(s, t)
    }

    pub fn d_s(&self, s: f64, t: f64) -> Vector {
        (self.d_s)(s, t)
    }

    pub fn d_t(&self, s: f64, t: f64) -> Vector {
        (self.d_t)(s, t)
    }

    pub fn check(&self, s: f64, t: f64) -> Result<()> {
        self.domain_s.check("family parameter s", s)?;
        self.domain_t.check("family parameter t", t)
    }

    /// The path `η(·, t)`.
    pub fn row(&self, t: f64) -> Result<Path> {
        self.domain_t.check("row parameter t", t)?;
        let (p, v) = (self.point.clone(), self.d_s.clone());
        Ok(Path {
            label: Arc::from(format!("{}.row({t})", self.label)),
            domain: self.domain_s,
            point: Arc::new(move |s| p(s, t)),
            velocity: Arc::new(move |s| v(s, t)),
            smoothness: Smoothness::C2,
        })
    }

    /// The path `η(s, ·)`.
    pub fn col(&self, s: f64) -> Result<Path> {
        self.domain_s.check("column parameter s", s)?;
        let (p, v) = (self.point.clone(), self.d_t.clone());
        Ok(Path {
            label: Arc::from(format!("{}.col({s})", self.label)),
            domain: self.domain_t,
            point: Arc::new(move |t| p(s, t)),
            velocity: Arc::new(move |t| v(s, t)),
            smoothness: Smoothness::C2,
        })
    }

    /// Worst relative FD mismatch over a `samples x samples` grid of rows and
    /// columns.
    pub fn partials_error(&self, samples: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for t in self.domain_t.linspace(samples) {
            worst = worst.max(self.row(t).expect("grid inside domain").velocity_error(samples));
        }
        for s in self.domain_s.linspace(samples) {
            worst = worst.max(self.col(s).expect("grid inside domain").velocity_error(samples));
        }
        worst
    }

    pub fn validate(&self, samples: usize) -> Result<()> {
        let err = self.partials_error(samples);
        if err > VELOCITY_CHECK_TOL {
            return Err(GeoError::argument(format!(
                "family '{}': partials disagree with finite differences by {err:.3e}",
                self.label
            )));
        }
        Ok(())
    }
}

pub fn extract_row_path(family: &Family, t: f64) -> Result<Path> {
    family.row(t)
}

pub fn extract_col_path(family: &Family, s: f64) -> Result<Path> {
    family.col(s)
}

/// `k`-parameter map `τ^k` over a box, with analytic partials and a
/// basepoint used to freeze the parameters that are not varied.
///
/// Parameter indices are zero-based.
#[derive(Clone)]
pub struct MultiFamily {
    label: Arc<str>,
    domain: Vec<Interval>,
    point: BoxMap,
    partials: BoxPartials,
    basepoint: Vec<f64>,
}

impl fmt::Debug for MultiFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MultiFamily")
            .field("label", &self.label)
            .field("k", &self.domain.len())
            .field("basepoint", &self.basepoint)
            .finish_non_exhaustive()
    }
}

impl MultiFamily {
    pub fn new(
        label: impl Into<String>,
        domain: Vec<Interval>,
        point: impl Fn(&[f64]) -> Vector + Send + Sync + 'static,
        partials: impl Fn(&[f64]) -> Vec<Vector> + Send + Sync + 'static,
        basepoint: Vec<f64>,
    ) -> Result<Self> {
        if domain.len() < 2 {
            return Err(GeoError::argument("multi-parameter family needs k >= 2"));
        }
        let mf = MultiFamily {
            label: Arc::from(label.into()),
            domain,
            point: Arc::new(point),
            partials: Arc::new(partials),
            basepoint: vec![],
        };
        mf.with_basepoint(basepoint)
    }

    /// Chart-curve bundle `τ^k(s) = η(offset + M·s)` for an affine map
    /// `c(s) = offset + M s` from the `k`-box into the family's parameter
    /// rectangle (`M` is `2 x k`).
    pub fn chart_curve(
        family: &Family,
        offset: [f64; 2],
        map: Matrix,
        domain: Vec<Interval>,
        basepoint: Vec<f64>,
    ) -> Result<Self> {
        let k = domain.len();
        if map.nrows() != 2 || map.ncols() != k {
            return Err(GeoError::argument(format!(
                "chart-curve map must be 2x{k}, got {}x{}",
                map.nrows(),
                map.ncols()
            )));
        }
        let fam = family.clone();
        let fam2 = family.clone();
        let m1 = map.clone();
        let m2 = map;
        let affine = move |m: &Matrix, s: &[f64]| -> (f64, f64) {
            let mut out = offset;
            for (a, sa) in s.iter().enumerate() {
                out[0] += m[(0, a)] * sa;
                out[1] += m[(1, a)] * sa;
            }
            (out[0], out[1])
        };
        MultiFamily::new(
            format!("chart-curve[{}]", family.label()),
            domain,
            move |s| {
                let (u, v) = affine(&m1, s);
                fam.point(u, v)
            },
            move |s| {
                let (u, v) = affine(&m2, s);
                let (ds, dt) = (fam2.d_s(u, v), fam2.d_t(u, v));
                (0..s.len())
                    .map(|a| &ds * m2[(0, a)] + &dt * m2[(1, a)])
                    .collect()
            },
            basepoint,
        )
    }

    pub fn k(&self) -> usize {
        self.domain.len()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn basepoint(&self) -> &[f64] {
        &self.basepoint
    }

    pub fn domain(&self) -> &[Interval] {
        &self.domain
    }

    pub fn with_basepoint(&self, basepoint: Vec<f64>) -> Result<Self> {
        if basepoint.len() != self.k() {
            return Err(GeoError::argument(format!(
                "basepoint has {} entries, expected {}",
                basepoint.len(),
                self.k()
            )));
        }
        for (a, (iv, x)) in self.domain.iter().zip(&basepoint).enumerate() {
            iv.check(&format!("basepoint[{a}]"), *x)?;
        }
        Ok(MultiFamily {
            basepoint,
            ..self.clone()
        })
    }

    pub fn point(&self, s: &[f64]) -> Vector {
        (self.point)(s)
    }

    pub fn partials(&self, s: &[f64]) -> Vec<Vector> {
        (self.partials)(s)
    }

    /// `τ̇_a` at the basepoint.
    pub fn tangent(&self, a: usize) -> Result<Vector> {
        self.check_index(a)?;
        Ok(self.partials(&self.basepoint).swap_remove(a))
    }

    fn check_index(&self, a: usize) -> Result<()> {
        if a >= self.k() {
            return Err(GeoError::argument(format!(
                "parameter index {a} out of range for k = {}",
                self.k()
            )));
        }
        Ok(())
    }

    /// `τ_a`: every parameter but `a` frozen at the basepoint.
    pub fn path_a(&self, a: usize) -> Result<Path> {
        self.check_index(a)?;
        let (p, d) = (self.point.clone(), self.partials.clone());
        let (b1, b2) = (self.basepoint.clone(), self.basepoint.clone());
        Ok(Path {
            label: Arc::from(format!("{}.path({a})", self.label)),
            domain: self.domain[a],
            point: Arc::new(move |x| {
                let mut s = b1.clone();
                s[a] = x;
                p(&s)
            }),
            velocity: Arc::new(move |x| {
                let mut s = b2.clone();
                s[a] = x;
                d(&s).swap_remove(a)
            }),
            smoothness: Smoothness::C2,
        })
    }

    /// `τ_ab(σ₁, σ₂)`: parameters `a` and `b` set to `σ₁`, `σ₂`, the rest
    /// frozen at the basepoint.
    pub fn family_ab(&self, a: usize, b: usize) -> Result<Family> {
        self.check_index(a)?;
        self.check_index(b)?;
        if a == b {
            return Err(GeoError::argument(format!("pair family needs a != b, got a = b = {a}")));
        }
        let base = self.basepoint.clone();
        let fill = move |x: f64, y: f64| {
            let mut s = base.clone();
            s[a] = x;
            s[b] = y;
            s
        };
        let (f1, f2, f3) = (fill.clone(), fill.clone(), fill);
        let p = self.point.clone();
        let (d1, d2) = (self.partials.clone(), self.partials.clone());
        Ok(Family {
            label: Arc::from(format!("{}.pair({a},{b})", self.label)),
            domain_s: self.domain[a],
            domain_t: self.domain[b],
            point: Arc::new(move |x, y| p(&f1(x, y))),
            d_s: Arc::new(move |x, y| d1(&f2(x, y)).swap_remove(a)),
            d_t: Arc::new(move |x, y| d2(&f3(x, y)).swap_remove(b)),
        })
    }
}

pub fn extract_pair_family(mf: &MultiFamily, a: usize, b: usize) -> Result<Family> {
    mf.family_ab(a, b)
}

/// A fibre-vector-valued function of one parameter (components in the
/// working frame), optionally with an analytic derivative. Without one,
/// derivatives use a fourth-order central difference with step `fd_step`.
#[derive(Clone)]
pub struct Section {
    dim: usize,
    value: Curve,
    derivative: Option<Curve>,
    fd_step: f64,
}

pub const DEFAULT_SECTION_STEP: f64 = 1e-4;

impl Section {
    pub fn new(dim: usize, value: impl Fn(f64) -> Vector + Send + Sync + 'static) -> Self {
        Section {
            dim,
            value: Arc::new(value),
            derivative: None,
            fd_step: DEFAULT_SECTION_STEP,
        }
    }

    pub fn constant(v: Vector) -> Self {
        let dim = v.len();
        Section::new(dim, move |_| v.clone()).with_derivative(move |_| Vector::zeros(dim))
    }

    pub fn with_derivative(mut self, d: impl Fn(f64) -> Vector + Send + Sync + 'static) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn value(&self, s: f64) -> Result<Vector> {
        let v = (self.value)(s);
        if v.len() != self.dim {
            return Err(GeoError::argument(format!(
                "section returned {} components, expected {}",
                v.len(),
                self.dim
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(GeoError::Numeric {
                at: s,
                message: "non-finite section value".into(),
            });
        }
        Ok(v)
    }

    /// `σ′(s)`, analytic when available.
    pub fn derivative(&self, s: f64, domain: Interval) -> Result<Vector> {
        match &self.derivative {
            Some(d) => Ok(d(s)),
            None => fd::diff4(|x| self.value(x), s, self.fd_step, domain),
        }
    }
}

/// A fibre-vector-valued function of two family parameters.
#[derive(Clone)]
pub struct Section2 {
    dim: usize,
    value: Sheet,
    fd_step: f64,
}

impl Section2 {
    pub fn new(dim: usize, value: impl Fn(f64, f64) -> Vector + Send + Sync + 'static) -> Self {
        Section2 {
            dim,
            value: Arc::new(value),
            fd_step: DEFAULT_SECTION_STEP,
        }
    }

    pub fn with_fd_step(mut self, h: f64) -> Self {
        self.fd_step = h;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn fd_step(&self) -> f64 {
        self.fd_step
    }

    pub fn value(&self, s: f64, t: f64) -> Vector {
        (self.value)(s, t)
    }

    /// `t ↦ σ(s, t)` as a one-parameter section.
    pub fn along_col(&self, s: f64) -> Section {
        let v = self.value.clone();
        Section::new(self.dim, move |t| v(s, t)).with_fd_step(self.fd_step)
    }

    /// `s ↦ σ(s, t)` as a one-parameter section.
    pub fn along_row(&self, t: f64) -> Section {
        let v = self.value.clone();
        Section::new(self.dim, move |s| v(s, t)).with_fd_step(self.fd_step)
    }
}

/// Connection coefficients `Γ^i_{jk}(x)` in a chart, `n x n x m`. The last
/// index is the one contracted with the path velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct Christoffel {
    n: usize,
    m: usize,
    data: Vec<f64>,
}

impl Christoffel {
    pub fn zeros(n: usize, m: usize) -> Self {
        Christoffel {
            n,
            m,
            data: vec![0.0; n * n * m],
        }
    }

    fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n + j) * self.m + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.idx(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let at = self.idx(i, j, k);
        self.data[at] = value;
    }

    pub fn fibre_dim(&self) -> usize {
        self.n
    }

    pub fn base_dim(&self) -> usize {
        self.m
    }

    /// `Γ_γ(s)^i_j = Γ^i_{jk} v^k`.
    pub fn contract(&self, v: &Vector) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| {
            (0..self.m).map(|k| self.get(i, j, k) * v[k]).sum()
        })
    }

    /// Largest `|Γ^i_{jk} − Γ^i_{kj}|`; only meaningful when `n = m`.
    pub fn asymmetry(&self) -> f64 {
        if self.n != self.m {
            return f64::INFINITY;
        }
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                for k in 0..self.m {
                    worst = worst.max((self.get(i, j, k) - self.get(i, k, j)).abs());
                }
            }
        }
        worst
    }
}

pub type ChristoffelFn = Arc<dyn Fn(&Vector) -> Christoffel + Send + Sync>;
pub type CoeffFn = Arc<dyn Fn(&Path, f64) -> Matrix + Send + Sync>;

#[derive(Clone)]
pub enum ProviderKind {
    /// `Γ_γ(s) = Γ^i_{jk}(γ(s)) γ̇^k(s)`.
    ConnectionInduced { christoffel: ChristoffelFn },
    /// Arbitrary map `(γ, s) ↦ Γ_γ(s)`, optionally with `∂Γ_γ/∂s`.
    PathFunctional {
        coeff: CoeffFn,
        d_coeff: Option<CoeffFn>,
    },
}

/// The map `γ ↦ Γ_γ(·)` that defines a linear transport.
#[derive(Clone)]
pub struct CoefficientProvider {
    name: String,
    chart: BundleChart,
    region: Option<Vec<Interval>>,
    kind: ProviderKind,
}

impl fmt::Debug for CoefficientProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ProviderKind::ConnectionInduced { .. } => "connection-induced",
            ProviderKind::PathFunctional { .. } => "path-functional",
        };
        f.debug_struct("CoefficientProvider")
            .field("name", &self.name)
            .field("chart", &self.chart)
            .field("kind", &kind)
            .finish_non_exhaustive()
    }
}

impl CoefficientProvider {
    pub fn connection_induced(
        name: impl Into<String>,
        chart: BundleChart,
        christoffel: impl Fn(&Vector) -> Christoffel + Send + Sync + 'static,
    ) -> Self {
        CoefficientProvider {
            name: name.into(),
            chart,
            region: None,
            kind: ProviderKind::ConnectionInduced {
                christoffel: Arc::new(christoffel),
            },
        }
    }

    pub fn path_functional(
        name: impl Into<String>,
        chart: BundleChart,
        coeff: impl Fn(&Path, f64) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        CoefficientProvider {
            name: name.into(),
            chart,
            region: None,
            kind: ProviderKind::PathFunctional {
                coeff: Arc::new(coeff),
                d_coeff: None,
            },
        }
    }

    /// Attach an analytic `∂Γ_γ(s)/∂s` (path-functional providers only).
    pub fn with_coeff_derivative(
        mut self,
        d: impl Fn(&Path, f64) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        if let ProviderKind::PathFunctional { d_coeff, .. } = &mut self.kind {
            *d_coeff = Some(Arc::new(d));
        }
        self
    }

    /// Restrict base points to a coordinate box; points outside raise a
    /// domain error.
    pub fn with_region(mut self, region: Vec<Interval>) -> Self {
        self.region = Some(region);
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chart(&self) -> BundleChart {
        self.chart
    }

    pub fn fibre_dim(&self) -> usize {
        self.chart.fibre_dim
    }

    pub fn region(&self) -> Option<&[Interval]> {
        self.region.as_deref()
    }

    pub fn kind(&self) -> &ProviderKind {
        &self.kind
    }

    pub fn is_connection_induced(&self) -> bool {
        matches!(self.kind, ProviderKind::ConnectionInduced { .. })
    }

    pub fn check_point(&self, x: &Vector) -> Result<()> {
        if x.len() != self.chart.base_dim {
            return Err(GeoError::argument(format!(
                "base point has {} coordinates, chart has {}",
                x.len(),
                self.chart.base_dim
            )));
        }
        if let Some(region) = &self.region {
            for (k, iv) in region.iter().enumerate() {
                iv.check(&format!("{} chart coordinate {k}", self.name), x[k])?;
            }
        }
        Ok(())
    }

    pub fn christoffel_at(&self, x: &Vector) -> Option<Christoffel> {
        match &self.kind {
            ProviderKind::ConnectionInduced { christoffel } => Some(christoffel(x)),
            ProviderKind::PathFunctional { .. } => None,
        }
    }

    /// `Γ_γ(s)`.
    pub fn coefficient(&self, path: &Path, s: f64) -> Result<Matrix> {
        let g = match &self.kind {
            ProviderKind::ConnectionInduced { christoffel } => {
                let x = path.point(s);
                self.check_point(&x)?;
                christoffel(&x).contract(&path.velocity(s))
            }
            ProviderKind::PathFunctional { coeff, .. } => coeff(path, s),
        };
        let n = self.chart.fibre_dim;
        if g.nrows() != n || g.ncols() != n {
            return Err(GeoError::argument(format!(
                "provider '{}' returned a {}x{} coefficient matrix, expected {n}x{n}",
                self.name,
                g.nrows(),
                g.ncols()
            )));
        }
        if !linalg::is_finite(&g) {
            return Err(GeoError::Numeric {
                at: s,
                message: format!("non-finite coefficient matrix on path '{}'", path.label()),
            });
        }
        Ok(g)
    }

    /// Central-difference step for `∂Γ_γ(s)/∂s` when no analytic derivative
    /// is attached.
    pub fn fallback_step(s: f64) -> f64 {
        f64::max(1e-6, 1e-6 * s.abs())
    }

    /// `∂Γ_γ(s)/∂s`.
    pub fn coefficient_derivative(&self, path: &Path, s: f64) -> Result<Matrix> {
        if let ProviderKind::PathFunctional {
            d_coeff: Some(d), ..
        } = &self.kind
        {
            return Ok(d(path, s));
        }
        fd::diff2(
            |u| self.coefficient(path, u),
            s,
            Self::fallback_step(s),
            path.domain(),
        )
    }
}

/// `F(s; γ)`: the frame factorization of a transport through a fixed model
/// fibre, `H(t,s;γ) = F(t;γ)⁻¹ F(s;γ)`.
#[derive(Clone)]
pub struct FrameMap {
    name: String,
    dim: usize,
    frame: CoeffFn,
    derivative: Option<CoeffFn>,
}

impl fmt::Debug for FrameMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FrameMap")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .finish_non_exhaustive()
    }
}

impl FrameMap {
    pub fn new(
        name: impl Into<String>,
        dim: usize,
        frame: impl Fn(&Path, f64) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        FrameMap {
            name: name.into(),
            dim,
            frame: Arc::new(frame),
            derivative: None,
        }
    }

    pub fn with_derivative(
        mut self,
        d: impl Fn(&Path, f64) -> Matrix + Send + Sync + 'static,
    ) -> Self {
        self.derivative = Some(Arc::new(d));
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frame(&self, path: &Path, s: f64) -> Matrix {
        (self.frame)(path, s)
    }

    pub fn condition(&self, path: &Path, s: f64) -> f64 {
        linalg::condition_number(&self.frame(path, s))
    }

    pub fn frame_derivative(&self, path: &Path, s: f64) -> Result<Matrix> {
        match &self.derivative {
            Some(d) => Ok(d(path, s)),
            None => fd::diff2(
                |u| Ok(self.frame(path, u)),
                s,
                CoefficientProvider::fallback_step(s),
                path.domain(),
            ),
        }
    }
}

pub type BasisFn = Arc<dyn Fn(&Vector) -> Result<Matrix> + Send + Sync>;

/// Field of bases `x ↦ [e_1|_x … e_n|_x]` (basis vectors as columns).
#[derive(Clone)]
pub struct FrameField {
    basis: BasisFn,
}

impl fmt::Debug for FrameField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("FrameField")
    }
}

impl FrameField {
    pub fn new(basis: impl Fn(&Vector) -> Result<Matrix> + Send + Sync + 'static) -> Self {
        FrameField {
            basis: Arc::new(basis),
        }
    }

    pub fn basis_at(&self, x: &Vector) -> Result<Matrix> {
        let e = (self.basis)(x)?;
        let cond = linalg::condition_number(&e);
        if !cond.is_finite() || cond > linalg::MAX_CONDITION {
            return Err(GeoError::Singular { condition: cond });
        }
        Ok(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Interval {
        Interval::new(0.0, 1.0).unwrap()
    }

    fn v(xs: &[f64]) -> Vector {
        Vector::from_row_slice(xs)
    }

    #[test]
    fn row_of_coordinate_family() {
        let fam = Family::coordinate(unit(), unit());
        let row = extract_row_path(&fam, 0.5).unwrap();
        assert_eq!(row.point(0.3), v(&[0.3, 0.5]));
        assert_eq!(row.velocity(0.3), v(&[1.0, 0.0]));
        assert!(matches!(
            extract_row_path(&fam, 1.5),
            Err(GeoError::Domain { .. })
        ));
    }

    #[test]
    fn row_of_polar_family() {
        let fam = Family::new(
            "polar",
            unit(),
            unit(),
            |s, t| v(&[s * t.cos(), s * t.sin()]),
            |_, t| v(&[t.cos(), t.sin()]),
            |s, t| v(&[-s * t.sin(), s * t.cos()]),
        );
        let row = fam.row(0.0).unwrap();
        assert_eq!(row.point(0.7), v(&[0.7, 0.0]));
        assert_eq!(row.velocity(0.7), v(&[1.0, 0.0]));
        fam.validate(7).unwrap();
    }

    #[test]
    fn sphere_patch_row_is_meridian() {
        let th = Interval::new(0.2, 3.0).unwrap();
        let fam = Family::coordinate(th, Interval::new(0.0, 6.0).unwrap());
        let row = fam.row(1.0).unwrap();
        assert_eq!(row.point(1.3), v(&[1.3, 1.0]));
        assert_eq!(row.velocity(1.3), v(&[1.0, 0.0]));
    }

    fn identity3() -> MultiFamily {
        let iv = Interval::new(-1.0, 1.0).unwrap();
        MultiFamily::new(
            "id3",
            vec![iv; 3],
            v,
            |_| (0..3).map(|a| {
                let mut e = Vector::zeros(3);
                e[a] = 1.0;
                e
            }).collect(),
            vec![0.0; 3],
        )
        .unwrap()
    }

    #[test]
    fn pair_family_extraction_and_swap() {
        let mf = identity3();
        let f12 = extract_pair_family(&mf, 0, 1).unwrap();
        assert_eq!(f12.point(0.2, -0.4), v(&[0.2, -0.4, 0.0]));
        let f21 = extract_pair_family(&mf, 1, 0).unwrap();
        assert_eq!(f21.point(0.2, -0.4), v(&[-0.4, 0.2, 0.0]));
        assert_eq!(f12.point(0.3, 0.7), f21.point(0.7, 0.3));
    }

    #[test]
    fn pair_family_linear_map() {
        let iv = Interval::new(-1.0, 1.0).unwrap();
        let mf = MultiFamily::new(
            "lin",
            vec![iv; 2],
            |s| v(&[s[0] + s[1], s[0] - s[1]]),
            |_| vec![v(&[1.0, 1.0]), v(&[1.0, -1.0])],
            vec![0.0, 0.0],
        )
        .unwrap();
        let fam = mf.family_ab(0, 1).unwrap();
        assert_eq!(fam.point(0.25, 0.5), v(&[0.75, -0.25]));
        assert_eq!(fam.d_s(0.25, 0.5), v(&[1.0, 1.0]));
    }

    #[test]
    fn pair_family_errors() {
        let mf = identity3();
        assert!(matches!(mf.family_ab(1, 1), Err(GeoError::Argument(_))));
        assert!(matches!(mf.family_ab(0, 3), Err(GeoError::Argument(_))));
        assert!(mf.with_basepoint(vec![0.0, 0.0, 2.0]).is_err());
    }

    #[test]
    fn bad_velocity_is_flagged() {
        let p = Path::new("bad", unit(), |s| v(&[s * s]), |_| v(&[1.0]));
        assert!(p.validate(5).is_err());
        let good = Path::new("good", unit(), |s| v(&[s * s]), |s| v(&[2.0 * s]));
        good.validate(5).unwrap();
    }

    #[test]
    fn polyline_and_arc_velocities_check() {
        let pl = Path::polyline(vec![v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[1.0, 1.0])]).unwrap();
        pl.validate(9).unwrap();
        assert_eq!(pl.end(), v(&[1.0, 1.0]));
        let arc = Path::quadratic_arc(v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[1.0, 1.0]));
        arc.validate(9).unwrap();
    }

    #[test]
    fn christoffel_contract_and_symmetry() {
        let mut g = Christoffel::zeros(2, 2);
        g.set(0, 0, 1, 0.5);
        let a = g.contract(&v(&[0.0, 2.0]));
        assert_eq!(a[(0, 0)], 1.0);
        assert_eq!(g.asymmetry(), 0.5);
    }

    #[test]
    fn region_rejects_points() {
        let p = CoefficientProvider::connection_induced(
            "boxed",
            BundleChart::new(1, 1).unwrap(),
            |_| Christoffel::zeros(1, 1),
        )
        .with_region(vec![unit()]);
        let path = Path::new("out", Interval::new(0.0, 2.0).unwrap(), |s| v(&[s]), |_| v(&[1.0]));
        assert!(p.coefficient(&path, 0.5).is_ok());
        assert!(matches!(p.coefficient(&path, 1.5), Err(GeoError::Domain { .. })));
    }
}
