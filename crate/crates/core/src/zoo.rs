//! Built-in coefficient providers with known closed-form behaviour.
//!
//! | constructor | kind |
//! |-------------|------|
//! | [`make_flat`] | connection-induced, `Γ ≡ 0` |
//! | [`make_constant_coefficient`] | path-functional, `Γ_γ(s) = G` |
//! | [`make_sphere_levi_civita`] | Levi-Civita of the unit sphere in `(θ, φ)` |
//! | [`make_constant_torsion_plane`] | plane, only `Γ¹₁₂ = c` |
//! | [`make_frame_map_transport`] | path-functional from a frame map |

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::bundle::{
    BundleChart, Christoffel, CoefficientProvider, Family, FrameMap, Interval, MultiFamily, Path,
};
use crate::error::{GeoError, Result};
use crate::linalg::{self, Matrix, Vector};

/// Width of the polar band excluded from the sphere chart.
pub const SPHERE_POLE_BAND: f64 = 0.2;

pub fn make_flat(n: usize, m: usize) -> CoefficientProvider {
    let chart = BundleChart { base_dim: m, fibre_dim: n };
    CoefficientProvider::connection_induced("flat", chart, move |_| Christoffel::zeros(n, m))
}

/// `[[0, −1], [1, 0]]`.
pub fn rotation_generator() -> Matrix {
    Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0])
}

pub fn make_constant_coefficient(g: Matrix) -> Result<CoefficientProvider> {
    if !g.is_square() || g.nrows() == 0 {
        return Err(GeoError::argument("constant coefficient matrix must be square"));
    }
    if !linalg::is_finite(&g) {
        return Err(GeoError::argument("constant coefficient matrix must be finite"));
    }
    let n = g.nrows();
    let chart = BundleChart { base_dim: n, fibre_dim: n };
    Ok(
        CoefficientProvider::path_functional("constant", chart, move |_, _| g.clone())
            .with_coeff_derivative(move |_, _| Matrix::zeros(n, n)),
    )
}

/// Christoffel symbols of the round unit sphere in `(θ, φ)`.
pub fn sphere_christoffel(x: &Vector) -> Christoffel {
    let th = x[0];
    let mut g = Christoffel::zeros(2, 2);
    g.set(0, 1, 1, -th.sin() * th.cos());
    let cot = th.cos() / th.sin();
    g.set(1, 0, 1, cot);
    g.set(1, 1, 0, cot);
    g
}

pub fn make_sphere_levi_civita() -> CoefficientProvider {
    let chart = BundleChart { base_dim: 2, fibre_dim: 2 };
    CoefficientProvider::connection_induced("sphere", chart, sphere_christoffel).with_region(vec![
        Interval {
            lo: SPHERE_POLE_BAND,
            hi: PI - SPHERE_POLE_BAND,
        },
        // φ is periodic; any real value is a valid chart coordinate
        Interval {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        },
    ])
}

pub fn make_constant_torsion_plane(c: f64) -> Result<CoefficientProvider> {
    if !c.is_finite() {
        return Err(GeoError::argument("torsion constant must be finite"));
    }
    let chart = BundleChart { base_dim: 2, fibre_dim: 2 };
    Ok(CoefficientProvider::connection_induced("torsion_plane", chart, move |_| {
        let mut g = Christoffel::zeros(2, 2);
        g.set(0, 0, 1, c);
        g
    }))
}

/// Provider whose transport reproduces `F(t)⁻¹F(s)`: `Γ_γ(s) = F⁻¹ ∂F/∂s`.
///
/// The frame is probed on `[0, 1]`; a singular probe is rejected up front,
/// and singular frames met later surface as numeric errors.
pub fn make_frame_map_transport(fm: FrameMap) -> Result<CoefficientProvider> {
    let n = fm.dim();
    let probe = Path::new(
        "probe",
        Interval { lo: 0.0, hi: 1.0 },
        move |s| Vector::from_element(n, s),
        move |_| Vector::from_element(n, 1.0),
    );
    for s in probe.domain().linspace(11) {
        linalg::invert(&fm.frame(&probe, s))?;
    }
    let chart = BundleChart { base_dim: n, fibre_dim: n };
    let name = format!("frame:{}", fm.name());
    Ok(CoefficientProvider::path_functional(name, chart, move |path, s| {
        let f = fm.frame(path, s);
        match fm.frame_derivative(path, s).and_then(|df| linalg::solve(&f, &df)) {
            Ok(g) => g,
            Err(_) => Matrix::from_element(n, n, f64::NAN),
        }
    }))
}

pub fn identity_frame(n: usize) -> FrameMap {
    FrameMap::new("identity", n, move |_, _| linalg::identity(n))
        .with_derivative(move |_, _| Matrix::zeros(n, n))
}

/// `F(s) = exp(sG)`.
pub fn exp_frame(g: Matrix) -> FrameMap {
    let n = g.nrows();
    let g2 = g.clone();
    FrameMap::new("rotation", n, move |_, s| linalg::expm(&(&g * s)))
        .with_derivative(move |_, s| &g2 * linalg::expm(&(&g2 * s)))
}

/// `F(s) = diag(e^{r₁s}, …, e^{rₙs})`.
pub fn diag_exp_frame(rates: Vec<f64>) -> FrameMap {
    let n = rates.len();
    let r2 = rates.clone();
    FrameMap::new("diag_exp", n, move |_, s| {
        Matrix::from_diagonal(&Vector::from_iterator(n, rates.iter().map(|r| (r * s).exp())))
    })
    .with_derivative(move |_, s| {
        Matrix::from_diagonal(&Vector::from_iterator(n, r2.iter().map(|r| r * (r * s).exp())))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameName {
    Identity,
    Rotation,
    DiagExp,
}

impl FrameName {
    pub fn frame_map(self) -> FrameMap {
        match self {
            FrameName::Identity => identity_frame(2),
            FrameName::Rotation => exp_frame(rotation_generator()),
            FrameName::DiagExp => diag_exp_frame(vec![1.0, 2.0]),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            FrameName::Identity => "identity",
            FrameName::Rotation => "rotation",
            FrameName::DiagExp => "diag_exp",
        }
    }
}

/// Model selector, written `flat`, `flat{n,m}`, `constant{[[a,b],[c,d]]}`,
/// `sphere`, `torsion_plane{c}` or `frame{identity|rotation|diag_exp}`.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    Flat { n: usize, m: usize },
    Constant { g: Vec<Vec<f64>> },
    Sphere,
    TorsionPlane { c: f64 },
    Frame { name: FrameName },
}

/// Default torsion constant for `torsion_plane` without parameters.
pub const DEFAULT_TORSION_C: f64 = 0.25;

impl FromStr for ModelSpec {
    type Err = GeoError;

    fn from_str(raw: &str) -> Result<Self> {
        let raw = raw.trim();
        let (name, params) = match raw.find('{') {
            Some(open) => {
                if !raw.ends_with('}') {
                    return Err(GeoError::Configuration(format!("unbalanced braces in model '{raw}'")));
                }
                (&raw[..open], Some(raw[open + 1..raw.len() - 1].trim()))
            }
            None => (raw, None),
        };
        let bad = |what: &str| GeoError::Configuration(format!("model '{raw}': {what}"));
        match (name, params) {
            ("flat", None) => Ok(ModelSpec::Flat { n: 2, m: 2 }),
            ("flat", Some(p)) => {
                let dims: Vec<usize> = p
                    .split(',')
                    .map(|x| x.trim().parse::<usize>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| bad("expected flat{n,m}"))?;
                match dims[..] {
                    [n, m] if n > 0 && m > 0 => Ok(ModelSpec::Flat { n, m }),
                    _ => Err(bad("expected flat{n,m} with positive dimensions")),
                }
            }
            ("constant", None) => Ok(ModelSpec::Constant {
                g: linalg::to_rows(&rotation_generator()),
            }),
            ("constant", Some(p)) => {
                let g: Vec<Vec<f64>> =
                    serde_json::from_str(p).map_err(|e| bad(&format!("matrix parse: {e}")))?;
                linalg::from_rows(&g).map_err(|e| bad(&e.to_string()))?;
                Ok(ModelSpec::Constant { g })
            }
            ("sphere", None) => Ok(ModelSpec::Sphere),
            ("torsion_plane", None) => Ok(ModelSpec::TorsionPlane { c: DEFAULT_TORSION_C }),
            ("torsion_plane", Some(p)) => {
                let c = p
                    .trim_start_matches("c=")
                    .parse::<f64>()
                    .map_err(|_| bad("expected torsion_plane{c}"))?;
                Ok(ModelSpec::TorsionPlane { c })
            }
            ("frame", Some(p)) => {
                let name = match p {
                    "identity" => FrameName::Identity,
                    "rotation" => FrameName::Rotation,
                    "diag_exp" => FrameName::DiagExp,
                    _ => return Err(bad("unknown frame (identity|rotation|diag_exp)")),
                };
                Ok(ModelSpec::Frame { name })
            }
            _ => Err(bad("unknown model (flat|constant|sphere|torsion_plane|frame)")),
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSpec::Flat { n, m } => write!(f, "flat{{{n},{m}}}"),
            ModelSpec::Constant { g } => {
                write!(f, "constant{{{}}}", serde_json::to_string(g).map_err(|_| fmt::Error)?)
            }
            ModelSpec::Sphere => f.write_str("sphere"),
            ModelSpec::TorsionPlane { c } => write!(f, "torsion_plane{{{c}}}"),
            ModelSpec::Frame { name } => write!(f, "frame{{{}}}", name.as_str()),
        }
    }
}

/// A zoo provider together with the default region, two-parameter family and
/// test path experiments run on.
#[derive(Debug, Clone)]
pub struct Model {
    pub spec: ModelSpec,
    pub provider: CoefficientProvider,
    pub frame: Option<FrameMap>,
    pub region: Vec<Interval>,
}

impl Model {
    pub fn build(spec: &ModelSpec) -> Result<Model> {
        let unit = Interval { lo: 0.0, hi: 1.0 };
        let (provider, frame, region) = match spec {
            ModelSpec::Flat { n, m } => (make_flat(*n, *m), None, vec![unit; *m]),
            ModelSpec::Constant { g } => {
                let g = linalg::from_rows(g)?;
                let n = g.nrows();
                (make_constant_coefficient(g)?, None, vec![unit; n])
            }
            ModelSpec::Sphere => (
                make_sphere_levi_civita(),
                None,
                vec![Interval { lo: 1.0, hi: 2.0 }, Interval { lo: 0.5, hi: 1.5 }],
            ),
            ModelSpec::TorsionPlane { c } => (make_constant_torsion_plane(*c)?, None, vec![unit; 2]),
            ModelSpec::Frame { name } => {
                let fm = name.frame_map();
                (make_frame_map_transport(fm.clone())?, Some(fm), vec![unit; 2])
            }
        };
        Ok(Model {
            spec: spec.clone(),
            provider,
            frame,
            region,
        })
    }

    pub fn id(&self) -> String {
        self.spec.to_string()
    }

    /// Same model over a different base region (one interval per chart axis).
    pub fn with_region(mut self, region: Vec<Interval>) -> Result<Model> {
        if region.len() != self.base_dim() {
            return Err(GeoError::argument(format!(
                "model {} has a {}-dimensional base, region has {} axes",
                self.id(),
                self.base_dim(),
                region.len()
            )));
        }
        self.region = region;
        Ok(self)
    }

    /// Family parameters used by pointwise experiments: `(π/2, 1)` on the
    /// sphere when the family domain contains it, otherwise the centre of
    /// the domain.
    pub fn default_point(&self) -> (f64, f64) {
        let fam = self.family();
        let (ds, dt) = (fam.domain_s(), fam.domain_t());
        if matches!(self.spec, ModelSpec::Sphere) && ds.contains(PI / 2.0) && dt.contains(1.0) {
            return (PI / 2.0, 1.0);
        }
        (ds.midpoint(), dt.midpoint())
    }

    pub fn base_dim(&self) -> usize {
        self.region.len()
    }

    /// Coordinate family over the first two chart axes (the whole region),
    /// or `η(s,t) = s + t` on a one-dimensional chart.
    pub fn family(&self) -> Family {
        let m = self.base_dim();
        if m == 1 {
            let r = self.region[0];
            let half = Interval { lo: r.lo, hi: r.midpoint() };
            let half2 = Interval { lo: 0.0, hi: 0.5 * r.length() };
            return Family::new(
                "line-sum",
                half,
                half2,
                |s, t| Vector::from_vec(vec![s + t]),
                |_, _| Vector::from_vec(vec![1.0]),
                |_, _| Vector::from_vec(vec![1.0]),
            );
        }
        let base = Vector::from_iterator(m, self.region.iter().map(|iv| iv.midpoint()));
        Family::coordinate_plane(base, 0, 1, self.region[0], self.region[1])
            .expect("axes 0 and 1 exist when m >= 2")
    }

    /// A curved path through the interior of the region over `[0, 1]`.
    pub fn test_path(&self) -> Path {
        let region = self.region.clone();
        let region2 = self.region.clone();
        let m = region.len();
        Path::new(
            "test-path",
            Interval { lo: 0.0, hi: 1.0 },
            move |u| {
                Vector::from_iterator(
                    m,
                    region
                        .iter()
                        .enumerate()
                        .map(|(k, iv)| iv.lo + iv.length() * (0.1 + 0.8 * u.powi(k as i32 + 1))),
                )
            },
            move |u| {
                Vector::from_iterator(
                    m,
                    region2.iter().enumerate().map(|(k, iv)| {
                        iv.length() * 0.8 * (k as f64 + 1.0) * u.powi(k as i32)
                    }),
                )
            },
        )
    }
}

/// Columns of the affine map used by [`Model::chart_bundle`].
const CHART_BUNDLE_COLUMNS: [[f64; 2]; 4] = [[1.0, 0.0], [0.0, 1.0], [0.6, 0.8], [-0.5, 0.7]];

impl Model {
    /// Half-width of each parameter interval of [`Model::chart_bundle`],
    /// relative to the shorter side of the region.
    pub const CHART_BUNDLE_RADIUS: f64 = 0.2;

    /// A `k`-parameter chart-curve bundle (`2 ≤ k ≤ 4`) over the model's
    /// family, centred on the region's midpoint. The affine map has pairwise
    /// independent columns, so every pair family is non-degenerate.
    pub fn chart_bundle(&self, k: usize) -> Result<MultiFamily> {
        if !(2..=4).contains(&k) {
            return Err(GeoError::argument(format!("chart bundle supports 2..=4 parameters, got {k}")));
        }
        if self.base_dim() < 2 {
            return Err(GeoError::Configuration(
                "chart bundles need a base of dimension at least 2".into(),
            ));
        }
        let fam = self.family();
        let r = Self::CHART_BUNDLE_RADIUS * self.region[0].length().min(self.region[1].length());
        let map = Matrix::from_fn(2, k, |i, a| CHART_BUNDLE_COLUMNS[a][i]);
        let offset = [self.region[0].midpoint(), self.region[1].midpoint()];
        MultiFamily::chart_curve(&fam, offset, map, vec![Interval { lo: -r, hi: r }; k], vec![0.0; k])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::transport_matrix;

    #[test]
    fn model_string_roundtrip() {
        for raw in [
            "flat",
            "flat{3,2}",
            "sphere",
            "torsion_plane{0.5}",
            "constant{[[0.0,-1.0],[1.0,0.0]]}",
            "frame{rotation}",
        ] {
            let spec: ModelSpec = raw.parse().unwrap();
            let again: ModelSpec = spec.to_string().parse().unwrap();
            assert_eq!(spec, again, "{raw}");
        }
        assert!("torus".parse::<ModelSpec>().is_err());
        assert!("frame{spiral}".parse::<ModelSpec>().is_err());
        assert!("flat{0,2}".parse::<ModelSpec>().is_err());
    }

    #[test]
    fn frame_provider_coefficients() {
        let p = make_frame_map_transport(diag_exp_frame(vec![1.0, 2.0])).unwrap();
        let path = Model::build(&ModelSpec::Flat { n: 2, m: 2 }).unwrap().test_path();
        let g = p.coefficient(&path, 0.4).unwrap();
        assert!((g - Matrix::from_diagonal(&Vector::from_vec(vec![1.0, 2.0]))).norm() < 1e-12);

        let p = make_frame_map_transport(identity_frame(2)).unwrap();
        assert_eq!(p.coefficient(&path, 0.4).unwrap(), Matrix::zeros(2, 2));

        let p = make_frame_map_transport(exp_frame(rotation_generator())).unwrap();
        assert!((p.coefficient(&path, 0.9).unwrap() - rotation_generator()).norm() < 1e-12);
    }

    #[test]
    fn singular_frame_rejected() {
        let fm = FrameMap::new("zero", 2, |_, _| Matrix::zeros(2, 2));
        assert!(matches!(make_frame_map_transport(fm), Err(GeoError::Singular { .. })));
    }

    #[test]
    fn sphere_outside_chart_is_domain_error() {
        let p = make_sphere_levi_civita();
        let path = Path::new(
            "to-pole",
            Interval { lo: 0.0, hi: 1.0 },
            |u| Vector::from_vec(vec![1.0 - u, 0.0]),
            |_| Vector::from_vec(vec![-1.0, 0.0]),
        );
        assert!(matches!(
            transport_matrix(&p, &path, 0.0, 1.0, 100),
            Err(GeoError::Domain { .. })
        ));
    }

    #[test]
    fn test_paths_are_consistent() {
        for raw in ["flat{2,3}", "sphere", "torsion_plane", "constant", "frame{diag_exp}"] {
            let model = Model::build(&raw.parse().unwrap()).unwrap();
            model.test_path().validate(9).unwrap();
            model.family().validate(5).unwrap();
        }
    }
}
