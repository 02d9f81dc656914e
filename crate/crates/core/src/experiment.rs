//! Experiment configuration and the runner behind the `geo` command.
//!
//! A configuration is a JSON document with `"schema": 1`:
//!
//! ```json
//! {
//!   "schema": 1,
//!   "model": "sphere",
//!   "experiment": "holonomy",
//!   "grid": { "region": [[1.0, 2.0], [0.5, 1.5]], "resolution": 5 },
//!   "point": [1.5707963267948966, 1.0],
//!   "steps": 1000,
//!   "fd_step": 1e-4,
//!   "h_sequence": [0.04, 0.02, 0.01, 0.005],
//!   "tolerances": { "holonomy_estimate": 1e-5 },
//!   "seed": 7,
//!   "output": { "path": "report.json", "format": "json" }
//! }
//! ```
//!
//! Every field but `schema` is optional. `steps` is the integrator density
//! per unit of parameter length. `region` has one interval per chart axis;
//! the two-parameter family of pointwise experiments is the coordinate plane
//! of the first two axes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bundle::{Interval, Section, Section2};
use crate::convergence::{convergence_order, convergence_order_above, halving};
use crate::curvature::{
    curvature_commutator, curvature_field, curvature_matrix, torsion_components, torsion_field,
    torsion_operator, ParamGrid, DEFAULT_CURVATURE_STEP,
};
use crate::derivation::{derive_section, derive_section_limit};
use crate::error::{GeoError, Result};
use crate::flatness::{
    construct_flat_frame, flatness_verdict, route_catalogue, transport_in_frame, FlatnessTolerances,
    RegionGrid,
};
use crate::holonomy::{
    double_transport_defect, holonomy_curvature_estimate, holonomy_remainder_fit, loop_holonomy,
    loop_holonomy_reversed, pentagon_defect, pentagon_remainder_fit,
};
use crate::identities::{
    check_antisymmetry, check_bianchi_first, check_bianchi_second, check_four_point, BoxSection,
    IndexedValues, IDENTITY_FLOOR,
};
use crate::linalg::{self, to_rows, Matrix, Vector};
use crate::report::{CheckRecord, Format, GeometryReport, ReportBody, ReportHeader};
use crate::transport::{coefficients_from_transport, expansion_check, transport_from_frame_map, transport_matrix};
use crate::zoo::{Model, ModelSpec};

pub const SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_STEPS: usize = 1000;
pub const DEFAULT_RESOLUTION: usize = 3;
/// Finite-difference step for the identity experiment when none is given.
pub const DEFAULT_BIANCHI_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Axioms,
    Expansion,
    Torsion,
    Curvature,
    Pentagon,
    Holonomy,
    Bianchi,
    Flatness,
    Sweep,
}

impl Experiment {
    pub const ALL: [Experiment; 9] = [
        Experiment::Axioms,
        Experiment::Expansion,
        Experiment::Torsion,
        Experiment::Curvature,
        Experiment::Pentagon,
        Experiment::Holonomy,
        Experiment::Bianchi,
        Experiment::Flatness,
        Experiment::Sweep,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Axioms => "axioms",
            Experiment::Expansion => "expansion",
            Experiment::Torsion => "torsion",
            Experiment::Curvature => "curvature",
            Experiment::Pentagon => "pentagon",
            Experiment::Holonomy => "holonomy",
            Experiment::Bianchi => "bianchi",
            Experiment::Flatness => "flatness",
            Experiment::Sweep => "sweep",
        }
    }

    /// Tolerance names this experiment understands, with their defaults.
    pub fn default_tolerances(self) -> BTreeMap<String, f64> {
        let pairs: &[(&str, f64)] = match self {
            Experiment::Axioms => &[
                ("cocycle", 1e-8),
                ("inverse", 1e-8),
                ("linearity", 1e-12),
                ("transported_derivation", 1e-6),
            ],
            Experiment::Expansion => &[
                ("expansion_order", 0.3),
                ("coefficient_recovery", 1e-7),
                ("frame_vs_ode", 1e-9),
            ],
            Experiment::Torsion => &[("torsion_consistency", 1e-6), ("symmetric_torsion", 1e-10)],
            Experiment::Curvature => &[("curvature_consistency", 1e-5)],
            Experiment::Pentagon => &[
                ("pentagon_order", 2.7),
                ("pentagon_limit", 1e-4),
                ("double_transport_order", 2.7),
            ],
            Experiment::Holonomy => &[
                ("holonomy_estimate", 1e-5),
                ("holonomy_order", 2.7),
                ("orientation", 1e-9),
                ("flat_loop", 1e-8),
            ],
            Experiment::Bianchi => &[
                ("antisymmetry", 1e-10),
                ("bianchi_second", 1e-4),
                ("bianchi_first", 1e-4),
                ("bianchi_order", 0.3),
                ("bianchi_cross_check", 1e-6),
                ("four_point", 1e-8),
            ],
            Experiment::Flatness => &[("flat_curvature", 1e-8), ("flat_defect", 1e-7), ("frame_identity", 1e-7)],
            Experiment::Sweep => &[("integrator_order", 0.3), ("derivation_order", 0.3)],
        };
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Experiment {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.as_str()).collect();
                GeoError::argument(format!("unknown experiment '{s}' (one of {})", names.join("|")))
            })
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    region: Option<Vec<[f64; 2]>>,
    resolution: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputFile {
    path: Option<PathBuf>,
    format: Option<Format>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    schema: u32,
    model: Option<String>,
    experiment: Option<Experiment>,
    #[serde(default)]
    grid: GridFile,
    point: Option<[f64; 2]>,
    steps: Option<usize>,
    fd_step: Option<f64>,
    h_sequence: Option<Vec<f64>>,
    tolerances: Option<BTreeMap<String, f64>>,
    seed: Option<u64>,
    #[serde(default)]
    output: OutputFile,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub experiment: Option<Experiment>,
    pub model: Option<String>,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub steps: Option<usize>,
    pub fd_step: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct OutputSpec {
    pub path: Option<PathBuf>,
    pub format: Format,
}

fn serialize_model<S: serde::Serializer>(m: &ModelSpec, ser: S) -> std::result::Result<S::Ok, S::Error> {
    ser.serialize_str(&m.to_string())
}

/// A validated configuration. Serializes (without the output location) into
/// the report body.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(serialize_with = "serialize_model")]
    pub model: ModelSpec,
    /// Base region, one interval per chart axis; the model default if absent.
    pub region: Option<Vec<Interval>>,
    pub resolution: usize,
    /// Family parameters for pointwise experiments; the model default if absent.
    pub point: Option<[f64; 2]>,
    pub steps: usize,
    pub fd_step: Option<f64>,
    pub h_sequence: Vec<f64>,
    pub tolerances: BTreeMap<String, f64>,
    pub seed: u64,
    #[serde(skip)]
    pub output: OutputSpec,
}

/// 1-based line of the first occurrence of `"key"` in `text`.
fn line_of(text: &str, key: &str) -> Option<usize> {
    let needle = format!("\"{key}\"");
    text.find(&needle).map(|pos| text[..pos].matches('\n').count() + 1)
}

fn config_error(text: Option<&str>, key: &str, from_flag: bool, message: impl fmt::Display) -> GeoError {
    let place = if from_flag {
        format!("--{}", key.replace('_', "-"))
    } else {
        match text.and_then(|t| line_of(t, key)) {
            Some(n) => format!("line {n}"),
            None => format!("field '{key}'"),
        }
    };
    GeoError::Configuration(format!("{place}: {message}"))
}

impl ExperimentConfig {
    /// Defaults for `experiment` on `model`.
    pub fn new(experiment: Experiment, model: ModelSpec) -> Self {
        ExperimentConfig {
            experiment,
            model,
            region: None,
            resolution: DEFAULT_RESOLUTION,
            point: None,
            steps: DEFAULT_STEPS,
            fd_step: None,
            h_sequence: halving(0.04, 4),
            tolerances: experiment.default_tolerances(),
            seed: 0,
            output: OutputSpec::default(),
        }
    }

    /// Parses a configuration document and applies `overrides`. Errors are
    /// [`GeoError::Configuration`] with a line reference (or the flag name
    /// for values that came from the command line).
    pub fn from_json(text: &str, overrides: &Overrides) -> Result<Self> {
        let file: ConfigFile = serde_json::from_str(text).map_err(|e| {
            GeoError::Configuration(format!("line {}: {e}", e.line()))
        })?;
        Self::resolve(Some(text), file, overrides)
    }

    /// A configuration from overrides alone (no file).
    pub fn from_overrides(overrides: &Overrides) -> Result<Self> {
        let file = ConfigFile {
            schema: SCHEMA_VERSION,
            model: None,
            experiment: None,
            grid: GridFile::default(),
            point: None,
            steps: None,
            fd_step: None,
            h_sequence: None,
            tolerances: None,
            seed: None,
            output: OutputFile::default(),
        };
        Self::resolve(None, file, overrides)
    }

    fn resolve(text: Option<&str>, file: ConfigFile, ov: &Overrides) -> Result<Self> {
        if file.schema != SCHEMA_VERSION {
            return Err(config_error(
                text,
                "schema",
                false,
                format!("unsupported schema {} (expected {SCHEMA_VERSION})", file.schema),
            ));
        }
        let experiment = ov.experiment.or(file.experiment).ok_or_else(|| {
            config_error(text, "experiment", false, "no experiment given in the file or on the command line")
        })?;
        let (model_raw, model_flag) = match (&ov.model, &file.model) {
            (Some(m), _) => (m.clone(), true),
            (None, Some(m)) => (m.clone(), false),
            (None, None) => ("flat".to_string(), false),
        };
        let model: ModelSpec = model_raw
            .parse()
            .map_err(|e: GeoError| config_error(text, "model", model_flag, e))?;

        let mut cfg = ExperimentConfig::new(experiment, model);
        if let Some(region) = file.grid.region {
            let mut axes = Vec::with_capacity(region.len());
            for [lo, hi] in region {
                axes.push(Interval::new(lo, hi).map_err(|e| config_error(text, "region", false, e))?);
            }
            cfg.region = Some(axes);
        }
        if let Some(r) = file.grid.resolution {
            cfg.resolution = r;
        }
        cfg.point = file.point;
        if let Some(h) = file.h_sequence {
            cfg.h_sequence = h;
        }
        if let Some(tols) = file.tolerances {
            for (name, value) in tols {
                if !cfg.tolerances.contains_key(&name) {
                    let known: Vec<_> = cfg.tolerances.keys().cloned().collect();
                    return Err(config_error(
                        text,
                        &name,
                        false,
                        format!(
                            "unknown tolerance '{name}' for {experiment} (known: {})",
                            known.join(", ")
                        ),
                    ));
                }
                if !(value.is_finite() && value > 0.0) {
                    return Err(config_error(text, &name, false, format!("tolerance must be positive, got {value}")));
                }
                cfg.tolerances.insert(name, value);
            }
        }
        let (steps, steps_flag) = match ov.steps {
            Some(s) => (Some(s), true),
            None => (file.steps, false),
        };
        if let Some(s) = steps {
            if s == 0 {
                return Err(config_error(text, "steps", steps_flag, "steps must be at least 1"));
            }
            cfg.steps = s;
        }
        let (fd, fd_flag) = match ov.fd_step {
            Some(x) => (Some(x), true),
            None => (file.fd_step, false),
        };
        if let Some(x) = fd {
            if !(x.is_finite() && x > 0.0) {
                return Err(config_error(text, "fd_step", fd_flag, format!("fd_step must be positive, got {x}")));
            }
            cfg.fd_step = Some(x);
        }
        cfg.seed = ov.seed.or(file.seed).unwrap_or(0);
        cfg.output = OutputSpec {
            path: ov.out.clone().or(file.output.path),
            format: ov.format.or(file.output.format).unwrap_or_default(),
        };

        if cfg.resolution < 2 {
            return Err(config_error(
                text,
                "resolution",
                false,
                format!("grid resolution must be at least 2, got {}", cfg.resolution),
            ));
        }
        let h = &cfg.h_sequence;
        if h.len() < 3 {
            return Err(config_error(text, "h_sequence", false, "h_sequence needs at least 3 entries"));
        }
        if h.iter().any(|x| !(x.is_finite() && *x > 0.0)) || h.windows(2).any(|w| w[1] >= w[0]) {
            return Err(config_error(
                text,
                "h_sequence",
                false,
                "h_sequence must be positive and strictly decreasing",
            ));
        }
        if let Some(p) = cfg.point {
            if p.iter().any(|x| !x.is_finite()) {
                return Err(config_error(text, "point", false, "point must be finite"));
            }
        }
        Ok(cfg)
    }

    fn tol(&self, name: &str) -> f64 {
        *self
            .tolerances
            .get(name)
            .unwrap_or_else(|| panic!("tolerance '{name}' missing for {}", self.experiment))
    }
}

/// Classification of run errors for exit codes: `true` when the error stems
/// from the configuration (bad point, wrong model for the experiment, …).
pub fn is_configuration_error(e: &GeoError) -> bool {
    matches!(
        e,
        GeoError::Domain { .. } | GeoError::Argument(_) | GeoError::Configuration(_)
    )
}

fn threads() -> usize {
    #[cfg(feature = "parallel")]
    {
        rayon::current_num_threads()
    }
    #[cfg(not(feature = "parallel"))]
    {
        1
    }
}

/// Runs the configured experiment.
pub fn run(config: &ExperimentConfig) -> Result<GeometryReport> {
    let started = Instant::now();
    let mut model = Model::build(&config.model)?;
    if let Some(region) = &config.region {
        model = model.with_region(region.clone())?;
    }
    let settings = serde_json::to_value(config).expect("config serializes");
    let mut body = ReportBody::new(config.experiment.as_str(), model.id(), settings);
    match config.experiment {
        Experiment::Axioms => run_axioms(config, &model, &mut body)?,
        Experiment::Expansion => run_expansion(config, &model, &mut body)?,
        Experiment::Torsion => run_torsion(config, &model, &mut body)?,
        Experiment::Curvature => run_curvature(config, &model, &mut body)?,
        Experiment::Pentagon => run_pentagon(config, &model, &mut body)?,
        Experiment::Holonomy => run_holonomy(config, &model, &mut body)?,
        Experiment::Bianchi => run_bianchi(config, &model, &mut body)?,
        Experiment::Flatness => run_flatness(config, &model, &mut body)?,
        Experiment::Sweep => run_sweep(config, &model, &mut body)?,
    }
    Ok(GeometryReport {
        header: ReportHeader {
            tool: "geo".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            elapsed_ms: started.elapsed().as_secs_f64() * 1e3,
            threads: threads(),
        },
        body,
    })
}

fn steps_for(config: &ExperimentConfig, span: f64) -> usize {
    ((config.steps as f64 * span.abs()).ceil() as usize).max(1)
}

fn point_of(config: &ExperimentConfig, model: &Model) -> (f64, f64) {
    config.point.map(|p| (p[0], p[1])).unwrap_or_else(|| model.default_point())
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vector {
    Vector::from_fn(n, |_, _| rng.random_range(-1.0..1.0))
}

fn run_axioms(config: &ExperimentConfig, model: &Model, body: &mut ReportBody) -> Result<()> {
    let p = &model.provider;
    let path = model.test_path();
    let n = p.fibre_dim();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let h = |from: f64, to: f64| -> Result<Matrix> {
        Ok(transport_matrix(p, &path, from, to, steps_for(config, to - from))?.value)
    };
    let id = linalg::identity(n);
    for _ in 0..5 {
        let (r, s, t): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
        let pt = [r, s, t];
        let cocycle = (h(t, r)? * h(s, t)? - h(s, r)?).norm();
        body.check(CheckRecord::at_most("cocycle", cocycle, config.tol("cocycle")).at(&pt));
        let inverse = (h(t, s)? * h(s, t)? - &id).norm();
        body.check(CheckRecord::at_most("inverse", inverse, config.tol("inverse")).at(&[s, t]));
        let identity = (h(s, s)? - &id).norm();
        body.check(CheckRecord::at_most("identity", identity, 0.0).at(&[s]));

        let (u, v) = (random_vector(&mut rng, n), random_vector(&mut rng, n));
        let (lam, mu): (f64, f64) = (rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
        let m = h(s, t)?;
        let lhs = &m * (&u * lam + &v * mu);
        let rhs = (&m * &u) * lam + (&m * &v) * mu;
        let scale = 1.0 + lhs.norm();
        body.check(CheckRecord::at_most("linearity", (lhs - rhs).norm() / scale, config.tol("linearity")).at(&[s, t]));

        // σ(x) = H(x, s)·u is annihilated by the derivation
        let (pc, pathc, uc) = (p.clone(), path.clone(), u.clone());
        let steps = config.steps;
        let sec = Section::new(n, move |x| {
            let k = ((steps as f64 * (x - s).abs()).ceil() as usize).max(1);
            transport_matrix(&pc, &pathc, s, x, k)
                .map(|tm| tm.apply(&uc))
                .unwrap_or_else(|_| Vector::from_element(n, f64::NAN))
        });
        let at = 0.1 + 0.8 * t;
        let d = derive_section(p, &path, &sec, at)?.norm();
        body.check(
            CheckRecord::at_most("transported_derivation", d, config.tol("transported_derivation"))
                .at(&[s, at]),
        );
    }
    Ok(())
}

fn run_expansion(config: &ExperimentConfig, model: &Model, body: &mut ReportBody) -> Result<()> {
    let p = &model.provider;
    let path = model.test_path();
    let s0 = 0.5;
    let samples = halving(1e-2, 5)
        .into_iter()
        .map(|eps| Ok((eps, expansion_check(p, &path, s0, eps)?)))
        .collect::<Result<Vec<_>>>()?;
    let fit = convergence_order(&samples)?;
    body.check(
        CheckRecord::order_near("expansion_order", &fit, 3.0, config.tol("expansion_order")).at(&[s0]),
    );
    body.fit("expansion_residual", fit);

    for s in [0.25, 0.5, 0.75] {
        let recovered = coefficients_from_transport(p, &path, s, 1e-4)?;
        let exact = p.coefficient(&path, s)?;
        body.check(
            CheckRecord::at_most(
                "coefficient_recovery",
                (recovered - exact).norm(),
                config.tol("coefficient_recovery"),
            )
            .at(&[s])
            .with_h(1e-4),
        );
    }
    if let Some(fm) = &model.frame {
        for (s, t) in [(0.0, 1.0), (0.3, 0.8), (0.9, 0.1)] {
            let ode = transport_matrix(p, &path, s, t, steps_for(config, t - s))?.value;
            let direct = transport_from_frame_map(fm, &path, s, t)?.value;
            body.check(
                CheckRecord::at_most("frame_vs_ode", (ode - direct).norm(), config.tol("frame_vs_ode")).at(&[s, t]),
            );
        }
    }
    Ok(())
}

fn param_grid(config: &ExperimentConfig, model: &Model) -> ParamGrid {
    ParamGrid::over(&model.family(), config.resolution, config.resolution)
}

fn run_torsion(config: &ExperimentConfig, model: &Model, body: &mut ReportBody) -> Result<()> {
    let p = &model.provider;
    p.chart().require_tangent()?;
    let fam = model.family();
    let grid = param_grid(config, model);
    let symmetric = p.is_connection_induced()
        && grid.points().iter().all(|&(s, t)| {
            p.christoffel_at(&fam.point(s, t))
                .is_some_and(|g| g.asymmetry() == 0.0)
        });
    for (s, t) in grid.points() {
        let comp = torsion_components(p, &fam, s, t)?.value;
        let op = torsion_operator(p, &fam, s, t)?.value;
        body.check(
            CheckRecord::at_most("torsion_consistency", (&comp - op).norm(), config.tol("torsion_consistency"))
                .at(&[s, t]),
        );
        if symmetric {
            body.check(
                CheckRecord::at_most("symmetric_torsion", comp.norm(), config.tol("symmetric_torsion")).at(&[s, t]),
            );
        }
    }
    let field: Vec<_> = torsion_field(p, &fam, &grid)?
        .into_iter()
        .map(|f| serde_json::json!({ "s": f.s, "t": f.t, "value": f.value.as_slice() }))
        .collect();
    body.result("torsion_field", field);
    body.verdict("symmetric_connection", symmetric);
    Ok(())
}

fn test_section2(n: usize) -> Section2 {
    Section2::new(n, move |s, t| {
        Vector::from_fn(n, |i, _| (s + i as f64).cos() + (i as f64 + 1.0) * s * t)
    })
}

fn run_curvature(config: &ExperimentConfig, model: &Model, body: &mut ReportBody) -> Result<()> {
    let p = &model.provider;
    let fam = model.family();
    let grid = param_grid(config, model);
    let fd_step = config.fd_step.unwrap_or(DEFAULT_CURVATURE_STEP);
    let sec = test_section2(p.fibre_dim());
    for (s, t) in grid.points() {
        let r = curvature_matrix(p, &fam, s, t, fd_step)?.value;
        let comm = curvature_commutator(p, &fam, &sec, s, t)?;
        let diff = (comm - r * sec.value(s, t)).norm();
        body.check(
            CheckRecord::at_most("curvature_consistency", diff, config.tol("curvature_consistency"))
                .at(&[s, t])
                .with_h(fd_step),
        );
    }
    let field: Vec<_> = curvature_field(p, &fam, &grid, fd_step)?
        .into_iter()
        .map(|f| serde_json::json!({ "s": f.s, "t": f.t, "value": to_rows(&f.value) }))
        .collect();
    body.result("curvature_field", field);
    Ok(())
}

fn run_pentagon(config: &ExperimentConfig, model: &Model, body: &mut ReportBody) -> Result<()> {
    let p = &model.provider;
    p.chart().require_tangent()?;
    let fam = model.family();
    let (s, t) = point_of(config, model);
    let hs = &config.h_sequence;

    let fit = pentagon_remainder_fit(p, &fam, s, t, hs)?;
    body.check(CheckRecord::order_at_least("pentagon_order", &fit, config.tol("pentagon_order")).at(&[s, t]));
    body.fit("pentagon_remainder", fit);

    // defect/h² → −𝒯, extrapolated from the two finest levels
    let torsion = torsion_components(p, &fam, s, t)?.value;
    let k = hs.len();
    let scaled = |h: f64| -> Result<Vector> { Ok(pentagon_defect(p, &fam, s, t, h, h)? / (h * h)) };
    let (h1, h2) = (hs[k - 2], hs[k - 1]);
    let (q1, q2) = (scaled(h1)?, scaled(h2)?);
    let r = h1 / h2;
    let limit = (&q2 * r - &q1) / (r - 1.0);
    body.check(
        CheckRecord::at_most("pentagon_limit", (&limit + &torsion).norm(), config.tol("pentagon_limit"))
            .at(&[s, t])
            .with_h(h2),
    );
    body.result("torsion", torsion.as_slice());
    body.result("pentagon_limit", limit.as_slice());

    let samples = hs
        .iter()
        .map(|&h| Ok((h, double_transport_defect(p, &fam, s, t, h, h)?.remainder.norm())))
        .collect::<Result<Vec<_>>>()?;
    let fit = convergence_order(&samples)?;
    body.check(
        CheckRecord::order_at_least("double_transport_order", &fit, config.tol("double_transport_order"))
            .at(&[s, t]),
    );
    body.fit("double_transport_remainder", fit);
    Ok(())
}

fn run_holonomy(config: &ExperimentConfig, model: &Model, body: &mut ReportBody) -> Result<()> {
    let p = &model.provider;
    let fam = model.family();
    let (s, t) = point_of(config, model);
    let hs = &config.h_sequence;
    let fd_step = config.fd_step.unwrap_or(DEFAULT_CURVATURE_STEP);
    let leg_steps = steps_for(config, hs[0]);

    let reference = curvature_matrix(p, &fam, s, t, fd_step)?.value;
    let est = holonomy_curvature_estimate(p, &fam, s, t, hs, leg_steps)?;
    body.check(
        CheckRecord::at_most(
            "holonomy_estimate",
            (&est.curvature - &reference).norm(),
            config.tol("holonomy_estimate"),
        )
        .at(&[s, t])
        .input("richardson_order", est.richardson_order),
    );
    body.fit("estimate_residual", est.residual_fit.clone());

    let fit = holonomy_remainder_fit(p, &fam, s, t, hs, leg_steps, Some(&reference))?;
    body.check(CheckRecord::order_at_least("holonomy_order", &fit, config.tol("holonomy_order")).at(&[s, t]));
    body.fit("holonomy_remainder", fit);

    let h = *hs.last().expect("validated h_sequence");
    let fwd = loop_holonomy(p, &fam, s, t, h, h, leg_steps)?;
    let rev = loop_holonomy_reversed(p, &fam, s, t, h, h, leg_steps)?;
    let id = linalg::identity(p.fibre_dim());
    body.check(
        CheckRecord::at_most("orientation", (&rev * &fwd - &id).norm(), config.tol("orientation"))
            .at(&[s, t])
            .with_h(h),
    );
    if reference.norm() <= config.tol("flat_loop") {
        let h0 = hs[0];
        let hol = loop_holonomy(p, &fam, s, t, h0, h0, leg_steps)?;
        body.check(
            CheckRecord::at_most("flat_loop", (hol - &id).norm(), config.tol("flat_loop"))
                .at(&[s, t])
                .with_h(h0),
        );
    }
    body.result("curvature_matrix", to_rows(&reference));
    body.result("holonomy_estimate", to_rows(&est.curvature));
    Ok(())
}

fn bianchi_section(n: usize) -> BoxSection {
    Arc::new(move |s: &[f64]| {
        Vector::from_fn(n, |i, _| {
            let a = s.iter().enumerate().map(|(j, x)| (j as f64 + 1.0) * x).sum::<f64>();
            1.0 + (a + i as f64).sin() * 0.5
        })
    })
}

fn run_bianchi(config: &ExperimentConfig, model: &Model, body: &mut ReportBody) -> Result<()> {
    let p = &model.provider;
    let n = p.fibre_dim();
    let fd_step = config.fd_step.unwrap_or(DEFAULT_BIANCHI_STEP);
    let mf3 = model.chart_bundle(3)?;
    let mf4 = model.chart_bundle(4)?;
    let r = mf3.domain()[0].hi;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let sec = bianchi_section(n);

    for draw in 0..3 {
        let bp: Vec<f64> = (0..3).map(|_| rng.random_range(-0.5 * r..0.5 * r)).collect();
        let mf = mf3.with_basepoint(bp.clone())?;
        for a in 0..3 {
            for b in a + 1..3 {
                let res = check_antisymmetry(p, &mf, a, b, fd_step)?;
                body.check(
                    CheckRecord::at_most("antisymmetry", res.max(), config.tol("antisymmetry"))
                        .at(&bp)
                        .input("pair", [a, b]),
                );
            }
        }
        let second = check_bianchi_second(p, &mf, &sec, fd_step)?;
        body.check(
            CheckRecord::at_most("bianchi_second", second.operator, config.tol("bianchi_second"))
                .at(&bp)
                .with_h(fd_step),
        );
        body.check(
            CheckRecord::at_most("bianchi_cross_check", second.cross_check, config.tol("bianchi_cross_check"))
                .at(&bp)
                .with_h(fd_step),
        );
        if p.chart().is_tangent() {
            let first = check_bianchi_first(p, &mf, fd_step)?;
            body.check(
                CheckRecord::at_most("bianchi_first", first.residual, config.tol("bianchi_first"))
                    .at(&bp)
                    .with_h(fd_step)
                    .input("lhs", first.lhs)
                    .input("rhs", first.rhs),
            );
        }
        let bp4: Vec<f64> = bp.iter().copied().chain([rng.random_range(-0.5 * r..0.5 * r)]).collect();
        let v = random_vector(&mut rng, n);
        let four = check_four_point(p, &mf4.with_basepoint(bp4.clone())?, &v, fd_step)?;
        body.check(CheckRecord::at_most("four_point", four, config.tol("four_point")).at(&bp4));

        if draw == 0 {
            let steps = halving(fd_step, 4);
            let mut second_pts = Vec::new();
            let mut first_pts = Vec::new();
            for &h in &steps {
                second_pts.push((h, check_bianchi_second(p, &mf, &sec, h)?.operator));
                if p.chart().is_tangent() {
                    first_pts.push((h, check_bianchi_first(p, &mf, h)?.residual));
                }
            }
            let fit = convergence_order_above(&second_pts, IDENTITY_FLOOR)?;
            body.check(
                CheckRecord::order_near("bianchi_second_order", &fit, 2.0, config.tol("bianchi_order"))
                    .at(&bp),
            );
            body.fit("bianchi_second_residual", fit);
            if !first_pts.is_empty() {
                let fit = convergence_order_above(&first_pts, IDENTITY_FLOOR)?;
                body.check(
                    CheckRecord::order_near("bianchi_first_order", &fit, 2.0, config.tol("bianchi_order"))
                        .at(&bp),
                );
                body.fit("bianchi_first_residual", fit);
            }
        }
    }

    // the bracket identities themselves, on a seeded integer table
    let vals: Vec<i64> = (0..256).map(|_| rng.random_range(-50..=50)).collect();
    let t2 = IndexedValues::from_fn(2, 4, |i| vals[i[0] * 4 + i[1]])?;
    let t3 = IndexedValues::from_fn(3, 4, |i| vals[(i[0] * 4 + i[1]) * 4 + i[2]])?;
    let t4 = IndexedValues::from_fn(4, 4, |i| vals[((i[0] * 4 + i[1]) * 4 + i[2]) * 4 + i[3]])?;
    let worst = [
        t2.jacobi2(0, 1)?.abs(),
        t3.jacobi3(0, 1, 2)?.abs(),
        t4.jacobi4(0, 1, 2, 3)?.abs(),
    ]
    .into_iter()
    .max()
    .unwrap_or(0);
    body.check(CheckRecord::at_most("combinator_identities", worst as f64, 0.0));
    Ok(())
}

fn run_flatness(config: &ExperimentConfig, model: &Model, body: &mut ReportBody) -> Result<()> {
    let p = &model.provider;
    let grid = RegionGrid::new(model.region.clone(), config.resolution)?;
    let tolerances = FlatnessTolerances {
        curvature: config.tol("flat_curvature"),
        defect: config.tol("flat_defect"),
    };
    let fd_step = config.fd_step.unwrap_or(DEFAULT_CURVATURE_STEP);
    let report = flatness_verdict(p, &grid, tolerances, fd_step, config.steps)?;
    body.verdict("flat_by_curvature", report.flat_by_curvature);
    body.verdict("flat_by_paths", report.flat_by_paths);
    body.verdict("criteria_agree", report.consistent);
    body.verdict("connection_induced", report.connection_induced);
    body.result("flatness", &report);
    if report.connection_induced {
        // both criteria must agree for coefficients coming from a connection
        body.check(CheckRecord::at_most(
            "criteria_consistency",
            if report.consistent { 0.0 } else { 1.0 },
            0.0,
        ));
    } else if !report.consistent {
        body.verdict(
            "discrepancy",
            "curvature and path-independence disagree for a path-functional transport",
        );
    }

    let x0 = Vector::from_iterator(grid.dim(), grid.axes.iter().map(|iv| iv.lo));
    let seed = linalg::identity(p.fibre_dim());
    match construct_flat_frame(p, &grid, &x0, &seed, config.seed, config.steps, config.tol("frame_identity")) {
        Ok(frame) => {
            body.verdict("flat_frame", "constructed");
            let nodes = grid.nodes();
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed);
            for _ in 0..4 {
                let a = &nodes[rng.random_range(0..nodes.len())];
                let b = &nodes[rng.random_range(0..nodes.len())];
                if a == b {
                    continue;
                }
                let mut worst: f64 = 0.0;
                for route in route_catalogue(a, b)? {
                    let h = transport_in_frame(p, &frame, &route, config.steps)?;
                    worst = worst.max((h - &seed).norm());
                }
                let pt: Vec<f64> = a.iter().chain(b.iter()).copied().collect();
                body.check(CheckRecord::at_most("frame_identity", worst, config.tol("frame_identity")).at(&pt));
            }
        }
        Err(GeoError::NotFlat { defect, first, second }) => {
            body.verdict(
                "flat_frame",
                serde_json::json!({ "status": "not_flat", "defect": defect, "first": first, "second": second }),
            );
        }
        Err(e) => return Err(e),
    }
    Ok(())
}

fn run_sweep(config: &ExperimentConfig, model: &Model, body: &mut ReportBody) -> Result<()> {
    let p = &model.provider;
    let path = model.test_path();
    let counts = [16usize, 32, 64, 128];
    let reference = transport_matrix(p, &path, 0.0, 1.0, 16 * counts[3])?.value;
    let samples = counts
        .iter()
        .map(|&n| {
            let h = transport_matrix(p, &path, 0.0, 1.0, n)?.value;
            Ok((1.0 / n as f64, (h - &reference).norm()))
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = convergence_order(&samples)?;
    body.check(CheckRecord::order_near("integrator_order", &fit, 4.0, config.tol("integrator_order")));
    body.fit("integrator_error", fit);

    let n = p.fibre_dim();
    let sec = Section::constant(Vector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 }));
    let s = 0.5;
    let exact = derive_section(p, &path, &sec, s)?;
    let samples = halving(1e-2, 4)
        .into_iter()
        .map(|eps| Ok((eps, (derive_section_limit(p, &path, &sec, s, eps)? - &exact).norm())))
        .collect::<Result<Vec<_>>>()?;
    let fit = convergence_order(&samples)?;
    body.check(
        CheckRecord::order_near("derivation_order", &fit, 2.0, config.tol("derivation_order")).at(&[s]),
    );
    body.fit("derivation_limit_error", fit);
    Ok(())
}
