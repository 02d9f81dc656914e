//! Experiment reports: per-check records, convergence fits, verdicts and
//! raw results, plus JSON and CSV writers.
//!
//! A report has a header (timestamp, wall time, thread count) and a body.
//! Only the body is deterministic; compare bodies, not whole files.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::convergence::ConvergenceFit;
use crate::error::{GeoError, Result};

/// How a check's value is compared with its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Relation {
    /// `value ≤ tolerance`
    AtMost,
    /// `value ≥ tolerance`
    AtLeast,
    /// `|value − target| ≤ tolerance`
    Within { target: f64 },
}

impl Relation {
    pub fn holds(self, value: f64, tolerance: f64) -> bool {
        match self {
            Relation::AtMost => value <= tolerance,
            Relation::AtLeast => value >= tolerance,
            Relation::Within { target } => (value - target).abs() <= tolerance,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    /// `None` when the quantity is a convergence order whose residuals are
    /// all at roundoff; such checks pass.
    pub value: Option<f64>,
    pub tolerance: f64,
    pub relation: Relation,
    pub pass: bool,
    pub param_point: Option<Vec<f64>>,
    pub h: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    pub inputs: BTreeMap<String, Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CheckRecord {
    pub fn new(name: impl Into<String>, value: f64, relation: Relation, tolerance: f64) -> Self {
        CheckRecord {
            name: name.into(),
            value: Some(value),
            tolerance,
            relation,
            pass: value.is_finite() && relation.holds(value, tolerance),
            param_point: None,
            h: None,
            inputs: BTreeMap::new(),
            note: None,
        }
    }

    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Self::new(name, value, Relation::AtMost, tolerance)
    }

    /// Order check on a fit: `slope ≥ min`, passing when at the floor.
    pub fn order_at_least(name: impl Into<String>, fit: &ConvergenceFit, min: f64) -> Self {
        match fit.slope() {
            Some(p) => Self::new(name, p, Relation::AtLeast, min),
            None => Self::floor(name, Relation::AtLeast, min),
        }
    }

    /// Order check on a fit: `|slope − target| ≤ tol`, passing when at the floor.
    pub fn order_near(name: impl Into<String>, fit: &ConvergenceFit, target: f64, tol: f64) -> Self {
        let rel = Relation::Within { target };
        match fit.slope() {
            Some(p) => Self::new(name, p, rel, tol),
            None => Self::floor(name, rel, tol),
        }
    }

    fn floor(name: impl Into<String>, relation: Relation, tolerance: f64) -> Self {
        CheckRecord {
            name: name.into(),
            value: None,
            tolerance,
            relation,
            pass: true,
            param_point: None,
            h: None,
            inputs: BTreeMap::new(),
            note: Some("residuals at roundoff floor".into()),
        }
    }

    pub fn at(mut self, point: &[f64]) -> Self {
        self.param_point = Some(point.to_vec());
        self
    }

    pub fn with_h(mut self, h: f64) -> Self {
        self.h = Some(h);
        self
    }

    pub fn input(mut self, key: &str, value: impl Serialize) -> Self {
        self.inputs.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitRecord {
    pub name: String,
    #[serde(flatten)]
    pub fit: ConvergenceFit,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportHeader {
    pub tool: String,
    pub version: String,
    pub timestamp: String,
    pub elapsed_ms: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBody {
    pub experiment: String,
    pub model: String,
    /// The resolved settings the run used.
    pub settings: Value,
    pub checks: Vec<CheckRecord>,
    pub fits: Vec<FitRecord>,
    /// Findings that never fail a run (e.g. "not flat").
    pub verdicts: BTreeMap<String, Value>,
    /// Computed quantities that are not checks (fields, estimates).
    pub results: BTreeMap<String, Value>,
}

impl ReportBody {
    pub fn new(experiment: impl Into<String>, model: impl Into<String>, settings: Value) -> Self {
        ReportBody {
            experiment: experiment.into(),
            model: model.into(),
            settings,
            checks: Vec::new(),
            fits: Vec::new(),
            verdicts: BTreeMap::new(),
            results: BTreeMap::new(),
        }
    }

    pub fn check(&mut self, record: CheckRecord) {
        self.checks.push(record);
    }

    pub fn fit(&mut self, name: impl Into<String>, fit: ConvergenceFit) {
        self.fits.push(FitRecord { name: name.into(), fit });
    }

    pub fn verdict(&mut self, name: &str, value: impl Serialize) {
        self.verdicts
            .insert(name.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn result(&mut self, name: &str, value: impl Serialize) {
        self.results
            .insert(name.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeometryReport {
    pub header: ReportHeader,
    pub body: ReportBody,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

impl std::str::FromStr for Format {
    type Err = GeoError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(GeoError::argument(format!("unknown report format '{other}' (json|csv)"))),
        }
    }
}

pub const CSV_COLUMNS: [&str; 8] = [
    "experiment",
    "check",
    "model",
    "param_point",
    "h",
    "value",
    "tolerance",
    "pass",
];

fn io_error(e: impl std::fmt::Display) -> GeoError {
    GeoError::Configuration(format!("cannot write report: {e}"))
}

impl GeometryReport {
    pub fn passed(&self) -> bool {
        self.body.checks.iter().all(|c| c.pass)
    }

    pub fn failed_checks(&self) -> Vec<&CheckRecord> {
        self.body.checks.iter().filter(|c| !c.pass).collect()
    }

    /// Canonical serialization of the deterministic part.
    pub fn body_json(&self) -> String {
        serde_json::to_string_pretty(&self.body).expect("report body serializes")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One row per check, columns [`CSV_COLUMNS`]. Parameter points are
    /// written as `s;t`, missing values as empty fields.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_COLUMNS).map_err(io_error)?;
        for c in &self.body.checks {
            let point = c
                .param_point
                .as_ref()
                .map(|p| p.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";"))
                .unwrap_or_default();
            let opt = |x: Option<f64>| x.map(|v| v.to_string()).unwrap_or_default();
            w.write_record([
                self.body.experiment.as_str(),
                c.name.as_str(),
                self.body.model.as_str(),
                point.as_str(),
                opt(c.h).as_str(),
                opt(c.value).as_str(),
                c.tolerance.to_string().as_str(),
                if c.pass { "true" } else { "false" },
            ])
            .map_err(io_error)?;
        }
        w.flush().map_err(io_error)
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}
