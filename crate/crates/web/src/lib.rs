//! Browser bindings. Every export takes a model string (`sphere`,
//! `torsion_plane{0.5}`, …) and returns a JSON document for the page to draw.

use pathgeo::bundle::{Interval, Path};
use pathgeo::curvature::{curvature_matrix, torsion_components, ParamGrid, DEFAULT_CURVATURE_STEP};
use pathgeo::holonomy::{holonomy_curvature_estimate, loop_holonomy};
use pathgeo::linalg::{identity, to_rows, Vector};
use pathgeo::transport::transport_matrix;
use pathgeo::zoo::{Model, ModelSpec};
use pathgeo::{GeoError, Result};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const STEPS_PER_UNIT: f64 = 1000.0;

fn build(model: &str) -> Result<Model> {
    Model::build(&model.parse::<ModelSpec>()?)
}

fn require_plane(m: &Model) -> Result<()> {
    if m.base_dim() != 2 || m.provider.fibre_dim() != 2 {
        return Err(GeoError::Argument("the demo draws 2-dimensional models only".into()));
    }
    Ok(())
}

/// Square loop of side `h` at `(s, t)`: the holonomy matrix, the scaled
/// defect `−(Hol − I)/h²`, the extrapolated curvature and the component formula.
pub fn holonomy_report(model: &str, s: f64, t: f64, h: f64) -> Result<Value> {
    let m = build(model)?;
    require_plane(&m)?;
    if !(h > 0.0) {
        return Err(GeoError::Argument("loop size must be positive".into()));
    }
    let fam = m.family();
    let steps = ((STEPS_PER_UNIT * h).ceil() as usize).max(4);
    let hol = loop_holonomy(&m.provider, &fam, s, t, h, h, steps)?;
    let scaled = -(&hol - identity(2)) / (h * h);
    let levels = [h, h / 2.0, h / 4.0];
    let estimate = holonomy_curvature_estimate(&m.provider, &fam, s, t, &levels, steps)?;
    let curvature = curvature_matrix(&m.provider, &fam, s, t, DEFAULT_CURVATURE_STEP)?.value;
    Ok(json!({
        "model": m.id(),
        "point": [s, t],
        "h": h,
        "holonomy": to_rows(&hol),
        "scaled_defect": to_rows(&scaled),
        "extrapolated": to_rows(&estimate.curvature),
        "curvature": to_rows(&curvature),
        "estimate_error": (&estimate.curvature - &curvature).norm(),
    }))
}

/// Transports `u` along the chart segment from `from` to `to`, sampled at
/// `samples + 1` points.
pub fn transport_report(model: &str, from: [f64; 2], to: [f64; 2], u: [f64; 2], samples: usize) -> Result<Value> {
    let m = build(model)?;
    require_plane(&m)?;
    if samples == 0 {
        return Err(GeoError::Argument("need at least one sample".into()));
    }
    let (a, b) = (Vector::from_row_slice(&from), Vector::from_row_slice(&to));
    let path = Path::segment(a.clone(), b.clone());
    let length = (&b - &a).norm();
    let u0 = Vector::from_row_slice(&u);
    let dom = path.domain();
    let mut points = Vec::with_capacity(samples + 1);
    for k in 0..=samples {
        let x = dom.lo + dom.length() * k as f64 / samples as f64;
        let steps = ((STEPS_PER_UNIT * length * (x - dom.lo) / dom.length()).ceil() as usize).max(1);
        let v = transport_matrix(&m.provider, &path, dom.lo, x, steps)?.apply(&u0);
        let p = path.point(x);
        points.push(json!({ "x": [p[0], p[1]], "v": [v[0], v[1]] }));
    }
    Ok(json!({ "model": m.id(), "samples": points }))
}

/// `‖ℛ‖` and `‖𝒯‖` of the coordinate family on a `resolution²` grid over
/// the model's region.
pub fn field_report(model: &str, resolution: usize) -> Result<Value> {
    let m = build(model)?;
    require_plane(&m)?;
    if resolution < 2 {
        return Err(GeoError::Argument("grid resolution must be at least 2".into()));
    }
    let fam = m.family();
    // stay a difference step away from the edges
    let inset = |iv: Interval| Interval::new(iv.lo + 1e-3, iv.hi - 1e-3);
    let inner = pathgeo::bundle::Family::coordinate_plane(
        Vector::from_vec(vec![fam.domain_s().midpoint(), fam.domain_t().midpoint()]),
        0,
        1,
        inset(fam.domain_s())?,
        inset(fam.domain_t())?,
    )?;
    let cells = ParamGrid::over(&inner, resolution, resolution)
        .points()
        .into_iter()
        .map(|(s, t)| {
            let r = curvature_matrix(&m.provider, &fam, s, t, DEFAULT_CURVATURE_STEP)?.value;
            let tors = torsion_components(&m.provider, &fam, s, t)?.value;
            Ok(json!({ "s": s, "t": t, "curvature": r.norm(), "torsion": tors.norm() }))
        })
        .collect::<Result<Vec<_>>>()?;
    let (ds, dt) = (fam.domain_s(), fam.domain_t());
    Ok(json!({
        "model": m.id(),
        "region": [[ds.lo, ds.hi], [dt.lo, dt.hi]],
        "resolution": resolution,
        "cells": cells,
    }))
}

fn to_js(r: Result<Value>) -> std::result::Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn loop_holonomy_json(model: &str, s: f64, t: f64, h: f64) -> std::result::Result<String, JsValue> {
    to_js(holonomy_report(model, s, t, h))
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn transport_json(
    model: &str,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
    u0: f64,
    u1: f64,
    samples: usize,
) -> std::result::Result<String, JsValue> {
    to_js(transport_report(model, [x0, y0], [x1, y1], [u0, u1], samples))
}

#[wasm_bindgen]
pub fn curvature_field_json(model: &str, resolution: usize) -> std::result::Result<String, JsValue> {
    to_js(field_report(model, resolution))
}
