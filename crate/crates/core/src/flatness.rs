//! Flatness: vanishing curvature against path-independence of transport,
//! and the flat frame obtained by transporting a basis out of one point.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bundle::{CoefficientProvider, Family, FrameField, Interval, Path};
use crate::curvature::curvature_matrix;
use crate::error::{GeoError, Result};
use crate::linalg::{self, Matrix, Vector};
use crate::par::par_map;
use crate::transport::transport_matrix;

/// Paths compared by [`path_independence_defect`] must share endpoints to
/// within this distance.
pub const ENDPOINT_TOL: f64 = 1e-10;

/// Number of grid nodes checked before a flat frame is built.
pub const SPOT_CHECKS: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FlatnessTolerances {
    /// Largest curvature norm on the grid still called flat.
    pub curvature: f64,
    /// Largest transport mismatch between catalogue routes still called
    /// path-independent.
    pub defect: f64,
}

impl Default for FlatnessTolerances {
    fn default() -> Self {
        FlatnessTolerances {
            curvature: 1e-8,
            defect: 1e-7,
        }
    }
}

/// Transport over the whole parameter range of `path` with `steps_per_unit`
/// RK4 steps per unit of parameter length.
pub fn full_transport(provider: &CoefficientProvider, path: &Path, steps_per_unit: usize) -> Result<Matrix> {
    let dom = path.domain();
    let steps = ((steps_per_unit as f64 * dom.length()).ceil() as usize).max(1);
    Ok(transport_matrix(provider, path, dom.lo, dom.hi, steps)?.value)
}

fn fmt_point(x: &Vector) -> String {
    let parts: Vec<String> = x.iter().map(|v| format!("{v:.6}")).collect();
    format!("({})", parts.join(", "))
}

/// `‖H(path1) − H(path2)‖`, each transport taken over the path's full
/// parameter range.
pub fn path_independence_defect(
    provider: &CoefficientProvider,
    path1: &Path,
    path2: &Path,
    steps_per_unit: usize,
) -> Result<f64> {
    let (a1, b1) = (path1.start(), path1.end());
    let (a2, b2) = (path2.start(), path2.end());
    if a1.len() != a2.len() || (&a1 - &a2).norm() > ENDPOINT_TOL || (&b1 - &b2).norm() > ENDPOINT_TOL {
        return Err(GeoError::argument(format!(
            "paths do not share endpoints: '{}' runs {} -> {}, '{}' runs {} -> {}",
            path1.label(),
            fmt_point(&a1),
            fmt_point(&b1),
            path2.label(),
            fmt_point(&a2),
            fmt_point(&b2)
        )));
    }
    let h1 = full_transport(provider, path1, steps_per_unit)?;
    let h2 = full_transport(provider, path2, steps_per_unit)?;
    Ok((h1 - h2).norm())
}

/// Corner reached by moving along the first axis only.
fn bend_corner(from: &Vector, to: &Vector) -> Vector {
    let mut c = from.clone();
    c[0] = to[0];
    c
}

/// Polyline through `nodes` with repeated nodes dropped; a single node
/// yields a zero-length segment.
fn polyline_skipping(nodes: Vec<Vector>) -> Result<Path> {
    let mut kept: Vec<Vector> = Vec::with_capacity(nodes.len());
    for p in nodes {
        if kept.last().is_none_or(|q| (q - &p).norm() > 0.0) {
            kept.push(p);
        }
    }
    if kept.len() == 1 {
        let p = kept.pop().expect("one node");
        return Ok(Path::segment(p.clone(), p));
    }
    Path::polyline(kept)
}

/// The fixed route catalogue between two points: straight segment,
/// single-bend polyline, and a quadratic arc bowed toward the bend corner.
pub fn route_catalogue(from: &Vector, to: &Vector) -> Result<Vec<Path>> {
    let corner = bend_corner(from, to);
    let tag = format!("{}->{}", fmt_point(from), fmt_point(to));
    Ok(vec![
        Path::segment(from.clone(), to.clone()).relabel(format!("segment{tag}")),
        polyline_skipping(vec![from.clone(), corner.clone(), to.clone()])?
            .relabel(format!("bend{tag}")),
        Path::quadratic_arc(from.clone(), corner, to.clone()).relabel(format!("arc{tag}")),
    ])
}

/// Axis-aligned route from `from` to `to`: one leg per coordinate, in axis
/// order, zero-length legs skipped.
pub fn canonical_route(from: &Vector, to: &Vector) -> Result<Path> {
    let mut nodes = vec![from.clone()];
    let mut p = from.clone();
    for i in 0..from.len() {
        p[i] = to[i];
        nodes.push(p.clone());
    }
    Ok(polyline_skipping(nodes)?.relabel(format!("canonical{}->{}", fmt_point(from), fmt_point(to))))
}

/// Box of base points sampled with `n` nodes per axis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegionGrid {
    pub axes: Vec<Interval>,
    pub n: usize,
}

impl RegionGrid {
    pub fn new(axes: Vec<Interval>, n: usize) -> Result<Self> {
        if axes.is_empty() {
            return Err(GeoError::argument("region needs at least one axis"));
        }
        if n < 2 {
            return Err(GeoError::argument(format!("grid resolution must be at least 2, got {n}")));
        }
        Ok(RegionGrid { axes, n })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Nodes in lexicographic order, last axis fastest.
    pub fn nodes(&self) -> Vec<Vector> {
        let ticks: Vec<Vec<f64>> = self.axes.iter().map(|iv| iv.linspace(self.n)).collect();
        let mut out: Vec<Vec<f64>> = vec![vec![]];
        for t in &ticks {
            out = out
                .into_iter()
                .flat_map(|p| {
                    t.iter().map(move |&x| {
                        let mut q = p.clone();
                        q.push(x);
                        q
                    })
                })
                .collect();
        }
        out.into_iter().map(Vector::from_vec).collect()
    }

    /// Node pairs mirrored through the centre of the box.
    pub fn mirrored_pairs(&self) -> Vec<(Vector, Vector)> {
        let nodes = self.nodes();
        let last = nodes.len() - 1;
        (0..nodes.len() / 2)
            .map(|i| (nodes[i].clone(), nodes[last - i].clone()))
            .collect()
    }

    pub fn contains(&self, x: &Vector) -> bool {
        x.len() == self.dim() && self.axes.iter().zip(x.iter()).all(|(iv, v)| iv.contains(*v))
    }
}

/// Largest transport mismatch found among catalogue routes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DefectWitness {
    pub defect: f64,
    pub first: String,
    pub second: String,
}

fn catalogue_defect(
    provider: &CoefficientProvider,
    from: &Vector,
    to: &Vector,
    steps_per_unit: usize,
) -> Result<DefectWitness> {
    let routes = route_catalogue(from, to)?;
    let hs = routes
        .iter()
        .map(|p| full_transport(provider, p, steps_per_unit))
        .collect::<Result<Vec<_>>>()?;
    let mut worst = DefectWitness {
        defect: 0.0,
        first: routes[0].label().to_string(),
        second: routes[1].label().to_string(),
    };
    for i in 0..routes.len() {
        for j in i + 1..routes.len() {
            let d = (&hs[i] - &hs[j]).norm();
            if d > worst.defect {
                worst = DefectWitness {
                    defect: d,
                    first: routes[i].label().to_string(),
                    second: routes[j].label().to_string(),
                };
            }
        }
    }
    Ok(worst)
}

/// Basis field `e(x) = H(x ← x₀) · seed` transported along canonical routes.
///
/// Before building, [`SPOT_CHECKS`] grid nodes drawn with `rng_seed` are
/// reached from `x₀` by the canonical route, the straight segment and the
/// quadratic arc; any mismatch above `tol` is reported as
/// [`GeoError::NotFlat`] naming the two routes.
pub fn construct_flat_frame(
    provider: &CoefficientProvider,
    grid: &RegionGrid,
    x0: &Vector,
    seed_basis: &Matrix,
    rng_seed: u64,
    steps_per_unit: usize,
    tol: f64,
) -> Result<FrameField> {
    let n = provider.fibre_dim();
    if seed_basis.nrows() != n || seed_basis.ncols() != n {
        return Err(GeoError::argument(format!(
            "seed basis must be {n}x{n}, got {}x{}",
            seed_basis.nrows(),
            seed_basis.ncols()
        )));
    }
    linalg::invert(seed_basis)?;
    if !grid.contains(x0) {
        return Err(GeoError::argument(format!("basepoint {} outside the region", fmt_point(x0))));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let nodes = grid.nodes();
    let picked: Vec<Vector> = nodes
        .choose_multiple(&mut rng, SPOT_CHECKS.min(nodes.len()))
        .cloned()
        .collect();
    let witnesses = par_map(picked, |y| -> Result<DefectWitness> {
        let canon = canonical_route(x0, &y)?;
        let h_canon = full_transport(provider, &canon, steps_per_unit)?;
        let corner = bend_corner(x0, &y);
        let others = [
            Path::segment(x0.clone(), y.clone()).relabel(format!("segment{}->{}", fmt_point(x0), fmt_point(&y))),
            Path::quadratic_arc(x0.clone(), corner, y.clone())
                .relabel(format!("arc{}->{}", fmt_point(x0), fmt_point(&y))),
        ];
        let mut worst = DefectWitness {
            defect: 0.0,
            first: canon.label().to_string(),
            second: others[0].label().to_string(),
        };
        for p in &others {
            let d = (full_transport(provider, p, steps_per_unit)? - &h_canon).norm();
            if d > worst.defect {
                worst.defect = d;
                worst.second = p.label().to_string();
            }
        }
        Ok(worst)
    });
    for w in witnesses {
        let w = w?;
        if !(w.defect <= tol) {
            return Err(GeoError::NotFlat {
                defect: w.defect,
                first: w.first,
                second: w.second,
            });
        }
    }

    let (provider, x0, seed) = (provider.clone(), x0.clone(), seed_basis.clone());
    Ok(FrameField::new(move |x| {
        let route = canonical_route(&x0, x)?;
        Ok(full_transport(&provider, &route, steps_per_unit)? * &seed)
    }))
}

/// `E(y)⁻¹ H(y ← x) E(x)`: the transport matrix along `path` expressed in a
/// frame field.
pub fn transport_in_frame(
    provider: &CoefficientProvider,
    frame: &FrameField,
    path: &Path,
    steps_per_unit: usize,
) -> Result<Matrix> {
    let h = full_transport(provider, path, steps_per_unit)?;
    let ex = frame.basis_at(&path.start())?;
    let ey = frame.basis_at(&path.end())?;
    linalg::solve(&ey, &(h * ex))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatnessReport {
    /// Largest `‖ℛ‖` over grid nodes and coordinate planes.
    pub curvature_sup: f64,
    pub curvature_argmax: Vec<f64>,
    /// Largest catalogue mismatch and the routes that produced it.
    pub path_defect: DefectWitness,
    pub flat_by_curvature: bool,
    pub flat_by_paths: bool,
    /// Both criteria agree.
    pub consistent: bool,
    /// Whether the equivalence of the two criteria is expected (coefficients
    /// come from a connection on the base).
    pub connection_induced: bool,
    pub tolerances: FlatnessTolerances,
}

/// Curvature of the coordinate plane through `x` spanned by axes `i`, `j`.
fn plane_curvature(
    provider: &CoefficientProvider,
    grid: &RegionGrid,
    x: &Vector,
    i: usize,
    j: usize,
    fd_step: f64,
) -> Result<f64> {
    let fam = Family::coordinate_plane(x.clone(), i, j, grid.axes[i], grid.axes[j])?;
    Ok(curvature_matrix(provider, &fam, x[i], x[j], fd_step)?.value.norm())
}

/// Evaluates both flatness criteria on a region. Disagreement is reported
/// through [`FlatnessReport::consistent`], never raised.
pub fn flatness_verdict(
    provider: &CoefficientProvider,
    grid: &RegionGrid,
    tolerances: FlatnessTolerances,
    fd_step: f64,
    steps_per_unit: usize,
) -> Result<FlatnessReport> {
    let m = grid.dim();
    let planes: Vec<(usize, usize)> = (0..m).flat_map(|i| (i + 1..m).map(move |j| (i, j))).collect();
    let samples: Vec<(Vector, usize, usize)> = grid
        .nodes()
        .into_iter()
        .flat_map(|x| planes.iter().map(move |&(i, j)| (x.clone(), i, j)))
        .collect();
    let curv = par_map(samples, |(x, i, j)| {
        plane_curvature(provider, grid, &x, i, j, fd_step).map(|c| (c, x))
    });
    let mut curvature_sup = 0.0;
    let mut curvature_argmax = grid.nodes()[0].iter().copied().collect();
    for c in curv {
        let (c, x) = c?;
        if c > curvature_sup {
            curvature_sup = c;
            curvature_argmax = x.iter().copied().collect();
        }
    }

    let defects = par_map(grid.mirrored_pairs(), |(a, b)| {
        catalogue_defect(provider, &a, &b, steps_per_unit)
    });
    let mut path_defect: Option<DefectWitness> = None;
    for d in defects {
        let d = d?;
        if path_defect.as_ref().is_none_or(|w| d.defect > w.defect) {
            path_defect = Some(d);
        }
    }
    let path_defect = path_defect.expect("a grid with n >= 2 has mirrored pairs");

    let flat_by_curvature = curvature_sup <= tolerances.curvature;
    let flat_by_paths = path_defect.defect <= tolerances.defect;
    Ok(FlatnessReport {
        curvature_sup,
        curvature_argmax,
        path_defect,
        flat_by_curvature,
        flat_by_paths,
        consistent: flat_by_curvature == flat_by_paths,
        connection_induced: provider.is_connection_induced(),
        tolerances,
    })
}
