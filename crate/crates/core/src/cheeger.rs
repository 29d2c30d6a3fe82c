//! Horizontal perimeters, candidate cuts and Cheeger bounds.
//!
//! The perimeter of a curve `Σ` in a chart is computed as
//! `σ(Σ) = ∫_Σ ρ ‖(⟨X_i, ν⟩)_i‖₂ dS`, with `ν` the Euclidean unit normal and
//! `dS` Euclidean arc length. At characteristic points the integrand vanishes.

use std::f64::consts::PI;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::{AssembledForms, Grid2D};
use crate::geometry::{divergence, horizontal_gradient, CCStructure, GridFunction, HorizontalField, StructureKind};
use crate::{Error, Result};

/// Relative change at which composite midpoint refinement stops.
pub const PERIMETER_REL_TOL: f64 = 1e-6;
/// Pointwise slack in certificate checks.
pub const CERTIFICATE_TOL: f64 = 1e-9;
pub const COAREA_LEVELS: usize = 200;

const MAX_SUBDIVISIONS: usize = 1 << 20;

/// Straight segment in chart coordinates. Periodic coordinates may run past
/// the chart range and are wrapped on evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Segment {
    pub a: [f64; 2],
    pub b: [f64; 2],
}

impl Segment {
    pub fn new(a: [f64; 2], b: [f64; 2]) -> Self {
        Self { a, b }
    }

    pub fn length(&self) -> f64 {
        (self.b[0] - self.a[0]).hypot(self.b[1] - self.a[1])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CutKind {
    LevelSet,
    VerticalCircle,
    LinePair,
    Custom,
}

impl CutKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CutKind::LevelSet => "level_set",
            CutKind::VerticalCircle => "vertical_circle",
            CutKind::LinePair => "line_pair",
            CutKind::Custom => "custom",
        }
    }
}

/// A separating curve with its perimeter and the volumes of both sides.
///
/// `ratio` is `sigma / min(vol1, vol2)`, or `sigma / vol1` when `enclosed`
/// (the Dirichlet setting, where part 1 is the test set).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cut {
    pub kind: CutKind,
    /// Level, circle position or line offset, depending on the kind.
    pub parameter: f64,
    pub segments: Vec<Segment>,
    pub sigma: f64,
    pub vol1: f64,
    pub vol2: f64,
    pub enclosed: bool,
    pub ratio: f64,
}

impl Cut {
    pub fn new(kind: CutKind, parameter: f64, segments: Vec<Segment>, sigma: f64, vol1: f64, vol2: f64) -> Self {
        let ratio = sigma / vol1.min(vol2);
        Self { kind, parameter, segments, sigma, vol1, vol2, enclosed: false, ratio }
    }

    fn into_enclosed(mut self) -> Self {
        self.enclosed = true;
        self.ratio = self.sigma / self.vol1;
        self
    }
}

/// `ρ ‖(⟨X_i, ν⟩)_i‖₂` at a point for a unit normal `ν`.
pub fn perimeter_integrand(s: &CCStructure, x: f64, y: f64, nu: [f64; 2]) -> f64 {
    let sq: f64 = (0..s.m())
        .map(|i| {
            let a = s.field_at(i, x, y);
            let d = a[0] * nu[0] + a[1] * nu[1];
            d * d
        })
        .sum();
    s.density_at(x, y) * sq.sqrt()
}

fn check_segment(s: &CCStructure, seg: &Segment) -> Result<()> {
    let c = &s.chart;
    for p in [seg.a, seg.b] {
        if !(p[0].is_finite() && p[1].is_finite()) {
            return Err(Error::SegmentOutsideChart { x: p[0], y: p[1] });
        }
        let slack_x = 1e-12 * c.x_range.length();
        let slack_y = 1e-12 * c.y_range.length();
        let ok_x = c.periodic_x || c.x_range.contains(p[0], slack_x);
        let ok_y = c.periodic_y || c.y_range.contains(p[1], slack_y);
        if !(ok_x && ok_y) {
            return Err(Error::SegmentOutsideChart { x: p[0], y: p[1] });
        }
    }
    Ok(())
}

fn clamp_to_chart(s: &CCStructure, x: f64, y: f64) -> (f64, f64) {
    let c = &s.chart;
    let x = if c.periodic_x { x } else { x.clamp(c.x_range.lo, c.x_range.hi) };
    let y = if c.periodic_y { y } else { y.clamp(c.y_range.lo, c.y_range.hi) };
    (x, y)
}

fn segment_perimeter(s: &CCStructure, seg: &Segment) -> f64 {
    let len = seg.length();
    if len == 0.0 {
        return 0.0;
    }
    let d = [(seg.b[0] - seg.a[0]) / len, (seg.b[1] - seg.a[1]) / len];
    let nu = [-d[1], d[0]];
    let midpoint = |n: usize| -> f64 {
        let h = len / n as f64;
        let sum: f64 = (0..n)
            .map(|k| {
                let r = (k as f64 + 0.5) / n as f64;
                let (x, y) = clamp_to_chart(
                    s,
                    seg.a[0] + r * (seg.b[0] - seg.a[0]),
                    seg.a[1] + r * (seg.b[1] - seg.a[1]),
                );
                perimeter_integrand(s, x, y, nu)
            })
            .sum();
        sum * h
    };
    let mut n = 4;
    let mut prev = midpoint(n);
    loop {
        n *= 2;
        let cur = midpoint(n);
        let change = (cur - prev).abs();
        if change <= PERIMETER_REL_TOL * cur.abs() || change <= 1e-15 * len || n >= MAX_SUBDIVISIONS {
            return cur;
        }
        prev = cur;
    }
}

/// Horizontal perimeter of a union of segments.
pub fn horizontal_perimeter(s: &CCStructure, cut: &[Segment]) -> Result<f64> {
    for seg in cut {
        check_segment(s, seg)?;
    }
    let parts: Vec<f64> = cut.par_iter().map(|seg| segment_perimeter(s, seg)).collect();
    Ok(parts.iter().sum())
}

fn check_grid(s: &CCStructure, g: &Grid2D) -> Result<()> {
    if g.chart != s.chart {
        return Err(Error::GridMismatch);
    }
    Ok(())
}

fn cell_weights(s: &CCStructure, g: &Grid2D) -> Vec<f64> {
    let (cx, cy) = g.cell_dims();
    let area = g.hx * g.hy;
    let mut w = Vec::with_capacity(cx * cy);
    for cj in 0..cy {
        for ci in 0..cx {
            let (x, y) = g.cell_center(ci, cj);
            w.push(s.density_at(x, y) * area);
        }
    }
    w
}

/// `Σ ρ(center) hx hy` over the masked cells.
pub fn region_volume(s: &CCStructure, g: &Grid2D, mask: &[bool]) -> Result<f64> {
    check_grid(s, g)?;
    if mask.len() != g.cell_count() {
        return Err(Error::LengthMismatch { expected: g.cell_count(), got: mask.len() });
    }
    Ok(cell_weights(s, g).iter().zip(mask).filter(|(_, &m)| m).map(|(w, _)| w).sum())
}

/// Like [`region_volume`] with a fraction in `[0, 1]` per cell.
pub fn fractional_volume(s: &CCStructure, g: &Grid2D, fractions: &[f64]) -> Result<f64> {
    check_grid(s, g)?;
    if fractions.len() != g.cell_count() {
        return Err(Error::LengthMismatch { expected: g.cell_count(), got: fractions.len() });
    }
    Ok(cell_weights(s, g).iter().zip(fractions).map(|(w, f)| w * f).sum())
}

// Unit-cell corners in counter-clockwise order.
const UNIT: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

fn shoelace(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    let twice: f64 = (0..n)
        .map(|k| {
            let (p, q) = (poly[k], poly[(k + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum();
    0.5 * twice.abs()
}

/// Marching squares on one cell with values in counter-clockwise order.
/// Returns the area fraction of `{u > t}` and the contour pieces in unit
/// coordinates.
fn cell_contour(v: [f64; 4], t: f64) -> (f64, Vec<[[f64; 2]; 2]>) {
    let pos = v.map(|x| x > t);
    let count = pos.iter().filter(|&&p| p).count();
    if count == 0 {
        return (0.0, Vec::new());
    }
    if count == 4 {
        return (1.0, Vec::new());
    }
    let crossing = |k: usize| -> Option<[f64; 2]> {
        let k1 = (k + 1) % 4;
        if pos[k] == pos[k1] {
            return None;
        }
        let r = (v[k] - t) / (v[k] - v[k1]);
        let (a, b) = (UNIT[k], UNIT[k1]);
        Some([a[0] + r * (b[0] - a[0]), a[1] + r * (b[1] - a[1])])
    };
    let e: Vec<Option<[f64; 2]>> = (0..4).map(crossing).collect();

    if count == 2 && pos[0] == pos[2] {
        // saddle: the bilinear centre value decides which sign connects
        let centre = 0.25 * v.iter().sum::<f64>();
        let isolate_negative = centre > t;
        let mut segs = Vec::with_capacity(2);
        let mut tri_area = 0.0;
        for k in 0..4 {
            if pos[k] != isolate_negative {
                let p = e[(k + 3) % 4].expect("saddle edge crossing");
                let q = e[k].expect("saddle edge crossing");
                tri_area += shoelace(&[UNIT[k], q, p]);
                segs.push([p, q]);
            }
        }
        let frac = if isolate_negative { 1.0 - tri_area } else { tri_area };
        return (frac, segs);
    }

    let mut poly = Vec::with_capacity(6);
    let mut ends = Vec::with_capacity(2);
    for k in 0..4 {
        if pos[k] {
            poly.push(UNIT[k]);
        }
        if let Some(p) = e[k] {
            poly.push(p);
            ends.push(p);
        }
    }
    let segs = if ends.len() == 2 { vec![[ends[0], ends[1]]] } else { Vec::new() };
    (shoelace(&poly), segs)
}

/// Whether a unit-cell segment lies on a non-periodic edge of the chart.
fn on_outer_boundary(g: &Grid2D, ci: usize, cj: usize, seg: &[[f64; 2]; 2]) -> bool {
    let (cx, cy) = g.cell_dims();
    let both = |axis: usize, val: f64| (seg[0][axis] - val).abs() < 1e-12 && (seg[1][axis] - val).abs() < 1e-12;
    let px = g.chart.periodic_x;
    let py = g.chart.periodic_y;
    (!px && ci == 0 && both(0, 0.0))
        || (!px && ci + 1 == cx && both(0, 1.0))
        || (!py && cj == 0 && both(1, 0.0))
        || (!py && cj + 1 == cy && both(1, 1.0))
}

fn value_range(u: &[f64]) -> (f64, f64) {
    u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

/// Contour of `{u = t}` with parts `{u > t}` (part 1) and `{u ≤ t}` (part 2).
///
/// Cell volumes use the exact area of the piecewise linear partition inside
/// each cell. Contour pieces lying on a non-periodic chart edge do not
/// separate anything and are dropped.
pub fn cut_from_level_set(s: &CCStructure, g: &Grid2D, u: &[f64], t: f64) -> Result<Cut> {
    check_grid(s, g)?;
    if u.len() != g.node_count() {
        return Err(Error::LengthMismatch { expected: g.node_count(), got: u.len() });
    }
    let (min, max) = value_range(u);
    if !(t > min && t < max) {
        return Err(Error::LevelOutOfRange { t, min, max });
    }
    let (cx, cy) = g.cell_dims();
    let per_cell: Vec<(f64, Vec<Segment>)> = (0..cx * cy)
        .into_par_iter()
        .map(|c| {
            let (ci, cj) = (c % cx, c / cx);
            let k = g.cell_corners(ci, cj);
            let v = [u[k[0]], u[k[1]], u[k[3]], u[k[2]]];
            let (frac, local) = cell_contour(v, t);
            let (x0, y0) = g.cell_origin(ci, cj);
            let segs = local
                .iter()
                .filter(|seg| !on_outer_boundary(g, ci, cj, seg))
                .map(|seg| {
                    let map = |p: [f64; 2]| [x0 + p[0] * g.hx, y0 + p[1] * g.hy];
                    Segment::new(map(seg[0]), map(seg[1]))
                })
                .filter(|seg| seg.length() > 0.0)
                .collect();
            (frac, segs)
        })
        .collect();
    let fractions: Vec<f64> = per_cell.iter().map(|(f, _)| *f).collect();
    let segments: Vec<Segment> = per_cell.into_iter().flat_map(|(_, s)| s).collect();
    let sigma = horizontal_perimeter(s, &segments)?;
    let weights = cell_weights(s, g);
    let vol1: f64 = weights.iter().zip(&fractions).map(|(w, f)| w * f).sum();
    let vol2: f64 = weights.iter().zip(&fractions).map(|(w, f)| w * (1.0 - f)).sum();
    Ok(Cut::new(CutKind::LevelSet, t, segments, sigma, vol1, vol2))
}

/// Interior quantiles `i / (n + 1)`, `i = 1..=n`, of a sample.
fn quantiles(values: &[f64], n: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let last = (sorted.len() - 1) as f64;
    (1..=n)
        .map(|i| {
            let pos = last * i as f64 / (n + 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            let r = pos - lo as f64;
            sorted[lo] + r * (sorted[hi] - sorted[lo])
        })
        .collect()
}

/// Level-set cuts of `u` at the given levels; levels outside the open range
/// of `u` are skipped.
pub fn level_set_cuts(s: &CCStructure, g: &Grid2D, u: &[f64], levels: &[f64]) -> Result<Vec<Cut>> {
    let (min, max) = value_range(u);
    levels
        .par_iter()
        .filter(|&&t| t > min && t < max)
        .map(|&t| cut_from_level_set(s, g, u, t))
        .collect()
}

/// Best level-set cut of `u` over `n_levels` quantiles.
pub fn sweep_level_sets(s: &CCStructure, g: &Grid2D, u: &[f64], n_levels: usize) -> Result<Cut> {
    let cuts = sweep_all_levels(s, g, u, n_levels)?;
    best_cut(cuts).ok_or_else(|| Error::DegenerateFunction("no admissible level in the sweep".into()))
}

/// Every cut evaluated by [`sweep_level_sets`].
pub fn sweep_all_levels(s: &CCStructure, g: &Grid2D, u: &[f64], n_levels: usize) -> Result<Vec<Cut>> {
    check_grid(s, g)?;
    if n_levels == 0 {
        return Err(Error::InvalidArgument("n_levels must be at least 1".into()));
    }
    if u.len() != g.node_count() {
        return Err(Error::LengthMismatch { expected: g.node_count(), got: u.len() });
    }
    let (min, max) = value_range(u);
    if !(min < 0.0 && max > 0.0) {
        return Err(Error::DegenerateFunction(format!(
            "level sweep needs a sign-changing function, range is [{min}, {max}]"
        )));
    }
    level_set_cuts(s, g, u, &quantiles(u, n_levels))
}

pub fn best_cut(cuts: impl IntoIterator<Item = Cut>) -> Option<Cut> {
    cuts.into_iter().filter(|c| c.ratio.is_finite()).min_by(|a, b| a.ratio.total_cmp(&b.ratio))
}

/// `∫∫ ρ` over a coordinate rectangle, by 2×2 Gauss on a 16×16 subdivision.
fn rect_volume(s: &CCStructure, x: (f64, f64), y: (f64, f64)) -> f64 {
    const N: usize = 16;
    const G: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];
    let hx = (x.1 - x.0) / N as f64;
    let hy = (y.1 - y.0) / N as f64;
    let mut sum = 0.0;
    for a in 0..N {
        for b in 0..N {
            for gx in G {
                for gy in G {
                    sum += s.density_at(x.0 + (a as f64 + gx) * hx, y.0 + (b as f64 + gy) * hy);
                }
            }
        }
    }
    sum * hx * hy / 4.0
}

/// Circles `{h} × S¹` at the interior grid abscissae and diametric line
/// pairs `(0,1) × {y₀, y₀ + π}` at the grid ordinates in `[0, π)`.
pub fn candidate_cuts_grushin(s: &CCStructure, g: &Grid2D) -> Result<Vec<Cut>> {
    if s.kind != StructureKind::GrushinCylinder {
        return Err(Error::WrongStructure(format!("`{}` is not the Grushin cylinder", s.name)));
    }
    check_grid(s, g)?;
    let (x0, x1) = (s.chart.x_range.lo, s.chart.x_range.hi);
    let (y0, y1) = (s.chart.y_range.lo, s.chart.y_range.hi);
    let half = 0.5 * (y1 - y0);

    let circles = (1..g.nx - 1).into_par_iter().map(|i| {
        let h = g.x(i);
        let segs = vec![Segment::new([h, y0], [h, y1])];
        let sigma = horizontal_perimeter(s, &segs)?;
        let v1 = rect_volume(s, (x0, h), (y0, y1));
        let v2 = rect_volume(s, (h, x1), (y0, y1));
        Ok(Cut::new(CutKind::VerticalCircle, h, segs, sigma, v1, v2))
    });
    let pairs = (0..g.ny).into_par_iter().filter(|&j| g.y(j) < y0 + half - 1e-12).map(|j| {
        let c = g.y(j);
        let segs = vec![Segment::new([x0, c], [x1, c]), Segment::new([x0, c + half], [x1, c + half])];
        let sigma = horizontal_perimeter(s, &segs)?;
        let v1 = rect_volume(s, (x0, x1), (c, c + half));
        let v2 = rect_volume(s, (x0, x1), (c + half, c + 2.0 * half));
        Ok(Cut::new(CutKind::LinePair, c, segs, sigma, v1, v2))
    });
    circles.chain(pairs).collect()
}

/// Super-level sweep used for Dirichlet and mixed upper bounds.
#[derive(Clone, Debug, Serialize)]
pub struct EnclosedSweep {
    pub best: Cut,
    /// `(t, ratio)` for every level, ascending in `t`.
    pub profile: Vec<(f64, f64)>,
    pub cuts: Vec<Cut>,
}

/// Upper bound for `h_D` from super-level sets `{u > t}`, `t > 0`, of a
/// function vanishing on the whole non-periodic boundary.
pub fn dirichlet_cheeger_upper(s: &CCStructure, g: &Grid2D, u: &[f64], n_levels: usize) -> Result<EnclosedSweep> {
    let vanishing: Vec<bool> = (0..g.node_count()).map(|p| g.is_boundary_node(p)).collect();
    enclosed_upper(s, g, u, &vanishing, n_levels)
}

/// Upper bound for `h_Z` from super-level sets of a function vanishing on
/// the Dirichlet nodes of `f`. Contour pieces on the Neumann part are free.
pub fn mixed_cheeger_upper(
    s: &CCStructure,
    f: &AssembledForms,
    u: &[f64],
    n_levels: usize,
) -> Result<EnclosedSweep> {
    let vanishing: Vec<bool> = (0..f.grid.node_count()).map(|p| f.is_dirichlet_node(p)).collect();
    enclosed_upper(s, &f.grid, u, &vanishing, n_levels)
}

fn enclosed_upper(
    s: &CCStructure,
    g: &Grid2D,
    u: &[f64],
    vanishing: &[bool],
    n_levels: usize,
) -> Result<EnclosedSweep> {
    check_grid(s, g)?;
    if u.len() != g.node_count() {
        return Err(Error::LengthMismatch { expected: g.node_count(), got: u.len() });
    }
    if n_levels == 0 {
        return Err(Error::InvalidArgument("n_levels must be at least 1".into()));
    }
    let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if sup == 0.0 {
        return Err(Error::DegenerateFunction("function is identically zero".into()));
    }
    let on_bdry = u.iter().zip(vanishing).filter(|(_, &b)| b).fold(0.0f64, |m, (v, _)| m.max(v.abs()));
    if on_bdry > 1e-8 * sup {
        return Err(Error::BoundaryNotVanishing(on_bdry));
    }
    // orient so that the bulk of the function is positive
    let (min, max) = value_range(u);
    let u: Vec<f64> = if -min > max { u.iter().map(|v| -v).collect() } else { u.to_vec() };
    let positive: Vec<f64> = u.iter().copied().filter(|&v| v > 0.0).collect();
    let levels = quantiles(&positive, n_levels);
    let cuts: Vec<Cut> = level_set_cuts(s, g, &u, &levels)?.into_iter().map(Cut::into_enclosed).collect();
    let profile = cuts.iter().map(|c| (c.parameter, c.ratio)).collect();
    let best = best_cut(cuts.iter().cloned())
        .ok_or_else(|| Error::DegenerateFunction("no admissible level in the sweep".into()))?;
    Ok(EnclosedSweep { best, profile, cuts })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CertificateMode {
    Dirichlet,
    Neumann,
}

/// Test-vector-field certificate for a Cheeger lower bound.
#[derive(Clone, Debug, Serialize)]
pub struct FlowCertificate {
    pub mode: CertificateMode,
    pub h_certified: f64,
    /// `sup_p |φ(p)|₂` over all nodes.
    pub max_coeff_norm: f64,
    /// `inf div_ω V` over interior nodes; boundary nodes use one-sided
    /// stencils and are excluded.
    pub min_divergence: f64,
    pub interior_nodes: usize,
    /// Neumann mode only: `⟨V, inward normal⟩ ≥ −tol` at every boundary node.
    pub boundary_inward_ok: Option<bool>,
    pub min_inward_component: Option<f64>,
    pub tol: f64,
    pub valid: bool,
    pub field: HorizontalField,
}

/// Check `|φ| ≤ 1` and read off `h = inf div_ω V`.
pub fn mfmc_certify(s: &CCStructure, g: &Grid2D, v: &HorizontalField, mode: CertificateMode) -> Result<FlowCertificate> {
    check_grid(s, g)?;
    if v.grid != *g {
        return Err(Error::GridMismatch);
    }
    let tol = CERTIFICATE_TOL;
    let div = divergence(s, v)?;
    let n = g.node_count();
    let max_coeff_norm = (0..n).map(|p| v.coeff_norm(p)).fold(0.0f64, f64::max);
    let interior: Vec<usize> = (0..n).filter(|&p| !g.is_boundary_node(p)).collect();
    if interior.is_empty() {
        return Err(Error::InsufficientData("grid has no interior nodes".into()));
    }
    let min_divergence = interior.iter().map(|&p| div.values[p]).fold(f64::INFINITY, f64::min);

    let (boundary_inward_ok, min_inward_component) = match mode {
        CertificateMode::Dirichlet => (None, None),
        CertificateMode::Neumann => {
            let mut worst = f64::INFINITY;
            for p in (0..n).filter(|&p| g.is_boundary_node(p)) {
                let (i, j) = g.node_ij(p);
                let (x, y) = g.node_coords(p);
                let mut vec = [0.0, 0.0];
                for (k, phi) in v.phi.iter().enumerate() {
                    let a = s.field_at(k, x, y);
                    vec[0] += phi[p] * a[0];
                    vec[1] += phi[p] * a[1];
                }
                let mut normals = Vec::with_capacity(2);
                if !g.chart.periodic_x {
                    if i == 0 {
                        normals.push([1.0, 0.0]);
                    }
                    if i == g.nx - 1 {
                        normals.push([-1.0, 0.0]);
                    }
                }
                if !g.chart.periodic_y {
                    if j == 0 {
                        normals.push([0.0, 1.0]);
                    }
                    if j == g.ny - 1 {
                        normals.push([0.0, -1.0]);
                    }
                }
                for nrm in normals {
                    worst = worst.min(vec[0] * nrm[0] + vec[1] * nrm[1]);
                }
            }
            let worst = if worst.is_finite() { worst } else { 0.0 };
            (Some(worst >= -tol), Some(worst))
        }
    };
    let valid = max_coeff_norm <= 1.0 + tol && boundary_inward_ok.unwrap_or(true);
    Ok(FlowCertificate {
        mode,
        h_certified: min_divergence,
        max_coeff_norm,
        min_divergence,
        interior_nodes: interior.len(),
        boundary_inward_ok,
        min_inward_component,
        tol,
        valid,
        field: v.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum InequalityKind {
    /// `λ₁^D ≥ h_D² / 4`
    Dirichlet,
    /// `λ₂^N ≥ h_N² / 4`
    Neumann,
    /// `λ₁^Z ≥ h_Z² / 4`
    Mixed,
    /// `λ₂^N ≥ (α² / 4) h_N²`
    Carnot { alpha: f64 },
}

impl InequalityKind {
    pub fn constant(self) -> f64 {
        match self {
            InequalityKind::Carnot { alpha } => alpha * alpha / 4.0,
            _ => 0.25,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum HSource {
    Certified,
    /// An upper bound used as if it were the constant.
    Hypothetical,
}

#[derive(Clone, Debug, Serialize)]
pub struct InequalityReport {
    pub kind: InequalityKind,
    pub lambda: f64,
    pub h: f64,
    pub h_source: HSource,
    pub bound: f64,
    pub slack: f64,
    pub tol: f64,
    pub holds: bool,
}

/// Check `λ ≥ c h² − tol` with the constant `c` of `kind`.
pub fn verify_inequality(lambda: f64, h: f64, h_source: HSource, kind: InequalityKind, tol: f64) -> Result<InequalityReport> {
    if !(h >= 0.0 && h.is_finite()) {
        return Err(Error::InvalidCertificate(format!("h = {h} is not a finite non-negative number")));
    }
    if !lambda.is_finite() {
        return Err(Error::InvalidArgument(format!("eigenvalue {lambda} is not finite")));
    }
    if let InequalityKind::Carnot { alpha } = kind {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("geometric constant {alpha} must be positive")));
        }
    }
    let bound = kind.constant() * h * h;
    let slack = lambda - bound;
    Ok(InequalityReport { kind, lambda, h, h_source, bound, slack, tol, holds: slack >= -tol })
}

/// [`verify_inequality`] fed by a certificate, which must be valid.
pub fn verify_with_certificate(
    lambda: f64,
    cert: &FlowCertificate,
    kind: InequalityKind,
    tol: f64,
) -> Result<InequalityReport> {
    if !cert.valid {
        return Err(Error::InvalidCertificate("certificate failed its pointwise checks".into()));
    }
    verify_inequality(lambda, cert.h_certified.max(0.0), HSource::Certified, kind, tol)
}

#[derive(Clone, Debug, Serialize)]
pub struct CoareaReport {
    /// `∫ |∇_H u| ω`
    pub gradient_integral: f64,
    /// `∫ P_H({u > t}) dt`
    pub perimeter_integral: f64,
    pub rel_gap: f64,
    pub levels: usize,
}

/// Compare both sides of the coarea formula. The level integral uses the
/// midpoint rule on `levels` equal subintervals of the range of `u`.
pub fn coarea_check(s: &CCStructure, g: &Grid2D, u: &[f64], levels: usize) -> Result<CoareaReport> {
    check_grid(s, g)?;
    if u.len() != g.node_count() {
        return Err(Error::LengthMismatch { expected: g.node_count(), got: u.len() });
    }
    if levels == 0 {
        return Err(Error::InvalidArgument("levels must be at least 1".into()));
    }
    let (min, max) = value_range(u);
    if !(max > min) {
        return Err(Error::DegenerateFunction("coarea check of a constant function".into()));
    }
    let grad = horizontal_gradient(s, &GridFunction::new(*g, u.to_vec())?)?;
    let len2 = grad.squared_length();
    let node_weight = node_weights(s, g);
    let gradient_integral: f64 = len2.iter().zip(&node_weight).map(|(l, w)| l.sqrt() * w).sum();

    let dt = (max - min) / levels as f64;
    let ts: Vec<f64> = (0..levels).map(|k| min + (k as f64 + 0.5) * dt).collect();
    let sigmas: Vec<f64> = level_set_cuts(s, g, u, &ts)?.iter().map(|c| c.sigma).collect();
    let perimeter_integral = dt * sigmas.iter().sum::<f64>();
    let rel_gap = (gradient_integral - perimeter_integral).abs() / gradient_integral.abs().max(f64::MIN_POSITIVE);
    Ok(CoareaReport { gradient_integral, perimeter_integral, rel_gap, levels })
}

/// Trapezoidal node weights `ρ(node) × (share of adjacent cell areas)`.
fn node_weights(s: &CCStructure, g: &Grid2D) -> Vec<f64> {
    let mut w = vec![0.0; g.node_count()];
    let (cx, cy) = g.cell_dims();
    let quarter = 0.25 * g.hx * g.hy;
    for cj in 0..cy {
        for ci in 0..cx {
            for k in g.cell_corners(ci, cj) {
                w[k] += quarter;
            }
        }
    }
    for (p, wp) in w.iter_mut().enumerate() {
        let (x, y) = g.node_coords(p);
        *wp *= s.density_at(x, y);
    }
    w
}

/// CSV with header `kind,sigma,vol1,vol2,ratio`.
pub fn write_cuts_csv<W: Write>(cuts: &[Cut], mut w: W) -> std::io::Result<()> {
    writeln!(w, "kind,sigma,vol1,vol2,ratio")?;
    for c in cuts {
        writeln!(w, "{},{},{},{},{}", c.kind.as_str(), c.sigma, c.vol1, c.vol2, c.ratio)?;
    }
    Ok(())
}

/// Segment endpoints of one cut, header `x0,y0,x1,y1`.
pub fn write_segments_csv<W: Write>(cut: &Cut, mut w: W) -> std::io::Result<()> {
    writeln!(w, "x0,y0,x1,y1")?;
    for s in &cut.segments {
        writeln!(w, "{},{},{},{}", s.a[0], s.a[1], s.b[0], s.b[1])?;
    }
    Ok(())
}

/// Exact line-pair ratio on the Grushin cylinder under the perimeter above:
/// each line has `σ = ∫₀¹ x dx = ½`, each half has volume `π`.
pub fn grushin_line_pair_ratio() -> f64 {
    1.0 / PI
}
