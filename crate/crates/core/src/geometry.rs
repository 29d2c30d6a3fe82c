//! CC-structures on rectangular charts.
//!
//! A structure is a generating family of vector fields `X_i = a_i1 ∂x + a_i2 ∂y`
//! together with a volume form `ω = ρ dx∧dy`. The horizontal gradient is
//! `∇_H u = Σ (X_i u) X_i`, represented here by its coefficient vector
//! `φ_i = X_i u`, and the sub-Laplacian is `div_ω ∘ ∇_H`.
//!
//! The pointwise operators in this module use centered differences (one-sided
//! second-order stencils at non-periodic edges). They are meant for checks;
//! the spectral pipeline works with the assembled forms in
//! [`crate::discretization`].

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::Grid2D;
use crate::{Error, Result};

/// Scalar function of the chart coordinates.
pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || hi <= lo {
            return Err(Error::InvalidChart(format!(
                "interval [{lo}, {hi}] must be finite with positive length"
            )));
        }
        Ok(Self { lo, hi })
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, v: f64, slack: f64) -> bool {
        v >= self.lo - slack && v <= self.hi + slack
    }
}

/// Rectangular chart, optionally periodic along either axis.
///
/// A periodic axis identifies its endpoints, so it carries no boundary.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chart2D {
    pub x_range: Interval,
    pub y_range: Interval,
    pub periodic_x: bool,
    pub periodic_y: bool,
}

impl Chart2D {
    pub fn new(x_range: Interval, y_range: Interval, periodic_x: bool, periodic_y: bool) -> Self {
        Self { x_range, y_range, periodic_x, periodic_y }
    }

    pub fn rectangle(x: (f64, f64), y: (f64, f64)) -> Result<Self> {
        Ok(Self::new(Interval::new(x.0, x.1)?, Interval::new(y.0, y.1)?, false, false))
    }

    /// Map a point into the fundamental domain of the periodic axes.
    pub fn wrap(&self, x: f64, y: f64) -> (f64, f64) {
        let wx = if self.periodic_x { wrap_into(x, self.x_range) } else { x };
        let wy = if self.periodic_y { wrap_into(y, self.y_range) } else { y };
        (wx, wy)
    }

    /// Whether the point lies in the closed chart (periodic axes always do).
    pub fn contains(&self, x: f64, y: f64, slack: f64) -> bool {
        (self.periodic_x || self.x_range.contains(x, slack))
            && (self.periodic_y || self.y_range.contains(y, slack))
    }

    pub fn area(&self) -> f64 {
        self.x_range.length() * self.y_range.length()
    }
}

fn wrap_into(v: f64, r: Interval) -> f64 {
    let len = r.length();
    let w = (v - r.lo).rem_euclid(len);
    r.lo + w
}

/// One generating vector field `a1(x,y) ∂x + a2(x,y) ∂y`.
#[derive(Clone)]
pub struct VectorField {
    pub a1: ScalarFn,
    pub a2: ScalarFn,
}

impl VectorField {
    pub fn new(
        a1: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        a2: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self { a1: Arc::new(a1), a2: Arc::new(a2) }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructureKind {
    GrushinCylinder,
    Euclidean,
    Custom,
}

/// Generating family and volume density on a chart.
#[derive(Clone)]
pub struct CCStructure {
    pub name: String,
    pub kind: StructureKind,
    pub chart: Chart2D,
    fields: Vec<VectorField>,
    density: ScalarFn,
}

impl fmt::Debug for CCStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CCStructure")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("chart", &self.chart)
            .field("m", &self.fields.len())
            .finish()
    }
}

impl CCStructure {
    pub fn new(
        name: impl Into<String>,
        chart: Chart2D,
        fields: Vec<VectorField>,
        density: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::with_kind(name, StructureKind::Custom, chart, fields, Arc::new(density))
    }

    fn with_kind(
        name: impl Into<String>,
        kind: StructureKind,
        chart: Chart2D,
        fields: Vec<VectorField>,
        density: ScalarFn,
    ) -> Result<Self> {
        if fields.is_empty() {
            return Err(Error::InvalidArgument("a CC-structure needs at least one field".into()));
        }
        Ok(Self { name: name.into(), kind, chart, fields, density })
    }

    /// Number of generating fields.
    pub fn m(&self) -> usize {
        self.fields.len()
    }

    /// Coefficients `(a_i1, a_i2)` of field `i` at a point (periodic axes wrapped).
    pub fn field_at(&self, i: usize, x: f64, y: f64) -> [f64; 2] {
        let (x, y) = self.chart.wrap(x, y);
        let f = &self.fields[i];
        [(f.a1)(x, y), (f.a2)(x, y)]
    }

    pub fn density_at(&self, x: f64, y: f64) -> f64 {
        let (x, y) = self.chart.wrap(x, y);
        (self.density)(x, y)
    }

    /// Evaluate all field coefficients at a point, checking finiteness.
    pub(crate) fn checked_fields_at(&self, x: f64, y: f64, out: &mut Vec<[f64; 2]>) -> Result<()> {
        out.clear();
        for i in 0..self.m() {
            let a = self.field_at(i, x, y);
            if !(a[0].is_finite() && a[1].is_finite()) {
                return Err(Error::NonFiniteCoefficient { x, y });
            }
            out.push(a);
        }
        Ok(())
    }

    pub(crate) fn checked_density_at(&self, x: f64, y: f64) -> Result<f64> {
        let rho = self.density_at(x, y);
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(Error::NonPositiveDensity { x, y, value: rho });
        }
        Ok(rho)
    }

    /// Sample every field and the density at the grid nodes.
    fn sample_nodes(&self, grid: &Grid2D) -> Result<NodeSamples> {
        let n = grid.node_count();
        let mut coeffs = Vec::with_capacity(n * self.m());
        let mut density = Vec::with_capacity(n);
        let mut buf = Vec::with_capacity(self.m());
        for node in 0..n {
            let (x, y) = grid.node_coords(node);
            self.checked_fields_at(x, y, &mut buf)?;
            coeffs.extend_from_slice(&buf);
            density.push(self.checked_density_at(x, y)?);
        }
        Ok(NodeSamples { m: self.m(), coeffs, density })
    }

    fn check_grid(&self, grid: &Grid2D) -> Result<()> {
        if grid.chart != self.chart {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }
}

struct NodeSamples {
    m: usize,
    coeffs: Vec<[f64; 2]>,
    density: Vec<f64>,
}

impl NodeSamples {
    fn at(&self, node: usize, i: usize) -> [f64; 2] {
        self.coeffs[node * self.m + i]
    }
}

/// The Grushin cylinder `(0,1) × S¹` with `X = ∂x`, `Y = x ∂y` and `ω = dx∧dy`.
pub fn builtin_grushin_cylinder() -> CCStructure {
    let chart = Chart2D::new(
        Interval { lo: 0.0, hi: 1.0 },
        Interval { lo: 0.0, hi: 2.0 * PI },
        false,
        true,
    );
    let fields = vec![VectorField::new(|_, _| 1.0, |_, _| 0.0), VectorField::new(|_, _| 0.0, |x, _| x)];
    CCStructure::with_kind("grushin_cylinder", StructureKind::GrushinCylinder, chart, fields, Arc::new(|_, _| 1.0))
        .expect("built-in structure is well formed")
}

/// Flat structure `X1 = ∂x`, `X2 = ∂y`, `ρ ≡ 1` on a rectangle.
pub fn builtin_euclidean(x_range: (f64, f64), y_range: (f64, f64)) -> Result<CCStructure> {
    let chart = Chart2D::rectangle(x_range, y_range)?;
    let fields = vec![VectorField::new(|_, _| 1.0, |_, _| 0.0), VectorField::new(|_, _| 0.0, |_, _| 1.0)];
    CCStructure::with_kind("euclidean", StructureKind::Euclidean, chart, fields, Arc::new(|_, _| 1.0))
}

/// Values of a function at the nodes of a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    pub grid: Grid2D,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid2D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(Error::LengthMismatch { expected: grid.node_count(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: Grid2D, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.node_count())
            .map(|node| {
                let (x, y) = grid.node_coords(node);
                f(x, y)
            })
            .collect();
        Self { grid, values }
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.node_index(i, j)]
    }
}

/// Horizontal vector field `V = Σ φ_i X_i`, stored by its coefficients.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HorizontalField {
    pub grid: Grid2D,
    pub phi: Vec<Vec<f64>>,
}

impl HorizontalField {
    pub fn new(grid: Grid2D, phi: Vec<Vec<f64>>) -> Result<Self> {
        for p in &phi {
            if p.len() != grid.node_count() {
                return Err(Error::LengthMismatch { expected: grid.node_count(), got: p.len() });
            }
        }
        Ok(Self { grid, phi })
    }

    /// Sample coefficient functions at the grid nodes.
    pub fn from_fns(grid: Grid2D, fns: &[&dyn Fn(f64, f64) -> f64]) -> Self {
        let phi = fns
            .iter()
            .map(|f| GridFunction::from_fn(grid, f).values)
            .collect();
        Self { grid, phi }
    }

    pub fn m(&self) -> usize {
        self.phi.len()
    }

    /// Euclidean norm of the coefficient vector at a node, `|φ(p)|₂`.
    pub fn coeff_norm(&self, node: usize) -> f64 {
        self.phi.iter().map(|p| p[node] * p[node]).sum::<f64>().sqrt()
    }

    /// `Σ φ_i²` per node. For a gradient field this is `|∇_H u|²`.
    pub fn squared_length(&self) -> Vec<f64> {
        (0..self.grid.node_count())
            .map(|node| self.phi.iter().map(|p| p[node] * p[node]).sum())
            .collect()
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            grid: self.grid,
            phi: self.phi.iter().map(|p| p.iter().map(|v| v * factor).collect()).collect(),
        }
    }
}

/// Derivative along one axis: centered in the interior and across periodic
/// seams, one-sided second order at non-periodic edges.
fn axis_derivative(grid: &Grid2D, values: &[f64], along_x: bool) -> Vec<f64> {
    let (n, h, periodic) = if along_x {
        (grid.nx, grid.hx, grid.chart.periodic_x)
    } else {
        (grid.ny, grid.hy, grid.chart.periodic_y)
    };
    let at = |i: usize, j: usize, k: usize| -> f64 {
        // k is the index along the differentiated axis
        if along_x {
            values[grid.node_index(k, j)]
        } else {
            values[grid.node_index(i, k)]
        }
    };
    let mut out = vec![0.0; values.len()];
    for j in 0..grid.ny {
        for i in 0..grid.nx {
            let k = if along_x { i } else { j };
            let d = if periodic {
                let kp = (k + 1) % n;
                let km = (k + n - 1) % n;
                (at(i, j, kp) - at(i, j, km)) / (2.0 * h)
            } else if k == 0 {
                (-3.0 * at(i, j, 0) + 4.0 * at(i, j, 1) - at(i, j, 2)) / (2.0 * h)
            } else if k == n - 1 {
                (3.0 * at(i, j, n - 1) - 4.0 * at(i, j, n - 2) + at(i, j, n - 3)) / (2.0 * h)
            } else {
                (at(i, j, k + 1) - at(i, j, k - 1)) / (2.0 * h)
            };
            out[grid.node_index(i, j)] = d;
        }
    }
    out
}

/// `φ_i = X_i u` at every node.
pub fn horizontal_gradient(s: &CCStructure, u: &GridFunction) -> Result<HorizontalField> {
    s.check_grid(&u.grid)?;
    let grid = u.grid;
    let samples = s.sample_nodes(&grid)?;
    let ux = axis_derivative(&grid, &u.values, true);
    let uy = axis_derivative(&grid, &u.values, false);
    let phi = (0..s.m())
        .map(|i| {
            (0..grid.node_count())
                .map(|node| {
                    let a = samples.at(node, i);
                    a[0] * ux[node] + a[1] * uy[node]
                })
                .collect()
        })
        .collect();
    Ok(HorizontalField { grid, phi })
}

/// `div_ω V = ρ⁻¹ [∂x(ρ Σ φ_i a_i1) + ∂y(ρ Σ φ_i a_i2)]` at every node.
pub fn divergence(s: &CCStructure, v: &HorizontalField) -> Result<GridFunction> {
    s.check_grid(&v.grid)?;
    if v.m() != s.m() {
        return Err(Error::DimensionMismatch { left: v.m(), right: s.m() });
    }
    let grid = v.grid;
    let samples = s.sample_nodes(&grid)?;
    let n = grid.node_count();
    let mut fx = vec![0.0; n];
    let mut fy = vec![0.0; n];
    for node in 0..n {
        let rho = samples.density[node];
        let (mut sx, mut sy) = (0.0, 0.0);
        for i in 0..s.m() {
            let a = samples.at(node, i);
            sx += v.phi[i][node] * a[0];
            sy += v.phi[i][node] * a[1];
        }
        fx[node] = rho * sx;
        fy[node] = rho * sy;
    }
    let dfx = axis_derivative(&grid, &fx, true);
    let dfy = axis_derivative(&grid, &fy, false);
    let values = (0..n).map(|node| (dfx[node] + dfy[node]) / samples.density[node]).collect();
    Ok(GridFunction { grid, values })
}

/// Pointwise sub-Laplacian `div_ω(∇_H u)`.
pub fn sub_laplacian_apply(s: &CCStructure, u: &GridFunction) -> Result<GridFunction> {
    let grad = horizontal_gradient(s, u)?;
    divergence(s, &grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_grid;

    fn grushin_grid(nx: usize, ny: usize) -> (CCStructure, Grid2D) {
        let s = builtin_grushin_cylinder();
        let g = build_grid(s.chart, nx, ny).unwrap();
        (s, g)
    }

    #[test]
    fn grushin_builtin_fields() {
        let s = builtin_grushin_cylinder();
        assert_eq!(s.m(), 2);
        assert!(s.chart.periodic_y && !s.chart.periodic_x);
        assert_eq!(s.field_at(1, 0.5, 1.0), [0.0, 0.5]);
        assert_eq!(s.field_at(0, 0.5, 1.0), [1.0, 0.0]);
        // rank drops on x = 0
        assert_eq!(s.field_at(1, 0.0, 2.0), [0.0, 0.0]);
        for &(x, y) in &[(0.0, 0.0), (0.3, 5.0), (1.0, 6.0)] {
            assert_eq!(s.density_at(x, y), 1.0);
        }
    }

    #[test]
    fn chart_wraps_periodic_axis_only() {
        let s = builtin_grushin_cylinder();
        let (x, y) = s.chart.wrap(1.5, 2.0 * PI + 0.25);
        assert_eq!(x, 1.5);
        assert!((y - 0.25).abs() < 1e-12);
        assert!(Interval::new(1.0, 1.0).is_err());
    }

    #[test]
    fn euclidean_gradient_of_linear_and_bilinear() {
        let s = builtin_euclidean((0.0, 1.0), (0.0, 1.0)).unwrap();
        let g = build_grid(s.chart, 11, 9).unwrap();
        let grad = horizontal_gradient(&s, &GridFunction::from_fn(g, |x, _| x)).unwrap();
        for node in 0..g.node_count() {
            assert!((grad.phi[0][node] - 1.0).abs() < 1e-12);
            assert!(grad.phi[1][node].abs() < 1e-12);
        }
        let grad = horizontal_gradient(&s, &GridFunction::from_fn(g, |x, y| x * y)).unwrap();
        for node in 0..g.node_count() {
            let (x, y) = g.node_coords(node);
            assert!((grad.phi[0][node] - y).abs() < 1e-12);
            assert!((grad.phi[1][node] - x).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_of_constant_is_exactly_zero() {
        let (s, g) = grushin_grid(9, 16);
        let grad = horizontal_gradient(&s, &GridFunction::from_fn(g, |_, _| 3.25)).unwrap();
        assert!(grad.phi.iter().flatten().all(|&v| v == 0.0));
        let lap = sub_laplacian_apply(&s, &GridFunction::from_fn(g, |_, _| -1.5)).unwrap();
        assert!(lap.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grushin_gradient_of_x_and_sin_y() {
        let (s, g) = grushin_grid(33, 64);
        let grad = horizontal_gradient(&s, &GridFunction::from_fn(g, |x, _| x)).unwrap();
        assert!(grad.phi[0].iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(grad.phi[1].iter().all(|v| v.abs() < 1e-12));

        // symbolic: X1 sin y = 0, X2 sin y = x cos y; centered error is x h²/6 |cos y|
        let grad = horizontal_gradient(&s, &GridFunction::from_fn(g, |_, y| y.sin())).unwrap();
        let bound = g.hy * g.hy / 6.0 * 1.0001;
        for node in 0..g.node_count() {
            let (x, y) = g.node_coords(node);
            assert!(grad.phi[0][node].abs() < 1e-12);
            assert!((grad.phi[1][node] - x * y.cos()).abs() <= bound);
        }
    }

    #[test]
    fn divergence_examples() {
        let (s, g) = grushin_grid(17, 32);
        let v = HorizontalField::from_fns(g, &[&|x, _| x, &|_, _| 0.0]);
        let div = divergence(&s, &v).unwrap();
        assert!(div.values.iter().all(|d| (d - 1.0).abs() < 1e-12));

        let zero = HorizontalField::from_fns(g, &[&|_, _| 0.0, &|_, _| 0.0]);
        assert!(divergence(&s, &zero).unwrap().values.iter().all(|&d| d == 0.0));

        let e = builtin_euclidean((0.0, 1.0), (0.0, 2.0)).unwrap();
        let ge = build_grid(e.chart, 7, 9).unwrap();
        let v = HorizontalField::from_fns(ge, &[&|x, _| x, &|_, y| y]);
        assert!(divergence(&e, &v).unwrap().values.iter().all(|d| (d - 2.0).abs() < 1e-12));
    }

    #[test]
    fn divergence_is_linear() {
        let (s, g) = grushin_grid(13, 24);
        let v1 = HorizontalField::from_fns(g, &[&|x, y| x * y.sin(), &|x, _| x * x]);
        let v2 = HorizontalField::from_fns(g, &[&|_, y| y.cos(), &|x, y| (x + y).exp()]);
        let (a, b) = (0.75, -2.5);
        let combo = HorizontalField {
            grid: g,
            phi: (0..2)
                .map(|i| (0..g.node_count()).map(|n| a * v1.phi[i][n] + b * v2.phi[i][n]).collect())
                .collect(),
        };
        let d1 = divergence(&s, &v1).unwrap().values;
        let d2 = divergence(&s, &v2).unwrap().values;
        let dc = divergence(&s, &combo).unwrap().values;
        for n in 0..g.node_count() {
            let expected = a * d1[n] + b * d2[n];
            assert!((dc[n] - expected).abs() <= 1e-12 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn sub_laplacian_examples() {
        let (s, g) = grushin_grid(129, 128);
        let lap = sub_laplacian_apply(&s, &GridFunction::from_fn(g, |x, _| (PI * x).sin())).unwrap();
        let lap_c = sub_laplacian_apply(&s, &GridFunction::from_fn(g, |_, y| y.cos())).unwrap();
        for i in 2..g.nx - 2 {
            for j in 0..g.ny {
                let (x, y) = g.node_coords(g.node_index(i, j));
                let exact = -PI * PI * (PI * x).sin();
                assert!((lap.value(i, j) - exact).abs() < 2e-3, "{} vs {exact}", lap.value(i, j));
                let exact_c = -x * x * y.cos();
                assert!((lap_c.value(i, j) - exact_c).abs() < 1e-3);
            }
        }
    }

    #[test]
    fn euclidean_laplacian_of_quadratic() {
        let s = builtin_euclidean((0.0, 1.0), (0.0, 1.0)).unwrap();
        let g = build_grid(s.chart, 21, 21).unwrap();
        let lap = sub_laplacian_apply(&s, &GridFunction::from_fn(g, |x, y| x * x + y * y)).unwrap();
        for i in 2..19 {
            for j in 2..19 {
                assert!((lap.value(i, j) - 4.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn grushin_sub_laplacian_converges_at_second_order() {
        let s = builtin_grushin_cylinder();
        let u = |x: f64, y: f64| x.powi(4) * y.sin() + x * x * (2.0 * y).cos();
        let exact = |x: f64, y: f64| {
            let uxx = 12.0 * x * x * y.sin() + 2.0 * (2.0 * y).cos();
            let uyy = -x.powi(4) * y.sin() - 4.0 * x * x * (2.0 * y).cos();
            uxx + x * x * uyy
        };
        // (0.5, π/2) is a node on every grid below
        let mut errors = Vec::new();
        for level in 0..4 {
            let nx = 8 * (1 << level) + 1;
            let ny = 16 * (1 << level);
            let g = build_grid(s.chart, nx, ny).unwrap();
            let lap = sub_laplacian_apply(&s, &GridFunction::from_fn(g, u)).unwrap();
            let v = lap.value((nx - 1) / 2, ny / 4);
            errors.push((v - exact(0.5, PI / 2.0)).abs());
        }
        for w in errors.windows(2) {
            let ratio = w[0] / w[1];
            assert!((3.5..=4.5).contains(&ratio), "ratio {ratio} from {errors:?}");
        }
    }

    #[test]
    fn gradient_norm_is_independent_of_generating_family() {
        let theta = |x: f64, y: f64| 0.7 * x + 1.3 * y * y;
        let chart = Chart2D::rectangle((0.0, 1.0), (0.0, 1.0)).unwrap();
        let rotated = CCStructure::new(
            "rotated",
            chart,
            vec![
                VectorField::new(move |x, y| theta(x, y).cos(), move |x, y| theta(x, y).sin()),
                VectorField::new(move |x, y| -theta(x, y).sin(), move |x, y| theta(x, y).cos()),
            ],
            |_, _| 1.0,
        )
        .unwrap();
        let flat = builtin_euclidean((0.0, 1.0), (0.0, 1.0)).unwrap();
        let g = build_grid(chart, 17, 19).unwrap();
        let u = GridFunction::from_fn(g, |x, y| (3.0 * x).sin() * y.exp());
        let a = horizontal_gradient(&flat, &u).unwrap().squared_length();
        let b = horizontal_gradient(&rotated, &u).unwrap().squared_length();
        for (p, q) in a.iter().zip(&b) {
            assert!((p - q).abs() <= 1e-12 * (1.0 + p.abs()));
        }
    }

    #[test]
    fn grid_chart_mismatch_is_rejected() {
        let s = builtin_grushin_cylinder();
        let e = builtin_euclidean((0.0, 1.0), (0.0, 1.0)).unwrap();
        let g = build_grid(e.chart, 5, 5).unwrap();
        let u = GridFunction::from_fn(g, |x, _| x);
        assert!(matches!(horizontal_gradient(&s, &u), Err(Error::GridMismatch)));
    }

    #[test]
    fn bad_density_is_reported() {
        let chart = Chart2D::rectangle((0.0, 1.0), (0.0, 1.0)).unwrap();
        let s = CCStructure::new(
            "bad",
            chart,
            vec![VectorField::new(|_, _| 1.0, |_, _| 0.0)],
            |x, _| x - 0.5,
        )
        .unwrap();
        let g = build_grid(chart, 5, 5).unwrap();
        let u = GridFunction::from_fn(g, |x, _| x);
        assert!(matches!(horizontal_gradient(&s, &u), Err(Error::NonPositiveDensity { .. })));
    }
}
