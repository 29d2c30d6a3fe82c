//! Grids, boundary conditions and assembly of the discrete quadratic forms.
//!
//! The stiffness form is `A[u, v] = Σ_cells Σ_q w_q ρ(q) Σ_i (X_i u)(X_i v)(q)`
//! where `u` is the bilinear interpolant of the nodal values and `q` runs
//! over the 2×2 Gauss points of each cell. The mass form is lumped at the
//! nodes. Dirichlet nodes are eliminated; Neumann conditions are natural and
//! need no treatment.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{CCStructure, Chart2D};
use crate::sparse::CsrMatrix;
use crate::{Error, Result};

/// Uniform tensor grid on a chart. Nodes are indexed `i + nx * j`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid2D {
    pub nx: usize,
    pub ny: usize,
    pub chart: Chart2D,
    pub hx: f64,
    pub hy: f64,
}

pub fn build_grid(chart: Chart2D, nx: usize, ny: usize) -> Result<Grid2D> {
    if nx < 3 || ny < 3 {
        return Err(Error::GridTooSmall { nx, ny });
    }
    let spacing = |len: f64, n: usize, periodic: bool| if periodic { len / n as f64 } else { len / (n - 1) as f64 };
    Ok(Grid2D {
        nx,
        ny,
        chart,
        hx: spacing(chart.x_range.length(), nx, chart.periodic_x),
        hy: spacing(chart.y_range.length(), ny, chart.periodic_y),
    })
}

impl Grid2D {
    pub fn node_count(&self) -> usize {
        self.nx * self.ny
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i + self.nx * j
    }

    pub fn node_ij(&self, node: usize) -> (usize, usize) {
        (node % self.nx, node / self.nx)
    }

    pub fn x(&self, i: usize) -> f64 {
        self.chart.x_range.lo + i as f64 * self.hx
    }

    pub fn y(&self, j: usize) -> f64 {
        self.chart.y_range.lo + j as f64 * self.hy
    }

    pub fn node_coords(&self, node: usize) -> (f64, f64) {
        let (i, j) = self.node_ij(node);
        (self.x(i), self.y(j))
    }

    /// Cells per axis; a periodic axis has a wrap-around cell.
    pub fn cell_dims(&self) -> (usize, usize) {
        let cx = if self.chart.periodic_x { self.nx } else { self.nx - 1 };
        let cy = if self.chart.periodic_y { self.ny } else { self.ny - 1 };
        (cx, cy)
    }

    pub fn cell_count(&self) -> usize {
        let (cx, cy) = self.cell_dims();
        cx * cy
    }

    pub fn cell_index(&self, ci: usize, cj: usize) -> usize {
        ci + self.cell_dims().0 * cj
    }

    /// Corner node indices of cell `(ci, cj)`: `[(0,0), (1,0), (0,1), (1,1)]`.
    pub fn cell_corners(&self, ci: usize, cj: usize) -> [usize; 4] {
        let i1 = (ci + 1) % self.nx;
        let j1 = (cj + 1) % self.ny;
        [
            self.node_index(ci, cj),
            self.node_index(i1, cj),
            self.node_index(ci, j1),
            self.node_index(i1, j1),
        ]
    }

    /// Chart coordinates of the lower-left corner (unwrapped).
    pub fn cell_origin(&self, ci: usize, cj: usize) -> (f64, f64) {
        (self.x(ci), self.y(cj))
    }

    pub fn cell_center(&self, ci: usize, cj: usize) -> (f64, f64) {
        (self.x(ci) + 0.5 * self.hx, self.y(cj) + 0.5 * self.hy)
    }

    /// Whether the node sits on the boundary of a non-periodic axis.
    pub fn is_boundary_node(&self, node: usize) -> bool {
        let (i, j) = self.node_ij(node);
        (!self.chart.periodic_x && (i == 0 || i == self.nx - 1))
            || (!self.chart.periodic_y && (j == 0 || j == self.ny - 1))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Edge {
    XMin,
    XMax,
    YMin,
    YMax,
}

impl Edge {
    fn on_x_axis(self) -> bool {
        matches!(self, Edge::XMin | Edge::XMax)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    Dirichlet,
    Neumann,
}

/// Condition on the closed parameter interval `[from, to]` of an edge. The
/// parameter is `y` on the `x_min`/`x_max` edges and `x` on the others.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundarySegment {
    pub edge: Edge,
    pub from: f64,
    pub to: f64,
    pub condition: Condition,
}

/// Piecewise boundary conditions. Uncovered boundary nodes are Neumann; a
/// node in the closure of any Dirichlet segment is Dirichlet.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundarySpec {
    pub segments: Vec<BoundarySegment>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Neumann,
    Dirichlet,
    Mixed,
}

impl BoundarySpec {
    pub fn all_neumann() -> Self {
        Self::default()
    }

    /// Dirichlet on every non-periodic edge.
    pub fn all_dirichlet(chart: &Chart2D) -> Self {
        let mut segments = Vec::new();
        if !chart.periodic_x {
            for edge in [Edge::XMin, Edge::XMax] {
                segments.push(BoundarySegment {
                    edge,
                    from: chart.y_range.lo,
                    to: chart.y_range.hi,
                    condition: Condition::Dirichlet,
                });
            }
        }
        if !chart.periodic_y {
            for edge in [Edge::YMin, Edge::YMax] {
                segments.push(BoundarySegment {
                    edge,
                    from: chart.x_range.lo,
                    to: chart.x_range.hi,
                    condition: Condition::Dirichlet,
                });
            }
        }
        Self { segments }
    }

    pub fn with_segment(mut self, segment: BoundarySegment) -> Self {
        self.segments.push(segment);
        self
    }

    pub fn validate(&self, chart: &Chart2D) -> Result<()> {
        for seg in &self.segments {
            let (periodic, param) = if seg.edge.on_x_axis() {
                (chart.periodic_x, chart.y_range)
            } else {
                (chart.periodic_y, chart.x_range)
            };
            if periodic {
                return Err(Error::InvalidBoundary(format!("{:?} lies on a periodic axis", seg.edge)));
            }
            if !(seg.from.is_finite() && seg.to.is_finite()) || seg.from > seg.to {
                return Err(Error::InvalidBoundary(format!("bad interval [{}, {}]", seg.from, seg.to)));
            }
            let slack = 1e-12 * param.length();
            if !param.contains(seg.from, slack) || !param.contains(seg.to, slack) {
                return Err(Error::InvalidBoundary(format!(
                    "interval [{}, {}] exceeds edge range [{}, {}]",
                    seg.from, seg.to, param.lo, param.hi
                )));
            }
        }
        Ok(())
    }

    /// Per-node Dirichlet flag.
    pub fn dirichlet_nodes(&self, grid: &Grid2D) -> Result<Vec<bool>> {
        self.validate(&grid.chart)?;
        let mut flags = vec![false; grid.node_count()];
        for seg in self.segments.iter().filter(|s| s.condition == Condition::Dirichlet) {
            let tol = 1e-9 * grid.hx.min(grid.hy);
            let nodes: Vec<(usize, usize)> = match seg.edge {
                Edge::XMin => (0..grid.ny).map(|j| (0, j)).collect(),
                Edge::XMax => (0..grid.ny).map(|j| (grid.nx - 1, j)).collect(),
                Edge::YMin => (0..grid.nx).map(|i| (i, 0)).collect(),
                Edge::YMax => (0..grid.nx).map(|i| (i, grid.ny - 1)).collect(),
            };
            for (i, j) in nodes {
                let param = if seg.edge.on_x_axis() { grid.y(j) } else { grid.x(i) };
                if param >= seg.from - tol && param <= seg.to + tol {
                    flags[grid.node_index(i, j)] = true;
                }
            }
        }
        Ok(flags)
    }

    /// Classify against a grid: no Dirichlet node, only Dirichlet boundary
    /// nodes, or a mix.
    pub fn kind(&self, grid: &Grid2D) -> Result<BoundaryKind> {
        let flags = self.dirichlet_nodes(grid)?;
        let boundary: Vec<bool> = (0..grid.node_count())
            .filter(|&n| grid.is_boundary_node(n))
            .map(|n| flags[n])
            .collect();
        Ok(if boundary.iter().all(|&d| !d) {
            BoundaryKind::Neumann
        } else if boundary.iter().all(|&d| d) {
            BoundaryKind::Dirichlet
        } else {
            BoundaryKind::Mixed
        })
    }
}

/// Discrete stiffness and lumped mass over the active (non-Dirichlet) nodes.
#[derive(Clone, Debug)]
pub struct AssembledForms {
    pub grid: Grid2D,
    pub a: CsrMatrix,
    pub mass: Vec<f64>,
    /// Grid node of each matrix index.
    pub active_nodes: Vec<usize>,
    /// Matrix index of each grid node, `None` for Dirichlet nodes.
    pub node_to_active: Vec<Option<usize>>,
}

impl AssembledForms {
    pub fn active_count(&self) -> usize {
        self.active_nodes.len()
    }

    pub fn is_dirichlet_node(&self, node: usize) -> bool {
        self.node_to_active[node].is_none()
    }

    /// Extend an active-node vector to the full grid with zeros at Dirichlet nodes.
    pub fn expand(&self, u: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.grid.node_count()];
        for (k, &node) in self.active_nodes.iter().enumerate() {
            full[node] = u[k];
        }
        full
    }

    /// Restrict a full-grid vector to the active nodes.
    pub fn restrict(&self, full: &[f64]) -> Vec<f64> {
        self.active_nodes.iter().map(|&node| full[node]).collect()
    }

    /// Sample a function at the active nodes.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.active_nodes
            .iter()
            .map(|&node| {
                let (x, y) = self.grid.node_coords(node);
                f(x, y)
            })
            .collect()
    }

    /// `uᵀ M v` for the lumped mass.
    pub fn mass_inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.mass.iter().zip(u).zip(v).map(|((m, a), b)| m * a * b).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }
}

const GAUSS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Assemble the stiffness and mass forms.
pub fn assemble(s: &CCStructure, g: &Grid2D, bc: &BoundarySpec) -> Result<AssembledForms> {
    if g.chart != s.chart {
        return Err(Error::GridMismatch);
    }
    let dirichlet = bc.dirichlet_nodes(g)?;
    let mut node_to_active = vec![None; g.node_count()];
    let mut active_nodes = Vec::new();
    for node in 0..g.node_count() {
        if !dirichlet[node] {
            node_to_active[node] = Some(active_nodes.len());
            active_nodes.push(node);
        }
    }
    if active_nodes.is_empty() {
        return Err(Error::InvalidBoundary("every node is Dirichlet".into()));
    }

    let (cx, cy) = g.cell_dims();
    let m = s.m();
    let weight = 0.25 * g.hx * g.hy;

    // Local 4×4 matrices per cell, in cell order.
    let locals: Vec<[[f64; 4]; 4]> = (0..cx * cy)
        .into_par_iter()
        .map(|cell| {
            let (ci, cj) = (cell % cx, cell / cx);
            let (x0, y0) = g.cell_origin(ci, cj);
            let mut k = [[0.0; 4]; 4];
            let mut coeffs = Vec::with_capacity(m);
            for &eta in &GAUSS {
                for &xi in &GAUSS {
                    let (x, y) = (x0 + xi * g.hx, y0 + eta * g.hy);
                    s.checked_fields_at(x, y, &mut coeffs)?;
                    let rho = s.checked_density_at(x, y)?;
                    let dx = [-(1.0 - eta) / g.hx, (1.0 - eta) / g.hx, -eta / g.hx, eta / g.hx];
                    let dy = [-(1.0 - xi) / g.hy, -xi / g.hy, (1.0 - xi) / g.hy, xi / g.hy];
                    for a in &coeffs {
                        let gi: [f64; 4] = std::array::from_fn(|c| a[0] * dx[c] + a[1] * dy[c]);
                        for r in 0..4 {
                            for c in r..4 {
                                k[r][c] += weight * rho * gi[r] * gi[c];
                            }
                        }
                    }
                }
            }
            for r in 1..4 {
                for c in 0..r {
                    k[r][c] = k[c][r];
                }
            }
            Ok(k)
        })
        .collect::<Result<_>>()?;

    let mut triplets = Vec::with_capacity(16 * cx * cy);
    for (cell, k) in locals.iter().enumerate() {
        let corners = g.cell_corners(cell % cx, cell / cx);
        for r in 0..4 {
            let Some(ar) = node_to_active[corners[r]] else { continue };
            for c in 0..4 {
                let Some(ac) = node_to_active[corners[c]] else { continue };
                triplets.push((ar, ac, k[r][c]));
            }
        }
    }
    let a = CsrMatrix::from_triplets(active_nodes.len(), triplets);

    let mut node_mass = vec![0.0; g.node_count()];
    for cj in 0..cy {
        for ci in 0..cx {
            for node in g.cell_corners(ci, cj) {
                node_mass[node] += weight;
            }
        }
    }
    let mut mass = Vec::with_capacity(active_nodes.len());
    for &node in &active_nodes {
        let (x, y) = g.node_coords(node);
        mass.push(s.checked_density_at(x, y)? * node_mass[node]);
    }

    Ok(AssembledForms { grid: *g, a, mass, active_nodes, node_to_active })
}

/// `uᵀAu / uᵀMu`.
pub fn rayleigh_quotient(f: &AssembledForms, u: &[f64]) -> Result<f64> {
    if u.len() != f.active_count() {
        return Err(Error::LengthMismatch { expected: f.active_count(), got: u.len() });
    }
    let denom = f.mass_inner(u, u);
    if denom == 0.0 {
        return Err(Error::ZeroVector);
    }
    Ok(f.a.quadratic_form(u) / denom)
}
