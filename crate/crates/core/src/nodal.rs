//! Nodal domains of grid functions and Courant-type checks.
//!
//! Nodes with `|u| ≤ rel_threshold · ‖u‖_∞` form the zero band. The other
//! nodes are grouped by sign and 4-connectivity (wrapping across periodic
//! axes).

use std::io::{self, Write};

use serde::Serialize;

use crate::discretization::{AssembledForms, Grid2D};
use crate::eigensolver::Eigenpairs;
use crate::{Error, Result};

pub const DEFAULT_REL_THRESHOLD: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self { parent: (0..n).collect(), size: vec![1; n] }
    }

    pub fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] { (ra, rb) } else { (rb, ra) };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        true
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NodalDecomposition {
    /// 0 for the zero band, `+id` / `-id` for positive / negative domains.
    pub labels: Vec<i32>,
    pub n_domains: usize,
    /// Absolute threshold used for the zero band.
    pub threshold: f64,
    pub rel_threshold: f64,
}

/// Nodal domains of a full-grid vector.
pub fn nodal_domains(g: &Grid2D, u: &[f64], rel_threshold: f64) -> Result<NodalDecomposition> {
    if u.is_empty() {
        return Err(Error::InvalidArgument("empty function".into()));
    }
    if u.len() != g.node_count() {
        return Err(Error::LengthMismatch { expected: g.node_count(), got: u.len() });
    }
    if !(0.0..=0.1).contains(&rel_threshold) {
        return Err(Error::InvalidArgument(format!("rel_threshold {rel_threshold} outside [0, 0.1]")));
    }
    let sup = u.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let threshold = rel_threshold * sup;
    let sign = |v: f64| -> i8 {
        if v.abs() <= threshold {
            0
        } else if v > 0.0 {
            1
        } else {
            -1
        }
    };
    let signs: Vec<i8> = u.iter().map(|&v| sign(v)).collect();

    let mut uf = UnionFind::new(u.len());
    for j in 0..g.ny {
        for i in 0..g.nx {
            let p = g.node_index(i, j);
            if signs[p] == 0 {
                continue;
            }
            let right = if i + 1 < g.nx { Some(i + 1) } else if g.chart.periodic_x { Some(0) } else { None };
            let up = if j + 1 < g.ny { Some(j + 1) } else if g.chart.periodic_y { Some(0) } else { None };
            if let Some(i1) = right {
                let q = g.node_index(i1, j);
                if signs[q] == signs[p] {
                    uf.union(p, q);
                }
            }
            if let Some(j1) = up {
                let q = g.node_index(i, j1);
                if signs[q] == signs[p] {
                    uf.union(p, q);
                }
            }
        }
    }

    let mut root_label = vec![0i32; u.len()];
    let mut labels = vec![0i32; u.len()];
    let mut next = 0i32;
    for p in 0..u.len() {
        if signs[p] == 0 {
            continue;
        }
        let r = uf.find(p);
        if root_label[r] == 0 {
            next += 1;
            root_label[r] = next;
        }
        labels[p] = root_label[r] * i32::from(signs[p]);
    }
    Ok(NodalDecomposition { labels, n_domains: next as usize, threshold, rel_threshold })
}

#[derive(Clone, Debug, Serialize)]
pub struct CourantEntry {
    pub index: usize,
    pub lambda: f64,
    /// Highest index of the eigenvalue cluster containing this one.
    pub bound: usize,
    pub n_domains: usize,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CourantReport {
    pub entries: Vec<CourantEntry>,
    pub violations: Vec<usize>,
    pub rel_threshold: f64,
    pub ok: bool,
}

/// Compare nodal counts with the eigenvalue index (cluster top for
/// numerically repeated eigenvalues). Violations are reported, not raised.
pub fn check_courant(e: &Eigenpairs, f: &AssembledForms, rel_threshold: f64) -> Result<CourantReport> {
    let k = e.k();
    let mut bounds = vec![0usize; k];
    let mut start = 0;
    while start < k {
        let mut end = start;
        while end + 1 < k {
            let gap_tol = 1e-6 * e.lambdas[end].abs().max(1.0);
            if (e.lambdas[end + 1] - e.lambdas[end]).abs() <= gap_tol {
                end += 1;
            } else {
                break;
            }
        }
        for b in &mut bounds[start..=end] {
            *b = end + 1;
        }
        start = end + 1;
    }

    let mut entries = Vec::with_capacity(k);
    for i in 0..k {
        let full = f.expand(&e.vectors[i]);
        let dec = nodal_domains(&f.grid, &full, rel_threshold)?;
        entries.push(CourantEntry {
            index: i + 1,
            lambda: e.lambdas[i],
            bound: bounds[i],
            n_domains: dec.n_domains,
            ok: dec.n_domains <= bounds[i],
        });
    }
    let violations: Vec<usize> = entries.iter().filter(|e| !e.ok).map(|e| e.index).collect();
    Ok(CourantReport { ok: violations.is_empty(), entries, violations, rel_threshold })
}

fn write_pgm<W: Write>(g: &Grid2D, mut w: W, level: impl Fn(usize) -> u8) -> io::Result<()> {
    write!(w, "P5\n{} {}\n255\n", g.nx, g.ny)?;
    let mut row = vec![0u8; g.nx];
    // top row of the image is the largest y
    for j in (0..g.ny).rev() {
        for (i, px) in row.iter_mut().enumerate() {
            *px = level(g.node_index(i, j));
        }
        w.write_all(&row)?;
    }
    Ok(())
}

/// Binary 8-bit PGM with one gray level per domain; the zero band is black.
pub fn write_labels_pgm<W: Write>(g: &Grid2D, dec: &NodalDecomposition, w: W) -> io::Result<()> {
    let n = dec.n_domains.max(1) as f64;
    write_pgm(g, w, |node| {
        let l = dec.labels[node].unsigned_abs();
        if l == 0 {
            0
        } else {
            (40.0 + 215.0 * (l as f64 - 1.0) / (n - 1.0).max(1.0)).round() as u8
        }
    })
}

/// Binary 8-bit PGM heatmap of a full-grid vector, scaled to its range.
pub fn write_heatmap_pgm<W: Write>(g: &Grid2D, values: &[f64], w: W) -> io::Result<()> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    write_pgm(g, w, |node| (255.0 * (values[node] - lo) / span).round().clamp(0.0, 255.0) as u8)
}
