//! Separated spectrum of the Grushin cylinder.
//!
//! With `u(x, y) = v(x) e^{iny}` the eigenproblem reduces to
//! `v'' + (λ − n²x²) v = 0` on `(0, 1)`, solved here by shooting from `x = 0`
//! and bisecting the boundary mismatch at `x = 1`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::discretization::Condition;
use crate::eigensolver::Eigenpairs;
use crate::ode::{integrate, OdeOptions};
use crate::{Error, Result};

pub const DEFAULT_WINDOW: (f64, f64) = (0.0, 120.0);
pub const DEFAULT_ODE_TOL: f64 = 1e-10;
pub const SCAN_STEP: f64 = 0.05;
pub const ROOT_TOL: f64 = 1e-8;
/// Relative agreement expected between the two copies of a doublet.
pub const DOUBLET_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModeProblem {
    pub n: u32,
    pub bc: Condition,
    pub lambda_window: (f64, f64),
    pub ode_tol: f64,
}

impl ModeProblem {
    pub fn new(n: u32, bc: Condition) -> Self {
        Self { n, bc, lambda_window: DEFAULT_WINDOW, ode_tol: DEFAULT_ODE_TOL }
    }

    pub fn with_window(mut self, lo: f64, hi: f64) -> Result<Self> {
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(Error::InvalidArgument(format!("eigenvalue window [{lo}, {hi}] must be nonempty with lo ≥ 0")));
        }
        self.lambda_window = (lo, hi);
        Ok(self)
    }

    fn initial_state(&self) -> [f64; 2] {
        match self.bc {
            Condition::Neumann => [1.0, 0.0],
            Condition::Dirichlet => [0.0, 1.0],
        }
    }

    fn rhs(&self, lambda: f64) -> impl Fn(f64, &[f64; 2]) -> [f64; 2] {
        let n2 = f64::from(self.n).powi(2);
        move |x, y| [y[1], -(lambda - n2 * x * x) * y[0]]
    }
}

/// Boundary mismatch at `x = 1`: `v'(1)` for Neumann, `v(1)` for Dirichlet.
pub fn shoot(p: &ModeProblem, lambda: f64) -> Result<f64> {
    let (lo, hi) = p.lambda_window;
    if !(lambda >= lo && lambda <= hi) {
        return Err(Error::InvalidArgument(format!("λ = {lambda} outside the window [{lo}, {hi}]")));
    }
    let end = integrate(p.rhs(lambda), 0.0, 1.0, p.initial_state(), &OdeOptions::with_tol(p.ode_tol), |_, _| {})?;
    Ok(match p.bc {
        Condition::Neumann => end[1],
        Condition::Dirichlet => end[0],
    })
}

/// `(x, v(x))` at every accepted integrator step.
pub fn mode_profile(p: &ModeProblem, lambda: f64) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    integrate(p.rhs(lambda), 0.0, 1.0, p.initial_state(), &OdeOptions::with_tol(p.ode_tol), |x, y| {
        out.push((x, y[0]))
    })?;
    Ok(out)
}

/// Sign changes of `v` in the open interval, ignoring values at the
/// roundoff level of the profile.
pub fn sturm_zero_count(p: &ModeProblem, lambda: f64) -> Result<usize> {
    let prof = mode_profile(p, lambda)?;
    let sup = prof.iter().fold(0.0f64, |m, (_, v)| m.max(v.abs()));
    let mut last = 0.0f64;
    let mut count = 0;
    for &(_, v) in &prof {
        if v.abs() <= 1e-6 * sup {
            continue;
        }
        if last != 0.0 && v.signum() != last.signum() {
            count += 1;
        }
        last = v;
    }
    Ok(count)
}

fn bisect(p: &ModeProblem, mut a: f64, mut fa: f64, mut b: f64, fb: f64) -> Result<f64> {
    assert!(fa.signum() != fb.signum(), "bracket [{a}, {b}] has no sign change");
    while b - a > ROOT_TOL {
        let m = 0.5 * (a + b);
        let fm = shoot(p, m)?;
        if fm == 0.0 {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// The first `count` eigenvalues in the window, ascending.
///
/// The window is scanned with step `0.05`; a local minimum of `|mismatch|`
/// without a sign change triggers a 16-fold finer rescan of its
/// neighbourhood, so nearly touching root pairs are not skipped.
pub fn find_eigenvalues(p: &ModeProblem, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::InvalidArgument("count must be at least 1".into()));
    }
    let (lo, hi) = p.lambda_window;
    let mut roots = Vec::with_capacity(count);
    let mut start = lo;
    if p.n == 0 && p.bc == Condition::Neumann && lo == 0.0 {
        // constants: v ≡ 1 solves the problem at λ = 0
        roots.push(0.0);
        start = SCAN_STEP.min(hi);
    }
    if roots.len() >= count {
        return Ok(roots);
    }

    let mut prev = (start, shoot(p, start)?);
    if prev.1 == 0.0 && start > 0.0 {
        roots.push(start);
    }
    let mut before: Option<(f64, f64)> = None;
    let mut k = 1usize;
    while roots.len() < count {
        let lam = (start + k as f64 * SCAN_STEP).min(hi);
        if lam <= prev.0 {
            break;
        }
        let cur = (lam, shoot(p, lam)?);
        if cur.1 == 0.0 {
            roots.push(lam);
        } else if prev.1 != 0.0 && prev.1.signum() != cur.1.signum() {
            roots.push(bisect(p, prev.0, prev.1, cur.0, cur.1)?);
        } else if let Some(b) = before {
            let dip = prev.1.abs() < b.1.abs() && prev.1.abs() < cur.1.abs();
            if dip && b.1.signum() == prev.1.signum() && prev.1.signum() == cur.1.signum() {
                roots.extend(refine(p, b, cur)?);
            }
        }
        before = Some(prev);
        prev = cur;
        k += 1;
    }
    roots.truncate(count);
    if roots.len() < count {
        return Err(Error::WindowExhausted { found: roots, requested: count });
    }
    Ok(roots)
}

fn refine(p: &ModeProblem, a: (f64, f64), b: (f64, f64)) -> Result<Vec<f64>> {
    const SUB: usize = 16;
    let mut found = Vec::new();
    let mut prev = a;
    for i in 1..=SUB {
        let lam = a.0 + (b.0 - a.0) * i as f64 / SUB as f64;
        let cur = (lam, shoot(p, lam)?);
        if prev.1.signum() != cur.1.signum() && prev.1 != 0.0 && cur.1 != 0.0 {
            found.push(bisect(p, prev.0, prev.1, cur.0, cur.1)?);
        }
        prev = cur;
    }
    Ok(found)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModeEntry {
    pub n: u32,
    pub m: u32,
    pub lambda: f64,
    /// 1 for `n = 0`, 2 otherwise (`e^{±iny}`).
    pub multiplicity: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModeTable {
    pub bc: Condition,
    pub max_n: u32,
    pub max_m: u32,
    /// Ordered by `n`, then `m`.
    pub entries: Vec<ModeEntry>,
}

impl ModeTable {
    pub fn get(&self, n: u32, m: u32) -> Option<f64> {
        self.entries.iter().find(|e| e.n == n && e.m == m).map(|e| e.lambda)
    }

    /// Table values repeated by multiplicity, ascending.
    pub fn expanded(&self) -> Vec<ModeEntry> {
        let mut out: Vec<ModeEntry> =
            self.entries.iter().flat_map(|e| std::iter::repeat_n(*e, e.multiplicity as usize)).collect();
        out.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.n.cmp(&b.n)).then(a.m.cmp(&b.m)));
        out
    }

    /// CSV with header `n,m,lambda,multiplicity`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "n,m,lambda,multiplicity")?;
        for e in &self.entries {
            writeln!(w, "{},{},{},{}", e.n, e.m, e.lambda, e.multiplicity)?;
        }
        Ok(())
    }
}

/// `λ_{n,m}` for `n ≤ max_n`, `m ≤ max_m`, computed in parallel over `n`.
pub fn build_table(max_n: u32, max_m: u32, bc: Condition) -> Result<ModeTable> {
    let columns: Vec<Vec<f64>> = (0..=max_n)
        .into_par_iter()
        .map(|n| find_eigenvalues(&ModeProblem::new(n, bc), max_m as usize + 1))
        .collect::<Result<_>>()?;
    let mut entries = Vec::with_capacity(columns.len() * (max_m as usize + 1));
    for (n, col) in columns.iter().enumerate() {
        if col.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(format!("roots for n = {n} are not strictly increasing: {col:?}")));
        }
        for (m, &lambda) in col.iter().enumerate() {
            let n = n as u32;
            entries.push(ModeEntry { n, m: m as u32, lambda, multiplicity: if n == 0 { 1 } else { 2 } });
        }
    }
    Ok(ModeTable { bc, max_n, max_m, entries })
}

#[derive(Clone, Debug, Serialize)]
pub struct MatchEntry {
    pub index: usize,
    pub n: u32,
    pub m: u32,
    pub lambda_table: f64,
    pub lambda_2d: f64,
    /// `|Δ| / |λ_table|`, or `|Δ|` when the table value is zero.
    pub rel_error: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DoubletCheck {
    pub n: u32,
    pub m: u32,
    pub lambdas: [f64; 2],
    pub rel_split: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossValidation {
    pub entries: Vec<MatchEntry>,
    pub doublets: Vec<DoubletCheck>,
    pub max_rel_error: f64,
    /// Smallest eigenvalue the table cannot vouch for.
    pub completeness_bound: f64,
}

/// Match the table (with multiplicities) against 2D eigenvalues in order.
///
/// Fails unless the table provably contains the `k` smallest eigenvalues,
/// i.e. the `k`-th expanded value is below every unlisted mode.
pub fn cross_validate(t: &ModeTable, e: &Eigenpairs) -> Result<CrossValidation> {
    let k = e.k();
    if k == 0 {
        return Err(Error::InsufficientData("no eigenpairs to compare".into()));
    }
    let expanded = t.expanded();
    if expanded.len() < k {
        return Err(Error::InsufficientData(format!(
            "table holds {} eigenvalues with multiplicity, {k} requested",
            expanded.len()
        )));
    }
    let next_column = find_eigenvalues(&ModeProblem::new(t.max_n + 1, t.bc), 1)?[0];
    let column_tops = (0..=t.max_n).filter_map(|n| t.get(n, t.max_m));
    let completeness_bound = column_tops.fold(next_column, f64::min);
    let kth = expanded[k - 1].lambda;
    if kth > completeness_bound {
        return Err(Error::InsufficientData(format!(
            "table up to n = {}, m = {} does not cover the {k} smallest eigenvalues \
             (λ_{k} = {kth} exceeds {completeness_bound})",
            t.max_n, t.max_m
        )));
    }

    let entries: Vec<MatchEntry> = expanded
        .iter()
        .zip(&e.lambdas)
        .enumerate()
        .map(|(i, (te, &l2))| {
            let diff = (l2 - te.lambda).abs();
            MatchEntry {
                index: i + 1,
                n: te.n,
                m: te.m,
                lambda_table: te.lambda,
                lambda_2d: l2,
                rel_error: if te.lambda == 0.0 { diff } else { diff / te.lambda.abs() },
            }
        })
        .collect();
    let mut doublets = Vec::new();
    for w in entries.windows(2) {
        if w[0].n == w[1].n && w[0].m == w[1].m && w[0].n > 0 {
            let (a, b) = (w[0].lambda_2d, w[1].lambda_2d);
            let rel_split = (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
            doublets.push(DoubletCheck { n: w[0].n, m: w[0].m, lambdas: [a, b], rel_split, ok: rel_split <= DOUBLET_TOL });
        }
    }
    let max_rel_error = entries.iter().map(|m| m.rel_error).fold(0.0, f64::max);
    Ok(CrossValidation { entries, doublets, max_rel_error, completeness_bound })
}
