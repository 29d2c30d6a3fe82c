use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use ccspectra::carnot::{hausdorff_constant_heisenberg, homogeneous_dimension, unit_ball_volume, CarnotSpec};
use ccspectra::cheeger::{
    self, candidate_cuts_grushin, dirichlet_cheeger_upper, mfmc_certify, mixed_cheeger_upper, sweep_all_levels,
    verify_inequality, verify_with_certificate, CertificateMode, Cut, HSource, InequalityKind, InequalityReport,
};
use ccspectra::discretization::{assemble, build_grid, AssembledForms, BoundaryKind, BoundarySpec, Condition};
use ccspectra::eigensolver::{solve_smallest_with, Eigenpairs, SolverOptions};
use ccspectra::geometry::{builtin_grushin_cylinder, HorizontalField, StructureKind};
use ccspectra::grushin::{build_table, cross_validate};
use ccspectra::nodal::{check_courant, nodal_domains, write_heatmap_pgm, write_labels_pgm, DEFAULT_REL_THRESHOLD};
use serde::Serialize;
use serde_json::json;

use crate::config::{compile_all, RunConfig, Setup};
use crate::{CliError, Command, CommonArgs};

/// Tolerance used when checking inequalities.
const INEQUALITY_TOL: f64 = 1e-9;

pub fn dispatch(cmd: &Command) -> Result<(), CliError> {
    match cmd {
        Command::Spectrum(a) => spectrum(&Context::new(a)?),
        Command::Cheeger(a) => cheeger_cmd(&Context::new(a)?),
        Command::GrushinTable { common, cross_validate } => grushin_table(&Context::new(common)?, *cross_validate),
        Command::Carnot(a) => carnot(&Context::new(a)?),
    }
}

pub struct Context {
    pub config: RunConfig,
    pub out: PathBuf,
    pub quiet: bool,
}

impl Context {
    fn new(a: &CommonArgs) -> Result<Self, CliError> {
        let text = fs::read_to_string(&a.config)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", a.config.display())))?;
        let config = RunConfig::from_json(&text)?;
        let out = a
            .out
            .clone()
            .or_else(|| config.output_dir.clone())
            .unwrap_or_else(|| PathBuf::from("ccspectra-out"));
        fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;
        Ok(Self { config, out, quiet: a.quiet })
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.out.join(name);
        File::create(&path).map(BufWriter::new).map_err(|e| io_err(&path, e))
    }

    fn write_with(
        &self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<(), CliError> {
        let mut w = self.create(name)?;
        body(&mut w).and_then(|_| w.flush()).map_err(|e| io_err(&self.out.join(name), e))
    }

    fn write_json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        self.write_with(name, |w| {
            serde_json::to_writer_pretty(&mut *w, value).map_err(std::io::Error::other)?;
            writeln!(w)
        })
    }

    fn solver_options(&self) -> SolverOptions {
        let s = &self.config.solver;
        SolverOptions { tol: s.tol, dense_threshold: s.dense_threshold, seed: self.config.seed, ..SolverOptions::default() }
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io { context: path.display().to_string(), source }
}

fn assemble_setup(setup: &Setup) -> Result<AssembledForms, CliError> {
    Ok(assemble(&setup.structure, &setup.grid, &setup.boundary)?)
}

fn write_eigenvalues(ctx: &Context, e: &Eigenpairs) -> Result<(), CliError> {
    ctx.write_with("eigenvalues.csv", |w| {
        writeln!(w, "index,lambda,residual")?;
        for (i, (l, r)) in e.lambdas.iter().zip(&e.residuals).enumerate() {
            writeln!(w, "{},{},{}", i + 1, l, r)?;
        }
        Ok(())
    })
}

fn spectrum(ctx: &Context) -> Result<(), CliError> {
    let setup = ctx.config.setup()?;
    let forms = assemble_setup(&setup)?;
    let k = ctx.config.solver.k.min(forms.active_count());
    let e = solve_smallest_with(&forms, k, &ctx.solver_options())?;
    write_eigenvalues(ctx, &e)?;

    let mut domains = Vec::with_capacity(k);
    for (i, v) in e.vectors.iter().enumerate() {
        let full = forms.expand(v);
        let dec = nodal_domains(&setup.grid, &full, DEFAULT_REL_THRESHOLD)?;
        ctx.write_with(&format!("eig_{}.pgm", i + 1), |w| write_heatmap_pgm(&setup.grid, &full, w))?;
        ctx.write_with(&format!("nodal_{}.pgm", i + 1), |w| write_labels_pgm(&setup.grid, &dec, w))?;
        domains.push(dec.n_domains);
    }
    let courant = check_courant(&e, &forms, DEFAULT_REL_THRESHOLD)?;
    ctx.write_json(
        "nodal_report.json",
        &json!({
            "structure": setup.structure.name,
            "grid": [setup.grid.nx, setup.grid.ny],
            "boundary": setup.boundary.kind(&setup.grid)?,
            "method": e.method,
            "courant": courant,
        }),
    )?;

    ctx.say(format!("{} on {}x{} ({:?})", setup.structure.name, setup.grid.nx, setup.grid.ny, e.method));
    for (i, (l, r)) in e.lambdas.iter().zip(&e.residuals).enumerate() {
        ctx.say(format!("  λ{:<3} {:>16.10}   residual {:.1e}   domains {}", i + 1, l, r, domains[i]));
    }
    ctx.say(format!("  Courant check: {}", if courant.ok { "ok" } else { "VIOLATED" }));
    Ok(())
}

#[derive(Serialize)]
struct BestCut<'a> {
    kind: &'a str,
    parameter: f64,
    sigma: f64,
    vol1: f64,
    vol2: f64,
    ratio: f64,
}

impl<'a> From<&'a Cut> for BestCut<'a> {
    fn from(c: &'a Cut) -> Self {
        Self { kind: c.kind.as_str(), parameter: c.parameter, sigma: c.sigma, vol1: c.vol1, vol2: c.vol2, ratio: c.ratio }
    }
}

fn cheeger_cmd(ctx: &Context) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let setup = cfg.setup()?;
    let (s, g) = (&setup.structure, &setup.grid);
    let forms = assemble_setup(&setup)?;
    let kind = setup.boundary.kind(g)?;
    // index of the eigenvalue entering the inequality
    let idx = if kind == BoundaryKind::Neumann { 2 } else { 1 };
    let k = cfg.solver.k.max(idx).min(forms.active_count());
    let e = solve_smallest_with(&forms, k, &ctx.solver_options())?;
    let lambda = e.lambdas[idx - 1];
    let u = forms.expand(&e.vectors[idx - 1]);

    let (mut cuts, ineq_kind) = match kind {
        BoundaryKind::Neumann => (sweep_all_levels(s, g, &u, cfg.cheeger.levels)?, InequalityKind::Neumann),
        BoundaryKind::Dirichlet => (dirichlet_cheeger_upper(s, g, &u, cfg.cheeger.levels)?.cuts, InequalityKind::Dirichlet),
        BoundaryKind::Mixed => (mixed_cheeger_upper(s, &forms, &u, cfg.cheeger.levels)?.cuts, InequalityKind::Mixed),
    };
    if kind == BoundaryKind::Neumann && s.kind == StructureKind::GrushinCylinder {
        cuts.extend(candidate_cuts_grushin(s, g)?);
    }
    ctx.write_with("cuts.csv", |w| cheeger::write_cuts_csv(&cuts, w))?;
    let best = cheeger::best_cut(cuts.iter().cloned());

    let mut reports: Vec<InequalityReport> = Vec::new();
    let mut notes: Vec<String> = Vec::new();
    if let Some(b) = &best {
        reports.push(verify_inequality(lambda, b.ratio, HSource::Hypothetical, ineq_kind, INEQUALITY_TOL)?);
        notes.push("the best cut ratio is an upper bound; its report presumes equality".into());
    }
    if let Some(h) = cfg.cheeger.hypothetical_h {
        reports.push(verify_inequality(lambda, h, HSource::Hypothetical, ineq_kind, INEQUALITY_TOL)?);
    }

    let mut certificate_summary = None;
    if let Some(exprs) = &cfg.cheeger.field {
        if exprs.len() != s.m() {
            return Err(CliError::Config(format!("cheeger.field has {} entries, the structure has {} fields", exprs.len(), s.m())));
        }
        let compiled = compile_all(exprs)?;
        let fns: Vec<Box<dyn Fn(f64, f64) -> f64>> = compiled
            .iter()
            .map(|c| {
                let c = c.clone();
                Box::new(move |x: f64, y: f64| c.eval(x, y)) as Box<dyn Fn(f64, f64) -> f64>
            })
            .collect();
        let refs: Vec<&dyn Fn(f64, f64) -> f64> = fns.iter().map(|f| f.as_ref()).collect();
        let field = HorizontalField::from_fns(*g, &refs);
        let mode = cfg.cheeger.mode.unwrap_or(match kind {
            BoundaryKind::Dirichlet => CertificateMode::Dirichlet,
            // sets touching the Neumann part need an inward field there
            BoundaryKind::Neumann | BoundaryKind::Mixed => CertificateMode::Neumann,
        });
        let cert = mfmc_certify(s, g, &field, mode)?;
        ctx.write_json("certificate.json", &cert)?;
        let matches = matches!(
            (mode, kind),
            (CertificateMode::Dirichlet, BoundaryKind::Dirichlet)
                | (CertificateMode::Neumann, BoundaryKind::Neumann | BoundaryKind::Mixed)
        );
        if cert.valid && matches {
            reports.push(verify_with_certificate(lambda, &cert, ineq_kind, INEQUALITY_TOL)?);
        } else if cert.valid {
            notes.push(format!("{mode:?} certificate does not bound the {kind:?} constant; not used"));
        } else {
            notes.push("certificate failed its pointwise checks; not used".into());
        }
        certificate_summary = Some(json!({
            "mode": cert.mode,
            "valid": cert.valid,
            "h_certified": cert.h_certified,
            "max_coeff_norm": cert.max_coeff_norm,
            "boundary_inward_ok": cert.boundary_inward_ok,
        }));
        ctx.say(format!(
            "certificate ({mode:?}): h = {:.12}, max |φ| = {:.12}, valid = {}",
            cert.h_certified, cert.max_coeff_norm, cert.valid
        ));
    }

    ctx.write_json(
        "inequality_report.json",
        &json!({
            "boundary": kind,
            "lambda_index": idx,
            "lambda": lambda,
            "best_cut": best.as_ref().map(BestCut::from),
            "certificate": certificate_summary,
            "reports": reports,
            "notes": notes,
        }),
    )?;

    ctx.say(format!("λ{idx} = {lambda:.10} ({kind:?})"));
    if let Some(b) = &best {
        ctx.say(format!("best cut: {} with ratio {:.12}", b.kind.as_str(), b.ratio));
    }
    for r in &reports {
        ctx.say(format!(
            "  λ ≥ {:.4}·h² with h = {:.6} ({:?}): bound {:.6}, slack {:.6}, holds = {}",
            r.kind.constant(),
            r.h,
            r.h_source,
            r.bound,
            r.slack,
            r.holds
        ));
    }
    Ok(())
}

fn grushin_table(ctx: &Context, cross: bool) -> Result<(), CliError> {
    let tc = ctx.config.table;
    let table = build_table(tc.max_n, tc.max_m, tc.bc)?;
    ctx.write_with("grushin_table.csv", |w| table.write_csv(w))?;
    ctx.say(format!("λ_(n,m), {:?}:", tc.bc));
    for m in 0..=tc.max_m {
        let row: Vec<String> = (0..=tc.max_n).map(|n| format!("{:>12.6}", table.get(n, m).unwrap_or(f64::NAN))).collect();
        ctx.say(format!("  m = {m}: {}", row.join(" ")));
    }
    if !cross {
        return Ok(());
    }

    let s = builtin_grushin_cylinder();
    let grid = build_grid(s.chart, ctx.config.grid.nx, ctx.config.grid.ny)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let bc = match tc.bc {
        Condition::Neumann => BoundarySpec::all_neumann(),
        Condition::Dirichlet => BoundarySpec::all_dirichlet(&s.chart),
    };
    let forms = assemble(&s, &grid, &bc)?;
    let k = ctx.config.solver.k.min(forms.active_count());
    let e = solve_smallest_with(&forms, k, &ctx.solver_options())?;
    let cv = cross_validate(&table, &e)?;
    ctx.write_with("cross_validation.csv", |w| {
        writeln!(w, "index,n,m,lambda_table,lambda_2d,rel_error")?;
        for m in &cv.entries {
            writeln!(w, "{},{},{},{},{},{}", m.index, m.n, m.m, m.lambda_table, m.lambda_2d, m.rel_error)?;
        }
        Ok(())
    })?;
    ctx.write_json("cross_validation.json", &cv)?;
    ctx.say(format!("cross-validation on {}x{}: max relative error {:.3e}", grid.nx, grid.ny, cv.max_rel_error));
    Ok(())
}

fn carnot(ctx: &Context) -> Result<(), CliError> {
    let n = ctx.config.carnot.n;
    if n == 0 {
        return Err(CliError::Config("carnot.n must be at least 1".into()));
    }
    let spec = CarnotSpec::heisenberg(n)?;
    let q = homogeneous_dimension(&spec);
    let a_small = 2 * n - 1;
    let a_big = q - 1;
    let alpha = hausdorff_constant_heisenberg(n)?;
    let report = json!({
        "n": n,
        "strata": spec.strata_dims(),
        "Q": q,
        "omega": {
            a_small.to_string(): unit_ball_volume(a_small as f64)?,
            a_big.to_string(): unit_ball_volume(a_big as f64)?,
        },
        "alpha": alpha,
        "cheeger_constant": alpha * alpha / 4.0,
    });
    ctx.write_json("carnot.json", &report)?;
    if !ctx.quiet {
        println!("{}", serde_json::to_string_pretty(&report).expect("json"));
    }
    Ok(())
}
