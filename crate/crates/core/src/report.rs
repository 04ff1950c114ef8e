//! Running scenarios into auditable reports.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::chart::{Chart, ChartDomain};
use crate::conformal::{compare_law, ConformalChange};
use crate::curvature::curvature_pack_with;
use crate::error::{Error, Result};
use crate::field::ScalarField;
use crate::metric::DerivativeMode;
use crate::scenario::{Geometry, PointSpec, Scenario, Task};
use crate::solutions::{
    check_point_with, classify_singularity, compatibility_check, completeness_sufficient, grid_zero_search, pde_problem,
    pde_residuals, ray_radius, sample_points, Ambient, SingularityKind, SolutionFamily,
};
use crate::stats::ResidualSummary;
use crate::variational::{bending_and_energy, integral_identity_check, variation_report};

pub const REPORT_SCHEMA: &str = "ricci-forge-report/1";

/// Run-time switches that are not part of the scenario.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    /// Serial evaluation and no wall-clock timing, so reports are byte-stable.
    pub deterministic: bool,
    /// Finite-difference curvature only.
    pub oracle: bool,
}

/// A declared check: passes when `value <= tolerance`.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// `table.column` whose largest absolute entry is `value`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    fn new(name: &str, n: usize, values: &[&str]) -> Self {
        let mut columns: Vec<String> = (0..n).map(|a| format!("x_{a}")).collect();
        columns.extend(values.iter().map(|s| s.to_string()));
        Table {
            name: name.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let c = self.columns.iter().position(|k| k == name)?;
        Some(self.rows.iter().map(|r| r[c]).collect())
    }

    pub fn max_abs(&self, name: &str) -> f64 {
        self.column(name)
            .map(|v| ResidualSummary::from_values(&v).max)
            .unwrap_or(f64::NAN)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let io = |e: csv::Error| Error::InvalidParameter(format!("cannot write {}: {e}", path.display()));
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| format!("{v:?}"))).map_err(io)?;
        }
        w.flush()
            .map_err(|e| Error::InvalidParameter(format!("cannot write {}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub task: &'static str,
    pub seed: u64,
    pub deterministic: bool,
    pub oracle: bool,
    pub pass: bool,
    pub checks: Vec<Check>,
    /// Residual statistics of every non-coordinate table column.
    pub summary: BTreeMap<String, ResidualSummary>,
    pub results: Value,
    pub tables: Vec<Table>,
    pub timing_ms: Option<f64>,
    pub scenario: Scenario,
}

impl Report {
    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

#[derive(Default)]
struct Outcome {
    checks: Vec<Check>,
    tables: Vec<Table>,
    results: Value,
}

impl Outcome {
    fn check(&mut self, name: &str, value: f64, tolerance: f64) {
        self.checks.push(Check {
            name: name.into(),
            value,
            tolerance,
            pass: value <= tolerance,
            source: None,
        });
    }

    /// A check on the largest absolute entry of a table column.
    fn column_check(&mut self, table: usize, column: &str, tolerance: f64) {
        let t = &self.tables[table];
        let value = t.max_abs(column);
        self.checks.push(Check {
            name: format!("max_{column}"),
            value,
            tolerance,
            pass: value <= tolerance,
            source: Some(format!("{}.{column}", t.name)),
        });
    }
}

fn map_points<F>(points: &[Vec<f64>], parallel: bool, f: F) -> Result<Vec<Vec<f64>>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>> + Sync,
{
    let row = |x: &Vec<f64>| -> Result<Vec<f64>> {
        let mut r = x.clone();
        r.extend(f(x)?);
        Ok(r)
    };
    if parallel {
        points.par_iter().map(row).collect()
    } else {
        points.iter().map(row).collect()
    }
}

/// Default sampling box of a chart.
fn sampling_box(chart: &Chart) -> (Vec<f64>, Vec<f64>) {
    let n = chart.dim;
    match &chart.domain {
        ChartDomain::Euclidean => (vec![-1.5; n], vec![1.5; n]),
        ChartDomain::Box { lo, hi } => {
            let pad: Vec<f64> = lo.iter().zip(hi).map(|(l, h)| 0.05 * (h - l)).collect();
            (
                lo.iter().zip(&pad).map(|(l, p)| l + p).collect(),
                hi.iter().zip(&pad).map(|(h, p)| h - p).collect(),
            )
        }
        ChartDomain::HalfSpace { axis } => {
            let (mut lo, mut hi) = (vec![-1.5; n], vec![1.5; n]);
            lo[*axis] = 0.3;
            hi[*axis] = 2.0;
            (lo, hi)
        }
        ChartDomain::Torus { periods } => (vec![0.0; n], periods.clone()),
    }
}

fn resolve_points(spec: &PointSpec, chart: &Chart, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    match spec {
        PointSpec::Explicit(list) => list.clone(),
        PointSpec::Random { samples, lo, hi } => {
            let (dlo, dhi) = sampling_box(chart);
            let lo = lo.clone().unwrap_or(dlo);
            let hi = hi.clone().unwrap_or(dhi);
            (0..*samples)
                .map(|_| lo.iter().zip(&hi).map(|(l, h)| rng.gen_range(*l..*h)).collect())
                .collect()
        }
    }
}

fn default_tolerance(task: &Task, oracle: bool) -> f64 {
    match task {
        Task::Curvature { .. } => 1e-8,
        Task::ConformalCheck { fd_tolerance, .. } => {
            if oracle {
                *fd_tolerance
            } else {
                1e-8
            }
        }
        Task::VerifySolution { .. } => {
            if oracle {
                1e-5
            } else {
                1e-6
            }
        }
        Task::ClassifySingularity { .. } => 1e-10,
        Task::PdeResidual { .. } => 1e-8,
        Task::Variation { .. } => 1e-4,
        Task::IdentityCheck { .. } => 1e-5,
        Task::Bending { .. } => 1e-8,
    }
}

/// Runs one validated scenario.
pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> Result<Report> {
    sc.validate()?;
    let seed = opts.seed.or(sc.seed).unwrap_or(0);
    let tol = opts
        .tolerance
        .or(sc.tolerance)
        .unwrap_or_else(|| default_tolerance(&sc.task, opts.oracle));
    let parallel = !opts.deterministic;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = Instant::now();
    let mode = if opts.oracle {
        DerivativeMode::FiniteDifference
    } else {
        DerivativeMode::Analytic
    };
    let out = match &sc.task {
        Task::VerifySolution { family, samples, margin } => {
            verify(family, *samples, *margin, tol, mode, parallel, &mut rng)?
        }
        Task::ClassifySingularity { family, cells, half_width } => {
            no_oracle(opts, "classify-singularity")?;
            classify(family, *cells, *half_width, tol)?
        }
        Task::PdeResidual { family, samples, checks } => {
            no_oracle(opts, "pde-residual")?;
            pde(family, *samples, checks, tol, parallel, &mut rng)?
        }
        _ => {
            let geo = sc.geometry()?;
            geometry_task(sc, &geo, tol, mode, opts, parallel, &mut rng)?
        }
    };
    let mut summary = BTreeMap::new();
    for t in &out.tables {
        let n = t.columns.iter().take_while(|c| c.starts_with("x_")).count();
        for c in &t.columns[n..] {
            let values = t.column(c).unwrap_or_default();
            summary.insert(format!("{}.{c}", t.name), ResidualSummary::from_values(&values));
        }
    }
    let timing_ms = (!opts.deterministic).then(|| start.elapsed().as_secs_f64() * 1e3);
    Ok(Report {
        schema: REPORT_SCHEMA,
        name: sc.name.clone(),
        task: sc.task.name(),
        seed,
        deterministic: opts.deterministic,
        oracle: opts.oracle,
        pass: out.checks.iter().all(|c| c.pass),
        checks: out.checks,
        summary,
        results: out.results,
        tables: out.tables,
        timing_ms,
        scenario: sc.clone(),
    })
}

fn no_oracle(opts: &RunOptions, task: &str) -> Result<()> {
    if opts.oracle {
        return Err(Error::Configuration(format!("task {task} has no finite-difference oracle path")));
    }
    Ok(())
}

fn geometry_task(
    sc: &Scenario,
    geo: &Geometry,
    tol: f64,
    mode: DerivativeMode,
    opts: &RunOptions,
    parallel: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Outcome> {
    let n = geo.chart.dim;
    let mut out = Outcome::default();
    match &sc.task {
        Task::Curvature {
            points,
            mode: declared,
            expect_k12,
            expect_sectional,
        } => {
            let mode = if opts.oracle { mode } else { *declared };
            let pts = resolve_points(points, &geo.chart, rng);
            let mut cols = vec!["k12", "sectional_min", "sectional_max"];
            if expect_k12.is_some() {
                cols.push("k12_error");
            }
            if expect_sectional.is_some() {
                cols.push("sectional_error");
            }
            let mut table = Table::new("points", n, &cols);
            table.rows = map_points(&pts, parallel, |x| {
                let pack = curvature_pack_with(&geo.metric, &geo.dist, x, mode)?;
                let (mut lo, mut hi, mut err) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
                for a in 0..n {
                    for b in a + 1..n {
                        let (mut u, mut v) = (vec![0.0; n], vec![0.0; n]);
                        u[a] = 1.0;
                        v[b] = 1.0;
                        let s = pack.sectional(&u, &v)?;
                        lo = lo.min(s);
                        hi = hi.max(s);
                        if let Some(e) = expect_sectional {
                            err = err.max((s - e).abs());
                        }
                    }
                }
                let mut row = vec![pack.k12, lo, hi];
                if let Some(e) = expect_k12 {
                    row.push((pack.k12 - e).abs());
                }
                if expect_sectional.is_some() {
                    row.push(err);
                }
                Ok(row)
            })?;
            out.tables.push(table);
            if expect_k12.is_some() {
                out.column_check(0, "k12_error", tol);
            }
            if expect_sectional.is_some() {
                out.column_check(0, "sectional_error", tol);
            }
            out.results = json!({"mode": mode, "points": pts.len()});
        }
        Task::ConformalCheck { phi, points, fd_tolerance } => {
            let change = ConformalChange::new(geo.metric.clone(), ScalarField::from_expr(phi.clone()));
            let pts = resolve_points(points, &geo.chart, rng);
            let cols: &[&str] = if opts.oracle {
                &["k12_law", "k12_direct_fd", "law_gap_fd"]
            } else {
                &["k12_law", "k12_direct", "law_gap", "law_gap_fd"]
            };
            let mut table = Table::new("points", n, cols);
            table.rows = map_points(&pts, parallel, |x| {
                let fd = compare_law(&change, &geo.dist, x, DerivativeMode::FiniteDifference)?;
                if opts.oracle {
                    return Ok(vec![fd.k12_law, fd.k12_direct, fd.gap]);
                }
                let an = compare_law(&change, &geo.dist, x, DerivativeMode::Analytic)?;
                Ok(vec![an.k12_law, an.k12_direct, an.gap, fd.gap])
            })?;
            out.tables.push(table);
            if opts.oracle {
                out.column_check(0, "law_gap_fd", tol);
            } else {
                out.column_check(0, "law_gap", tol);
                out.column_check(0, "law_gap_fd", *fd_tolerance);
            }
            out.results = json!({"points": pts.len()});
        }
        Task::Variation {
            rotations,
            c_n,
            critical_tol,
            identity_tolerance,
            expect_critical,
            ..
        } => {
            no_oracle(opts, "variation")?;
            let vs = sc.variation_scenario(geo, parallel)?;
            let r = variation_report(&vs, *critical_tol, *rotations, *c_n, rng)?;
            let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-6);
            out.check("first_variation_agreement", rel(r.i1_analytic, r.i1_fd), tol);
            out.check("second_variation_agreement", rel(r.i2_analytic, r.i2_fd), tol);
            out.check("sigma2_identity", r.sigma2_residual.abs(), *identity_tolerance);
            out.check("energy_identity", r.energy_residual.abs(), *identity_tolerance);
            if let (Some(b), Some(lb)) = (r.bending, r.bending_bound) {
                out.check("bending_bound", (lb - b).max(0.0) / b.abs().max(1.0), 1e-8);
            }
            if let Some(want) = expect_critical {
                out.check("criticality", if r.critical == *want { 0.0 } else { 1.0 }, 0.0);
            }
            out.results = json!({"bump": vs.bump, "step": vs.step, "variation": r});
        }
        Task::IdentityCheck { quadrature } => {
            no_oracle(opts, "identity-check")?;
            let mut q = quadrature.clone();
            q.parallel = q.parallel && parallel;
            let r = integral_identity_check(&geo.metric, &geo.dist, &q)?;
            out.check("sigma2_identity", r.sigma2_residual.abs(), tol);
            out.check("energy_identity", r.energy_residual.abs(), tol);
            out.check("norm_identity", r.max_norm_identity_gap, 1e-9);
            out.results = serde_json::to_value(r).expect("serializes");
        }
        Task::Bending { quadrature, c_n } => {
            no_oracle(opts, "bending")?;
            let mut q = quadrature.clone();
            q.parallel = q.parallel && parallel;
            let r = bending_and_energy(&geo.metric, &geo.dist, &q, *c_n)?;
            let scale = r.bending.abs().max(1.0);
            out.check("bending_bound", (-r.bound_slack).max(0.0) / scale, tol);
            if let Some(s) = r.equal_rank_slack {
                out.check("equal_rank_bound", (-s).max(0.0) / scale, tol);
            }
            if let Some(s) = r.energy_slack {
                out.check("energy_bound", (-s).max(0.0) / r.corrected_energy.abs().max(1.0), tol);
            }
            out.results = serde_json::to_value(r).expect("serializes");
        }
        _ => unreachable!("family tasks are dispatched separately"),
    }
    Ok(out)
}

fn verify(
    family: &SolutionFamily,
    samples: usize,
    margin: f64,
    tol: f64,
    mode: DerivativeMode,
    parallel: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Outcome> {
    let sol = family.build()?;
    let n = sol.p1() + sol.p2();
    let pts = sample_points(&sol, samples, margin, rng)?;
    let closed_form = match family {
        SolutionFamily::Theorem1(p) if p.a1 == p.a2 && p.ambient == Ambient::Euclidean => {
            Some(-((p.p1 * p.p2) as f64) * p.lambda())
        }
        _ => None,
    };
    let mut cols = vec!["direct", "law", "k12"];
    if closed_form.is_some() {
        cols.push("k12_closed_form_error");
    }
    let mut table = Table::new("points", n, &cols);
    table.rows = map_points(&pts, parallel, |x| {
        let c = check_point_with(&sol, x, mode)?;
        let mut row = vec![c.direct, c.law, c.k12];
        if let Some(k) = closed_form {
            row.push((c.k12 - k).abs() / k.abs().max(1.0));
        }
        Ok(row)
    })?;
    let compat = compatibility_check(&sol.tensor, sol.tensor.case, &pts, 1e-8)?;
    let mut out = Outcome::default();
    out.tables.push(table);
    out.column_check(0, "direct", tol);
    if mode == DerivativeMode::Analytic {
        out.column_check(0, "law", tol);
        if closed_form.is_some() {
            out.column_check(0, "k12_closed_form_error", 1e-8);
        }
    }
    out.check("compatibility", compat.max_violation, 1e-8);
    out.results = json!({
        "tag": family.tag(),
        "points": pts.len(),
        "compatibility": compat,
        "complete_sufficient": completeness_sufficient(&sol),
        "warnings": sol.warnings,
    });
    Ok(out)
}

fn classify(family: &SolutionFamily, cells: usize, half_width: f64, tol: f64) -> Result<Outcome> {
    let SolutionFamily::Theorem1(p) = family else {
        return Err(Error::NotImplemented("only theorem1 members are classified".into()));
    };
    let n = p.p1 + p.p2;
    let report = classify_singularity(family)?;
    let grid = grid_zero_search(p, &report, cells, half_width);
    let mut out = Outcome::default();
    out.check("grid_agreement", if grid.agrees { 0.0 } else { 1.0 }, 0.0);
    if let (Some(center), Some(r), SingularityKind::Sphere | SingularityKind::SphereCap) =
        (&report.center, report.radius, report.kind)
    {
        let mut table = Table::new("rays", n, &["radius", "radius_error"]);
        let mut directions: Vec<Vec<f64>> = Vec::new();
        for a in 0..n {
            for sign in [1.0, -1.0] {
                let mut d = vec![0.0; n];
                d[a] = sign;
                directions.push(d);
            }
        }
        for d in directions {
            let hit = ray_radius(p, center, &d);
            if !hit.is_finite() {
                continue;
            }
            let mut row: Vec<f64> = center.iter().zip(&d).map(|(c, u)| c + hit * u).collect();
            row.push(hit);
            row.push((hit - r).abs() / (1.0 + r));
            table.rows.push(row);
        }
        out.tables.push(table);
        out.column_check(0, "radius_error", tol);
        if p.a1 == p.a2 && p.a1 != 0.0 {
            let closed = p.lambda().sqrt() / (2.0 * p.a1.abs());
            out.check("radius_closed_form", (r - closed).abs(), tol);
        }
    }
    out.results = json!({"singularity": report, "grid": grid});
    Ok(out)
}

fn pde(
    family: &SolutionFamily,
    samples: usize,
    checks: &[String],
    tol: f64,
    parallel: bool,
    rng: &mut ChaCha8Rng,
) -> Result<Outcome> {
    let problem = pde_problem(family)?;
    let n = problem.dist.dim();
    let pts: Vec<Vec<f64>> = (0..samples)
        .map(|_| (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect())
        .collect();
    let mut table = Table::new("points", n, &["flat", "gamma_form", "direct"]);
    table.rows = map_points(&pts, parallel, |x| {
        let r = pde_residuals(&problem, x)?;
        Ok(vec![r.flat, r.gamma_form, r.direct])
    })?;
    let mut out = Outcome::default();
    out.tables.push(table);
    for c in checks {
        out.column_check(0, c, tol);
    }
    out.results = json!({"case": problem.label, "points": pts.len()});
    Ok(out)
}
