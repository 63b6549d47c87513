use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use gradflow_core::diagnostics::{self, Check, ContractionReport, DiagnosticsReport, TimeSeries};
use gradflow_core::energy::{check_class_hm, check_mccann, log_spaced};
use gradflow_core::grid::gaussian_density;
use gradflow_core::jko::{self, RunOptions};
use gradflow_core::{transport, Density, Error, Grid, Trajectory};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{self, Format, Setup};
use crate::error::{CliError, CliResult};
use crate::output::{self, Index, RunDir, SnapshotEntry};

/// Relative drop of 𝓕ᵢ under 2× coarsening that flags concentrated data.
pub const BLOWUP_FRACTION: f64 = 0.05;

fn io_out(e: std::io::Error) -> CliError {
    CliError::io("<stdout>", e)
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn print_checks(out: &mut dyn Write, checks: &BTreeMap<String, Check>) -> CliResult<()> {
    for (name, c) in checks {
        writeln!(
            out,
            "{:<28} {:>14.6e} {:>14.6e} {}",
            name,
            c.statistic,
            c.bound,
            verdict(c.pass)
        )
        .map_err(io_out)?;
    }
    Ok(())
}

fn checks_json(checks: &BTreeMap<String, Check>) -> Value {
    output::report_json(&DiagnosticsReport {
        checks: checks.clone(),
        ..Default::default()
    })
}

/// Hypothesis checks on a configuration, before any step is taken.
#[derive(Debug, Clone, PartialEq)]
pub struct Validation {
    pub checks: BTreeMap<String, Check>,
    pub c_lip: f64,
    pub c_hess: f64,
    pub c_cert: f64,
    /// Species whose initial data look like a point mass.
    pub blowup: Vec<usize>,
}

impl Validation {
    pub fn pass(&self) -> bool {
        self.checks.values().all(|c| c.pass)
    }

    fn failures(&self) -> String {
        let mut names: Vec<String> = self
            .checks
            .iter()
            .filter(|(_, c)| !c.pass)
            .map(|(n, _)| n.clone())
            .collect();
        if !self.blowup.is_empty() {
            names.insert(0, "initial energy blow-up".into());
        }
        names.join(", ")
    }
}

/// Averages pairs of cells along every axis; `None` for odd cell counts.
pub fn coarsen(rho: &Density) -> Option<Density> {
    let g = rho.grid();
    if (0..g.dim()).any(|a| g.cells(a) % 2 != 0 || g.cells(a) < 4) {
        return None;
    }
    let coarse = if g.dim() == 1 {
        Grid::new_1d(g.lower(0), g.upper(0), g.cells(0) / 2)
    } else {
        Grid::new_2d(
            [g.lower(0), g.lower(1)],
            [g.upper(0), g.upper(1)],
            [g.cells(0) / 2, g.cells(1) / 2],
        )
    }
    .ok()?;
    let share = 1.0 / (1 << g.dim()) as f64;
    let mut values = vec![0.0; coarse.len()];
    for (k, v) in rho.values().iter().enumerate() {
        let (i, j) = g.unflatten(k);
        values[coarse.flatten(i / 2, j / 2)] += share * v;
    }
    Density::new(coarse, values).ok()
}

/// Three fixed Gaussian pairs spread over the box.
pub fn trial_pairs(grid: &Grid) -> CliResult<Vec<(Density, Density)>> {
    let at = |f: f64| {
        let mut p = [0.0; 2];
        for (a, x) in p.iter_mut().enumerate().take(grid.dim()) {
            *x = grid.lower(a) + f * (grid.upper(a) - grid.lower(a));
        }
        p
    };
    let width = (0..grid.dim())
        .map(|a| grid.upper(a) - grid.lower(a))
        .fold(f64::INFINITY, f64::min);
    [
        (0.3, 0.6, 10.0, 10.0),
        (0.45, 0.55, 16.0, 16.0),
        (0.4, 0.7, 12.0, 8.0),
    ]
    .iter()
    .map(|&(a, b, sa, sb)| {
        Ok((
            gaussian_density(grid, at(a), width / sa)?,
            gaussian_density(grid, at(b), width / sb)?,
        ))
    })
    .collect()
}

pub fn validate(setup: &Setup) -> CliResult<Validation> {
    let sys = &setup.system;
    let grid = setup.grid();
    let mut checks = BTreeMap::new();
    let failed = |r: &gradflow_core::energy::EnergyReport| r.checks.iter().filter(|c| !c.pass).count() as f64;
    let hm_samples = log_spaced(1e-4, 1e4, 200);
    let mc_samples = log_spaced(1e-3, 1e3, 200);
    let mut blowup = Vec::new();
    for (i, e) in sys.energies().iter().enumerate() {
        let hm = check_class_hm(e, &hm_samples);
        checks.insert(format!("class_hm_{i}"), Check::new(failed(&hm), 0.0));
        let mc = check_mccann(e, grid.dim(), &mc_samples);
        checks.insert(format!("mccann_{i}"), Check::new(failed(&mc), 0.0));
        let rho = &setup.initial[i];
        let f = e.functional(rho);
        let v = sys
            .interaction()
            .eval_interaction_functional(i, rho, &setup.initial)?;
        let total = f + v;
        checks.insert(
            format!("initial_energy_{i}"),
            Check {
                statistic: total,
                bound: f64::INFINITY,
                pass: total.is_finite(),
            },
        );
        if let Some(c) = coarsen(rho) {
            let drop = f - e.functional(&c);
            let check = Check::new(drop, BLOWUP_FRACTION * (1.0 + f.abs()));
            if !check.pass {
                blowup.push(i);
            }
            checks.insert(format!("energy_blowup_{i}"), check);
        }
    }
    let cert = sys.interaction().certify_hypotheses(&trial_pairs(grid)?)?;
    checks.insert(
        "potential_lipschitz".into(),
        Check::new(cert.max_ratio, cert.bound),
    );
    checks.insert(
        "potential_nonnegative".into(),
        Check::new(if cert.nonnegative { 0.0 } else { 1.0 }, 0.0),
    );
    Ok(Validation {
        checks,
        c_lip: cert.c_lip,
        c_hess: cert.c_hess,
        c_cert: sys.interaction().c_cert(),
        blowup,
    })
}

pub fn cmd_validate(config: &Path, out: &mut dyn Write) -> CliResult<Validation> {
    let setup = config::load(config)?;
    let v = validate(&setup)?;
    print_checks(out, &v.checks)?;
    writeln!(
        out,
        "c_lip = {:.6e}, c_hess = {:.6e}, c_cert = {:.6e}",
        v.c_lip, v.c_hess, v.c_cert
    )
    .map_err(io_out)?;
    if !v.pass() {
        return Err(CliError::Hypothesis(v.failures()));
    }
    writeln!(out, "validate: PASS").map_err(io_out)?;
    Ok(v)
}

#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub best_effort: bool,
    /// Replaces `outputs.directory`.
    pub out_dir: Option<PathBuf>,
}

/// Error of a trajectory against an analytic solution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselineError {
    pub l1_error: f64,
    pub w2_error: f64,
    pub max_w2_error: f64,
}

pub fn baseline_error(setup: &Setup, traj: &Trajectory) -> CliResult<Option<BaselineError>> {
    let Some((b, _)) = &setup.baseline else {
        return Ok(None);
    };
    let grid = setup.grid();
    let mut max_w2: f64 = 0.0;
    let mut last = (0.0, 0.0);
    for k in 0..=traj.len() {
        let exact = b.exact(grid, k as f64 * traj.h())?;
        let rho = traj.density(k, 0);
        let w2 = transport::w2_exact_1d(rho, &exact)?.distance();
        max_w2 = max_w2.max(w2);
        if k == traj.len() {
            last = (rho.l1_distance(&exact)?, w2);
        }
    }
    Ok(Some(BaselineError {
        l1_error: last.0,
        w2_error: last.1,
        max_w2_error: max_w2,
    }))
}

fn optional(r: gradflow_core::Result<f64>) -> CliResult<Option<f64>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::NotAvailable(_)) | Err(Error::DimensionUnsupported { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Everything `run` computed, as written to `summary.json`.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub directory: PathBuf,
    pub trajectory: Trajectory,
    pub report: DiagnosticsReport,
    pub summary: Value,
    pub failed_steps: Vec<(usize, usize)>,
}

impl RunOutcome {
    pub fn pass(&self) -> bool {
        self.summary["pass"] == Value::Bool(true)
    }
}

/// Runs a configuration and writes its outputs; does not fail on a failed
/// diagnostic check, only on bad input or a solver failure.
pub fn execute(setup: &Setup, config: &Path, args: &RunArgs) -> CliResult<RunOutcome> {
    let v = validate(setup)?;
    if !v.pass() {
        return Err(CliError::Hypothesis(v.failures()));
    }
    let sys = &setup.system;
    let traj = jko::run_scheme_with(
        sys,
        &setup.initial,
        setup.h,
        setup.t_end,
        setup.solver,
        RunOptions {
            best_effort: args.best_effort,
        },
    )?;
    let mut report = diagnostics::trajectory_report(sys, &traj)?;
    let failed_steps: Vec<(usize, usize)> = traj
        .steps()
        .iter()
        .enumerate()
        .flat_map(|(k, s)| {
            s.records
                .iter()
                .enumerate()
                .filter(|(_, r)| !r.converged)
                .map(move |(i, _)| (k + 1, i))
        })
        .collect();
    report.insert("failed_steps", Check::new(failed_steps.len() as f64, 0.0));
    let base = baseline_error(setup, &traj)?;
    if let (Some(e), Some((_, cfg))) = (base, &setup.baseline) {
        report.insert(
            "baseline_l1",
            Check::new(e.l1_error, cfg.l1_tolerance.unwrap_or(f64::INFINITY)),
        );
        report.insert(
            "baseline_w2_max",
            Check::new(e.max_w2_error, cfg.w2_tolerance.unwrap_or(f64::INFINITY)),
        );
    }
    let mut estimates = serde_json::Map::new();
    for i in 0..sys.species_count() {
        let s = &report.series.species[i];
        estimates.insert(
            format!("l2h1_{i}"),
            json!(optional(diagnostics::gradient_estimate_l2h1(sys, &traj, i))?),
        );
        estimates.insert(
            format!("l1w11_{i}"),
            json!(optional(diagnostics::gradient_estimate_l1w11(sys, &traj, i))?),
        );
        estimates.insert(
            format!("holder_{i}"),
            json!(optional(diagnostics::holder_constant(&traj, i))?),
        );
        estimates.insert(format!("max_moment_{i}"), json!(max_of(&s.moment)));
        estimates.insert(format!("max_energy_{i}"), json!(max_of(&s.energy)));
        estimates.insert(format!("sum_w2sq_{i}"), json!(s.w2_increment.iter().sum::<f64>()));
        estimates.insert(format!("max_residual_{i}"), json!(max_of(&s.residual)));
    }
    let grid = setup.grid();
    let dims = 0..grid.dim();
    let summary = json!({
        "pass": report.pass(),
        "config": config.display().to_string(),
        "grid": {
            "dim": grid.dim(),
            "lower": dims.clone().map(|a| grid.lower(a)).collect::<Vec<_>>(),
            "upper": dims.clone().map(|a| grid.upper(a)).collect::<Vec<_>>(),
            "cells": dims.map(|a| grid.cells(a)).collect::<Vec<_>>(),
        },
        "h": setup.h,
        "T": setup.t_end,
        "steps": traj.len(),
        "solver": setup.solver.name(),
        "tol": setup.solver.tolerance(),
        "epsilon": traj.epsilon(),
        "species": setup.names,
        "c_lip": v.c_lip,
        "c_hess": v.c_hess,
        "c_cert": v.c_cert,
        "validation": checks_json(&v.checks),
        "checks": output::report_json(&report),
        "estimates": estimates,
        "baseline": setup.baseline.as_ref().map(|(b, cfg)| json!({
            "name": b.name(),
            "parameter": cfg.parameter,
            "error": base,
        })),
        "failed_steps": failed_steps.iter().map(|&(k, i)| json!({"step": k, "species": i})).collect::<Vec<_>>(),
    });
    let directory = args.out_dir.clone().unwrap_or_else(|| setup.directory.clone());
    write_outputs(setup, &directory, &traj, &report, &summary)?;
    Ok(RunOutcome {
        directory,
        trajectory: traj,
        report,
        summary,
        failed_steps,
    })
}

fn write_outputs(
    setup: &Setup,
    dir: &Path,
    traj: &Trajectory,
    report: &DiagnosticsReport,
    summary: &Value,
) -> CliResult<()> {
    output::create_dir(dir)?;
    let levels = output::recorded_levels(traj.len(), setup.record_every);
    let snapshots: Vec<SnapshotEntry> = levels
        .iter()
        .map(|&k| SnapshotEntry {
            level: k,
            t: k as f64 * traj.h(),
            files: (0..traj.species_count())
                .map(|i| output::snapshot_name(i, k))
                .collect(),
        })
        .collect();
    let mut written = Vec::new();
    if setup.writes(Format::Csv) {
        output::create_dir(&dir.join(output::SNAPSHOT_DIR))?;
        for s in &snapshots {
            for (i, f) in s.files.iter().enumerate() {
                output::write_snapshot(&dir.join(f), traj.density(s.level, i))?;
            }
        }
        output::write_timeseries(&dir.join("timeseries.csv"), &report.series)?;
        written.push("timeseries.csv".to_string());
    }
    if setup.writes(Format::Json) {
        output::write_json(&dir.join("report.json"), &output::report_json(report))?;
        output::write_json(&dir.join("summary.json"), summary)?;
        written.extend(["report.json".to_string(), "summary.json".to_string()]);
        let index = Index {
            h: traj.h(),
            t_end: setup.t_end,
            steps: traj.len(),
            species: setup.names.clone(),
            snapshots: if setup.writes(Format::Csv) {
                snapshots
            } else {
                Vec::new()
            },
            diagnostics: written,
        };
        output::write_json(&dir.join("index.json"), &index)?;
    }
    Ok(())
}

pub fn cmd_run(config: &Path, args: &RunArgs, out: &mut dyn Write) -> CliResult<RunOutcome> {
    let setup = config::load(config)?;
    let r = execute(&setup, config, args)?;
    print_checks(out, &r.report.checks)?;
    writeln!(
        out,
        "run: {} steps, outputs in {}, summary.pass = {}",
        r.trajectory.len(),
        r.directory.display(),
        r.pass()
    )
    .map_err(io_out)?;
    if !r.failed_steps.is_empty() {
        let list: Vec<String> = r
            .failed_steps
            .iter()
            .map(|(k, i)| format!("step {k} species {i}"))
            .collect();
        return Err(CliError::Solver(format!(
            "kept the previous density after failures at {}",
            list.join(", ")
        )));
    }
    Ok(r)
}

/// One refinement level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelRow {
    pub h: f64,
    pub steps: usize,
    /// Final-time L¹ error summed over species.
    pub l1_error: f64,
    /// Final-time `(Σᵢ W₂²)^{1/2}` error.
    pub w2_error: f64,
    pub sum_w2sq: f64,
    pub max_moment: f64,
    pub max_energy: f64,
    /// Largest per-step optimality residual, exact solver only.
    pub max_residual: Option<f64>,
    pub order_l1: Option<f64>,
    pub order_w2: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceTable {
    /// `analytic` or `finest`.
    pub reference: &'static str,
    pub rows: Vec<LevelRow>,
    /// Errors strictly decrease over the compared levels.
    pub monotone: bool,
}

pub fn parse_levels(text: &str) -> CliResult<Vec<f64>> {
    let levels = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| CliError::Config(format!("bad level `{s}`: {e}")))
        })
        .collect::<CliResult<Vec<f64>>>()?;
    check_levels(&levels)?;
    Ok(levels)
}

fn check_levels(levels: &[f64]) -> CliResult<()> {
    if levels.len() < 3 {
        return Err(CliError::Config(format!(
            "convergence needs at least 3 levels, got {}",
            levels.len()
        )));
    }
    if levels.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(CliError::Config("levels must be positive".into()));
    }
    for w in levels.windows(2) {
        if (w[1] * 2.0 - w[0]).abs() > 1e-9 * w[0] {
            return Err(CliError::Config(format!(
                "level {} is not half of {}",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

fn series_max(
    series: &TimeSeries,
    pick: impl Fn(&gradflow_core::diagnostics::SpeciesSeries) -> &Vec<f64>,
) -> f64 {
    series
        .species
        .iter()
        .map(|s| max_of(pick(s)))
        .fold(f64::NEG_INFINITY, f64::max)
}

fn order(coarse: f64, fine: f64) -> Option<f64> {
    (coarse > 0.0 && fine > 0.0).then(|| (coarse / fine).log2())
}

pub fn convergence(setup: &Setup, levels: &[f64]) -> CliResult<ConvergenceTable> {
    check_levels(levels)?;
    if let Some(h) = levels.iter().find(|&&h| h > setup.t_end) {
        return Err(CliError::Config(format!("level {h} exceeds T = {}", setup.t_end)));
    }
    let sys = &setup.system;
    let runs = levels
        .par_iter()
        .map(|&h| {
            let traj = jko::run_scheme(sys, &setup.initial, h, setup.t_end, setup.solver)?;
            let series = diagnostics::time_series(sys, &traj)?;
            Ok((traj, series))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let analytic = setup.baseline.is_some();
    let finest = runs
        .last()
        .unwrap()
        .0
        .level(runs.last().unwrap().0.len())
        .to_vec();
    let mut rows = Vec::with_capacity(levels.len());
    for (&h, (traj, series)) in levels.iter().zip(&runs) {
        let last = traj.level(traj.len());
        let (l1, w2) = if let Some(e) = baseline_error(setup, traj)? {
            (e.l1_error, e.w2_error)
        } else {
            let l1 = last
                .iter()
                .zip(&finest)
                .map(|(a, b)| a.l1_distance(b))
                .sum::<gradflow_core::Result<f64>>()?;
            (l1, diagnostics::species_distance(last, &finest)?.sqrt())
        };
        let residual = series_max(series, |s| &s.residual);
        rows.push(LevelRow {
            h,
            steps: traj.len(),
            l1_error: l1,
            w2_error: w2,
            sum_w2sq: series
                .species
                .iter()
                .map(|s| s.w2_increment.iter().sum::<f64>())
                .sum(),
            max_moment: series_max(series, |s| &s.moment),
            max_energy: series_max(series, |s| &s.energy),
            max_residual: residual.is_finite().then_some(residual),
            order_l1: None,
            order_w2: None,
        });
    }
    for k in 1..rows.len() {
        rows[k].order_l1 = order(rows[k - 1].l1_error, rows[k].l1_error);
        rows[k].order_w2 = order(rows[k - 1].w2_error, rows[k].w2_error);
    }
    let compared = if analytic { rows.len() } else { rows.len() - 1 };
    let monotone = rows[..compared].windows(2).all(|w| w[1].l1_error < w[0].l1_error);
    Ok(ConvergenceTable {
        reference: if analytic { "analytic" } else { "finest" },
        rows,
        monotone,
    })
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.4}"))
}

pub fn cmd_convergence(
    config: &Path,
    levels: &[f64],
    out_dir: Option<&Path>,
    out: &mut dyn Write,
) -> CliResult<ConvergenceTable> {
    check_levels(levels)?;
    let setup = config::load(config)?;
    let table = convergence(&setup, levels)?;
    writeln!(out, "reference: {}", table.reference).map_err(io_out)?;
    writeln!(
        out,
        "{:>10} {:>6} {:>12} {:>12} {:>12} {:>8} {:>8} {:>12}",
        "h", "steps", "l1_error", "w2_error", "sum_w2sq", "ord_l1", "ord_w2", "residual"
    )
    .map_err(io_out)?;
    for r in &table.rows {
        writeln!(
            out,
            "{:>10.3e} {:>6} {:>12.4e} {:>12.4e} {:>12.4e} {:>8} {:>8} {:>12}",
            r.h,
            r.steps,
            r.l1_error,
            r.w2_error,
            r.sum_w2sq,
            opt(r.order_l1),
            opt(r.order_w2),
            r.max_residual.map_or_else(|| "-".into(), |v| format!("{v:.4e}"))
        )
        .map_err(io_out)?;
    }
    writeln!(out, "monotone: {}", table.monotone).map_err(io_out)?;
    let dir = out_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| setup.directory.clone());
    output::create_dir(&dir)?;
    output::write_json(&dir.join("convergence.json"), &table)?;
    Ok(table)
}

fn c_cert_of(run: &RunDir) -> CliResult<f64> {
    run.summary["c_cert"]
        .as_f64()
        .ok_or_else(|| CliError::Config(format!("{}: summary.json has no c_cert", run.root.display())))
}

/// Distances between two run directories at their common record times.
pub fn compare(a: &Path, b: &Path) -> CliResult<ContractionReport> {
    let (ra, rb) = (RunDir::open(a)?, RunDir::open(b)?);
    let (sa, sb) = (&ra.index.snapshots, &rb.index.snapshots);
    if sa.is_empty() {
        return Err(CliError::Config(format!("{} has no snapshots", a.display())));
    }
    if ra.index.species.len() != rb.index.species.len() {
        return Err(CliError::Config("runs have different species counts".into()));
    }
    if sa.len() != sb.len()
        || sa
            .iter()
            .zip(sb)
            .any(|(x, y)| (x.t - y.t).abs() > 1e-9 * (1.0 + x.t.abs()))
    {
        return Err(CliError::Config("runs were recorded at different times".into()));
    }
    let mut t = Vec::with_capacity(sa.len());
    let mut distance = Vec::with_capacity(sa.len());
    let mut grid = None;
    for (x, y) in sa.iter().zip(sb) {
        let (la, lb) = (ra.level(x)?, rb.level(y)?);
        if la.iter().chain(&lb).any(|r| r.grid() != la[0].grid()) {
            return Err(CliError::Config("runs use different grids".into()));
        }
        grid = Some(*la[0].grid());
        t.push(x.t);
        distance.push(diagnostics::species_distance(&la, &lb)?);
    }
    let c_cert = c_cert_of(&ra)?.max(c_cert_of(&rb)?);
    Ok(diagnostics::contraction_from_series(
        c_cert,
        &grid.unwrap(),
        t,
        distance,
    ))
}

pub fn cmd_compare(a: &Path, b: &Path, out: &mut dyn Write) -> CliResult<ContractionReport> {
    let r = compare(a, b)?;
    writeln!(out, "t,sum_w2sq").map_err(io_out)?;
    for (t, d) in r.t.iter().zip(&r.distance) {
        writeln!(out, "{t:.16e},{d:.16e}").map_err(io_out)?;
    }
    writeln!(
        out,
        "growth rate {:.6e}, bound 4*c_cert + margin = {:.6e} (c_cert = {:.6e}), {}",
        r.rate,
        r.bound,
        r.c_cert,
        verdict(r.pass)
    )
    .map_err(io_out)?;
    if let Some(eps) = r.epsilon {
        writeln!(out, "entropic distance, epsilon = {eps:.6e}").map_err(io_out)?;
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coarsen_preserves_mass_and_lowers_entropy() {
        let g = Grid::new_1d(-4.0, 4.0, 64).unwrap();
        let point = Density::point_mass(g, 20).unwrap();
        let c = coarsen(&point).unwrap();
        assert_eq!(c.grid().cells(0), 32);
        assert!((c.mass() - 1.0).abs() < 1e-14);
        let e = gradflow_core::InternalEnergy::entropy();
        let drop = e.functional(&point) - e.functional(&c);
        assert!((drop - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(coarsen(&Density::uniform(Grid::new_1d(0.0, 1.0, 7).unwrap())).is_none());
    }

    #[test]
    fn coarsen_2d_averages_blocks() {
        let g = Grid::new_2d([0.0, 0.0], [1.0, 1.0], [4, 4]).unwrap();
        let c = coarsen(&Density::uniform(g)).unwrap();
        assert!(c.values().iter().all(|v| (v - 1.0).abs() < 1e-14));
    }

    #[test]
    fn levels_must_halve() {
        assert!(parse_levels("4e-3,2e-3,1e-3").is_ok());
        assert!(parse_levels("4e-3").is_err());
        assert!(parse_levels("4e-3,2e-3").is_err());
        assert!(parse_levels("4e-3,3e-3,1e-3").is_err());
        assert!(parse_levels("4e-3,x,1e-3").is_err());
    }

    #[test]
    fn trial_pairs_are_distinct() {
        let g = Grid::new_1d(-4.0, 4.0, 128).unwrap();
        let p = trial_pairs(&g).unwrap();
        assert_eq!(p.len(), 3);
        assert!(p.iter().all(|(a, b)| a != b));
    }
}
