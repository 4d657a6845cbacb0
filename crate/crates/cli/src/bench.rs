//! Iteration counts and timings across dimensions, levels and methods.

use std::fmt::Write as _;

use mgspline_core::solver::MAX_ITERATION_CAP;
use serde::Serialize;

use crate::config::{DataSource, Precond, RunConfig};
use crate::error::Result;
use crate::pipeline::{build_hierarchy, prepare, solve};

#[derive(Debug, Clone)]
pub struct BenchPlan {
    pub dims: Vec<usize>,
    pub levels: Vec<u32>,
    pub methods: Vec<Precond>,
    /// Template for everything else; `dim`, `levels` and the
    /// preconditioner are overwritten per row.
    pub base: RunConfig,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub dim: usize,
    pub level: u32,
    pub unknowns: usize,
    pub observations: usize,
    pub method: &'static str,
    pub iterations: usize,
    pub converged: bool,
    pub relative_residual: f64,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub auxiliary_reals: usize,
}

/// Runs every combination. Without an explicit `--max-iter`, the limit is
/// raised to the global cap so unpreconditioned counts are not truncated.
pub fn run(plan: &BenchPlan, mut progress: impl FnMut(&BenchRow)) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &dim in &plan.dims {
        let mut cfg = plan.base.clone();
        cfg.dim = Some(dim);
        if cfg.degrees.len() != 1 {
            cfg.degrees.truncate(1);
        }
        if cfg.solver.max_iterations.is_none() {
            cfg.solver.max_iterations = Some(MAX_ITERATION_CAP);
        }
        if let DataSource::File { .. } = cfg.source {
            cfg.dim = None;
        }
        cfg.validate()?;
        let prepared = prepare(&cfg)?;
        for &level in &plan.levels {
            cfg.levels = level;
            cfg.validate()?;
            let started = std::time::Instant::now();
            let hier = build_hierarchy(&cfg, &prepared.dataset)?;
            let setup_seconds = started.elapsed().as_secs_f64();
            for &method in &plan.methods {
                cfg.solver.precond = method;
                let report = solve(&cfg, &hier, prepared.dataset.responses())?;
                let row = BenchRow {
                    dim: prepared.dataset.dim(),
                    level,
                    unknowns: hier.finest().dimension(),
                    observations: prepared.dataset.len(),
                    method: method.label(),
                    iterations: report.iterations,
                    converged: report.converged,
                    relative_residual: report.relative_residual,
                    setup_seconds,
                    solve_seconds: report.wall_time,
                    auxiliary_reals: report.memory.auxiliary_reals(),
                };
                progress(&row);
                rows.push(row);
            }
        }
    }
    Ok(rows)
}

pub const HEADER: &str =
    "dim\tlevel\tunknowns\tobservations\tmethod\titerations\tconverged\trel_residual\tsetup_s\tsolve_s\taux_reals";

pub fn format_row(r: &BenchRow) -> String {
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{:.3e}\t{:.3}\t{:.3}\t{}",
        r.dim,
        r.level,
        r.unknowns,
        r.observations,
        r.method,
        r.iterations,
        r.converged,
        r.relative_residual,
        r.setup_seconds,
        r.solve_seconds,
        r.auxiliary_reals
    )
}

pub fn format_table(rows: &[BenchRow]) -> String {
    let mut out = String::new();
    writeln!(out, "{HEADER}").unwrap();
    for r in rows {
        writeln!(out, "{}", format_row(r)).unwrap();
    }
    out
}
