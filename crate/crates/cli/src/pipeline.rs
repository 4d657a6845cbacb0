//! Fit, predict and analysis runs shared by the binary and the tests.

use std::path::{Path, PathBuf};
use std::time::Instant;

use mgspline_core::analysis::{
    jacobi_iteration_matrix, preconditioned_spectrum, probe_preconditioned, spectral_radius, spectrum,
    ssor_iteration_matrix, ssor_vcycle_reference, ProbeKind, SpectrumReport,
};
use mgspline_core::solver::{mgcg_solve_with, MemoryEstimate};
use mgspline_core::{mgcg_solve, CoarseSolverKind, Execution, Hierarchy, HierarchyConfig, ScatteredDataset, SolveReport};
use serde::Serialize;

use crate::config::{DataSource, Domain, Precond, RunConfig};
use crate::data::{fit_scaling, generate, read_observations, scale_points, write_table, AxisScaling, Observations};
use crate::error::{CliError, Result};
use crate::model::{write_coefficients, Model};

/// Observations in raw coordinates, the scaling onto `[0,1]^P` and the
/// dataset the operators are built from.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub observations: Observations,
    pub scaling: Vec<AxisScaling>,
    pub dataset: ScatteredDataset,
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared> {
    let (observations, domain) = match &cfg.source {
        DataSource::Generated { n, noise, seed } => {
            let dim = cfg.dim.ok_or_else(|| CliError::Config("--dim is required for generated data".into()))?;
            (generate(dim, *n, *noise, *seed)?, Domain::Unit)
        }
        DataSource::File { path, domain } => (read_observations(path, cfg.dim)?, *domain),
    };
    let scaling = match domain {
        Domain::Unit => vec![AxisScaling::unit(); observations.dim],
        Domain::Data => fit_scaling(&observations)?,
    };
    let points = scale_points(&observations.points, &scaling);
    let dataset = ScatteredDataset::unit_cube(points, observations.responses.clone(), observations.dim)?;
    Ok(Prepared {
        observations,
        scaling,
        dataset,
    })
}

pub fn build_hierarchy(cfg: &RunConfig, dataset: &ScatteredDataset) -> Result<Hierarchy> {
    let hcfg = HierarchyConfig {
        degrees: Some(cfg.degrees_for(dataset.dim())?),
        smoother: cfg.solver.jacobi(),
        coarse: CoarseSolverKind::Auto,
        dense_cap: cfg.dense_cap,
        execution: cfg.execution,
    };
    Ok(Hierarchy::build(dataset, cfg.levels, cfg.lambda, &hcfg)?)
}

/// Runs the configured solver on the finest level of `hier`.
pub fn solve(cfg: &RunConfig, hier: &Hierarchy, y: &[f64]) -> Result<SolveReport> {
    let scfg = cfg.solver.solver_config();
    match cfg.solver.precond {
        Precond::None | Precond::MgJacobi => Ok(mgcg_solve(hier, y, &scfg)?),
        Precond::MgSsor => {
            let ssor = ssor_vcycle_reference(hier, cfg.solver.ssor())?;
            let mut report = mgcg_solve_with(hier, y, &scfg, &ssor)?;
            // dense level matrices held by the SSOR smoother
            report.memory.scratch += hier.levels().iter().map(|l| l.dimension().pow(2)).sum::<usize>();
            Ok(report)
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MemoryReport {
    pub solver_vectors: usize,
    pub scratch: usize,
    pub design_storage: usize,
    pub auxiliary_reals: usize,
    pub auxiliary_bytes: usize,
}

impl From<MemoryEstimate> for MemoryReport {
    fn from(m: MemoryEstimate) -> Self {
        Self {
            solver_vectors: m.solver_vectors,
            scratch: m.scratch,
            design_storage: m.design_storage,
            auxiliary_reals: m.auxiliary_reals(),
            auxiliary_bytes: m.auxiliary_bytes(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub dim: usize,
    pub levels: u32,
    pub degrees: Vec<usize>,
    pub lambda: f64,
    pub observations: usize,
    pub source: String,
    /// Affine map of each raw coordinate column onto `[0, 1]`.
    pub scaling: Vec<AxisScaling>,
    pub level_dimensions: Vec<usize>,
    pub preconditioner: &'static str,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub nu1: usize,
    pub nu2: usize,
    pub omega: f64,
    pub relaxation: f64,
    pub direct_coarse_solver: bool,
    pub execution: &'static str,
    pub iterations: usize,
    pub converged: bool,
    pub relative_residual: f64,
    pub residual_history: Vec<f64>,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
    pub rms_residual: f64,
    pub memory: MemoryReport,
}

#[derive(Debug, Clone)]
pub struct FitOutcome {
    pub model: Model,
    pub report: FitReport,
    pub prepared: Prepared,
    pub fitted: Vec<f64>,
}

impl FitOutcome {
    pub fn residuals(&self) -> Vec<f64> {
        self.prepared
            .observations
            .responses
            .iter()
            .zip(&self.fitted)
            .map(|(y, f)| y - f)
            .collect()
    }
}

fn describe_source(source: &DataSource) -> String {
    match source {
        DataSource::Generated { n, noise, seed } => format!("generated n={n} noise={noise} seed={seed}"),
        DataSource::File { path, domain } => format!("{} ({domain:?} domain)", path.display()),
    }
}

/// Fits the model. A solve that stops at the iteration limit is still
/// returned; callers check `report.converged`.
pub fn fit(cfg: &RunConfig) -> Result<FitOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let prepared = prepare(cfg)?;
    let hier = build_hierarchy(cfg, &prepared.dataset)?;
    let setup_seconds = started.elapsed().as_secs_f64();

    let solved = solve(cfg, &hier, prepared.dataset.responses())?;
    let finest = hier.finest();
    let fitted = finest.design_apply(&solved.coefficients)?;
    let n = fitted.len();
    let rms_residual = (prepared
        .dataset
        .responses()
        .iter()
        .zip(&fitted)
        .map(|(y, f)| (y - f).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();

    let degrees = cfg.degrees_for(prepared.dataset.dim())?;
    let report = FitReport {
        dim: prepared.dataset.dim(),
        levels: cfg.levels,
        degrees: degrees.clone(),
        lambda: cfg.lambda,
        observations: n,
        source: describe_source(&cfg.source),
        scaling: prepared.scaling.clone(),
        level_dimensions: hier.levels().iter().map(|l| l.dimension()).collect(),
        preconditioner: cfg.solver.precond.label(),
        tolerance: cfg.solver.tolerance,
        max_iterations: cfg.solver.solver_config().iteration_limit(finest.dimension()),
        nu1: cfg.solver.nu1,
        nu2: cfg.solver.nu2,
        omega: cfg.solver.omega,
        relaxation: cfg.solver.relaxation,
        direct_coarse_solver: hier.uses_direct_coarse_solver(),
        execution: match cfg.execution {
            Execution::Sequential => "sequential",
            Execution::Parallel => "parallel",
        },
        iterations: solved.iterations,
        converged: solved.converged,
        relative_residual: solved.relative_residual,
        residual_history: solved.residual_history.clone(),
        setup_seconds,
        solve_seconds: solved.wall_time,
        rms_residual,
        memory: solved.memory.into(),
    };
    let model = Model::new(cfg.levels, degrees, cfg.lambda, prepared.scaling.clone(), solved.coefficients);
    Ok(FitOutcome {
        model,
        report,
        prepared,
        fitted,
    })
}

/// Evaluation grid over the scaling box: 101 points per axis up to two
/// dimensions, 11 beyond.
pub fn grid_points(scaling: &[AxisScaling]) -> Vec<f64> {
    let per_axis: usize = if scaling.len() <= 2 { 101 } else { 11 };
    let total = per_axis.pow(scaling.len() as u32);
    let mut out = Vec::with_capacity(total * scaling.len());
    for flat in 0..total {
        let mut rem = flat;
        let mut idx = vec![0; scaling.len()];
        for p in (0..scaling.len()).rev() {
            idx[p] = rem % per_axis;
            rem /= per_axis;
        }
        for (p, s) in scaling.iter().enumerate() {
            out.push(s.invert(idx[p] as f64 / (per_axis - 1) as f64));
        }
    }
    out
}

fn axis_header(dim: usize) -> Vec<String> {
    (1..=dim).map(|p| format!("x{p}")).collect()
}

/// Writes `model.json`, `coefficients.txt`, `report.json`,
/// `residuals.csv` and `grid.csv` into `dir`.
pub fn write_fit(dir: &Path, outcome: &FitOutcome) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    outcome.model.save(&dir.join("model.json"))?;
    write_coefficients(&dir.join("coefficients.txt"), &outcome.model.coefficients)?;
    let report_path = dir.join("report.json");
    let text = serde_json::to_string_pretty(&outcome.report)?;
    std::fs::write(&report_path, text + "\n").map_err(|e| CliError::io(&report_path, e))?;

    let obs = &outcome.prepared.observations;
    let mut header = axis_header(obs.dim);
    header.extend(["y", "fitted", "residual"].map(String::from));
    let residuals = outcome.residuals();
    write_table(
        &dir.join("residuals.csv"),
        &header,
        (0..obs.len()).map(|i| {
            let mut row = obs.point(i).to_vec();
            row.extend([obs.responses[i], outcome.fitted[i], residuals[i]]);
            row
        }),
    )?;

    let grid = grid_points(&outcome.model.scaling);
    let values = outcome.model.predict(&grid)?;
    let mut header = axis_header(obs.dim);
    header.push("value".into());
    let dim = obs.dim;
    write_table(
        &dir.join("grid.csv"),
        &header,
        values.iter().enumerate().map(|(i, v)| {
            let mut row = grid[i * dim..(i + 1) * dim].to_vec();
            row.push(*v);
            row
        }),
    )
}

/// Reads coordinates (`P` columns, or `P + 1` with the last ignored) and
/// writes them back with a `prediction` column.
pub fn predict_file(model: &Model, input: &Path, output: &Path) -> Result<usize> {
    let (width, rows) = crate::data::read_table(input)?;
    if width != model.dim && width != model.dim + 1 {
        return Err(CliError::Malformed {
            path: input.to_path_buf(),
            line: rows.first().map(|r| r.0).unwrap_or(1),
            message: format!("expected {} or {} columns, found {width}", model.dim, model.dim + 1),
        });
    }
    let mut points = Vec::with_capacity(rows.len() * model.dim);
    for (line, row) in &rows {
        let x = &row[..model.dim];
        if let Some((p, v)) = x
            .iter()
            .enumerate()
            .find(|(p, v)| !(model.scaling[*p].lower..=model.scaling[*p].upper).contains(*v))
        {
            return Err(CliError::Malformed {
                path: input.to_path_buf(),
                line: *line,
                message: format!(
                    "coordinate x{} = {v} lies outside the fitted range [{}, {}]",
                    p + 1,
                    model.scaling[p].lower,
                    model.scaling[p].upper
                ),
            });
        }
        points.extend_from_slice(x);
    }
    let values = model.predict(&points)?;
    let mut header = axis_header(model.dim);
    header.push("prediction".into());
    let dim = model.dim;
    write_table(
        output,
        &header,
        values.iter().enumerate().map(|(i, v)| {
            let mut row = points[i * dim..(i + 1) * dim].to_vec();
            row.push(*v);
            row
        }),
    )?;
    Ok(values.len())
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumSummary {
    pub label: String,
    pub min: f64,
    pub max: f64,
    pub condition_number: f64,
    /// Spectral radius of the V-cycle error propagation matrix.
    pub contraction: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AnalysisOutcome {
    pub dimension: usize,
    pub spectra: Vec<SpectrumReport>,
    pub summaries: Vec<SpectrumSummary>,
}

/// Dense spectra of `A` and of the multigrid-preconditioned operators.
/// Limited to `K ≤ dense_cap`.
pub fn analyze(cfg: &RunConfig, methods: &[Precond]) -> Result<AnalysisOutcome> {
    cfg.validate()?;
    let prepared = prepare(cfg)?;
    let hier = build_hierarchy(cfg, &prepared.dataset)?;
    let a = hier.finest().assemble_dense(cfg.dense_cap)?;
    let mut spectra = Vec::new();
    let mut summaries = Vec::new();
    for &method in methods {
        let (report, contraction) = match method {
            Precond::None => (spectrum(&a, method.label())?, None),
            Precond::MgJacobi => {
                let probe = probe_preconditioned(&hier, ProbeKind::Jacobi(cfg.solver.jacobi()))?;
                let c = jacobi_iteration_matrix(&hier, &cfg.solver.jacobi())?;
                (preconditioned_spectrum(&probe, &a, method.label())?, Some(spectral_radius(&c)?))
            }
            Precond::MgSsor => {
                let probe = probe_preconditioned(&hier, ProbeKind::Ssor(cfg.solver.ssor()))?;
                let c = ssor_iteration_matrix(&hier, cfg.solver.ssor())?;
                (preconditioned_spectrum(&probe, &a, method.label())?, Some(spectral_radius(&c)?))
            }
        };
        summaries.push(SpectrumSummary {
            label: report.label.clone(),
            min: report.min(),
            max: report.max(),
            condition_number: report.condition_number,
            contraction,
        });
        spectra.push(report);
    }
    Ok(AnalysisOutcome {
        dimension: a.nrows(),
        spectra,
        summaries,
    })
}

/// Writes `spectra.csv` (one eigenvalue per row) and `analysis.json`.
pub fn write_analysis(dir: &Path, outcome: &AnalysisOutcome) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path: PathBuf = dir.join("spectra.csv");
    let mut text = String::from("method,index,eigenvalue\n");
    for s in &outcome.spectra {
        for (i, v) in s.eigenvalues.iter().enumerate() {
            text.push_str(&format!("{},{i},{v:e}\n", s.label));
        }
    }
    std::fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    let json = dir.join("analysis.json");
    let text = serde_json::to_string_pretty(&outcome.summaries)?;
    std::fs::write(&json, text + "\n").map_err(|e| CliError::io(&json, e))
}
