use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mgspline_cli::bench::{self, BenchPlan};
use mgspline_cli::config::parse_list;
use mgspline_cli::data::{generate, write_observations};
use mgspline_cli::model::Model;
use mgspline_cli::pipeline::{analyze, fit, predict_file, write_analysis, write_fit};
use mgspline_cli::{CliError, DataSource, Domain, Precond, Result, RunConfig, SolverSettings};
use mgspline_core::operator::DEFAULT_DENSE_CAP;
use mgspline_core::Execution;

/// Penalized tensor-product spline smoothing with multigrid-preconditioned CG.
///
/// Every option can also be set through an `MGSPLINE_*` environment
/// variable; command-line flags take precedence.
#[derive(Debug, Parser)]
#[command(name = "mgspline", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write synthetic sigmoid data to a CSV file.
    Generate {
        #[arg(long, env = "MGSPLINE_DIM")]
        dim: usize,
        #[arg(long, env = "MGSPLINE_N", default_value_t = 100_000)]
        n: usize,
        #[arg(long, env = "MGSPLINE_NOISE", default_value_t = 0.1)]
        noise: f64,
        #[arg(long, env = "MGSPLINE_SEED", default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Fit a smoother and write the model, coefficients and diagnostics.
    Fit {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, env = "MGSPLINE_PRECOND", value_enum, default_value_t = Precond::MgJacobi)]
        precond: Precond,
        /// Output directory.
        #[arg(long, default_value = "mgspline-out")]
        output: PathBuf,
    },
    /// Evaluate a fitted model at the coordinates of a CSV file.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Dense spectra and condition numbers of the (preconditioned) system.
    Analyze {
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Repeat or separate with commas.
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Precond::None, Precond::MgJacobi, Precond::MgSsor])]
        precond: Vec<Precond>,
        /// Directory for `spectra.csv` and `analysis.json`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Iteration counts and timings over dimensions, levels and methods.
    Bench {
        /// Dimensions, e.g. `1-3` or `2,4`.
        #[arg(long = "dims", env = "MGSPLINE_DIMS", default_value = "2")]
        dims: String,
        /// Levels, e.g. `4-7` or `4,5,6,7`.
        #[arg(long = "levels", env = "MGSPLINE_LEVEL_LIST", default_value = "4-7")]
        levels: String,
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        data: DataArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Repeat or separate with commas.
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Precond::None, Precond::MgJacobi])]
        precond: Vec<Precond>,
        /// Also write the table to this file.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// Number of covariates; taken from the input file when omitted.
    #[arg(long, env = "MGSPLINE_DIM")]
    dim: Option<usize>,
    /// Finest level `G`; each axis gets `2^G` cells.
    #[arg(long, env = "MGSPLINE_LEVELS", default_value_t = 5)]
    levels: u32,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Debug, Args)]
struct CommonArgs {
    #[arg(long, env = "MGSPLINE_LAMBDA", default_value_t = 1.0)]
    lambda: f64,
    /// One degree for all axes, or a comma-separated list per axis.
    #[arg(long, env = "MGSPLINE_DEGREE", value_delimiter = ',', default_value = "3")]
    degree: Vec<usize>,
    /// Largest system assembled densely (coarse Cholesky, spectra).
    #[arg(long, env = "MGSPLINE_DENSE_CAP", default_value_t = DEFAULT_DENSE_CAP)]
    dense_cap: usize,
    /// Parallel loops over data points.
    #[arg(long, env = "MGSPLINE_PARALLEL")]
    parallel: bool,
    /// Force sequential execution so output is bit-reproducible.
    #[arg(long, env = "MGSPLINE_DETERMINISTIC")]
    deterministic: bool,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// CSV with `P` coordinate columns and a response column. Synthetic
    /// data is generated when omitted.
    #[arg(long, env = "MGSPLINE_INPUT")]
    input: Option<PathBuf>,
    #[arg(long, env = "MGSPLINE_DOMAIN", value_enum, default_value_t = Domain::Data)]
    domain: Domain,
    #[arg(long, env = "MGSPLINE_N", default_value_t = 100_000)]
    n: usize,
    #[arg(long, env = "MGSPLINE_NOISE", default_value_t = 0.1)]
    noise: f64,
    #[arg(long, env = "MGSPLINE_SEED", default_value_t = 42)]
    seed: u64,
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Relative residual tolerance.
    #[arg(long, env = "MGSPLINE_TOL", default_value_t = mgspline_core::solver::DEFAULT_TOLERANCE)]
    tol: f64,
    /// Defaults to `10 sqrt(K)`.
    #[arg(long, env = "MGSPLINE_MAX_ITER")]
    max_iter: Option<usize>,
    #[arg(long, env = "MGSPLINE_NU1", default_value_t = 2)]
    nu1: usize,
    #[arg(long, env = "MGSPLINE_NU2", default_value_t = 2)]
    nu2: usize,
    /// Jacobi damping.
    #[arg(long, env = "MGSPLINE_OMEGA", default_value_t = 0.8)]
    omega: f64,
    /// SSOR relaxation.
    #[arg(long, env = "MGSPLINE_RELAXATION", default_value_t = 1.0)]
    relaxation: f64,
}

impl SolverArgs {
    fn settings(&self, precond: Precond) -> SolverSettings {
        SolverSettings {
            tolerance: self.tol,
            max_iterations: self.max_iter,
            nu1: self.nu1,
            nu2: self.nu2,
            omega: self.omega,
            relaxation: self.relaxation,
            precond,
        }
    }
}

impl DataArgs {
    fn source(&self) -> DataSource {
        match &self.input {
            Some(path) => DataSource::File {
                path: path.clone(),
                domain: self.domain,
            },
            None => DataSource::Generated {
                n: self.n,
                noise: self.noise,
                seed: self.seed,
            },
        }
    }
}

fn run_config(
    dim: Option<usize>,
    levels: u32,
    common: &CommonArgs,
    data: &DataArgs,
    solver: &SolverArgs,
    precond: Precond,
) -> Result<RunConfig> {
    let cfg = RunConfig {
        dim: dim.or(if data.input.is_none() { Some(2) } else { None }),
        levels,
        degrees: common.degree.clone(),
        lambda: common.lambda,
        solver: solver.settings(precond),
        source: data.source(),
        dense_cap: common.dense_cap,
        execution: if common.parallel && !common.deterministic {
            Execution::Parallel
        } else {
            Execution::Sequential
        },
        output: None,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            dim,
            n,
            noise,
            seed,
            output,
        } => {
            let obs = generate(dim, n, noise, seed)?;
            write_observations(&output, &obs)?;
            eprintln!("wrote {} observations to {}", obs.len(), output.display());
        }
        Command::Fit {
            model,
            data,
            solver,
            precond,
            output,
        } => {
            let mut cfg = run_config(model.dim, model.levels, &model.common, &data, &solver, precond)?;
            cfg.output = Some(output.clone());
            let outcome = fit(&cfg)?;
            write_fit(&output, &outcome)?;
            let r = &outcome.report;
            println!(
                "K={} n={} method={} iterations={} converged={} rel_residual={:.3e} rms_residual={:.6} solve_s={:.3}",
                r.level_dimensions.last().copied().unwrap_or(0),
                r.observations,
                r.preconditioner,
                r.iterations,
                r.converged,
                r.relative_residual,
                r.rms_residual,
                r.solve_seconds
            );
            if !r.converged {
                return Err(CliError::NotConverged {
                    iterations: r.iterations,
                    residual: r.relative_residual,
                });
            }
        }
        Command::Predict { model, input, output } => {
            let m = Model::load(&model)?;
            let count = predict_file(&m, &input, &output)?;
            eprintln!("wrote {count} predictions to {}", output.display());
        }
        Command::Analyze {
            model,
            data,
            solver,
            precond,
            output,
        } => {
            let cfg = run_config(model.dim, model.levels, &model.common, &data, &solver, Precond::MgJacobi)?;
            let outcome = analyze(&cfg, &precond)?;
            println!("method\tmin\tmax\tcondition\tcontraction\t(K={})", outcome.dimension);
            for s in &outcome.summaries {
                let rho = s.contraction.map(|r| format!("{r:.4}")).unwrap_or_else(|| "-".into());
                println!("{}\t{:.4e}\t{:.4e}\t{:.4e}\t{rho}", s.label, s.min, s.max, s.condition_number);
            }
            if let Some(dir) = output {
                write_analysis(&dir, &outcome)?;
            }
        }
        Command::Bench {
            dims,
            levels,
            common,
            data,
            solver,
            precond,
            output,
        } => {
            let dims: Vec<usize> = parse_list(&dims)?.into_iter().map(|d| d as usize).collect();
            let levels = parse_list(&levels)?;
            let base = run_config(
                Some(dims[0]),
                levels[0],
                &common,
                &data,
                &solver,
                precond.first().copied().unwrap_or(Precond::MgJacobi),
            )?;
            let plan = BenchPlan {
                dims,
                levels,
                methods: precond,
                base,
            };
            println!("{}", bench::HEADER);
            let rows = bench::run(&plan, |row| println!("{}", bench::format_row(row)))?;
            if let Some(path) = output {
                std::fs::write(&path, bench::format_table(&rows)).map_err(|e| CliError::io(&path, e))?;
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
