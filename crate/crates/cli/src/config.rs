use std::path::PathBuf;

use clap::ValueEnum;
use mgspline_core::analysis::SsorConfig;
use mgspline_core::bspline::MAX_DEGREE;
use mgspline_core::{Execution, JacobiSmoother, PreconditionerKind, SolverConfig};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const MAX_DIM: usize = 8;
pub const MAX_LEVEL: u32 = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Precond {
    None,
    MgJacobi,
    MgSsor,
}

impl Precond {
    pub fn label(self) -> &'static str {
        match self {
            Self::None => "none",
            Self::MgJacobi => "mg-jacobi",
            Self::MgSsor => "mg-ssor",
        }
    }
}

/// How file coordinates are mapped onto the unit cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Domain {
    /// Bounding box of the data.
    Data,
    /// Coordinates are already in `[0, 1]`.
    Unit,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    File { path: PathBuf, domain: Domain },
    Generated { n: usize, noise: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverSettings {
    pub tolerance: f64,
    pub max_iterations: Option<usize>,
    pub nu1: usize,
    pub nu2: usize,
    pub omega: f64,
    pub relaxation: f64,
    pub precond: Precond,
}

impl Default for SolverSettings {
    fn default() -> Self {
        let j = JacobiSmoother::default();
        Self {
            tolerance: mgspline_core::solver::DEFAULT_TOLERANCE,
            max_iterations: None,
            nu1: j.nu1,
            nu2: j.nu2,
            omega: j.omega,
            relaxation: 1.0,
            precond: Precond::MgJacobi,
        }
    }
}

impl SolverSettings {
    pub fn jacobi(&self) -> JacobiSmoother {
        JacobiSmoother {
            nu1: self.nu1,
            nu2: self.nu2,
            omega: self.omega,
        }
    }

    pub fn ssor(&self) -> SsorConfig {
        SsorConfig {
            nu1: self.nu1,
            nu2: self.nu2,
            relaxation: self.relaxation,
        }
    }

    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            preconditioner: match self.precond {
                Precond::None => PreconditionerKind::None,
                _ => PreconditionerKind::Multigrid(self.jacobi()),
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(CliError::Config(format!("--tol must lie in (0, 1), got {}", self.tolerance)));
        }
        if self.max_iterations == Some(0) {
            return Err(CliError::Config("--max-iter must be at least 1".into()));
        }
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(CliError::Config(format!("--omega must lie in (0, 2), got {}", self.omega)));
        }
        if !(self.relaxation > 0.0 && self.relaxation < 2.0) {
            return Err(CliError::Config(format!(
                "--relaxation must lie in (0, 2), got {}",
                self.relaxation
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Required for generated data; checked against the file otherwise.
    pub dim: Option<usize>,
    pub levels: u32,
    /// One entry per axis, or a single entry used for all of them.
    pub degrees: Vec<usize>,
    pub lambda: f64,
    pub solver: SolverSettings,
    pub source: DataSource,
    pub dense_cap: usize,
    pub execution: Execution,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            dim: Some(2),
            levels: 5,
            degrees: vec![3],
            lambda: 1.0,
            solver: SolverSettings::default(),
            source: DataSource::Generated {
                n: 100_000,
                noise: 0.1,
                seed: 42,
            },
            dense_cap: mgspline_core::operator::DEFAULT_DENSE_CAP,
            execution: Execution::Sequential,
            output: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.dim {
            if p == 0 || p > MAX_DIM {
                return Err(CliError::Config(format!("--dim must be in 1..={MAX_DIM}, got {p}")));
            }
        }
        if self.levels == 0 || self.levels > MAX_LEVEL {
            return Err(CliError::Config(format!("--levels must be in 1..={MAX_LEVEL}, got {}", self.levels)));
        }
        if self.degrees.is_empty() || self.degrees.iter().any(|&q| q == 0 || q > MAX_DEGREE) {
            return Err(CliError::Config(format!(
                "--degree entries must be in 1..={MAX_DEGREE}, got {:?}",
                self.degrees
            )));
        }
        if let Some(p) = self.dim {
            if self.degrees.len() != 1 && self.degrees.len() != p {
                return Err(CliError::Config(format!(
                    "--degree needs 1 or {p} entries, got {}",
                    self.degrees.len()
                )));
            }
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(CliError::Config(format!("--lambda must be positive and finite, got {}", self.lambda)));
        }
        if self.dense_cap == 0 {
            return Err(CliError::Config("--dense-cap must be positive".into()));
        }
        self.solver.validate()?;
        match &self.source {
            DataSource::Generated { n, noise, .. } => {
                if self.dim.is_none() {
                    return Err(CliError::Config("--dim is required for generated data".into()));
                }
                if *n == 0 {
                    return Err(CliError::Config("--n must be at least 1".into()));
                }
                if !(*noise >= 0.0 && noise.is_finite()) {
                    return Err(CliError::Config(format!("--noise must be non-negative, got {noise}")));
                }
            }
            DataSource::File { .. } => {}
        }
        Ok(())
    }

    /// Per-axis degrees for dimension `dim`.
    pub fn degrees_for(&self, dim: usize) -> Result<Vec<usize>> {
        match self.degrees.len() {
            1 => Ok(vec![self.degrees[0]; dim]),
            n if n == dim => Ok(self.degrees.clone()),
            n => Err(CliError::Config(format!("--degree needs 1 or {dim} entries, got {n}"))),
        }
    }
}

/// Parses `"4-7"`, `"4,5,7"` or a mix such as `"1,3-4"`.
pub fn parse_list(text: &str) -> Result<Vec<u32>> {
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let bad = || CliError::Config(format!("cannot parse list entry {part:?}"));
        if let Some((a, b)) = part.split_once('-') {
            let a: u32 = a.trim().parse().map_err(|_| bad())?;
            let b: u32 = b.trim().parse().map_err(|_| bad())?;
            if a > b {
                return Err(bad());
            }
            out.extend(a..=b);
        } else {
            out.push(part.parse().map_err(|_| bad())?);
        }
    }
    if out.is_empty() {
        return Err(CliError::Config(format!("empty list {text:?}")));
    }
    Ok(out)
}
