//! Grid hierarchy, damped Jacobi smoothing, subdivision-based transfers and
//! the memory-efficient V-cycle.
//!
//! Levels are numbered `g = 1` (coarsest) to `g = G` (finest) in the public
//! API. Prolongation from `g` to `g + 1` is the Kronecker product of the
//! per-axis subdivision matrices; restriction is its transpose, so the
//! coarse operators satisfy `A_g = I' A_{g+1} I` exactly.

use nalgebra::{Cholesky, DMatrix, DVectorViewMut, Dyn};

use crate::error::{check_len, Error, Result};
use crate::operator::{ApplyWorkspace, LevelOperator, LinearOperator, ScatteredDataset, DEFAULT_DENSE_CAP};
use crate::solver::conjugate_gradient;
use crate::tensorops::{kron_matvec_with, KronWorkspace, KroneckerFactors};
use crate::Execution;

/// Relative tolerance for the nested CG coarse solver.
pub const NESTED_CG_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiSmoother {
    pub nu1: usize,
    pub nu2: usize,
    pub omega: f64,
}

impl Default for JacobiSmoother {
    fn default() -> Self {
        Self {
            nu1: 2,
            nu2: 2,
            omega: 0.8,
        }
    }
}

impl JacobiSmoother {
    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(Error::Parameter(format!(
                "Jacobi damping must lie in (0, 2), got {}",
                self.omega
            )));
        }
        Ok(())
    }
}

/// A smoothing iteration usable inside the V-cycle. `level` is the
/// zero-based index into the hierarchy.
pub trait Smoother {
    fn pre_steps(&self) -> usize;
    fn post_steps(&self) -> usize;

    #[allow(clippy::too_many_arguments)]
    fn smooth(
        &self,
        op: &LevelOperator,
        level: usize,
        x: &mut [f64],
        b: &[f64],
        steps: usize,
        work: &mut [f64],
        ws: &mut ApplyWorkspace,
    ) -> Result<()>;
}

impl Smoother for JacobiSmoother {
    fn pre_steps(&self) -> usize {
        self.nu1
    }

    fn post_steps(&self) -> usize {
        self.nu2
    }

    fn smooth(
        &self,
        op: &LevelOperator,
        _level: usize,
        x: &mut [f64],
        b: &[f64],
        steps: usize,
        work: &mut [f64],
        ws: &mut ApplyWorkspace,
    ) -> Result<()> {
        jacobi_smooth_with(op, x, b, steps, self.omega, work, ws)
    }
}

/// `ν` damped Jacobi sweeps `α ← α + ω D^{-1} (b − A α)`.
pub fn jacobi_smooth<A: LinearOperator + ?Sized>(op: &A, alpha: &[f64], b: &[f64], steps: usize, omega: f64) -> Result<Vec<f64>> {
    JacobiSmoother { nu1: steps, nu2: steps, omega }.validate()?;
    check_len(op.dimension(), alpha.len())?;
    check_len(op.dimension(), b.len())?;
    let mut x = alpha.to_vec();
    let mut work = vec![0.0; op.dimension()];
    let mut ws = ApplyWorkspace::default();
    jacobi_smooth_with(op, &mut x, b, steps, omega, &mut work, &mut ws)?;
    Ok(x)
}

pub fn jacobi_smooth_with<A: LinearOperator + ?Sized>(
    op: &A,
    x: &mut [f64],
    b: &[f64],
    steps: usize,
    omega: f64,
    work: &mut [f64],
    ws: &mut ApplyWorkspace,
) -> Result<()> {
    let diag = op.diagonal();
    for _ in 0..steps {
        op.apply_into(x, work, ws)?;
        for ((xi, (bi, ai)), di) in x.iter_mut().zip(b.iter().zip(work.iter())).zip(diag) {
            *xi += omega * (bi - ai) / di;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoarseSolverKind {
    /// Cholesky when `K_1` fits under the dense cap, nested CG otherwise.
    Auto,
    Direct,
    Iterative { tolerance: f64 },
}

#[derive(Debug, Clone)]
pub struct HierarchyConfig {
    /// Per-axis degrees; `None` means cubic on every axis.
    pub degrees: Option<Vec<usize>>,
    pub smoother: JacobiSmoother,
    pub coarse: CoarseSolverKind,
    pub dense_cap: usize,
    pub execution: Execution,
}

impl Default for HierarchyConfig {
    fn default() -> Self {
        Self {
            degrees: None,
            smoother: JacobiSmoother::default(),
            coarse: CoarseSolverKind::Auto,
            dense_cap: DEFAULT_DENSE_CAP,
            execution: Execution::Sequential,
        }
    }
}

#[derive(Debug, Clone)]
enum CoarseSolver {
    Direct(Cholesky<f64, Dyn>),
    Iterative { tolerance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferDirection {
    Prolong,
    Restrict,
}

#[derive(Debug, Clone)]
pub struct Hierarchy {
    levels: Vec<LevelOperator>,
    prolongations: Vec<KroneckerFactors>,
    coarse: CoarseSolver,
    smoother: JacobiSmoother,
    dense_cap: usize,
}

impl Hierarchy {
    pub fn build(data: &ScatteredDataset, levels: u32, lambda: f64, config: &HierarchyConfig) -> Result<Self> {
        if levels == 0 {
            return Err(Error::Parameter("at least one grid level is required".into()));
        }
        config.smoother.validate()?;
        let degrees = config
            .degrees
            .clone()
            .unwrap_or_else(|| vec![3; data.dim()]);
        let ops = (1..=levels)
            .map(|g| LevelOperator::build_with(data, g, &degrees, lambda, config.execution))
            .collect::<Result<Vec<_>>>()?;
        let prolongations = ops
            .windows(2)
            .map(|pair| {
                let factors = pair[0]
                    .spaces()
                    .iter()
                    .zip(pair[1].spaces())
                    .map(|(c, f)| Ok(c.subdivision_to(f)?.to_factor()))
                    .collect::<Result<Vec<_>>>()?;
                KroneckerFactors::new(factors)
            })
            .collect::<Result<Vec<_>>>()?;

        let k1 = ops[0].dimension();
        let coarse = match config.coarse {
            CoarseSolverKind::Iterative { tolerance } => {
                if !(tolerance > 0.0 && tolerance < 1.0) {
                    return Err(Error::Parameter(format!("nested CG tolerance {tolerance} outside (0, 1)")));
                }
                CoarseSolver::Iterative { tolerance }
            }
            CoarseSolverKind::Auto if k1 > config.dense_cap => CoarseSolver::Iterative {
                tolerance: NESTED_CG_TOLERANCE,
            },
            CoarseSolverKind::Auto | CoarseSolverKind::Direct => {
                let a1 = ops[0].assemble_dense(config.dense_cap)?;
                let factor = Cholesky::new(a1).ok_or_else(|| Error::Numeric {
                    level: 1,
                    reason: "coarse matrix is not positive definite".into(),
                })?;
                CoarseSolver::Direct(factor)
            }
        };
        Ok(Self {
            levels: ops,
            prolongations,
            coarse,
            smoother: config.smoother,
            dense_cap: config.dense_cap,
        })
    }

    /// Number of levels `G`.
    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn levels(&self) -> &[LevelOperator] {
        &self.levels
    }

    /// Operator on level `g` (1-based).
    pub fn level(&self, g: usize) -> &LevelOperator {
        &self.levels[g - 1]
    }

    pub fn finest(&self) -> &LevelOperator {
        self.levels.last().expect("non-empty hierarchy")
    }

    pub fn smoother(&self) -> JacobiSmoother {
        self.smoother
    }

    pub fn dense_cap(&self) -> usize {
        self.dense_cap
    }

    pub fn uses_direct_coarse_solver(&self) -> bool {
        matches!(self.coarse, CoarseSolver::Direct(_))
    }

    /// Kronecker factors of the prolongation from level `g` to `g + 1`.
    pub fn prolongation(&self, g: usize) -> &KroneckerFactors {
        &self.prolongations[g - 1]
    }

    /// Prolongs from level `g` to `g + 1`, or restricts from `g + 1` to `g`.
    pub fn transfer(&self, g: usize, v: &[f64], direction: TransferDirection) -> Result<Vec<f64>> {
        if g == 0 || g >= self.depth() {
            return Err(Error::Parameter(format!(
                "transfer level {g} must lie in 1..{}",
                self.depth()
            )));
        }
        let mut kron = KronWorkspace::default();
        let transposed = direction == TransferDirection::Restrict;
        Ok(kron_matvec_with(&self.prolongations[g - 1], v, &mut kron, transposed)?.to_vec())
    }

    pub fn coarse_solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let mut x = vec![0.0; self.levels[0].dimension()];
        let mut ws = ApplyWorkspace::for_operator(&self.levels[0]);
        self.coarse_solve_into(b, &mut x, &mut ws)?;
        Ok(x)
    }

    fn coarse_solve_into(&self, b: &[f64], x: &mut [f64], ws: &mut ApplyWorkspace) -> Result<()> {
        let k1 = self.levels[0].dimension();
        check_len(k1, b.len())?;
        match &self.coarse {
            CoarseSolver::Direct(factor) => {
                x.copy_from_slice(b);
                let mut view = DVectorViewMut::from_slice(x, k1);
                factor.solve_mut(&mut view);
            }
            CoarseSolver::Iterative { tolerance } => {
                x.fill(0.0);
                let max_iter = (10 * k1).max(100);
                let outcome = conjugate_gradient(&self.levels[0], b, x, *tolerance, max_iter, ws)?;
                if !outcome.converged {
                    return Err(Error::Numeric {
                        level: 1,
                        reason: format!(
                            "nested CG stalled at relative residual {:.3e} after {} iterations",
                            outcome.relative_residual, outcome.iterations
                        ),
                    });
                }
            }
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                level: 1,
                reason: "coarse solve produced non-finite values".into(),
            });
        }
        Ok(())
    }

    pub fn workspace(&self) -> VCycleWorkspace {
        VCycleWorkspace::new(self)
    }

    /// One V-cycle on level `g` with the hierarchy's Jacobi smoother.
    pub fn v_cycle(&self, alpha: &[f64], b: &[f64], g: usize) -> Result<Vec<f64>> {
        let mut x = alpha.to_vec();
        let mut ws = self.workspace();
        self.v_cycle_with(&self.smoother, &mut x, b, g, &mut ws)?;
        Ok(x)
    }

    /// In-place V-cycle on level `g` (1-based) with any smoother.
    pub fn v_cycle_with<S: Smoother + ?Sized>(
        &self,
        smoother: &S,
        x: &mut [f64],
        b: &[f64],
        g: usize,
        ws: &mut VCycleWorkspace,
    ) -> Result<()> {
        if g == 0 || g > self.depth() {
            return Err(Error::Parameter(format!("level {g} outside 1..={}", self.depth())));
        }
        let k = self.levels[g - 1].dimension();
        check_len(k, x.len())?;
        check_len(k, b.len())?;
        self.cycle(smoother, g - 1, x, b, ws)
    }

    fn cycle<S: Smoother + ?Sized>(
        &self,
        smoother: &S,
        idx: usize,
        x: &mut [f64],
        b: &[f64],
        ws: &mut VCycleWorkspace,
    ) -> Result<()> {
        if idx == 0 {
            return self.coarse_solve_into(b, x, &mut ws.apply);
        }
        let op = &self.levels[idx];
        let mut work = std::mem::take(&mut ws.levels[idx].work);
        let mut coarse_x = std::mem::take(&mut ws.levels[idx - 1].x);
        let mut coarse_b = std::mem::take(&mut ws.levels[idx - 1].rhs);

        let result = (|| -> Result<()> {
            smoother.smooth(op, idx, x, b, smoother.pre_steps(), &mut work, &mut ws.apply)?;
            op.apply_into(x, &mut work, &mut ws.apply)?;
            for (w, bi) in work.iter_mut().zip(b) {
                *w -= bi;
            }
            let restricted = kron_matvec_with(&self.prolongations[idx - 1], &work, &mut ws.apply.kron, true)?;
            coarse_b.copy_from_slice(restricted);
            coarse_x.fill(0.0);
            self.cycle(smoother, idx - 1, &mut coarse_x, &coarse_b, ws)?;
            let correction = kron_matvec_with(&self.prolongations[idx - 1], &coarse_x, &mut ws.apply.kron, false)?;
            for (xi, e) in x.iter_mut().zip(correction) {
                *xi -= e;
            }
            smoother.smooth(op, idx, x, b, smoother.post_steps(), &mut work, &mut ws.apply)
        })();

        ws.levels[idx].work = work;
        ws.levels[idx - 1].x = coarse_x;
        ws.levels[idx - 1].rhs = coarse_b;
        result
    }
}

#[derive(Debug, Default, Clone)]
struct LevelBuffers {
    x: Vec<f64>,
    rhs: Vec<f64>,
    work: Vec<f64>,
}

/// Preallocated buffers for repeated V-cycles. The finest level's `x` and
/// `b` belong to the caller, so only its residual buffer is held here.
#[derive(Debug, Clone)]
pub struct VCycleWorkspace {
    levels: Vec<LevelBuffers>,
    apply: ApplyWorkspace,
}

impl VCycleWorkspace {
    fn new(hier: &Hierarchy) -> Self {
        let top = hier.depth() - 1;
        let levels = hier
            .levels
            .iter()
            .enumerate()
            .map(|(i, op)| {
                let k = op.dimension();
                LevelBuffers {
                    x: if i < top { vec![0.0; k] } else { Vec::new() },
                    rhs: if i < top { vec![0.0; k] } else { Vec::new() },
                    work: if i > 0 { vec![0.0; k] } else { Vec::new() },
                }
            })
            .collect();
        let kron_len = hier
            .levels
            .iter()
            .map(LevelOperator::kron_scratch_len)
            .chain(
                hier.prolongations
                    .iter()
                    .flat_map(|p| [p.max_intermediate(false), p.max_intermediate(true)]),
            )
            .max()
            .unwrap_or(0);
        Self {
            levels,
            apply: ApplyWorkspace::with_kron_capacity(kron_len),
        }
    }

    /// Reals held by all buffers.
    pub fn len(&self) -> usize {
        self.levels
            .iter()
            .map(|l| l.x.len() + l.rhs.len() + l.work.len())
            .sum::<usize>()
            + self.apply.kron.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Operator scratch, sized for every level and transfer.
    pub fn apply_workspace(&mut self) -> &mut ApplyWorkspace {
        &mut self.apply
    }
}

/// `C_MG`-style diagnostics need the dense level matrices; this helper
/// assembles all of them under the hierarchy's cap.
pub fn assemble_levels(hier: &Hierarchy) -> Result<Vec<DMatrix<f64>>> {
    hier.levels
        .iter()
        .map(|op| op.assemble_dense(hier.dense_cap))
        .collect()
}
