//! Plain and multigrid-preconditioned conjugate gradients.

use std::time::Instant;

use crate::error::{check_len, Error, Result};
use crate::multigrid::{Hierarchy, JacobiSmoother, Smoother, VCycleWorkspace};
use crate::operator::{ApplyWorkspace, LinearOperator};

pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const MAX_ITERATION_CAP: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PreconditionerKind {
    None,
    Multigrid(JacobiSmoother),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Bound on `‖r_k‖ / ‖b‖`.
    pub tolerance: f64,
    /// `None` selects `10 sqrt(K)`, capped at [`MAX_ITERATION_CAP`].
    pub max_iterations: Option<usize>,
    pub preconditioner: PreconditionerKind,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
            max_iterations: None,
            preconditioner: PreconditionerKind::Multigrid(JacobiSmoother::default()),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0 && self.tolerance < 1.0) {
            return Err(Error::Parameter(format!("tolerance must lie in (0, 1), got {}", self.tolerance)));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::Parameter("max_iterations must be at least 1".into()));
        }
        if let PreconditionerKind::Multigrid(s) = self.preconditioner {
            s.validate()?;
        }
        Ok(())
    }

    pub fn iteration_limit(&self, dimension: usize) -> usize {
        self.max_iterations.unwrap_or_else(|| {
            ((10.0 * (dimension as f64).sqrt()).ceil() as usize).clamp(1, MAX_ITERATION_CAP)
        })
    }
}

/// Analytic count of the buffers a solve allocates, in reals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MemoryEstimate {
    /// Krylov vectors of the outer iteration.
    pub solver_vectors: usize,
    /// V-cycle level buffers plus Kronecker scratch.
    pub scratch: usize,
    /// Activation tables of every level held by the operators.
    pub design_storage: usize,
}

impl MemoryEstimate {
    pub fn auxiliary_reals(&self) -> usize {
        self.solver_vectors + self.scratch
    }

    pub fn auxiliary_bytes(&self) -> usize {
        self.auxiliary_reals() * std::mem::size_of::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `‖r_k‖₂` for `k = 0, 1, ...` from the recursively updated residual.
    pub residual_history: Vec<f64>,
    pub wall_time: f64,
    pub memory: MemoryEstimate,
    pub converged: bool,
    pub relative_residual: f64,
    pub coefficients: Vec<f64>,
}

impl SolveReport {
    pub fn peak_auxiliary_memory_estimate(&self) -> usize {
        self.memory.auxiliary_bytes()
    }
}

pub trait Preconditioner {
    /// `z = M^{-1} r`.
    fn apply(&mut self, r: &[f64], z: &mut [f64]) -> Result<()>;
    /// Workspace the outer iteration may borrow for operator products.
    fn workspace(&mut self) -> &mut ApplyWorkspace;
    /// Reals of scratch owned by the preconditioner.
    fn scratch_len(&self) -> usize;
}

pub struct IdentityPreconditioner {
    ws: ApplyWorkspace,
}

impl IdentityPreconditioner {
    pub fn new(ws: ApplyWorkspace) -> Self {
        Self { ws }
    }
}

impl Preconditioner for IdentityPreconditioner {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) -> Result<()> {
        z.copy_from_slice(r);
        Ok(())
    }

    fn workspace(&mut self) -> &mut ApplyWorkspace {
        &mut self.ws
    }

    fn scratch_len(&self) -> usize {
        self.ws.kron.len()
    }
}

/// One V-cycle from a zero initial guess on the finest level.
pub struct MultigridPreconditioner<'h, S: Smoother + ?Sized> {
    hierarchy: &'h Hierarchy,
    smoother: &'h S,
    ws: VCycleWorkspace,
}

impl<'h, S: Smoother + ?Sized> MultigridPreconditioner<'h, S> {
    pub fn new(hierarchy: &'h Hierarchy, smoother: &'h S) -> Self {
        Self {
            hierarchy,
            smoother,
            ws: hierarchy.workspace(),
        }
    }
}

impl<S: Smoother + ?Sized> Preconditioner for MultigridPreconditioner<'_, S> {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) -> Result<()> {
        z.fill(0.0);
        let g = self.hierarchy.depth();
        self.hierarchy.v_cycle_with(self.smoother, z, r, g, &mut self.ws)
    }

    fn workspace(&mut self) -> &mut ApplyWorkspace {
        self.ws.apply_workspace()
    }

    fn scratch_len(&self) -> usize {
        self.ws.len()
    }
}

pub(crate) struct CgOutcome {
    pub iterations: usize,
    pub converged: bool,
    pub relative_residual: f64,
}

/// Unpreconditioned CG on `A x = b` from the given `x`, used as the nested
/// coarse solver.
pub(crate) fn conjugate_gradient<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    x: &mut [f64],
    tolerance: f64,
    max_iterations: usize,
    ws: &mut ApplyWorkspace,
) -> Result<CgOutcome> {
    let n = op.dimension();
    let mut r = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut history = Vec::new();
    cg_iterate(op, b, x, &mut r, &mut p, &mut v, tolerance, max_iterations, ws, &mut history)
}

#[allow(clippy::too_many_arguments)]
fn cg_iterate<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    x: &mut [f64],
    r: &mut [f64],
    p: &mut [f64],
    v: &mut [f64],
    tolerance: f64,
    max_iterations: usize,
    ws: &mut ApplyWorkspace,
    history: &mut Vec<f64>,
) -> Result<CgOutcome> {
    let b_norm = norm(b);
    op.apply_into(x, v, ws)?;
    for ((ri, bi), vi) in r.iter_mut().zip(b).zip(v.iter()) {
        *ri = bi - vi;
    }
    p.copy_from_slice(r);
    let mut rr = dot(r, r);
    history.push(rr.sqrt());
    if b_norm == 0.0 {
        x.fill(0.0);
        return Ok(CgOutcome {
            iterations: 0,
            converged: true,
            relative_residual: 0.0,
        });
    }
    let mut relative = rr.sqrt() / b_norm;
    let mut iterations = 0;
    while relative > tolerance && iterations < max_iterations {
        iterations += 1;
        op.apply_into(p, v, ws)?;
        let pv = dot(p, v);
        let step = rr / pv;
        if !step.is_finite() {
            return Err(Error::Divergence { iteration: iterations });
        }
        axpy(step, p, x);
        axpy(-step, v, r);
        let rr_new = dot(r, r);
        if !rr_new.is_finite() {
            return Err(Error::Divergence { iteration: iterations });
        }
        let beta = rr_new / rr;
        for (pi, ri) in p.iter_mut().zip(r.iter()) {
            *pi = ri + beta * *pi;
        }
        rr = rr_new;
        history.push(rr.sqrt());
        relative = rr.sqrt() / b_norm;
    }
    Ok(CgOutcome {
        iterations,
        converged: relative <= tolerance,
        relative_residual: relative,
    })
}

/// Plain CG on `A α = b` from `α = 0`.
pub fn cg_solve<A: LinearOperator + ?Sized>(op: &A, b: &[f64], cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    let n = op.dimension();
    check_len(n, b.len())?;
    let start = Instant::now();
    let mut x = vec![0.0; n];
    let mut r = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut ws = ApplyWorkspace::default();
    let mut history = Vec::new();
    let outcome = cg_iterate(
        op,
        b,
        &mut x,
        &mut r,
        &mut p,
        &mut v,
        cfg.tolerance,
        cfg.iteration_limit(n),
        &mut ws,
        &mut history,
    )?;
    Ok(SolveReport {
        iterations: outcome.iterations,
        residual_history: history,
        wall_time: start.elapsed().as_secs_f64(),
        memory: MemoryEstimate {
            solver_vectors: 4 * n,
            scratch: ws.kron.len(),
            design_storage: 0,
        },
        converged: outcome.converged,
        relative_residual: outcome.relative_residual,
        coefficients: x,
    })
}

/// Preconditioned CG from `α = 0`:
/// `r = b, z = M^{-1} r, p = z`, then per step `v = A p`,
/// `w = r'z / p'v`, `α += w p`, `r -= w v`, `z = M^{-1} r`,
/// `p = z + (r'z / r̃'z̃) p`.
pub fn pcg<A: LinearOperator + ?Sized, M: Preconditioner + ?Sized>(
    op: &A,
    b: &[f64],
    precond: &mut M,
    cfg: &SolverConfig,
) -> Result<SolveReport> {
    cfg.validate()?;
    let n = op.dimension();
    check_len(n, b.len())?;
    let start = Instant::now();
    let max_iterations = cfg.iteration_limit(n);

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut v = vec![0.0; n];

    let b_norm = norm(b);
    let mut history = vec![b_norm];
    let mut iterations = 0;
    let mut relative = if b_norm == 0.0 { 0.0 } else { 1.0 };

    if b_norm > 0.0 {
        precond.apply(&r, &mut z)?;
        p.copy_from_slice(&z);
        let mut rz = dot(&r, &z);
        while relative > cfg.tolerance && iterations < max_iterations {
            iterations += 1;
            op.apply_into(&p, &mut v, precond.workspace())?;
            let step = rz / dot(&p, &v);
            if !step.is_finite() {
                return Err(Error::Divergence { iteration: iterations });
            }
            axpy(step, &p, &mut x);
            axpy(-step, &v, &mut r);
            let r_norm = norm(&r);
            if !r_norm.is_finite() {
                return Err(Error::Divergence { iteration: iterations });
            }
            history.push(r_norm);
            relative = r_norm / b_norm;
            if relative <= cfg.tolerance {
                break;
            }
            precond.apply(&r, &mut z)?;
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            if !beta.is_finite() {
                return Err(Error::Divergence { iteration: iterations });
            }
            for (pi, zi) in p.iter_mut().zip(&z) {
                *pi = zi + beta * *pi;
            }
            rz = rz_new;
        }
    }

    Ok(SolveReport {
        iterations,
        residual_history: history,
        wall_time: start.elapsed().as_secs_f64(),
        memory: MemoryEstimate {
            solver_vectors: 5 * n,
            scratch: precond.scratch_len(),
            design_storage: 0,
        },
        converged: relative <= cfg.tolerance,
        relative_residual: relative,
        coefficients: x,
    })
}

/// Solves `A_G α = Φ_G' y` on the finest level of the hierarchy, with the
/// preconditioner selected by `cfg`.
pub fn mgcg_solve(hier: &Hierarchy, y: &[f64], cfg: &SolverConfig) -> Result<SolveReport> {
    let op = hier.finest();
    let b = op.rhs(y)?;
    let mut report = match cfg.preconditioner {
        PreconditionerKind::None => {
            let mut id = IdentityPreconditioner::new(ApplyWorkspace::for_operator(op));
            pcg(op, &b, &mut id, cfg)?
        }
        PreconditionerKind::Multigrid(smoother) => {
            let mut mg = MultigridPreconditioner::new(hier, &smoother);
            pcg(op, &b, &mut mg, cfg)?
        }
    };
    report.memory.design_storage = hier.levels().iter().map(|l| l.design().storage_len()).sum();
    Ok(report)
}

/// [`mgcg_solve`] with an arbitrary smoother inside the V-cycle.
pub fn mgcg_solve_with<S: Smoother + ?Sized>(
    hier: &Hierarchy,
    y: &[f64],
    cfg: &SolverConfig,
    smoother: &S,
) -> Result<SolveReport> {
    let op = hier.finest();
    let b = op.rhs(y)?;
    let mut mg = MultigridPreconditioner::new(hier, smoother);
    let mut report = pcg(op, &b, &mut mg, cfg)?;
    report.memory.design_storage = hier.levels().iter().map(|l| l.design().storage_len()).sum();
    Ok(report)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
