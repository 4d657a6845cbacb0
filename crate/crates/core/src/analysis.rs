//! Dense spectral diagnostics for small hierarchies: probing the
//! preconditioned operator, eigenvalue spectra and condition numbers, the
//! V-cycle iteration matrix, and an SSOR-smoothed reference V-cycle.

use nalgebra::{Cholesky, DMatrix, DVector, Schur};
use rayon::prelude::*;

use crate::error::{check_len, Error, Result};
use crate::multigrid::{assemble_levels, Hierarchy, JacobiSmoother, Smoother, TransferDirection};
use crate::operator::{ApplyWorkspace, LevelOperator};

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumReport {
    pub label: String,
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `λ_max / λ_min`, infinite when the smallest eigenvalue is not positive.
    pub condition_number: f64,
}

impl SpectrumReport {
    fn from_eigenvalues(label: &str, mut eigenvalues: Vec<f64>) -> Self {
        eigenvalues.sort_by(f64::total_cmp);
        let lo = eigenvalues.first().copied().unwrap_or(1.0);
        let hi = eigenvalues.last().copied().unwrap_or(1.0);
        let condition_number = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        Self {
            label: label.to_string(),
            eigenvalues,
            condition_number,
        }
    }

    pub fn min(&self) -> f64 {
        self.eigenvalues.first().copied().unwrap_or(f64::NAN)
    }

    pub fn max(&self) -> f64 {
        self.eigenvalues.last().copied().unwrap_or(f64::NAN)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeKind {
    Identity,
    Jacobi(JacobiSmoother),
    Ssor(SsorConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsorConfig {
    pub nu1: usize,
    pub nu2: usize,
    pub relaxation: f64,
}

impl Default for SsorConfig {
    fn default() -> Self {
        Self {
            nu1: 2,
            nu2: 2,
            relaxation: 1.0,
        }
    }
}

fn check_finite(m: &DMatrix<f64>) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric {
            level: 0,
            reason: "matrix has non-finite entries".into(),
        })
    }
}

fn check_cap(hier: &Hierarchy) -> Result<()> {
    let k = hier.finest().dimension();
    if k > hier.dense_cap() {
        return Err(Error::Capacity {
            dimension: k,
            cap: hier.dense_cap(),
        });
    }
    Ok(())
}

/// `M^{-1} A` on the finest level, assembled column by column.
pub fn probe_preconditioned(hier: &Hierarchy, kind: ProbeKind) -> Result<DMatrix<f64>> {
    check_cap(hier)?;
    match kind {
        ProbeKind::Identity => hier.finest().assemble_dense(hier.dense_cap()),
        ProbeKind::Jacobi(s) => {
            s.validate()?;
            probe_with_smoother(hier, &s)
        }
        ProbeKind::Ssor(cfg) => {
            let s = ssor_vcycle_reference(hier, cfg)?;
            probe_with_smoother(hier, &s)
        }
    }
}

/// Column `j` is `v_cycle(0, A e_j)` with the given smoother.
pub fn probe_with_smoother<S: Smoother + Sync + ?Sized>(hier: &Hierarchy, smoother: &S) -> Result<DMatrix<f64>> {
    check_cap(hier)?;
    let op = hier.finest();
    let k = op.dimension();
    let g = hier.depth();
    let columns = (0..k)
        .into_par_iter()
        .map_init(
            || (hier.workspace(), ApplyWorkspace::for_operator(op), vec![0.0; k], vec![0.0; k]),
            |(vws, aws, unit, col), j| -> Result<Vec<f64>> {
                unit.fill(0.0);
                unit[j] = 1.0;
                op.apply_into(unit, col, aws)?;
                let mut x = vec![0.0; k];
                hier.v_cycle_with(smoother, &mut x, col, g, vws)?;
                Ok(x)
            },
        )
        .collect::<Result<Vec<_>>>()?;
    let mut m = DMatrix::zeros(k, k);
    for (j, c) in columns.iter().enumerate() {
        m.column_mut(j).copy_from_slice(c);
    }
    Ok(m)
}

/// Eigenvalues of a symmetric matrix. The upper triangle is mirrored first
/// so tiny asymmetries from rounding do not matter.
pub fn spectrum(matrix: &DMatrix<f64>, label: &str) -> Result<SpectrumReport> {
    if !matrix.is_square() {
        return Err(Error::Parameter("spectrum needs a square matrix".into()));
    }
    check_finite(matrix)?;
    let sym = (matrix + matrix.transpose()) * 0.5;
    let eig = sym.symmetric_eigenvalues();
    Ok(SpectrumReport::from_eigenvalues(label, eig.iter().copied().collect()))
}

/// Spectrum of `probe = M^{-1} A` through the similarity `L' M^{-1} L`,
/// with `A = L L'`. The result is symmetric whenever `M` is.
pub fn preconditioned_spectrum(probe: &DMatrix<f64>, a: &DMatrix<f64>, label: &str) -> Result<SpectrumReport> {
    check_len(a.nrows(), probe.nrows())?;
    check_len(a.ncols(), probe.ncols())?;
    check_finite(probe)?;
    let sym = symmetrized_probe(probe, a)?;
    spectrum(&sym, label)
}

/// `L' (M^{-1} A) L^{-T}`.
pub fn symmetrized_probe(probe: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = Cholesky::new(a.clone()).ok_or_else(|| Error::Numeric {
        level: 0,
        reason: "operator matrix is not positive definite".into(),
    })?;
    let l = chol.l();
    // X' = L^{-1} probe' so that X = probe L^{-T}
    let xt = l
        .solve_lower_triangular(&probe.transpose())
        .ok_or_else(|| Error::Numeric {
            level: 0,
            reason: "singular Cholesky factor".into(),
        })?;
    Ok(l.transpose() * xt.transpose())
}

/// Eigenvalues of the nonsymmetric `M^{-1} A` from a real Schur form, as
/// `(re, im)` pairs sorted by real part.
pub fn nonsymmetric_eigenvalues(matrix: &DMatrix<f64>) -> Result<Vec<(f64, f64)>> {
    check_finite(matrix)?;
    if !matrix.is_square() {
        return Err(Error::Parameter("eigenvalues need a square matrix".into()));
    }
    // deflating at machine epsilon can stall on clustered spectra
    let max_sweeps = 1000 * matrix.nrows().max(1);
    let schur = Schur::try_new(matrix.clone(), 1e-12, max_sweeps).ok_or_else(|| Error::Numeric {
        level: 0,
        reason: "real Schur iteration did not converge".into(),
    })?;
    let mut ev: Vec<(f64, f64)> = schur
        .complex_eigenvalues()
        .iter()
        .map(|c| (c.re, c.im))
        .collect();
    ev.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(ev)
}

pub fn spectral_radius(matrix: &DMatrix<f64>) -> Result<f64> {
    Ok(nonsymmetric_eigenvalues(matrix)?
        .into_iter()
        .map(|(re, im)| re.hypot(im))
        .fold(0.0, f64::max))
}

/// Dense prolongation from level `g` to `g + 1`.
pub fn dense_prolongation(hier: &Hierarchy, g: usize) -> Result<DMatrix<f64>> {
    let kc = hier.level(g).dimension();
    let kf = hier.level(g + 1).dimension();
    let mut m = DMatrix::zeros(kf, kc);
    let mut unit = vec![0.0; kc];
    for j in 0..kc {
        unit.fill(0.0);
        unit[j] = 1.0;
        let col = hier.transfer(g, &unit, TransferDirection::Prolong)?;
        m.column_mut(j).copy_from_slice(&col);
    }
    Ok(m)
}

/// One-step iteration matrix of damped Jacobi, `I - ω D^{-1} A`.
pub fn jacobi_step_matrix(a: &DMatrix<f64>, omega: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let mut s = DMatrix::identity(n, n);
    for i in 0..n {
        let d = a[(i, i)];
        for j in 0..n {
            s[(i, j)] -= omega * a[(i, j)] / d;
        }
    }
    s
}

/// One symmetric SSOR step, a forward sweep followed by a backward one:
/// `(I - (D/ω + U)^{-1} A)(I - (D/ω + L)^{-1} A)`.
pub fn ssor_step_matrix(a: &DMatrix<f64>, relaxation: f64) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    let mut lower = a.lower_triangle();
    let mut upper = a.upper_triangle();
    for i in 0..n {
        lower[(i, i)] = a[(i, i)] / relaxation;
        upper[(i, i)] = a[(i, i)] / relaxation;
    }
    let singular = || Error::Numeric {
        level: 0,
        reason: "zero diagonal in SSOR sweep".into(),
    };
    let fwd = DMatrix::identity(n, n) - lower.solve_lower_triangular(a).ok_or_else(singular)?;
    let bwd = DMatrix::identity(n, n) - upper.solve_upper_triangular(a).ok_or_else(singular)?;
    Ok(bwd * fwd)
}

/// Error propagation matrix `C_MG` of the V-cycle on the finest level, built
/// from `C_1 = 0` and
/// `C_g = S_g^{ν2} (I - I_g (I - C_{g-1}) A_{g-1}^{-1} I_g' A_g) S_g^{ν1}`.
/// `step[g]` is the single-sweep smoother matrix on level `g` (0-based).
pub fn iteration_matrix(
    levels: &[DMatrix<f64>],
    prolongations: &[DMatrix<f64>],
    step: &[DMatrix<f64>],
    nu1: usize,
    nu2: usize,
) -> Result<DMatrix<f64>> {
    if levels.is_empty() || prolongations.len() + 1 != levels.len() || step.len() != levels.len() {
        return Err(Error::Parameter("inconsistent level data for the iteration matrix".into()));
    }
    let mut c = DMatrix::zeros(levels[0].nrows(), levels[0].ncols());
    for g in 1..levels.len() {
        let a_c = &levels[g - 1];
        let a_f = &levels[g];
        let p = &prolongations[g - 1];
        let kc = a_c.nrows();
        let kf = a_f.nrows();
        let chol = Cholesky::new(a_c.clone()).ok_or_else(|| Error::Numeric {
            level: g,
            reason: "level matrix is not positive definite".into(),
        })?;
        let restricted = p.transpose() * a_f;
        let coarse = (DMatrix::identity(kc, kc) - &c) * chol.solve(&restricted);
        let correction = DMatrix::identity(kf, kf) - p * coarse;
        let s = &step[g];
        c = s.pow(nu2 as u32) * correction * s.pow(nu1 as u32);
    }
    Ok(c)
}

/// `C_MG` for the damped-Jacobi V-cycle of a hierarchy.
pub fn jacobi_iteration_matrix(hier: &Hierarchy, smoother: &JacobiSmoother) -> Result<DMatrix<f64>> {
    smoother.validate()?;
    let levels = assemble_levels(hier)?;
    let prolongations = (1..hier.depth())
        .map(|g| dense_prolongation(hier, g))
        .collect::<Result<Vec<_>>>()?;
    let step: Vec<_> = levels.iter().map(|a| jacobi_step_matrix(a, smoother.omega)).collect();
    iteration_matrix(&levels, &prolongations, &step, smoother.nu1, smoother.nu2)
}

/// `C_MG` for the SSOR reference V-cycle.
pub fn ssor_iteration_matrix(hier: &Hierarchy, cfg: SsorConfig) -> Result<DMatrix<f64>> {
    let smoother = ssor_vcycle_reference(hier, cfg)?;
    let prolongations = (1..hier.depth())
        .map(|g| dense_prolongation(hier, g))
        .collect::<Result<Vec<_>>>()?;
    let step = smoother
        .levels
        .iter()
        .map(|a| ssor_step_matrix(a, cfg.relaxation))
        .collect::<Result<Vec<_>>>()?;
    iteration_matrix(&smoother.levels, &prolongations, &step, cfg.nu1, cfg.nu2)
}

/// Symmetric SSOR smoothing on densely assembled level matrices.
#[derive(Debug, Clone)]
pub struct SsorSmoother {
    levels: Vec<DMatrix<f64>>,
    config: SsorConfig,
}

impl SsorSmoother {
    pub fn config(&self) -> SsorConfig {
        self.config
    }

    pub fn level_matrix(&self, idx: usize) -> &DMatrix<f64> {
        &self.levels[idx]
    }
}

/// Builds the SSOR smoother for every level of `hier`. All level matrices
/// must fit under the hierarchy's dense cap.
pub fn ssor_vcycle_reference(hier: &Hierarchy, cfg: SsorConfig) -> Result<SsorSmoother> {
    if !(cfg.relaxation > 0.0 && cfg.relaxation < 2.0) {
        return Err(Error::Parameter(format!(
            "SSOR relaxation must lie in (0, 2), got {}",
            cfg.relaxation
        )));
    }
    Ok(SsorSmoother {
        levels: assemble_levels(hier)?,
        config: cfg,
    })
}

/// `steps` symmetric sweeps of SSOR on `a x = b`.
pub fn ssor_sweep(a: &DMatrix<f64>, x: &mut [f64], b: &[f64], steps: usize, relaxation: f64) -> Result<()> {
    let n = a.nrows();
    check_len(n, x.len())?;
    check_len(n, b.len())?;
    for _ in 0..steps {
        for i in (0..n).chain((0..n).rev()) {
            // columns equal rows for symmetric a, and are contiguous
            let col = a.column(i);
            let ax: f64 = col.iter().zip(x.iter()).map(|(p, q)| p * q).sum();
            x[i] += relaxation * (b[i] - ax) / a[(i, i)];
        }
    }
    Ok(())
}

impl Smoother for SsorSmoother {
    fn pre_steps(&self) -> usize {
        self.config.nu1
    }

    fn post_steps(&self) -> usize {
        self.config.nu2
    }

    fn smooth(
        &self,
        _op: &LevelOperator,
        level: usize,
        x: &mut [f64],
        b: &[f64],
        steps: usize,
        _work: &mut [f64],
        _ws: &mut ApplyWorkspace,
    ) -> Result<()> {
        ssor_sweep(&self.levels[level], x, b, steps, self.config.relaxation)
    }
}

/// Dense `M^{-1}` of a preconditioner given as a linear map.
pub fn preconditioner_matrix<F>(k: usize, mut apply: F) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut m = DMatrix::zeros(k, k);
    let mut unit = DVector::zeros(k);
    for j in 0..k {
        unit.fill(0.0);
        unit[j] = 1.0;
        let col = apply(unit.as_slice())?;
        check_len(k, col.len())?;
        m.column_mut(j).copy_from_slice(&col);
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_spectrum() {
        let r = spectrum(&DMatrix::identity(5, 5), "I").unwrap();
        assert!(r.eigenvalues.iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!((r.condition_number - 1.0).abs() < 1e-14);
    }

    #[test]
    fn diagonal_condition() {
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 4.0]));
        let r = spectrum(&m, "d").unwrap();
        assert!((r.condition_number - 4.0).abs() < 1e-14);
        assert_eq!(r.eigenvalues.len(), 2);
    }

    #[test]
    fn non_finite_is_numeric_error() {
        let mut m = DMatrix::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(matches!(spectrum(&m, "x"), Err(Error::Numeric { .. })));
    }

    #[test]
    fn ssor_sweep_solves_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 5.0, 0.5]));
        let mut x = vec![7.0, -1.0, 3.0];
        ssor_sweep(&a, &mut x, &[2.0, 10.0, 1.0], 1, 1.0).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 2.0]);
    }

    #[test]
    fn ssor_step_matrix_matches_sweep() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.5, 1.0, 3.0, 0.2, 0.5, 0.2, 2.0]);
        let s = ssor_step_matrix(&a, 1.3).unwrap();
        // error propagation with b = 0
        let mut x = vec![1.0, -2.0, 0.5];
        let expected = &s * DVector::from_vec(x.clone());
        ssor_sweep(&a, &mut x, &[0.0; 3], 1, 1.3).unwrap();
        for (u, v) in x.iter().zip(expected.iter()) {
            assert!((u - v).abs() < 1e-14);
        }
    }

    #[test]
    fn similarity_preserves_eigenvalues() {
        let a = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let minv = DMatrix::from_row_slice(2, 2, &[0.5, 0.1, 0.1, 0.25]);
        let probe = &minv * &a;
        let r = preconditioned_spectrum(&probe, &a, "p").unwrap();
        let ns = nonsymmetric_eigenvalues(&probe).unwrap();
        for (e, (re, im)) in r.eigenvalues.iter().zip(ns) {
            assert!(im.abs() < 1e-12);
            assert!((e - re).abs() < 1e-12);
        }
    }
}
