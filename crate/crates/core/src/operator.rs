//! The smoothing-spline system `A_g = Φ_g'Φ_g + λ Λ_g` on one grid level.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::bspline::SplineSpace1D;
use crate::error::{check_len, Error, Result};
use crate::tensorops::{
    khatri_rao_gram_apply_range, khatri_rao_gram_diag, khatri_rao_matvec, khatri_rao_tmatvec,
    kron_matvec_with, FactorMatrix, KhatriRaoFactors, KronWorkspace, KroneckerFactors,
    RankOneTerm,
};
use crate::Execution;

pub const DEFAULT_DENSE_CAP: usize = 20_000;

/// Points per chunk in parallel mode; fixed so that reductions are
/// reproducible.
const PARALLEL_CHUNK: usize = 4096;

/// Scattered observations `(x_i, y_i)` inside a box `Ω = Π [a_p, b_p]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteredDataset {
    dim: usize,
    points: Vec<f64>,
    responses: Vec<f64>,
    bounds: Vec<(f64, f64)>,
}

impl ScatteredDataset {
    /// `points` is row-major `n x P`.
    pub fn new(points: Vec<f64>, responses: Vec<f64>, bounds: Vec<(f64, f64)>) -> Result<Self> {
        let dim = bounds.len();
        if dim == 0 {
            return Err(Error::Parameter("dataset needs at least one covariate".into()));
        }
        if responses.is_empty() {
            return Err(Error::Parameter("dataset needs at least one observation".into()));
        }
        check_len(responses.len() * dim, points.len())?;
        if let Some(&(a, b)) = bounds.iter().find(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::Parameter(format!("invalid axis interval [{a}, {b}]")));
        }
        if points.iter().chain(&responses).any(|v| !v.is_finite()) {
            return Err(Error::Parameter("dataset contains non-finite values".into()));
        }
        let data = Self {
            dim,
            points,
            responses,
            bounds,
        };
        let outside: Vec<usize> = (0..data.len())
            .filter(|&i| !data.point_in_domain(data.point(i)))
            .collect();
        if !outside.is_empty() {
            return Err(Error::DataOutsideDomain {
                count: outside.len(),
                indices: outside.into_iter().take(10).collect(),
            });
        }
        Ok(data)
    }

    pub fn unit_cube(points: Vec<f64>, responses: Vec<f64>, dim: usize) -> Result<Self> {
        Self::new(points, responses, vec![(0.0, 1.0); dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.responses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn responses(&self) -> &[f64] {
        &self.responses
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn point_in_domain(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.bounds).all(|(v, (a, b))| v >= a && v <= b)
    }
}

/// Compressed Φ_p for one axis: for each point, the index of the first
/// active basis function and the `q + 1` active values.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisActivations {
    rows: usize,
    width: usize,
    offsets: Vec<u32>,
    values: Vec<f64>,
}

impl AxisActivations {
    fn build(space: &SplineSpace1D, coords: impl Iterator<Item = f64>, n: usize) -> Result<Self> {
        let width = space.degree() + 1;
        let mut offsets = Vec::with_capacity(n);
        let mut values = vec![0.0; n * width];
        for (i, x) in coords.enumerate() {
            let first = space.eval_basis_into(x, 0, &mut values[i * width..(i + 1) * width])?;
            offsets.push(first as u32);
        }
        Ok(Self {
            rows: space.dimension(),
            width,
            offsets,
            values,
        })
    }

    pub fn activation(&self, i: usize) -> (usize, &[f64]) {
        (
            self.offsets[i] as usize,
            &self.values[i * self.width..(i + 1) * self.width],
        )
    }
}

/// The Khatri-Rao factors of `Φ' = Φ_1' ⊙ ... ⊙ Φ_P'`.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignFactors {
    n: usize,
    axes: Vec<AxisActivations>,
}

impl DesignFactors {
    pub fn new(spaces: &[SplineSpace1D], data: &ScatteredDataset) -> Result<Self> {
        check_len(data.dim(), spaces.len())?;
        let n = data.len();
        let dim = data.dim();
        let axes = spaces
            .iter()
            .enumerate()
            .map(|(p, space)| {
                let coords = (0..n).map(|i| data.points[i * dim + p]);
                AxisActivations::build(space, coords, n)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, axes })
    }

    /// Reals held by the activation tables (offsets counted as one each).
    pub fn storage_len(&self) -> usize {
        self.axes.iter().map(|a| a.values.len() + a.offsets.len()).sum()
    }
}

impl KhatriRaoFactors for DesignFactors {
    fn axes(&self) -> usize {
        self.axes.len()
    }

    fn axis_rows(&self, axis: usize) -> usize {
        self.axes[axis].rows
    }

    fn cols(&self) -> usize {
        self.n
    }

    fn column(&self, axis: usize, i: usize) -> (usize, &[f64]) {
        self.axes[axis].activation(i)
    }
}

/// One summand `(2 / r!) Ψ_r` of the roughness penalty, `|r| = 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyTerm {
    pub orders: Vec<usize>,
    pub weight: f64,
    pub factors: KroneckerFactors,
}

/// Multi-indices `r` with `|r| = 2`: pure second derivatives first, then
/// mixed pairs `p1 < p2`.
pub fn penalty_orders(dim: usize) -> Vec<(Vec<usize>, f64)> {
    let mut out = Vec::with_capacity(dim * (dim + 1) / 2);
    for p in 0..dim {
        let mut r = vec![0; dim];
        r[p] = 2;
        out.push((r, 1.0));
    }
    for p1 in 0..dim {
        for p2 in p1 + 1..dim {
            let mut r = vec![0; dim];
            r[p1] = 1;
            r[p2] = 1;
            out.push((r, 2.0));
        }
    }
    out
}

/// Reusable buffers for [`LevelOperator::apply_into`].
#[derive(Debug, Default, Clone)]
pub struct ApplyWorkspace {
    pub kron: KronWorkspace,
    term: RankOneTerm,
}

impl ApplyWorkspace {
    pub fn for_operator(op: &LevelOperator) -> Self {
        Self::with_kron_capacity(op.kron_scratch_len())
    }

    pub fn with_kron_capacity(len: usize) -> Self {
        Self {
            kron: KronWorkspace::with_capacity(len),
            term: RankOneTerm::default(),
        }
    }
}

/// A symmetric operator that can be applied and whose diagonal is known.
pub trait LinearOperator {
    fn dimension(&self) -> usize;
    fn diagonal(&self) -> &[f64];
    fn apply_into(&self, x: &[f64], out: &mut [f64], ws: &mut ApplyWorkspace) -> Result<()>;
}

impl LinearOperator for LevelOperator {
    fn dimension(&self) -> usize {
        self.dimension
    }

    fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64], ws: &mut ApplyWorkspace) -> Result<()> {
        LevelOperator::apply_into(self, x, out, ws)
    }
}

/// An explicitly stored matrix behind the [`LinearOperator`] interface.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    matrix: DMatrix<f64>,
    diagonal: Vec<f64>,
}

impl DenseOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Parameter("dense operator must be square".into()));
        }
        let diagonal = matrix.diagonal().iter().copied().collect();
        Ok(Self { matrix, diagonal })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

impl LinearOperator for DenseOperator {
    fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    fn apply_into(&self, x: &[f64], out: &mut [f64], _ws: &mut ApplyWorkspace) -> Result<()> {
        let n = self.matrix.nrows();
        check_len(n, x.len())?;
        check_len(n, out.len())?;
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..n).map(|j| self.matrix[(i, j)] * x[j]).sum();
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LevelOperator {
    level: u32,
    spaces: Vec<SplineSpace1D>,
    design: DesignFactors,
    penalties: Vec<PenaltyTerm>,
    lambda: f64,
    diagonal: Vec<f64>,
    dimension: usize,
    execution: Execution,
}

impl LevelOperator {
    pub fn build(data: &ScatteredDataset, level: u32, degrees: &[usize], lambda: f64) -> Result<Self> {
        Self::build_with(data, level, degrees, lambda, Execution::Sequential)
    }

    pub fn build_with(
        data: &ScatteredDataset,
        level: u32,
        degrees: &[usize],
        lambda: f64,
        execution: Execution,
    ) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::Parameter(format!("smoothing parameter must be positive, got {lambda}")));
        }
        check_len(data.dim(), degrees.len())?;
        let spaces = data
            .bounds()
            .iter()
            .zip(degrees)
            .map(|(&(a, b), &q)| SplineSpace1D::new(a, b, level, q))
            .collect::<Result<Vec<_>>>()?;
        let design = DesignFactors::new(&spaces, data)?;

        let grams: Vec<[FactorMatrix; 3]> = spaces
            .iter()
            .map(|s| -> Result<[FactorMatrix; 3]> {
                Ok([
                    s.gram_matrix(0)?.to_factor(),
                    s.gram_matrix(1)?.to_factor(),
                    s.gram_matrix(2)?.to_factor(),
                ])
            })
            .collect::<Result<_>>()?;
        let penalties = penalty_orders(data.dim())
            .into_iter()
            .map(|(orders, weight)| {
                let factors = orders
                    .iter()
                    .enumerate()
                    .map(|(p, &r)| grams[p][r].clone())
                    .collect();
                Ok(PenaltyTerm {
                    orders,
                    weight,
                    factors: KroneckerFactors::new(factors)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        let dimension = spaces.iter().map(SplineSpace1D::dimension).product();
        let mut op = Self {
            level,
            spaces,
            design,
            penalties,
            lambda,
            diagonal: Vec::new(),
            dimension,
            execution,
        };
        op.diagonal = op.compute_diagonal();
        if let Some(j) = op.diagonal.iter().position(|d| !(*d > 0.0)) {
            return Err(Error::Numeric {
                level: level as usize,
                reason: format!("diagonal entry {j} is not positive"),
            });
        }
        Ok(op)
    }

    fn compute_diagonal(&self) -> Vec<f64> {
        let mut diag = khatri_rao_gram_diag(&self.design);
        for term in &self.penalties {
            for (d, k) in diag.iter_mut().zip(term.factors.diagonal()) {
                *d += self.lambda * term.weight * k;
            }
        }
        diag
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn spaces(&self) -> &[SplineSpace1D] {
        &self.spaces
    }

    pub fn design(&self) -> &DesignFactors {
        &self.design
    }

    pub fn penalties(&self) -> &[PenaltyTerm] {
        &self.penalties
    }

    pub fn execution(&self) -> Execution {
        self.execution
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diagonal
    }

    pub fn data_len(&self) -> usize {
        self.design.n
    }

    /// Scratch length needed by the penalty Kronecker products.
    pub fn kron_scratch_len(&self) -> usize {
        self.penalties
            .iter()
            .map(|t| t.factors.max_intermediate(false))
            .max()
            .unwrap_or(0)
    }

    pub fn apply(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.dimension];
        let mut ws = ApplyWorkspace::for_operator(self);
        self.apply_into(alpha, &mut out, &mut ws)?;
        Ok(out)
    }

    /// `out = Φ'(Φ α) + λ Σ_r w_r Ψ_r α`.
    pub fn apply_into(&self, alpha: &[f64], out: &mut [f64], ws: &mut ApplyWorkspace) -> Result<()> {
        check_len(self.dimension, alpha.len())?;
        check_len(self.dimension, out.len())?;
        out.fill(0.0);
        self.gram_apply(alpha, out, &mut ws.term);
        self.add_penalty(alpha, out, self.lambda, &mut ws.kron)
    }

    fn gram_apply(&self, alpha: &[f64], out: &mut [f64], term: &mut RankOneTerm) {
        match self.execution {
            Execution::Sequential => {
                khatri_rao_gram_apply_range(&self.design, 0..self.design.n, alpha, out, term)
            }
            Execution::Parallel => {
                let n = self.design.n;
                let chunks: Vec<Vec<f64>> = (0..n.div_ceil(PARALLEL_CHUNK))
                    .into_par_iter()
                    .map(|c| {
                        let mut partial = vec![0.0; self.dimension];
                        let mut term = RankOneTerm::default();
                        let range = c * PARALLEL_CHUNK..((c + 1) * PARALLEL_CHUNK).min(n);
                        khatri_rao_gram_apply_range(&self.design, range, alpha, &mut partial, &mut term);
                        partial
                    })
                    .collect();
                for partial in chunks {
                    for (o, v) in out.iter_mut().zip(partial) {
                        *o += v;
                    }
                }
            }
        }
    }

    fn add_penalty(&self, alpha: &[f64], out: &mut [f64], scale: f64, kron: &mut KronWorkspace) -> Result<()> {
        for term in &self.penalties {
            let psi = kron_matvec_with(&term.factors, alpha, kron, false)?;
            let w = scale * term.weight;
            for (o, v) in out.iter_mut().zip(psi) {
                *o += w * v;
            }
        }
        Ok(())
    }

    /// `Λ α` (without λ).
    pub fn penalty_apply(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        check_len(self.dimension, alpha.len())?;
        let mut out = vec![0.0; self.dimension];
        let mut kron = KronWorkspace::default();
        self.add_penalty(alpha, &mut out, 1.0, &mut kron)?;
        Ok(out)
    }

    /// `Φ' y`.
    pub fn rhs(&self, y: &[f64]) -> Result<Vec<f64>> {
        khatri_rao_matvec(&self.design, y)
    }

    /// `Φ α`, the spline values at the training points.
    pub fn design_apply(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        khatri_rao_tmatvec(&self.design, alpha)
    }

    /// Dense `A_g`, assembled from outer products of the rank-one design
    /// terms plus dense Kronecker products of the Gram factors.
    pub fn assemble_dense(&self, cap: usize) -> Result<DMatrix<f64>> {
        let k = self.dimension;
        if k > cap {
            return Err(Error::Capacity { dimension: k, cap });
        }
        let mut a = DMatrix::<f64>::zeros(k, k);
        let mut term = RankOneTerm::default();
        for i in 0..self.design.n {
            term.expand(&self.design, i);
            for (&r, &vr) in term.indices.iter().zip(&term.values) {
                for (&c, &vc) in term.indices.iter().zip(&term.values) {
                    a[(r, c)] += vr * vc;
                }
            }
        }
        for t in &self.penalties {
            let mut dense = DMatrix::<f64>::from_element(1, 1, 1.0);
            for f in t.factors.factors() {
                let df = DMatrix::from_row_slice(f.rows(), f.cols(), f.row_major());
                dense = dense.kronecker(&df);
            }
            a += dense * (self.lambda * t.weight);
        }
        Ok(a)
    }

    /// `(‖Φα − y‖², α'Λα)`.
    pub fn objective(&self, alpha: &[f64], y: &[f64]) -> Result<(f64, f64)> {
        check_len(self.design.n, y.len())?;
        let fitted = self.design_apply(alpha)?;
        let ls = fitted.iter().zip(y).map(|(f, y)| (f - y).powi(2)).sum();
        let roughness = self
            .penalty_apply(alpha)?
            .iter()
            .zip(alpha)
            .map(|(a, b)| a * b)
            .sum();
        Ok((ls, roughness))
    }

    /// Spline values at arbitrary points (row-major `count x P`).
    pub fn predict(&self, alpha: &[f64], points: &[f64]) -> Result<Vec<f64>> {
        predict(&self.spaces, alpha, points)
    }
}

/// Evaluates `s(x) = Σ_k α_k φ_k(x)` at each point of a row-major list.
pub fn predict(spaces: &[SplineSpace1D], alpha: &[f64], points: &[f64]) -> Result<Vec<f64>> {
    let dim = spaces.len();
    let k: usize = spaces.iter().map(SplineSpace1D::dimension).product();
    check_len(k, alpha.len())?;
    if !points.len().is_multiple_of(dim) {
        return Err(Error::Shape {
            expected: (points.len() / dim + 1) * dim,
            found: points.len(),
        });
    }
    let mut acts: Vec<Vec<f64>> = spaces.iter().map(|s| vec![0.0; s.degree() + 1]).collect();
    let mut offsets = vec![0usize; dim];
    let mut term = RankOneTerm::default();
    points
        .chunks_exact(dim)
        .map(|x| {
            for p in 0..dim {
                offsets[p] = spaces[p].eval_basis_into(x[p], 0, &mut acts[p])?;
            }
            let single = SinglePoint {
                rows: spaces,
                offsets: &offsets,
                values: &acts,
            };
            term.expand(&single, 0);
            Ok(term.dot(alpha))
        })
        .collect()
}

struct SinglePoint<'a> {
    rows: &'a [SplineSpace1D],
    offsets: &'a [usize],
    values: &'a [Vec<f64>],
}

impl KhatriRaoFactors for SinglePoint<'_> {
    fn axes(&self) -> usize {
        self.rows.len()
    }

    fn axis_rows(&self, axis: usize) -> usize {
        self.rows[axis].dimension()
    }

    fn cols(&self) -> usize {
        1
    }

    fn column(&self, axis: usize, _i: usize) -> (usize, &[f64]) {
        (self.offsets[axis], &self.values[axis])
    }
}
