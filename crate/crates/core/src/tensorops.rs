//! Matrix-free kernels for Kronecker and Khatri-Rao structured matrices.
//!
//! Multi-indices are linearized with the first factor varying slowest, so
//! entry `(i_1, ..., i_P)` of a vector over `m_1 x ... x m_P` lives at
//! `((i_1 m_2 + i_2) m_3 + ...) m_P + i_P`. This matches the usual
//! definition of `A_1 ⊗ A_2`, where the row index of `A_1` selects the block.

use crate::error::{check_len, Error, Result};

/// Index layout shared by every module: factor 0 varies slowest.
pub const LINEARIZATION: Linearization = Linearization::FirstAxisSlowest;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Linearization {
    FirstAxisSlowest,
}

/// Row-major dense matrix that also records, per row, the half-open column
/// range holding its nonzeros. Banded factors (Gram and subdivision
/// matrices) then cost only their bandwidth per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    row_ranges: Vec<(usize, usize)>,
}

impl FactorMatrix {
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_len(rows * cols, data.len())?;
        let row_ranges = (0..rows)
            .map(|i| {
                let row = &data[i * cols..(i + 1) * cols];
                match row.iter().position(|v| *v != 0.0) {
                    Some(first) => {
                        let last = row.iter().rposition(|v| *v != 0.0).unwrap_or(first);
                        (first, last + 1)
                    }
                    None => (0, 0),
                }
            })
            .collect();
        Ok(Self {
            rows,
            cols,
            data,
            row_ranges,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Parameter("ragged rows".into()));
        }
        Self::from_row_major(rows.len(), cols, rows.concat())
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            data[i * n + i] = 1.0;
        }
        Self::from_row_major(n, n, data).expect("square")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    pub fn row_major(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self::from_row_major(self.cols, self.rows, data).expect("transpose keeps size")
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len(self.cols, x.len())?;
        Ok((0..self.rows)
            .map(|i| {
                let (c0, c1) = self.row_ranges[i];
                let row = &self.data[i * self.cols..];
                (c0..c1).map(|c| row[c] * x[c]).sum()
            })
            .collect())
    }
}

/// The factors `A_1, ..., A_P` of `A_1 ⊗ ... ⊗ A_P`.
#[derive(Debug, Clone, PartialEq)]
pub struct KroneckerFactors {
    factors: Vec<FactorMatrix>,
}

impl KroneckerFactors {
    pub fn new(factors: Vec<FactorMatrix>) -> Result<Self> {
        if factors.is_empty() {
            return Err(Error::Parameter("at least one Kronecker factor is required".into()));
        }
        let fits = |dims: Vec<usize>| {
            dims.into_iter()
                .try_fold(1usize, |acc, d| acc.checked_mul(d))
                .is_some()
        };
        if !fits(factors.iter().map(FactorMatrix::rows).collect())
            || !fits(factors.iter().map(FactorMatrix::cols).collect())
        {
            return Err(Error::Parameter("Kronecker dimensions overflow".into()));
        }
        Ok(Self { factors })
    }

    pub fn factors(&self) -> &[FactorMatrix] {
        &self.factors
    }

    pub fn rows(&self) -> usize {
        self.factors.iter().map(FactorMatrix::rows).product()
    }

    pub fn cols(&self) -> usize {
        self.factors.iter().map(FactorMatrix::cols).product()
    }

    pub fn transposed(&self) -> Self {
        Self {
            factors: self.factors.iter().map(FactorMatrix::transpose).collect(),
        }
    }

    /// Kronecker product of the factor diagonals.
    pub fn diagonal(&self) -> Vec<f64> {
        let mut diag = vec![1.0];
        for f in &self.factors {
            let d = f.diagonal();
            diag = diag
                .iter()
                .flat_map(|a| d.iter().map(move |b| a * b))
                .collect();
        }
        diag
    }

    /// Largest intermediate vector produced while applying the factors from
    /// last to first (plain or transposed).
    pub fn max_intermediate(&self, transposed: bool) -> usize {
        let (ins, outs): (Vec<usize>, Vec<usize>) = self
            .factors
            .iter()
            .map(|f| if transposed { (f.rows, f.cols) } else { (f.cols, f.rows) })
            .unzip();
        let p_count = self.factors.len();
        (0..p_count)
            .map(|p| {
                let lead: usize = ins[..p].iter().product();
                let trail: usize = outs[p + 1..].iter().product();
                lead * outs[p] * trail
            })
            .max()
            .unwrap_or(0)
    }
}

/// Two ping-pong buffers for [`kron_matvec_with`].
#[derive(Debug, Default, Clone)]
pub struct KronWorkspace {
    buffers: [Vec<f64>; 2],
}

impl KronWorkspace {
    pub fn with_capacity(len: usize) -> Self {
        Self {
            buffers: [vec![0.0; len], vec![0.0; len]],
        }
    }

    /// Number of reals held by the workspace.
    pub fn len(&self) -> usize {
        self.buffers[0].len() + self.buffers[1].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn reserve(&mut self, len: usize) {
        for b in &mut self.buffers {
            if b.len() < len {
                b.resize(len, 0.0);
            }
        }
    }
}

/// `(A_1 ⊗ ... ⊗ A_P) x` without forming the product.
pub fn kron_matvec(factors: &KroneckerFactors, x: &[f64]) -> Result<Vec<f64>> {
    let mut ws = KronWorkspace::default();
    Ok(kron_matvec_with(factors, x, &mut ws, false)?.to_vec())
}

/// `(A_1 ⊗ ... ⊗ A_P)' y`, reading the factors in transposed order.
pub fn kron_matvec_transposed(factors: &KroneckerFactors, y: &[f64]) -> Result<Vec<f64>> {
    let mut ws = KronWorkspace::default();
    Ok(kron_matvec_with(factors, y, &mut ws, true)?.to_vec())
}

/// Workspace variant of [`kron_matvec`]; the result borrows from `ws`.
///
/// Factors are applied from `p = P` down to `1`. Before step `p` the work
/// vector is laid out as `l_p x n_p x r_p` with `l_p = Π_{t<p} n_t`
/// (untouched leading axes) and `r_p = Π_{t>p} m_t` (already mapped trailing
/// axes); step `p` maps the middle axis through `A_p`.
pub fn kron_matvec_with<'w>(
    factors: &KroneckerFactors,
    x: &[f64],
    ws: &'w mut KronWorkspace,
    transposed: bool,
) -> Result<&'w [f64]> {
    let fs = &factors.factors;
    let dims = |f: &FactorMatrix| if transposed { (f.cols, f.rows) } else { (f.rows, f.cols) };
    let n_in: usize = fs.iter().map(|f| dims(f).1).product();
    check_len(n_in, x.len())?;
    ws.reserve(factors.max_intermediate(transposed));

    let p_count = fs.len();
    let mut trail = 1usize;
    let mut current_len = x.len();
    // which buffer holds the current vector; None means `x` itself
    let mut current: Option<usize> = None;
    for p in (0..p_count).rev() {
        let (m_p, n_p) = dims(&fs[p]);
        let lead = current_len / (n_p * trail);
        let out_len = lead * m_p * trail;
        let target = match current {
            Some(i) => 1 - i,
            None => 0,
        };
        let (src, dst): (&[f64], &mut [f64]) = match current {
            None => (x, &mut ws.buffers[0][..out_len]),
            Some(i) => {
                let (a, b) = ws.buffers.split_at_mut(1);
                if i == 0 {
                    (&a[0][..current_len], &mut b[0][..out_len])
                } else {
                    (&b[0][..current_len], &mut a[0][..out_len])
                }
            }
        };
        if transposed {
            apply_axis_transposed(&fs[p], src, dst, lead, trail);
        } else {
            apply_axis(&fs[p], src, dst, lead, trail);
        }
        current = Some(target);
        current_len = out_len;
        trail *= m_p;
    }
    let idx = current.expect("at least one factor");
    Ok(&ws.buffers[idx][..current_len])
}

/// `dst[s, i, t] = Σ_c A[i, c] src[s, c, t]`.
fn apply_axis(a: &FactorMatrix, src: &[f64], dst: &mut [f64], lead: usize, trail: usize) {
    let (m, n) = (a.rows, a.cols);
    for s in 0..lead {
        let src_block = &src[s * n * trail..(s + 1) * n * trail];
        let dst_block = &mut dst[s * m * trail..(s + 1) * m * trail];
        for i in 0..m {
            let out = &mut dst_block[i * trail..(i + 1) * trail];
            out.fill(0.0);
            let (c0, c1) = a.row_ranges[i];
            for c in c0..c1 {
                let coef = a.data[i * n + c];
                let input = &src_block[c * trail..(c + 1) * trail];
                for (o, v) in out.iter_mut().zip(input) {
                    *o += coef * v;
                }
            }
        }
    }
}

/// `dst[s, c, t] = Σ_i A[i, c] src[s, i, t]`.
fn apply_axis_transposed(a: &FactorMatrix, src: &[f64], dst: &mut [f64], lead: usize, trail: usize) {
    let (m, n) = (a.rows, a.cols);
    for s in 0..lead {
        let src_block = &src[s * m * trail..(s + 1) * m * trail];
        let dst_block = &mut dst[s * n * trail..(s + 1) * n * trail];
        dst_block.fill(0.0);
        for i in 0..m {
            let input = &src_block[i * trail..(i + 1) * trail];
            let (c0, c1) = a.row_ranges[i];
            for c in c0..c1 {
                let coef = a.data[i * n + c];
                let out = &mut dst_block[c * trail..(c + 1) * trail];
                for (o, v) in out.iter_mut().zip(input) {
                    *o += coef * v;
                }
            }
        }
    }
}

/// Column access for `A_1 ⊙ ... ⊙ A_P`: each factor is `m_p x n` and column
/// `i` of factor `p` is given by its nonzero block `(offset, values)`.
pub trait KhatriRaoFactors {
    fn axes(&self) -> usize;
    fn axis_rows(&self, axis: usize) -> usize;
    fn cols(&self) -> usize;
    fn column(&self, axis: usize, i: usize) -> (usize, &[f64]);

    fn rows(&self) -> usize {
        (0..self.axes()).map(|p| self.axis_rows(p)).product()
    }
}

/// Dense Khatri-Rao factors stored column-major, with leading and trailing
/// zeros of each column trimmed.
#[derive(Debug, Clone)]
pub struct DenseKhatriRao {
    rows: Vec<usize>,
    cols: usize,
    columns: Vec<Vec<(usize, Vec<f64>)>>,
}

impl DenseKhatriRao {
    pub fn new(factors: &[FactorMatrix]) -> Result<Self> {
        let cols = factors
            .first()
            .map(FactorMatrix::cols)
            .ok_or_else(|| Error::Parameter("at least one Khatri-Rao factor is required".into()))?;
        if let Some(bad) = factors.iter().find(|f| f.cols() != cols) {
            return Err(Error::Shape {
                expected: cols,
                found: bad.cols(),
            });
        }
        let columns = factors
            .iter()
            .map(|f| {
                (0..cols)
                    .map(|i| {
                        let col: Vec<f64> = (0..f.rows()).map(|r| f.get(r, i)).collect();
                        match col.iter().position(|v| *v != 0.0) {
                            Some(first) => {
                                let last = col.iter().rposition(|v| *v != 0.0).unwrap_or(first);
                                (first, col[first..=last].to_vec())
                            }
                            None => (0, Vec::new()),
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            rows: factors.iter().map(FactorMatrix::rows).collect(),
            cols,
            columns,
        })
    }
}

impl KhatriRaoFactors for DenseKhatriRao {
    fn axes(&self) -> usize {
        self.rows.len()
    }

    fn axis_rows(&self, axis: usize) -> usize {
        self.rows[axis]
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn column(&self, axis: usize, i: usize) -> (usize, &[f64]) {
        let (offset, values) = &self.columns[axis][i];
        (*offset, values)
    }
}

/// Nonzero entries of one Khatri-Rao column `v_i = ⊗_p A_p[., i]`.
#[derive(Debug, Default, Clone)]
pub struct RankOneTerm {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
    scratch_idx: Vec<usize>,
    scratch_val: Vec<f64>,
}

impl RankOneTerm {
    pub fn expand<F: KhatriRaoFactors + ?Sized>(&mut self, factors: &F, i: usize) {
        self.indices.clear();
        self.values.clear();
        self.indices.push(0);
        self.values.push(1.0);
        for p in 0..factors.axes() {
            let m_p = factors.axis_rows(p);
            let (offset, column) = factors.column(p, i);
            std::mem::swap(&mut self.indices, &mut self.scratch_idx);
            std::mem::swap(&mut self.values, &mut self.scratch_val);
            self.indices.clear();
            self.values.clear();
            for (&idx, &val) in self.scratch_idx.iter().zip(&self.scratch_val) {
                for (k, &a) in column.iter().enumerate() {
                    self.indices.push(idx * m_p + offset + k);
                    self.values.push(val * a);
                }
            }
        }
    }

    pub fn dot(&self, y: &[f64]) -> f64 {
        self.indices
            .iter()
            .zip(&self.values)
            .map(|(&j, &v)| v * y[j])
            .sum()
    }

    pub fn scatter(&self, scale: f64, out: &mut [f64]) {
        for (&j, &v) in self.indices.iter().zip(&self.values) {
            out[j] += scale * v;
        }
    }
}

/// `(A_1 ⊙ ... ⊙ A_P) x = Σ_i x[i] v_i`.
pub fn khatri_rao_matvec<F: KhatriRaoFactors + ?Sized>(factors: &F, x: &[f64]) -> Result<Vec<f64>> {
    check_len(factors.cols(), x.len())?;
    let mut out = vec![0.0; factors.rows()];
    let mut term = RankOneTerm::default();
    for (i, &xi) in x.iter().enumerate() {
        if xi != 0.0 {
            term.expand(factors, i);
            term.scatter(xi, &mut out);
        }
    }
    Ok(out)
}

/// `(A_1 ⊙ ... ⊙ A_P)' y`, entry `i` being `v_i' y`.
pub fn khatri_rao_tmatvec<F: KhatriRaoFactors + ?Sized>(factors: &F, y: &[f64]) -> Result<Vec<f64>> {
    check_len(factors.rows(), y.len())?;
    let mut term = RankOneTerm::default();
    Ok((0..factors.cols())
        .map(|i| {
            term.expand(factors, i);
            term.dot(y)
        })
        .collect())
}

/// `diag(A A')`, entry `j` being `Σ_i v_i[j]^2`.
pub fn khatri_rao_gram_diag<F: KhatriRaoFactors + ?Sized>(factors: &F) -> Vec<f64> {
    let mut diag = vec![0.0; factors.rows()];
    let mut term = RankOneTerm::default();
    for i in 0..factors.cols() {
        term.expand(factors, i);
        for (&j, &v) in term.indices.iter().zip(&term.values) {
            diag[j] += v * v;
        }
    }
    diag
}

/// Adds `Σ_{i in range} v_i (v_i' x)` to `out`, i.e. a slice of `A A' x`
/// without the intermediate length-`n` vector.
pub fn khatri_rao_gram_apply_range<F: KhatriRaoFactors + ?Sized>(
    factors: &F,
    range: std::ops::Range<usize>,
    x: &[f64],
    out: &mut [f64],
    term: &mut RankOneTerm,
) {
    for i in range {
        term.expand(factors, i);
        let t = term.dot(x);
        term.scatter(t, out);
    }
}
