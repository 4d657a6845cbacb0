//! Slow, dense reference constructions for checking the matrix-free code.
//!
//! Nothing here calls into `mgspline-core`: the basis is the textbook
//! Cox-de Boor recursion, Gram matrices use Golub-Welsch quadrature, and the
//! subdivision matrix is recovered by a least squares fit between bases.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Uniform space on `[a, b]` with `2^level` cells and `degree` extra knots on
/// either side.
#[derive(Debug, Clone)]
pub struct Space {
    pub a: f64,
    pub b: f64,
    pub level: u32,
    pub degree: usize,
    pub knots: Vec<f64>,
}

impl Space {
    pub fn new(a: f64, b: f64, level: u32, degree: usize) -> Self {
        let cells = 1usize << level;
        let h = (b - a) / cells as f64;
        let knots = (0..=cells + 2 * degree)
            .map(|k| a + (k as f64 - degree as f64) * h)
            .collect();
        Self { a, b, level, degree, knots }
    }

    pub fn unit(level: u32, degree: usize) -> Self {
        Self::new(0.0, 1.0, level, degree)
    }

    pub fn dim(&self) -> usize {
        (1usize << self.level) + self.degree
    }

    pub fn value(&self, j: usize, x: f64) -> f64 {
        bspline(&self.knots, j, self.degree, x, self.b)
    }

    pub fn derivative(&self, j: usize, order: usize, x: f64) -> f64 {
        bspline_derivative(&self.knots, j, self.degree, order, x, self.b)
    }
}

/// `B_{j,q}(x)` by recursion on the degree. Cells are half open except
/// the one ending at `upper`.
pub fn bspline(t: &[f64], j: usize, q: usize, x: f64, upper: f64) -> f64 {
    if q == 0 {
        let (lo, hi) = (t[j], t[j + 1]);
        let inside = if x == upper { hi == upper && lo < hi } else { lo <= x && x < hi };
        return if inside { 1.0 } else { 0.0 };
    }
    let left = t[j + q] - t[j];
    let right = t[j + q + 1] - t[j + 1];
    let mut v = 0.0;
    if left > 0.0 {
        v += (x - t[j]) / left * bspline(t, j, q - 1, x, upper);
    }
    if right > 0.0 {
        v += (t[j + q + 1] - x) / right * bspline(t, j + 1, q - 1, x, upper);
    }
    v
}

pub fn bspline_derivative(t: &[f64], j: usize, q: usize, order: usize, x: f64, upper: f64) -> f64 {
    if order == 0 {
        return bspline(t, j, q, x, upper);
    }
    if q == 0 {
        return 0.0;
    }
    let left = t[j + q] - t[j];
    let right = t[j + q + 1] - t[j + 1];
    let mut v = 0.0;
    if left > 0.0 {
        v += q as f64 / left * bspline_derivative(t, j, q - 1, order - 1, x, upper);
    }
    if right > 0.0 {
        v -= q as f64 / right * bspline_derivative(t, j + 1, q - 1, order - 1, x, upper);
    }
    v
}

/// Tensor-product index with the first axis varying slowest.
pub fn linear_index(multi: &[usize], dims: &[usize]) -> usize {
    multi.iter().zip(dims).fold(0, |acc, (&i, &d)| acc * d + i)
}

pub fn multi_index(mut k: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = k % d;
        k /= d;
    }
    out
}

pub fn dims(spaces: &[Space]) -> Vec<usize> {
    spaces.iter().map(Space::dim).collect()
}

/// `φ_k(x)` for a tensor-product basis.
pub fn tensor_value(spaces: &[Space], k: usize, x: &[f64]) -> f64 {
    let idx = multi_index(k, &dims(spaces));
    spaces
        .iter()
        .zip(idx)
        .zip(x)
        .map(|((s, j), &xp)| s.value(j, xp))
        .product()
}

/// `n × K` design matrix for row-major points.
pub fn design_matrix(spaces: &[Space], points: &[f64]) -> DMatrix<f64> {
    let p = spaces.len();
    let n = points.len() / p;
    let k: usize = dims(spaces).iter().product();
    DMatrix::from_fn(n, k, |i, j| tensor_value(spaces, j, &points[i * p..(i + 1) * p]))
}

/// Nodes and weights on `[-1, 1]` from the eigen-decomposition of the
/// Jacobi matrix of the Legendre recurrence.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let jac = DMatrix::from_fn(m, m, |i, j| {
        if i + 1 == j || j + 1 == i {
            let k = i.max(j) as f64;
            k / (4.0 * k * k - 1.0).sqrt()
        } else {
            0.0
        }
    });
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| (eig.eigenvalues[i], 2.0 * eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// `∫_Ω ∂^r φ_j ∂^r φ_l` by composite Gauss quadrature over the cells in `Ω`.
pub fn gram(space: &Space, order: usize) -> DMatrix<f64> {
    let (nodes, weights) = gauss_legendre(8);
    let j = space.dim();
    let q = space.degree;
    let mut g = DMatrix::zeros(j, j);
    for c in 0..(1usize << space.level) {
        let lo = space.knots[q + c];
        let hi = space.knots[q + c + 1];
        let half = 0.5 * (hi - lo);
        for (z, w) in nodes.iter().zip(&weights) {
            let x = lo + half * (z + 1.0);
            let d: Vec<f64> = (0..j).map(|k| space.derivative(k, order, x)).collect();
            for a in 0..j {
                for b in 0..j {
                    g[(a, b)] += w * half * d[a] * d[b];
                }
            }
        }
    }
    g
}

pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

pub fn kron_all(factors: &[DMatrix<f64>]) -> DMatrix<f64> {
    factors[1..].iter().fold(factors[0].clone(), |acc, f| kron(&acc, f))
}

/// Row-wise Kronecker (Khatri-Rao) product of column-compatible factors:
/// column `i` is `⊗_p A_p[:, i]`.
pub fn khatri_rao(factors: &[DMatrix<f64>]) -> DMatrix<f64> {
    let n = factors[0].ncols();
    let rows: usize = factors.iter().map(|f| f.nrows()).product();
    let mut out = DMatrix::zeros(rows, n);
    for i in 0..n {
        let cols: Vec<DMatrix<f64>> = factors.iter().map(|f| DMatrix::from_column_slice(f.nrows(), 1, f.column(i).as_slice())).collect();
        let c = kron_all(&cols);
        out.column_mut(i).copy_from(&c.column(0));
    }
    out
}

/// Thin-plate roughness: pure second derivatives with weight 1 and mixed
/// first derivatives with weight 2.
pub fn penalty(spaces: &[Space]) -> DMatrix<f64> {
    let p = spaces.len();
    let k: usize = dims(spaces).iter().product();
    let grams: Vec<[DMatrix<f64>; 3]> = spaces.iter().map(|s| [gram(s, 0), gram(s, 1), gram(s, 2)]).collect();
    let mut total = DMatrix::zeros(k, k);
    let term = |orders: &[usize]| -> DMatrix<f64> {
        let fs: Vec<DMatrix<f64>> = orders.iter().enumerate().map(|(ax, &r)| grams[ax][r].clone()).collect();
        kron_all(&fs)
    };
    for a in 0..p {
        let mut r = vec![0; p];
        r[a] = 2;
        total += term(&r);
    }
    for a in 0..p {
        for b in a + 1..p {
            let mut r = vec![0; p];
            r[a] = 1;
            r[b] = 1;
            total += term(&r) * 2.0;
        }
    }
    total
}

/// `(Φ'Φ + λΛ, Φ'y)`.
pub fn system(spaces: &[Space], points: &[f64], y: &[f64], lambda: f64) -> (DMatrix<f64>, DVector<f64>) {
    let phi = design_matrix(spaces, points);
    let a = phi.transpose() * &phi + penalty(spaces) * lambda;
    let b = phi.transpose() * DVector::from_column_slice(y);
    (a, b)
}

/// Coefficients `S` with `φ^coarse_j = Σ_i S[i, j] φ^fine_i` on `Ω`, found by
/// least squares on sample points.
pub fn subdivision(coarse: &Space, fine: &Space) -> DMatrix<f64> {
    let m = 6 * fine.dim();
    let xs: Vec<f64> = (0..m)
        .map(|i| coarse.a + (coarse.b - coarse.a) * (i as f64 + 0.5) / m as f64)
        .collect();
    let bf = DMatrix::from_fn(m, fine.dim(), |i, j| fine.value(j, xs[i]));
    let bc = DMatrix::from_fn(m, coarse.dim(), |i, j| coarse.value(j, xs[i]));
    let svd = bf.svd(true, true);
    svd.solve(&bc, 1e-14).expect("least squares")
}

pub fn prolongation(coarse: &[Space], fine: &[Space]) -> DMatrix<f64> {
    let parts: Vec<DMatrix<f64>> = coarse.iter().zip(fine).map(|(c, f)| subdivision(c, f)).collect();
    kron_all(&parts)
}

pub fn unit_spaces(dim: usize, level: u32, degree: usize) -> Vec<Space> {
    (0..dim).map(|_| Space::unit(level, degree)).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random::<f64>()).collect()
}

pub fn symmetric_uniform(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// `1 / (1 + exp(-16 (‖x‖²/P - 1/2)))`.
pub fn sigmoid(x: &[f64]) -> f64 {
    let s: f64 = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    1.0 / (1.0 + (-16.0 * (s - 0.5)).exp())
}

/// `max |a - b| / max |b|`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "length mismatch");
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_is_exact_for_degree_fifteen() {
        let (x, w) = gauss_legendre(8);
        let i: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((i - 2.0 / 15.0).abs() < 1e-14);
    }

    #[test]
    fn hat_basis() {
        let s = Space::unit(1, 1);
        assert_eq!(s.dim(), 3);
        assert_eq!(s.value(1, 0.5), 1.0);
        assert_eq!(s.value(2, 1.0), 1.0);
        assert!((s.derivative(1, 1, 0.25) - 2.0).abs() < 1e-14);
    }

    #[test]
    fn index_round_trip() {
        let d = [3, 4, 5];
        for k in 0..60 {
            assert_eq!(linear_index(&multi_index(k, &d), &d), k);
        }
    }
}
