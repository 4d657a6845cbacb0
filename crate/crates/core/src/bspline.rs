//! Univariate B-splines on uniform, uniformly extended knot vectors.
//!
//! A space on level `g` over `[a, b]` has `2^g - 1` interior knots, mesh
//! width `h = (b - a) / 2^g` and `J = 2^g + q` basis functions. The knot
//! vector is extended by `q` equidistant knots past each end, so every basis
//! function is a shifted cardinal B-spline and the dyadic subdivision rule
//! holds without boundary modifications.

use crate::error::{Error, Result};
use crate::tensorops::FactorMatrix;

pub const MAX_DEGREE: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct SplineSpace1D {
    degree: usize,
    lower: f64,
    upper: f64,
    level: u32,
    mesh_width: f64,
    knots: Vec<f64>,
}

/// The `q + 1` basis functions (or derivatives) that are nonzero at a point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisActivation {
    pub first_index: usize,
    pub values: Vec<f64>,
}

impl SplineSpace1D {
    pub fn new(lower: f64, upper: f64, level: u32, degree: usize) -> Result<Self> {
        if !(lower.is_finite() && upper.is_finite() && lower < upper) {
            return Err(Error::Parameter(format!(
                "interval bounds must be finite with a < b, got [{lower}, {upper}]"
            )));
        }
        if level == 0 || level > 24 {
            return Err(Error::Parameter(format!("level must be in 1..=24, got {level}")));
        }
        if degree == 0 || degree > MAX_DEGREE {
            return Err(Error::Parameter(format!(
                "degree must be in 1..={MAX_DEGREE}, got {degree}"
            )));
        }
        let cells = 1usize << level;
        let width = upper - lower;
        let mesh_width = width / cells as f64;
        let knots = (0..cells + 2 * degree + 1)
            .map(|k| {
                let offset = k as f64 - degree as f64;
                if k == degree {
                    lower
                } else if k == degree + cells {
                    upper
                } else {
                    lower + width * (offset / cells as f64)
                }
            })
            .collect();
        Ok(Self {
            degree,
            lower,
            upper,
            level,
            mesh_width,
            knots,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn mesh_width(&self) -> f64 {
        self.mesh_width
    }

    /// Number of knot intervals inside `[a, b]`.
    pub fn cells(&self) -> usize {
        1usize << self.level
    }

    pub fn interior_knot_count(&self) -> usize {
        self.cells() - 1
    }

    pub fn dimension(&self) -> usize {
        self.cells() + self.degree
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn interior_knots(&self) -> &[f64] {
        &self.knots[self.degree + 1..self.degree + self.cells()]
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lower && x <= self.upper
    }

    /// Knot span index `s` with `t_s <= x < t_{s+1}`; the right end belongs
    /// to the last cell.
    pub fn span(&self, x: f64) -> Result<usize> {
        if !self.contains(x) {
            return Err(Error::OutOfDomain {
                value: x,
                lower: self.lower,
                upper: self.upper,
            });
        }
        let q = self.degree;
        let last = q + self.cells() - 1;
        let guess = ((x - self.lower) / self.mesh_width).floor();
        let mut span = if guess.is_finite() && guess >= 0.0 {
            (q + guess as usize).min(last)
        } else {
            q
        };
        while span > q && x < self.knots[span] {
            span -= 1;
        }
        while span < last && x >= self.knots[span + 1] {
            span += 1;
        }
        Ok(span)
    }

    /// Derivatives of order `order` of the active basis functions at `x`.
    pub fn eval_basis(&self, x: f64, order: usize) -> Result<BasisActivation> {
        let mut values = vec![0.0; self.degree + 1];
        let first_index = self.eval_basis_into(x, order, &mut values)?;
        Ok(BasisActivation {
            first_index,
            values,
        })
    }

    /// Writes the `q + 1` active values into `out` and returns the index of
    /// the first active basis function.
    pub fn eval_basis_into(&self, x: f64, order: usize, out: &mut [f64]) -> Result<usize> {
        if order > self.degree {
            return Err(Error::Parameter(format!(
                "derivative order {order} exceeds degree {}",
                self.degree
            )));
        }
        if out.len() != self.degree + 1 {
            return Err(Error::Shape {
                expected: self.degree + 1,
                found: out.len(),
            });
        }
        let span = self.span(x)?;
        self.eval_in_span(span, x, order, out);
        Ok(span - self.degree)
    }

    /// Cox-de Boor evaluation on a known span. Computes the degree `q - r`
    /// basis and raises it with the derivative recurrence
    /// `N'_{j,p} = p (N_{j,p-1} / (t_{j+p} - t_j) - N_{j+1,p-1} / (t_{j+p+1} - t_{j+1}))`.
    pub(crate) fn eval_in_span(&self, span: usize, x: f64, order: usize, out: &mut [f64]) {
        let q = self.degree;
        let t = &self.knots;
        let base = q - order;

        let mut left = [0.0; MAX_DEGREE + 1];
        let mut right = [0.0; MAX_DEGREE + 1];
        let mut n = [0.0; MAX_DEGREE + 1];
        n[0] = 1.0;
        for j in 1..=base {
            left[j] = x - t[span + 1 - j];
            right[j] = t[span + j] - x;
            let mut saved = 0.0;
            for r in 0..j {
                let temp = n[r] / (right[r + 1] + left[j - r]);
                n[r] = saved + right[r + 1] * temp;
                saved = left[j - r] * temp;
            }
            n[j] = saved;
        }

        // n[k] holds N_{span-p+k, p}; raise p from base to q by differentiation.
        for p in base + 1..=q {
            let mut next = [0.0; MAX_DEGREE + 1];
            let pf = p as f64;
            for (k, slot) in next.iter_mut().enumerate().take(p + 1) {
                let j = span + k - p;
                let mut value = 0.0;
                // N_{j,p-1} lives at k - 1 of the previous row.
                if k >= 1 {
                    value += n[k - 1] / (t[j + p] - t[j]);
                }
                if k < p {
                    value -= n[k] / (t[j + p + 1] - t[j + 1]);
                }
                *slot = pf * value;
            }
            n = next;
        }
        out.copy_from_slice(&n[..=q]);
    }

    /// Gram matrix of the `order`-th derivatives over `[a, b]`, integrated
    /// cell by cell with `q - order + 1` Gauss-Legendre nodes (exact for the
    /// polynomial integrand of degree `2 (q - order)`).
    ///
    /// Derivatives are taken piecewise, so an order above the degree gives
    /// the zero matrix.
    pub fn gram_matrix(&self, order: usize) -> Result<BandedSymmetricMatrix> {
        let q = self.degree;
        if order > q {
            return Ok(BandedSymmetricMatrix::zeros(self.dimension(), q));
        }
        let (nodes, weights) = gauss_legendre(q - order + 1);
        let mut gram = BandedSymmetricMatrix::zeros(self.dimension(), q);
        let mut values = vec![0.0; q + 1];
        for cell in 0..self.cells() {
            let span = q + cell;
            let (c0, c1) = (self.knots[span], self.knots[span + 1]);
            let half = 0.5 * (c1 - c0);
            let mid = 0.5 * (c1 + c0);
            for (&node, &weight) in nodes.iter().zip(&weights) {
                let x = mid + half * node;
                self.eval_in_span(span, x, order, &mut values);
                let w = weight * half;
                for a in 0..=q {
                    for b in a..=q {
                        gram.add(cell + a, cell + b, w * values[a] * values[b]);
                    }
                }
            }
        }
        Ok(gram)
    }

    /// Prolongation from this space to the space one level finer.
    pub fn subdivision_to(&self, fine: &SplineSpace1D) -> Result<SubdivisionMatrix> {
        SubdivisionMatrix::new(self, fine)
    }
}

/// Symmetric matrix with `bandwidth` super-diagonals, stored row by row as
/// `band[i * (bandwidth + 1) + d] = M[i, i + d]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BandedSymmetricMatrix {
    dimension: usize,
    bandwidth: usize,
    band: Vec<f64>,
}

impl BandedSymmetricMatrix {
    pub fn zeros(dimension: usize, bandwidth: usize) -> Self {
        Self {
            dimension,
            bandwidth,
            band: vec![0.0; dimension * (bandwidth + 1)],
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = if i <= j { (i, j) } else { (j, i) };
        if hi - lo > self.bandwidth || hi >= self.dimension {
            0.0
        } else {
            self.band[lo * (self.bandwidth + 1) + (hi - lo)]
        }
    }

    fn add(&mut self, i: usize, j: usize, value: f64) {
        debug_assert!(i <= j && j - i <= self.bandwidth);
        self.band[i * (self.bandwidth + 1) + (j - i)] += value;
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dimension).map(|i| self.get(i, i)).collect()
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.dimension;
        let mut dense = vec![0.0; n * n];
        for i in 0..n {
            let lo = i.saturating_sub(self.bandwidth);
            let hi = (i + self.bandwidth).min(n - 1);
            for j in lo..=hi {
                dense[i * n + j] = self.get(i, j);
            }
        }
        dense
    }

    pub fn to_factor(&self) -> FactorMatrix {
        FactorMatrix::from_row_major(self.dimension, self.dimension, self.to_dense())
            .expect("square banded matrix has consistent shape")
    }
}

/// The dyadic refinement matrix `I[i, j] = 2^{-q} C(q + 1, i - 2j + q)`
/// (zero-based indices) mapping coarse coefficients to fine coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SubdivisionMatrix {
    rows: usize,
    cols: usize,
    degree: usize,
}

impl SubdivisionMatrix {
    pub fn new(coarse: &SplineSpace1D, fine: &SplineSpace1D) -> Result<Self> {
        if coarse.degree != fine.degree {
            return Err(Error::Parameter(format!(
                "degree mismatch: coarse {} vs fine {}",
                coarse.degree, fine.degree
            )));
        }
        if coarse.lower != fine.lower || coarse.upper != fine.upper {
            return Err(Error::Parameter(
                "coarse and fine spaces must share the same interval".into(),
            ));
        }
        if fine.level != coarse.level + 1 {
            return Err(Error::Parameter(format!(
                "fine level must be coarse level + 1, got {} and {}",
                coarse.level, fine.level
            )));
        }
        Ok(Self {
            rows: fine.dimension(),
            cols: coarse.dimension(),
            degree: coarse.degree,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let q = self.degree as i64;
        let k = i as i64 - 2 * j as i64 + q;
        if (0..=q + 1).contains(&k) {
            binomial(self.degree + 1, k as usize) as f64 / (1u64 << self.degree) as f64
        } else {
            0.0
        }
    }

    pub fn to_factor(&self) -> FactorMatrix {
        let mut dense = vec![0.0; self.rows * self.cols];
        for j in 0..self.cols {
            for k in 0..=self.degree + 1 {
                let i = 2 * j + k;
                if i >= self.degree && i - self.degree < self.rows {
                    dense[(i - self.degree) * self.cols + j] = self.entry(i - self.degree, j);
                }
            }
        }
        FactorMatrix::from_row_major(self.rows, self.cols, dense)
            .expect("subdivision matrix has consistent shape")
    }
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` via Newton iteration on
/// the Legendre polynomial.
pub fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; count];
    let mut weights = vec![0.0; count];
    let n = count as f64;
    for i in 0..count.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut derivative = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=count {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            derivative = n * (x * p1 - p0) / (x * x - 1.0);
            let step = p1 / derivative;
            x -= step;
            if step.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[count - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * derivative * derivative);
        weights[i] = w;
        weights[count - 1 - i] = w;
    }
    (nodes, weights)
}
