use mgspline_core::tensorops::{
    khatri_rao_gram_diag, khatri_rao_matvec, khatri_rao_tmatvec, kron_matvec, kron_matvec_transposed, kron_matvec_with,
    DenseKhatriRao, FactorMatrix, KronWorkspace, KroneckerFactors,
};
use mgspline_testkit as tk;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

fn to_factor(m: &DMatrix<f64>) -> FactorMatrix {
    let data: Vec<f64> = (0..m.nrows()).flat_map(|i| (0..m.ncols()).map(move |j| m[(i, j)])).collect();
    FactorMatrix::from_row_major(m.nrows(), m.ncols(), data).unwrap()
}

fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize, sparsity: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        if rng.random::<f64>() < sparsity {
            0.0
        } else {
            rng.random_range(-1.0..1.0)
        }
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[test]
fn kronecker_products_match_dense_assembly() {
    let mut rng = tk::rng(2024);
    for case in 0..200 {
        let p = 1 + case % 4;
        let shapes: Vec<(usize, usize)> = (0..p).map(|_| (rng.random_range(1..=4), rng.random_range(1..=4))).collect();
        let dense: Vec<DMatrix<f64>> = shapes.iter().map(|&(r, c)| random_matrix(&mut rng, r, c, 0.3)).collect();
        let f = KroneckerFactors::new(dense.iter().map(to_factor).collect()).unwrap();
        let big = tk::kron_all(&dense);
        let x = tk::symmetric_uniform(&mut rng, big.ncols());
        let y = tk::symmetric_uniform(&mut rng, big.nrows());
        let ax = kron_matvec(&f, &x).unwrap();
        let aty = kron_matvec_transposed(&f, &y).unwrap();
        let want = &big * DVector::from_column_slice(&x);
        let want_t = big.transpose() * DVector::from_column_slice(&y);
        for (g, w) in ax.iter().zip(want.iter()).chain(aty.iter().zip(want_t.iter())) {
            assert!((g - w).abs() <= 1e-12 * (1.0 + w.abs()), "case {case}");
        }
        let lhs = dot(&ax, &y);
        let rhs = dot(&x, &aty);
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        let via_transposed = kron_matvec(&f.transposed(), &y).unwrap();
        assert!(tk::rel_err(&via_transposed, &aty) <= 1e-13 || aty.iter().all(|v| v.abs() < 1e-15));
        let diag: Vec<f64> = (0..big.nrows().min(big.ncols())).map(|i| big[(i, i)]).collect();
        if big.is_square() && shapes.iter().all(|(r, c)| r == c) {
            assert!(tk::rel_err(&f.diagonal(), &diag) <= 1e-14 || diag.iter().all(|v| *v == 0.0));
        }
    }
}

#[test]
fn khatri_rao_products_match_dense_assembly() {
    let mut rng = tk::rng(77);
    for case in 0..200 {
        let p = 1 + case % 4;
        let n = rng.random_range(1..=4);
        let dense: Vec<DMatrix<f64>> = (0..p).map(|_| { let r = rng.random_range(1..=4); random_matrix(&mut rng, r, n, 0.2) }).collect();
        let factors: Vec<FactorMatrix> = dense.iter().map(to_factor).collect();
        let f = DenseKhatriRao::new(&factors).unwrap();
        let big = tk::khatri_rao(&dense);
        let x = tk::symmetric_uniform(&mut rng, n);
        let y = tk::symmetric_uniform(&mut rng, big.nrows());
        let ax = khatri_rao_matvec(&f, &x).unwrap();
        let aty = khatri_rao_tmatvec(&f, &y).unwrap();
        let want = &big * DVector::from_column_slice(&x);
        let want_t = big.transpose() * DVector::from_column_slice(&y);
        for (g, w) in ax.iter().zip(want.iter()).chain(aty.iter().zip(want_t.iter())) {
            assert!((g - w).abs() <= 1e-12 * (1.0 + w.abs()), "case {case}");
        }
        let lhs = dot(&ax, &y);
        let rhs = dot(&x, &aty);
        assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
        let gram = &big * big.transpose();
        let round_trip = khatri_rao_matvec(&f, &khatri_rao_tmatvec(&f, &y).unwrap()).unwrap();
        let want_rt = &gram * DVector::from_column_slice(&y);
        for (g, w) in round_trip.iter().zip(want_rt.iter()) {
            assert!((g - w).abs() <= 1e-12 * (1.0 + w.abs()));
        }
        for (g, w) in khatri_rao_gram_diag(&f).iter().zip(gram.diagonal().iter()) {
            assert!((g - w).abs() <= 1e-12 * (1.0 + w.abs()));
        }
    }
}

#[test]
fn unit_and_zero_inputs() {
    let a1 = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 2.0, -1.0, 3.0, 0.5]);
    let a2 = DMatrix::from_row_slice(2, 3, &[0.0, 1.0, 1.0, 4.0, 2.0, -2.0]);
    let f = DenseKhatriRao::new(&[to_factor(&a1), to_factor(&a2)]).unwrap();
    for i in 0..3 {
        let mut e = vec![0.0; 3];
        e[i] = 1.0;
        let col = khatri_rao_matvec(&f, &e).unwrap();
        let want: Vec<f64> = (0..4).map(|k| a1[(k / 2, i)] * a2[(k % 2, i)]).collect();
        assert_eq!(col, want);
    }
    assert_eq!(khatri_rao_matvec(&f, &[0.0; 3]).unwrap(), vec![0.0; 4]);
    assert_eq!(khatri_rao_tmatvec(&f, &[0.0; 4]).unwrap(), vec![0.0; 3]);
}

#[test]
fn workspace_reuse_gives_identical_results() {
    let mut rng = tk::rng(5);
    let dense: Vec<DMatrix<f64>> = (0..3).map(|_| random_matrix(&mut rng, 4, 3, 0.0)).collect();
    let f = KroneckerFactors::new(dense.iter().map(to_factor).collect()).unwrap();
    let mut ws = KronWorkspace::with_capacity(f.max_intermediate(false));
    let cap = ws.len();
    let x = tk::symmetric_uniform(&mut rng, 27);
    let first = kron_matvec_with(&f, &x, &mut ws, false).unwrap().to_vec();
    let second = kron_matvec_with(&f, &x, &mut ws, false).unwrap().to_vec();
    assert_eq!(first, second);
    assert_eq!(first, kron_matvec(&f, &x).unwrap());
    assert_eq!(ws.len(), cap);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn kronecker_adjoint_identity(seed in any::<u64>(), p in 1usize..=4) {
        let mut rng = tk::rng(seed);
        let dense: Vec<DMatrix<f64>> = (0..p).map(|_| {
            let (r, c) = (rng.random_range(1..=4), rng.random_range(1..=4));
            random_matrix(&mut rng, r, c, 0.4)
        }).collect();
        let f = KroneckerFactors::new(dense.iter().map(to_factor).collect()).unwrap();
        let x = tk::symmetric_uniform(&mut rng, f.cols());
        let y = tk::symmetric_uniform(&mut rng, f.rows());
        let lhs = dot(&kron_matvec(&f, &x).unwrap(), &y);
        let rhs = dot(&x, &kron_matvec_transposed(&f, &y).unwrap());
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn kronecker_is_linear(seed in any::<u64>(), s in -3.0f64..3.0) {
        let mut rng = tk::rng(seed);
        let dense: Vec<DMatrix<f64>> = (0..3).map(|_| random_matrix(&mut rng, 3, 2, 0.0)).collect();
        let f = KroneckerFactors::new(dense.iter().map(to_factor).collect()).unwrap();
        let x = tk::symmetric_uniform(&mut rng, 8);
        let z = tk::symmetric_uniform(&mut rng, 8);
        let combo: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + s * b).collect();
        let lhs = kron_matvec(&f, &combo).unwrap();
        let fx = kron_matvec(&f, &x).unwrap();
        let fz = kron_matvec(&f, &z).unwrap();
        for (l, (a, b)) in lhs.iter().zip(fx.iter().zip(&fz)) {
            prop_assert!((l - (a + s * b)).abs() <= 1e-12 * (1.0 + l.abs()));
        }
    }
}
