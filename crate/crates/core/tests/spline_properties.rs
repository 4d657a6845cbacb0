use mgspline_core::bspline::SplineSpace1D;
use mgspline_testkit as tk;
use proptest::prelude::*;

fn space(level: u32, degree: usize) -> SplineSpace1D {
    SplineSpace1D::new(0.0, 1.0, level, degree).unwrap()
}

#[test]
fn dimension_matches_coefficient_table() {
    assert_eq!(space(5, 3).dimension(), 35);
    assert_eq!(space(1, 3).dimension(), 5);
    assert_eq!(space(1, 3).interior_knots(), &[0.5]);
    let s = SplineSpace1D::new(0.0, 2.0, 2, 1).unwrap();
    assert_eq!(s.mesh_width(), 0.5);
    assert_eq!(s.knots(), &[-0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5]);
    assert_eq!(s.dimension(), 5);
}

#[test]
fn gram_matrices_match_quadrature_oracle() {
    for q in 1..=5 {
        for level in 1..=3 {
            let s = SplineSpace1D::new(-0.5, 1.5, level, q).unwrap();
            let oracle = tk::Space::new(-0.5, 1.5, level, q);
            for r in 0..=q.min(2) {
                let g = s.gram_matrix(r).unwrap();
                let want = tk::gram(&oracle, r);
                let scale = tk::max_abs(&want);
                for i in 0..s.dimension() {
                    for j in 0..s.dimension() {
                        assert!(
                            (g.get(i, j) - want[(i, j)]).abs() <= 1e-12 * scale,
                            "q={q} g={level} r={r} ({i},{j})"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn subdivision_matches_least_squares_oracle() {
    for q in 1..=5 {
        for level in 1..=3 {
            let c = SplineSpace1D::new(0.0, 3.0, level, q).unwrap();
            let f = SplineSpace1D::new(0.0, 3.0, level + 1, q).unwrap();
            let sub = c.subdivision_to(&f).unwrap();
            let want = tk::subdivision(&tk::Space::new(0.0, 3.0, level, q), &tk::Space::new(0.0, 3.0, level + 1, q));
            for i in 0..sub.rows() {
                for j in 0..sub.cols() {
                    assert!((sub.entry(i, j) - want[(i, j)]).abs() <= 1e-10, "q={q} g={level} ({i},{j})");
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn partition_of_unity_and_positivity(x in 0.0f64..=1.0, level in 1u32..=6, q in 1usize..=5) {
        let act = space(level, q).eval_basis(x, 0).unwrap();
        prop_assert_eq!(act.values.len(), q + 1);
        prop_assert!(act.values.iter().all(|v| *v >= -1e-15 && *v <= 1.0 + 1e-15));
        let sum: f64 = act.values.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-13);
    }

    #[test]
    fn derivatives_of_partition_vanish(x in 0.0f64..=1.0, level in 1u32..=5, q in 2usize..=5, r in 1usize..=2) {
        let act = space(level, q).eval_basis(x, r).unwrap();
        let sum: f64 = act.values.iter().sum();
        let h = 0.5f64.powi(level as i32);
        prop_assert!(sum.abs() <= 1e-10 / h.powi(r as i32));
    }

    #[test]
    fn values_match_recursive_oracle(x in -1.0f64..=2.0, level in 1u32..=4, q in 1usize..=5, r in 0usize..=2) {
        prop_assume!(r <= q);
        let s = SplineSpace1D::new(-1.0, 2.0, level, q).unwrap();
        let o = tk::Space::new(-1.0, 2.0, level, q);
        let act = s.eval_basis(x, r).unwrap();
        for j in 0..s.dimension() {
            let got = if j >= act.first_index && j <= act.first_index + q { act.values[j - act.first_index] } else { 0.0 };
            let want = o.derivative(j, r, x);
            prop_assert!((got - want).abs() <= 1e-10 * (1.0 + want.abs()), "j={} {} vs {}", j, got, want);
        }
    }

    #[test]
    fn first_derivative_matches_central_difference(x in 0.05f64..0.95, q in 2usize..=5) {
        let s = space(3, q);
        let d = s.eval_basis(x, 1).unwrap();
        let eps = 1e-6;
        let hi = s.eval_basis(x + eps, 0).unwrap();
        let lo = s.eval_basis(x - eps, 0).unwrap();
        let val = |a: &mgspline_core::bspline::BasisActivation, j: usize| {
            if j >= a.first_index && j <= a.first_index + q { a.values[j - a.first_index] } else { 0.0 }
        };
        for j in d.first_index..=d.first_index + q {
            let fd = (val(&hi, j) - val(&lo, j)) / (2.0 * eps);
            prop_assert!((val(&d, j) - fd).abs() <= 1e-5 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn refinement_reproduces_coarse_spline(seed in any::<u64>(), level in 1u32..=4, q in 1usize..=5) {
        let c = space(level, q);
        let f = space(level + 1, q);
        let sub = c.subdivision_to(&f).unwrap().to_factor();
        let mut rng = tk::rng(seed);
        let alpha = tk::symmetric_uniform(&mut rng, c.dimension());
        let fine = sub.matvec(&alpha).unwrap();
        let eval = |s: &SplineSpace1D, coef: &[f64], x: f64| {
            let a = s.eval_basis(x, 0).unwrap();
            a.values.iter().enumerate().map(|(k, v)| v * coef[a.first_index + k]).sum::<f64>()
        };
        for x in tk::uniform(&mut rng, 50) {
            prop_assert!((eval(&c, &alpha, x) - eval(&f, &fine, x)).abs() <= 1e-12);
        }
    }

    #[test]
    fn span_brackets_point(x in 0.0f64..=1.0, level in 1u32..=10, q in 1usize..=5) {
        let s = space(level, q);
        let k = s.span(x).unwrap();
        let t = s.knots();
        prop_assert!(t[k] <= x);
        prop_assert!(x < t[k + 1] || (x == 1.0 && t[k + 1] == 1.0));
    }
}
