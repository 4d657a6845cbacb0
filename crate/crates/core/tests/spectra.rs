use mgspline_core::analysis::*;
use mgspline_core::multigrid::TransferDirection;
use mgspline_core::{Hierarchy, HierarchyConfig, JacobiSmoother, ScatteredDataset};
use mgspline_testkit as tk;
use nalgebra::DMatrix;

fn hierarchy(dim: usize, n: usize, levels: u32, lambda: f64) -> Hierarchy {
    let mut rng = tk::rng(17 + dim as u64);
    let pts = tk::uniform(&mut rng, n * dim);
    let y: Vec<f64> = (0..n).map(|i| tk::sigmoid(&pts[i * dim..(i + 1) * dim])).collect();
    let data = ScatteredDataset::unit_cube(pts, y, dim).unwrap();
    Hierarchy::build(&data, levels, lambda, &HierarchyConfig::default()).unwrap()
}

#[test]
fn identity_probe_is_the_assembled_matrix() {
    let hier = hierarchy(2, 500, 2, 1.0);
    let a = hier.finest().assemble_dense(1000).unwrap();
    assert_eq!(probe_preconditioned(&hier, ProbeKind::Identity).unwrap(), a);
    let s1 = spectrum(&a, "A").unwrap();
    let s2 = preconditioned_spectrum(&DMatrix::identity(a.nrows(), a.ncols()), &a, "I").unwrap();
    assert!(s2.eigenvalues.iter().all(|e| (e - 1.0).abs() < 1e-8));
    assert!(s1.eigenvalues.iter().all(|e| *e > 0.0));
    assert!(s1.condition_number >= 1.0);
}

#[test]
fn probe_columns_are_v_cycles() {
    let hier = hierarchy(2, 800, 3, 1.0);
    let probe = probe_preconditioned(&hier, ProbeKind::Jacobi(JacobiSmoother::default())).unwrap();
    let k = probe.nrows();
    for j in [0, 13, k - 1] {
        let mut e = vec![0.0; k];
        e[j] = 1.0;
        let col = hier.v_cycle(&vec![0.0; k], &hier.finest().apply(&e).unwrap(), 3).unwrap();
        assert!(tk::rel_err(probe.column(j).as_slice(), &col) <= 1e-12);
    }
    let a = hier.finest().assemble_dense(5000).unwrap();
    let s = preconditioned_spectrum(&probe, &a, "jacobi").unwrap();
    assert!(s.min() > 0.0 && s.max() < 2.0);
    // clustered: the bulk is near one
    let near = s.eigenvalues.iter().filter(|e| (**e - 1.0).abs() < 0.5).count();
    assert!(near * 10 >= 9 * s.eigenvalues.len());
    let ns = nonsymmetric_eigenvalues(&probe).unwrap();
    for ((re, im), e) in ns.iter().zip(&s.eigenvalues) {
        assert!(im.abs() < 1e-8 && (re - e).abs() < 1e-8);
    }
}

#[test]
fn multigrid_improves_condition_by_a_wide_margin() {
    let hier = hierarchy(2, 5000, 4, 1.0);
    let a = hier.finest().assemble_dense(5000).unwrap();
    let plain = spectrum(&a, "A").unwrap();
    let jac = preconditioned_spectrum(&probe_preconditioned(&hier, ProbeKind::Jacobi(JacobiSmoother::default())).unwrap(), &a, "J").unwrap();
    let ssor = preconditioned_spectrum(&probe_preconditioned(&hier, ProbeKind::Ssor(SsorConfig::default())).unwrap(), &a, "S").unwrap();
    assert!(plain.condition_number / jac.condition_number >= 20.0);
    assert!(ssor.condition_number <= jac.condition_number);
    assert!(ssor.min() > 0.0 && ssor.max() < 2.0);
}

#[test]
fn iteration_matrix_is_complement_of_preconditioned_operator() {
    let hier = hierarchy(2, 600, 3, 1.0);
    let s = JacobiSmoother::default();
    let c = jacobi_iteration_matrix(&hier, &s).unwrap();
    let probe = probe_preconditioned(&hier, ProbeKind::Jacobi(s)).unwrap();
    let k = c.nrows();
    let diff = &c - (DMatrix::identity(k, k) - &probe);
    assert!(tk::max_abs(&diff) <= 1e-9);
    assert!(spectral_radius(&c).unwrap() < 1.0);

    let cfg = SsorConfig::default();
    let cs = ssor_iteration_matrix(&hier, cfg).unwrap();
    let ps = probe_preconditioned(&hier, ProbeKind::Ssor(cfg)).unwrap();
    assert!(tk::max_abs(&(&cs - (DMatrix::identity(k, k) - &ps))) <= 1e-9);
}

#[test]
fn without_smoothing_both_cycles_are_the_two_grid_correction() {
    let hier = hierarchy(2, 700, 2, 1.0);
    let k = hier.finest().dimension();
    let mut rng = tk::rng(3);
    let b = tk::symmetric_uniform(&mut rng, k);
    // x = I A_1^{-1} I' b
    let coarse = hier.coarse_solve(&hier.transfer(1, &b, TransferDirection::Restrict).unwrap()).unwrap();
    let want = hier.transfer(1, &coarse, TransferDirection::Prolong).unwrap();

    let jac = JacobiSmoother { nu1: 0, nu2: 0, omega: 0.8 };
    let ssor = ssor_vcycle_reference(&hier, SsorConfig { nu1: 0, nu2: 0, relaxation: 1.0 }).unwrap();
    let mut ws = hier.workspace();
    let mut xj = vec![0.0; k];
    hier.v_cycle_with(&jac, &mut xj, &b, 2, &mut ws).unwrap();
    let mut xs = vec![0.0; k];
    hier.v_cycle_with(&ssor, &mut xs, &b, 2, &mut ws).unwrap();
    assert!(tk::rel_err(&xj, &want) <= 1e-12);
    assert!(tk::rel_err(&xs, &want) <= 1e-12);
}

#[test]
fn contraction_for_default_smoother() {
    for dim in 1..=2 {
        for lambda in [0.1, 1.0, 10.0] {
            let hier = hierarchy(dim, 1000, 3, lambda);
            let rho = spectral_radius(&jacobi_iteration_matrix(&hier, &JacobiSmoother::default()).unwrap()).unwrap();
            assert!(rho < 1.0, "P={dim} λ={lambda}: ρ={rho}");
        }
    }
}

#[test]
fn capacity_limits_are_enforced() {
    let mut rng = tk::rng(1);
    let pts = tk::uniform(&mut rng, 200);
    let data = ScatteredDataset::unit_cube(pts, vec![0.0; 100], 2).unwrap();
    let small = HierarchyConfig {
        dense_cap: 30,
        ..Default::default()
    };
    let hier = Hierarchy::build(&data, 2, 1.0, &small).unwrap();
    assert!(matches!(
        probe_preconditioned(&hier, ProbeKind::Jacobi(JacobiSmoother::default())),
        Err(mgspline_core::Error::Capacity { dimension: 49, cap: 30 })
    ));
    assert!(ssor_vcycle_reference(&hier, SsorConfig::default()).is_err());
}
