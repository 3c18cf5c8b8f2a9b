//! The geometry-induced correction solve: a pure second-azimuthal-mode
//! field driven by a trace-free boundary second-fundamental-form
//! perturbation, normalized against the tangent family.

use yamabe_lab::solver::{cutoff_chi, solve_correction_term, AzimuthalGrid, SolverError};

const PI0_DIAG: [[f64; 2]; 2] = [[1.0, 0.0], [0.0, -1.0]];

fn base_grid() -> AzimuthalGrid {
    AzimuthalGrid::new(30.0, 240, 24)
}

#[test]
fn cutoff_is_a_plateau_with_quintic_shoulder() {
    let eps = 0.03;
    let dp = 0.7;
    assert_eq!(cutoff_chi(eps, 0.0, dp), 1.0);
    assert_eq!(cutoff_chi(eps, dp / (2.0 * eps), dp), 1.0);
    assert_eq!(cutoff_chi(eps, 3.0 * dp / eps, dp), 0.0);
    assert!((cutoff_chi(eps, 1.5 * dp / eps, dp) - 0.5).abs() < 1e-14);
    let mut prev = f64::INFINITY;
    for k in 0..=100 {
        let r = (k as f64) * 3.0 * dp / (100.0 * eps);
        let v = cutoff_chi(eps, r, dp);
        assert!((0.0..=1.0).contains(&v));
        assert!(v <= prev + 1e-15, "cutoff not monotone at r = {r}");
        prev = v;
    }
}

#[test]
fn zero_perturbation_gives_the_zero_correction() {
    let grid = AzimuthalGrid::new(10.0, 40, 8);
    let sol = solve_correction_term(&[[0.0; 2]; 2], 0.01, 0.5, &grid, 1.0).unwrap();
    assert_eq!(sol.sup_norm, 0.0);
    assert_eq!(sol.evaluate(&[1.0, 0.5, 0.3]), 0.0);
}

#[test]
fn correction_amplitude_is_linear_in_epsilon() {
    let grid = base_grid();
    let sol1 = solve_correction_term(&PI0_DIAG, 0.01, 0.5, &grid, 1.0).unwrap();
    assert!(
        sol1.solve.relative_residual < 1e-10,
        "solve residual {:.3e}",
        sol1.solve.relative_residual
    );
    // measured amplitude scale: sup|φ| ≈ 0.335·ε for this perturbation
    let ratio1 = sol1.sup_norm / 0.01;
    assert!(
        (0.30..=0.37).contains(&ratio1),
        "sup/ε = {ratio1:.6} left the pinned band [0.30, 0.37]"
    );
    let sol2 = solve_correction_term(&PI0_DIAG, 0.02, 0.5, &grid, 1.0).unwrap();
    let doubling = sol2.sup_norm / sol1.sup_norm;
    assert!(
        (1.9..=2.1).contains(&doubling),
        "ε-doubling amplitude ratio {doubling:.6} outside [1.9, 2.1]"
    );
}

#[test]
fn correction_is_normalized_against_the_tangent_family() {
    let grid = base_grid();
    let sol = solve_correction_term(&PI0_DIAG, 0.01, 0.5, &grid, 1.0).unwrap();
    let tol = 1e-10 * sol.sup_norm;
    let norm = &sol.normalization;
    assert!(norm.value_at_origin.abs() <= tol, "origin value {:.3e}", norm.value_at_origin);
    assert!(norm.tangential_gradient[0].abs() <= tol);
    assert!(norm.tangential_gradient[1].abs() <= tol);
}

#[test]
fn correction_decays_like_the_matched_far_field() {
    let grid = base_grid();
    let sol = solve_correction_term(&PI0_DIAG, 0.01, 0.5, &grid, 1.0).unwrap();
    let decay = &sol.decay;
    assert!(
        (-0.3..=0.3).contains(&decay.amplitude_exponent),
        "amplitude exponent {:.4}",
        decay.amplitude_exponent
    );
    assert!(
        (-1.3..=-0.7).contains(&decay.gradient_exponent),
        "gradient exponent {:.4}",
        decay.gradient_exponent
    );
    assert!(!decay.truncation_warning);
    assert!(decay.window.0 < decay.window.1);
}

#[test]
fn correction_is_linear_in_the_perturbation() {
    let grid = base_grid();
    let pi_b = [[0.3, 0.4], [0.4, -0.3]];
    let pi_sum = [[1.3, 0.4], [0.4, -1.3]];
    let sol_a = solve_correction_term(&PI0_DIAG, 0.01, 0.5, &grid, 1.0).unwrap();
    let sol_b = solve_correction_term(&pi_b, 0.01, 0.5, &grid, 1.0).unwrap();
    let sol_ab = solve_correction_term(&pi_sum, 0.01, 0.5, &grid, 1.0).unwrap();
    let probes: [[f64; 3]; 4] =
        [[1.5, 0.7, 0.4], [3.0, -1.2, 2.0], [0.4, 0.1, 0.05], [7.0, 2.0, 1.0]];
    for y in &probes {
        let superposed = sol_a.evaluate(y) + sol_b.evaluate(y);
        let joint = sol_ab.evaluate(y);
        assert!(
            (superposed - joint).abs() <= 1e-10 * sol_ab.sup_norm,
            "superposition mismatch at {y:?}: {superposed:.6e} vs {joint:.6e}"
        );
    }
}

/// Nested grids share nodes; the profile differences between levels shrink
/// at (at least) second order.
#[test]
fn correction_profile_converges_under_refinement() {
    let levels: [(usize, usize); 3] = [(60, 6), (120, 12), (240, 24)];
    let mut sols = Vec::new();
    for (n_rho, n_theta) in levels {
        let grid = AzimuthalGrid::new(30.0, n_rho, n_theta);
        sols.push(solve_correction_term(&PI0_DIAG, 0.01, 0.5, &grid, 1.0).unwrap());
    }
    let mut diffs = Vec::new();
    for lvl in 0..2 {
        let coarse = &sols[lvl];
        let fine = &sols[lvl + 1];
        let mut worst: f64 = 0.0;
        for i in 0..=coarse.grid.n_rho {
            for j in 0..=coarse.grid.n_theta {
                let d = (coarse.profile[(i, j)] - fine.profile[(2 * i, 2 * j)]).abs();
                worst = worst.max(d);
            }
        }
        diffs.push(worst);
    }
    let order = (diffs[0] / diffs[1]).log2();
    assert!(order >= 1.9, "inter-level convergence order {order:.3} below 1.9 ({diffs:?})");
}

#[test]
fn short_domain_raises_the_truncation_warning() {
    let grid = AzimuthalGrid::new(4.0, 40, 8);
    let sol = solve_correction_term(&PI0_DIAG, 0.01, 0.5, &grid, 1.0).unwrap();
    assert!(sol.decay.truncation_warning);
}

#[test]
fn perturbation_must_be_trace_free_and_symmetric() {
    let grid = AzimuthalGrid::new(10.0, 40, 8);
    match solve_correction_term(&[[1.0, 0.0], [0.0, 1.0]], 0.01, 0.5, &grid, 1.0) {
        Err(SolverError::NotTraceFree { trace, .. }) => assert!((trace - 2.0).abs() < 1e-15),
        other => panic!("expected NotTraceFree, got {other:?}"),
    }
    match solve_correction_term(&[[0.0, 1.0], [-1.0, 0.0]], 0.01, 0.5, &grid, 1.0) {
        Err(SolverError::NotTraceFree { asymmetry, .. }) => {
            assert!((asymmetry - 2.0).abs() < 1e-15)
        }
        other => panic!("expected NotTraceFree, got {other:?}"),
    }
}
