//! Closed-form family: residuals, scaling structure, flattened limit,
//! tangent fields, and far-field decay.

use yamabe_lab::geometry::ScalarField;
use yamabe_lab::models::{
    boundary_coefficient, decay_exponent, flat_boundary_residual, flat_interior_residual,
    flat_laplacian, interior_coefficient, linearized_boundary_residual,
    linearized_interior_residual, Bubble, FamilyDirection, FamilyTangent, FlattenedProfile,
    SumField, TangentialFalloffProfile,
};

fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got}, want {want} (tol {tol}, diff {})",
        (got - want).abs()
    );
}

fn interior_samples(n: usize) -> Vec<Vec<f64>> {
    let mut pts = Vec::new();
    for (a, b) in [(0.3, 0.4), (-1.2, 0.1), (2.0, 1.5), (0.0, 0.05), (-0.4, 2.2)] {
        let mut z = vec![a; n];
        z[n - 1] = b;
        pts.push(z);
    }
    pts
}

fn boundary_samples(n: usize) -> Vec<Vec<f64>> {
    let mut pts = Vec::new();
    for a in [0.0, 0.7, -1.3, 2.4] {
        let mut z = vec![a; n];
        z[n - 1] = 0.0;
        pts.push(z);
    }
    pts
}

#[test]
fn family_profiles_solve_both_equations() {
    for n in 3..=5 {
        for (kappa, eps) in [(0.25, 1.0), (0.5, 0.3), (0.9, 2.0)] {
            let mut center = vec![0.0; n - 1];
            center[0] = -0.4;
            let u = Bubble::new(n, kappa, eps, center);
            for z in interior_samples(n) {
                assert_close(
                    flat_interior_residual(&u, kappa, &z),
                    0.0,
                    1e-9,
                    "interior residual",
                );
            }
            for z in boundary_samples(n) {
                assert_close(flat_boundary_residual(&u, &z), 0.0, 1e-10, "boundary residual");
            }
        }
    }
}

#[test]
fn profile_spot_values_at_origin() {
    // n = 3, κ = 1/4, ε = 1, center 0:
    //   U(0)    = (1 − 1/4)^{−1/2} = 1.1547005383792515…
    //   ∂₃U(0) = −(3/4)^{−3/2}    = −1.5396007178390022…
    let u = Bubble::centered(3, 0.25, 1.0);
    let z = [0.0, 0.0, 0.0];
    assert_close(u.value(&z), 1.154_700_538_379_251_5, 1e-15, "U(0)");
    assert_close(u.gradient(&z)[2], -1.539_600_717_839_002_2, 1e-15, "∂₃U(0)");
    // The two sides of the boundary equation balance: ∂₃U = −(n−2) U³.
    assert_close(
        u.gradient(&z)[2],
        -boundary_coefficient(3) * u.value(&z).powi(3),
        1e-15,
        "boundary balance",
    );
    assert_close(interior_coefficient(3, 0.25), 0.75, 1e-15, "interior coefficient");
}

#[test]
fn shifted_distance_stays_positive_on_chart() {
    let u = Bubble::new(3, 0.999, 5.0, vec![2.0, -3.0]);
    // Minimum over the closed half space is ε²(1−κ) > 0, attained on the boundary
    // at the center.
    let min = u.shifted_distance_sq(&[2.0, -3.0, 0.0]);
    assert_close(min, 25.0 * (1.0 - 0.999), 1e-10, "minimum of D");
    assert!(min > 0.0);
}

#[test]
fn width_normalized_profile_is_uniformly_tame() {
    // Ũ_κ(y) = (1 + 2 y_n + (1−κ)|y|²)^{−m}: value 1 at the origin for all κ,
    // derivatives O(1) uniformly as κ → 1.
    for n in 3..=5 {
        for kappa in [0.1, 0.5, 0.9, 0.99, 0.999] {
            let u = Bubble::width_normalized(n, kappa);
            let z0 = vec![0.0; n];
            assert_close(u.value(&z0), 1.0, 1e-12, "normalized value at 0");
            let mut z = vec![0.5; n];
            z[n - 1] = 0.2;
            assert!(u.value(&z) < 1.5, "bounded value");
            assert!(u.gradient(&z).amax() < 5.0, "bounded gradient");
            assert!(u.hessian(&z).abs().max() < 20.0, "bounded hessian");
        }
    }
}

#[test]
fn width_normalized_profile_flattens_as_kappa_tends_to_one() {
    // |Ũ_κ − (1+2y_n)^{−m}| ≤ m (1−κ) |y|² pointwise (mean value bound on
    // s ↦ (1+2y_n+s)^{−m}), so the sup over |y| ≤ 2 is at most 4m(1−κ).
    for n in 3..=5 {
        let m = (n as f64 - 2.0) / 2.0;
        let flat = FlattenedProfile::new(n, 1.0);
        for kappa in [0.99, 0.999] {
            let u = Bubble::width_normalized(n, kappa);
            let mut sup: f64 = 0.0;
            for z in interior_samples(n).iter().chain(boundary_samples(n).iter()) {
                let r2: f64 = z.iter().map(|v| v * v).sum();
                if r2 <= 4.0 {
                    sup = sup.max((u.value(z) - flat.value(z)).abs());
                }
            }
            assert!(
                sup <= 4.0 * m * (1.0 - kappa) + 1e-12,
                "flattening bound violated: sup {sup} at κ={kappa}"
            );
        }
    }
}

#[test]
fn flattened_profile_solves_the_unit_parameter_system() {
    for n in 3..=5 {
        let w = FlattenedProfile::new(n, 0.7);
        for z in interior_samples(n) {
            assert_close(flat_interior_residual(&w, 1.0, &z), 0.0, 1e-11, "interior κ=1");
        }
        for z in boundary_samples(n) {
            assert_close(flat_boundary_residual(&w, &z), 0.0, 1e-12, "boundary κ=1");
        }
    }
}

#[test]
fn tangential_variant_fails_only_the_boundary_equation() {
    // Same profile laid along y₁: interior equation still holds on {y₁ > 0},
    // but the normal derivative vanishes so the boundary defect equals the
    // full nonlinear term.
    let w = TangentialFalloffProfile::new(3, 1.0);
    for z in [[1.0, 0.5, 0.4], [0.3, -1.0, 1.2], [2.0, 0.0, 0.1]] {
        assert_close(flat_interior_residual(&w, 1.0, &z), 0.0, 1e-12, "interior still fine");
    }
    let zb = [1.0, 0.5, 0.0];
    let defect = flat_boundary_residual(&w, &zb);
    assert_close(defect, w.value(&zb).powi(3), 1e-14, "defect is the nonlinear term");
    assert!(defect > 0.1, "defect bounded away from zero: {defect}");
}

#[test]
fn tangent_fields_lie_in_the_linearized_kernel() {
    for n in 3..=5 {
        let mut center = vec![0.0; n - 1];
        center[0] = 0.3;
        let base = Bubble::new(n, 0.4, 0.9, center);
        let kappa = base.kappa();
        let mut dirs = vec![FamilyDirection::Dilation];
        for j in 0..n - 1 {
            dirs.push(FamilyDirection::Translation(j));
        }
        for dir in dirs {
            let tangent = FamilyTangent::new(base.clone(), dir);
            for z in interior_samples(n) {
                assert_close(
                    linearized_interior_residual(&base, kappa, &tangent, &z),
                    0.0,
                    1e-8,
                    "linearized interior on tangent",
                );
            }
            for z in boundary_samples(n) {
                assert_close(
                    linearized_boundary_residual(&base, &tangent, &z),
                    0.0,
                    1e-9,
                    "linearized boundary on tangent",
                );
            }
        }
    }
}

#[test]
fn dilation_tangent_matches_width_derivative() {
    // The dilation tangent equals −ε ∂U/∂ε (derivative through the family).
    let n = 3;
    let eps = 0.8;
    let base = Bubble::new(n, 0.35, eps, vec![0.5, -0.2]);
    let tangent = FamilyTangent::new(base.clone(), FamilyDirection::Dilation);
    let h = 1e-6;
    for z in interior_samples(n) {
        let up = Bubble::new(n, 0.35, eps + h, vec![0.5, -0.2]).value(&z);
        let um = Bubble::new(n, 0.35, eps - h, vec![0.5, -0.2]).value(&z);
        let fd = -(eps) * (up - um) / (2.0 * h);
        assert_close(tangent.value(&z), fd, 1e-7, "dilation vs ε-derivative");
    }
}

#[test]
fn translation_tangent_matches_center_derivative() {
    let n = 4;
    let base = Bubble::new(n, 0.6, 1.2, vec![0.0, 0.4, -0.1]);
    let tangent = FamilyTangent::new(base.clone(), FamilyDirection::Translation(1));
    let h = 1e-6;
    for z in interior_samples(n) {
        let up = Bubble::new(n, 0.6, 1.2, vec![0.0, 0.4 - h, -0.1]).value(&z);
        let um = Bubble::new(n, 0.6, 1.2, vec![0.0, 0.4 + h, -0.1]).value(&z);
        // Moving the center by −δ shifts the profile by +δ in y.
        let fd = (up - um) / (2.0 * h);
        assert_close(tangent.value(&z), fd, 1e-7, "translation vs center derivative");
    }
}

#[test]
fn far_field_decay_exponents() {
    // U ~ r^{−(n−2)}; translation tangents ~ r^{−(n−1)};
    // the dilation tangent keeps the slow r^{−(n−2)} tail.
    let radii: Vec<f64> = vec![50.0, 100.0, 200.0, 400.0];
    for n in 3..=5 {
        let base = Bubble::centered(n, 0.3, 1.0);
        let mut dir = vec![0.0; n];
        dir[0] = 0.8;
        dir[n - 1] = 0.6;
        let q_u = decay_exponent(&base, &dir, &radii);
        assert_close(q_u, (n - 2) as f64, 0.05, "profile decay");
        let tr = FamilyTangent::new(base.clone(), FamilyDirection::Translation(0));
        let q_tr = decay_exponent(&tr, &dir, &radii);
        assert_close(q_tr, (n - 1) as f64, 0.05, "translation decay");
        let dil = FamilyTangent::new(base.clone(), FamilyDirection::Dilation);
        let q_dil = decay_exponent(&dil, &dir, &radii);
        assert_close(q_dil, (n - 2) as f64, 0.05, "dilation decay");
    }
}

#[test]
fn dilation_tangent_far_field_coefficient_in_three_dimensions() {
    // For n = 3 the dilation tangent behaves like −ε^{1/2}/(2r) + O(r^{−2})
    // along rays: the slow tail that rules out plain square-integrability.
    let base = Bubble::centered(3, 0.3, 1.0);
    let dil = FamilyTangent::new(base, FamilyDirection::Dilation);
    let dir = [0.6, 0.0, 0.8];
    for r in [200.0, 400.0, 800.0] {
        let z: Vec<f64> = dir.iter().map(|d| d * r).collect();
        assert_close(dil.value(&z) * r, -0.5, 2.5 / r, "tail coefficient");
    }
}

#[test]
fn sum_field_adds_values_and_derivatives() {
    let a = Bubble::centered(3, 0.3, 1.0);
    let b = Bubble::new(3, 0.3, 0.5, vec![2.0, 0.0]);
    let s = SumField::new(vec![&a, &b]);
    let z = [0.4, -0.2, 0.7];
    assert_close(s.value(&z), a.value(&z) + b.value(&z), 1e-14, "sum value");
    assert_close(
        flat_laplacian(&s, &z),
        flat_laplacian(&a, &z) + flat_laplacian(&b, &z),
        1e-12,
        "sum laplacian",
    );
}
