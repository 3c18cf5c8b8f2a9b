//! Quadrature rules: closed-form moments on spheres, hemispheres, disks,
//! equators, and half-balls, plus cross-checks against adaptive Simpson.

use std::f64::consts::PI;

use yamabe_lab::quad::{
    adaptive_simpson, disk_rule, equator_rule, gauss_legendre, half_ball_rule, hemisphere_rule,
    line_rule, sphere_rule,
};

fn assert_close(got: f64, want: f64, tol: f64, what: &str) {
    assert!(
        (got - want).abs() <= tol,
        "{what}: got {got}, want {want} (tol {tol}, diff {})",
        (got - want).abs()
    );
}

#[test]
fn gauss_legendre_is_exact_on_polynomials() {
    // k-point Gauss is exact to degree 2k−1: ∫_{−1}^{1} t^{14} dt = 2/15 with k = 8.
    let rule = line_rule(-1.0, 1.0, 8);
    assert_close(rule.integrate(|z| z[0].powi(14)), 2.0 / 15.0, 1e-14, "t^14");
    assert_close(rule.integrate(|z| z[0].powi(15)), 0.0, 1e-15, "odd power");
    let (nodes, weights) = gauss_legendre(8);
    assert_close(weights.iter().sum::<f64>(), 2.0, 1e-14, "weight sum");
    assert!(nodes.windows(2).all(|w| w[0] < w[1]), "ascending nodes");
}

#[test]
fn sphere_moments_dimension_three() {
    let r = 1.7;
    let rule = sphere_rule(3, r, 16);
    let area = rule.integrate(|_| 1.0);
    assert_close(area, 4.0 * PI * r * r, 1e-10, "area of S²");
    assert_close(
        rule.integrate(|z| z[2] * z[2]),
        4.0 * PI / 3.0 * r.powi(4),
        1e-10,
        "∫ z₃²",
    );
    assert_close(
        rule.integrate(|z| z[0] * z[0] * z[1] * z[1]),
        4.0 * PI / 15.0 * r.powi(6),
        1e-9,
        "∫ z₁² z₂²",
    );
    // Odd moments cancel to rounding on the even azimuthal grid.
    assert_close(rule.integrate(|z| z[0].powi(3) * z[1]), 0.0, 1e-10, "odd moment");
    assert_close(rule.integrate(|z| z[0]), 0.0, 1e-11, "first moment");
}

#[test]
fn hemisphere_moments_dimension_three() {
    let r = 2.0;
    let rule = hemisphere_rule(3, r, 16);
    assert_close(rule.integrate(|_| 1.0), 2.0 * PI * r * r, 1e-10, "area of S²₊");
    // ∫_{S²₊} z₃ dσ = π r³.
    assert_close(rule.integrate(|z| z[2]), PI * r.powi(3), 1e-10, "∫ z₃");
    // Tangential odd moments still cancel.
    assert_close(rule.integrate(|z| z[0] * z[2] * z[2]), 0.0, 1e-10, "mixed odd");
    assert!(rule.points.iter().all(|p| p[2] >= -1e-14), "upper hemisphere only");
}

#[test]
fn sphere_and_ball_measures_higher_dimensions() {
    // |S³_r| = 2π²r³, |S⁴_r| = (8π²/3) r⁴;
    // half-ball volumes: (1/2)(π²/2)R⁴ and (1/2)(8π²/15)R⁵.
    let r = 1.3;
    assert_close(
        sphere_rule(4, r, 12).integrate(|_| 1.0),
        2.0 * PI * PI * r.powi(3),
        1e-8,
        "S³ area",
    );
    assert_close(
        sphere_rule(5, r, 12).integrate(|_| 1.0),
        8.0 * PI * PI / 3.0 * r.powi(4),
        1e-8,
        "S⁴ area",
    );
    assert_close(
        half_ball_rule(4, r, 12).integrate(|_| 1.0),
        0.25 * PI * PI * r.powi(4),
        1e-8,
        "half 4-ball volume",
    );
    assert_close(
        half_ball_rule(5, r, 12).integrate(|_| 1.0),
        4.0 * PI * PI / 15.0 * r.powi(5),
        1e-8,
        "half 5-ball volume",
    );
}

#[test]
fn half_ball_moments_dimension_three() {
    let r = 1.5;
    let rule = half_ball_rule(3, r, 16);
    assert_close(rule.integrate(|_| 1.0), 2.0 * PI / 3.0 * r.powi(3), 1e-10, "volume");
    // ∫ z₃ dV over the half ball = π R⁴ / 4.
    assert_close(rule.integrate(|z| z[2]), PI * r.powi(4) / 4.0, 1e-10, "∫ z₃ dV");
    assert!(rule.points.iter().all(|p| p[2] >= -1e-14));
}

#[test]
fn disk_and_equator_measures() {
    let rho = 0.9;
    // n = 3: the boundary disk is a 2-disk, the equator a circle.
    let disk3 = disk_rule(3, rho, 16);
    assert_close(disk3.integrate(|_| 1.0), PI * rho * rho, 1e-11, "disk area");
    assert_close(
        disk3.integrate(|z| z[0] * z[0] + z[1] * z[1]),
        PI * rho.powi(4) / 2.0,
        1e-11,
        "disk second moment",
    );
    assert!(disk3.points.iter().all(|p| p[2] == 0.0));

    let eq3 = equator_rule(3, rho, 16);
    assert_close(eq3.integrate(|_| 1.0), 2.0 * PI * rho, 1e-12, "equator length");
    assert_close(eq3.integrate(|z| z[0] * z[0]), PI * rho.powi(3), 1e-12, "∫ z₁²");

    // n = 4: disk is a 3-ball, equator an S².
    assert_close(
        disk_rule(4, rho, 12).integrate(|_| 1.0),
        4.0 * PI / 3.0 * rho.powi(3),
        1e-9,
        "3-ball volume",
    );
    assert_close(
        equator_rule(4, rho, 12).integrate(|_| 1.0),
        4.0 * PI * rho * rho,
        1e-9,
        "S² equator area",
    );
    // n = 5: disk is a 4-ball, equator an S³.
    assert_close(
        disk_rule(5, rho, 12).integrate(|_| 1.0),
        PI * PI / 2.0 * rho.powi(4),
        1e-9,
        "4-ball volume",
    );
    assert_close(
        equator_rule(5, rho, 12).integrate(|_| 1.0),
        2.0 * PI * PI * rho.powi(3),
        1e-9,
        "S³ equator area",
    );
}

#[test]
fn adaptive_simpson_matches_closed_forms() {
    let v = adaptive_simpson(&|t: f64| t.exp(), 0.0, 1.0, 1e-12);
    assert_close(v, 1.0f64.exp() - 1.0, 1e-10, "∫ e^t");
    let v2 = adaptive_simpson(&|t: f64| 1.0 / (1.0 + t * t), 0.0, 1.0, 1e-12);
    assert_close(v2, PI / 4.0, 1e-10, "∫ 1/(1+t²)");
}

#[test]
fn hemisphere_rule_cross_checks_adaptive_simpson() {
    // Axisymmetric integrand: ∫_{S²₊(r)} f(z₃/r) dσ = 2π r² ∫₀¹ f(t) dt.
    let r = 1.25;
    let f = |t: f64| (1.0 + 3.0 * t).ln();
    let via_rule = hemisphere_rule(3, r, 20).integrate(|z| f(z[2] / r));
    let via_simpson = 2.0 * PI * r * r * adaptive_simpson(&f, 0.0, 1.0, 1e-12);
    assert_close(via_rule, via_simpson, 1e-9, "axisymmetric cross-check");
}

#[test]
fn rules_are_deterministic() {
    let a = hemisphere_rule(4, 1.0, 10);
    let b = hemisphere_rule(4, 1.0, 10);
    assert_eq!(a.len(), b.len());
    for (pa, pb) in a.points.iter().zip(&b.points) {
        assert_eq!(pa, pb);
    }
    let ia = a.integrate(|z| (z[0] + 2.0 * z[3]).cos());
    let ib = b.integrate(|z| (z[0] + 2.0 * z[3]).cos());
    assert!(ia.to_bits() == ib.to_bits(), "bitwise reproducible");
}
