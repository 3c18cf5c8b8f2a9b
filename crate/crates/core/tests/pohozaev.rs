//! Surface flux functionals on half-ball charts: exact cancellation for the
//! flat solution family, identity audits against the metric-defect integrals,
//! mass and pole-flux readings of asymptotically flat charts, the defect-rate
//! fit, the sign experiment, and the error paths.

use nalgebra::{DMatrix, DVector};
use std::f64::consts::PI;
use yamabe_lab::geometry::{
    conformal_boundary_operator, conformal_change, conformal_laplacian, EuclideanMetric,
    FermiSyntheticMetric, FnField, MetricField, ScalarField,
};
use yamabe_lab::models::{boundary_coefficient, interior_coefficient, Bubble};
use yamabe_lab::pohozaev::{
    adm_mass, attach_flux_ladder, brendle_chen_I, check_P_I_relation, check_pohozaev_identity,
    pohozaev_P, pohozaev_rhs, sign_restriction_experiment, HalfBallQuadrature, PohozaevError,
    SignInput, SignSequence, DEFECT_FLOOR, LIMINF_TOLERANCE,
};
use yamabe_lab::quad::{adaptive_simpson, hemisphere_rule, sphere_rule};
use yamabe_lab::report::Verdict;

/// `1/|z| + a0 + blog · ln(1/|z|)` on a three-dimensional chart, with
/// analytic derivatives. The pole profile used by the flux and defect-rate
/// tests; `blog = 0` gives the pure expansion profile.
struct PoleField {
    a0: f64,
    blog: f64,
}

impl ScalarField for PoleField {
    fn dim(&self) -> usize {
        3
    }
    fn value(&self, z: &[f64]) -> f64 {
        let r = (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt();
        1.0 / r + self.a0 + self.blog * (1.0 / r).ln()
    }
    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
        let r = r2.sqrt();
        let c = -1.0 / (r2 * r) - self.blog / r2;
        DVector::from_iterator(3, z.iter().map(|zi| c * zi))
    }
    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
        let r = r2.sqrt();
        DMatrix::from_fn(3, 3, |a, b| {
            let delta = if a == b { 1.0 } else { 0.0 };
            3.0 * z[a] * z[b] / (r2 * r2 * r) - delta / (r2 * r)
                + self.blog * (2.0 * z[a] * z[b] / (r2 * r2) - delta / r2)
        })
    }
}

/// `s · ε^{1/2} / |z + ε e_3|`: the boundary-only member of the flat
/// solution family (zero interior constant) when `s = 1`. Harmonic in the
/// upper half-space with `∂_3 u + u³ = 0` on the face, analytically.
struct ShiftedPole {
    eps: f64,
    s: f64,
}

impl ScalarField for ShiftedPole {
    fn dim(&self) -> usize {
        3
    }
    fn value(&self, z: &[f64]) -> f64 {
        let w = [z[0], z[1], z[2] + self.eps];
        self.s * self.eps.sqrt() / (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt()
    }
    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        let w = [z[0], z[1], z[2] + self.eps];
        let r2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
        let r = r2.sqrt();
        let c = self.s * self.eps.sqrt();
        DVector::from_iterator(3, w.iter().map(|wi| -c * wi / (r2 * r)))
    }
    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let w = [z[0], z[1], z[2] + self.eps];
        let r2 = w[0] * w[0] + w[1] * w[1] + w[2] * w[2];
        let r = r2.sqrt();
        let c = self.s * self.eps.sqrt();
        DMatrix::from_fn(3, 3, |a, b| {
            let delta = if a == b { 1.0 } else { 0.0 };
            c * (3.0 * w[a] * w[b] / (r2 * r2 * r) - delta / (r2 * r))
        })
    }
}

/// `φ = 1 + a(z₁² − z₂²) + b z₃`: a harmonic conformal factor whose face
/// normal derivative is constant, with analytic derivatives.
struct QuadFactor {
    a: f64,
    b: f64,
}

impl QuadFactor {
    fn phi(&self, z: &[f64]) -> f64 {
        1.0 + self.a * (z[0] * z[0] - z[1] * z[1]) + self.b * z[2]
    }
    fn dphi(&self, z: &[f64]) -> [f64; 3] {
        [2.0 * self.a * z[0], -2.0 * self.a * z[1], self.b]
    }
    fn d2phi(&self) -> [[f64; 3]; 3] {
        let mut h = [[0.0; 3]; 3];
        h[0][0] = 2.0 * self.a;
        h[1][1] = -2.0 * self.a;
        h
    }
}

impl ScalarField for QuadFactor {
    fn dim(&self) -> usize {
        3
    }
    fn value(&self, z: &[f64]) -> f64 {
        self.phi(z)
    }
    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(&self.dphi(z))
    }
    fn hessian(&self, _z: &[f64]) -> DMatrix<f64> {
        let d2 = self.d2phi();
        DMatrix::from_fn(3, 3, |a, b| d2[a][b])
    }
}

/// `u = U/φ`: under the conformal change `ĝ = φ⁴ δ` (three dimensions) this
/// solves the curved system with the same reaction constants as `U` does on
/// the flat chart, by conformal covariance of both operators.
struct ConformalSolution {
    bubble: Bubble,
    factor: QuadFactor,
}

impl ScalarField for ConformalSolution {
    fn dim(&self) -> usize {
        3
    }
    fn value(&self, z: &[f64]) -> f64 {
        self.bubble.value(z) / self.factor.phi(z)
    }
    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        let u = self.bubble.value(z);
        let du = self.bubble.gradient(z);
        let p = self.factor.phi(z);
        let dp = self.factor.dphi(z);
        DVector::from_fn(3, |a, _| du[a] / p - u * dp[a] / (p * p))
    }
    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let u = self.bubble.value(z);
        let du = self.bubble.gradient(z);
        let hu = self.bubble.hessian(z);
        let p = self.factor.phi(z);
        let dp = self.factor.dphi(z);
        let hp = self.factor.d2phi();
        DMatrix::from_fn(3, 3, |a, b| {
            hu[(a, b)] / p - (du[a] * dp[b] + du[b] * dp[a]) / (p * p) - u * hp[a][b] / (p * p)
                + 2.0 * u * dp[a] * dp[b] / (p * p * p)
        })
    }
}

/// `ξ = 1 + A/|y|`: the conformal factor of the half-Schwarzschild chart.
struct SchwarzFactor {
    a: f64,
}

impl ScalarField for SchwarzFactor {
    fn dim(&self) -> usize {
        3
    }
    fn value(&self, z: &[f64]) -> f64 {
        1.0 + self.a / (z[0] * z[0] + z[1] * z[1] + z[2] * z[2]).sqrt()
    }
    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
        let r = r2.sqrt();
        DVector::from_iterator(3, z.iter().map(|zi| -self.a * zi / (r2 * r)))
    }
    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
        let r = r2.sqrt();
        DMatrix::from_fn(3, 3, |a, b| {
            let delta = if a == b { 1.0 } else { 0.0 };
            self.a * (3.0 * z[a] * z[b] / (r2 * r2 * r) - delta / (r2 * r))
        })
    }
}

/// Identity metric plus a synthetic off-diagonal tail `g_{3j}`, either
/// `c_j/|y|²` (literal) or `c_j y_j/|y|³` (radial).
struct OffDiagTail {
    c: [f64; 2],
    radial: bool,
}

impl MetricField for OffDiagTail {
    fn dim(&self) -> usize {
        3
    }
    fn value(&self, z: &[f64]) -> DMatrix<f64> {
        let r2 = z[0] * z[0] + z[1] * z[1] + z[2] * z[2];
        let mut g = DMatrix::identity(3, 3);
        for j in 0..2 {
            let v = if self.radial {
                self.c[j] * z[j] / (r2 * r2.sqrt())
            } else {
                self.c[j] / r2
            };
            g[(2, j)] = v;
            g[(j, 2)] = v;
        }
        g
    }
}

fn bubble_sequence(kappa: f64, eps: &[f64]) -> Vec<Bubble> {
    eps.iter()
        .map(|&e| Bubble::new(3, kappa, e, vec![0.0, 0.0]))
        .collect()
}

/// Independent spherical-coordinate reading of the pure surface functional
/// at radius `rho`, by nested adaptive quadrature.
fn adaptive_surface_functional(u: &dyn ScalarField, rho: f64) -> f64 {
    let integrand = |theta: f64, phi: f64| {
        let z = [
            rho * theta.sin() * phi.cos(),
            rho * theta.sin() * phi.sin(),
            rho * theta.cos(),
        ];
        let val = u.value(&z);
        let grad = u.gradient(&z);
        let u_r = (grad[0] * z[0] + grad[1] * z[1] + grad[2] * z[2]) / rho;
        let gsq = grad[0] * grad[0] + grad[1] * grad[1] + grad[2] * grad[2];
        (0.5 * val * u_r - 0.5 * rho * gsq + rho * u_r * u_r) * rho * rho * theta.sin()
    };
    let outer = |theta: f64| {
        let f = |phi: f64| integrand(theta, phi);
        adaptive_simpson(&f, 0.0, 2.0 * PI, 1e-13)
    };
    adaptive_simpson(&outer, 0.0, PI / 2.0, 1e-12)
}

/// Independent radial-shell reading of the two defect integrals: adaptive
/// quadrature in the radius against fixed high-order angular rules.
fn adaptive_defect_integrals(
    g: &dyn MetricField,
    u: &dyn ScalarField,
    rho: f64,
) -> (f64, f64) {
    let vol_shell = |r: f64| -> f64 {
        if r < 1e-12 {
            return 0.0;
        }
        let hemi = hemisphere_rule(3, r, 24);
        let mut acc = 0.0;
        for (z, w) in hemi.points.iter().zip(&hemi.weights) {
            let grad = u.gradient(z);
            let mult = 0.5 * u.value(z) + z[0] * grad[0] + z[1] * grad[1] + z[2] * grad[2];
            let defect = conformal_laplacian(g, u, z) - u.hessian(z).trace();
            acc += w * mult * defect;
        }
        acc
    };
    let face_shell = |r: f64| -> f64 {
        if r < 1e-12 {
            return 0.0;
        }
        let circ = sphere_rule(2, r, 24);
        let mut acc = 0.0;
        for (zz, w) in circ.points.iter().zip(&circ.weights) {
            let z = [zz[0], zz[1], 0.0];
            let grad = u.gradient(&z);
            let mult = 0.5 * u.value(&z) + z[0] * grad[0] + z[1] * grad[1];
            let defect = conformal_boundary_operator(g, u, &z) - grad[2];
            acc += w * mult * defect;
        }
        acc
    };
    (
        -adaptive_simpson(&vol_shell, 0.0, rho, 1e-11),
        -adaptive_simpson(&face_shell, 0.0, rho, 1e-11),
    )
}

#[test]
fn surface_functional_vanishes_for_a_constant_field() {
    let cfield = FnField::new(3, |_z: &[f64]| 1.3);
    let rule = HalfBallQuadrature::product_gauss(3, 0.5, 12);
    let rep = pohozaev_P(&cfield, 0.5, 0.0, 0.0, &rule).unwrap();
    assert_eq!(rep.p, 0.0);
    assert_eq!(rep.p_prime, 0.0);
    assert_eq!(rep.k_term, 0.0);
    assert_eq!(rep.c_term, 0.0);
}

#[test]
fn boundary_pole_profile_matches_an_adaptive_spherical_oracle() {
    let sp = ShiftedPole { eps: 1.0, s: 1.0 };
    // Closed forms at unit width: -2π/25 at ρ = 1/2 and -π/8 at ρ = 1.
    for (rho, exact) in [(0.5, -2.0 * PI / 25.0), (1.0, -PI / 8.0)] {
        let rule = HalfBallQuadrature::product_gauss(3, rho, 16);
        let rep = pohozaev_P(&sp, rho, 0.0, 0.0, &rule).unwrap();
        let oracle = adaptive_surface_functional(&sp, rho);
        assert!(
            (rep.p_prime - oracle).abs() < 1e-8,
            "rho {rho}: rule {:.15e} vs oracle {:.15e}",
            rep.p_prime,
            oracle
        );
        assert!(
            (rep.p_prime - exact).abs() < 1e-13,
            "rho {rho}: {:.15e} vs closed form {:.15e}",
            rep.p_prime,
            exact
        );
        assert!(!rep.quad_warning);
        assert!(rep.quad_error < 1e-13);
    }
}

#[test]
fn exact_bubbles_balance_the_surface_functional_at_every_radius() {
    for (n, kappa, eps, tol) in [
        (3usize, 0.5, 0.6, 1e-12),
        (3, 0.1, 1.1, 1e-12),
        (4, 0.3, 0.8, 1e-12),
        (5, 0.7, 0.9, 1e-9),
    ] {
        let u = Bubble::new(n, kappa, eps, vec![0.0; n - 1]);
        let k_const = -interior_coefficient(n, kappa);
        let c_const = boundary_coefficient(n);
        for rho in [0.5, 1.0, 2.0] {
            let rule = HalfBallQuadrature::product_gauss(n, rho, 16);
            let rep = pohozaev_P(&u, rho, k_const, c_const, &rule).unwrap();
            assert!(
                rep.p.abs() < tol,
                "n {n} kappa {kappa} rho {rho}: P = {:.3e}",
                rep.p
            );
            // The cancellation is between sizable parts, not a zero field.
            assert!(rep.p_prime.abs() > 0.1);
            assert!(rep.k_term.abs() > 1e-3);
            assert!(rep.c_term.abs() > 0.1);
            // Bookkeeping: the total is exactly the sum of its parts.
            assert_eq!(rep.p, rep.p_prime + rep.k_term + rep.c_term);
        }
    }
}

#[test]
fn flat_chart_defect_integrals_vanish_identically() {
    let g0 = EuclideanMetric::new(3);
    let u = Bubble::new(3, 0.5, 0.6, vec![0.0, 0.0]);
    let rule = HalfBallQuadrature::product_gauss(3, 0.5, 12);
    let rhs = pohozaev_rhs(&g0, &u, 0.5, &rule).unwrap();
    assert_eq!(rhs.value, 0.0);
    assert_eq!(rhs.volume_part, 0.0);
    assert_eq!(rhs.face_part, 0.0);
    assert!(!rhs.quad_warning);

    // The zero field contributes nothing to either side.
    let zero = FnField::new(3, |_z: &[f64]| 0.0);
    let rep = pohozaev_P(&zero, 0.5, -interior_coefficient(3, 0.5), 1.0, &rule).unwrap();
    assert_eq!(rep.p, 0.0);
    let rhs0 = pohozaev_rhs(&g0, &zero, 0.5, &rule).unwrap();
    assert_eq!(rhs0.value, 0.0);
}

#[test]
fn traceless_perturbation_defect_matches_an_independent_radial_split() {
    let pi = DMatrix::from_row_slice(2, 2, &[0.2, 0.0, 0.0, -0.2]);
    let gf = FermiSyntheticMetric::new(3, pi);
    let u = Bubble::new(3, 0.5, 0.6, vec![0.0, 0.0]);
    let rho = 0.5;
    let rule = HalfBallQuadrature::product_gauss(3, rho, 16);
    let rhs = pohozaev_rhs(&gf, &u, rho, &rule).unwrap();

    assert!(
        (rhs.value - 3.106755721184e-4).abs() < 1e-14,
        "value {:.15e}",
        rhs.value
    );
    // A traceless tangential perturbation leaves the face mean curvature
    // untouched, so the face integral is exactly zero.
    assert_eq!(rhs.face_part, 0.0);
    assert!(!rhs.quad_warning);
    assert!(rhs.quad_error < 1e-12);

    let (vol_oracle, face_oracle) = adaptive_defect_integrals(&gf, &u, rho);
    assert!(
        (rhs.value - vol_oracle - face_oracle).abs() < 1e-6,
        "independent split disagrees: {:.3e}",
        (rhs.value - vol_oracle - face_oracle).abs()
    );
    assert!((rhs.volume_part - vol_oracle).abs() < 1e-10);
    assert!(face_oracle.abs() < 1e-12);
}

#[test]
fn trace_bearing_perturbation_drives_the_face_integral() {
    let pi = DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 0.1]);
    let gf = FermiSyntheticMetric::new(3, pi);
    let u = Bubble::new(3, 0.5, 0.6, vec![0.0, 0.0]);
    let rule = HalfBallQuadrature::product_gauss(3, 0.5, 16);
    let rhs = pohozaev_rhs(&gf, &u, 0.5, &rule).unwrap();

    assert!((rhs.value - 9.274488394032e-3).abs() < 1e-12);
    assert!((rhs.volume_part - -1.824231386844e-2).abs() < 1e-12);
    assert!((rhs.face_part - 2.751680226248e-2).abs() < 1e-12);
    assert!(rhs.face_part.abs() > 1e-2, "trace must activate the face term");
    assert!(!rhs.quad_warning);
}

#[test]
fn conformal_factor_transplants_an_exact_solution_pair() {
    let g0 = EuclideanMetric::new(3);
    let factor = QuadFactor { a: 0.1, b: 0.1 };
    let sol = ConformalSolution {
        bubble: Bubble::new(3, 0.4, 0.8, vec![0.0, 0.0]),
        factor: QuadFactor { a: 0.1, b: 0.1 },
    };
    let ghat = conformal_change(&g0, &factor);
    let k_const = -interior_coefficient(3, 0.4);
    let c_const = boundary_coefficient(3);

    let mut worst_int = 0.0f64;
    for z in [
        [0.3, -0.2, 0.4],
        [0.1, 0.5, 0.2],
        [-0.4, 0.1, 0.7],
        [0.8, -0.6, 1.1],
    ] {
        let lhs = conformal_laplacian(&ghat, &sol, &z);
        let res = (lhs + k_const * sol.value(&z).powf(5.0)).abs() / lhs.abs().max(1e-12);
        worst_int = worst_int.max(res);
    }
    assert!(worst_int < 1e-12, "interior residual {worst_int:.3e}");

    let mut worst_bd = 0.0f64;
    for zb in [[0.3, -0.2, 0.0], [-0.5, 0.6, 0.0], [1.0, 0.3, 0.0]] {
        let lhs = conformal_boundary_operator(&ghat, &sol, &zb);
        let res = (lhs + c_const * sol.value(&zb).powf(3.0)).abs() / lhs.abs().max(1e-12);
        worst_bd = worst_bd.max(res);
    }
    assert!(worst_bd < 1e-12, "boundary residual {worst_bd:.3e}");
}

#[test]
fn identity_audit_balances_surface_and_defect_readings() {
    let g0 = EuclideanMetric::new(3);
    let factor = QuadFactor { a: 0.1, b: 0.1 };
    let sol = ConformalSolution {
        bubble: Bubble::new(3, 0.4, 0.8, vec![0.0, 0.0]),
        factor: QuadFactor { a: 0.1, b: 0.1 },
    };
    let ghat = conformal_change(&g0, &factor);
    let k_const = -interior_coefficient(3, 0.4);
    let c_const = boundary_coefficient(3);

    for (rho, p_pin, defect_tol) in [
        (0.5, -1.942040131e-2, 1e-12),
        (1.0, -2.298254273e-2, 1e-12),
        (2.0, -7.898077101e-2, 1e-7),
    ] {
        let audit = check_pohozaev_identity(&ghat, &sol, k_const, c_const, rho).unwrap();
        assert!(audit.binding, "rho {rho}: audit must bind");
        assert!(audit.warning.is_none());
        let defect = audit.report.defect.unwrap();
        assert!(defect < defect_tol, "rho {rho}: defect {defect:.3e}");
        assert!(defect < 1e-6, "rho {rho}: defect above the identity budget");
        assert!(
            (audit.report.p - p_pin).abs() < 1e-10,
            "rho {rho}: P = {:.12e}",
            audit.report.p
        );
        // Both sides are genuinely nonzero on the curved chart.
        assert!(audit.report.rhs.unwrap().abs() > 1e-2);
        assert!(audit.interior_residual < 1e-12);
        assert!(audit.boundary_residual < 1e-12);
    }

    // At ρ = 2 the fixed-order rule visibly coarsens and must say so.
    let wide = check_pohozaev_identity(&ghat, &sol, k_const, c_const, 2.0).unwrap();
    assert!(wide.report.quad_warning);
    let tight = check_pohozaev_identity(&ghat, &sol, k_const, c_const, 0.5).unwrap();
    assert!(!tight.report.quad_warning);
    assert!(tight.report.quad_error < wide.report.quad_error);
}

#[test]
fn identity_audit_binds_for_flat_solution_families() {
    let g0 = EuclideanMetric::new(3);
    let c_const = boundary_coefficient(3);

    let u = Bubble::new(3, 0.5, 0.6, vec![0.0, 0.0]);
    let k_const = -interior_coefficient(3, 0.5);
    for rho in [0.5, 1.0, 2.0] {
        let audit = check_pohozaev_identity(&g0, &u, k_const, c_const, rho).unwrap();
        assert!(audit.binding);
        assert!(audit.report.defect.unwrap() < 1e-12);
        assert!(audit.interior_residual < 1e-12);
        assert!(audit.boundary_residual < 1e-12);
    }

    // The boundary-only member is harmonic with zero reaction constant: the
    // residual normalization must not mistake 0 = 0 for a bad fit.
    let u0 = ShiftedPole { eps: 0.9, s: 1.0 };
    for rho in [0.5, 1.0, 2.0] {
        let audit = check_pohozaev_identity(&g0, &u0, 0.0, c_const, rho).unwrap();
        assert!(audit.binding, "rho {rho}: zero-reaction audit must bind");
        assert!(audit.report.defect.unwrap() < 1e-12);
        assert!(audit.interior_residual < 1e-12);
        assert!(audit.boundary_residual < 1e-12);
    }
}

#[test]
fn identity_audit_reports_non_binding_for_a_perturbed_field() {
    let g0 = EuclideanMetric::new(3);
    let pert = FnField::new(3, |z: &[f64]| {
        let u = Bubble::new(3, 0.5, 0.6, vec![0.0, 0.0]);
        u.value(z) * (1.0 + 0.1 * z[0].sin())
    });
    let audit = check_pohozaev_identity(
        &g0,
        &pert,
        -interior_coefficient(3, 0.5),
        boundary_coefficient(3),
        0.5,
    )
    .unwrap();
    assert!(!audit.binding);
    assert!(audit.interior_residual > 1e-3);
    assert!(audit.boundary_residual > 1e-3);
    let warning = audit.warning.expect("a non-binding audit must warn");
    assert!(warning.contains("not binding"), "warning: {warning}");
    // The defect is still reported, for information.
    assert!(audit.report.defect.is_some());
}

#[test]
fn mass_of_the_flat_chart_is_exactly_zero() {
    let g0 = EuclideanMetric::new(3);
    let rep = adm_mass(&g0, &[10.0, 20.0, 40.0, 80.0], 16).unwrap();
    assert_eq!(rep.mass, 0.0);
    assert_eq!(rep.error_bar, 0.0);
    assert!(rep.partial_masses.iter().all(|&p| p == 0.0));
    assert!(rep.decay_verified);
    assert!(rep.decay_order.is_none(), "exactly flat charts skip the rate fit");
}

#[test]
fn half_schwarzschild_mass_is_positive_and_matches_the_pole_flux() {
    let g0 = EuclideanMetric::new(3);
    let a = 0.25;
    let xi = SchwarzFactor { a };
    let ghat = conformal_change(&g0, &xi);
    let mut rep = adm_mass(&ghat, &[10.0, 20.0, 40.0, 80.0], 16).unwrap();

    // Closed form at finite radius: 16πA (1 + A/R)³.
    for (r, p) in rep.radii.iter().zip(&rep.partial_masses) {
        let pred = 16.0 * PI * a * (1.0 + a / r).powi(3);
        assert!((p - pred).abs() < 1e-11, "R {r}: partial {:.12e} vs {:.12e}", p, pred);
    }

    let exact = 16.0 * PI * a;
    assert!(rep.mass > 0.0);
    assert!(
        (rep.mass - exact).abs() / exact < 5e-4,
        "extrapolated mass {:.9e} vs {:.9e}",
        rep.mass,
        exact
    );
    assert!(rep.error_bar < 5e-3);
    let q = rep.decay_order.expect("the deviation decays at a measurable rate");
    assert!((q - 1.0345223573354057).abs() < 1e-6, "decay rate {q:.9}");
    assert!(rep.decay_verified);

    // The pole-flux ladder of the matching expansion profile must meet the
    // extrapolated mass well within one percent.
    let profile = PoleField { a0: a, blog: 0.0 };
    let pi0 = DMatrix::zeros(2, 2);
    let rhos = [0.2, 0.1, 0.05];
    let values: Vec<f64> = rhos
        .iter()
        .map(|&rho| brendle_chen_I(&profile, &pi0, rho, 16).unwrap().value)
        .collect();
    attach_flux_ladder(&mut rep, &rhos, &values);
    let flux_limit = rep.flux_limit.unwrap();
    assert!((flux_limit - exact).abs() < 1e-10);
    assert!(
        (rep.mass - flux_limit).abs() / flux_limit.abs() < 0.01,
        "mass {:.6e} vs flux limit {:.6e}",
        rep.mass,
        flux_limit
    );
}

#[test]
fn off_diagonal_tails_feed_the_edge_correction() {
    let radii = [10.0, 20.0, 40.0, 80.0];

    // g_{3j} = c_j/|y|² is odd along the equator circle: the hand-computed
    // edge integral is zero.
    let literal = OffDiagTail {
        c: [0.7, -0.3],
        radial: false,
    };
    let rep = adm_mass(&literal, &radii, 16).unwrap();
    for e in &rep.edge_parts {
        assert!(e.abs() < 1e-15, "edge {e:.3e}");
    }

    // g_{3j} = c_j y_j/|y|³ pairs with y_j/R: with ∮ y_j² dl = πR³ the
    // hand-computed edge integral is π(c₁+c₂)/R.
    let radial = OffDiagTail {
        c: [0.7, -0.3],
        radial: true,
    };
    let rep = adm_mass(&radial, &radii, 16).unwrap();
    for (r, e) in rep.radii.iter().zip(&rep.edge_parts) {
        let pred = PI * (0.7 - 0.3) / r;
        assert!((e - pred).abs() < 1e-15, "R {r}: edge {e:.12e} vs {pred:.12e}");
    }
}

#[test]
fn pole_flux_reads_sixteen_pi_times_the_expansion_constant() {
    let pi0 = DMatrix::zeros(2, 2);
    for a0 in [0.4f64, -0.25] {
        let g = PoleField { a0, blog: 0.0 };
        let exact = 16.0 * PI * a0;
        let mut values = Vec::new();
        for rho in [0.05, 0.2, 0.8] {
            let flux = brendle_chen_I(&g, &pi0, rho, 16).unwrap();
            assert!(
                (flux.value - exact).abs() / exact.abs() < 1e-12,
                "a0 {a0} rho {rho}: {:.12e} vs {exact:.12e}",
                flux.value
            );
            assert!(!flux.quad_warning);
            values.push(flux.value);
        }
        // The reading is radius-independent for the pure expansion profile.
        let spread = values.iter().fold(0.0f64, |m, v| m.max((v - values[0]).abs()));
        assert!(spread < 1e-12 * exact.abs());
    }

    // A traceless second-fundamental term integrates to zero by azimuthal
    // cancellation.
    let pure = PoleField { a0: 0.0, blog: 0.0 };
    let pi_d = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
    let flux = brendle_chen_I(&pure, &pi_d, 0.3, 16).unwrap();
    assert!(flux.value.abs() < 1e-12, "flux {:.3e}", flux.value);
    assert!(flux.second_fundamental_term.abs() < 1e-12);
}

#[test]
fn defect_rate_follows_the_modeled_log_envelope() {
    // Seven-point geometric ladder over [1e-3, 1e-1].
    let rhos: Vec<f64> = (0..7)
        .map(|k| 0.1 * 100.0f64.powf(-(k as f64) / 6.0))
        .collect();
    let b = 0.3;
    let g = PoleField { a0: 0.0, blog: b };
    let pi0 = DMatrix::zeros(2, 2);
    let rep = check_P_I_relation(&g, &pi0, &rhos, 16).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass);

    let get = |name: &str| {
        rep.computed
            .iter()
            .find(|v| v.name == name)
            .unwrap_or_else(|| panic!("missing {name}"))
            .value
    };
    assert!((get("fit_r2") - 0.9972596918).abs() < 1e-8);
    assert!(get("fit_r2") > 0.99);
    assert!((get("envelope_constant") - 2.418120493e-1).abs() < 1e-9);
    assert!((get("fit_log_slope") - 8.948830319e-1).abs() < 1e-8);
    assert!((get("fit_constant") - 1.516444366e-1).abs() < 1e-8);

    // For this profile the defect has the closed form πB²ρ(1 + ln ρ).
    let ladder = rep.ladder.as_ref().unwrap();
    assert_eq!(ladder.columns, ["rho", "p_prime", "flux_i", "defect"]);
    for row in &ladder.rows {
        let model = PI * b * b * row[0] * (1.0 + row[0].ln());
        assert!(
            (row[3] - model).abs() < 1e-8,
            "rho {:.4e}: defect {:.9e} vs model {:.9e}",
            row[0],
            row[3],
            model
        );
    }
}

#[test]
fn defect_ladder_at_the_quadrature_floor_passes_with_a_note() {
    let rhos: Vec<f64> = (0..7)
        .map(|k| 0.1 * 100.0f64.powf(-(k as f64) / 6.0))
        .collect();
    let g = PoleField { a0: 0.4, blog: 0.0 };
    let pi0 = DMatrix::zeros(2, 2);
    let rep = check_P_I_relation(&g, &pi0, &rhos, 16).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass);
    assert!(rep.note.as_ref().unwrap().contains("floor"));
    let ladder = rep.ladder.as_ref().unwrap();
    for row in &ladder.rows {
        assert!(row[3].abs() < DEFECT_FLOOR, "defect {:.3e}", row[3]);
    }
}

#[test]
fn bubble_sequence_scaled_limit_has_nonnegative_small_radius_trend() {
    let eps = [0.02, 0.01, 0.005, 0.0025];
    let bubbles = bubble_sequence(0.5, &eps);
    let fields: Vec<&dyn ScalarField> = bubbles.iter().map(|b| b as &dyn ScalarField).collect();
    let seq = SignSequence {
        eps: eps.to_vec(),
        fields,
        kappa: 0.5,
    };
    let radii = [0.5, 0.45, 0.4, 0.35, 0.3];
    let rep = sign_restriction_experiment(&SignInput::Sequence(seq), &radii, 16).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass);

    let get = |name: &str| {
        rep.computed
            .iter()
            .find(|v| v.name == name)
            .unwrap_or_else(|| panic!("missing {name}"))
            .value
    };
    assert!(get("liminf_estimate").abs() < 1e-10);
    assert!(get("liminf_estimate") > -LIMINF_TOLERANCE);
    assert!(get("tail_value").abs() < 1e-10);
    // |P(u_i, r)| ≤ C ε_i r holds with a constant at round-off size, since
    // each member balances exactly.
    assert!(get("scaling_constant") < 1e-10);

    let ladder = rep.ladder.as_ref().unwrap();
    assert_eq!(
        ladder.columns,
        ["r", "p_prime_limit", "p_u0", "p_u1", "p_u2", "p_u3"]
    );
    for row in &ladder.rows {
        for p in &row[2..] {
            assert!(p.abs() < 1e-12, "member reading {p:.3e}");
        }
    }
}

#[test]
fn unconverged_sequence_tail_aborts_the_experiment() {
    // Wide members against a deep ladder: the scaled tail still moves at
    // the smallest radius, so no limit reading is trustworthy.
    let eps = [0.1, 0.05, 0.025, 0.0125];
    let bubbles = bubble_sequence(0.5, &eps);
    let fields: Vec<&dyn ScalarField> = bubbles.iter().map(|b| b as &dyn ScalarField).collect();
    let seq = SignSequence {
        eps: eps.to_vec(),
        fields,
        kappa: 0.5,
    };
    let err = sign_restriction_experiment(&SignInput::Sequence(seq), &[0.4, 0.3, 0.2, 0.15, 0.1], 16)
        .unwrap_err();
    match err {
        PohozaevError::SequenceNotConverged { residual, threshold } => {
            assert!(residual > threshold);
            assert!(residual > 0.05);
        }
        other => panic!("expected a convergence abort, got {other}"),
    }
}

#[test]
fn synthetic_offset_profiles_split_on_the_offset_sign() {
    let radii = [0.5, 0.45, 0.4, 0.35, 0.3];

    // For 1/|z| + A the functional reads -πA at every radius: a positive
    // offset violates the sign restriction, a negative one does not.
    let bad = PoleField { a0: 0.2, blog: 0.0 };
    let rep = sign_restriction_experiment(&SignInput::Profile(&bad), &radii, 16).unwrap();
    assert_eq!(rep.verdict, Verdict::Fail);
    assert!(rep.note.as_ref().unwrap().contains("violated"));
    let liminf = rep.computed.iter().find(|v| v.name == "liminf_estimate").unwrap().value;
    assert!((liminf + 0.2 * PI).abs() < 1e-10, "liminf {liminf:.9e}");

    let good = PoleField { a0: -0.2, blog: 0.0 };
    let rep = sign_restriction_experiment(&SignInput::Profile(&good), &radii, 16).unwrap();
    assert_eq!(rep.verdict, Verdict::Pass);
    let liminf = rep.computed.iter().find(|v| v.name == "liminf_estimate").unwrap().value;
    assert!((liminf - 0.2 * PI).abs() < 1e-10);
}

#[test]
fn quadrature_bundle_reproduces_half_ball_measures() {
    // Total measures of all four domains against the closed-form volumes
    // and surface areas, in every supported dimension.
    let sphere_area = |n: usize| match n {
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        4 => 2.0 * PI * PI,
        5 => 8.0 * PI * PI / 3.0,
        _ => unreachable!(),
    };
    let ball_volume = |n: usize| sphere_area(n) / n as f64;
    for (n, rho) in [(3usize, 0.7), (4, 1.3), (5, 0.9)] {
        let q = HalfBallQuadrature::product_gauss(n, rho, 10);
        let hemi: f64 = q.hemisphere.weights.iter().sum();
        let eq: f64 = q.equator.weights.iter().sum();
        let disk: f64 = q.disk.weights.iter().sum();
        let vol: f64 = q.volume.weights.iter().sum();
        let hemi_want = 0.5 * sphere_area(n) * rho.powi(n as i32 - 1);
        let eq_want = sphere_area(n - 1) * rho.powi(n as i32 - 2);
        let disk_want = ball_volume(n - 1) * rho.powi(n as i32 - 1);
        let vol_want = 0.5 * ball_volume(n) * rho.powi(n as i32);
        assert!((hemi - hemi_want).abs() < 1e-12 * hemi_want, "n {n} hemisphere");
        assert!((eq - eq_want).abs() < 1e-12 * eq_want, "n {n} equator");
        assert!((disk - disk_want).abs() < 1e-12 * disk_want, "n {n} disk");
        assert!((vol - vol_want).abs() < 1e-12 * vol_want, "n {n} volume");
    }

    // Second moments on the three-dimensional bundle.
    let rho = 0.7f64;
    let q = HalfBallQuadrature::product_gauss(3, rho, 10);
    let pairs = [
        (q.hemisphere.integrate(|z| z[2] * z[2]), 2.0 * PI * rho.powi(4) / 3.0),
        (q.equator.integrate(|z| z[0] * z[0]), PI * rho.powi(3)),
        (q.disk.integrate(|z| z[0] * z[0]), PI * rho.powi(4) / 4.0),
        (q.volume.integrate(|z| z[2] * z[2]), 2.0 * PI * rho.powi(5) / 15.0),
    ];
    for (got, want) in pairs {
        assert!((got - want).abs() < 1e-12 * want, "{got:.12e} vs {want:.12e}");
    }
}

#[test]
fn error_estimates_shrink_when_the_order_doubles() {
    let sp = ShiftedPole { eps: 1.0, s: 1.0 };
    let coarse = HalfBallQuadrature::product_gauss(3, 1.0, 4);
    let fine = HalfBallQuadrature::product_gauss(3, 1.0, 16);
    let rep_c = pohozaev_P(&sp, 1.0, 0.0, 0.0, &coarse).unwrap();
    let rep_f = pohozaev_P(&sp, 1.0, 0.0, 0.0, &fine).unwrap();
    assert!(rep_f.quad_error < rep_c.quad_error);
    assert!(rep_f.quad_error < 1e-12);
}

#[test]
fn mismatched_rule_radius_or_dimension_is_rejected() {
    let u = Bubble::new(3, 0.5, 0.6, vec![0.0, 0.0]);
    let rule = HalfBallQuadrature::product_gauss(3, 0.5, 8);
    assert!(matches!(
        pohozaev_P(&u, 0.6, 0.0, 1.0, &rule),
        Err(PohozaevError::RadiusMismatch { .. })
    ));

    let u4 = Bubble::new(4, 0.5, 0.6, vec![0.0; 3]);
    assert!(matches!(
        pohozaev_P(&u4, 0.5, 0.0, 1.0, &rule),
        Err(PohozaevError::DimensionMismatch { .. })
    ));

    let g4 = EuclideanMetric::new(4);
    assert!(matches!(
        pohozaev_rhs(&g4, &u, 0.5, &rule),
        Err(PohozaevError::DimensionMismatch { .. })
    ));
}

#[test]
fn flux_integral_requires_a_three_dimensional_chart() {
    let g4 = FnField::new(4, |z: &[f64]| {
        1.0 / (z.iter().map(|v| v * v).sum::<f64>()).sqrt()
    });
    let pi0 = DMatrix::zeros(2, 2);
    assert!(matches!(
        brendle_chen_I(&g4, &pi0, 0.3, 8),
        Err(PohozaevError::UnsupportedDimension { n: 4 })
    ));
}

#[test]
fn bad_ladders_and_short_sequences_are_rejected() {
    let g0 = EuclideanMetric::new(3);
    assert!(matches!(
        adm_mass(&g0, &[10.0], 8),
        Err(PohozaevError::TooFewEntries { .. })
    ));
    assert!(matches!(
        adm_mass(&g0, &[40.0, 20.0, 10.0], 8),
        Err(PohozaevError::RadiiNotIncreasing)
    ));

    let g = PoleField { a0: 0.1, blog: 0.0 };
    let pi0 = DMatrix::zeros(2, 2);
    assert!(matches!(
        check_P_I_relation(&g, &pi0, &[0.1, 0.05], 8),
        Err(PohozaevError::TooFewEntries { .. })
    ));
    assert!(matches!(
        check_P_I_relation(&g, &pi0, &[0.01, 0.05, 0.1], 8),
        Err(PohozaevError::LadderNotDecreasing)
    ));

    assert!(matches!(
        sign_restriction_experiment(&SignInput::Profile(&g), &[0.4, 0.3], 8),
        Err(PohozaevError::TooFewEntries { .. })
    ));

    // A sequence whose origin values do not increase is not a peaking
    // sequence.
    let b_wide = Bubble::new(3, 0.5, 0.2, vec![0.0, 0.0]);
    let b_same = Bubble::new(3, 0.5, 0.2, vec![0.0, 0.0]);
    let seq = SignSequence {
        eps: vec![0.2, 0.1],
        fields: vec![&b_wide, &b_same],
        kappa: 0.5,
    };
    assert!(matches!(
        sign_restriction_experiment(&SignInput::Sequence(seq), &[0.5, 0.4, 0.3], 8),
        Err(PohozaevError::DegenerateFit { .. })
    ));
}

#[test]
#[should_panic(expected = "supported chart dimensions")]
fn quadrature_bundle_rejects_unsupported_dimensions() {
    let _ = HalfBallQuadrature::product_gauss(6, 1.0, 8);
}
