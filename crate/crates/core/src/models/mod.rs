//! Closed-form solution families on the flat half space and their residual
//! operators.
//!
//! For `0 < κ < 1` the profile
//!
//! ```text
//!   U(y) = ε^m ( |ȳ − c|² + (y_n + ε)² − ε²κ )^{−m},   m = (n−2)/2,
//! ```
//!
//! solves `ΔU = n(n−2) κ U^{(n+2)/(n−2)}` in `{y_n > 0}` together with
//! `∂_n U + (n−2) U^{n/(n−2)} = 0` on `{y_n = 0}`, for every width `ε > 0`
//! and boundary center `c`. The module also provides the `κ = 1`
//! flattened-limit profile depending only on `y_n`, a same-shape profile
//! laid along a tangential axis (which deliberately violates the boundary
//! equation — a negative control), the tangent fields of the family
//! (translation and dilation derivatives, which the linearized operators
//! annihilate), and pointwise residual evaluators for the flat-chart system
//! and its linearization.

use nalgebra::{DMatrix, DVector};

use crate::geometry::{least_squares_slope, ScalarField};

/// Interior nonlinearity coefficient `n(n−2)κ`.
pub fn interior_coefficient(n: usize, kappa: f64) -> f64 {
    (n * (n - 2)) as f64 * kappa
}

/// Boundary nonlinearity coefficient `n−2`.
pub fn boundary_coefficient(n: usize) -> f64 {
    (n - 2) as f64
}

/// A member of the closed-form solution family on the flat half space.
#[derive(Debug, Clone)]
pub struct Bubble {
    n: usize,
    kappa: f64,
    eps: f64,
    /// Boundary center: tangential coordinates of the concentration point.
    center: Vec<f64>,
}

impl Bubble {
    pub fn new(n: usize, kappa: f64, eps: f64, center: Vec<f64>) -> Self {
        assert!((3..=5).contains(&n), "profiles are defined for 3 ≤ n ≤ 5");
        assert!(kappa > 0.0 && kappa < 1.0, "the interior parameter must satisfy 0 < κ < 1");
        assert!(eps > 0.0, "the width must be positive");
        assert_eq!(center.len(), n - 1, "center has tangential coordinates only");
        Self { n, kappa, eps, center }
    }

    /// Centered family member of width `ε`.
    pub fn centered(n: usize, kappa: f64, eps: f64) -> Self {
        Self::new(n, kappa, eps, vec![0.0; n - 1])
    }

    /// The width-normalized profile `(1 + 2 y_n + (1−κ)|y|²)^{−m}`:
    /// the member with `ε = 1/(1−κ)` and center 0. Its value and
    /// derivatives stay `O(1)` uniformly as `κ → 1`, where it converges to
    /// the flattened-limit profile.
    pub fn width_normalized(n: usize, kappa: f64) -> Self {
        Self::centered(n, kappa, 1.0 / (1.0 - kappa))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    fn m(&self) -> f64 {
        (self.n as f64 - 2.0) / 2.0
    }

    /// Shifted squared distance `D(y) = |ȳ−c|² + (y_n+ε)² − ε²κ`
    /// (strictly positive on the closed half space).
    pub fn shifted_distance_sq(&self, y: &[f64]) -> f64 {
        let n = self.n;
        let mut d = (y[n - 1] + self.eps).powi(2) - self.eps * self.eps * self.kappa;
        for j in 0..n - 1 {
            d += (y[j] - self.center[j]).powi(2);
        }
        d
    }

    /// `∂_a D = 2(y_a − c_a)` tangentially, `2(y_n + ε)` normally.
    fn dgrad(&self, y: &[f64]) -> DVector<f64> {
        let n = self.n;
        let mut g = DVector::zeros(n);
        for j in 0..n - 1 {
            g[j] = 2.0 * (y[j] - self.center[j]);
        }
        g[n - 1] = 2.0 * (y[n - 1] + self.eps);
        g
    }

    /// `∂_a ∂_b ∂_c U`, indexed as `out[c][(a,b)]`.
    pub fn third_tensor(&self, y: &[f64]) -> Vec<DMatrix<f64>> {
        let n = self.n;
        let m = self.m();
        let d = self.shifted_distance_sq(y);
        let dg = self.dgrad(y);
        let scale = self.eps.powf(m);
        let t2 = scale * m * (m + 1.0) * d.powf(-m - 2.0);
        let t3 = -scale * m * (m + 1.0) * (m + 2.0) * d.powf(-m - 3.0);
        let mut out = vec![DMatrix::zeros(n, n); n];
        for c in 0..n {
            for a in 0..n {
                for b in a..n {
                    let mut v = t3 * dg[a] * dg[b] * dg[c];
                    if a == b {
                        v += 2.0 * t2 * dg[c];
                    }
                    if a == c {
                        v += 2.0 * t2 * dg[b];
                    }
                    if b == c {
                        v += 2.0 * t2 * dg[a];
                    }
                    out[c][(a, b)] = v;
                    out[c][(b, a)] = v;
                }
            }
        }
        out
    }
}

impl ScalarField for Bubble {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, y: &[f64]) -> f64 {
        let m = self.m();
        self.eps.powf(m) * self.shifted_distance_sq(y).powf(-m)
    }

    fn gradient(&self, y: &[f64]) -> DVector<f64> {
        let m = self.m();
        let d = self.shifted_distance_sq(y);
        let t1 = -self.eps.powf(m) * m * d.powf(-m - 1.0);
        self.dgrad(y) * t1
    }

    fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let m = self.m();
        let d = self.shifted_distance_sq(y);
        let scale = self.eps.powf(m);
        let t1 = -scale * m * d.powf(-m - 1.0);
        let t2 = scale * m * (m + 1.0) * d.powf(-m - 2.0);
        let dg = self.dgrad(y);
        let mut h = DMatrix::zeros(n, n);
        for a in 0..n {
            for b in a..n {
                let mut v = t2 * dg[a] * dg[b];
                if a == b {
                    v += 2.0 * t1;
                }
                h[(a, b)] = v;
                h[(b, a)] = v;
            }
        }
        h
    }
}

/// The `κ = 1` flattened-limit profile `(2 y_n + ε)^{−m}`, constant along
/// the boundary. Solves the system with `κ = 1` (interior) and the same
/// boundary equation.
#[derive(Debug, Clone)]
pub struct FlattenedProfile {
    n: usize,
    eps: f64,
}

impl FlattenedProfile {
    pub fn new(n: usize, eps: f64) -> Self {
        assert!((3..=5).contains(&n));
        assert!(eps > 0.0);
        Self { n, eps }
    }
}

impl ScalarField for FlattenedProfile {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, y: &[f64]) -> f64 {
        let m = (self.n as f64 - 2.0) / 2.0;
        (2.0 * y[self.n - 1] + self.eps).powf(-m)
    }

    fn gradient(&self, y: &[f64]) -> DVector<f64> {
        let n = self.n;
        let m = (n as f64 - 2.0) / 2.0;
        let s = 2.0 * y[n - 1] + self.eps;
        let mut g = DVector::zeros(n);
        g[n - 1] = -2.0 * m * s.powf(-m - 1.0);
        g
    }

    fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let m = (n as f64 - 2.0) / 2.0;
        let s = 2.0 * y[n - 1] + self.eps;
        let mut h = DMatrix::zeros(n, n);
        h[(n - 1, n - 1)] = 4.0 * m * (m + 1.0) * s.powf(-m - 2.0);
        h
    }
}

/// The same falloff profile laid along the first tangential axis,
/// `(2 y_1 + ε)^{−m}`. It still solves the interior equation with `κ = 1`
/// (on `{y_1 > 0}`) but its normal derivative vanishes, so the boundary
/// equation fails by `(n−2) u^{n/(n−2)} > 0`. Kept as a negative control.
#[derive(Debug, Clone)]
pub struct TangentialFalloffProfile {
    n: usize,
    eps: f64,
}

impl TangentialFalloffProfile {
    pub fn new(n: usize, eps: f64) -> Self {
        assert!((3..=5).contains(&n));
        assert!(eps > 0.0);
        Self { n, eps }
    }
}

impl ScalarField for TangentialFalloffProfile {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, y: &[f64]) -> f64 {
        let m = (self.n as f64 - 2.0) / 2.0;
        (2.0 * y[0] + self.eps).powf(-m)
    }

    fn gradient(&self, y: &[f64]) -> DVector<f64> {
        let n = self.n;
        let m = (n as f64 - 2.0) / 2.0;
        let s = 2.0 * y[0] + self.eps;
        let mut g = DVector::zeros(n);
        g[0] = -2.0 * m * s.powf(-m - 1.0);
        g
    }

    fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let m = (n as f64 - 2.0) / 2.0;
        let s = 2.0 * y[0] + self.eps;
        let mut h = DMatrix::zeros(n, n);
        h[(0, 0)] = 4.0 * m * (m + 1.0) * s.powf(-m - 2.0);
        h
    }
}

/// Direction along the solution family for a tangent (variation) field.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FamilyDirection {
    /// `∂U/∂y_j` for a tangential translation, `j < n−1`.
    Translation(usize),
    /// `m U + (y − c̃)·∇U`, the dilation about the boundary center `c̃ = (c, 0)`.
    Dilation,
}

/// A tangent field of the solution family: the derivative of the family in
/// one of its parameter directions. Both linearized residual operators
/// annihilate these fields.
#[derive(Debug, Clone)]
pub struct FamilyTangent {
    pub base: Bubble,
    pub direction: FamilyDirection,
}

impl FamilyTangent {
    pub fn new(base: Bubble, direction: FamilyDirection) -> Self {
        if let FamilyDirection::Translation(j) = direction {
            assert!(j < base.dim() - 1, "translations act tangentially");
        }
        Self { base, direction }
    }

    fn centered_coords(&self, y: &[f64]) -> DVector<f64> {
        let n = self.base.dim();
        let mut v = DVector::zeros(n);
        for j in 0..n - 1 {
            v[j] = y[j] - self.base.center[j];
        }
        v[n - 1] = y[n - 1];
        v
    }
}

impl ScalarField for FamilyTangent {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, y: &[f64]) -> f64 {
        match self.direction {
            FamilyDirection::Translation(j) => self.base.gradient(y)[j],
            FamilyDirection::Dilation => {
                let m = self.base.m();
                m * self.base.value(y) + self.centered_coords(y).dot(&self.base.gradient(y))
            }
        }
    }

    fn gradient(&self, y: &[f64]) -> DVector<f64> {
        let n = self.dim();
        let hess = self.base.hessian(y);
        match self.direction {
            FamilyDirection::Translation(j) => hess.column(j).into_owned(),
            FamilyDirection::Dilation => {
                let m = self.base.m();
                let grad = self.base.gradient(y);
                let x = self.centered_coords(y);
                let mut out = DVector::zeros(n);
                for a in 0..n {
                    out[a] = (m + 1.0) * grad[a];
                    for c in 0..n {
                        out[a] += x[c] * hess[(c, a)];
                    }
                }
                out
            }
        }
    }

    fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let third = self.base.third_tensor(y);
        match self.direction {
            FamilyDirection::Translation(j) => third[j].clone(),
            FamilyDirection::Dilation => {
                let m = self.base.m();
                let hess = self.base.hessian(y);
                let x = self.centered_coords(y);
                let mut out = DMatrix::zeros(n, n);
                for a in 0..n {
                    for b in a..n {
                        let mut v = (m + 2.0) * hess[(a, b)];
                        for c in 0..n {
                            v += x[c] * third[c][(a, b)];
                        }
                        out[(a, b)] = v;
                        out[(b, a)] = v;
                    }
                }
                out
            }
        }
    }
}

/// Flat-chart Laplacian (trace of the Hessian).
pub fn flat_laplacian(u: &dyn ScalarField, y: &[f64]) -> f64 {
    u.hessian(y).trace()
}

/// Interior residual `Δu − n(n−2) κ u^{(n+2)/(n−2)}` on the flat chart.
pub fn flat_interior_residual(u: &dyn ScalarField, kappa: f64, y: &[f64]) -> f64 {
    let n = u.dim();
    let p = (n as f64 + 2.0) / (n as f64 - 2.0);
    flat_laplacian(u, y) - interior_coefficient(n, kappa) * u.value(y).powf(p)
}

/// Boundary residual `∂_n u + (n−2) u^{n/(n−2)}` on `{y_n = 0}`
/// (inward normal derivative).
pub fn flat_boundary_residual(u: &dyn ScalarField, y: &[f64]) -> f64 {
    let n = u.dim();
    let q = n as f64 / (n as f64 - 2.0);
    u.gradient(y)[n - 1] + boundary_coefficient(n) * u.value(y).powf(q)
}

/// Linearized interior residual at background `u`:
/// `Δφ − n(n+2) κ u^{4/(n−2)} φ`.
pub fn linearized_interior_residual(
    u: &dyn ScalarField,
    kappa: f64,
    phi: &dyn ScalarField,
    y: &[f64],
) -> f64 {
    let n = u.dim() as f64;
    let pot = n * (n + 2.0) * kappa * u.value(y).powf(4.0 / (n - 2.0));
    flat_laplacian(phi, y) - pot * phi.value(y)
}

/// Linearized boundary residual at background `u`:
/// `∂_n φ + n u^{2/(n−2)} φ`.
pub fn linearized_boundary_residual(u: &dyn ScalarField, phi: &dyn ScalarField, y: &[f64]) -> f64 {
    let n = u.dim();
    let nf = n as f64;
    phi.gradient(y)[n - 1] + nf * u.value(y).powf(2.0 / (nf - 2.0)) * phi.value(y)
}

/// Pointwise sum of scalar fields (used for multi-peak configurations).
pub struct SumField<'a> {
    parts: Vec<&'a dyn ScalarField>,
}

impl<'a> SumField<'a> {
    pub fn new(parts: Vec<&'a dyn ScalarField>) -> Self {
        assert!(!parts.is_empty());
        let n = parts[0].dim();
        assert!(parts.iter().all(|p| p.dim() == n));
        Self { parts }
    }
}

impl ScalarField for SumField<'_> {
    fn dim(&self) -> usize {
        self.parts[0].dim()
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.parts.iter().map(|p| p.value(y)).sum()
    }

    fn gradient(&self, y: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        for p in &self.parts {
            g += p.gradient(y);
        }
        g
    }

    fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        for p in &self.parts {
            h += p.hessian(y);
        }
        h
    }
}

/// Fitted decay exponent `q` of `|f| ~ C r^{−q}` along the ray `r·dir`,
/// from a log-log least-squares fit over the given radii.
pub fn decay_exponent(f: &dyn ScalarField, dir: &[f64], radii: &[f64]) -> f64 {
    let samples: Vec<(f64, f64)> = radii
        .iter()
        .map(|&r| {
            let z: Vec<f64> = dir.iter().map(|d| d * r).collect();
            (r.ln(), f.value(&z).abs().ln())
        })
        .collect();
    -least_squares_slope(&samples)
}
