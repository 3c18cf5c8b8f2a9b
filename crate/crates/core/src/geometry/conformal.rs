//! Conformal deformation helpers: product/quotient fields with exact
//! derivative rules, and a residual check of the covariance laws for the
//! curvature-corrected interior and boundary operators.

use nalgebra::{DMatrix, DVector};

use super::curvature::{conformal_boundary_operator, conformal_laplacian};
use super::metric::{ConformalMetric, MetricField};
use super::ScalarField;

/// Builds the deformed metric `ξ^{4/(n−2)} g` from a base metric and a
/// positive factor field.
pub fn conformal_change<'a>(
    base: &'a dyn MetricField,
    xi: &'a dyn ScalarField,
) -> ConformalMetric<'a> {
    ConformalMetric::new(base, xi)
}

/// Pointwise product `ξ·u` with product-rule gradient and Hessian.
pub struct ProductField<'a> {
    pub xi: &'a dyn ScalarField,
    pub u: &'a dyn ScalarField,
}

impl ScalarField for ProductField<'_> {
    fn dim(&self) -> usize {
        self.u.dim()
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.xi.value(z) * self.u.value(z)
    }

    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        self.xi.gradient(z) * self.u.value(z) + self.u.gradient(z) * self.xi.value(z)
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let (xv, uv) = (self.xi.value(z), self.u.value(z));
        let (xg, ug) = (self.xi.gradient(z), self.u.gradient(z));
        let mut h = self.xi.hessian(z) * uv + self.u.hessian(z) * xv;
        let n = self.dim();
        for a in 0..n {
            for b in 0..n {
                h[(a, b)] += xg[a] * ug[b] + xg[b] * ug[a];
            }
        }
        h
    }
}

/// Pointwise quotient `u/ξ` with quotient-rule gradient and Hessian.
pub struct QuotientField<'a> {
    pub u: &'a dyn ScalarField,
    pub xi: &'a dyn ScalarField,
}

impl ScalarField for QuotientField<'_> {
    fn dim(&self) -> usize {
        self.u.dim()
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.u.value(z) / self.xi.value(z)
    }

    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        let (xv, uv) = (self.xi.value(z), self.u.value(z));
        (self.u.gradient(z) * xv - self.xi.gradient(z) * uv) / (xv * xv)
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let (xv, uv) = (self.xi.value(z), self.u.value(z));
        let (xg, ug) = (self.xi.gradient(z), self.u.gradient(z));
        let mut h = self.u.hessian(z) / xv - self.xi.hessian(z) * (uv / (xv * xv));
        let n = self.dim();
        for a in 0..n {
            for b in 0..n {
                h[(a, b)] += -(ug[a] * xg[b] + ug[b] * xg[a]) / (xv * xv)
                    + 2.0 * uv * xg[a] * xg[b] / (xv * xv * xv);
            }
        }
        h
    }
}

/// Worst-case residuals of the covariance laws over the sampled points.
#[derive(Debug, Clone)]
pub struct ConformalLawResidual {
    /// max over interior samples of
    /// `|L_{g̃} u − ξ^{−(n+2)/(n−2)} L_g(ξu)|`.
    pub interior_max: f64,
    /// max over boundary samples of
    /// `|B_{g̃} u − ξ^{−n/(n−2)} B_g(ξu)|`.
    pub boundary_max: f64,
}

/// Checks the covariance laws of the curvature-corrected operators under
/// `g̃ = ξ^{4/(n−2)} g` by evaluating both sides at the given sample points.
///
/// `boundary_points` must lie on the chart boundary `z_n = 0`.
pub fn check_conformal_law(
    base: &dyn MetricField,
    xi: &dyn ScalarField,
    u: &dyn ScalarField,
    interior_points: &[Vec<f64>],
    boundary_points: &[Vec<f64>],
) -> ConformalLawResidual {
    let n = base.dim() as f64;
    let deformed = ConformalMetric::new(base, xi);
    let xiu = ProductField { xi, u };

    let mut interior_max: f64 = 0.0;
    for z in interior_points {
        let lhs = conformal_laplacian(&deformed, u, z);
        let rhs = xi.value(z).powf(-(n + 2.0) / (n - 2.0)) * conformal_laplacian(base, &xiu, z);
        interior_max = interior_max.max((lhs - rhs).abs());
    }

    let mut boundary_max: f64 = 0.0;
    for z in boundary_points {
        let lhs = conformal_boundary_operator(&deformed, u, z);
        let rhs =
            xi.value(z).powf(-n / (n - 2.0)) * conformal_boundary_operator(base, &xiu, z);
        boundary_max = boundary_max.max((lhs - rhs).abs());
    }

    ConformalLawResidual {
        interior_max,
        boundary_max,
    }
}
