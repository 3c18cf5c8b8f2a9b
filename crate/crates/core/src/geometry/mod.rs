//! Differential-geometric groundwork on half-space charts.
//!
//! The chart is the closed upper half space `{z ∈ R^n : z_n ≥ 0}` with
//! boundary `{z_n = 0}`. This module provides scalar fields with analytic
//! or finite-difference derivatives, metric fields with their first two
//! derivative tensors, curvature and the curvature-corrected interior and
//! boundary operators, conformal deformation with covariance checks, and
//! an audit of the boundary-normal (Fermi-type) metric expansion.

pub mod conformal;
pub mod curvature;
pub mod fermi;
pub mod metric;

pub use conformal::{
    check_conformal_law, conformal_change, ConformalLawResidual, ProductField, QuotientField,
};
pub use curvature::{
    boundary_geometry, christoffel, conformal_boundary_operator, conformal_laplacian,
    laplace_beltrami, ricci, scalar_curvature, BoundaryGeometry,
};
pub use fermi::{fermi_expansion_audit, least_squares_slope, FermiExpansionAudit};
pub use metric::{
    fd_metric_first, fd_metric_second, metric_det, metric_inverse, ChartMap, ConformalMetric,
    EuclideanMetric, FermiSyntheticMetric, MetricField, PullbackMetric,
};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// Tolerance used to decide whether a point lies on the chart boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("expected a point of dimension {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("point has negative normal coordinate {zn}")]
    OutsideHalfSpace { zn: f64 },
    #[error("point with normal coordinate {zn} is not on the boundary")]
    NotOnBoundary { zn: f64 },
    #[error("metric is not positive definite at the sampled point")]
    MetricNotPositiveDefinite,
    #[error("dimension {n} unsupported; charts are defined for 3 ≤ n ≤ 5")]
    UnsupportedDimension { n: usize },
}

/// A point of the closed upper half space, `z_n ≥ 0`, in dimension 3..=5.
#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpacePoint {
    coords: Vec<f64>,
}

impl HalfSpacePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self, GeometryError> {
        let n = coords.len();
        if !(3..=5).contains(&n) {
            return Err(GeometryError::UnsupportedDimension { n });
        }
        let zn = coords[n - 1];
        if zn < -BOUNDARY_TOL {
            return Err(GeometryError::OutsideHalfSpace { zn });
        }
        Ok(Self { coords })
    }

    /// A boundary point: tangential coordinates plus `z_n = 0`.
    pub fn boundary(mut tangential: Vec<f64>) -> Result<Self, GeometryError> {
        tangential.push(0.0);
        Self::new(tangential)
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn normal_coord(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    pub fn is_boundary(&self) -> bool {
        self.normal_coord().abs() <= BOUNDARY_TOL
    }
}

/// How a field differentiates itself: exact formulas or central differences
/// with a step scaled by the distance from the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DerivativeMode {
    Analytic,
    CentralDifference { base_step: f64 },
}

impl DerivativeMode {
    pub fn default_fd() -> Self {
        DerivativeMode::CentralDifference { base_step: 1e-5 }
    }

    /// Step used at `z`: `base_step · (1 + |z|)`.
    pub fn step_at(&self, z: &[f64]) -> f64 {
        match self {
            DerivativeMode::Analytic => 0.0,
            DerivativeMode::CentralDifference { base_step } => base_step * (1.0 + norm(z)),
        }
    }
}

/// Euclidean norm of a coordinate slice.
pub fn norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A scalar field on the chart with value, gradient, and Hessian.
///
/// Implementors with closed-form derivatives override `gradient`/`hessian`;
/// the defaults fall back to central differences of `value`.
pub trait ScalarField {
    fn dim(&self) -> usize;

    fn value(&self, z: &[f64]) -> f64;

    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        fd_gradient(self, z, DerivativeMode::default_fd())
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        fd_hessian(self, z, DerivativeMode::default_fd())
    }
}

/// Central-difference gradient of any scalar field.
pub fn fd_gradient<F: ScalarField + ?Sized>(
    f: &F,
    z: &[f64],
    mode: DerivativeMode,
) -> DVector<f64> {
    let n = f.dim();
    let h = match mode {
        DerivativeMode::Analytic => DerivativeMode::default_fd().step_at(z),
        m => m.step_at(z),
    };
    let mut zp = z.to_vec();
    let mut out = DVector::zeros(n);
    for a in 0..n {
        let za = z[a];
        zp[a] = za + h;
        let fp = f.value(&zp);
        zp[a] = za - h;
        let fm = f.value(&zp);
        zp[a] = za;
        out[a] = (fp - fm) / (2.0 * h);
    }
    out
}

/// Central-difference Hessian of any scalar field (4-point formula on the
/// mixed partials).
pub fn fd_hessian<F: ScalarField + ?Sized>(
    f: &F,
    z: &[f64],
    mode: DerivativeMode,
) -> DMatrix<f64> {
    let n = f.dim();
    let h = match mode {
        DerivativeMode::Analytic => DerivativeMode::default_fd().step_at(z),
        m => m.step_at(z),
    };
    let f0 = f.value(z);
    let mut zp = z.to_vec();
    let mut out = DMatrix::zeros(n, n);
    for a in 0..n {
        let za = z[a];
        zp[a] = za + h;
        let fp = f.value(&zp);
        zp[a] = za - h;
        let fm = f.value(&zp);
        zp[a] = za;
        out[(a, a)] = (fp + fm - 2.0 * f0) / (h * h);
    }
    for a in 0..n {
        for b in (a + 1)..n {
            let (za, zb) = (z[a], z[b]);
            let mut eval = |sa: f64, sb: f64| {
                zp[a] = za + sa * h;
                zp[b] = zb + sb * h;
                f.value(&zp)
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * h * h);
            zp[a] = za;
            zp[b] = zb;
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    out
}

/// A scalar field backed by a closure, differentiated by central differences.
pub struct FnField<F: Fn(&[f64]) -> f64> {
    pub dim: usize,
    pub f: F,
    pub mode: DerivativeMode,
}

impl<F: Fn(&[f64]) -> f64> FnField<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self {
            dim,
            f,
            mode: DerivativeMode::default_fd(),
        }
    }
}

impl<F: Fn(&[f64]) -> f64> ScalarField for FnField<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, z: &[f64]) -> f64 {
        (self.f)(z)
    }

    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        fd_gradient(self, z, self.mode)
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        fd_hessian(self, z, self.mode)
    }
}
