//! Metric fields on coordinate charts: Euclidean, conformally deformed,
//! synthetic Fermi-gauge perturbations, and pullbacks along chart maps.

use nalgebra::{DMatrix, DVector};

use super::{DerivativeMode, ScalarField};

/// A Riemannian metric given chartwise by its component matrix `g_{ab}(z)`
/// and the first two partial derivatives of the components.
pub trait MetricField {
    fn dim(&self) -> usize;

    /// Component matrix `g_{ab}(z)` (symmetric positive definite).
    fn value(&self, z: &[f64]) -> DMatrix<f64>;

    /// `∂_c g_{ab}(z)`, indexed as `out[c][(a,b)]`. Default: central differences.
    fn first_derivative(&self, z: &[f64]) -> Vec<DMatrix<f64>> {
        fd_metric_first(self, z, DerivativeMode::default_fd())
    }

    /// `∂_c ∂_d g_{ab}(z)`, indexed as `out[c][d][(a,b)]`. Default: central differences.
    fn second_derivative(&self, z: &[f64]) -> Vec<Vec<DMatrix<f64>>> {
        fd_metric_second(self, z, DerivativeMode::default_fd())
    }

    /// Whether the chart is declared to be in Fermi gauge
    /// (`g_{nn} = 1`, `g_{jn} = 0` for `j < n`).
    fn fermi_declared(&self) -> bool {
        false
    }
}

/// Central-difference `∂_c g_{ab}`.
pub fn fd_metric_first<G: MetricField + ?Sized>(
    g: &G,
    z: &[f64],
    mode: DerivativeMode,
) -> Vec<DMatrix<f64>> {
    let n = g.dim();
    let h = match mode {
        DerivativeMode::Analytic => DerivativeMode::default_fd().step_at(z),
        m => m.step_at(z),
    };
    let mut zp = z.to_vec();
    let mut out = Vec::with_capacity(n);
    for c in 0..n {
        let zc = z[c];
        zp[c] = zc + h;
        let gp = g.value(&zp);
        zp[c] = zc - h;
        let gm = g.value(&zp);
        zp[c] = zc;
        out.push((gp - gm) / (2.0 * h));
    }
    out
}

/// Central-difference `∂_c ∂_d g_{ab}`.
pub fn fd_metric_second<G: MetricField + ?Sized>(
    g: &G,
    z: &[f64],
    mode: DerivativeMode,
) -> Vec<Vec<DMatrix<f64>>> {
    let n = g.dim();
    let h = match mode {
        DerivativeMode::Analytic => DerivativeMode::default_fd().step_at(z),
        m => m.step_at(z),
    };
    let g0 = g.value(z);
    let mut zp = z.to_vec();
    let mut out = vec![vec![DMatrix::zeros(n, n); n]; n];
    for c in 0..n {
        let zc = z[c];
        zp[c] = zc + h;
        let gp = g.value(&zp);
        zp[c] = zc - h;
        let gm = g.value(&zp);
        zp[c] = zc;
        out[c][c] = (gp + gm - 2.0 * g0.clone()) / (h * h);
    }
    for c in 0..n {
        for d in (c + 1)..n {
            let (zc, zd) = (z[c], z[d]);
            let mut eval = |sc: f64, sd: f64| {
                zp[c] = zc + sc * h;
                zp[d] = zd + sd * h;
                g.value(&zp)
            };
            let m = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0))
                / (4.0 * h * h);
            zp[c] = zc;
            zp[d] = zd;
            out[c][d] = m.clone();
            out[d][c] = m;
        }
    }
    out
}

/// The flat metric `δ_{ab}` on a chart of dimension `n`.
#[derive(Debug, Clone)]
pub struct EuclideanMetric {
    n: usize,
}

impl EuclideanMetric {
    pub fn new(n: usize) -> Self {
        Self { n }
    }
}

impl MetricField for EuclideanMetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, _z: &[f64]) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n)
    }

    fn first_derivative(&self, _z: &[f64]) -> Vec<DMatrix<f64>> {
        vec![DMatrix::zeros(self.n, self.n); self.n]
    }

    fn second_derivative(&self, _z: &[f64]) -> Vec<Vec<DMatrix<f64>>> {
        vec![vec![DMatrix::zeros(self.n, self.n); self.n]; self.n]
    }

    fn fermi_declared(&self) -> bool {
        true
    }
}

/// A conformally deformed metric `ω g` with `ω = ξ^{4/(n−2)}`.
///
/// Derivatives are assembled by the product rule from the base metric's
/// derivatives and the gradient/Hessian of `ξ`.
pub struct ConformalMetric<'a> {
    base: &'a dyn MetricField,
    xi: &'a dyn ScalarField,
}

impl<'a> ConformalMetric<'a> {
    pub fn new(base: &'a dyn MetricField, xi: &'a dyn ScalarField) -> Self {
        assert_eq!(base.dim(), xi.dim(), "metric and conformal factor dimension mismatch");
        Self { base, xi }
    }

    fn exponent(&self) -> f64 {
        4.0 / (self.base.dim() as f64 - 2.0)
    }

    /// `ω, ∂_c ω, ∂_c ∂_d ω` for `ω = ξ^p`.
    fn weight(&self, z: &[f64]) -> (f64, DVector<f64>, DMatrix<f64>) {
        let p = self.exponent();
        let xi = self.xi.value(z);
        let dxi = self.xi.gradient(z);
        let d2xi = self.xi.hessian(z);
        let w = xi.powf(p);
        let dw = &dxi * (p * xi.powf(p - 1.0));
        let mut d2w = d2xi * (p * xi.powf(p - 1.0));
        let c2 = p * (p - 1.0) * xi.powf(p - 2.0);
        let n = self.dim();
        for a in 0..n {
            for b in 0..n {
                d2w[(a, b)] += c2 * dxi[a] * dxi[b];
            }
        }
        (w, dw, d2w)
    }
}

impl MetricField for ConformalMetric<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, z: &[f64]) -> DMatrix<f64> {
        let (w, _, _) = self.weight(z);
        self.base.value(z) * w
    }

    fn first_derivative(&self, z: &[f64]) -> Vec<DMatrix<f64>> {
        let (w, dw, _) = self.weight(z);
        let g = self.base.value(z);
        let dg = self.base.first_derivative(z);
        (0..self.dim()).map(|c| &dg[c] * w + &g * dw[c]).collect()
    }

    fn second_derivative(&self, z: &[f64]) -> Vec<Vec<DMatrix<f64>>> {
        let (w, dw, d2w) = self.weight(z);
        let g = self.base.value(z);
        let dg = self.base.first_derivative(z);
        let d2g = self.base.second_derivative(z);
        let n = self.dim();
        let mut out = vec![vec![DMatrix::zeros(n, n); n]; n];
        for c in 0..n {
            for d in 0..n {
                out[c][d] = &d2g[c][d] * w
                    + &dg[c] * dw[d]
                    + &dg[d] * dw[c]
                    + &g * d2w[(c, d)];
            }
        }
        out
    }
}

/// A synthetic metric in Fermi gauge on the half-space chart:
///
/// `g_{jl} = δ_{jl} − 2 π_{jl} z_n + Q_{jl} z_n²`, `g_{nn} = 1`, `g_{jn} = 0`.
///
/// `π` is the prescribed boundary second fundamental form at the base point;
/// the optional quadratic block `Q` generates a controlled `O(|z|²)` remainder.
#[derive(Debug, Clone)]
pub struct FermiSyntheticMetric {
    n: usize,
    pi: DMatrix<f64>,
    quad: Option<DMatrix<f64>>,
}

impl FermiSyntheticMetric {
    /// `pi` must be a symmetric `(n−1)×(n−1)` matrix.
    pub fn new(n: usize, pi: DMatrix<f64>) -> Self {
        assert_eq!(pi.nrows(), n - 1);
        assert_eq!(pi.ncols(), n - 1);
        Self { n, pi, quad: None }
    }

    /// Adds the quadratic block `Q_{jl} z_n²`.
    pub fn with_quadratic(mut self, quad: DMatrix<f64>) -> Self {
        assert_eq!(quad.nrows(), self.n - 1);
        assert_eq!(quad.ncols(), self.n - 1);
        self.quad = Some(quad);
        self
    }

    pub fn pi(&self) -> &DMatrix<f64> {
        &self.pi
    }

    /// Mean curvature of the boundary at the base point, `tr π / (n−1)`.
    pub fn mean_curvature(&self) -> f64 {
        self.pi.trace() / (self.n as f64 - 1.0)
    }
}

impl MetricField for FermiSyntheticMetric {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, z: &[f64]) -> DMatrix<f64> {
        let n = self.n;
        let zn = z[n - 1];
        let mut g = DMatrix::identity(n, n);
        for j in 0..n - 1 {
            for l in 0..n - 1 {
                let mut v = -2.0 * self.pi[(j, l)] * zn;
                if let Some(q) = &self.quad {
                    v += q[(j, l)] * zn * zn;
                }
                g[(j, l)] += v;
            }
        }
        g
    }

    fn first_derivative(&self, z: &[f64]) -> Vec<DMatrix<f64>> {
        let n = self.n;
        let zn = z[n - 1];
        let mut out = vec![DMatrix::zeros(n, n); n];
        for j in 0..n - 1 {
            for l in 0..n - 1 {
                let mut v = -2.0 * self.pi[(j, l)];
                if let Some(q) = &self.quad {
                    v += 2.0 * q[(j, l)] * zn;
                }
                out[n - 1][(j, l)] = v;
            }
        }
        out
    }

    fn second_derivative(&self, _z: &[f64]) -> Vec<Vec<DMatrix<f64>>> {
        let n = self.n;
        let mut out = vec![vec![DMatrix::zeros(n, n); n]; n];
        if let Some(q) = &self.quad {
            for j in 0..n - 1 {
                for l in 0..n - 1 {
                    out[n - 1][n - 1][(j, l)] = 2.0 * q[(j, l)];
                }
            }
        }
        out
    }

    fn fermi_declared(&self) -> bool {
        true
    }
}

/// A smooth chart map used to pull metrics back, with an analytic Jacobian.
pub trait ChartMap {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;
    fn value(&self, z: &[f64]) -> Vec<f64>;
    /// Jacobian `J_{ca} = ∂ F_c / ∂ z_a` (rows: output components).
    fn jacobian(&self, z: &[f64]) -> DMatrix<f64>;
}

/// Pullback `F*G` of a Riemannian metric along a chart map:
/// `(F*G)_{ab}(z) = Σ_{cd} ∂_a F_c ∂_b F_d G_{cd}(F(z))`.
///
/// Component derivatives fall back to finite differences of the value.
pub struct PullbackMetric<'a> {
    map: &'a dyn ChartMap,
    target: &'a dyn MetricField,
}

impl<'a> PullbackMetric<'a> {
    pub fn new(map: &'a dyn ChartMap, target: &'a dyn MetricField) -> Self {
        assert_eq!(map.dim_out(), target.dim());
        Self { map, target }
    }
}

impl MetricField for PullbackMetric<'_> {
    fn dim(&self) -> usize {
        self.map.dim_in()
    }

    fn value(&self, z: &[f64]) -> DMatrix<f64> {
        let image = self.map.value(z);
        let j = self.map.jacobian(z);
        let gt = self.target.value(&image);
        j.transpose() * gt * j
    }
}

/// `det g` at a point.
pub fn metric_det(g: &dyn MetricField, z: &[f64]) -> f64 {
    g.value(z).determinant()
}

/// Inverse component matrix `g^{ab}` at a point.
pub fn metric_inverse(g: &dyn MetricField, z: &[f64]) -> DMatrix<f64> {
    g.value(z)
        .try_inverse()
        .expect("metric component matrix must be invertible")
}
