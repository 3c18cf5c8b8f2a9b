//! Curvature and differential operators derived from a metric field:
//! Christoffel symbols, scalar curvature, Laplace–Beltrami, the
//! curvature-corrected Laplacian, and boundary data (inward unit normal,
//! second fundamental form, mean curvature) on the chart boundary `z_n = 0`.

use nalgebra::{DMatrix, DVector};

use super::metric::{metric_inverse, MetricField};
use super::ScalarField;

/// Christoffel symbols `Γ^c_{ab}`, indexed as `out[c][(a,b)]`.
pub fn christoffel(g: &dyn MetricField, z: &[f64]) -> Vec<DMatrix<f64>> {
    let n = g.dim();
    let ginv = metric_inverse(g, z);
    let dg = g.first_derivative(z);
    let mut out = vec![DMatrix::zeros(n, n); n];
    for c in 0..n {
        for a in 0..n {
            for b in a..n {
                let mut s = 0.0;
                for d in 0..n {
                    s += ginv[(c, d)] * (dg[a][(d, b)] + dg[b][(d, a)] - dg[d][(a, b)]);
                }
                out[c][(a, b)] = 0.5 * s;
                out[c][(b, a)] = 0.5 * s;
            }
        }
    }
    out
}

/// `∂_e Γ^c_{ab}`, indexed as `out[e][c][(a,b)]`.
fn christoffel_derivative(g: &dyn MetricField, z: &[f64]) -> Vec<Vec<DMatrix<f64>>> {
    let n = g.dim();
    let ginv = metric_inverse(g, z);
    let dg = g.first_derivative(z);
    let d2g = g.second_derivative(z);

    // ∂_e g^{cd} = −g^{ca} (∂_e g_{ab}) g^{bd}
    let dginv: Vec<DMatrix<f64>> = (0..n).map(|e| -(&ginv * &dg[e] * &ginv)).collect();

    let mut out = vec![vec![DMatrix::zeros(n, n); n]; n];
    for e in 0..n {
        for c in 0..n {
            for a in 0..n {
                for b in a..n {
                    let mut s = 0.0;
                    for d in 0..n {
                        s += dginv[e][(c, d)] * (dg[a][(d, b)] + dg[b][(d, a)] - dg[d][(a, b)]);
                        s += ginv[(c, d)]
                            * (d2g[e][a][(d, b)] + d2g[e][b][(d, a)] - d2g[e][d][(a, b)]);
                    }
                    out[e][c][(a, b)] = 0.5 * s;
                    out[e][c][(b, a)] = 0.5 * s;
                }
            }
        }
    }
    out
}

/// Ricci tensor `Ric_{bc}` in the convention that makes round spheres
/// positively curved.
pub fn ricci(g: &dyn MetricField, z: &[f64]) -> DMatrix<f64> {
    let n = g.dim();
    let gamma = christoffel(g, z);
    let dgamma = christoffel_derivative(g, z);
    let mut ric = DMatrix::zeros(n, n);
    for b in 0..n {
        for c in b..n {
            let mut s = 0.0;
            for a in 0..n {
                s += dgamma[a][a][(b, c)] - dgamma[b][a][(a, c)];
                for d in 0..n {
                    s += gamma[a][(a, d)] * gamma[d][(b, c)] - gamma[a][(b, d)] * gamma[d][(a, c)];
                }
            }
            ric[(b, c)] = s;
            ric[(c, b)] = s;
        }
    }
    ric
}

/// Scalar curvature `R = g^{bc} Ric_{bc}`.
pub fn scalar_curvature(g: &dyn MetricField, z: &[f64]) -> f64 {
    let ginv = metric_inverse(g, z);
    let ric = ricci(g, z);
    let n = g.dim();
    let mut r = 0.0;
    for b in 0..n {
        for c in 0..n {
            r += ginv[(b, c)] * ric[(b, c)];
        }
    }
    r
}

/// Laplace–Beltrami operator `Δ_g u = g^{ab}(∂_a ∂_b u − Γ^c_{ab} ∂_c u)`.
pub fn laplace_beltrami(g: &dyn MetricField, u: &dyn ScalarField, z: &[f64]) -> f64 {
    let n = g.dim();
    let ginv = metric_inverse(g, z);
    let gamma = christoffel(g, z);
    let grad = u.gradient(z);
    let hess = u.hessian(z);
    let mut s = 0.0;
    for a in 0..n {
        for b in 0..n {
            let mut v = hess[(a, b)];
            for c in 0..n {
                v -= gamma[c][(a, b)] * grad[c];
            }
            s += ginv[(a, b)] * v;
        }
    }
    s
}

/// Curvature-corrected Laplacian `Δ_g u − (n−2) R_g u / (4(n−1))`.
///
/// Under `g̃ = ξ^{4/(n−2)} g` it obeys the covariance law
/// `L_{g̃} u = ξ^{−(n+2)/(n−2)} L_g(ξ u)`.
pub fn conformal_laplacian(g: &dyn MetricField, u: &dyn ScalarField, z: &[f64]) -> f64 {
    let n = g.dim() as f64;
    let r = scalar_curvature(g, z);
    laplace_beltrami(g, u, z) - (n - 2.0) / (4.0 * (n - 1.0)) * r * u.value(z)
}

/// Boundary data of a metric at a point of the chart boundary `z_n = 0`.
#[derive(Debug, Clone)]
pub struct BoundaryGeometry {
    /// Inward unit normal components `η^a = g^{an} / √(g^{nn})`.
    pub eta: DVector<f64>,
    /// Second fundamental form `π_{jl} = −g_{la}(∂_j η^a + Γ^a_{jb} η^b)`
    /// on tangential indices `j, l < n`.
    pub second_fundamental: DMatrix<f64>,
    /// Induced metric `ḡ_{jl} = g_{jl}` on tangential indices.
    pub induced: DMatrix<f64>,
    /// Mean curvature `h = ḡ^{jl} π_{jl} / (n−1)`.
    pub mean_curvature: f64,
}

/// Computes the inward unit normal, second fundamental form, induced metric,
/// and mean curvature of the chart boundary `{z_n = 0}` at `z`.
///
/// The orientation makes boundaries that are convex toward the interior
/// positively curved: the flat unit ball seen from inside has `h = 1`.
pub fn boundary_geometry(g: &dyn MetricField, z: &[f64]) -> BoundaryGeometry {
    let n = g.dim();
    let ginv = metric_inverse(g, z);
    let dg = g.first_derivative(z);
    let gamma = christoffel(g, z);
    let gval = g.value(z);

    let gnn = ginv[(n - 1, n - 1)];
    let mut eta = DVector::zeros(n);
    for a in 0..n {
        eta[a] = ginv[(a, n - 1)] / gnn.sqrt();
    }

    // ∂_j η^a along the boundary, via ∂_j g^{ab} = −g^{ac}(∂_j g_{cd})g^{db}.
    let dginv: Vec<DMatrix<f64>> = (0..n).map(|j| -(&ginv * &dg[j] * &ginv)).collect();
    let mut deta = DMatrix::zeros(n - 1, n); // rows: tangential j, cols: component a
    for j in 0..n - 1 {
        let dgnn = dginv[j][(n - 1, n - 1)];
        for a in 0..n {
            deta[(j, a)] = dginv[j][(a, n - 1)] / gnn.sqrt()
                - 0.5 * ginv[(a, n - 1)] * dgnn / gnn.powf(1.5);
        }
    }

    let mut pi = DMatrix::zeros(n - 1, n - 1);
    for j in 0..n - 1 {
        for l in 0..n - 1 {
            let mut s = 0.0;
            for a in 0..n {
                let mut cov = deta[(j, a)];
                for b in 0..n {
                    cov += gamma[a][(j, b)] * eta[b];
                }
                s -= gval[(l, a)] * cov;
            }
            pi[(j, l)] = s;
        }
    }

    let induced = gval.view((0, 0), (n - 1, n - 1)).into_owned();
    let induced_inv = induced
        .clone()
        .try_inverse()
        .expect("induced boundary metric must be invertible");
    let mut h = 0.0;
    for j in 0..n - 1 {
        for l in 0..n - 1 {
            h += induced_inv[(j, l)] * pi[(j, l)];
        }
    }
    h /= n as f64 - 1.0;

    BoundaryGeometry {
        eta,
        second_fundamental: pi,
        induced,
        mean_curvature: h,
    }
}

/// Curvature-corrected oblique boundary operator
/// `η^a ∂_a u − (n−2) h_g u / 2` at a point of `{z_n = 0}`.
///
/// Under `g̃ = ξ^{4/(n−2)} g` it obeys the covariance law
/// `B_{g̃} u = ξ^{−n/(n−2)} B_g(ξ u)`.
pub fn conformal_boundary_operator(g: &dyn MetricField, u: &dyn ScalarField, z: &[f64]) -> f64 {
    let n = g.dim() as f64;
    let bdry = boundary_geometry(g, z);
    let grad = u.gradient(z);
    let mut s = 0.0;
    for a in 0..g.dim() {
        s += bdry.eta[a] * grad[a];
    }
    s - (n - 2.0) / 2.0 * bdry.mean_curvature * u.value(z)
}
