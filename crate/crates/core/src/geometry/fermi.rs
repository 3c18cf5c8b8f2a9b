//! Audit of the boundary-normal expansion of a metric in normal gauge:
//! recovers the second fundamental form and mean curvature from slopes of
//! the tangential components along the inward normal, and estimates the
//! order of the remainder.

use nalgebra::DMatrix;

use super::curvature::boundary_geometry;
use super::metric::MetricField;

/// Result of auditing `g_{jl}(z̄ + t e_n) = δ_{jl} − 2 π_{jl} t + O(t²)`
/// at a boundary base point.
#[derive(Debug, Clone)]
pub struct FermiExpansionAudit {
    /// max deviation of `g_{nn}` from 1 and `g_{jn}` from 0 near the base point.
    pub gauge_max: f64,
    /// Normal slope of the tangential block divided by −2 (Richardson
    /// extrapolated); should match `second_fundamental`.
    pub slope_pi: DMatrix<f64>,
    /// `π_{jl}` from the boundary-geometry computation at the base point.
    pub second_fundamental: DMatrix<f64>,
    /// max entrywise difference between the two `π` estimates.
    pub pi_mismatch: f64,
    /// Normal slope of `√det g` divided by −(n−1); should match `mean_curvature`.
    pub slope_mean_curvature: f64,
    /// Mean curvature from the boundary-geometry computation.
    pub mean_curvature: f64,
    /// Fitted order `q` of the remainder `max_{jl} |g_{jl}(t) − δ_{jl} + 2π_{jl} t| ~ C t^q`.
    /// `+∞` when the tangential block is exactly linear in `t`.
    pub remainder_order: f64,
}

/// Audits the normal expansion of `g` at a boundary point (`z_n = 0`).
pub fn fermi_expansion_audit(g: &dyn MetricField, base: &[f64]) -> FermiExpansionAudit {
    let n = g.dim();
    assert!(base[n - 1].abs() < 1e-12, "audit base point must lie on the boundary");

    let at_normal = |t: f64| {
        let mut z = base.to_vec();
        z[n - 1] += t;
        g.value(&z)
    };

    // Gauge deviation on a small normal segment and tangential offsets.
    let mut gauge_max: f64 = 0.0;
    let probe = |z: &[f64]| {
        let gv = g.value(z);
        let mut m = (gv[(n - 1, n - 1)] - 1.0).abs();
        for j in 0..n - 1 {
            m = m.max(gv[(j, n - 1)].abs());
        }
        m
    };
    for k in 0..6 {
        let t = 0.1 * 0.5f64.powi(k);
        let mut z = base.to_vec();
        z[n - 1] += t;
        gauge_max = gauge_max.max(probe(&z));
        for j in 0..n - 1 {
            let mut zt = z.clone();
            zt[j] += t;
            gauge_max = gauge_max.max(probe(&zt));
        }
    }

    let bdry = boundary_geometry(g, base);
    let g0 = at_normal(0.0);

    // Richardson-extrapolated normal slope of the tangential block.
    let t0 = 1e-3;
    let s = |t: f64| (at_normal(t) - g0.clone()) / t;
    let slope_full = s(t0 / 2.0) * 2.0 - s(t0);
    let mut slope_pi = DMatrix::zeros(n - 1, n - 1);
    for j in 0..n - 1 {
        for l in 0..n - 1 {
            slope_pi[(j, l)] = slope_full[(j, l)] / -2.0;
        }
    }
    let pi_mismatch = (&slope_pi - &bdry.second_fundamental).abs().max();

    // Normal slope of √det g (same extrapolation).
    let v = |t: f64| at_normal(t).determinant().sqrt();
    let v0 = v(0.0);
    let sv = |t: f64| (v(t) - v0) / t;
    let slope_v = 2.0 * sv(t0 / 2.0) - sv(t0);
    let slope_mean_curvature = slope_v / -(n as f64 - 1.0);

    // Remainder order via a log-log slope fit over dyadic normal offsets.
    let mut logs: Vec<(f64, f64)> = Vec::new();
    for k in 0..6 {
        let t = 0.1 * 0.5f64.powi(k);
        let gt = at_normal(t);
        let mut r: f64 = 0.0;
        for j in 0..n - 1 {
            for l in 0..n - 1 {
                r = r.max(
                    (gt[(j, l)] - g0[(j, l)] + 2.0 * bdry.second_fundamental[(j, l)] * t).abs(),
                );
            }
        }
        if r > 1e-13 {
            logs.push((t.ln(), r.ln()));
        }
    }
    let remainder_order = if logs.len() < 3 {
        f64::INFINITY
    } else {
        least_squares_slope(&logs)
    };

    FermiExpansionAudit {
        gauge_max,
        slope_pi,
        second_fundamental: bdry.second_fundamental,
        pi_mismatch,
        slope_mean_curvature,
        mean_curvature: bdry.mean_curvature,
        remainder_order,
    }
}

/// Slope of the least-squares line through `(x, y)` samples.
pub fn least_squares_slope(samples: &[(f64, f64)]) -> f64 {
    let m = samples.len() as f64;
    let sx: f64 = samples.iter().map(|p| p.0).sum();
    let sy: f64 = samples.iter().map(|p| p.1).sum();
    let sxx: f64 = samples.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = samples.iter().map(|p| p.0 * p.1).sum();
    (m * sxy - sx * sy) / (m * sxx - sx * sx)
}
