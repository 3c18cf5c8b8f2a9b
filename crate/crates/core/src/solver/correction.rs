//! The mode-2 correction solve sourced by a trace-free boundary tensor,
//! plus the cutoff profile and least-squares fitting against the tangent
//! family.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};

use crate::geometry::{least_squares_slope, ScalarField};
use crate::models::{Bubble, FamilyDirection, FamilyTangent};

use super::block::{assemble_azimuthal_block, AzimuthalGrid, BlockSphereFace};
use super::sparse::{solve_system, SolveReport};
use super::SolverError;

/// Smooth monotone cutoff: `1` for `ε·r ≤ δ′`, `0` for `ε·r ≥ 2δ′`, a
/// quintic transition in between (so the value at `ε·r = 1.5·δ′` is 1/2).
pub fn cutoff_chi(eps: f64, r: f64, delta_prime: f64) -> f64 {
    assert!(eps > 0.0 && delta_prime > 0.0 && r >= 0.0);
    let s = eps * r;
    if s <= delta_prime {
        1.0
    } else if s >= 2.0 * delta_prime {
        0.0
    } else {
        let t = (s - delta_prime) / delta_prime;
        1.0 - (6.0 * t.powi(5) - 15.0 * t.powi(4) + 10.0 * t.powi(3))
    }
}

/// Zeroth-order interior coefficient of the linearization at the
/// width-normalized profile, as a `(ρ, θ)` profile: `n(n+2)κ·U^{4/(n−2)}`.
pub fn interior_coefficient_profile(kappa: f64) -> impl Fn(f64, f64) -> f64 {
    let bubble = Bubble::width_normalized(3, kappa);
    move |rho: f64, theta: f64| {
        let y = [rho * theta.sin(), 0.0, rho * theta.cos()];
        15.0 * kappa * bubble.value(&y).powi(4)
    }
}

/// Flat-face Robin coefficient of the linearization, as a radial profile:
/// `n·U^{2/(n−2)}` on `{y₃ = 0}`.
pub fn face_coefficient_profile(kappa: f64) -> impl Fn(f64) -> f64 {
    let bubble = Bubble::width_normalized(3, kappa);
    move |rho: f64| {
        let y = [rho, 0.0, 0.0];
        3.0 * bubble.value(&y).powi(2)
    }
}

/// Unit-amplitude mode-2 source profile: the contraction of a trace-free
/// tensor with the tangential Hessian of the profile, times `−2·χ_ε·ε·y₃`,
/// evaluated on the `φ = 0` half plane.
pub fn correction_source_profile(kappa: f64, eps: f64, delta_prime: f64) -> impl Fn(f64, f64) -> f64 {
    let bubble = Bubble::width_normalized(3, kappa);
    move |rho: f64, theta: f64| {
        let y = [rho * theta.sin(), 0.0, rho * theta.cos()];
        let h = bubble.hessian(&y);
        -2.0 * cutoff_chi(eps, rho, delta_prime) * eps * y[2] * (h[(0, 0)] - h[(1, 1)])
    }
}

/// Least-squares decomposition of point samples over the tangent family
/// `J₁, …, J_{n−1}` (translations) and `J_n` (dilation).
#[derive(Debug, Clone)]
pub struct KernelFit {
    pub coefficients: Vec<f64>,
    /// `‖Ψ − Σ c_a J_a‖ / ‖Ψ‖` over the sample points.
    pub residual: f64,
    pub condition: f64,
}

pub fn fit_kernel_combination(
    points: &[Vec<f64>],
    values: &[f64],
    bubble: &Bubble,
) -> Result<KernelFit, SolverError> {
    assert_eq!(points.len(), values.len());
    let n = bubble.dim();
    let directions: Vec<FamilyDirection> = (0..n - 1)
        .map(FamilyDirection::Translation)
        .chain(std::iter::once(FamilyDirection::Dilation))
        .collect();
    let tangents: Vec<FamilyTangent> = directions
        .into_iter()
        .map(|d| FamilyTangent::new(bubble.clone(), d))
        .collect();
    let rows = points.len();
    let mut m = DMatrix::zeros(rows, n);
    for (r, p) in points.iter().enumerate() {
        for (c, t) in tangents.iter().enumerate() {
            m[(r, c)] = t.value(p);
        }
    }
    let v = DVector::from_column_slice(values);
    let gram = m.transpose() * &m;
    let rhs = m.transpose() * &v;
    let eig = nalgebra::SymmetricEigen::new(gram.clone());
    let lam_max = eig.eigenvalues.iter().cloned().fold(0.0f64, f64::max);
    let lam_min = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(lam_min > 1e-24 * lam_max) {
        return Err(SolverError::DegenerateFit {
            condition: (lam_max / lam_min.max(1e-300)).sqrt(),
        });
    }
    let coeffs = gram.lu().solve(&rhs).expect("well-conditioned Gram matrix");
    let res_vec = &m * &coeffs - &v;
    let vnorm = v.norm();
    let residual = if vnorm == 0.0 { 0.0 } else { res_vec.norm() / vnorm };
    Ok(KernelFit {
        coefficients: coeffs.iter().copied().collect(),
        residual,
        condition: (lam_max / lam_min).sqrt(),
    })
}

/// Outcome of the kernel-combination normalization: the value and the
/// tangential gradient at the origin after adding `Σ c_a J_a`.
#[derive(Debug, Clone)]
pub struct NormalizationReport {
    pub coefficients: [f64; 3],
    pub value_at_origin: f64,
    pub tangential_gradient: [f64; 2],
}

/// Fitted far-field exponents of the solution and its gradient over the
/// ring window `[R/4, R/2]`.
#[derive(Debug, Clone)]
pub struct DecayReport {
    pub amplitude_exponent: f64,
    pub gradient_exponent: f64,
    pub window: (f64, f64),
    pub rings: usize,
    pub truncation_warning: bool,
}

/// The solved correction field: a mode-2 profile `p(ρ, θ)` entering as
/// `p·(π₁₁ cos 2φ + π₁₂ sin 2φ)`, with the kernel-combination terms from
/// the normalization step.
#[derive(Debug)]
pub struct CorrectionSolve {
    pub grid: AzimuthalGrid,
    pub pi0: [[f64; 2]; 2],
    pub eps: f64,
    pub kappa: f64,
    /// `(n_rho + 1) × (n_theta + 1)`; row 0 is the origin ring (zero).
    pub profile: DMatrix<f64>,
    pub sup_norm: f64,
    pub solve: SolveReport,
    pub normalization: NormalizationReport,
    pub decay: DecayReport,
    kernel_terms: Vec<(f64, FamilyTangent)>,
}

impl CorrectionSolve {
    /// Bilinear interpolation of the profile at a half-space point, plus
    /// the normalization terms.
    pub fn evaluate(&self, y: &[f64; 3]) -> f64 {
        let rho_xy = (y[0] * y[0] + y[1] * y[1]).sqrt();
        let rho = (rho_xy * rho_xy + y[2] * y[2]).sqrt();
        let mut val = 0.0;
        if rho > 0.0 && rho <= self.grid.radius {
            let theta = rho_xy.atan2(y[2]).clamp(0.0, std::f64::consts::FRAC_PI_2);
            let fi = (rho / self.grid.h_rho()).min(self.grid.n_rho as f64 - 1e-12);
            let fj = (theta / self.grid.h_theta()).min(self.grid.n_theta as f64 - 1e-12);
            let (i0, j0) = (fi.floor() as usize, fj.floor() as usize);
            let (ti, tj) = (fi - i0 as f64, fj - j0 as f64);
            let p = &self.profile;
            let interp = (1.0 - ti) * (1.0 - tj) * p[(i0, j0)]
                + ti * (1.0 - tj) * p[(i0 + 1, j0)]
                + (1.0 - ti) * tj * p[(i0, j0 + 1)]
                + ti * tj * p[(i0 + 1, j0 + 1)];
            let phi_az = y[1].atan2(y[0]);
            let angular = self.pi0[0][0] * (2.0 * phi_az).cos() + self.pi0[0][1] * (2.0 * phi_az).sin();
            val = interp * angular;
        }
        for (c, t) in &self.kernel_terms {
            val += c * t.value(y);
        }
        val
    }
}

/// Solves the linearized equation with the trace-free boundary-tensor
/// source on the truncated half ball and applies the kernel-combination
/// normalization pinning the value and tangential gradient at the origin.
pub fn solve_correction_term(
    pi0: &[[f64; 2]; 2],
    eps: f64,
    kappa: f64,
    grid: &AzimuthalGrid,
    delta_prime: f64,
) -> Result<CorrectionSolve, SolverError> {
    let trace = pi0[0][0] + pi0[1][1];
    let asymmetry = (pi0[0][1] - pi0[1][0]).abs();
    let scale = pi0.iter().flatten().map(|v| v.abs()).fold(0.0f64, f64::max);
    if trace.abs() > 1e-12 * scale.max(1.0) || asymmetry > 1e-12 * scale.max(1.0) {
        return Err(SolverError::NotTraceFree { trace, asymmetry });
    }

    let c_int = interior_coefficient_profile(kappa);
    let c_bd = face_coefficient_profile(kappa);
    let source = correction_source_profile(kappa, eps, delta_prime);
    let zero1 = |_: f64| 0.0;
    let system = assemble_azimuthal_block(
        grid,
        2,
        &c_int,
        &c_bd,
        &source,
        &zero1,
        // the far field of the correction tends to a bounded angular
        // profile, so the zero-exponent closure is the matching one
        BlockSphereFace::Decay { exponent: 0.0 },
    )?;
    let (w, solve) = solve_system(&system.matrix, &system.rhs, 1e-12)?;

    let mut profile = DMatrix::zeros(grid.n_rho + 1, grid.n_theta + 1);
    for i in 1..=grid.n_rho {
        for j in 0..=grid.n_theta {
            profile[(i, j)] = w[grid.idx(2, i, j)];
        }
    }
    let amp = (pi0[0][0] * pi0[0][0] + pi0[0][1] * pi0[0][1]).sqrt();
    let sup_norm = profile.iter().map(|v| v.abs()).fold(0.0f64, f64::max) * amp;

    // normalization against the explicit tangent basis: solve the 3×3
    // system matching value and tangential gradient at the origin
    let bubble = Bubble::width_normalized(3, kappa);
    let tangents = [
        FamilyTangent::new(bubble.clone(), FamilyDirection::Translation(0)),
        FamilyTangent::new(bubble.clone(), FamilyDirection::Translation(1)),
        FamilyTangent::new(bubble.clone(), FamilyDirection::Dilation),
    ];
    let origin = [0.0, 0.0, 0.0];
    let mut m = Matrix3::zeros();
    for (c, t) in tangents.iter().enumerate() {
        let g = t.gradient(&origin);
        m[(0, c)] = t.value(&origin);
        m[(1, c)] = g[0];
        m[(2, c)] = g[1];
    }
    let h = grid.h_rho();
    let raw = CorrectionSolve {
        grid: *grid,
        pi0: *pi0,
        eps,
        kappa,
        profile,
        sup_norm,
        solve: solve.clone(),
        normalization: NormalizationReport {
            coefficients: [0.0; 3],
            value_at_origin: 0.0,
            tangential_gradient: [0.0; 2],
        },
        decay: DecayReport {
            amplitude_exponent: 0.0,
            gradient_exponent: 0.0,
            window: (0.0, 0.0),
            rings: 0,
            truncation_warning: false,
        },
        kernel_terms: Vec::new(),
    };
    let value0 = raw.evaluate(&origin);
    let d1 = (raw.evaluate(&[h, 0.0, 0.0]) - raw.evaluate(&[-h, 0.0, 0.0])) / (2.0 * h);
    let d2 = (raw.evaluate(&[0.0, h, 0.0]) - raw.evaluate(&[0.0, -h, 0.0])) / (2.0 * h);
    let target = Vector3::new(-value0, -d1, -d2);
    let coeffs = m.lu().solve(&target).expect("tangent basis is independent at the origin");
    let mut corrected = raw;
    corrected.kernel_terms = tangents
        .iter()
        .cloned()
        .zip(coeffs.iter().copied())
        .map(|(t, c)| (c, t))
        .collect();

    let achieved0 = corrected.evaluate(&origin);
    let a1 = (corrected.evaluate(&[h, 0.0, 0.0]) - corrected.evaluate(&[-h, 0.0, 0.0])) / (2.0 * h);
    let a2 = (corrected.evaluate(&[0.0, h, 0.0]) - corrected.evaluate(&[0.0, -h, 0.0])) / (2.0 * h);
    corrected.normalization = NormalizationReport {
        coefficients: [coeffs[0], coeffs[1], coeffs[2]],
        value_at_origin: achieved0,
        tangential_gradient: [a1, a2],
    };

    corrected.decay = decay_report(&corrected);
    Ok(corrected)
}

fn decay_report(sol: &CorrectionSolve) -> DecayReport {
    let grid = &sol.grid;
    let r = grid.radius;
    let window = (r / 4.0, r / 2.0);
    let mut amp_samples = Vec::new();
    let mut grad_samples = Vec::new();
    for i in 2..grid.n_rho - 1 {
        let rho = grid.rho(i);
        if rho < window.0 || rho > window.1 {
            continue;
        }
        let mut amp = 0.0f64;
        let mut grad = 0.0f64;
        for j in 0..=grid.n_theta {
            let p = sol.profile[(i, j)];
            amp = amp.max(p.abs());
            let dr = (sol.profile[(i + 1, j)] - sol.profile[(i - 1, j)]) / (2.0 * grid.h_rho());
            let dt = if j == 0 {
                (sol.profile[(i, 1)] - sol.profile[(i, 0)]) / grid.h_theta()
            } else if j == grid.n_theta {
                (sol.profile[(i, j)] - sol.profile[(i, j - 1)]) / grid.h_theta()
            } else {
                (sol.profile[(i, j + 1)] - sol.profile[(i, j - 1)]) / (2.0 * grid.h_theta())
            };
            let theta = grid.theta(j);
            let azim = if j == 0 { 0.0 } else { 2.0 * p / (rho * theta.sin()) };
            let mag = (dr * dr + (dt / rho) * (dt / rho) + azim * azim).sqrt();
            grad = grad.max(mag);
        }
        if amp > 0.0 {
            amp_samples.push((rho.ln(), amp.ln()));
        }
        if grad > 0.0 {
            grad_samples.push((rho.ln(), grad.ln()));
        }
    }
    let rings = amp_samples.len();
    DecayReport {
        amplitude_exponent: least_squares_slope(&amp_samples),
        gradient_exponent: least_squares_slope(&grad_samples),
        window,
        rings,
        truncation_warning: rings < 5 || r < 8.0,
    }
}
