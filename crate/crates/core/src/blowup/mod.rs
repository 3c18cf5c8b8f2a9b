//! Concentrating-sequence laboratory.
//!
//! A sequence member is a positive scalar field `u_i` on the fixed
//! half-ball chart `B⁺_δ = {|z| < δ, z_n ≥ 0}` peaking at the chart
//! origin with peak `M_i = u_i(0)`; the derived concentration scale is
//! `ε_i = M_i^{−2/(n−2)}`, so the peak-normalized rescaling
//! `v_i(y) = ε_i^{(n−2)/2} u_i(ε_i y)` satisfies `v_i(0) = 1`.
//!
//! Synthesis paths:
//! * the exact closed-form family on the flat chart (decreasing widths);
//! * multiplicatively modulated members (controlled non-solutions);
//! * Newton solves of the full nonlinear system on a boundary-flattened
//!   synthetic metric with prescribed trace-free second fundamental form,
//!   seeded and closed with the matched first-order model.
//!
//! The diagnostics live in two submodules: `averages` (hemisphere means,
//! the weighted radial profile `w(r) = r^{(n−2)/2} ū(r)` with certified
//! critical-point counting) and `audits` (profile convergence, punctured
//! peak bounds, Green-function sandwich bounds, and the weighted audit of
//! the first-order corrected profile).

mod audits;
mod averages;

pub use audits::{
    bubble_convergence_audit, default_radius_ladder, isolated_bound_constant, refined_approx_audit,
    simple_bounds_audit, BoundsAudit, BoundsRow, ConvergenceAudit, ConvergenceRow,
    IsolatedBoundConfig, IsolatedBoundReport, IsolatedBoundRow, ProfileTarget, RefinedApproxReport,
    RefinedApproxRow, REFINED_GROWTH_ALLOWANCE,
};
pub use averages::{
    full_sphere_area, harnack_ratio, simple_blowup_check, spherical_average_slope,
    spherical_average_w, w_critical_points, SimpleBlowupReport, SimpleCheckConfig, SimpleCheckRow,
};

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::geometry::{norm, FermiSyntheticMetric, MetricField, ScalarField};
use crate::models::{
    boundary_coefficient, flat_boundary_residual, flat_interior_residual, flat_laplacian,
    interior_coefficient, Bubble,
};
use crate::quad::{equator_rule, hemisphere_rule};
use crate::solver::{
    solve_correction_term, solve_curved_system, AzimuthalGrid, CorrectionSolve, CurvedNewtonConfig,
    LatticeSolution, SolverError,
};

/// Largest admitted multiplicative perturbation amplitude.
pub const MAX_PERTURBATION_AMPLITUDE: f64 = 0.1;

#[derive(Debug, Error)]
pub enum BlowupError {
    #[error("chart widths must be positive, finite and strictly decreasing")]
    WidthsNotDecreasing,
    #[error("a sequence needs at least {needed} members, got {got}")]
    TooFewMembers { needed: usize, got: usize },
    #[error("member {member} has non-positive peak {peak:.3e}")]
    NonpositivePeak { member: usize, peak: f64 },
    #[error("peaks must be strictly increasing across the sequence")]
    PeaksNotIncreasing,
    #[error("perturbation amplitude {amplitude} exceeds the admitted bound {bound}")]
    AmplitudeTooLarge { amplitude: f64, bound: f64 },
    #[error("dimension {n} unsupported here")]
    DimensionNotSupported { n: usize },
    #[error("correction data does not match the sequence: {what}")]
    CorrectionMismatch { what: String },
    #[error(transparent)]
    Solver(#[from] SolverError),
}

/// How a sequence was built; audits use this to pick evaluation paths.
#[derive(Debug, Clone)]
pub enum Construction {
    /// Exact closed-form members on the flat chart.
    ExactFamily,
    /// Exact members times `1 + a·sin(z₁)`.
    Modulated { amplitude: f64 },
    /// Newton-solved members on the synthetic metric with the given
    /// trace-free boundary tensor.
    CurvedChart { pi0: [[f64; 2]; 2] },
    /// Caller-supplied fields (controls); no monotonicity enforced.
    External,
}

/// How to perturb a synthesized sequence.
#[derive(Debug, Clone)]
pub enum Perturbation {
    None,
    /// Multiply each member by `1 + amplitude·sin(z₁)`.
    Multiplicative { amplitude: f64 },
    /// Solve the full system on the synthetic metric `δ − 2π₀ z₃` (n = 3).
    TraceFreeBoundary { pi0: [[f64; 2]; 2], grid: CurvedGridConfig },
}

/// Discretization parameters for the curved-chart synthesis path.
#[derive(Debug, Clone)]
pub struct CurvedGridConfig {
    /// Lattice spacing of the Newton solve (in rescaled chart units).
    pub spacing: f64,
    /// Radius of the polar grid for the correction-term solves; must cover
    /// the rescaled chart of the narrowest member.
    pub correction_radius: f64,
    pub correction_rho_cells: usize,
    pub correction_theta_cells: usize,
    pub newton_tolerance: f64,
}

impl CurvedGridConfig {
    /// Cell counts default to the calibrated polar resolution
    /// (`h_ρ = 0.125`, 24 angular cells) and tolerance to `1e-10`.
    pub fn new(spacing: f64, correction_radius: f64) -> Self {
        assert!(spacing > 0.0 && correction_radius > 0.0);
        Self {
            spacing,
            correction_radius,
            correction_rho_cells: (correction_radius / 0.125).round() as usize,
            correction_theta_cells: 24,
            newton_tolerance: 1e-10,
        }
    }
}

/// One member of a blow-up sequence.
pub struct BlowupMember {
    pub field: Box<dyn ScalarField>,
    /// Synthesis parameter: family width (exact paths) or chart scale `s`
    /// (curved path); equals `scale` for external fields.
    pub width: f64,
    /// Peak value `M_i = u_i(0)`.
    pub peak: f64,
    /// Derived concentration scale `ε_i = M_i^{−2/(n−2)}`.
    pub scale: f64,
    /// Chart rescaling factor of the Newton solve, when there is one.
    pub chart_scale: Option<f64>,
    /// Concentration scale used for the member's correction term
    /// (`s·(1−κ)`, exact bookkeeping of the synthesis).
    pub correction_eps: Option<f64>,
    pub lattice: Option<Arc<LatticeSolution>>,
    /// Final relative nonlinear residual of the Newton solve.
    pub solve_residual: Option<f64>,
}

/// A concentrating family on a fixed half-ball chart.
pub struct BlowupSequence {
    dim: usize,
    kappa: f64,
    chart_radius: f64,
    construction: Construction,
    members: Vec<BlowupMember>,
}

impl BlowupSequence {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn chart_radius(&self) -> f64 {
        self.chart_radius
    }

    pub fn construction(&self) -> &Construction {
        &self.construction
    }

    pub fn members(&self) -> &[BlowupMember] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, i: usize) -> &BlowupMember {
        &self.members[i]
    }

    pub fn peaks(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.peak).collect()
    }

    pub fn scales(&self) -> Vec<f64> {
        self.members.iter().map(|m| m.scale).collect()
    }

    /// Drops the first `count` members; audits are monotone under this.
    pub fn truncated(mut self, count: usize) -> Self {
        assert!(count < self.members.len(), "truncation must keep at least one member");
        self.members.drain(..count);
        self
    }
}

fn member_from_field(
    field: Box<dyn ScalarField>,
    width: f64,
    index: usize,
    n: usize,
) -> Result<BlowupMember, BlowupError> {
    let origin = vec![0.0; n];
    let peak = field.value(&origin);
    if !(peak.is_finite() && peak > 0.0) {
        return Err(BlowupError::NonpositivePeak { member: index, peak });
    }
    let scale = peak.powf(-2.0 / (n as f64 - 2.0));
    Ok(BlowupMember {
        field,
        width,
        peak,
        scale,
        chart_scale: None,
        correction_eps: None,
        lattice: None,
        solve_residual: None,
    })
}

fn check_widths(widths: &[f64]) -> Result<(), BlowupError> {
    if widths.is_empty() {
        return Err(BlowupError::TooFewMembers { needed: 1, got: 0 });
    }
    for w in widths {
        if !(w.is_finite() && *w > 0.0) {
            return Err(BlowupError::WidthsNotDecreasing);
        }
    }
    for pair in widths.windows(2) {
        if pair[1] >= pair[0] {
            return Err(BlowupError::WidthsNotDecreasing);
        }
    }
    Ok(())
}

fn check_peaks_increasing(members: &[BlowupMember]) -> Result<(), BlowupError> {
    for pair in members.windows(2) {
        if pair[1].peak <= pair[0].peak {
            return Err(BlowupError::PeaksNotIncreasing);
        }
    }
    Ok(())
}

/// Builds a sequence from the family widths, optionally perturbed.
///
/// Unperturbed members are exact solutions on the flat chart; the
/// curved-chart path produces Newton solves of the full system. Widths
/// must be strictly decreasing (concentration), and `0 < κ < 1`.
pub fn synth_blowup_sequence(
    n: usize,
    kappa: f64,
    chart_radius: f64,
    widths: &[f64],
    perturbation: &Perturbation,
) -> Result<BlowupSequence, BlowupError> {
    if !(3..=5).contains(&n) {
        return Err(BlowupError::DimensionNotSupported { n });
    }
    assert!(kappa > 0.0 && kappa < 1.0, "the family needs 0 < κ < 1");
    assert!(chart_radius > 0.0);
    check_widths(widths)?;

    let mut members = Vec::with_capacity(widths.len());
    let construction = match perturbation {
        Perturbation::None => {
            for (i, &eps) in widths.iter().enumerate() {
                let bubble = Bubble::centered(n, kappa, eps);
                members.push(member_from_field(Box::new(bubble), eps, i, n)?);
            }
            Construction::ExactFamily
        }
        Perturbation::Multiplicative { amplitude } => {
            if amplitude.abs() > MAX_PERTURBATION_AMPLITUDE {
                return Err(BlowupError::AmplitudeTooLarge {
                    amplitude: *amplitude,
                    bound: MAX_PERTURBATION_AMPLITUDE,
                });
            }
            for (i, &eps) in widths.iter().enumerate() {
                let field = ModulatedBubble {
                    bubble: Bubble::centered(n, kappa, eps),
                    amplitude: *amplitude,
                };
                members.push(member_from_field(Box::new(field), eps, i, n)?);
            }
            Construction::Modulated { amplitude: *amplitude }
        }
        Perturbation::TraceFreeBoundary { pi0, grid } => {
            if n != 3 {
                return Err(BlowupError::DimensionNotSupported { n });
            }
            for (i, &s) in widths.iter().enumerate() {
                members.push(curved_member(kappa, chart_radius, s, pi0, grid, i)?);
            }
            Construction::CurvedChart { pi0: *pi0 }
        }
    };
    check_peaks_increasing(&members)?;
    Ok(BlowupSequence { dim: n, kappa, chart_radius, construction, members })
}

/// Wraps caller-supplied fields as a sequence (controls and external
/// data). Peak monotonicity is deliberately not enforced here.
pub fn from_fields(
    n: usize,
    kappa: f64,
    chart_radius: f64,
    fields: Vec<Box<dyn ScalarField>>,
) -> Result<BlowupSequence, BlowupError> {
    if !(3..=5).contains(&n) {
        return Err(BlowupError::DimensionNotSupported { n });
    }
    assert!(chart_radius > 0.0);
    if fields.is_empty() {
        return Err(BlowupError::TooFewMembers { needed: 1, got: 0 });
    }
    let mut members = Vec::with_capacity(fields.len());
    for (i, field) in fields.into_iter().enumerate() {
        assert_eq!(field.dim(), n, "field dimension mismatch");
        let mut member = member_from_field(field, f64::NAN, i, n)?;
        member.width = member.scale;
        members.push(member);
    }
    Ok(BlowupSequence {
        dim: n,
        kappa,
        chart_radius,
        construction: Construction::External,
        members,
    })
}

/// One curved-chart member: correction solve at the bookkept scale, then
/// a Newton solve on the dilated metric, seeded and closed with the
/// matched model (unit-width profile plus rescaled correction).
fn curved_member(
    kappa: f64,
    chart_radius: f64,
    s: f64,
    pi0: &[[f64; 2]; 2],
    grid: &CurvedGridConfig,
    index: usize,
) -> Result<BlowupMember, BlowupError> {
    let lambda = 1.0 - kappa;
    let eps_c = s * lambda;
    let needed = (chart_radius / s + 2.0 * grid.spacing) / lambda;
    if grid.correction_radius < needed {
        return Err(BlowupError::CorrectionMismatch {
            what: format!(
                "correction grid radius {:.3} does not cover the rescaled chart (needs ≥ {:.3})",
                grid.correction_radius, needed
            ),
        });
    }
    let az = AzimuthalGrid::new(
        grid.correction_radius,
        grid.correction_rho_cells,
        grid.correction_theta_cells,
    );
    let corr = Arc::new(solve_correction_term(pi0, eps_c, kappa, &az, chart_radius)?);

    let pi_mat = DMatrix::from_fn(2, 2, |r, c| pi0[r][c]);
    let base = FermiSyntheticMetric::new(3, pi_mat);
    let dilated = DilatedMetric { base: &base, factor: s };

    let unit = Bubble::centered(3, kappa, 1.0);
    let corr_data = corr.clone();
    let model = move |x: &[f64]| {
        let arg = [x[0] / lambda, x[1] / lambda, x[2] / lambda];
        unit.value(x) + lambda.powf(-0.5) * corr_data.evaluate(&arg)
    };

    let mut config = CurvedNewtonConfig::new(
        chart_radius / s,
        grid.spacing,
        -interior_coefficient(3, kappa),
        boundary_coefficient(3),
    );
    config.tolerance = grid.newton_tolerance;
    let sol = Arc::new(solve_curved_system(&dilated, &model, &model, &config)?);

    let field = ChartSolutionField {
        lattice: sol.clone(),
        chart_scale: s,
        kappa,
        correction: corr.clone(),
    };
    let peak = field.value(&[0.0, 0.0, 0.0]);
    if !(peak.is_finite() && peak > 0.0) {
        return Err(BlowupError::NonpositivePeak { member: index, peak });
    }
    let scale = peak.powf(-2.0);
    Ok(BlowupMember {
        field: Box::new(field),
        width: s,
        peak,
        scale,
        chart_scale: Some(s),
        correction_eps: Some(eps_c),
        lattice: Some(sol),
        solve_residual: None,
    }
    .with_solve_residual())
}

impl BlowupMember {
    fn with_solve_residual(mut self) -> Self {
        self.solve_residual = self.lattice.as_ref().map(|l| l.residual);
        self
    }
}

/// The metric `ĝ(y) = g(s·y)`: the chart dilation that carries the
/// nonlinear system to order-one scale.
struct DilatedMetric<'a> {
    base: &'a dyn MetricField,
    factor: f64,
}

impl DilatedMetric<'_> {
    fn pulled(&self, z: &[f64]) -> Vec<f64> {
        z.iter().map(|c| c * self.factor).collect()
    }
}

impl MetricField for DilatedMetric<'_> {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, z: &[f64]) -> DMatrix<f64> {
        self.base.value(&self.pulled(z))
    }

    fn first_derivative(&self, z: &[f64]) -> Vec<DMatrix<f64>> {
        self.base
            .first_derivative(&self.pulled(z))
            .into_iter()
            .map(|m| m * self.factor)
            .collect()
    }

    fn second_derivative(&self, z: &[f64]) -> Vec<Vec<DMatrix<f64>>> {
        let f2 = self.factor * self.factor;
        self.base
            .second_derivative(&self.pulled(z))
            .into_iter()
            .map(|row| row.into_iter().map(|m| m * f2).collect())
            .collect()
    }

    fn fermi_declared(&self) -> bool {
        self.base.fermi_declared()
    }
}

/// Exact family member times `1 + a·sin(z₁)`, with analytic derivatives.
pub struct ModulatedBubble {
    pub bubble: Bubble,
    pub amplitude: f64,
}

impl ScalarField for ModulatedBubble {
    fn dim(&self) -> usize {
        self.bubble.dim()
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.bubble.value(z) * (1.0 + self.amplitude * z[0].sin())
    }

    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        let u = self.bubble.value(z);
        let f = 1.0 + self.amplitude * z[0].sin();
        let mut g = self.bubble.gradient(z) * f;
        g[0] += u * self.amplitude * z[0].cos();
        g
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let u = self.bubble.value(z);
        let gu = self.bubble.gradient(z);
        let f = 1.0 + self.amplitude * z[0].sin();
        let df = self.amplitude * z[0].cos();
        let d2f = -self.amplitude * z[0].sin();
        let mut h = self.bubble.hessian(z) * f;
        for a in 0..n {
            h[(a, 0)] += gu[a] * df;
            h[(0, a)] += gu[a] * df;
        }
        h[(0, 0)] += u * d2f;
        h
    }
}

/// Sum of closed-form family members (multi-peak controls).
pub struct SuperposedBubbles {
    pub terms: Vec<Bubble>,
}

impl ScalarField for SuperposedBubbles {
    fn dim(&self) -> usize {
        self.terms[0].dim()
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.terms.iter().map(|b| b.value(z)).sum()
    }

    fn gradient(&self, z: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(self.dim());
        for b in &self.terms {
            g += b.gradient(z);
        }
        g
    }

    fn hessian(&self, z: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        for b in &self.terms {
            h += b.hessian(z);
        }
        h
    }
}

/// Constant field (degenerate no-concentration control).
pub struct ConstantField {
    pub dim: usize,
    pub level: f64,
}

impl ScalarField for ConstantField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, _z: &[f64]) -> f64 {
        self.level
    }

    fn gradient(&self, _z: &[f64]) -> DVector<f64> {
        DVector::zeros(self.dim)
    }

    fn hessian(&self, _z: &[f64]) -> DMatrix<f64> {
        DMatrix::zeros(self.dim, self.dim)
    }
}

/// Radial profile `peak·(1 + |z|/scale)^{exponent}` — decay-rate controls.
pub struct RadialProfileField {
    pub dim: usize,
    pub peak: f64,
    pub scale: f64,
    pub exponent: f64,
}

impl ScalarField for RadialProfileField {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, z: &[f64]) -> f64 {
        self.peak * (1.0 + norm(z) / self.scale).powf(self.exponent)
    }
}

/// A Newton-solved member presented as a chart field: multilinear
/// interpolation of the lattice values inside, the matched sphere-face
/// model on incomplete rim cells.
pub struct ChartSolutionField {
    lattice: Arc<LatticeSolution>,
    chart_scale: f64,
    kappa: f64,
    correction: Arc<CorrectionSolve>,
}

impl ChartSolutionField {
    pub fn lattice(&self) -> &Arc<LatticeSolution> {
        &self.lattice
    }

    fn model_w(&self, y: &[f64]) -> f64 {
        let lambda = 1.0 - self.kappa;
        let unit = Bubble::centered(3, self.kappa, 1.0);
        let arg = [y[0] / lambda, y[1] / lambda, y[2] / lambda];
        unit.value(y) + lambda.powf(-0.5) * self.correction.evaluate(&arg)
    }
}

impl ScalarField for ChartSolutionField {
    fn dim(&self) -> usize {
        3
    }

    fn value(&self, z: &[f64]) -> f64 {
        let s = self.chart_scale;
        let y = [z[0] / s, z[1] / s, z[2] / s];
        let w = self.lattice.interpolate(&y).unwrap_or_else(|| self.model_w(&y));
        s.powf(-0.5) * w
    }
}

/// Peak-normalized rescaling `v(y) = ε^{(n−2)/2} u(ε y)`.
pub struct RescaledField<'a> {
    inner: &'a dyn ScalarField,
    eps: f64,
}

impl<'a> RescaledField<'a> {
    pub fn eps(&self) -> f64 {
        self.eps
    }

    fn m(&self) -> f64 {
        (self.inner.dim() as f64 - 2.0) / 2.0
    }

    fn pulled(&self, y: &[f64]) -> Vec<f64> {
        y.iter().map(|c| c * self.eps).collect()
    }
}

/// Rescales `u` about the chart origin with concentration scale `eps`.
pub fn rescale(u: &dyn ScalarField, eps: f64) -> RescaledField<'_> {
    assert!(eps > 0.0);
    RescaledField { inner: u, eps }
}

impl ScalarField for RescaledField<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, y: &[f64]) -> f64 {
        self.eps.powf(self.m()) * self.inner.value(&self.pulled(y))
    }

    fn gradient(&self, y: &[f64]) -> DVector<f64> {
        self.eps.powf(self.m() + 1.0) * self.inner.gradient(&self.pulled(y))
    }

    fn hessian(&self, y: &[f64]) -> DMatrix<f64> {
        self.eps.powf(self.m() + 2.0) * self.inner.hessian(&self.pulled(y))
    }
}

/// Relative pointwise residual scan of a sequence.
#[derive(Debug, Clone)]
pub struct ResidualScan {
    pub rows: Vec<ResidualRow>,
}

#[derive(Debug, Clone)]
pub struct ResidualRow {
    pub member: usize,
    pub interior_sup: f64,
    pub boundary_sup: f64,
    /// `true` when the member is a lattice solve and the reported value is
    /// its relative nonlinear residual rather than a pointwise scan.
    pub discrete: bool,
}

/// Sup over a deterministic chart sample of the relative interior and
/// boundary residuals. Exact members sit at round-off; modulated members
/// sit at the perturbation amplitude. Newton members report their
/// discrete relative residual.
pub fn sequence_residuals(seq: &BlowupSequence, quad_order: usize) -> ResidualScan {
    let n = seq.dim;
    let kappa = seq.kappa;
    let k_abs = interior_coefficient(n, kappa).abs();
    let c_face = boundary_coefficient(n);
    let p_int = (n as f64 + 2.0) / (n as f64 - 2.0);
    let p_face = n as f64 / (n as f64 - 2.0);
    let interior_dirs: Vec<Vec<f64>> = hemisphere_rule(n, 1.0, quad_order)
        .points
        .into_iter()
        .filter(|p| p[n - 1] > 0.1)
        .collect();
    let face_dirs = equator_rule(n, 1.0, quad_order).points;

    let mut rows = Vec::with_capacity(seq.len());
    for (i, member) in seq.members.iter().enumerate() {
        if let Some(res) = member.solve_residual {
            rows.push(ResidualRow {
                member: i,
                interior_sup: res,
                boundary_sup: res,
                discrete: true,
            });
            continue;
        }
        let u = &*member.field;
        let mut shells: Vec<f64> = (0..12)
            .map(|j| {
                let t = j as f64 / 11.0;
                seq.chart_radius * 0.95 * (0.02f64 / 0.95).powf(1.0 - t)
            })
            .collect();
        for f in [0.5, 1.0, 2.0, 4.0] {
            let r = f * member.scale;
            if r < 0.95 * seq.chart_radius {
                shells.push(r);
            }
        }
        let mut interior_sup = 0.0f64;
        let mut boundary_sup = 0.0f64;
        for &r in &shells {
            for dir in &interior_dirs {
                let z: Vec<f64> = dir.iter().map(|c| c * r).collect();
                let val = u.value(&z);
                let num = flat_interior_residual(u, kappa, &z).abs();
                let den = flat_laplacian(u, &z).abs() + k_abs * val.powf(p_int) + val.abs();
                interior_sup = interior_sup.max(num / den.max(1e-300));
            }
            for dir in &face_dirs {
                let z: Vec<f64> = dir.iter().map(|c| c * r).collect();
                let val = u.value(&z);
                let dn = u.gradient(&z)[n - 1].abs();
                let num = flat_boundary_residual(u, &z).abs();
                let den = dn + c_face * val.powf(p_face) + val.abs();
                boundary_sup = boundary_sup.max(num / den.max(1e-300));
            }
        }
        rows.push(ResidualRow { member: i, interior_sup, boundary_sup, discrete: false });
    }
    ResidualScan { rows }
}
