//! Mass-type quantities: the flux integral of an asymptotically flat
//! half-space chart, the boundary flux integral built from a pole field,
//! the defect relation between the two surface readings, and the sign
//! experiment for blow-up limit profiles.

use super::{
    pohozaev_P, HalfBallQuadrature, PohozaevError, QUADRATURE_TOLERANCE,
};
use crate::geometry::{MetricField, ScalarField};
use crate::models::{boundary_coefficient, interior_coefficient};
use crate::quad::{equator_rule, hemisphere_rule};
use crate::report::{CheckReport, Ladder, NamedValue, Verdict};
use nalgebra::DMatrix;
use serde::Serialize;

/// Coordinate-deviation suprema below this are treated as exactly flat.
pub const FLATNESS_FLOOR: f64 = 1e-13;

/// Defects below this are attributed to the quadrature floor and excluded
/// from rate fits.
pub const DEFECT_FLOOR: f64 = 1e-9;

/// Minimum coefficient of determination (in log coordinates) for the
/// defect-rate fit to count as verified.
pub const RELATION_R2_THRESHOLD: f64 = 0.99;

/// Largest admissible relative change between the last two scaled fields
/// of a sequence before the limit profile is trusted.
pub const SEQUENCE_TOLERANCE: f64 = 0.05;

/// A liminf estimate below minus this flags a sign-restriction violation.
pub const LIMINF_TOLERANCE: f64 = 1e-3;

/// Least-squares affine fit `y ≈ intercept + slope · x`.
fn affine_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - slope * mx, slope)
}

/// Coefficient of determination of the affine fit.
fn r_squared(xs: &[f64], ys: &[f64], intercept: f64, slope: f64) -> f64 {
    let n = ys.len() as f64;
    let my = ys.iter().sum::<f64>() / n;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let fit = intercept + slope * x;
        ss_res += (y - fit) * (y - fit);
        ss_tot += (y - my) * (y - my);
    }
    if ss_tot > 0.0 {
        1.0 - ss_res / ss_tot
    } else {
        1.0
    }
}

fn require_decreasing(values: &[f64]) -> Result<(), PohozaevError> {
    for w in values.windows(2) {
        if w[1] >= w[0] {
            return Err(PohozaevError::LadderNotDecreasing);
        }
    }
    Ok(())
}

/// Flux-integral reading of the mass of an asymptotically flat chart,
/// with its extrapolation and a decay audit.
#[derive(Debug, Clone, Serialize)]
pub struct MassReport {
    pub dim: usize,
    /// Evaluation radii, strictly increasing.
    pub radii: Vec<f64>,
    /// Flux integral at each radius.
    pub partial_masses: Vec<f64>,
    /// Hemisphere contribution to each partial mass.
    pub surface_parts: Vec<f64>,
    /// Equatorial-sphere contribution to each partial mass.
    pub edge_parts: Vec<f64>,
    /// Affine extrapolation of the partials in `1/R`.
    pub mass: f64,
    /// Largest residual of the extrapolation fit.
    pub error_bar: f64,
    /// Fitted decay rate `q` of the coordinate deviation, when measurable.
    pub decay_order: Option<f64>,
    /// True when the deviation decays faster than `(n−2)/2`, or the chart
    /// is exactly flat at the audited nodes.
    pub decay_verified: bool,
    /// Radii of an attached pole-flux ladder (see [`attach_flux_ladder`]).
    pub flux_radii: Vec<f64>,
    pub flux_values: Vec<f64>,
    /// Extrapolated small-radius limit of the pole flux.
    pub flux_limit: Option<f64>,
}

/// Integrates the mass flux of `ghat` over the half-spheres at `radii` and
/// extrapolates `R → ∞` by an affine fit in `1/R`:
///
/// `m(R) = ∫_{S⁺_R} Σ_{a,b} (∂_b ĝ_ab − ∂_a ĝ_bb) (y_a/|y|) dσ
///        + ∫_{∂D_R} Σ_{j<n} ĝ_nj (y_j/|y|) dσ̄`.
///
/// The decay audit measures `sup (|ĝ−δ| + R|∂ĝ| + R²|∂²ĝ|)` on a node
/// subsample at each radius and fits its decay rate; a rate at or below
/// `(n−2)/2` leaves the mass reading unverified (flagged, not hidden).
pub fn adm_mass(
    ghat: &dyn MetricField,
    radii: &[f64],
    order: usize,
) -> Result<MassReport, PohozaevError> {
    if radii.len() < 2 {
        return Err(PohozaevError::TooFewEntries {
            needed: 2,
            got: radii.len(),
        });
    }
    for w in radii.windows(2) {
        if w[1] <= w[0] {
            return Err(PohozaevError::RadiiNotIncreasing);
        }
    }
    let n = ghat.dim();
    let mut partial_masses = Vec::with_capacity(radii.len());
    let mut surface_parts = Vec::with_capacity(radii.len());
    let mut edge_parts = Vec::with_capacity(radii.len());
    let mut deviations = Vec::with_capacity(radii.len());
    for &r in radii {
        let hemi = hemisphere_rule(n, r, order);
        let eq = equator_rule(n, r, order);

        let mut surface = 0.0;
        for (z, w) in hemi.points.iter().zip(&hemi.weights) {
            let dg = ghat.first_derivative(z);
            let mut s = 0.0;
            for a in 0..n {
                let mut t = 0.0;
                for b in 0..n {
                    t += dg[b][(a, b)] - dg[a][(b, b)];
                }
                s += t * z[a] / r;
            }
            surface += w * s;
        }
        let mut edge = 0.0;
        for (z, w) in eq.points.iter().zip(&eq.weights) {
            let gm = ghat.value(z);
            let mut s = 0.0;
            for j in 0..n - 1 {
                s += gm[(n - 1, j)] * z[j] / r;
            }
            edge += w * s;
        }
        surface_parts.push(surface);
        edge_parts.push(edge);
        partial_masses.push(surface + edge);

        let stride = (hemi.points.len() / 24).max(1);
        let mut dev = 0.0f64;
        for z in hemi.points.iter().step_by(stride) {
            let gm = ghat.value(z);
            let dg = ghat.first_derivative(z);
            let d2g = ghat.second_derivative(z);
            let mut d0 = 0.0f64;
            let mut d1 = 0.0f64;
            let mut d2 = 0.0f64;
            for a in 0..n {
                for b in 0..n {
                    let delta = if a == b { 1.0 } else { 0.0 };
                    d0 = d0.max((gm[(a, b)] - delta).abs());
                    for c in 0..n {
                        d1 = d1.max(dg[c][(a, b)].abs());
                        for d in 0..n {
                            d2 = d2.max(d2g[c][d][(a, b)].abs());
                        }
                    }
                }
            }
            dev = dev.max(d0 + r * d1 + r * r * d2);
        }
        deviations.push(dev);
    }

    let xs: Vec<f64> = radii.iter().map(|r| 1.0 / r).collect();
    let (mass, slope) = affine_fit(&xs, &partial_masses);
    let mut error_bar = 0.0f64;
    for (x, p) in xs.iter().zip(&partial_masses) {
        error_bar = error_bar.max((p - (mass + slope * x)).abs());
    }

    let log_pts: Vec<(f64, f64)> = radii
        .iter()
        .zip(&deviations)
        .filter(|(_, d)| **d > FLATNESS_FLOOR)
        .map(|(r, d)| (r.ln(), d.ln()))
        .collect();
    let (decay_order, decay_verified) = if log_pts.is_empty() {
        // Exactly flat at every audited node.
        (None, true)
    } else if log_pts.len() < 2 {
        (None, false)
    } else {
        let lx: Vec<f64> = log_pts.iter().map(|p| p.0).collect();
        let ly: Vec<f64> = log_pts.iter().map(|p| p.1).collect();
        let (_, s) = affine_fit(&lx, &ly);
        let q = -s;
        (Some(q), q > (n as f64 - 2.0) / 2.0)
    };

    Ok(MassReport {
        dim: n,
        radii: radii.to_vec(),
        partial_masses,
        surface_parts,
        edge_parts,
        mass,
        error_bar,
        decay_order,
        decay_verified,
        flux_radii: Vec::new(),
        flux_values: Vec::new(),
        flux_limit: None,
    })
}

/// Attaches a pole-flux ladder `(ρ_k, I_k)` to a mass report and records
/// its affine small-`ρ` extrapolation, so the two surface readings of the
/// mass can be compared side by side.
pub fn attach_flux_ladder(report: &mut MassReport, rhos: &[f64], values: &[f64]) {
    assert_eq!(rhos.len(), values.len(), "flux ladder length mismatch");
    report.flux_radii = rhos.to_vec();
    report.flux_values = values.to_vec();
    report.flux_limit = if rhos.len() >= 2 {
        Some(affine_fit(rhos, values).0)
    } else {
        values.last().copied()
    };
}

/// The boundary flux integral of a three-dimensional pole field.
#[derive(Debug, Clone, Serialize)]
pub struct FluxReport {
    pub radius: f64,
    pub value: f64,
    /// `8 ∫_{S⁺_ρ} Σ_a (|z|⁻¹ ∂_a G − ∂_a|z|⁻¹ · G)(z_a/|z|) dσ`.
    pub pole_pairing: f64,
    /// `−12 ∫_{S⁺_ρ} Σ_{j,l<3} |z|⁻⁵ z_3 z_j z_l π_jl dσ`.
    pub second_fundamental_term: f64,
    pub quad_error: f64,
    pub quad_warning: bool,
}

/// Evaluates the boundary flux integral at radius `rho` for a field `G`
/// with a `|z|⁻¹`-type pole at the origin and the flat-boundary trace
/// tensor `pi0` (2×2, evaluated at the pole). Defined on
/// three-dimensional charts only.
#[allow(non_snake_case)]
pub fn brendle_chen_I(
    green: &dyn ScalarField,
    pi0: &DMatrix<f64>,
    rho: f64,
    order: usize,
) -> Result<FluxReport, PohozaevError> {
    let n = green.dim();
    if n != 3 {
        return Err(PohozaevError::UnsupportedDimension { n });
    }
    assert_eq!((pi0.nrows(), pi0.ncols()), (2, 2), "pi0 must be 2x2");

    let eval = |ord: usize| -> (f64, f64) {
        let hemi = hemisphere_rule(3, rho, ord);
        let mut pole = 0.0;
        let mut pi_term = 0.0;
        for (z, w) in hemi.points.iter().zip(&hemi.weights) {
            let gval = green.value(z);
            let grad = green.gradient(z);
            let mut s = 0.0;
            for a in 0..3 {
                // ∂_a |z|⁻¹ = −z_a |z|⁻³ on the sphere |z| = ρ.
                let da_rinv = -z[a] / rho.powi(3);
                s += (grad[a] / rho - da_rinv * gval) * z[a] / rho;
            }
            pole += w * 8.0 * s;
            let mut q = 0.0;
            for j in 0..2 {
                for l in 0..2 {
                    q += z[j] * z[l] * pi0[(j, l)];
                }
            }
            pi_term += w * (-12.0) * z[2] * q / rho.powi(5);
        }
        (pole, pi_term)
    };
    let (pole_pairing, second_fundamental_term) = eval(order);
    let (fp, fs) = eval(order * 2);
    let quad_error = (pole_pairing - fp)
        .abs()
        .max((second_fundamental_term - fs).abs());
    Ok(FluxReport {
        radius: rho,
        value: pole_pairing + second_fundamental_term,
        pole_pairing,
        second_fundamental_term,
        quad_error,
        quad_warning: quad_error > QUADRATURE_TOLERANCE,
    })
}

/// Tabulates the defect `P'(G,ρ) + I(ρ)/16` over a decreasing radius
/// ladder and audits its decay against the model rate `C·ρ|log ρ|`.
///
/// The envelope constant is `max |defect| / (ρ|log ρ|)` over the ladder —
/// a bound by construction. The rate fit regresses `log |defect|` on
/// `log(ρ|log ρ|)`; its coefficient of determination (in those log
/// coordinates) must exceed the pinned threshold. Defects at the
/// quadrature floor across the whole ladder pass with a note and no fit.
#[allow(non_snake_case)]
pub fn check_P_I_relation(
    green: &dyn ScalarField,
    pi0: &DMatrix<f64>,
    rhos: &[f64],
    order: usize,
) -> Result<CheckReport, PohozaevError> {
    if rhos.len() < 3 {
        return Err(PohozaevError::TooFewEntries {
            needed: 3,
            got: rhos.len(),
        });
    }
    require_decreasing(rhos)?;
    if green.dim() != 3 {
        return Err(PohozaevError::UnsupportedDimension { n: green.dim() });
    }

    let mut ladder = Ladder::new(&["rho", "p_prime", "flux_i", "defect"]);
    let mut envelope = 0.0f64;
    let mut log_x = Vec::new();
    let mut log_d = Vec::new();
    for &rho in rhos {
        let rule = HalfBallQuadrature::product_gauss(3, rho, order);
        let p = pohozaev_P(green, rho, 0.0, 0.0, &rule)?;
        let flux = brendle_chen_I(green, pi0, rho, order)?;
        let defect = p.p_prime + flux.value / 16.0;
        ladder.push(vec![rho, p.p_prime, flux.value, defect]);
        let x = rho * rho.ln().abs();
        envelope = envelope.max(defect.abs() / x);
        if defect.abs() > DEFECT_FLOOR {
            log_x.push(x.ln());
            log_d.push(defect.abs().ln());
        }
    }

    let mut computed = vec![NamedValue::new("envelope_constant", envelope)];
    let (verdict, note) = if log_d.len() < 2 {
        (
            Verdict::Pass,
            "defect sits at the quadrature floor across the ladder; \
             envelope constant reported, rate fit skipped"
                .to_string(),
        )
    } else {
        let (intercept, slope) = affine_fit(&log_x, &log_d);
        let r2 = r_squared(&log_x, &log_d, intercept, slope);
        computed.push(NamedValue::new("fit_constant", intercept.exp()));
        computed.push(NamedValue::new("fit_log_slope", slope));
        computed.push(NamedValue::new("fit_r2", r2));
        if !r2.is_finite() {
            (
                Verdict::Indeterminate,
                "rate fit degenerate: no usable spread in the defect ladder".to_string(),
            )
        } else if r2 > RELATION_R2_THRESHOLD {
            (
                Verdict::Pass,
                format!(
                    "defect follows the modeled rate: log-coordinate fit of |defect| \
                     against rho*|log rho| has R^2 = {r2:.6}"
                ),
            )
        } else {
            (
                Verdict::Fail,
                format!(
                    "defect does not follow the modeled rate: log-coordinate R^2 = {r2:.6} \
                     is at or below {RELATION_R2_THRESHOLD}"
                ),
            )
        }
    };

    let inputs: Vec<String> = std::iter::once(format!("order={order}"))
        .chain(rhos.iter().map(|r| format!("rho={r:.17e}")))
        .chain(
            pi0.iter()
                .map(|v| format!("pi0={v:.17e}")),
        )
        .collect();
    Ok(CheckReport::evaluate(
        "pole-flux-defect-rate",
        "surface reading and flux reading agree to order rho*|log rho|",
        &inputs,
        computed,
        Vec::new(),
        1.0 - RELATION_R2_THRESHOLD,
    )
    .with_verdict(verdict)
    .with_note(&note)
    .with_ladder(ladder))
}

/// A peaking sequence for the sign experiment: fields on a fixed chart
/// with strictly increasing origin values, the widths that produced
/// them, and the interior parameter of the family (which fixes the
/// reaction constants used in `P`). The scaling bound
/// `|P(u_i,r)| ≤ C ε_i r` is tabulated alongside.
pub struct SignSequence<'a> {
    pub eps: Vec<f64>,
    pub fields: Vec<&'a dyn ScalarField>,
    pub kappa: f64,
}

/// Input to the sign experiment: either a peaking sequence whose scaled
/// tail defines the limit profile (with a convergence gate), or a
/// synthetic limit profile supplied directly (evaluated away from its
/// pole only, so fields like `|z|⁻¹ + A` are admissible).
pub enum SignInput<'a> {
    Sequence(SignSequence<'a>),
    Profile(&'a dyn ScalarField),
}

/// Estimates the small-radius liminf of `P'` at the blow-up limit profile
/// and flags a violation when it is negative.
///
/// For sequence input the limit reading at radius `r` is
/// `M_last² · P(u_last, r)` with `M_i` the origin value of `u_i`: the
/// surface part of `P` is quadratic, so `M² P'(u) = P'(M u)` tracks the
/// limit profile, while the scaled reaction terms decay like a negative
/// power of `M` and drop out. Reading `P'` directly off the scaled last
/// member would instead inherit an `O(ε_last/r²)` pole-offset artifact
/// at small radii. The experiment aborts if the last two scaled fields
/// still differ beyond the pinned sequence tolerance on a probe sphere
/// at the smallest ladder radius (where the tail settles last).
/// The liminf estimate is the intercept of an affine trend fit of the
/// readings over the decreasing radius ladder — never a single-point
/// reading.
pub fn sign_restriction_experiment(
    input: &SignInput,
    radii: &[f64],
    order: usize,
) -> Result<CheckReport, PohozaevError> {
    if radii.len() < 3 {
        return Err(PohozaevError::TooFewEntries {
            needed: 3,
            got: radii.len(),
        });
    }
    require_decreasing(radii)?;

    let seq: Option<&SignSequence> = match input {
        SignInput::Profile(_) => None,
        SignInput::Sequence(seq) => {
            let m = seq.fields.len();
            if m < 2 || seq.eps.len() != m {
                return Err(PohozaevError::TooFewEntries {
                    needed: 2,
                    got: m.min(seq.eps.len()),
                });
            }
            require_decreasing(&seq.eps)?;
            let n = seq.fields[0].dim();
            for f in &seq.fields {
                if f.dim() != n {
                    return Err(PohozaevError::DimensionMismatch {
                        field: f.dim(),
                        rule: n,
                    });
                }
            }
            let origin = vec![0.0; n];
            let peaks: Vec<f64> = seq.fields.iter().map(|f| f.value(&origin)).collect();
            for w in peaks.windows(2) {
                if w[1] <= w[0] {
                    return Err(PohozaevError::DegenerateFit {
                        reason: "origin values must increase strictly along the sequence"
                            .to_string(),
                    });
                }
            }
            // Convergence gate: the scaled tail must have settled on a
            // probe sphere at the smallest ladder radius, where the
            // pole-offset discrepancy between members is largest.
            let probe = hemisphere_rule(n, *radii.last().unwrap(), 4);
            let stride = (probe.points.len() / 12).max(1);
            let mut tail_change = 0.0f64;
            for z in probe.points.iter().step_by(stride) {
                let g_last = peaks[m - 1] * seq.fields[m - 1].value(z);
                let g_prev = peaks[m - 2] * seq.fields[m - 2].value(z);
                tail_change =
                    tail_change.max((g_last - g_prev).abs() / g_last.abs().max(1e-300));
            }
            if tail_change > SEQUENCE_TOLERANCE {
                return Err(PohozaevError::SequenceNotConverged {
                    residual: tail_change,
                    threshold: SEQUENCE_TOLERANCE,
                });
            }
            Some(seq)
        }
    };
    let n = match input {
        SignInput::Profile(g) => g.dim(),
        SignInput::Sequence(seq) => seq.fields[0].dim(),
    };

    let mut column_names: Vec<String> = vec!["r".to_string(), "p_prime_limit".to_string()];
    if let Some(seq) = seq {
        for i in 0..seq.fields.len() {
            column_names.push(format!("p_u{i}"));
        }
    }
    let column_refs: Vec<&str> = column_names.iter().map(|s| s.as_str()).collect();
    let mut ladder = Ladder::new(&column_refs);

    let mut p_values = Vec::with_capacity(radii.len());
    let mut scaling_constant = 0.0f64;
    for &r in radii {
        let rule = HalfBallQuadrature::product_gauss(n, r, order);
        let mut row = vec![r];
        match input {
            SignInput::Profile(g) => {
                let p_lim = pohozaev_P(*g, r, 0.0, 0.0, &rule)?.p_prime;
                p_values.push(p_lim);
                row.push(p_lim);
            }
            SignInput::Sequence(seq) => {
                let k_const = -interior_coefficient(n, seq.kappa);
                let c_const = boundary_coefficient(n);
                let origin = vec![0.0; n];
                let m_last = seq.fields.last().unwrap().value(&origin);
                let mut p_members = Vec::with_capacity(seq.fields.len());
                for (i, field) in seq.fields.iter().enumerate() {
                    let p = pohozaev_P(*field, r, k_const, c_const, &rule)?.p;
                    scaling_constant = scaling_constant.max(p.abs() / (seq.eps[i] * r));
                    p_members.push(p);
                }
                let p_lim = m_last * m_last * p_members.last().unwrap();
                p_values.push(p_lim);
                row.push(p_lim);
                row.extend(p_members);
            }
        }
        ladder.push(row);
    }

    let (liminf_estimate, trend_slope) = affine_fit(radii, &p_values);
    let violated = liminf_estimate < -LIMINF_TOLERANCE;

    let mut computed = vec![
        NamedValue::new("liminf_estimate", liminf_estimate),
        NamedValue::new("trend_slope", trend_slope),
        NamedValue::new("tail_value", *p_values.last().unwrap()),
    ];
    if seq.is_some() {
        computed.push(NamedValue::new("scaling_constant", scaling_constant));
    }
    let note = if violated {
        format!(
            "sign restriction violated: extrapolated small-radius limit of P' is \
             {liminf_estimate:.6e}, below -{LIMINF_TOLERANCE:.0e}"
        )
    } else {
        format!(
            "no violation: extrapolated small-radius limit of P' is {liminf_estimate:.6e}"
        )
    };

    let mut inputs: Vec<String> = vec![format!("order={order}")];
    inputs.extend(radii.iter().map(|r| format!("r={r:.17e}")));
    if let Some(seq) = seq {
        inputs.extend(seq.eps.iter().map(|e| format!("eps={e:.17e}")));
        inputs.push(format!("kappa={:.17e}", seq.kappa));
    } else {
        inputs.push("profile=direct".to_string());
    }
    Ok(CheckReport::evaluate(
        "sign-restriction",
        "small-radius liminf of P' at the scaled blow-up limit is nonnegative",
        &inputs,
        computed,
        Vec::new(),
        LIMINF_TOLERANCE,
    )
    .with_verdict(if violated { Verdict::Fail } else { Verdict::Pass })
    .with_note(&note)
    .with_ladder(ladder))
}
