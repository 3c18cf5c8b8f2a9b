//! Newton solve of the full nonlinear system on a curved half-ball chart:
//! Cartesian lattice, cut-cell Dirichlet closure on the spherical face,
//! one-sided curvature-corrected Robin rows on the flat face, and a damped
//! Newton iteration on the power nonlinearities.
//!
//! The solved system, for a metric `g` on `{|z| < R, z_n ≥ 0}`, is
//!
//! ```text
//!   Δ_g u − (n−2) R_g u / (4(n−1)) + K u^{(n+2)/(n−2)} = 0   (interior)
//!   η(u) − (n−2) h_g u / 2      + c u^{n/(n−2)}        = 0   (flat face)
//!   u = data                                                (sphere face)
//! ```
//!
//! with caller-chosen reaction coefficients `K` and `c`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};

use crate::geometry::{
    boundary_geometry, christoffel, metric_inverse, norm, scalar_curvature, MetricField,
};

use super::sparse::{solve_system, Csr, SolveReport};
use super::SolverError;

/// Discretization and iteration parameters for [`solve_curved_system`].
#[derive(Debug, Clone)]
pub struct CurvedNewtonConfig {
    /// Half-ball radius of the lattice.
    pub radius: f64,
    /// Lattice spacing.
    pub spacing: f64,
    /// Coefficient `K` of `u^{(n+2)/(n−2)}` in the interior equation.
    pub interior_reaction: f64,
    /// Coefficient `c` of `u^{n/(n−2)}` in the flat-face equation.
    pub boundary_reaction: f64,
    /// Newton stops when the relative nonlinear residual drops below this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Relative tolerance handed to the inner linear solves.
    pub linear_tolerance: f64,
}

impl CurvedNewtonConfig {
    pub fn new(radius: f64, spacing: f64, interior_reaction: f64, boundary_reaction: f64) -> Self {
        assert!(radius > 0.0 && spacing > 0.0 && spacing < radius);
        Self {
            radius,
            spacing,
            interior_reaction,
            boundary_reaction,
            tolerance: 1e-10,
            max_iterations: 25,
            linear_tolerance: 1e-12,
        }
    }
}

/// Cartesian lattice on the closed half ball `{|z| ≤ R, z_n ≥ 0}`.
#[derive(Debug)]
pub struct HalfBallLattice {
    dim: usize,
    radius: f64,
    spacing: f64,
    coords: Vec<Vec<f64>>,
    lattice: Vec<Vec<i64>>,
    index: HashMap<Vec<i64>, usize>,
}

impl HalfBallLattice {
    pub fn build(dim: usize, radius: f64, spacing: f64) -> Self {
        assert!((3..=5).contains(&dim), "supported chart dimensions are 3..=5");
        assert!(radius > 0.0 && spacing > 0.0);
        let m = (radius / spacing).ceil() as i64;
        let mut coords = Vec::new();
        let mut lattice = Vec::new();
        let mut index = HashMap::new();
        let mut counters = vec![-m; dim - 1];
        counters.push(0);
        'odometer: loop {
            let z: Vec<f64> = counters.iter().map(|&i| i as f64 * spacing).collect();
            if norm(&z) < radius {
                index.insert(counters.clone(), coords.len());
                lattice.push(counters.clone());
                coords.push(z);
            }
            let mut axis = 0;
            loop {
                counters[axis] += 1;
                if counters[axis] <= m {
                    continue 'odometer;
                }
                counters[axis] = if axis == dim - 1 { 0 } else { -m };
                axis += 1;
                if axis == dim {
                    return HalfBallLattice { dim, radius, spacing, coords, lattice, index };
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self, k: usize) -> &[f64] {
        &self.coords[k]
    }

    /// Index of the lattice node with the given integer key, if present.
    pub fn node_at(&self, key: &[i64]) -> Option<usize> {
        self.index.get(key).copied()
    }

    /// Axis neighbor of node `k` in direction `sign`, if it is a node.
    pub fn neighbor(&self, k: usize, axis: usize, sign: i64) -> Option<usize> {
        let mut key = self.lattice[k].clone();
        key[axis] += sign;
        if key[self.dim - 1] < 0 {
            return None;
        }
        self.node_at(&key)
    }

    /// Resolves the axis neighbor: either a node or the cut of the segment
    /// with the spherical face, with arm fraction and cut position.
    fn arm(&self, k: usize, axis: usize, sign: i64) -> Arm {
        if let Some(idx) = self.neighbor(k, axis, sign) {
            return Arm::Node(idx);
        }
        let z = &self.coords[k];
        let q = sign as f64 * z[axis];
        let r2: f64 = z.iter().map(|c| c * c).sum();
        let s = -q + (q * q + self.radius * self.radius - r2).sqrt();
        let frac = (s / self.spacing).clamp(MIN_ARM, 1.0);
        let mut point = z.clone();
        point[axis] += sign as f64 * frac * self.spacing;
        Arm::Cut { frac, point }
    }
}

/// Smallest admitted cut-arm fraction, guarding against roundoff slivers.
const MIN_ARM: f64 = 0.02;

enum Arm {
    Node(usize),
    Cut { frac: f64, point: Vec<f64> },
}

impl Arm {
    fn fraction(&self) -> f64 {
        match self {
            Arm::Node(_) => 1.0,
            Arm::Cut { frac, .. } => *frac,
        }
    }
}

/// Role of a lattice node in the assembled system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NodeRole {
    /// Interior second-order row with the `K u^{(n+2)/(n−2)}` reaction.
    Interior,
    /// Flat-face Robin row with the `c u^{n/(n−2)}` reaction.
    FlatFace,
    /// Flat-face node too close to the rim for the one-sided stencil;
    /// clamped to the sphere data.
    Clamped,
}

struct Assembled {
    matrix: Csr,
    rhs: DVector<f64>,
    roles: Vec<NodeRole>,
    dropped_cross: usize,
}

struct RowSink<'a> {
    row: usize,
    triplets: &'a mut Vec<(usize, usize, f64)>,
    rhs: &'a mut DVector<f64>,
    data: &'a dyn Fn(&[f64]) -> f64,
}

impl RowSink<'_> {
    fn add(&mut self, arm: &Arm, coeff: f64) {
        match arm {
            Arm::Node(idx) => self.triplets.push((self.row, *idx, coeff)),
            Arm::Cut { point, .. } => self.rhs[self.row] -= coeff * (self.data)(point),
        }
    }

    fn diag(&mut self, coeff: f64) {
        self.triplets.push((self.row, self.row, coeff));
    }
}

fn check_finite(v: f64, node: usize, z: &[f64]) -> Result<f64, SolverError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SolverError::BadCoefficient { node, coords: z.to_vec() })
    }
}

/// Assembles the linear part `A u = b` (second-order interior operator,
/// flat-face boundary operator, Dirichlet data folded into `b`) and the
/// role map used to attach the nonlinear reactions.
fn assemble_linear(
    lattice: &HalfBallLattice,
    g: &dyn MetricField,
    data: &dyn Fn(&[f64]) -> f64,
) -> Result<Assembled, SolverError> {
    let n = lattice.dim;
    let nf = n as f64;
    let h = lattice.spacing;
    let cn = (nf - 2.0) / (4.0 * (nf - 1.0));
    let count = lattice.node_count();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(count * (2 * n + 2));
    let mut rhs = DVector::zeros(count);
    let mut roles = vec![NodeRole::Interior; count];
    let mut dropped_cross = 0usize;

    for k in 0..count {
        let z = lattice.coords[k].clone();
        let on_face = lattice.lattice[k][n - 1] == 0;
        let mut sink = RowSink { row: k, triplets: &mut triplets, rhs: &mut rhs, data };

        if on_face {
            let up1 = lattice.neighbor(k, n - 1, 1);
            let up2 = up1.and_then(|_| {
                let mut key = lattice.lattice[k].clone();
                key[n - 1] = 2;
                lattice.node_at(&key)
            });
            let (up1, up2) = match (up1, up2) {
                (Some(a), Some(b)) => (a, b),
                _ => {
                    roles[k] = NodeRole::Clamped;
                    sink.diag(1.0);
                    sink.rhs[k] = (data)(&z);
                    continue;
                }
            };
            roles[k] = NodeRole::FlatFace;
            let bd = boundary_geometry(g, &z);
            let eta_n = check_finite(bd.eta[n - 1], k, &z)?;
            sink.diag(-3.0 * eta_n / (2.0 * h));
            sink.add(&Arm::Node(up1), 4.0 * eta_n / (2.0 * h));
            sink.add(&Arm::Node(up2), -eta_n / (2.0 * h));
            for j in 0..n - 1 {
                let e = bd.eta[j];
                if e.abs() > 1e-13 {
                    let minus = lattice.arm(k, j, -1);
                    let plus = lattice.arm(k, j, 1);
                    let (am, ap) = (minus.fraction(), plus.fraction());
                    let denom = am * ap * (am + ap) * h;
                    sink.add(&plus, e * am * am / denom);
                    sink.add(&minus, -e * ap * ap / denom);
                    sink.diag(e * (ap * ap - am * am) / denom);
                }
            }
            let hmean = check_finite(bd.mean_curvature, k, &z)?;
            sink.diag(-(nf - 2.0) / 2.0 * hmean);
            continue;
        }

        let ginv = metric_inverse(g, &z);
        let gam = christoffel(g, &z);
        let rsc = check_finite(scalar_curvature(g, &z), k, &z)?;
        let mut drift = vec![0.0f64; n];
        for (c, d) in drift.iter_mut().enumerate() {
            for a in 0..n {
                for b in 0..n {
                    *d -= ginv[(a, b)] * gam[c][(a, b)];
                }
            }
        }

        for axis in 0..n {
            let minus = lattice.arm(k, axis, -1);
            let plus = lattice.arm(k, axis, 1);
            let (am, ap) = (minus.fraction(), plus.fraction());
            let gii = check_finite(ginv[(axis, axis)], k, &z)?;
            let d2 = am * ap * (am + ap) * h * h;
            sink.add(&minus, gii * 2.0 * ap / d2);
            sink.add(&plus, gii * 2.0 * am / d2);
            sink.diag(-gii * 2.0 * (am + ap) / d2);
            let b = drift[axis];
            if b.abs() > 1e-14 {
                let d1 = am * ap * (am + ap) * h;
                sink.add(&plus, b * am * am / d1);
                sink.add(&minus, -b * ap * ap / d1);
                sink.diag(b * (ap * ap - am * am) / d1);
            }
        }

        // mixed derivatives: centered cross where the full diagonal stencil
        // exists, a one-sided quadrant otherwise
        for i in 0..n {
            for j in (i + 1)..n {
                let gij = ginv[(i, j)];
                if gij.abs() <= 1e-13 {
                    continue;
                }
                let coeff = 2.0 * gij;
                let corner = |si: i64, sj: i64| -> Option<usize> {
                    let mut key = lattice.lattice[k].clone();
                    key[i] += si;
                    key[j] += sj;
                    if key[n - 1] < 0 {
                        return None;
                    }
                    lattice.node_at(&key)
                };
                let centered = [corner(1, 1), corner(-1, -1), corner(1, -1), corner(-1, 1)];
                if let [Some(pp), Some(mm), Some(pm), Some(mp)] = centered {
                    let w = coeff / (4.0 * h * h);
                    sink.add(&Arm::Node(pp), w);
                    sink.add(&Arm::Node(mm), w);
                    sink.add(&Arm::Node(pm), -w);
                    sink.add(&Arm::Node(mp), -w);
                    continue;
                }
                let mut placed = false;
                for (si, sj) in [(1i64, 1i64), (1, -1), (-1, 1), (-1, -1)] {
                    let (ai, aj, aij) = {
                        let mut ki = lattice.lattice[k].clone();
                        ki[i] += si;
                        let mut kj = lattice.lattice[k].clone();
                        kj[j] += sj;
                        (lattice.node_at(&ki), lattice.node_at(&kj), corner(si, sj))
                    };
                    if let (Some(ai), Some(aj), Some(aij)) = (ai, aj, aij) {
                        let w = coeff * (si * sj) as f64 / (h * h);
                        sink.add(&Arm::Node(aij), w);
                        sink.add(&Arm::Node(ai), -w);
                        sink.add(&Arm::Node(aj), -w);
                        sink.diag(w);
                        placed = true;
                        break;
                    }
                }
                if !placed {
                    dropped_cross += 1;
                }
            }
        }

        sink.diag(-cn * rsc);
    }

    let matrix = Csr::from_triplets(count, count, &triplets);
    Ok(Assembled { matrix, rhs, roles, dropped_cross })
}

/// A converged lattice solution of the nonlinear system.
#[derive(Debug)]
pub struct LatticeSolution {
    lattice: HalfBallLattice,
    values: DVector<f64>,
    roles: Vec<NodeRole>,
    /// Relative nonlinear residual after each Newton step.
    pub newton_residuals: Vec<f64>,
    /// Final relative nonlinear residual.
    pub residual: f64,
    /// Report of the last inner linear solve.
    pub report: SolveReport,
    /// Mixed-derivative pairs without a usable stencil (diagnostic).
    pub dropped_cross: usize,
}

impl LatticeSolution {
    pub fn lattice(&self) -> &HalfBallLattice {
        &self.lattice
    }

    pub fn values(&self) -> &DVector<f64> {
        &self.values
    }

    pub fn node_count(&self) -> usize {
        self.lattice.node_count()
    }

    pub fn coords(&self, k: usize) -> &[f64] {
        self.lattice.coords(k)
    }

    pub fn value(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn role(&self, k: usize) -> NodeRole {
        self.roles[k]
    }

    /// Value at the chart origin (always a lattice node).
    pub fn value_at_origin(&self) -> f64 {
        let key = vec![0i64; self.lattice.dim];
        let k = self.lattice.node_at(&key).expect("origin is a lattice node");
        self.values[k]
    }

    /// Multilinear interpolation of a per-node vector at a chart point;
    /// `None` when a surrounding lattice cell is incomplete.
    pub fn interpolate_vector(&self, values: &DVector<f64>, z: &[f64]) -> Option<f64> {
        let n = self.lattice.dim;
        assert_eq!(z.len(), n);
        let h = self.lattice.spacing;
        let mut base = Vec::with_capacity(n);
        let mut t = Vec::with_capacity(n);
        for (a, &c) in z.iter().enumerate() {
            let mut f = c / h;
            if a == n - 1 {
                f = f.max(0.0);
            }
            let i = f.floor();
            base.push(i as i64);
            t.push(f - i);
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut key = base.clone();
            let mut w = 1.0;
            for (a, k) in key.iter_mut().enumerate() {
                if corner >> a & 1 == 1 {
                    *k += 1;
                    w *= t[a];
                } else {
                    w *= 1.0 - t[a];
                }
            }
            if w == 0.0 {
                continue;
            }
            let idx = self.lattice.node_at(&key)?;
            acc += w * values[idx];
        }
        Some(acc)
    }

    /// Multilinear interpolation of the solution itself.
    pub fn interpolate(&self, z: &[f64]) -> Option<f64> {
        self.interpolate_vector(&self.values, z)
    }

    /// Second-order finite-difference gradient of a per-node vector at node
    /// `k`: centered where both neighbors exist, one-sided along the normal
    /// on the flat face. `None` when the stencil is incomplete.
    pub fn fd_gradient_at(&self, values: &DVector<f64>, k: usize) -> Option<DVector<f64>> {
        let n = self.lattice.dim;
        let h = self.lattice.spacing;
        let mut g = DVector::zeros(n);
        for axis in 0..n {
            g[axis] = self.fd_axis_derivative(values, k, axis, h)?;
        }
        Some(g)
    }

    fn fd_axis_derivative(
        &self,
        values: &DVector<f64>,
        k: usize,
        axis: usize,
        h: f64,
    ) -> Option<f64> {
        let plus = self.lattice.neighbor(k, axis, 1);
        let minus = self.lattice.neighbor(k, axis, -1);
        match (minus, plus) {
            (Some(m), Some(p)) => Some((values[p] - values[m]) / (2.0 * h)),
            (None, Some(p)) if axis == self.lattice.dim - 1 => {
                let p2 = self.lattice.neighbor(p, axis, 1)?;
                Some((-3.0 * values[k] + 4.0 * values[p] - values[p2]) / (2.0 * h))
            }
            _ => None,
        }
    }

    /// Second-order finite-difference Hessian of a per-node vector at node
    /// `k`; one-sided along the normal on the flat face.
    pub fn fd_hessian_at(&self, values: &DVector<f64>, k: usize) -> Option<DMatrix<f64>> {
        let n = self.lattice.dim;
        let h = self.lattice.spacing;
        let mut out = DMatrix::zeros(n, n);
        for a in 0..n {
            let plus = self.lattice.neighbor(k, a, 1);
            let minus = self.lattice.neighbor(k, a, -1);
            let v = match (minus, plus) {
                (Some(m), Some(p)) => (values[p] + values[m] - 2.0 * values[k]) / (h * h),
                (None, Some(p)) if a == n - 1 => {
                    let p2 = self.lattice.neighbor(p, a, 1)?;
                    let p3 = self.lattice.neighbor(p2, a, 1)?;
                    (2.0 * values[k] - 5.0 * values[p] + 4.0 * values[p2] - values[p3]) / (h * h)
                }
                _ => return None,
            };
            out[(a, a)] = v;
        }
        for a in 0..n {
            for b in (a + 1)..n {
                let v = if b == n - 1 && self.lattice.neighbor(k, b, -1).is_none() {
                    // face node: centered tangentially, one-sided normally
                    let pa = self.lattice.neighbor(k, a, 1)?;
                    let ma = self.lattice.neighbor(k, a, -1)?;
                    let dp = self.fd_axis_derivative(values, pa, b, h)?;
                    let dm = self.fd_axis_derivative(values, ma, b, h)?;
                    (dp - dm) / (2.0 * h)
                } else {
                    let corner = |sa: i64, sb: i64| -> Option<usize> {
                        let mut key = self.lattice.lattice[k].clone();
                        key[a] += sa;
                        key[b] += sb;
                        if key[n - 1] < 0 {
                            return None;
                        }
                        self.lattice.node_at(&key)
                    };
                    let (pp, mm, pm, mp) =
                        (corner(1, 1)?, corner(-1, -1)?, corner(1, -1)?, corner(-1, 1)?);
                    (values[pp] + values[mm] - values[pm] - values[mp]) / (4.0 * h * h)
                };
                out[(a, b)] = v;
                out[(b, a)] = v;
            }
        }
        Some(out)
    }
}

/// Solves the nonlinear curved-chart system by damped Newton iteration
/// seeded with `seed` and closed with `data` on the spherical face.
pub fn solve_curved_system(
    g: &dyn MetricField,
    data: &dyn Fn(&[f64]) -> f64,
    seed: &dyn Fn(&[f64]) -> f64,
    config: &CurvedNewtonConfig,
) -> Result<LatticeSolution, SolverError> {
    let lattice = HalfBallLattice::build(g.dim(), config.radius, config.spacing);
    let sys = assemble_linear(&lattice, g, data)?;
    let n = lattice.node_count();
    let nf = lattice.dim as f64;
    let p_int = (nf + 2.0) / (nf - 2.0);
    let p_face = nf / (nf - 2.0);
    let k_int = config.interior_reaction;
    let c_face = config.boundary_reaction;

    let mut x = DVector::from_fn(n, |k, _| (seed)(lattice.coords(k)));
    if x.min() <= 0.0 {
        return Err(SolverError::BadCoefficient { node: x.imin(), coords: lattice.coords(x.imin()).to_vec() });
    }

    let reaction = |x: &DVector<f64>| -> DVector<f64> {
        DVector::from_fn(n, |k, _| match sys.roles[k] {
            NodeRole::Interior => k_int * x[k].powf(p_int),
            NodeRole::FlatFace => c_face * x[k].powf(p_face),
            NodeRole::Clamped => 0.0,
        })
    };
    let scale = sys.rhs.norm().max(1e-300);
    let residual_of = |x: &DVector<f64>| -> DVector<f64> {
        sys.matrix.matvec(x) + reaction(x) - &sys.rhs
    };

    let mut newton_residuals = Vec::new();
    let mut report = SolveReport { method: "trivial", relative_residual: 0.0, iterations: 0 };
    let mut f = residual_of(&x);
    let mut rel = f.norm() / scale;
    for _ in 0..config.max_iterations {
        if rel < config.tolerance {
            break;
        }
        // Jacobian: linear part plus the reaction derivative on the diagonal
        let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(sys.matrix.nnz() + n);
        for r in 0..n {
            for (c, v) in sys.matrix.row(r) {
                triplets.push((r, c, v));
            }
        }
        for k in 0..n {
            let d = match sys.roles[k] {
                NodeRole::Interior => k_int * p_int * x[k].powf(p_int - 1.0),
                NodeRole::FlatFace => c_face * p_face * x[k].powf(p_face - 1.0),
                NodeRole::Clamped => 0.0,
            };
            if d != 0.0 {
                triplets.push((k, k, d));
            }
        }
        let jac = Csr::from_triplets(n, n, &triplets);
        let minus_f = -&f;
        let (step, rep) = solve_system(&jac, &minus_f, config.linear_tolerance)?;
        report = rep;
        // damp the step until positivity and residual decrease hold
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let candidate = &x + alpha * &step;
            if candidate.min() > 0.0 {
                let fc = residual_of(&candidate);
                let rc = fc.norm() / scale;
                if rc < rel || alpha < 1e-4 {
                    x = candidate;
                    f = fc;
                    rel = rc;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return Err(SolverError::IterationBreakdown {
                method: "newton",
                iteration: newton_residuals.len() + 1,
            });
        }
        newton_residuals.push(rel);
    }
    if rel >= config.tolerance {
        return Err(SolverError::NotConverged {
            method: "newton",
            iterations: newton_residuals.len(),
            residual: rel,
        });
    }
    Ok(LatticeSolution {
        lattice,
        values: x,
        roles: sys.roles,
        newton_residuals,
        residual: rel,
        report,
        dropped_cross: sys.dropped_cross,
    })
}
