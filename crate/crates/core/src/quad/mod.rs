//! Deterministic quadrature on the domains used by the flux and mass
//! integrals: spheres, upper hemispheres, boundary disks, equators, and
//! half-balls, in ambient dimension 3..=5.
//!
//! All rules are Gauss–Legendre product rules; azimuthal directions use a
//! uniform grid with an even point count, which integrates trigonometric
//! polynomials exactly and cancels odd azimuthal harmonics to rounding.
//! Node order is fixed, so summation order (and hence the floating-point
//! result) is reproducible.

/// A fixed list of nodes (ambient coordinates) and weights.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn integrate<F: FnMut(&[f64]) -> f64>(&self, mut f: F) -> f64 {
        let mut s = 0.0;
        for (p, w) in self.points.iter().zip(&self.weights) {
            s += w * f(p);
        }
        s
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`, by Newton iteration on
/// the Legendre polynomial.
pub fn gauss_legendre(k: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(k >= 1);
    let mut nodes = vec![0.0; k];
    let mut weights = vec![0.0; k];
    for i in 0..k {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (k as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(k, t);
            let dt = -p / dp;
            t += dt;
            if dt.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(k, t);
        nodes[i] = t;
        weights[i] = 2.0 / ((1.0 - t * t) * dp * dp);
    }
    // ascending node order for a reproducible summation order
    let mut idx: Vec<usize> = (0..k).collect();
    idx.sort_by(|&a, &b| nodes[a].partial_cmp(&nodes[b]).unwrap());
    (
        idx.iter().map(|&i| nodes[i]).collect(),
        idx.iter().map(|&i| weights[i]).collect(),
    )
}

fn legendre_with_derivative(k: usize, t: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = t;
    for j in 2..=k {
        let jf = j as f64;
        let p2 = ((2.0 * jf - 1.0) * t * p1 - (jf - 1.0) * p0) / jf;
        p0 = p1;
        p1 = p2;
    }
    if k == 0 {
        return (1.0, 0.0);
    }
    if k == 1 {
        return (t, 1.0);
    }
    let dp = k as f64 * (t * p1 - p0) / (t * t - 1.0);
    (p1, dp)
}

/// Gauss–Legendre rule mapped to `[a, b]` (1D nodes as single-coordinate points).
pub fn line_rule(a: f64, b: f64, order: usize) -> QuadratureRule {
    let (t, w) = gauss_legendre(order);
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    QuadratureRule {
        points: t.iter().map(|&x| vec![mid + half * x]).collect(),
        weights: w.iter().map(|&x| x * half).collect(),
    }
}

/// Full sphere `S^{d−1}` of the given radius in ambient dimension `d`
/// (2 ≤ d ≤ 5), recursively: a circle uses an even uniform azimuthal grid,
/// higher spheres a Gauss polar angle against the last coordinate.
pub fn sphere_rule(d: usize, radius: f64, order: usize) -> QuadratureRule {
    assert!((2..=5).contains(&d));
    if d == 2 {
        let mcount = (2 * order.max(2)) & !1usize; // even
        let w = 2.0 * std::f64::consts::PI * radius / mcount as f64;
        let mut points = Vec::with_capacity(mcount);
        for i in 0..mcount {
            let phi = 2.0 * std::f64::consts::PI * i as f64 / mcount as f64;
            points.push(vec![radius * phi.cos(), radius * phi.sin()]);
        }
        return QuadratureRule {
            points,
            weights: vec![w; mcount],
        };
    }
    polar_product(d, radius, order, 0.0, std::f64::consts::PI)
}

/// Upper hemisphere `{|z| = radius, z_d ≥ 0}` in ambient dimension `d`.
pub fn hemisphere_rule(d: usize, radius: f64, order: usize) -> QuadratureRule {
    assert!((3..=5).contains(&d));
    polar_product(d, radius, order, 0.0, 0.5 * std::f64::consts::PI)
}

/// Product rule over the polar angle `θ ∈ [θ0, θ1]` measured from the
/// positive last axis, times a sphere rule on the `(d−1)`-dimensional cross
/// section: `dσ = radius^{d−1} sin^{d−2}θ dθ dσ_{S^{d−2}}`.
fn polar_product(d: usize, radius: f64, order: usize, th0: f64, th1: f64) -> QuadratureRule {
    let theta = line_rule(th0, th1, order);
    let cross = sphere_rule(d - 1, 1.0, order);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (tp, tw) in theta.points.iter().zip(&theta.weights) {
        let th = tp[0];
        let (s, c) = th.sin_cos();
        let jac = radius.powi(d as i32 - 1) * s.powi(d as i32 - 2);
        for (cp, cw) in cross.points.iter().zip(&cross.weights) {
            let mut z = Vec::with_capacity(d);
            for v in cp {
                z.push(radius * s * v);
            }
            z.push(radius * c);
            points.push(z);
            weights.push(tw * cw * jac);
        }
    }
    QuadratureRule { points, weights }
}

/// Boundary disk `{z_n = 0, |z̄| ≤ radius}` embedded in ambient dimension
/// `n`: an `(n−1)`-dimensional ball carrying its `(n−1)`-dimensional measure.
pub fn disk_rule(n: usize, radius: f64, order: usize) -> QuadratureRule {
    assert!((3..=5).contains(&n));
    let d = n - 1;
    let radial = line_rule(0.0, radius, order);
    let shell = sphere_rule(d, 1.0, order);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (rp, rw) in radial.points.iter().zip(&radial.weights) {
        let r = rp[0];
        let jac = r.powi(d as i32 - 1);
        for (sp, sw) in shell.points.iter().zip(&shell.weights) {
            let mut z: Vec<f64> = sp.iter().map(|v| r * v).collect();
            z.push(0.0);
            points.push(z);
            weights.push(rw * sw * jac);
        }
    }
    QuadratureRule { points, weights }
}

/// Equator `{|z̄| = radius, z_n = 0}`: an `(n−2)`-sphere embedded in the
/// chart boundary, carrying its `(n−2)`-dimensional measure.
pub fn equator_rule(n: usize, radius: f64, order: usize) -> QuadratureRule {
    assert!((3..=5).contains(&n));
    let shell = sphere_rule(n - 1, radius, order);
    QuadratureRule {
        points: shell
            .points
            .into_iter()
            .map(|mut p| {
                p.push(0.0);
                p
            })
            .collect(),
        weights: shell.weights,
    }
}

/// Half-ball `{|z| ≤ radius, z_n ≥ 0}` volume rule.
pub fn half_ball_rule(n: usize, radius: f64, order: usize) -> QuadratureRule {
    assert!((3..=5).contains(&n));
    let radial = line_rule(0.0, radius, order);
    let shell = hemisphere_rule(n, 1.0, order);
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (rp, rw) in radial.points.iter().zip(&radial.weights) {
        let r = rp[0];
        let jac = r.powi(n as i32 - 1);
        for (sp, sw) in shell.points.iter().zip(&shell.weights) {
            let z: Vec<f64> = sp.iter().map(|v| r * v).collect();
            points.push(z);
            weights.push(rw * sw * jac);
        }
    }
    QuadratureRule { points, weights }
}

/// Adaptive Simpson integration on `[a, b]` to absolute tolerance `tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), m, fm)
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        m: f64,
        fm: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let (left, lm, flm) = simpson(f, a, fa, m, fm);
        let (right, rm, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, fa, m, fm, left, lm, flm, 0.5 * tol, depth - 1)
            + recurse(f, m, fm, b, fb, right, rm, frm, 0.5 * tol, depth - 1)
    }
    let fa = f(a);
    let fb = f(b);
    let (whole, m, fm) = simpson(f, a, fa, b, fb);
    recurse(f, a, fa, b, fb, whole, m, fm, tol, 48)
}
