//! Cartesian half-ball grids and second-order Robin/Dirichlet assembly.

use std::collections::HashMap;

use nalgebra::DVector;
use serde::Deserialize;

use super::sparse::Csr;
use super::{AssemblyMeta, SolverError, SparseSystem};

/// Role of a node in the assembled system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    /// Full centered second-order stencil available.
    Interior,
    /// On `{y_n = 0}` with room for the one-sided normal derivative.
    FlatFace,
    /// Within the ball but missing stencil room: closed with Dirichlet data.
    SphereFace,
}

/// Lattice covering `{|y| ≤ radius, y_n ≥ 0}` with spacing `h`.
///
/// Nodes whose centered (interior) or one-sided (flat-face) stencils would
/// leave the lattice are classified `SphereFace` and carry Dirichlet rows;
/// this is the boundary-fitting rule referred to by `node_count` checks.
#[derive(Debug, Clone)]
pub struct HalfBallGrid {
    n: usize,
    radius: f64,
    h: f64,
    coords: Vec<Vec<f64>>,
    class: Vec<NodeClass>,
    index: HashMap<Vec<i64>, usize>,
}

#[derive(Debug, Deserialize)]
struct GridSpecJson {
    dimension: usize,
    radius: f64,
    spacing: f64,
}

impl HalfBallGrid {
    pub fn new(n: usize, radius: f64, h: f64) -> Self {
        assert!((3..=5).contains(&n), "half-ball grids are defined for 3 ≤ n ≤ 5");
        assert!(radius > 0.0 && h > 0.0 && h < radius);
        let top = (radius / h).floor() as i64;
        let mut lattice: Vec<Vec<i64>> = Vec::new();
        let mut cursor = vec![-top; n];
        cursor[n - 1] = 0;
        loop {
            let r2: f64 = cursor.iter().map(|&i| (i as f64 * h).powi(2)).sum();
            if r2.sqrt() <= radius + 1e-12 {
                lattice.push(cursor.clone());
            }
            // odometer over the box [-top, top]^{n-1} × [0, top]
            let mut axis = 0;
            loop {
                cursor[axis] += 1;
                let limit = top;
                let lower = if axis == n - 1 { 0 } else { -top };
                if cursor[axis] <= limit {
                    break;
                }
                cursor[axis] = lower;
                axis += 1;
                if axis == n {
                    break;
                }
            }
            if axis == n {
                break;
            }
        }
        let mut index = HashMap::with_capacity(lattice.len());
        for (k, key) in lattice.iter().enumerate() {
            index.insert(key.clone(), k);
        }
        let inside = |key: &[i64]| index.contains_key(key);
        let mut class = Vec::with_capacity(lattice.len());
        for key in &lattice {
            let cls = if key[n - 1] == 0 {
                // flat-face candidate: needs the two nodes above for the
                // one-sided normal derivative
                let mut up1 = key.clone();
                up1[n - 1] = 1;
                let mut up2 = key.clone();
                up2[n - 1] = 2;
                let mut tangential_ok = true;
                for a in 0..n - 1 {
                    for s in [-1i64, 1] {
                        let mut nb = key.clone();
                        nb[a] += s;
                        if !inside(&nb) {
                            tangential_ok = false;
                        }
                    }
                }
                if inside(&up1) && inside(&up2) && tangential_ok {
                    NodeClass::FlatFace
                } else {
                    NodeClass::SphereFace
                }
            } else {
                let mut ok = true;
                for a in 0..n {
                    for s in [-1i64, 1] {
                        let mut nb = key.clone();
                        nb[a] += s;
                        if nb[n - 1] < 0 || !inside(&nb) {
                            ok = false;
                        }
                    }
                }
                if ok {
                    NodeClass::Interior
                } else {
                    NodeClass::SphereFace
                }
            };
            class.push(cls);
        }
        let coords = lattice
            .iter()
            .map(|key| key.iter().map(|&i| i as f64 * h).collect())
            .collect();
        HalfBallGrid { n, radius, h, coords, class, index }
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        let spec: GridSpecJson = serde_json::from_str(text)?;
        Ok(HalfBallGrid::new(spec.dimension, spec.radius, spec.spacing))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn node_count(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self, k: usize) -> &[f64] {
        &self.coords[k]
    }

    pub fn class(&self, k: usize) -> NodeClass {
        self.class[k]
    }

    pub fn grid_id(&self) -> String {
        format!("halfball-n{}-R{}-h{}", self.n, self.radius, self.h)
    }

    fn neighbor(&self, k: usize, axis: usize, step: i64) -> Option<usize> {
        let mut key: Vec<i64> =
            self.coords[k].iter().map(|&c| (c / self.h).round() as i64).collect();
        key[axis] += step;
        self.index.get(&key).copied()
    }

    /// Checks the stencil invariant: every non-Dirichlet row resolves.
    pub fn validate(&self) -> bool {
        for k in 0..self.node_count() {
            match self.class[k] {
                NodeClass::Interior => {
                    for a in 0..self.n {
                        for s in [-1i64, 1] {
                            if self.neighbor(k, a, s).is_none() {
                                return false;
                            }
                        }
                    }
                }
                NodeClass::FlatFace => {
                    if self.neighbor(k, self.n - 1, 1).is_none()
                        || self.neighbor(k, self.n - 1, 2).is_none()
                    {
                        return false;
                    }
                }
                NodeClass::SphereFace => {}
            }
        }
        true
    }

    /// Samples a function at every node.
    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> DVector<f64> {
        DVector::from_fn(self.node_count(), |k, _| f(&self.coords[k]))
    }
}

/// Data of the mixed problem `Δu − c_int·u = f_int` in the half ball,
/// `∂_n u + c_bd·u = f_bd` on the flat face (`∂_n` is the inward normal
/// derivative, `+∂/∂y_n`), and a closure on the spherical face.
pub struct RobinProblem<'a> {
    pub interior_coefficient: &'a dyn Fn(&[f64]) -> f64,
    pub flat_coefficient: &'a dyn Fn(&[f64]) -> f64,
    pub interior_rhs: &'a dyn Fn(&[f64]) -> f64,
    pub flat_rhs: &'a dyn Fn(&[f64]) -> f64,
    pub sphere_face: SphereFaceClosure<'a>,
}

pub enum SphereFaceClosure<'a> {
    Dirichlet(&'a dyn Fn(&[f64]) -> f64),
    /// `∂_ρ u + exponent·u/ρ = 0`; only the rotational reduction honors it.
    Decay { exponent: f64 },
}

/// Second-order assembly of a Robin problem on a Cartesian half-ball grid.
pub fn assemble(
    problem: &RobinProblem<'_>,
    grid: &HalfBallGrid,
) -> Result<SparseSystem, SolverError> {
    let n = grid.dim();
    let h = grid.spacing();
    let count = grid.node_count();
    let mut triplets: Vec<(usize, usize, f64)> = Vec::with_capacity(count * (2 * n + 1));
    let mut rhs = DVector::zeros(count);
    let check = |v: f64, k: usize, grid: &HalfBallGrid| -> Result<f64, SolverError> {
        if v.is_finite() {
            Ok(v)
        } else {
            Err(SolverError::BadCoefficient { node: k, coords: grid.coords(k).to_vec() })
        }
    };
    for k in 0..count {
        let y = grid.coords(k);
        match grid.class(k) {
            NodeClass::Interior => {
                let c = check((problem.interior_coefficient)(y), k, grid)?;
                triplets.push((k, k, -2.0 * n as f64 / (h * h) - c));
                for a in 0..n {
                    for s in [-1i64, 1] {
                        let nb = grid.neighbor(k, a, s).expect("validated stencil");
                        triplets.push((k, nb, 1.0 / (h * h)));
                    }
                }
                rhs[k] = check((problem.interior_rhs)(y), k, grid)?;
            }
            NodeClass::FlatFace => {
                let c = check((problem.flat_coefficient)(y), k, grid)?;
                let up1 = grid.neighbor(k, n - 1, 1).expect("validated stencil");
                let up2 = grid.neighbor(k, n - 1, 2).expect("validated stencil");
                triplets.push((k, k, -3.0 / (2.0 * h) + c));
                triplets.push((k, up1, 4.0 / (2.0 * h)));
                triplets.push((k, up2, -1.0 / (2.0 * h)));
                rhs[k] = check((problem.flat_rhs)(y), k, grid)?;
            }
            NodeClass::SphereFace => match &problem.sphere_face {
                SphereFaceClosure::Dirichlet(g) => {
                    triplets.push((k, k, 1.0));
                    rhs[k] = check(g(y), k, grid)?;
                }
                SphereFaceClosure::Decay { .. } => {
                    return Err(SolverError::ClosureNeedsReduction);
                }
            },
        }
    }
    Ok(SparseSystem {
        matrix: Csr::from_triplets(count, count, &triplets),
        rhs,
        meta: AssemblyMeta {
            scheme: "cartesian-robin-2nd".to_string(),
            grid_id: grid.grid_id(),
            order: 2,
            spacing: h,
        },
    })
}

/// Node coordinates and values as CSV (`y1,…,yn,value` per line).
pub fn export_field_csv(grid: &HalfBallGrid, values: &DVector<f64>) -> String {
    assert_eq!(values.len(), grid.node_count());
    let mut out = String::new();
    for a in 0..grid.dim() {
        out.push_str(&format!("y{}{}", a + 1, ","));
    }
    out.push_str("value\n");
    for k in 0..grid.node_count() {
        for c in grid.coords(k) {
            out.push_str(&format!("{c:.17e},"));
        }
        out.push_str(&format!("{:.17e}\n", values[k]));
    }
    out
}
