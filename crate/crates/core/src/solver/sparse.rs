//! Sparse matrices, banded LU with partial pivoting, and iterative solvers.

use nalgebra::{DMatrix, DVector};

use super::SolverError;

/// Compressed sparse row matrix.
#[derive(Debug, Clone)]
pub struct Csr {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl Csr {
    /// Builds from (row, col, value) triplets; duplicate entries are summed.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Self {
        let mut per_row: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n_rows];
        for &(r, c, v) in triplets {
            assert!(r < n_rows && c < n_cols, "triplet ({r},{c}) out of bounds");
            per_row[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in &mut per_row {
            row.sort_by_key(|&(c, _)| c);
            let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
            for &(c, v) in row.iter() {
                match merged.last_mut() {
                    Some(last) if last.0 == c => last.1 += v,
                    _ => merged.push((c, v)),
                }
            }
            for (c, v) in merged {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Csr { n_rows, n_cols, row_ptr, cols, vals }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    /// Iterates over the entries of one row as `(col, value)` pairs.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        self.cols[lo..hi].iter().copied().zip(self.vals[lo..hi].iter().copied())
    }

    pub fn matvec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.n_cols);
        let mut y = DVector::zeros(self.n_rows);
        for r in 0..self.n_rows {
            let mut acc = 0.0;
            for (c, v) in self.row(r) {
                acc += v * x[c];
            }
            y[r] = acc;
        }
        y
    }

    pub fn matvec_transpose(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.n_rows);
        let mut y = DVector::zeros(self.n_cols);
        for r in 0..self.n_rows {
            let xr = x[r];
            if xr != 0.0 {
                for (c, v) in self.row(r) {
                    y[c] += v * xr;
                }
            }
        }
        y
    }

    pub fn diagonal(&self) -> DVector<f64> {
        let mut d = DVector::zeros(self.n_rows.min(self.n_cols));
        for r in 0..d.len() {
            for (c, v) in self.row(r) {
                if c == r {
                    d[r] = v;
                }
            }
        }
        d
    }

    /// Lower and upper bandwidths `(kl, ku)` of the sparsity pattern.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0usize;
        let mut ku = 0usize;
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                if v != 0.0 {
                    if r > c {
                        kl = kl.max(r - c);
                    } else {
                        ku = ku.max(c - r);
                    }
                }
            }
        }
        (kl, ku)
    }

    /// True when the sparsity pattern is structurally symmetric.
    pub fn pattern_symmetric(&self) -> bool {
        if self.n_rows != self.n_cols {
            return false;
        }
        let mut pattern: Vec<Vec<usize>> = vec![Vec::new(); self.n_rows];
        for r in 0..self.n_rows {
            for (c, _) in self.row(r) {
                pattern[r].push(c);
            }
        }
        for r in 0..self.n_rows {
            for &c in &pattern[r] {
                if pattern[c].binary_search(&r).is_err() {
                    return false;
                }
            }
        }
        true
    }
}

/// Banded LU factorization with partial pivoting (LAPACK-style band storage).
#[derive(Debug)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// `kl + ku + 1` rows; entry `A(r, c)` lives at `ab[(ku + r − c, c)]`.
    ab: DMatrix<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    pub fn factor(a: &Csr) -> Result<Self, SolverError> {
        assert_eq!(a.n_rows(), a.n_cols(), "band factorization needs a square matrix");
        let n = a.n_rows();
        let (kl, raw_ku) = a.bandwidths();
        // pivoting can introduce fill up to kl extra superdiagonals
        let ku = raw_ku + kl;
        let mut ab = DMatrix::zeros(kl + ku + 1, n);
        for r in 0..n {
            for (c, v) in a.row(r) {
                // explicitly stored zeros may lie outside the nonzero band
                if v != 0.0 {
                    ab[(ku + r - c, c)] = v;
                }
            }
        }
        let mut ipiv = vec![0usize; n];
        let band_row = |r: usize, c: usize| ku + r - c;

        let mut max_pivot = 0.0f64;
        for j in 0..n {
            let r_max = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = ab[(band_row(j, j), j)].abs();
            for r in (j + 1)..=r_max {
                let cand = ab[(band_row(r, j), j)].abs();
                if cand > best {
                    best = cand;
                    p = r;
                }
            }
            ipiv[j] = p;
            if p != j {
                let c_max = (j + ku).min(n - 1);
                for c in j..=c_max {
                    ab.swap((band_row(j, c), c), (band_row(p, c), c));
                }
            }
            let pivot = ab[(band_row(j, j), j)];
            max_pivot = max_pivot.max(pivot.abs());
            if pivot.abs() < 1e-14 * max_pivot.max(1.0) {
                return Err(SolverError::Singular {
                    column: j,
                    pivot,
                    condition_estimate: if pivot == 0.0 {
                        f64::INFINITY
                    } else {
                        max_pivot / pivot.abs()
                    },
                });
            }
            for r in (j + 1)..=r_max {
                let m = ab[(band_row(r, j), j)] / pivot;
                ab[(band_row(r, j), j)] = m;
                if m != 0.0 {
                    let c_max = (j + ku).min(n - 1);
                    for c in (j + 1)..=c_max {
                        let upper = ab[(band_row(j, c), c)];
                        ab[(band_row(r, c), c)] -= m * upper;
                    }
                }
            }
        }
        Ok(BandLu { n, kl, ku, ab, ipiv })
    }

    fn band(&self, r: usize, c: usize) -> f64 {
        self.ab[(self.ku + r - c, c)]
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut x = b.clone();
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                x.swap_rows(j, p);
            }
            let r_max = (j + self.kl).min(n - 1);
            let xj = x[j];
            if xj != 0.0 {
                for r in (j + 1)..=r_max {
                    x[r] -= self.band(r, j) * xj;
                }
            }
        }
        for r in (0..n).rev() {
            let c_max = (r + self.ku).min(n - 1);
            let mut acc = x[r];
            for c in (r + 1)..=c_max {
                acc -= self.band(r, c) * x[c];
            }
            x[r] = acc / self.band(r, r);
        }
        x
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut x = b.clone();
        // forward substitution with Uᵀ (lower triangular, bandwidth ku)
        for r in 0..n {
            let c_min = r.saturating_sub(self.ku);
            let mut acc = x[r];
            for c in c_min..r {
                acc -= self.band(c, r) * x[c];
            }
            x[r] = acc / self.band(r, r);
        }
        // back substitution with Lᵀ, interleaving each step's row swap
        for j in (0..n).rev() {
            let s_max = (j + self.kl).min(n - 1);
            let mut acc = x[j];
            for s in (j + 1)..=s_max {
                acc -= self.band(s, j) * x[s];
            }
            x[j] = acc;
            let p = self.ipiv[j];
            if p != j {
                x.swap_rows(j, p);
            }
        }
        x
    }
}

/// How a linear system was solved and how well.
#[derive(Debug, Clone)]
pub struct SolveReport {
    pub method: &'static str,
    pub relative_residual: f64,
    pub iterations: usize,
}

/// Direct banded solve when the bandwidth is economical, otherwise
/// Jacobi-preconditioned BiCGSTAB with a CGLS fallback.
pub fn solve_system(
    a: &Csr,
    b: &DVector<f64>,
    tol: f64,
) -> Result<(DVector<f64>, SolveReport), SolverError> {
    let n = a.n_rows();
    let (kl, ku) = a.bandwidths();
    let band_cost = n as f64 * ((kl + ku) as f64).powi(2);
    let bnorm = b.norm();
    if bnorm == 0.0 {
        return Ok((
            DVector::zeros(a.n_cols()),
            SolveReport { method: "trivial", relative_residual: 0.0, iterations: 0 },
        ));
    }
    if band_cost < 5.0e9 {
        let lu = BandLu::factor(a)?;
        let x = lu.solve(b);
        let rel = (a.matvec(&x) - b).norm() / bnorm;
        return Ok((x, SolveReport { method: "band-lu", relative_residual: rel, iterations: 1 }));
    }
    match bicgstab(a, b, tol, 20_000) {
        Ok((x, it)) => {
            let rel = (a.matvec(&x) - b).norm() / bnorm;
            Ok((x, SolveReport { method: "bicgstab", relative_residual: rel, iterations: it }))
        }
        Err(_) => {
            let (x, it) = cgls(a, b, tol, 40_000)?;
            let rel = (a.matvec(&x) - b).norm() / bnorm;
            Ok((x, SolveReport { method: "cgls", relative_residual: rel, iterations: it }))
        }
    }
}

/// Jacobi-preconditioned BiCGSTAB.
pub fn bicgstab(
    a: &Csr,
    b: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, usize), SolverError> {
    let n = a.n_rows();
    let diag = a.diagonal();
    let precond = |v: &DVector<f64>| -> DVector<f64> {
        DVector::from_fn(n, |i, _| if diag[i].abs() > 1e-300 { v[i] / diag[i] } else { v[i] })
    };
    let bnorm = b.norm();
    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let r0 = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v: DVector<f64> = DVector::zeros(n);
    let mut p: DVector<f64> = DVector::zeros(n);
    for it in 1..=max_iter {
        let rho_new = r0.dot(&r);
        if rho_new.abs() < 1e-300 {
            return Err(SolverError::IterationBreakdown { method: "bicgstab", iteration: it });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        p = &r + beta * (&p - omega * &v);
        let ph = precond(&p);
        v = a.matvec(&ph);
        alpha = rho / r0.dot(&v);
        let s = &r - alpha * &v;
        if s.norm() / bnorm < tol {
            x += alpha * &ph;
            return Ok((x, it));
        }
        let sh = precond(&s);
        let t = a.matvec(&sh);
        let tt = t.dot(&t);
        if tt.abs() < 1e-300 {
            return Err(SolverError::IterationBreakdown { method: "bicgstab", iteration: it });
        }
        omega = t.dot(&s) / tt;
        x += alpha * &ph + omega * &sh;
        r = &s - omega * &t;
        if r.norm() / bnorm < tol {
            return Ok((x, it));
        }
    }
    Err(SolverError::NotConverged {
        method: "bicgstab",
        iterations: max_iter,
        residual: r.norm() / bnorm,
    })
}

/// Conjugate gradients on the normal equations (least-squares fallback).
pub fn cgls(
    a: &Csr,
    b: &DVector<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<(DVector<f64>, usize), SolverError> {
    let bnorm = b.norm();
    let mut x = DVector::zeros(a.n_cols());
    let mut r = b.clone();
    let mut s = a.matvec_transpose(&r);
    let mut p = s.clone();
    let mut gamma = s.norm_squared();
    for it in 1..=max_iter {
        let q = a.matvec(&p);
        let alpha = gamma / q.norm_squared();
        x += alpha * &p;
        r -= alpha * &q;
        if r.norm() / bnorm < tol {
            return Ok((x, it));
        }
        s = a.matvec_transpose(&r);
        let gamma_new = s.norm_squared();
        let beta = gamma_new / gamma;
        gamma = gamma_new;
        p = &s + beta * &p;
    }
    Err(SolverError::NotConverged {
        method: "cgls",
        iterations: max_iter,
        residual: r.norm() / bnorm,
    })
}
