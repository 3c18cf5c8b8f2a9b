//! Numerical verification lab for a scalar-curvature/mean-curvature
//! boundary system on half-space charts.
//!
//! The object of study is the pair of equations, in dimension `3 ≤ n ≤ 5`,
//!
//! ```text
//!   Δ_g u − (n−2) R_g u / (4(n−1)) − n(n−2) κ u^{(n+2)/(n−2)} = 0   (interior)
//!   η(u) − (n−2) h_g u / 2 + (n−2) u^{n/(n−2)}            = 0   (boundary)
//! ```
//!
//! for `0 < κ < 1`, whose solutions deform `g` conformally to a metric with
//! constant negative scalar curvature `−4n(n−1)κ` and constant boundary mean
//! curvature `2`. The lab builds the closed-form solution families on the
//! flat half space, cross-checks them against their hyperbolic-geometry
//! description, probes the linearized operator for its near-kernel, solves
//! for the first-order correction induced by boundary curvature, audits
//! flux/mass identities and their interaction with singular expansions, and
//! stress-tests the concentration (blow-up) behavior of solution sequences.
//!
//! Module map:
//!
//! * [`geometry`] — scalar/metric fields, curvature, the curvature-corrected
//!   interior and boundary operators, conformal covariance, normal-gauge audit.
//! * [`models`] — closed-form solution families on the flat half space and
//!   their residuals, tangent (variation) fields, and the flattened limit.
//! * [`quad`] — deterministic product quadrature on half-balls, hemispheres,
//!   disks, and spheres.
//! * [`hyperbolic`] — constant-curvature models behind the solution family:
//!   ball and hyperboloid realizations, isometries between them, eigenvalue
//!   characterizations on truncated domains.
//! * [`solver`] — finite-difference grids, sparse linear algebra, the
//!   linearized-operator spectrum, and the boundary-curvature correction solve.
//! * [`greens`] — half-space Green-type functions with singularity
//!   subtraction and expansion-coefficient extraction.
//! * [`pohozaev`] — scaling (Pohozaev-type) flux balances, an asymptotic
//!   charge at infinity, and their defect relation.
//! * [`blowup`] — concentrating sequences, peak rescaling, simplicity and
//!   isolation audits, and a nonlinear refinement audit.
//! * [`report`] — serializable verification reports (JSON and CSV).
//! * [`suite`] — the deterministic end-to-end verification suite.

pub mod blowup;
pub mod geometry;
pub mod greens;
pub mod hyperbolic;
pub mod models;
pub mod pohozaev;
pub mod quad;
pub mod report;
pub mod solver;
pub mod suite;
