//! Exact optimal experimental design on finite design spaces under
//! combined linear and sparsity constraints.
//!
//! An exact design assigns a non-negative integer replication count to each
//! candidate point of a finite design space. This crate computes designs that
//! maximize the D-criterion `(det M)^(1/m)` of the Fisher information matrix
//! `M(w) = Σ w(x_i) H(x_i)`, subject to constraints that may mix linear terms
//! in the counts with terms in the 0/1 support indicator (budget caps with
//! per-dose overheads, support-size bounds, space-filling windows, bounded
//! replication at support points, and so on).
//!
//! The pipeline:
//!
//! 1. [`LasProblem`] describes the design space, an information model
//!    (e.g. the trinomial continuation-ratio dose-response model in
//!    [`models`]), the constraint rows, and the design size `N`.
//! 2. [`decompose`] factors each elementary information matrix into at most
//!    `r` rank-one terms (symmetric eigendecomposition or pivoted Cholesky).
//! 3. [`reduce`] compiles the problem into an equivalent auxiliary problem
//!    with rank-one regressors and purely linear constraints: each point is
//!    replaced by `r` replica points plus one zero-regressor label point
//!    whose binary count tracks support membership, linked by big-M rows.
//!    The auxiliary problem can be exported to a portable text file for
//!    external solvers ([`auxfile`]).
//! 4. [`solve`] optimizes the auxiliary problem exactly with branch-and-bound
//!    over the integer counts and binary indicators, bounding nodes by a
//!    conditional-gradient (Frank-Wolfe) relaxation of `log det M` whose
//!    linear subproblems go through a bounded-variable simplex. A brute-force
//!    enumerator doubles as a ground-truth oracle on small instances.
//!
//! Solutions of the auxiliary problem map back to the original space through
//! the replica-1 counts (`reduce::kappa`).

pub mod auxfile;
pub mod constraint;
pub mod decompose;
pub mod design;
mod error;
pub mod fileio;
pub mod linalg;
pub mod models;
pub mod problem;
pub mod reduce;
pub mod solve;
pub mod space;

pub use constraint::{ConstraintSense, FeasibilityReport, LinearSparsityConstraint};
pub use design::ExactDesign;
pub use error::Error;
pub use linalg::SymMatrix;
pub use problem::{criterion_d, d_efficiency, Criterion, InformationMatrix, LasProblem};
pub use space::{DesignPoint, DesignSpace};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
