//! Numerical diagnosis of local solution stability in parametric optimization.
//!
//! Given a problem `minimize phi(x, u) - v.[x - xbar]` over a ball around an
//! anchor `xbar`, this crate estimates how the localized minimizer map
//! `M(v, u)` and optimal-value map `m(v, u)` respond to tilt perturbations
//! `v` and parameter shifts `u`, and classifies the anchor as tilt-stable,
//! substable, fully substable, or fully stable on numerical evidence.
//!
//! The main pieces:
//!
//! - [`problem`]: polynomial composite problems `f0(x) + g(F(x) + u)` and a
//!   registry of closed-form calibration problems,
//! - [`subdiff`]: convex-piece subdifferentials, KKT multiplier polytopes,
//!   and constraint-qualification checks,
//! - [`solver`]: localized multi-start minimization, stationary-point maps,
//!   and batch value surfaces,
//! - [`probes`]: Lipschitz-modulus trends, envelope-identity residuals,
//!   hypo-convexity elicitation, prox-regularity levels, graphical-derivative
//!   inner norms, and the stability classifier,
//! - [`second_order`]: Lagrangian Hessians, strong second-order sufficiency
//!   over the whole multiplier set, and definiteness moduli of second-order
//!   difference quotients,
//! - [`report`]: machine-readable probe reports behind the `varstab` CLI.
//!
//! All estimates are empirical: verdicts are `pass`/`fail`/`inconclusive`
//! at the probed resolution, never proofs. Runs are deterministic for a
//! fixed seed, independent of worker count.

pub mod cli;
pub mod error;
pub mod linalg;
pub mod poly;
pub mod polytope;
pub mod probes;
pub mod problem;
pub mod report;
pub mod second_order;
pub mod solver;
pub mod subdiff;

pub use error::{Error, Result};
pub use poly::{Polynomial, SmoothMap};
pub use polytope::PolyhedralSet;

pub use problem::{registry_build, ConvexPiece, ParametricProblem, ProblemBody};
pub use solver::{ArgminResult, Localization, SolveConfig};
