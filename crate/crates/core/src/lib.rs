//! Discrete optimal transport, executable end to end.
//!
//! The crate solves the primal transport problem exactly on finitely
//! supported measures, certifies optimality through Kantorovich duals and
//! complementary slackness, and builds the surrounding calculus on top of
//! that one exact solver:
//!
//! - [`measures`]: finitely supported probability measures, pushforward,
//!   moments, product couplings.
//! - [`costs`]: power-of-distance and strictly convex translation costs,
//!   cost matrices, the c-transform and c-concavity checks.
//! - [`solver`]: network-simplex primal solver, dual extraction,
//!   optimality reports, map extraction, bottleneck (`p = inf`) transport.
//! - [`wasserstein`]: `W_p` and `W_inf` distances, ordering inequalities,
//!   convergence diagnostics.
//! - [`geodesics`]: displacement interpolation, constant-speed checks,
//!   metric derivatives, discrete velocities, continuity-equation
//!   residuals.
//! - [`functionals`]: internal-energy, potential, and interaction
//!   functionals with displacement-convexity reports.
//! - [`beckmann`]: minimal-flow problem on grid graphs and its equivalence
//!   with graph-metric transport.
//! - [`monge_ampere`]: 1D monotone rearrangement, Monge-Ampere residuals,
//!   and monotonicity certification of quadratic-cost plans.
//! - [`io`] and [`config`]: file formats and run configuration behind the
//!   `otk` command-line tool.

pub mod beckmann;
pub mod config;
pub mod costs;
pub mod error;
pub mod functionals;
pub mod geodesics;
pub mod io;
pub mod measures;
pub mod monge_ampere;
pub mod solver;
pub mod wasserstein;

pub use error::{Error, Result};
pub use measures::{DiscreteMeasure, PointMap};
