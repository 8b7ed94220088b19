//! Solvers for structured inclusion problems `0 ∈ Az + Fz` where `F` is
//! Lipschitz but possibly nonmonotone (cohypomonotone) and `A` is accessed
//! only through its resolvent.
//!
//! The crate is organised around a handful of layers:
//!
//! * [`point`], [`field`], [`resolvent`] and [`oracle`] hold the shared
//!   vector arithmetic and operator abstractions.
//! * [`problems`] builds the synthetic problem suite (bilinear/quadratic
//!   games, the polar game, Forsaken) together with empirical estimators of
//!   their Lipschitz and comonotonicity constants.
//! * [`solvers`] contains every iteration scheme: inexact Krasnosel'skiĭ-Mann,
//!   the approximate proximal step and the relaxed approximate proximal point
//!   method (RAPP), EG/EG+/CEG+/FBF and the Lookahead wrappers.
//! * [`diagnostics`] computes residuals and checks recorded trajectories
//!   against the convergence bounds these methods satisfy.
//!
//! ```
//! use interp_solve_core::problems;
//! use interp_solve_core::solvers::{self, SolverParams};
//! use interp_solve_core::Point;
//!
//! let problem = problems::quadratic_from_constants(1.0, -0.3).unwrap();
//! let params = SolverParams {
//!     gamma: 0.7,
//!     lambda: 0.5,
//!     tau: 20,
//!     outer_iters: 200,
//!     ..SolverParams::default()
//! };
//! let traj = solvers::rapp_run(&problem, &params, &Point::new(vec![1.0, 0.0])).unwrap();
//! assert!(traj.last().norm() < 1e-6);
//! ```

// `!(x > 0.0)` deliberately rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod field;
pub mod linalg;
pub mod oracle;
pub mod point;
pub mod problems;
pub mod resolvent;
pub mod solvers;

pub use error::{Error, Result};
pub use field::{BoxBounds, VectorField};
pub use oracle::{CountingField, EvalBudget, Oracle, StochasticOracle};
pub use point::Point;
pub use problems::ProblemSpec;
pub use resolvent::ResolventMap;
