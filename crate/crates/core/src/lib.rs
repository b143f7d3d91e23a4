//! Stochastic composition optimization at desk scale.
//!
//! This crate solves penalized two-level composition problems
//!
//! ```text
//!     min_x  H(x) = f(g(x)) + R(x),      g(x) = E_w[g_w(x)],  f(y) = E_v[f_v(y)],
//! ```
//!
//! where the solver only sees random realizations `g_w(x)`, `∇g_w(x)` and
//! `∇f_v(y)` through a sampling oracle, and `R` is a (possibly nonsmooth)
//! convex penalty handled through its proximal mapping.
//!
//! The pieces:
//!
//! - [`oracle`] — the sampling-oracle interface and exact-truth accessors,
//! - [`prox`] — penalties with closed-form proximal mappings,
//! - [`schedules`] — two-timescale step-size laws and smoothing weights,
//! - [`solver`] — the ASC-PG main loop and the SCGD baseline,
//! - [`problems`] — benchmark families (policy evaluation on MDPs,
//!   mean-variance risk, synthetic linear compositions),
//! - [`metrics`] — cross-seed aggregation and log-log rate fitting,
//! - [`verify`] — runtime property checks (unbiasedness, variance,
//!   gradient consistency, ...),
//! - [`harness`] — parallel multi-seed execution.

pub mod error;
pub mod harness;
pub mod metrics;
pub mod oracle;
pub mod problems;
pub mod prox;
pub mod schedules;
pub mod solver;
pub mod trace;
pub mod verify;

pub use error::{Error, Result};

/// Dense column vector of `f64`; iterates, samples and gradients all use it.
pub type Vector = nalgebra::DVector<f64>;
/// Dense matrix of `f64`; Jacobians and problem data.
pub type Matrix = nalgebra::DMatrix<f64>;
