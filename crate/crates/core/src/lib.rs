//! Robust stabilization of control-affine systems from simulator access.
//!
//! The stabilizing part of the control comes from a dual ensemble Kalman
//! filter: an interacting particle system run backward in time whose
//! terminal covariance approximates the inverse of the Riccati (or value
//! function Hessian) solution. A Lyapunov-redesign term is added on top to
//! reject bounded matched disturbances.
//!
//! Module map:
//! - [`pde_sim`]: finite-difference heat and Burgers simulators in
//!   control-affine form, RK4 time stepping, initial conditions, L2 norm.
//! - [`reduced_model`]: DMD with control, discrete to continuous conversion.
//! - [`dual_enkf`]: the particle filter for the linear and nonlinear cases.
//! - [`controller`]: Hamiltonian minimization and the robust term.
//! - [`riccati`]: reference DRE/ARE solvers used as oracles.
//! - [`harness`]: closed-loop experiments, batches, grids and file output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod controller;
pub mod dual_enkf;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod pde_sim;
pub mod reduced_model;
pub mod riccati;
pub mod rng;

pub use error::{Error, Result};
