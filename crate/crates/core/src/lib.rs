//! Projected dynamical systems on time-varying, piecewise-smooth constraint domains.
//!
//! The crate is organised bottom-up:
//!
//! * [`domain`] describes sets `{x | g(x,t) <= 0, h(x,t) = 0}` and their finite unions,
//!   together with active-set detection and constraint qualification grading.
//! * [`cones`] builds the temporal tangent polyhedron `{v | ∇ₓg v <= -∂ₜg, ∇ₓh v = -∂ₜh}`
//!   at a point and its union over the pieces containing that point.
//! * [`projection`] projects vectors onto those polyhedra and points onto the nonlinear
//!   sets, with brute-force grid oracles used by the tests.
//! * [`analysis`] estimates forward Lipschitz constants of a moving set by sampling.
//! * [`integrator`] time-steps `ẋ ∈ Π_X f(x,t)` with a catching-up or tangent-Euler scheme.
//! * [`scenarios`] ships the wedge, parabola and two-bus power-flow domains.
//! * [`cli`] holds the run configuration and the subcommands behind the `pdsflow` binary.

// `!(x > 0.0)` is used deliberately so NaN inputs fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod cones;
pub mod domain;
mod error;
pub mod integrator;
mod linalg;
pub mod projection;
pub mod scenarios;

pub use error::{Error, Result};
