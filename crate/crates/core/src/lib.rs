//! Globally convergent observers for rigid-body pose, linear velocity and
//! constant gyro/accelerometer biases.
//!
//! Two observers are provided. [`observer_const`] uses scalar gains and
//! needs a bound on the angular speed; [`observer_riccati`] obtains its gains
//! from a continuous Riccati equation and needs no such bound. Both keep the
//! attitude estimate in the ambient space of 3×3 matrices, which is what
//! makes global convergence possible.
//!
//! The rest of the crate is the harness around them: a rigid-body simulator
//! with biased, noisy sensors ([`dynamics`]), a closed-loop driver ([`sim`]),
//! log replay ([`replay`]), diagnostics ([`diagnostics`]) and file formats
//! ([`trace`], [`config`]).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod geometry;
pub mod observer;
pub mod observer_const;
pub mod observer_riccati;
pub mod ode;
pub mod replay;
pub mod sim;
pub mod trace;

pub use error::{Error, Result};
