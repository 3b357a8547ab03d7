//! Markov processes with Poisson restarts.
//!
//! A base kernel (Brownian motion with drift, geometric Brownian motion or
//! a finite continuous-time chain) is composed with a restart clock of rate
//! `λ` that redraws the state from a fixed law `ν`. The crate evaluates the
//! restarted transition function, its invariant measure and moments by
//! certified quadrature, simulates the process exactly, and checks the
//! ergodicity and moment properties numerically.

// `!(a < b)` is used on purpose wherever NaN must fail the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod distribution;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod processes;
pub mod quadrature;
pub mod simulation;
pub mod space;

pub use distribution::{ContinuousLaw, DensityFamily, Distribution};
pub use error::{Error, Result, Warning};
pub use kernel::{invariant_from_resolvent, resolvent, MarkovKernel, RestartSpec, RestartedProcess};
pub use processes::{BrownianWithDrift, FiniteCtmc, GeometricBrownian};
pub use quadrature::{QuadratureError, QuadratureOptions, QuadratureResult};
pub use space::{StateSpace, Target};
