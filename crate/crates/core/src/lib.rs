//! First-order methods for smooth and composite convex problems, plus the
//! machinery to measure how fast they converge.
//!
//! The crate is organised in four layers:
//!
//! * [`oracle`]: problem abstraction (smooth part, regularizer, prox) and a
//!   small gallery of instances with known optima.
//! * [`solvers`]: gradient descent (fixed step and line search), stochastic
//!   coordinate descent, proximal gradient (fixed step and line search) and
//!   stochastic proximal coordinate descent. Every solver returns an
//!   immutable [`solvers::Trace`].
//! * [`diagnostics`]: verdicts over traces (monotonicity, summability, the
//!   `k * delta_k -> 0` signature, iterate-bound checks, power-law fits).
//! * [`tightness`]: the `x^p` slow-convergence construction and its
//!   continuous-time gradient-flow counterpart.

pub mod diagnostics;
pub mod error;
pub mod oracle;
pub mod solvers;
pub mod tightness;

pub use error::{Error, Result};
pub use oracle::{Extended, Problem, Vector};
pub use solvers::{Record, Trace};
