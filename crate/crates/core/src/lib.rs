//! Simulation and analysis of asynchronous stochastic gradient descent with
//! stale (possibly unbounded) gradient delays.
//!
//! The crate is organised bottom-up:
//!
//! - [`problems`]: objectives with exact gradients and stochastic gradient oracles.
//! - [`delay`]: staleness processes, the weight sequence `{c_i}` that couples delay
//!   probabilities to the Lyapunov function, and admissibility of step sizes.
//! - [`schedules`]: step-size and batch-size schedules plus their validity checks.
//! - [`engine`]: Sync-SGD, Async-SGD and Async-SGD with increasing batches, executed
//!   in seeded virtual time.
//! - [`diagnostics`]: Lyapunov values, Monte-Carlo checks of the one-step descent
//!   inequality, log-log rate fits and run comparisons.

pub mod delay;
pub mod diagnostics;
pub mod engine;
mod error;
pub mod linalg;
pub mod problems;
pub mod rng;
pub mod schedules;

pub use error::{Error, Result};
pub use rng::SimRng;
