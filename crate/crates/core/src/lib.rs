//! Minimax tests and confidence intervals for the Gaussian moment inequality model
//! `Z ~ N(μ, I_k)`, `μ(j) ≥ θ` for all j.
//!
//! The crate covers one-sided L^p statistics and their least-favorable critical values,
//! exact and simulated minimax power, confidence bounds by test inversion together with
//! numerical checks of the test/CI duality, the Neyman–Pearson power bound, and the
//! welfare-separated treatment testing problem.
//!
//! All simulation is deterministic given a [`SimConfig`]: replications are split into
//! fixed blocks and each block reads its own counter-based stream, so results do not
//! depend on the number of worker threads.

pub mod bounds;
pub mod cache;
pub mod ci;
pub mod critical;
mod error;
pub mod model;
pub mod normal;
pub mod power;
pub mod report;
pub mod sim;
pub mod stats;
pub mod treatment;

pub use error::{Error, Result};
pub use sim::SimConfig;
pub use stats::NormOrder;
