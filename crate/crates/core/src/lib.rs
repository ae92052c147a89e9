//! Numerics for fractional backward doubly stochastic differential equations
//! driven by a fractional Brownian motion with Hurst index below one half.
//!
//! The crate is organised bottom-up:
//!
//! * [`fractional`]: fractional integrals and derivatives, the Volterra kernel,
//!   the transfer operators `K` and `K*`, and fBm sampling from Wiener increments.
//! * [`girsanov`]: the shift maps `T_t`, `A_t`, the exponential `ε_t` and the
//!   closed-form shift algebra on a discrete frame.
//! * [`divergence`]: Wiener integrals, backward Itô sums and duality checks.
//! * [`anticipating`]: the anticipating SDE solved through its pathwise ODE.
//! * [`bdsde`]: a regression Monte Carlo solver for the pathwise BSDE and the
//!   map back to the doubly stochastic equation.
//! * [`spde`]: forward SDEs, value fields and a finite-difference cross-check.
//!
//! Path loops run on rayon when the `parallel` feature is enabled (the default)
//! and sequentially otherwise. Every path draws from its own counter-based RNG
//! stream, so results do not depend on scheduling.

pub mod anticipating;
pub mod bdsde;
pub mod divergence;
pub mod error;
pub mod exec;
pub mod export;
pub mod fractional;
pub mod functional;
pub mod girsanov;
pub mod grid;
pub mod quad;
pub mod rng;
pub mod spde;
pub mod stats;

pub use error::{Error, Result};
pub use exec::Execution;
pub use grid::{GridFunction, Layout, TimeGrid};
