//! Optimal liquidation under price-floor trading conditions.
//!
//! The library solves the nonlinear backward equation
//! `u_t + L u - vol |u|^p = 0` with singular terminal data (forced
//! liquidation shows up as a `+inf` terminal value) for four floor-driven
//! trading regimes, simulates the induced position paths by Monte Carlo,
//! and aggregates the slippage decomposition of the resulting execution
//! prices. See the `examples/` directory for one runnable program per
//! capability; the `pricefloor` binary wraps the same entry points behind
//! `check` / `solve` / `simulate` / `analyze` / `sweep` subcommands.

pub mod config;
pub mod error;
pub mod io;
pub mod model;
pub mod pde1d;
pub mod pde_sv;
pub mod run;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
