//! Jump-diffusion mispricing model for AMMs facing CEX–DEX arbitrage.
//!
//! The library models the log mispricing between a centralized exchange
//! price and an AMM pool price as a discrete-time Markov chain: a drift +
//! noise + Bernoulli-jump increment, clamped back to the edge of a fee
//! band whenever an arbitrageur arrives and finds the state outside it.
//! From that chain it computes:
//!
//! - the stationary density of the mispricing by function iteration with
//!   15-point Gauss–Kronrod quadrature ([`stationary`]),
//! - arbitrage trade probability, expected profit, and expected volume
//!   for CPMM/CFMM pools ([`estimators`]),
//! - a seeded Monte Carlo oracle for cross-checking both ([`simulator`]),
//! - threshold-based parameter calibration from return series
//!   ([`calibrate`]),
//! - CEX tick / DEX swap ingestion and mispricing histograms
//!   ([`marketdata`]).
//!
//! The `misprice` binary wires these into `solve`, `fit`, `estimate`,
//! `simulate`, `reproduce`, and `histogram` subcommands; each runnable
//! example under `examples/` demonstrates one capability end to end.

pub mod calibrate;
pub mod config;
pub mod error;
pub mod estimators;
pub mod grid;
pub mod kernel;
pub mod marketdata;
pub mod quadrature;
pub mod simulator;
pub mod stationary;
pub mod tables;

pub use error::{Error, Result};
pub use stationary::{ConvergenceTrace, SolveSettings};
pub use grid::{DensityGrid, GridSpec};
pub use kernel::{FeeBand, ModelParams, NoiseLaw};

