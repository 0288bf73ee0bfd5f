//! Dynamic Boltzmann machines (DyBM) for online time-series learning.
//!
//! A DyBM couples a FIFO delay line with exponentially decaying eligibility
//! traces, so that each unit's conditional distribution at time `t` depends
//! on the recent history of the series without storing it explicitly. The
//! crate provides:
//!
//! - [`trace`]: the shared state machinery (delay lines, eligibility traces)
//!   together with brute-force reference implementations used as test oracles.
//! - [`binary`]: the binary DyBM in both its original (bias / LTP / LTD)
//!   parameterization and the general lag-plus-trace form, with exact
//!   gradient (STDP-like) learning rules.
//! - [`gaussian`]: Gaussian DyBMs whose conditional means are linear
//!   readouts of the delay line and traces, trained online by plain or
//!   natural-gradient ascent on the log density.
//! - [`optimizer`]: AdaGrad step-size adaptation.
//! - [`experiment`]: an online-learning harness (noisy-sine generator,
//!   per-run records, rolling mean squared error, multi-run averaging) used
//!   to compare DyBM variants against vector-autoregression baselines.
//!
//! With the default `parallel` feature, independent experiment runs execute
//! on a rayon thread pool; disabling it falls back to a sequential loop with
//! identical results.

pub mod binary;
pub mod error;
pub mod experiment;
pub mod gaussian;
pub mod optimizer;
pub mod trace;

pub use error::{DybmError, Result};
