// SPDX-License-Identifier: MIT OR Apache-2.0

//! Transformer-dynamics laboratory.
//!
//! A small, fully deterministic LLaMA-style decoder whose forward pass
//! records every residual-stream quantity, plus the analyses that run on top
//! of it:
//!
//! - [`numerics`]: dense `f64` linear algebra, statistics, line fitting and
//!   the classical Lyapunov exponent of 1-D maps.
//! - [`engine`]: weights, the instrumented forward pass, greedy decoding and
//!   hook points (perturbation, suppression, diagnostic layers).
//! - [`residual`]: additive contribution ledgers, magnitude growth curves,
//!   inter-layer correlation, component geometry and projection accounting.
//! - [`qle`]: quasi-Lyapunov exponents across layers and decoding steps.
//! - [`suppression`]: low-magnitude activation suppression sweeps with a
//!   multiple-choice evaluation harness.

pub mod engine;
pub mod error;
pub mod numerics;
pub mod qle;
pub mod residual;
pub mod suppression;

pub use error::{Error, LoadError, Result};
