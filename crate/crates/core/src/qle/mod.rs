// SPDX-License-Identifier: MIT OR Apache-2.0

//! Quasi-Lyapunov exponents of the layer map and of greedy decoding.

mod field;
mod intra;
mod iterative;

pub use field::{qle_elementwise_field, FieldLabel, FieldSpec, QleField};
pub use intra::{delta_sweep, qle_intra, DeltaSweep, HalvingCheck, IntraQle, QleConfig, QleSite};
pub use iterative::{qle_iterative, trajectory_gap, IterativeQleResult};

use serde::{Deserialize, Serialize};

pub const DEFAULT_ABSOLUTE_DELTA: f64 = 1e-6;
pub const DEFAULT_RELATIVE_K: f64 = 1e-4;
pub const DEFAULT_NEUTRAL_BAND: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Divergent,
    Convergent,
    Neutral,
}

/// Divergent above `+band`, convergent below `-band`, neutral in between.
/// A `-inf` exponent (no difference at all) is convergent.
pub fn classify_regime(lambda: f64, band: f64) -> Regime {
    if lambda > band {
        Regime::Divergent
    } else if lambda < -band {
        Regime::Convergent
    } else {
        Regime::Neutral
    }
}

/// `ln(out / inp) / steps`, with `-inf` for a vanished difference.
pub(crate) fn log_rate(out: f64, inp: f64, steps: usize) -> f64 {
    if out == 0.0 {
        f64::NEG_INFINITY
    } else {
        (out / inp).ln() / steps as f64
    }
}
