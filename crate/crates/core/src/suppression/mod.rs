// SPDX-License-Identifier: MIT OR Apache-2.0

//! Low-magnitude suppression sweeps scored on multiple-choice items.

mod dataset;
mod report;

pub use dataset::{
    generate_toy_dataset, read_dataset, read_logit_records, write_dataset, write_logit_records, EvalItem,
    LogitRecord,
};
pub use report::{
    evaluate_item, final_logits, jeffreys_divergence, report_from_logits, sweep_suppression, Outcome,
    SuppressionReport, SuppressionRow,
};

use crate::engine::{forward, ForwardTrace, Hooks, ModelWeights, SuppressionSpec};
use crate::error::Result;
use crate::numerics::Matrix;

/// Forward pass with the lowest `k` percent of every block output zeroed.
pub fn suppressed_forward(weights: &ModelWeights, x0: &Matrix, k: f64) -> Result<ForwardTrace> {
    forward(weights, x0, &Hooks::none().with_suppression(SuppressionSpec::new(k)?))
}
