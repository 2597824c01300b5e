// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::log_rate;
use crate::engine::{decode_from, embed, greedy_decode, DecodeResult, ModelWeights, PerturbationSpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterativeQleResult {
    /// `lambdas[m - 1]` for `m = 1..=steps`.
    pub lambdas: Vec<f64>,
    /// `|X'_m - X_m|_F` for `m = 0..=steps`, over the shared leading rows.
    pub gaps: Vec<f64>,
    /// First step (1-based) whose generated token differs.
    pub first_divergence: Option<usize>,
    pub baseline_tokens: Vec<u32>,
    pub perturbed_tokens: Vec<u32>,
    pub baseline_len: usize,
    pub perturbed_len: usize,
    pub delta0: f64,
}

/// Frobenius distance between the input matrices of two decodes at each
/// step, truncated to the shorter one.
pub fn trajectory_gap(a: &DecodeResult, b: &DecodeResult) -> Vec<f64> {
    a.inputs
        .iter()
        .zip(&b.inputs)
        .map(|(x, y)| {
            let rows = x.rows().min(y.rows());
            let n = rows * x.cols();
            x.as_slice()[..n]
                .iter()
                .zip(&y.as_slice()[..n])
                .map(|(p, q)| (p - q) * (p - q))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

/// Greedy-decode the prompt twice, once with `delta0` added to the embedded
/// prompt, and track how far the input matrices drift apart. The prompt
/// perturbation persists in every later input.
pub fn qle_iterative(
    weights: &ModelWeights,
    prompt: &[u32],
    delta0: &PerturbationSpec,
    steps: usize,
) -> Result<IterativeQleResult> {
    if steps == 0 {
        return Err(Error::Argument("iterative QLE needs at least one step".into()));
    }
    if delta0.tap() != 0 {
        return Err(Error::Argument(
            "iterative perturbation must target the initial embedding".into(),
        ));
    }
    let mut initial = embed(weights, prompt)?;
    delta0.validate(weights.config.layers, prompt.len(), weights.config.hidden)?;
    let record = delta0.apply(&mut initial);
    let d0 = record.norm();
    if d0 == 0.0 {
        return Err(Error::UndefinedPerturbation);
    }
    let base = greedy_decode(weights, prompt, steps)?;
    let pert = decode_from(weights, prompt, Some(&initial), steps)?;
    let gaps = trajectory_gap(&base, &pert);
    let lambdas = (1..=steps).map(|m| log_rate(gaps[m], d0, m)).collect();
    let first_divergence = base
        .generated()
        .iter()
        .zip(pert.generated())
        .position(|(a, b)| a != b)
        .map(|i| i + 1);
    Ok(IterativeQleResult {
        lambdas,
        gaps,
        first_divergence,
        baseline_len: base.tokens.len(),
        perturbed_len: pert.tokens.len(),
        baseline_tokens: base.tokens,
        perturbed_tokens: pert.tokens,
        delta0: d0,
    })
}
