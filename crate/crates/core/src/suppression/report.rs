// SPDX-License-Identifier: MIT OR Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{EvalItem, LogitRecord};
use crate::engine::{argmax, embed, forward, logits, Hooks, ModelWeights, SuppressionSpec};
use crate::error::{Error, Result};
use crate::numerics::log_softmax;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Correct,
    Incorrect,
    Irrelevant,
}

fn classify(item: &EvalItem, predicted: u32) -> Outcome {
    if predicted == item.correct_token() {
        Outcome::Correct
    } else if item.choice_tokens.contains(&predicted) {
        Outcome::Incorrect
    } else {
        Outcome::Irrelevant
    }
}

/// Final-position logits of `item.prompt` under suppression `k`, plus the
/// per-layer count of zeroed elements.
pub fn final_logits(weights: &ModelWeights, item: &EvalItem, k: f64) -> Result<(Vec<f64>, Vec<usize>)> {
    item.validate(weights.config.vocab, weights.config.max_seq)?;
    let hooks = Hooks::none().with_suppression(SuppressionSpec::new(k)?);
    let trace = forward(weights, &embed(weights, &item.prompt)?, &hooks)?;
    let last = trace.final_state().row_slice(item.prompt.len() - 1, 1);
    Ok((logits(weights, &last)?.into_vec(), trace.suppressed))
}

/// Category of the full-vocabulary argmax under suppression `k`.
pub fn evaluate_item(weights: &ModelWeights, item: &EvalItem, k: f64) -> Result<Outcome> {
    let (row, _) = final_logits(weights, item, k)?;
    Ok(classify(item, argmax(&row) as u32))
}

/// `KL(p || q) + KL(q || p)` of the softmax distributions of two logit rows.
pub fn jeffreys_divergence(a: &[f64], b: &[f64]) -> f64 {
    let la = log_softmax(a);
    let lb = log_softmax(b);
    la.iter()
        .zip(&lb)
        .map(|(x, y)| (x.exp() - y.exp()) * (x - y))
        .sum::<f64>()
        .max(0.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppressionRow {
    pub k: f64,
    pub correct: usize,
    pub incorrect: usize,
    pub irrelevant: usize,
    /// Share of items whose full-vocabulary argmax matches the `k = 0` run.
    pub top1_agreement: f64,
    /// Mean symmetrised KL against the `k = 0` distributions.
    pub mean_kl: f64,
    /// Elements zeroed in each block output, summed over items. Empty when
    /// the logits came from outside.
    pub zeroed_per_layer: Vec<usize>,
}

impl SuppressionRow {
    pub fn total(&self) -> usize {
        self.correct + self.incorrect + self.irrelevant
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppressionReport {
    pub items: usize,
    pub rows: Vec<SuppressionRow>,
}

fn aggregate(
    dataset: &[EvalItem],
    k: f64,
    baseline: &[Vec<f64>],
    rows: &[Vec<f64>],
    zeroed_per_layer: Vec<usize>,
) -> SuppressionRow {
    let mut row = SuppressionRow {
        k,
        correct: 0,
        incorrect: 0,
        irrelevant: 0,
        top1_agreement: 0.0,
        mean_kl: 0.0,
        zeroed_per_layer,
    };
    let mut agree = 0usize;
    let mut kl = 0.0;
    for ((item, base), logits) in dataset.iter().zip(baseline).zip(rows) {
        let top = argmax(logits);
        match classify(item, top as u32) {
            Outcome::Correct => row.correct += 1,
            Outcome::Incorrect => row.incorrect += 1,
            Outcome::Irrelevant => row.irrelevant += 1,
        }
        if top == argmax(base) {
            agree += 1;
        }
        kl += jeffreys_divergence(base, logits);
    }
    let n = dataset.len() as f64;
    row.top1_agreement = agree as f64 / n;
    row.mean_kl = kl / n;
    row
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Argument("k grid is empty".into()));
    }
    for &k in grid {
        SuppressionSpec::new(k)?;
    }
    Ok(())
}

/// Evaluate every item at every `k` of the grid. Items run in parallel.
pub fn sweep_suppression(
    weights: &ModelWeights,
    dataset: &[EvalItem],
    grid: &[f64],
) -> Result<SuppressionReport> {
    if dataset.is_empty() {
        return Err(Error::Argument("dataset is empty".into()));
    }
    check_grid(grid)?;
    let run = |k: f64| -> Result<Vec<(Vec<f64>, Vec<usize>)>> {
        dataset.par_iter().map(|item| final_logits(weights, item, k)).collect()
    };
    let baseline: Vec<Vec<f64>> = run(0.0)?.into_iter().map(|(l, _)| l).collect();
    let mut rows = Vec::with_capacity(grid.len());
    for &k in grid {
        let results = run(k)?;
        let mut zeroed = vec![0usize; weights.config.layers];
        for (_, z) in &results {
            for (acc, v) in zeroed.iter_mut().zip(z) {
                *acc += v;
            }
        }
        let logits: Vec<Vec<f64>> = results.into_iter().map(|(l, _)| l).collect();
        rows.push(aggregate(dataset, k, &baseline, &logits, zeroed));
    }
    Ok(SuppressionReport {
        items: dataset.len(),
        rows,
    })
}

/// Build a report from externally computed logits. Every `(k, item)` pair of
/// the grid must be present exactly once, and `k = 0` provides the baseline.
pub fn report_from_logits(dataset: &[EvalItem], records: &[LogitRecord]) -> Result<SuppressionReport> {
    if dataset.is_empty() {
        return Err(Error::Argument("dataset is empty".into()));
    }
    let mut grid: Vec<f64> = Vec::new();
    for r in records {
        if !grid.contains(&r.k) {
            grid.push(r.k);
        }
    }
    check_grid(&grid)?;
    let collect = |k: f64| -> Result<Vec<Vec<f64>>> {
        let mut slots: Vec<Option<Vec<f64>>> = vec![None; dataset.len()];
        for r in records.iter().filter(|r| r.k == k) {
            let slot = slots.get_mut(r.item).ok_or_else(|| {
                Error::Validation(format!("logit record for item {} of {}", r.item, dataset.len()))
            })?;
            if slot.replace(r.logits.clone()).is_some() {
                return Err(Error::Validation(format!("duplicate logits for item {} at k={k}", r.item)));
            }
        }
        slots
            .into_iter()
            .enumerate()
            .map(|(i, s)| s.ok_or_else(|| Error::Validation(format!("no logits for item {i} at k={k}"))))
            .collect()
    };
    if !grid.contains(&0.0) {
        return Err(Error::Validation("logit records need a k = 0 baseline".into()));
    }
    let baseline = collect(0.0)?;
    let mut rows = Vec::with_capacity(grid.len());
    for &k in &grid {
        rows.push(aggregate(dataset, k, &baseline, &collect(k)?, Vec::new()));
    }
    Ok(SuppressionReport {
        items: dataset.len(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jeffreys_of_identical_rows_is_zero() {
        let a = [0.1, 2.0, -1.0];
        assert_eq!(jeffreys_divergence(&a, &a), 0.0);
        // shift invariance of the softmax
        let b = [1.1, 3.0, 0.0];
        assert!(jeffreys_divergence(&a, &b) < 1e-15);
        let c = [0.0, 0.0, 0.0];
        let d = jeffreys_divergence(&a, &c);
        assert!(d > 0.0);
        assert!((d - jeffreys_divergence(&c, &a)).abs() < 1e-15);
    }

    #[test]
    fn external_logits_report() {
        let item = EvalItem {
            prompt: vec![0],
            choice_tokens: vec![1, 2],
            correct_index: 0,
        };
        let rec = |k, logits: Vec<f64>| LogitRecord { k, item: 0, logits };
        let records = vec![rec(0.0, vec![0.0, 5.0, 1.0]), rec(10.0, vec![9.0, 0.0, 0.0])];
        let r = report_from_logits(&[item.clone()], &records).unwrap();
        assert_eq!(r.rows.len(), 2);
        assert_eq!(r.rows[0].correct, 1);
        assert_eq!(r.rows[0].top1_agreement, 1.0);
        assert_eq!(r.rows[1].irrelevant, 1);
        assert_eq!(r.rows[1].top1_agreement, 0.0);
        assert!(report_from_logits(&[item.clone()], &records[1..]).is_err());
        let dup = vec![records[0].clone(), records[0].clone()];
        assert!(report_from_logits(&[item], &dup).is_err());
    }
}
