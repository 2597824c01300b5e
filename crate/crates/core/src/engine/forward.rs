// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::hooks::{suppress_lowest, Hooks, InjectionRecord, LayerSet, Replacement};
use super::{attention_block, mlp_block, ModelWeights};
use crate::error::{Error, Result};
use crate::numerics::{rms_norm_rows, Matrix};

/// Every residual-stream quantity of one forward pass.
///
/// Indexing follows the residual stream: `states[0]` is the embedded input
/// `X^(0)`, `states[n + 1]` the output of block `n`. For block `n`:
///
/// * `mid[n] = states[n] + att[n]`
/// * `states[n + 1] = mid[n] + mlp[n] + interventions[n + 1]`
///
/// `interventions[t]` is the change hooks (suppression, perturbation) made
/// to tap `t` after the block produced it, `None` when untouched. For tap 0
/// it is relative to the caller's input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForwardTrace {
    pub states: Vec<Matrix>,
    pub mid: Vec<Matrix>,
    pub att: Vec<Matrix>,
    pub mlp: Vec<Matrix>,
    pub interventions: Vec<Option<Matrix>>,
    pub injections: Vec<InjectionRecord>,
    /// Elements zeroed by suppression in each block output.
    pub suppressed: Vec<usize>,
}

impl ForwardTrace {
    pub fn layers(&self) -> usize {
        self.att.len()
    }

    pub fn seq_len(&self) -> usize {
        self.states[0].rows()
    }

    pub fn hidden(&self) -> usize {
        self.states[0].cols()
    }

    pub fn input(&self) -> &Matrix {
        &self.states[0]
    }

    pub fn final_state(&self) -> &Matrix {
        self.states.last().expect("trace has at least the input state")
    }
}

fn validate_hooks(weights: &ModelWeights, x0: &Matrix, hooks: &Hooks) -> Result<()> {
    let cfg = &weights.config;
    for p in &hooks.perturbations {
        p.validate(cfg.layers, x0.rows(), cfg.hidden)?;
    }
    if let Some(s) = &hooks.suppression {
        s.validate()?;
        if let LayerSet::Only(set) = &s.layers {
            if let Some(&bad) = set.iter().find(|&&l| l >= cfg.layers) {
                return Err(Error::Index(format!("suppression layer {bad} of {}", cfg.layers)));
            }
        }
    }
    for d in &hooks.diagnostics {
        if d.layer >= cfg.layers {
            return Err(Error::Index(format!("diagnostic layer {} of {}", d.layer, cfg.layers)));
        }
        if let Replacement::Scale { c } = d.replacement {
            if !c.is_finite() {
                return Err(Error::Argument("diagnostic scale must be finite".into()));
            }
        }
    }
    Ok(())
}

/// Run the block stack on `x0`, applying `hooks` and recording every tap.
///
/// Block `n` computes `X' = X + att(Norm(X))` then `X^(n+1) = X' + mlp(Norm(X'))`.
/// A diagnostic replacement swaps the whole block for `X -> X` or `X -> cX`.
/// Suppression then zeroes the lowest-magnitude entries of `X^(n+1)`, and
/// perturbations targeting tap `n + 1` are added last.
pub fn forward(weights: &ModelWeights, x0: &Matrix, hooks: &Hooks) -> Result<ForwardTrace> {
    let cfg = &weights.config;
    if x0.cols() != cfg.hidden {
        return Err(Error::shape(
            "forward",
            format!("input has {} columns, hidden is {}", x0.cols(), cfg.hidden),
        ));
    }
    if x0.rows() > cfg.max_seq {
        return Err(Error::Capacity {
            needed: x0.rows(),
            max_seq: cfg.max_seq,
        });
    }
    validate_hooks(weights, x0, hooks)?;

    let layers = cfg.layers;
    let mut trace = ForwardTrace {
        states: Vec::with_capacity(layers + 1),
        mid: Vec::with_capacity(layers),
        att: Vec::with_capacity(layers),
        mlp: Vec::with_capacity(layers),
        interventions: Vec::with_capacity(layers + 1),
        injections: Vec::new(),
        suppressed: Vec::with_capacity(layers),
    };

    let mut injections = Vec::new();
    let (state, delta) = inject(hooks, 0, x0.clone(), &mut injections)?;
    trace.states.push(state);
    trace.interventions.push(delta.filter(|d| d.as_slice().iter().any(|&v| v != 0.0)));

    for n in 0..layers {
        let x = &trace.states[n];
        let (att, mid, mlp, raw) = match hooks.diagnostic_for(n) {
            Some(Replacement::Identity) => (
                Matrix::zeros(x.rows(), x.cols()),
                x.clone(),
                Matrix::zeros(x.rows(), x.cols()),
                x.clone(),
            ),
            Some(Replacement::Scale { c }) => {
                let out = x.scale(c);
                let mlp = out.sub(x)?;
                (Matrix::zeros(x.rows(), x.cols()), x.clone(), mlp, out)
            }
            None => {
                let layer = &weights.layers[n];
                let att = attention_block(layer, cfg, x)?;
                let mid = x.add(&att)?;
                let mlp = mlp_block(layer, cfg, &mid)?;
                let raw = mid.add(&mlp)?;
                (att, mid, mlp, raw)
            }
        };
        if !raw.is_finite() || !att.is_finite() || !mlp.is_finite() {
            return Err(Error::NumericOverflow { layer: n });
        }

        let mut out = raw.clone();
        let mut suppressed = 0;
        if let Some(s) = hooks.suppression.as_ref().filter(|s| s.layers.contains(n)) {
            suppressed = s.zero_count(out.as_slice().len());
            suppress_lowest(&mut out, suppressed);
        }
        let (out, _) = inject(hooks, n + 1, out, &mut injections)?;
        let delta = if out == raw { None } else { Some(out.sub(&raw)?) };

        trace.att.push(att);
        trace.mid.push(mid);
        trace.mlp.push(mlp);
        trace.states.push(out);
        trace.interventions.push(delta);
        trace.suppressed.push(suppressed);
    }
    trace.injections = injections;
    Ok(trace)
}

/// Apply the perturbations aimed at `tap`. Returns the new state and its
/// difference from `state` when anything was applied.
fn inject(
    hooks: &Hooks,
    tap: usize,
    state: Matrix,
    records: &mut Vec<InjectionRecord>,
) -> Result<(Matrix, Option<Matrix>)> {
    let mut targeted = hooks.perturbations.iter().filter(|p| p.tap() == tap).peekable();
    if targeted.peek().is_none() {
        return Ok((state, None));
    }
    let mut out = state.clone();
    for p in targeted {
        records.push(p.apply(&mut out));
    }
    if !out.is_finite() {
        return Err(Error::NumericOverflow {
            layer: tap.saturating_sub(1),
        });
    }
    let delta = out.sub(&state)?;
    Ok((out, Some(delta)))
}

/// Final RMS norm then unembedding: `seq x vocab` logits.
pub fn logits(weights: &ModelWeights, x_final: &Matrix) -> Result<Matrix> {
    if x_final.cols() != weights.config.hidden {
        return Err(Error::shape(
            "logits",
            format!(
                "state has {} columns, hidden is {}",
                x_final.cols(),
                weights.config.hidden
            ),
        ));
    }
    rms_norm_rows(x_final, &weights.final_norm, weights.config.norm_epsilon).matmul(&weights.unembedding)
}

/// Index of the largest value; ties go to the smallest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
