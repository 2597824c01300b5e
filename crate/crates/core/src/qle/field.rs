// SPDX-License-Identifier: MIT OR Apache-2.0

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::log_rate;
use crate::engine::{forward, Hooks, ModelWeights, PerturbationMode, PerturbationSpec};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldLabel {
    Divergent,
    Convergent,
    Undefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldSpec {
    /// Tap whose row `token` is perturbed.
    pub layer: usize,
    pub token: usize,
    pub mode: PerturbationMode,
    /// Tap that is observed; must lie deeper than `layer`.
    pub observed: usize,
}

/// Per-position exponents: `values[i][j]` is the response at `(i, j)` of the
/// observed tap to perturbing element `j` of the source row alone.
///
/// A zero response is stored as `-inf` (convergent); a source element the
/// perturbation could not move makes its whole column `NaN` (undefined).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QleField {
    pub spec: FieldSpec,
    pub values: Vec<Vec<f64>>,
    pub labels: Vec<Vec<FieldLabel>>,
    /// Realised source perturbation per element; `0` for undefined columns.
    pub source_delta: Vec<f64>,
}

impl QleField {
    pub fn count(&self, label: FieldLabel) -> usize {
        self.labels.iter().flatten().filter(|&&l| l == label).count()
    }
}

fn column(
    weights: &ModelWeights,
    x0: &Matrix,
    baseline: &crate::engine::ForwardTrace,
    spec: &FieldSpec,
    j: usize,
    base: &Hooks,
) -> Result<(f64, Vec<f64>)> {
    let p = PerturbationSpec::at_layer(spec.layer, spec.token, Some(j), spec.mode);
    let run = forward(weights, x0, &base.clone().with_perturbation(p))?;
    let delta = run.states[spec.layer].get(spec.token, j) - baseline.states[spec.layer].get(spec.token, j);
    let seq = x0.rows();
    if delta == 0.0 {
        return Ok((0.0, vec![f64::NAN; seq]));
    }
    let steps = spec.observed - spec.layer;
    let obs = (&run.states[spec.observed], &baseline.states[spec.observed]);
    let col = (0..seq)
        .map(|i| log_rate((obs.0.get(i, j) - obs.1.get(i, j)).abs(), delta.abs(), steps))
        .collect();
    Ok((delta, col))
}

/// One independent perturbed pass per element of the source row. Passes run
/// in parallel; results are assembled in element order.
pub fn qle_elementwise_field(
    weights: &ModelWeights,
    x0: &Matrix,
    spec: &FieldSpec,
    base: &Hooks,
) -> Result<QleField> {
    let layers = weights.config.layers;
    if spec.observed <= spec.layer || spec.observed > layers {
        return Err(Error::Argument(format!(
            "observed tap {} must lie in ({}, {layers}]",
            spec.observed, spec.layer
        )));
    }
    if spec.token >= x0.rows() {
        return Err(Error::Index(format!(
            "token {} with sequence length {}",
            spec.token,
            x0.rows()
        )));
    }
    let mag = spec.mode.magnitude();
    if !(mag.is_finite() && mag > 0.0) {
        return Err(Error::Argument(format!(
            "perturbation magnitude {mag} must be positive and finite"
        )));
    }
    let baseline = forward(weights, x0, base)?;
    let columns = (0..weights.config.hidden)
        .into_par_iter()
        .map(|j| column(weights, x0, &baseline, spec, j, base))
        .collect::<Result<Vec<_>>>()?;

    let seq = x0.rows();
    let mut values = vec![vec![0.0; columns.len()]; seq];
    let mut labels = vec![vec![FieldLabel::Undefined; columns.len()]; seq];
    let mut source_delta = Vec::with_capacity(columns.len());
    for (j, (delta, col)) in columns.into_iter().enumerate() {
        source_delta.push(delta);
        for (i, v) in col.into_iter().enumerate() {
            values[i][j] = v;
            labels[i][j] = if v.is_nan() {
                FieldLabel::Undefined
            } else if v > 0.0 {
                FieldLabel::Divergent
            } else {
                FieldLabel::Convergent
            };
        }
    }
    Ok(QleField {
        spec: *spec,
        values,
        labels,
        source_delta,
    })
}
