// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::engine::ForwardTrace;
use crate::error::{Error, Result};
use crate::numerics::{cosine, norm2};

/// Size and direction of one component relative to the final state.
/// `cosine` is `None` for a zero component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    pub ratio: f64,
    pub cosine: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerGeometry {
    pub layer: usize,
    pub att: Alignment,
    pub mlp: Alignment,
}

pub fn alignment(component: &[f64], target: &[f64]) -> Result<Alignment> {
    let t = norm2(target);
    if t == 0.0 {
        return Err(Error::DegenerateTarget);
    }
    Ok(Alignment {
        ratio: norm2(component) / t,
        cosine: cosine(component, target),
    })
}

pub fn component_geometry(trace: &ForwardTrace, token: usize) -> Result<Vec<LayerGeometry>> {
    if token >= trace.seq_len() {
        return Err(Error::Index(format!(
            "token {token} with sequence length {}",
            trace.seq_len()
        )));
    }
    let target = trace.final_state().row(token);
    (0..trace.layers())
        .map(|layer| {
            Ok(LayerGeometry {
                layer,
                att: alignment(trace.att[layer].row(token), target)?,
                mlp: alignment(trace.mlp[layer].row(token), target)?,
            })
        })
        .collect()
}
