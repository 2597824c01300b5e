// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic pre-norm decoder stack with residual-stream taps.

mod blocks;
mod config;
mod decode;
mod forward;
mod hooks;
mod io;
mod weights;

pub use blocks::{attention_block, mlp_block};
pub use config::ModelConfig;
pub use decode::{decode_from, greedy_decode, DecodeResult};
pub use forward::{argmax, forward, logits, ForwardTrace};
pub use hooks::{
    suppress_lowest, DiagnosticLayerSpec, Hooks, InjectPoint, InjectionRecord, LayerSet,
    PerturbationMode, PerturbationSpec, Replacement, SuppressionSpec,
};
pub use io::{decode_weights, encode_weights, load_weights, save_weights, Manifest, TensorEntry, MAGIC};
pub use weights::{init_weights, LayerWeights, ModelWeights};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Look up embedding rows: row `m` of the result is `E[tokens[m]]`.
pub fn embed(weights: &ModelWeights, tokens: &[u32]) -> Result<Matrix> {
    let cfg = &weights.config;
    if tokens.len() > cfg.max_seq {
        return Err(Error::Capacity {
            needed: tokens.len(),
            max_seq: cfg.max_seq,
        });
    }
    let mut data = Vec::with_capacity(tokens.len() * cfg.hidden);
    for &id in tokens {
        if id as usize >= cfg.vocab {
            return Err(Error::Token {
                id,
                vocab: cfg.vocab,
            });
        }
        data.extend_from_slice(weights.embedding.row(id as usize));
    }
    Ok(Matrix::from_raw(tokens.len(), cfg.hidden, data))
}
