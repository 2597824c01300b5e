// SPDX-License-Identifier: MIT OR Apache-2.0

use super::{LayerWeights, ModelConfig};
use crate::error::{Error, Result};
use crate::numerics::{rms_norm_rows, softmax_in_place, Matrix};

const ROPE_BASE: f64 = 10_000.0;

fn check_input(op: &'static str, config: &ModelConfig, x: &Matrix) -> Result<()> {
    if x.cols() != config.hidden {
        return Err(Error::shape(
            op,
            format!("input has {} columns, hidden is {}", x.cols(), config.hidden),
        ));
    }
    Ok(())
}

/// Rotate consecutive pairs `(2i, 2i + 1)` inside every head slice by
/// `pos * base^(-2i / head_dim)`.
fn apply_rope(m: &mut Matrix, heads: usize) {
    let head_dim = m.cols() / heads;
    for pos in 0..m.rows() {
        let row = m.row_mut(pos);
        for h in 0..heads {
            let slice = &mut row[h * head_dim..(h + 1) * head_dim];
            for i in 0..head_dim / 2 {
                let theta = pos as f64 * ROPE_BASE.powf(-2.0 * i as f64 / head_dim as f64);
                let (sin, cos) = theta.sin_cos();
                let a = slice[2 * i];
                let b = slice[2 * i + 1];
                slice[2 * i] = a * cos - b * sin;
                slice[2 * i + 1] = a * sin + b * cos;
            }
        }
    }
}

/// Multi-head self-attention contribution `att^(n)` of one block, computed on
/// `Norm(X)`.
///
/// Scores are scaled by `1 / sqrt(d / H)`. With `config.causal`, position `i`
/// attends only to positions `<= i`; masked entries are dropped from the
/// softmax rather than set to `-inf`.
pub fn attention_block(layer: &LayerWeights, config: &ModelConfig, x: &Matrix) -> Result<Matrix> {
    check_input("attention_block", config, x)?;
    let seq = x.rows();
    let d = config.hidden;
    let heads = config.heads;
    let hd = config.head_dim();
    let normed = rms_norm_rows(x, &layer.attn_norm, config.norm_epsilon);
    let mut q = normed.matmul(&layer.wq)?;
    let mut k = normed.matmul(&layer.wk)?;
    let v = normed.matmul(&layer.wv)?;
    if config.rope_enabled {
        apply_rope(&mut q, heads);
        apply_rope(&mut k, heads);
    }
    let scale = 1.0 / (hd as f64).sqrt();
    let mut mixed = Matrix::zeros(seq, d);
    let mut scores = vec![0.0; seq];
    for h in 0..heads {
        let cols = h * hd..(h + 1) * hd;
        for i in 0..seq {
            let visible = if config.causal { i + 1 } else { seq };
            let qi = &q.row(i)[cols.clone()];
            for (j, s) in scores[..visible].iter_mut().enumerate() {
                let kj = &k.row(j)[cols.clone()];
                *s = qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>() * scale;
            }
            softmax_in_place(&mut scores[..visible]);
            let out = &mut mixed.row_mut(i)[cols.clone()];
            for (j, &p) in scores[..visible].iter().enumerate() {
                for (o, &vv) in out.iter_mut().zip(&v.row(j)[cols.clone()]) {
                    *o += p * vv;
                }
            }
        }
    }
    mixed.matmul(&layer.wo)
}

/// Feed-forward contribution `mlp^(n) = g(Norm(X) W1) W2`.
pub fn mlp_block(layer: &LayerWeights, config: &ModelConfig, x: &Matrix) -> Result<Matrix> {
    check_input("mlp_block", config, x)?;
    let normed = rms_norm_rows(x, &layer.mlp_norm, config.norm_epsilon);
    let mut hidden = normed.matmul(&layer.w1)?;
    let g = config.activation;
    for v in hidden.as_mut_slice() {
        *v = g.apply(*v);
    }
    hidden.matmul(&layer.w2)
}
