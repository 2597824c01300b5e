// SPDX-License-Identifier: MIT OR Apache-2.0

#![allow(dead_code)]

use chaoscope_core::engine::{embed, init_weights, ModelConfig, ModelWeights};
use chaoscope_core::numerics::{Matrix, RandomStream};

pub fn config(layers: usize, hidden: usize, heads: usize, ffn: usize, seed: u64) -> ModelConfig {
    ModelConfig {
        layers,
        hidden,
        heads,
        ffn_dim: ffn,
        seed,
        ..ModelConfig::toy()
    }
}

pub fn model(layers: usize, hidden: usize, heads: usize, ffn: usize, seed: u64) -> ModelWeights {
    init_weights(&config(layers, hidden, heads, ffn, seed)).unwrap()
}

pub fn zero_model(layers: usize, hidden: usize) -> ModelWeights {
    ModelWeights::zeroed(&config(layers, hidden, 2, 2 * hidden, 0)).unwrap()
}

pub fn tokens(seed: u64, len: usize, vocab: usize) -> Vec<u32> {
    let mut rng = RandomStream::new(seed);
    (0..len).map(|_| rng.next_below(vocab as u64) as u32).collect()
}

pub fn input(weights: &ModelWeights, seed: u64, len: usize) -> Matrix {
    embed(weights, &tokens(seed, len, weights.config.vocab)).unwrap()
}

pub fn gaussian_input(seed: u64, rows: usize, cols: usize) -> Matrix {
    let mut rng = RandomStream::new(seed);
    Matrix::new(rows, cols, rng.gaussian_vec(rows * cols, 1.0)).unwrap()
}
