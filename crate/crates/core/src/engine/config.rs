// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Activation;

fn default_epsilon() -> f64 {
    1e-6
}

fn default_true() -> bool {
    true
}

/// Architecture hyperparameters of the pre-norm decoder stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub layers: usize,
    pub hidden: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    pub vocab: usize,
    pub activation: Activation,
    #[serde(default = "default_epsilon")]
    pub norm_epsilon: f64,
    #[serde(default)]
    pub rope_enabled: bool,
    /// Causal attention mask. Off gives the literal unmasked attention map.
    #[serde(default = "default_true")]
    pub causal: bool,
    pub seed: u64,
    pub max_seq: usize,
}

impl ModelConfig {
    /// Small default model used by fixtures and examples.
    pub fn toy() -> Self {
        Self {
            layers: 4,
            hidden: 32,
            heads: 4,
            ffn_dim: 128,
            vocab: 64,
            activation: Activation::Gelu,
            norm_epsilon: default_epsilon(),
            rope_enabled: true,
            causal: true,
            seed: 7,
            max_seq: 64,
        }
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("layers", self.layers),
            ("hidden", self.hidden),
            ("heads", self.heads),
            ("ffn_dim", self.ffn_dim),
            ("vocab", self.vocab),
            ("max_seq", self.max_seq),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "hidden {} is not divisible by heads {}",
                self.hidden, self.heads
            )));
        }
        if self.rope_enabled && !self.head_dim().is_multiple_of(2) {
            return Err(Error::Config(format!(
                "rope needs an even head width, got {}",
                self.head_dim()
            )));
        }
        if !(self.norm_epsilon > 0.0 && self.norm_epsilon.is_finite()) {
            return Err(Error::Config("norm_epsilon must be finite and > 0".into()));
        }
        Ok(())
    }
}
