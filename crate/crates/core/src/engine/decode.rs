// SPDX-License-Identifier: MIT OR Apache-2.0

use super::{argmax, embed, forward, logits, Hooks, ModelWeights};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Prompt followed by the generated tokens.
    pub tokens: Vec<u32>,
    /// Embedded input matrix after each iteration; `inputs[m]` is the input
    /// after `m` generated tokens, `inputs[0]` the (possibly perturbed) prompt.
    pub inputs: Vec<Matrix>,
    pub prompt_len: usize,
}

impl DecodeResult {
    pub fn generated(&self) -> &[u32] {
        &self.tokens[self.prompt_len..]
    }
}

/// Greedy decoding from the embedded prompt.
pub fn greedy_decode(weights: &ModelWeights, prompt: &[u32], steps: usize) -> Result<DecodeResult> {
    decode_from(weights, prompt, None, steps)
}

/// Greedy decoding where the prompt rows of every input matrix come from
/// `initial` instead of the embedding table. Generated tokens are embedded
/// normally and appended below.
pub fn decode_from(
    weights: &ModelWeights,
    prompt: &[u32],
    initial: Option<&Matrix>,
    steps: usize,
) -> Result<DecodeResult> {
    let cfg = &weights.config;
    if prompt.is_empty() {
        return Err(Error::Argument("prompt must be nonempty".into()));
    }
    let needed = prompt.len() + steps;
    if needed > cfg.max_seq {
        return Err(Error::Capacity {
            needed,
            max_seq: cfg.max_seq,
        });
    }
    let mut input = match initial {
        Some(m) => {
            if m.shape() != (prompt.len(), cfg.hidden) {
                return Err(Error::shape(
                    "decode_from",
                    format!("initial input {:?} for prompt of {}", m.shape(), prompt.len()),
                ));
            }
            m.clone()
        }
        None => embed(weights, prompt)?,
    };
    let mut tokens = prompt.to_vec();
    let mut inputs = Vec::with_capacity(steps + 1);
    inputs.push(input.clone());
    for _ in 0..steps {
        let trace = forward(weights, &input, &Hooks::none())?;
        let last = trace.final_state().row_slice(input.rows() - 1, 1);
        let next = argmax(logits(weights, &last)?.row(0)) as u32;
        tokens.push(next);
        let mut data = input.into_vec();
        data.extend_from_slice(weights.embedding.row(next as usize));
        input = Matrix::from_raw(tokens.len(), cfg.hidden, data);
        inputs.push(input.clone());
    }
    Ok(DecodeResult {
        tokens,
        inputs,
        prompt_len: prompt.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{init_weights, ModelConfig};

    #[test]
    fn zero_steps_returns_prompt() {
        let w = init_weights(&ModelConfig::toy()).unwrap();
        let r = greedy_decode(&w, &[1, 2, 3], 0).unwrap();
        assert_eq!(r.tokens, vec![1, 2, 3]);
        assert_eq!(r.inputs.len(), 1);
    }

    #[test]
    fn deterministic_and_inputs_are_embeddings() {
        let w = init_weights(&ModelConfig::toy()).unwrap();
        let a = greedy_decode(&w, &[5, 9], 6).unwrap();
        let b = greedy_decode(&w, &[5, 9], 6).unwrap();
        assert_eq!(a, b);
        for (m, input) in a.inputs.iter().enumerate() {
            assert_eq!(input, &embed(&w, &a.tokens[..2 + m]).unwrap());
        }
    }

    #[test]
    fn capacity_and_empty_prompt() {
        let w = init_weights(&ModelConfig::toy()).unwrap();
        assert!(matches!(greedy_decode(&w, &[1; 60], 5), Err(Error::Capacity { .. })));
        assert!(greedy_decode(&w, &[], 1).is_err());
    }
}
