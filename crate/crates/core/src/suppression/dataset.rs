// SPDX-License-Identifier: MIT OR Apache-2.0

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::engine::{argmax, embed, forward, logits, Hooks, ModelWeights};
use crate::error::{Error, Result};
use crate::numerics::RandomStream;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalItem {
    pub prompt: Vec<u32>,
    pub choice_tokens: Vec<u32>,
    pub correct_index: usize,
}

impl EvalItem {
    pub fn validate(&self, vocab: usize, max_seq: usize) -> Result<()> {
        if self.prompt.is_empty() || self.prompt.len() > max_seq {
            return Err(Error::Validation(format!(
                "prompt length {} outside 1..={max_seq}",
                self.prompt.len()
            )));
        }
        if let Some(&id) = self.prompt.iter().find(|&&t| t as usize >= vocab) {
            return Err(Error::Validation(format!("prompt token {id} outside vocab {vocab}")));
        }
        if self.choice_tokens.len() < 2 {
            return Err(Error::Validation("need at least two choice tokens".into()));
        }
        for (i, &c) in self.choice_tokens.iter().enumerate() {
            if c as usize >= vocab {
                return Err(Error::Validation(format!("choice token {c} outside vocab {vocab}")));
            }
            if self.choice_tokens[..i].contains(&c) {
                return Err(Error::Validation(format!("choice token {c} repeated")));
            }
        }
        if self.correct_index >= self.choice_tokens.len() {
            return Err(Error::Validation(format!(
                "correct_index {} with {} choices",
                self.correct_index,
                self.choice_tokens.len()
            )));
        }
        Ok(())
    }

    pub fn correct_token(&self) -> u32 {
        self.choice_tokens[self.correct_index]
    }
}

/// Seeded items whose correct answer is the unsuppressed model's own favourite
/// among the choice tokens.
pub fn generate_toy_dataset(
    weights: &ModelWeights,
    seed: u64,
    size: usize,
    prompt_len: usize,
    alphabet_size: usize,
) -> Result<Vec<EvalItem>> {
    let cfg = &weights.config;
    if size == 0 {
        return Err(Error::Argument("dataset size must be positive".into()));
    }
    if alphabet_size < 2 || alphabet_size > cfg.vocab {
        return Err(Error::Argument(format!(
            "alphabet size {alphabet_size} must lie in 2..={}",
            cfg.vocab
        )));
    }
    if prompt_len == 0 || prompt_len > cfg.max_seq {
        return Err(Error::Argument(format!(
            "prompt length {prompt_len} must lie in 1..={}",
            cfg.max_seq
        )));
    }
    let mut rng = RandomStream::new(seed);
    let vocab = cfg.vocab as u64;
    let mut items = Vec::with_capacity(size);
    for _ in 0..size {
        let prompt: Vec<u32> = (0..prompt_len).map(|_| rng.next_below(vocab) as u32).collect();
        // partial Fisher-Yates over the vocabulary
        let mut pool: Vec<u32> = (0..cfg.vocab as u32).collect();
        for i in 0..alphabet_size {
            let j = i + rng.next_below((cfg.vocab - i) as u64) as usize;
            pool.swap(i, j);
        }
        let choice_tokens = pool[..alphabet_size].to_vec();
        let trace = forward(weights, &embed(weights, &prompt)?, &Hooks::none())?;
        let last = trace.final_state().row_slice(prompt_len - 1, 1);
        let row = logits(weights, &last)?;
        let restricted: Vec<f64> = choice_tokens.iter().map(|&c| row.get(0, c as usize)).collect();
        items.push(EvalItem {
            prompt,
            correct_index: argmax(&restricted),
            choice_tokens,
        });
    }
    Ok(items)
}

/// Externally produced final-position logits for one item at one `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogitRecord {
    pub k: f64,
    pub item: usize,
    pub logits: Vec<f64>,
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line)
            .map_err(|e| Error::Validation(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(value);
    }
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, values: &[T]) -> Result<()> {
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    for v in values {
        serde_json::to_writer(&mut file, v)?;
        file.write_all(b"\n")?;
    }
    file.flush()?;
    Ok(())
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<EvalItem>> {
    read_jsonl(path.as_ref())
}

pub fn write_dataset(path: impl AsRef<Path>, items: &[EvalItem]) -> Result<()> {
    write_jsonl(path.as_ref(), items)
}

pub fn read_logit_records(path: impl AsRef<Path>) -> Result<Vec<LogitRecord>> {
    read_jsonl(path.as_ref())
}

pub fn write_logit_records(path: impl AsRef<Path>, records: &[LogitRecord]) -> Result<()> {
    write_jsonl(path.as_ref(), records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn item() -> EvalItem {
        EvalItem {
            prompt: vec![1, 2],
            choice_tokens: vec![3, 4],
            correct_index: 1,
        }
    }

    #[test]
    fn validation_cases() {
        item().validate(8, 4).unwrap();
        let mut bad = item();
        bad.choice_tokens = vec![3, 3];
        assert!(bad.validate(8, 4).is_err());
        let mut bad = item();
        bad.correct_index = 2;
        assert!(bad.validate(8, 4).is_err());
        let mut bad = item();
        bad.choice_tokens = vec![3];
        bad.correct_index = 0;
        assert!(bad.validate(8, 4).is_err());
        assert!(item().validate(4, 4).is_err());
        assert!(item().validate(8, 1).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("d.jsonl");
        let items = vec![item(), item()];
        write_dataset(&p, &items).unwrap();
        assert_eq!(read_dataset(&p).unwrap(), items);
    }
}
