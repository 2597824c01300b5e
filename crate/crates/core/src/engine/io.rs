// SPDX-License-Identifier: MIT OR Apache-2.0

//! Weight file format.
//!
//! ```text
//! "CHSCOPE1"            8-byte magic
//! manifest_len          u64, little endian
//! manifest              manifest_len bytes of UTF-8 JSON
//! payload               f64 little endian, tensors in manifest order
//! ```
//!
//! The manifest holds the model config and, per tensor, its name, shape,
//! dtype (always `"f64"`) and byte offset relative to the payload start.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelConfig, ModelWeights};
use crate::error::{LoadError, Result};

pub const MAGIC: &[u8; 8] = b"CHSCOPE1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub config: ModelConfig,
    pub tensors: Vec<TensorEntry>,
}

pub fn encode_weights(weights: &ModelWeights) -> Result<Vec<u8>> {
    let mut tensors = Vec::new();
    let mut payload = Vec::new();
    for (name, shape, data) in weights.tensors() {
        tensors.push(TensorEntry {
            name,
            shape,
            dtype: "f64".into(),
            offset: payload.len(),
        });
        for v in data {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = serde_json::to_vec(&Manifest {
        config: weights.config.clone(),
        tensors,
    })?;
    let mut out = Vec::with_capacity(16 + manifest.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(manifest.len() as u64).to_le_bytes());
    out.extend_from_slice(&manifest);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn decode_weights(bytes: &[u8]) -> Result<ModelWeights> {
    if bytes.len() < 8 || &bytes[..8] != MAGIC {
        return Err(LoadError::BadMagic.into());
    }
    if bytes.len() < 16 {
        return Err(LoadError::Truncated {
            needed: 16,
            available: bytes.len(),
        }
        .into());
    }
    let manifest_len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let manifest_end = 16usize
        .checked_add(manifest_len)
        .ok_or_else(|| LoadError::CorruptHeader("manifest length overflows".into()))?;
    if manifest_end > bytes.len() {
        return Err(LoadError::Truncated {
            needed: manifest_end,
            available: bytes.len(),
        }
        .into());
    }
    let manifest: Manifest = serde_json::from_slice(&bytes[16..manifest_end])
        .map_err(|e| LoadError::CorruptHeader(e.to_string()))?;
    manifest
        .config
        .validate()
        .map_err(|e| LoadError::CorruptHeader(e.to_string()))?;

    let expected = ModelWeights::expected_layout(&manifest.config);
    if expected.len() != manifest.tensors.len() {
        return Err(LoadError::CorruptHeader(format!(
            "{} tensors listed, config implies {}",
            manifest.tensors.len(),
            expected.len()
        ))
        .into());
    }
    let payload = &bytes[manifest_end..];
    let mut offset = 0usize;
    let mut flat = Vec::with_capacity(expected.len());
    for ((name, shape), entry) in expected.iter().zip(&manifest.tensors) {
        if &entry.name != name {
            return Err(LoadError::CorruptHeader(format!(
                "expected tensor {name}, found {}",
                entry.name
            ))
            .into());
        }
        if entry.dtype != "f64" {
            return Err(LoadError::CorruptHeader(format!("{name}: dtype {}", entry.dtype)).into());
        }
        if &entry.shape != shape {
            return Err(LoadError::ShapeMismatch {
                name: name.clone(),
                expected: shape.clone(),
                found: entry.shape.clone(),
            }
            .into());
        }
        if entry.offset != offset {
            return Err(LoadError::CorruptHeader(format!(
                "{name}: offset {} but previous tensors end at {offset}",
                entry.offset
            ))
            .into());
        }
        let len = shape.iter().product::<usize>() * 8;
        let end = offset + len;
        if end > payload.len() {
            return Err(LoadError::Truncated {
                needed: manifest_end + end,
                available: bytes.len(),
            }
            .into());
        }
        let values = payload[offset..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        flat.push(values);
        offset = end;
    }
    if offset != payload.len() {
        return Err(LoadError::CorruptHeader(format!(
            "{} trailing payload bytes",
            payload.len() - offset
        ))
        .into());
    }
    ModelWeights::from_flat(manifest.config, flat)
}

pub fn save_weights(path: impl AsRef<Path>, weights: &ModelWeights) -> Result<()> {
    fs::write(path, encode_weights(weights)?)?;
    Ok(())
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<ModelWeights> {
    decode_weights(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::init_weights;
    use crate::error::Error;

    fn small() -> ModelWeights {
        let mut c = ModelConfig::toy();
        c.layers = 2;
        c.hidden = 8;
        c.heads = 2;
        c.ffn_dim = 16;
        c.vocab = 12;
        init_weights(&c).unwrap()
    }

    #[test]
    fn save_load_save_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.bin");
        let p2 = dir.path().join("b.bin");
        let w = small();
        save_weights(&p1, &w).unwrap();
        let loaded = load_weights(&p1).unwrap();
        assert_eq!(loaded, w);
        save_weights(&p2, &loaded).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn truncation_detected() {
        let bytes = encode_weights(&small()).unwrap();
        let cut = &bytes[..bytes.len() - 9];
        assert!(matches!(
            decode_weights(cut),
            Err(Error::Load(LoadError::Truncated { .. }))
        ));
        assert!(matches!(
            decode_weights(&bytes[..12]),
            Err(Error::Load(LoadError::Truncated { .. }))
        ));
    }

    #[test]
    fn bad_magic_detected() {
        let mut bytes = encode_weights(&small()).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode_weights(&bytes), Err(Error::Load(LoadError::BadMagic))));
    }

    #[test]
    fn edited_shape_detected() {
        let mut raw = encode_weights(&small()).unwrap();
        // same-length edit keeps the manifest length field valid
        let needle = br#""name":"layers.0.w1","shape":[8,16]"#;
        let at = raw
            .windows(needle.len())
            .position(|w| w == needle)
            .expect("w1 entry in manifest");
        raw[at..at + needle.len()].copy_from_slice(br#""name":"layers.0.w1","shape":[8,61]"#);
        assert!(matches!(
            decode_weights(&raw),
            Err(Error::Load(LoadError::ShapeMismatch { .. }))
        ));
    }

    #[test]
    fn garbage_manifest_is_corrupt_header() {
        let mut bytes = MAGIC.to_vec();
        bytes.extend_from_slice(&4u64.to_le_bytes());
        bytes.extend_from_slice(b"{{{{");
        assert!(matches!(
            decode_weights(&bytes),
            Err(Error::Load(LoadError::CorruptHeader(_)))
        ));
    }
}
