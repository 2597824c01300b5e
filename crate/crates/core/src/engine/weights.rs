// SPDX-License-Identifier: MIT OR Apache-2.0

use super::ModelConfig;
use crate::error::{Error, Result};
use crate::numerics::{Matrix, RandomStream};

/// Parameters of one decoder block.
///
/// `wq`, `wk`, `wv` and `wo` are `d x d`. Head `j` owns columns
/// `[j * d/H, (j + 1) * d/H)` of the query/key/value maps and the same rows of
/// `wo`, so concatenating head outputs and projecting through `wo` equals the
/// sum of the per-head projections.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    pub wq: Matrix,
    pub wk: Matrix,
    pub wv: Matrix,
    pub wo: Matrix,
    /// `d x ffn_dim`
    pub w1: Matrix,
    /// `ffn_dim x d`
    pub w2: Matrix,
    pub attn_norm: Vec<f64>,
    pub mlp_norm: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelWeights {
    pub config: ModelConfig,
    pub layers: Vec<LayerWeights>,
    /// `vocab x d`
    pub embedding: Matrix,
    pub final_norm: Vec<f64>,
    /// `d x vocab`
    pub unembedding: Matrix,
}

impl ModelWeights {
    /// Every matrix zero, every gain one. Each block then contributes exactly
    /// zero and the stack is the identity map on the residual stream.
    pub fn zeroed(config: &ModelConfig) -> Result<Self> {
        config.validate()?;
        let d = config.hidden;
        let layers = (0..config.layers)
            .map(|_| LayerWeights {
                wq: Matrix::zeros(d, d),
                wk: Matrix::zeros(d, d),
                wv: Matrix::zeros(d, d),
                wo: Matrix::zeros(d, d),
                w1: Matrix::zeros(d, config.ffn_dim),
                w2: Matrix::zeros(config.ffn_dim, d),
                attn_norm: vec![1.0; d],
                mlp_norm: vec![1.0; d],
            })
            .collect();
        Ok(Self {
            config: config.clone(),
            layers,
            embedding: Matrix::zeros(config.vocab, d),
            final_norm: vec![1.0; d],
            unembedding: Matrix::zeros(d, config.vocab),
        })
    }

    /// Named tensors in file order. Vectors are reported as `[len]`.
    pub fn tensors(&self) -> Vec<(String, Vec<usize>, &[f64])> {
        let mut out: Vec<(String, Vec<usize>, &[f64])> = Vec::new();
        let mat = |m: &Matrix| vec![m.rows(), m.cols()];
        out.push(("embedding".into(), mat(&self.embedding), self.embedding.as_slice()));
        for (n, l) in self.layers.iter().enumerate() {
            for (name, m) in [
                ("wq", &l.wq),
                ("wk", &l.wk),
                ("wv", &l.wv),
                ("wo", &l.wo),
                ("w1", &l.w1),
                ("w2", &l.w2),
            ] {
                out.push((format!("layers.{n}.{name}"), mat(m), m.as_slice()));
            }
            out.push((format!("layers.{n}.attn_norm"), vec![l.attn_norm.len()], &l.attn_norm));
            out.push((format!("layers.{n}.mlp_norm"), vec![l.mlp_norm.len()], &l.mlp_norm));
        }
        out.push(("final_norm".into(), vec![self.final_norm.len()], &self.final_norm));
        out.push(("unembedding".into(), mat(&self.unembedding), self.unembedding.as_slice()));
        out
    }

    /// Expected tensor names and shapes for a config, in file order.
    pub(crate) fn expected_layout(config: &ModelConfig) -> Vec<(String, Vec<usize>)> {
        let d = config.hidden;
        let f = config.ffn_dim;
        let mut out = vec![("embedding".to_string(), vec![config.vocab, d])];
        for n in 0..config.layers {
            for (name, shape) in [
                ("wq", vec![d, d]),
                ("wk", vec![d, d]),
                ("wv", vec![d, d]),
                ("wo", vec![d, d]),
                ("w1", vec![d, f]),
                ("w2", vec![f, d]),
                ("attn_norm", vec![d]),
                ("mlp_norm", vec![d]),
            ] {
                out.push((format!("layers.{n}.{name}"), shape));
            }
        }
        out.push(("final_norm".into(), vec![d]));
        out.push(("unembedding".into(), vec![d, config.vocab]));
        out
    }

    /// Rebuild from flat tensors laid out as [`ModelWeights::expected_layout`].
    pub(crate) fn from_flat(config: ModelConfig, mut flat: Vec<Vec<f64>>) -> Result<Self> {
        let d = config.hidden;
        let f = config.ffn_dim;
        flat.reverse();
        let mut next = || flat.pop().ok_or_else(|| Error::Validation("missing tensor".into()));
        let embedding = Matrix::new(config.vocab, d, next()?)?;
        let mut layers = Vec::with_capacity(config.layers);
        for _ in 0..config.layers {
            layers.push(LayerWeights {
                wq: Matrix::new(d, d, next()?)?,
                wk: Matrix::new(d, d, next()?)?,
                wv: Matrix::new(d, d, next()?)?,
                wo: Matrix::new(d, d, next()?)?,
                w1: Matrix::new(d, f, next()?)?,
                w2: Matrix::new(f, d, next()?)?,
                attn_norm: finite(next()?)?,
                mlp_norm: finite(next()?)?,
            });
        }
        let final_norm = finite(next()?)?;
        let unembedding = Matrix::new(d, config.vocab, next()?)?;
        Ok(Self {
            config,
            layers,
            embedding,
            final_norm,
            unembedding,
        })
    }
}

fn finite(v: Vec<f64>) -> Result<Vec<f64>> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(v),
    }
}

/// Seeded Gaussian initialisation with standard deviation `1 / sqrt(d)`.
///
/// Draw order: per layer `wq, wk, wv, wo, w1, w2` (row-major), then the
/// embedding table, then the unembedding. Norm gains start at one.
pub fn init_weights(config: &ModelConfig) -> Result<ModelWeights> {
    config.validate()?;
    let d = config.hidden;
    let f = config.ffn_dim;
    let std_dev = 1.0 / (d as f64).sqrt();
    let mut rng = RandomStream::new(config.seed);
    let mut draw = |rows: usize, cols: usize| {
        Matrix::from_raw(rows, cols, rng.gaussian_vec(rows * cols, std_dev))
    };
    let layers = (0..config.layers)
        .map(|_| LayerWeights {
            wq: draw(d, d),
            wk: draw(d, d),
            wv: draw(d, d),
            wo: draw(d, d),
            w1: draw(d, f),
            w2: draw(f, d),
            attn_norm: vec![1.0; d],
            mlp_norm: vec![1.0; d],
        })
        .collect();
    let embedding = draw(config.vocab, d);
    let unembedding = draw(d, config.vocab);
    Ok(ModelWeights {
        config: config.clone(),
        layers,
        embedding,
        final_norm: vec![1.0; d],
        unembedding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::mean_std;

    #[test]
    fn seeded_init_is_deterministic() {
        let c = ModelConfig::toy();
        let a = init_weights(&c).unwrap();
        let b = init_weights(&c).unwrap();
        assert_eq!(a, b);
        let mut c2 = c.clone();
        c2.seed += 1;
        assert_ne!(init_weights(&c2).unwrap().layers[0].wq, a.layers[0].wq);
    }

    #[test]
    fn init_scale_matches_inverse_sqrt_d() {
        let mut c = ModelConfig::toy();
        c.hidden = 64;
        c.ffn_dim = 256;
        let w = init_weights(&c).unwrap();
        let (_, std) = mean_std(w.layers[0].w1.as_slice());
        let want = 1.0 / 8.0;
        assert!((std - want).abs() < 0.1 * want, "{std}");
    }

    #[test]
    fn layout_matches_tensors() {
        let w = init_weights(&ModelConfig::toy()).unwrap();
        let layout = ModelWeights::expected_layout(&w.config);
        let tensors = w.tensors();
        assert_eq!(layout.len(), tensors.len());
        for ((n1, s1), (n2, s2, data)) in layout.iter().zip(&tensors) {
            assert_eq!(n1, n2);
            assert_eq!(s1, s2);
            assert_eq!(s1.iter().product::<usize>(), data.len());
        }
    }
}
