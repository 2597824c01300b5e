// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::engine::ForwardTrace;
use crate::error::{Error, Result};
use crate::numerics::{pearson_corr, Matrix};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelationMode {
    /// Mean over tokens of the Pearson coefficient between same-token rows.
    #[default]
    TokenAveraged,
    /// One Pearson coefficient between the flattened state matrices.
    Flattened,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub values: Matrix,
    /// `excluded[l][l']`: token pairs dropped because a row was constant.
    pub excluded: Vec<Vec<usize>>,
    pub mode: CorrelationMode,
}

impl CorrelationMatrix {
    pub fn size(&self) -> usize {
        self.values.rows()
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.values.get(a, b)
    }
}

fn token_averaged(a: &Matrix, b: &Matrix) -> Result<(f64, usize)> {
    let mut sum = 0.0;
    let mut used = 0usize;
    let mut excluded = 0usize;
    for (ra, rb) in a.row_iter().zip(b.row_iter()) {
        match pearson_corr(ra, rb) {
            Ok(r) => {
                sum += r;
                used += 1;
            }
            Err(Error::UndefinedCorrelation(_)) => excluded += 1,
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(Error::UndefinedCorrelation(
            "every token pair has a constant row".into(),
        ));
    }
    Ok((sum / used as f64, excluded))
}

/// Symmetric `(L+1) x (L+1)` correlation between the residual taps.
pub fn interlayer_pearson(trace: &ForwardTrace, mode: CorrelationMode) -> Result<CorrelationMatrix> {
    if trace.seq_len() == 0 || trace.hidden() < 2 {
        return Err(Error::Argument(
            "correlation needs at least one token and hidden width 2".into(),
        ));
    }
    let n = trace.states.len();
    let mut values = Matrix::identity(n);
    let mut excluded = vec![vec![0usize; n]; n];
    for a in 0..n {
        for b in a + 1..n {
            let (sa, sb) = (&trace.states[a], &trace.states[b]);
            let (r, skipped) = match mode {
                CorrelationMode::TokenAveraged => token_averaged(sa, sb)?,
                CorrelationMode::Flattened => (pearson_corr(sa.as_slice(), sb.as_slice())?, 0),
            };
            values.set(a, b, r);
            values.set(b, a, r);
            excluded[a][b] = skipped;
            excluded[b][a] = skipped;
        }
    }
    Ok(CorrelationMatrix {
        values,
        excluded,
        mode,
    })
}
