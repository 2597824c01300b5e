// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::engine::{forward, ForwardTrace, Hooks, ModelWeights};
use crate::error::{Error, Result};
use crate::numerics::{mean_std, norm2, piecewise_two_segment_fit, Matrix, PiecewiseFit};

/// Log magnitude ratios `ln(|h_i^(l)| / |h_i^(0)|)` per layer and token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MagnitudeCurve {
    /// `per_token[l][i]`
    pub per_token: Vec<Vec<f64>>,
    /// Token average of `per_token[l]`.
    pub average: Vec<f64>,
}

impl MagnitudeCurve {
    /// A curve known only through its averaged series.
    pub fn from_average(average: Vec<f64>) -> Self {
        Self {
            per_token: average.iter().map(|&v| vec![v]).collect(),
            average,
        }
    }

    pub fn points(&self) -> usize {
        self.average.len()
    }
}

/// Scale every row to unit 2-norm.
pub fn normalize_rows(x: &Matrix) -> Result<Matrix> {
    let mut out = x.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let n = norm2(row);
        if n == 0.0 {
            return Err(Error::DegenerateInput { token: i });
        }
        for v in row.iter_mut() {
            *v /= n;
        }
    }
    Ok(out)
}

/// Magnitude curve of an existing trace, ratios taken against `states[0]`.
pub fn magnitude_curve(trace: &ForwardTrace) -> Result<MagnitudeCurve> {
    let base: Vec<f64> = trace.input().row_iter().map(norm2).collect();
    if let Some(token) = base.iter().position(|&n| n == 0.0) {
        return Err(Error::DegenerateInput { token });
    }
    let per_token: Vec<Vec<f64>> = trace
        .states
        .iter()
        .map(|s| {
            s.row_iter()
                .zip(&base)
                .map(|(row, &b)| (norm2(row) / b).ln())
                .collect()
        })
        .collect();
    let n = base.len() as f64;
    let average = per_token.iter().map(|r| r.iter().sum::<f64>() / n).collect();
    Ok(MagnitudeCurve { per_token, average })
}

/// Curve from a fresh forward pass, optionally on unit-normalised input rows.
pub fn input_magnitude_curve(
    weights: &ModelWeights,
    x0: &Matrix,
    normalize_input: bool,
    hooks: &Hooks,
) -> Result<MagnitudeCurve> {
    let input = if normalize_input {
        normalize_rows(x0)?
    } else {
        x0.clone()
    };
    magnitude_curve(&forward(weights, &input, hooks)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthFit {
    pub fit: PiecewiseFit,
    /// `exp(left slope)`: per-layer growth factor in the linear domain.
    pub left_factor: f64,
    pub right_factor: f64,
}

/// Two-segment fit of the averaged log ratio against layer index.
pub fn fit_growth(curve: &MagnitudeCurve) -> Result<GrowthFit> {
    if curve.points() < 4 {
        return Err(Error::Fit(format!(
            "growth fit needs at least 4 layers, curve has {}",
            curve.points()
        )));
    }
    let xs: Vec<f64> = (0..curve.points()).map(|i| i as f64).collect();
    let fit = piecewise_two_segment_fit(&xs, &curve.average, 2)?;
    Ok(GrowthFit {
        left_factor: fit.left.slope.exp(),
        right_factor: fit.right.slope.exp(),
        fit,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalStd {
    pub interval: usize,
    pub std: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossLayerStd {
    pub entries: Vec<IntervalStd>,
    /// Intervals skipped because fewer than two differences exist.
    pub omitted: Vec<usize>,
}

/// Population std of `R^(l + k) - R^(l)` over all valid `l`, for each interval
/// `k` in `1..=max_interval`.
pub fn cross_layer_std(curve: &MagnitudeCurve, max_interval: usize) -> Result<CrossLayerStd> {
    let n = curve.points();
    if max_interval >= n {
        return Err(Error::Argument(format!(
            "max_interval {max_interval} must be below the {n} curve points"
        )));
    }
    let mut entries = Vec::new();
    let mut omitted = Vec::new();
    for interval in 1..=max_interval {
        let diffs: Vec<f64> = (0..n - interval)
            .map(|l| curve.average[l + interval] - curve.average[l])
            .collect();
        if diffs.len() < 2 {
            omitted.push(interval);
            continue;
        }
        let (_, std) = mean_std(&diffs);
        entries.push(IntervalStd {
            interval,
            std,
            samples: diffs.len(),
        });
    }
    Ok(CrossLayerStd { entries, omitted })
}
