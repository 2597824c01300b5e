// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use super::log_rate;
use crate::engine::{forward, Hooks, ModelWeights, PerturbationMode, PerturbationSpec};
use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Where the perturbation lands: one element of a token row, or the whole row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QleSite {
    pub token: usize,
    #[serde(default)]
    pub element: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QleConfig {
    pub mode: PerturbationMode,
    /// Perturb tap `span.0`, observe tap `span.1`.
    pub span: (usize, usize),
    #[serde(default)]
    pub halving_check: bool,
}

impl QleConfig {
    pub fn absolute(delta: f64, span: (usize, usize)) -> Self {
        Self {
            mode: PerturbationMode::Absolute { delta },
            span,
            halving_check: false,
        }
    }

    pub fn relative(k_frac: f64, span: (usize, usize)) -> Self {
        Self {
            mode: PerturbationMode::Relative { k_frac },
            span,
            halving_check: false,
        }
    }

    pub fn with_halving(mut self) -> Self {
        self.halving_check = true;
        self
    }

    pub fn validate(&self, layers: usize) -> Result<()> {
        let (m, n) = self.span;
        if m >= n || n > layers {
            return Err(Error::Argument(format!(
                "span ({m}, {n}) must satisfy m < n <= {layers}"
            )));
        }
        let mag = self.mode.magnitude();
        if !(mag.is_finite() && mag > 0.0) {
            return Err(Error::Argument(format!(
                "perturbation magnitude {mag} must be positive and finite"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HalvingCheck {
    pub lambda: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntraQle {
    pub lambda: f64,
    /// Realised `|X~^(m) - X^(m)|_F`.
    pub delta_in: f64,
    /// `|X~^(n) - X^(n)|_F`.
    pub delta_out: f64,
    pub halving: Option<HalvingCheck>,
}

fn diff_norm(a: &Matrix, b: &Matrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

fn single(
    weights: &ModelWeights,
    x0: &Matrix,
    baseline: &crate::engine::ForwardTrace,
    site: QleSite,
    mode: PerturbationMode,
    span: (usize, usize),
    base: &Hooks,
) -> Result<(f64, f64, f64)> {
    let spec = PerturbationSpec::at_layer(span.0, site.token, site.element, mode);
    let perturbed = forward(weights, x0, &base.clone().with_perturbation(spec))?;
    let delta_in = diff_norm(&perturbed.states[span.0], &baseline.states[span.0]);
    if delta_in == 0.0 {
        return Err(Error::UndefinedPerturbation);
    }
    let delta_out = diff_norm(&perturbed.states[span.1], &baseline.states[span.1]);
    Ok((log_rate(delta_out, delta_in, span.1 - span.0), delta_in, delta_out))
}

/// Finite-difference exponent of the map from tap `m` to tap `n`:
/// `ln(|delta_out| / |delta_in|) / (n - m)`.
///
/// `delta_in` is measured from the two traces, so it is the perturbation that
/// was actually realised in floating point. `base` hooks act on both runs.
pub fn qle_intra(
    weights: &ModelWeights,
    x0: &Matrix,
    site: QleSite,
    config: &QleConfig,
    base: &Hooks,
) -> Result<IntraQle> {
    config.validate(weights.config.layers)?;
    let baseline = forward(weights, x0, base)?;
    let (lambda, delta_in, delta_out) =
        single(weights, x0, &baseline, site, config.mode, config.span, base)?;
    let halving = if config.halving_check {
        let (half, _, _) = single(
            weights,
            x0,
            &baseline,
            site,
            config.mode.scaled(0.5),
            config.span,
            base,
        )?;
        Some(HalvingCheck {
            lambda: half,
            discrepancy: (lambda - half).abs(),
        })
    } else {
        None
    };
    Ok(IntraQle {
        lambda,
        delta_in,
        delta_out,
        halving,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSweep {
    /// `(delta, lambda)` in the order given.
    pub points: Vec<(f64, f64)>,
    /// Line through the last two points evaluated at `delta = 0`.
    pub extrapolated: Option<f64>,
}

/// Exponent at each perturbation size in `deltas` (positive, strictly
/// descending), reusing one baseline pass.
pub fn delta_sweep(
    weights: &ModelWeights,
    x0: &Matrix,
    site: QleSite,
    config: &QleConfig,
    deltas: &[f64],
    base: &Hooks,
) -> Result<DeltaSweep> {
    config.validate(weights.config.layers)?;
    if deltas.is_empty() {
        return Err(Error::Argument("delta sweep needs at least one delta".into()));
    }
    if deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
        return Err(Error::Argument("sweep deltas must be positive and finite".into()));
    }
    if deltas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Argument("sweep deltas must be strictly descending".into()));
    }
    let baseline = forward(weights, x0, base)?;
    let mut points = Vec::with_capacity(deltas.len());
    for &d in deltas {
        let mode = match config.mode {
            PerturbationMode::Absolute { .. } => PerturbationMode::Absolute { delta: d },
            PerturbationMode::Relative { .. } => PerturbationMode::Relative { k_frac: d },
        };
        let (lambda, _, _) = single(weights, x0, &baseline, site, mode, config.span, base)?;
        points.push((d, lambda));
    }
    let extrapolated = match points.as_slice() {
        [.., (d1, l1), (d2, l2)] if l1.is_finite() && l2.is_finite() => {
            Some(l2 - d2 * (l1 - l2) / (d1 - d2))
        }
        _ => None,
    };
    Ok(DeltaSweep {
        points,
        extrapolated,
    })
}
