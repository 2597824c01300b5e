// SPDX-License-Identifier: MIT OR Apache-2.0

//! Intervention points of the forward pass: perturbations, low-magnitude
//! suppression, and diagnostic block replacements.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbationMode {
    /// Add `delta` to each targeted element.
    Absolute { delta: f64 },
    /// Add `k_frac * x` to each targeted element `x`.
    Relative { k_frac: f64 },
}

impl PerturbationMode {
    pub fn magnitude(&self) -> f64 {
        match *self {
            PerturbationMode::Absolute { delta } => delta,
            PerturbationMode::Relative { k_frac } => k_frac,
        }
    }

    /// Same mode with the magnitude multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        match *self {
            PerturbationMode::Absolute { delta } => PerturbationMode::Absolute {
                delta: delta * factor,
            },
            PerturbationMode::Relative { k_frac } => PerturbationMode::Relative {
                k_frac: k_frac * factor,
            },
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InjectPoint {
    /// The residual state `X^(layer)`: the output of block `layer - 1` and
    /// the input of block `layer`. Layer 0 is the embedded input.
    #[default]
    PostLayerOutput,
    /// The embedded input `X^(0)`, regardless of `layer`.
    InitialEmbedding,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    #[serde(default)]
    pub layer: usize,
    pub token: usize,
    /// Single element index, or every element of the row when `None`.
    #[serde(default)]
    pub element: Option<usize>,
    pub mode: PerturbationMode,
    #[serde(default)]
    pub inject_point: InjectPoint,
}

impl PerturbationSpec {
    pub fn at_layer(layer: usize, token: usize, element: Option<usize>, mode: PerturbationMode) -> Self {
        Self {
            layer,
            token,
            element,
            mode,
            inject_point: InjectPoint::PostLayerOutput,
        }
    }

    pub fn on_embedding(token: usize, element: Option<usize>, mode: PerturbationMode) -> Self {
        Self {
            layer: 0,
            token,
            element,
            mode,
            inject_point: InjectPoint::InitialEmbedding,
        }
    }

    /// Residual tap index the perturbation lands on.
    pub fn tap(&self) -> usize {
        match self.inject_point {
            InjectPoint::PostLayerOutput => self.layer,
            InjectPoint::InitialEmbedding => 0,
        }
    }

    pub(crate) fn validate(&self, layers: usize, seq: usize, hidden: usize) -> Result<()> {
        if self.tap() > layers {
            return Err(Error::Index(format!(
                "perturbation tap {} beyond {layers} layers",
                self.tap()
            )));
        }
        if self.token >= seq {
            return Err(Error::Index(format!(
                "perturbation token {} with sequence length {seq}",
                self.token
            )));
        }
        if let Some(j) = self.element {
            if j >= hidden {
                return Err(Error::Index(format!("perturbation element {j} with hidden {hidden}")));
            }
        }
        if !self.mode.magnitude().is_finite() {
            return Err(Error::Argument("perturbation magnitude must be finite".into()));
        }
        Ok(())
    }

    /// Apply in place and return what actually changed.
    pub(crate) fn apply(&self, state: &mut Matrix) -> InjectionRecord {
        let row = state.row_mut(self.token);
        let range = match self.element {
            Some(j) => j..j + 1,
            None => 0..row.len(),
        };
        let mut realized = Vec::with_capacity(range.len());
        let mut zero_elements = Vec::new();
        for j in range {
            let old = row[j];
            let step = match self.mode {
                PerturbationMode::Absolute { delta } => delta,
                PerturbationMode::Relative { k_frac } => k_frac * old,
            };
            row[j] = old + step;
            let diff = row[j] - old;
            if diff == 0.0 {
                zero_elements.push(j);
            }
            realized.push((j, diff));
        }
        InjectionRecord {
            tap: self.tap(),
            token: self.token,
            realized,
            zero_elements,
        }
    }
}

/// What a perturbation changed in the traced state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InjectionRecord {
    pub tap: usize,
    pub token: usize,
    /// `(element, new - old)` for every targeted element.
    pub realized: Vec<(usize, f64)>,
    /// Targeted elements whose value did not change (for example a relative
    /// perturbation of an exact zero).
    pub zero_elements: Vec<usize>,
}

impl InjectionRecord {
    pub fn norm(&self) -> f64 {
        self.realized.iter().map(|(_, d)| d * d).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerSet {
    #[default]
    All,
    Only(BTreeSet<usize>),
}

impl LayerSet {
    pub fn contains(&self, layer: usize) -> bool {
        match self {
            LayerSet::All => true,
            LayerSet::Only(set) => set.contains(&layer),
        }
    }
}

/// Zero the lowest-magnitude `fraction` percent of each targeted block
/// output `X^(n+1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuppressionSpec {
    pub fraction: f64,
    #[serde(default)]
    pub layers: LayerSet,
}

impl SuppressionSpec {
    pub fn new(fraction: f64) -> Result<Self> {
        let spec = Self {
            fraction,
            layers: LayerSet::All,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=100.0).contains(&self.fraction) {
            return Err(Error::Argument(format!(
                "suppression fraction {} outside [0, 100]",
                self.fraction
            )));
        }
        Ok(())
    }

    /// `floor(fraction / 100 * n)`, computed as `fraction * n / 100` so that
    /// half-percent grids on integer sizes never round across an integer.
    pub fn zero_count(&self, n: usize) -> usize {
        let count = (self.fraction * n as f64 / 100.0).floor() as usize;
        count.min(n)
    }
}

/// Zero the `count` smallest-|value| entries. Ties in magnitude go to the
/// lower flat (row-major) index first, i.e. `(token, element)` ascending.
pub fn suppress_lowest(state: &mut Matrix, count: usize) {
    if count == 0 {
        return;
    }
    let data = state.as_mut_slice();
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by(|&a, &b| data[a].abs().total_cmp(&data[b].abs()).then(a.cmp(&b)));
    for &idx in &order[..count] {
        data[idx] = 0.0;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Replacement {
    Identity,
    Scale { c: f64 },
}

/// Replace block `layer` wholesale with a known linear map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticLayerSpec {
    pub layer: usize,
    pub replacement: Replacement,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Hooks {
    #[serde(default)]
    pub perturbations: Vec<PerturbationSpec>,
    #[serde(default)]
    pub suppression: Option<SuppressionSpec>,
    #[serde(default)]
    pub diagnostics: Vec<DiagnosticLayerSpec>,
}

impl Hooks {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn with_perturbation(mut self, p: PerturbationSpec) -> Self {
        self.perturbations.push(p);
        self
    }

    pub fn with_suppression(mut self, s: SuppressionSpec) -> Self {
        self.suppression = Some(s);
        self
    }

    pub fn with_diagnostic(mut self, layer: usize, replacement: Replacement) -> Self {
        self.diagnostics.push(DiagnosticLayerSpec { layer, replacement });
        self
    }

    /// Every block in `range` replaced by `scale(c)`.
    pub fn scale_layers(range: std::ops::Range<usize>, c: f64) -> Self {
        let mut hooks = Self::none();
        for layer in range {
            hooks = hooks.with_diagnostic(layer, Replacement::Scale { c });
        }
        hooks
    }

    pub(crate) fn diagnostic_for(&self, layer: usize) -> Option<Replacement> {
        // a later spec for the same layer wins
        self.diagnostics
            .iter()
            .rev()
            .find(|d| d.layer == layer)
            .map(|d| d.replacement)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_count_is_exact_floor() {
        for n in [1usize, 7, 64, 256, 1000] {
            for half_steps in 0..=200u32 {
                let spec = SuppressionSpec::new(f64::from(half_steps) / 2.0).unwrap();
                let want = (half_steps as usize * n) / 200;
                assert_eq!(spec.zero_count(n), want, "k={} n={n}", spec.fraction);
            }
        }
        // 29 / 100 * 100 would floor to 28 in naive evaluation order
        assert_eq!(SuppressionSpec::new(29.0).unwrap().zero_count(100), 29);
    }

    #[test]
    fn fraction_bounds() {
        assert!(SuppressionSpec::new(-0.5).is_err());
        assert!(SuppressionSpec::new(100.5).is_err());
        assert!(SuppressionSpec::new(f64::NAN).is_err());
    }

    #[test]
    fn lowest_half_matches_independent_sort() {
        let values = vec![3.0, -0.5, 0.5, 2.0, -1.0, 0.25, 0.5, -4.0];
        let mut m = Matrix::new(2, 4, values.clone()).unwrap();
        suppress_lowest(&mut m, 4);
        // oracle: rank by (|v|, index) with a plain selection loop
        let mut remaining: Vec<usize> = (0..values.len()).collect();
        let mut zeroed = Vec::new();
        for _ in 0..4 {
            let mut best = 0;
            for (pos, &i) in remaining.iter().enumerate() {
                let cur = remaining[best];
                if values[i].abs() < values[cur].abs() {
                    best = pos;
                }
            }
            zeroed.push(remaining.remove(best));
        }
        zeroed.sort_unstable();
        assert_eq!(zeroed, vec![1, 2, 5, 6]);
        for (i, &v) in m.as_slice().iter().enumerate() {
            if zeroed.contains(&i) {
                assert_eq!(v, 0.0);
            } else {
                assert_eq!(v, values[i]);
            }
        }
    }

    #[test]
    fn suppression_is_idempotent() {
        let mut m = Matrix::new(1, 6, vec![0.0, 0.2, -0.1, 0.0, 5.0, -0.3]).unwrap();
        suppress_lowest(&mut m, 3);
        let once = m.clone();
        suppress_lowest(&mut m, 3);
        assert_eq!(m, once);
    }

    #[test]
    fn relative_perturbation_of_zero_is_recorded() {
        let mut m = Matrix::new(1, 3, vec![0.0, 2.0, -1.0]).unwrap();
        let spec = PerturbationSpec::at_layer(0, 0, None, PerturbationMode::Relative { k_frac: 0.5 });
        let rec = spec.apply(&mut m);
        assert_eq!(rec.zero_elements, vec![0]);
        assert_eq!(m.as_slice(), &[0.0, 3.0, -1.5]);
        assert!((rec.norm() - (1.0f64 + 0.25).sqrt()).abs() < 1e-15);
    }
}
