// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic fixture files for tests and demos.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use chaoscope_core::engine::{init_weights, save_weights, ModelConfig};
use chaoscope_core::residual::{ContributionLedger, MagnitudeCurve};
use chaoscope_core::suppression::{generate_toy_dataset, write_dataset};

use crate::CliError;

pub const FIG5_MLP: f64 = 0.557669;
pub const FIG5_ATT: f64 = 0.442322;
pub const FIG5_INIT: f64 = 0.000009;

pub const CURVE_LEFT_SLOPE: f64 = 0.27;
pub const CURVE_RIGHT_SLOPE: f64 = 0.075;
pub const CURVE_BREAK: usize = 9;
pub const CURVE_POINTS: usize = 39;

pub const TOY_MCQ_SEED: u64 = 7;
pub const TOY_MCQ_SIZE: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureKind {
    Fig5Trace,
    ToyMcq,
    TwoRegimeCurve,
    ToyWeights,
}

impl FromStr for FixtureKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s {
            "fig5-trace" => Ok(Self::Fig5Trace),
            "toy-mcq" => Ok(Self::ToyMcq),
            "two-regime-curve" => Ok(Self::TwoRegimeCurve),
            "toy-weights" => Ok(Self::ToyWeights),
            other => Err(CliError::Argument(format!(
                "unknown fixture kind `{other}` (expected fig5-trace, toy-mcq, two-regime-curve, toy-weights)"
            ))),
        }
    }
}

/// Split `total` over `n` layers in proportion to `weights`, with the last
/// layer taking the rounding remainder.
fn spread(total: f64, weights: &[f64]) -> Vec<f64> {
    let sum: f64 = weights.iter().sum();
    let mut out: Vec<f64> = weights.iter().map(|w| total * w / sum).collect();
    let head: f64 = out[..out.len() - 1].iter().sum();
    *out.last_mut().expect("at least one layer") = total - head;
    out
}

/// A 40-layer, width-16 ledger whose final state is the first basis vector.
/// Along that axis the components carry the recorded projection shares;
/// every other axis holds dyadic pairs that cancel exactly.
pub fn fig5_ledger() -> ContributionLedger {
    const LAYERS: usize = 40;
    const D: usize = 16;
    // mlp shares grow with depth; attention is flat with a negative last layer
    let mlp_w: Vec<f64> = (0..LAYERS).map(|p| (p + 1) as f64).collect();
    let mut att_w = vec![1.0; LAYERS];
    att_w[LAYERS - 1] = -2.0;
    let mlp_share = spread(FIG5_MLP, &mlp_w);
    let att_share = spread(FIG5_ATT, &att_w);

    let mut initial = vec![0.0; D];
    initial[0] = FIG5_INIT;
    initial[1] = 0.25;
    let mut att = Vec::with_capacity(LAYERS);
    let mut mlp = Vec::with_capacity(LAYERS);
    for p in 0..LAYERS {
        let axis = 1 + p % (D - 1);
        let s = 0.125 * (1 + p % 4) as f64;
        let mut a = vec![0.0; D];
        let mut m = vec![0.0; D];
        a[0] = att_share[p];
        m[0] = mlp_share[p];
        a[axis] = s;
        m[axis] = -s;
        if p == 0 {
            m[1] -= 0.25;
        }
        att.push(a);
        mlp.push(m);
    }
    let mut final_state = vec![0.0; D];
    final_state[0] = 1.0;
    ContributionLedger {
        token: 0,
        initial,
        att,
        mlp,
        interventions: Vec::new(),
        final_state,
    }
}

pub fn two_regime_curve() -> MagnitudeCurve {
    // the right regime starts one layer after the break at the left line's
    // extrapolated height
    let start = CURVE_LEFT_SLOPE * (CURVE_BREAK + 1) as f64;
    let average = (0..CURVE_POINTS)
        .map(|l| {
            if l <= CURVE_BREAK {
                CURVE_LEFT_SLOPE * l as f64
            } else {
                start + CURVE_RIGHT_SLOPE * (l - CURVE_BREAK - 1) as f64
            }
        })
        .collect();
    MagnitudeCurve::from_average(average)
}

pub fn write_fixture(kind: FixtureKind, out: &Path) -> Result<(), CliError> {
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    match kind {
        FixtureKind::Fig5Trace => {
            let ledger = fig5_ledger();
            ledger.validate()?;
            fs::write(out, serde_json::to_vec_pretty(&ledger)?)?;
        }
        FixtureKind::TwoRegimeCurve => {
            fs::write(out, serde_json::to_vec_pretty(&two_regime_curve())?)?;
        }
        FixtureKind::ToyMcq => {
            let weights = init_weights(&ModelConfig::toy())?;
            let items = generate_toy_dataset(&weights, TOY_MCQ_SEED, TOY_MCQ_SIZE, 6, 4)?;
            write_dataset(out, &items)?;
        }
        FixtureKind::ToyWeights => save_weights(out, &init_weights(&ModelConfig::toy())?)?,
    }
    Ok(())
}
