// SPDX-License-Identifier: MIT OR Apache-2.0

//! Classical Lyapunov exponent of a one-dimensional map, used as an oracle
//! for the layer-wise estimators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Derivatives below this magnitude are clamped before taking the log.
pub const DERIVATIVE_FLOOR: f64 = 1e-300;

pub trait DiscreteMap {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
}

/// `x -> r x (1 - x)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticMap {
    pub r: f64,
}

impl DiscreteMap for LogisticMap {
    fn value(&self, x: f64) -> f64 {
        self.r * x * (1.0 - x)
    }

    fn derivative(&self, x: f64) -> f64 {
        self.r * (1.0 - 2.0 * x)
    }
}

/// `x -> c x`
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearMap {
    pub c: f64,
}

impl DiscreteMap for LinearMap {
    fn value(&self, x: f64) -> f64 {
        self.c * x
    }

    fn derivative(&self, _x: f64) -> f64 {
        self.c
    }
}

/// Mean of `ln |f'(x_i)|` over `iters` orbit points following `burn_in`
/// discarded iterations.
pub fn lyapunov_discrete_map<M: DiscreteMap + ?Sized>(
    map: &M,
    x0: f64,
    burn_in: usize,
    iters: usize,
) -> Result<f64> {
    if iters == 0 {
        return Err(Error::Argument("iters must be >= 1".into()));
    }
    let mut x = x0;
    for i in 0..burn_in {
        if !x.is_finite() {
            return Err(Error::Divergence { iteration: i });
        }
        x = map.value(x);
    }
    let mut sum = 0.0;
    for i in 0..iters {
        if !x.is_finite() {
            return Err(Error::Divergence {
                iteration: burn_in + i,
            });
        }
        sum += map.derivative(x).abs().max(DERIVATIVE_FLOOR).ln();
        if i + 1 < iters {
            x = map.value(x);
        }
    }
    Ok(sum / iters as f64)
}
