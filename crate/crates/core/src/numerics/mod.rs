// SPDX-License-Identifier: MIT OR Apache-2.0

//! Deterministic dense linear algebra, statistics and curve fitting.
//!
//! Everything here runs in `f64`.

mod fit;
mod lyapunov;
mod matrix;
mod ops;
mod random;
mod stats;

pub use fit::{least_squares_line, piecewise_two_segment_fit, LineFit, PiecewiseFit};
pub use lyapunov::{lyapunov_discrete_map, DiscreteMap, LinearMap, LogisticMap, DERIVATIVE_FLOOR};
pub use matrix::{dot, norm2, Matrix};
pub use ops::{activation, log_softmax, rms_norm, rms_norm_rows, row_softmax, Activation};
pub(crate) use ops::softmax_in_place;
pub use random::RandomStream;
pub use stats::{cosine, mean_std, pearson_corr, projection_fraction};
