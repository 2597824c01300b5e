// SPDX-License-Identifier: MIT OR Apache-2.0

//! Analyses of the traced residual stream: additive decomposition, magnitude
//! growth, inter-layer correlation and component geometry.

mod correlation;
mod geometry;
mod ledger;
mod magnitude;

pub use correlation::{interlayer_pearson, CorrelationMatrix, CorrelationMode};
pub use geometry::{alignment, component_geometry, Alignment, LayerGeometry};
pub use ledger::{
    build_ledger, projection_decomposition, ContributionLedger, ProjectionReport, RECONSTRUCTION_TOL,
};
pub use magnitude::{
    cross_layer_std, fit_growth, input_magnitude_curve, magnitude_curve, normalize_rows,
    CrossLayerStd, GrowthFit, IntervalStd, MagnitudeCurve,
};
