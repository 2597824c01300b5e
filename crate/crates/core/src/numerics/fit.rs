// SPDX-License-Identifier: MIT OR Apache-2.0

//! Ordinary least squares lines and the two-segment breakpoint search.

use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Sum of squared residuals over `range`.
    pub sse: f64,
    /// Inclusive span of point indices the line was fitted to.
    pub range: RangeInclusive<usize>,
}

impl LineFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseFit {
    /// Index of the last point of the left segment.
    pub breakpoint: usize,
    pub left: LineFit,
    pub right: LineFit,
    pub total_sse: f64,
}

pub fn least_squares_line(xs: &[f64], ys: &[f64]) -> Result<LineFit> {
    if xs.len() != ys.len() {
        return Err(Error::Fit(format!(
            "{} xs but {} ys",
            xs.len(),
            ys.len()
        )));
    }
    if xs.is_empty() {
        return Err(Error::Fit("no points".into()));
    }
    fit_span(xs, ys, 0, xs.len() - 1)
}

/// OLS over `xs[lo..=hi]`, reporting `range = lo..=hi`.
fn fit_span(xs: &[f64], ys: &[f64], lo: usize, hi: usize) -> Result<LineFit> {
    let px = &xs[lo..=hi];
    let py = &ys[lo..=hi];
    if px.len() < 2 {
        return Err(Error::Fit(format!("need at least 2 points, got {}", px.len())));
    }
    let n = px.len() as f64;
    let mx = px.iter().sum::<f64>() / n;
    let my = py.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (&x, &y) in px.iter().zip(py) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 {
        return Err(Error::Fit("all xs equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse = px
        .iter()
        .zip(py)
        .map(|(&x, &y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum();
    Ok(LineFit {
        slope,
        intercept,
        sse,
        range: lo..=hi,
    })
}

/// Exhaustive search for the breakpoint `b` splitting the points into
/// `[0, b]` and `[b + 1, n - 1]` with minimum combined SSE.
///
/// Each segment holds at least `min_segment` points. Candidates whose SSE is
/// within `1e-12 * (1 + SST)` of the best so far count as ties and lose to
/// the earlier (smaller) breakpoint, so exactly-fitting data resolves to the
/// smallest admissible split despite rounding noise.
pub fn piecewise_two_segment_fit(xs: &[f64], ys: &[f64], min_segment: usize) -> Result<PiecewiseFit> {
    if xs.len() != ys.len() {
        return Err(Error::Fit(format!(
            "{} xs but {} ys",
            xs.len(),
            ys.len()
        )));
    }
    if min_segment < 2 {
        return Err(Error::Fit(format!("min_segment must be >= 2, got {min_segment}")));
    }
    let n = xs.len();
    if n < 2 * min_segment {
        return Err(Error::Fit(format!(
            "{n} points cannot hold two segments of {min_segment}"
        )));
    }
    let my = ys.iter().sum::<f64>() / n as f64;
    let sst: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let tie_tol = 1e-12 * (1.0 + sst);

    let mut best: Option<PiecewiseFit> = None;
    for b in (min_segment - 1)..=(n - min_segment - 1) {
        let left = fit_span(xs, ys, 0, b)?;
        let right = fit_span(xs, ys, b + 1, n - 1)?;
        let total_sse = left.sse + right.sse;
        let better = match &best {
            None => true,
            Some(cur) => total_sse < cur.total_sse - tie_tol,
        };
        if better {
            best = Some(PiecewiseFit {
                breakpoint: b,
                left,
                right,
                total_sse,
            });
        }
    }
    // the loop range is nonempty because n >= 2 * min_segment
    Ok(best.expect("at least one admissible breakpoint"))
}
