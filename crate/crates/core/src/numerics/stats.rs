// SPDX-License-Identifier: MIT OR Apache-2.0

use super::matrix::dot;
use crate::error::{Error, Result};

/// Pearson correlation coefficient, clamped to `[-1, 1]`.
///
/// A constant input has zero variance and the coefficient is undefined;
/// that case is an [`Error::UndefinedCorrelation`], never a silent zero.
pub fn pearson_corr(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::shape(
            "pearson_corr",
            format!("lengths {} and {}", a.len(), b.len()),
        ));
    }
    if a.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 2 samples, got {}",
            a.len()
        )));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_b = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("constant vector".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

/// Signed fraction of `target` explained by `component`:
/// `<component, target> / |target|^2`.
pub fn projection_fraction(component: &[f64], target: &[f64]) -> Result<f64> {
    if component.len() != target.len() {
        return Err(Error::shape(
            "projection_fraction",
            format!("lengths {} and {}", component.len(), target.len()),
        ));
    }
    let tt = dot(target, target);
    if tt == 0.0 {
        return Err(Error::DegenerateTarget);
    }
    Ok(dot(component, target) / tt)
}

/// Cosine similarity, `None` when either vector is zero.
pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let na = dot(a, a).sqrt();
    let nb = dot(b, b).sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot(a, b) / (na * nb)).clamp(-1.0, 1.0))
}

/// Population mean and standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
