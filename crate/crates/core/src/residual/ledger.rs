// SPDX-License-Identifier: MIT OR Apache-2.0

use serde::{Deserialize, Serialize};

use crate::engine::ForwardTrace;
use crate::error::{Error, Result};
use crate::numerics::{norm2, projection_fraction};

/// Relative tolerance of the additive reconstruction, measured against the
/// total mass `|x0| + sum |component|` of the summands.
pub const RECONSTRUCTION_TOL: f64 = 1e-9;

/// The additive decomposition of one token's final residual state:
/// `final = initial + sum_p (att[p] + mlp[p]) + sum interventions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContributionLedger {
    pub token: usize,
    pub initial: Vec<f64>,
    pub att: Vec<Vec<f64>>,
    pub mlp: Vec<Vec<f64>>,
    /// Hook edits `(tap, delta)` made after a block produced its output.
    #[serde(default)]
    pub interventions: Vec<(usize, Vec<f64>)>,
    pub final_state: Vec<f64>,
}

impl ContributionLedger {
    pub fn layers(&self) -> usize {
        self.att.len()
    }

    fn summands(&self) -> impl Iterator<Item = &Vec<f64>> {
        std::iter::once(&self.initial)
            .chain(self.att.iter().zip(&self.mlp).flat_map(|(a, m)| [a, m]))
            .chain(self.interventions.iter().map(|(_, v)| v))
    }

    /// `initial + sum of all contributions`.
    pub fn reconstruct(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.initial.len()];
        for part in self.summands() {
            for (a, v) in acc.iter_mut().zip(part) {
                *a += v;
            }
        }
        acc
    }

    fn residual_norm(&self) -> f64 {
        let recon = self.reconstruct();
        recon
            .iter()
            .zip(&self.final_state)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `|reconstruct() - final| / |final|`; the absolute error when the
    /// final state is zero.
    pub fn relative_error(&self) -> f64 {
        let err = self.residual_norm();
        let scale = norm2(&self.final_state);
        if scale > 0.0 {
            err / scale
        } else {
            err
        }
    }

    /// Reconstruction error relative to the total mass of the summands.
    pub fn mass_relative_error(&self) -> f64 {
        let mass: f64 = self.summands().map(|v| norm2(v)).sum();
        let err = self.residual_norm();
        if mass > 0.0 {
            err / mass
        } else {
            err
        }
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.initial.len();
        let bad_len = self.final_state.len() != d
            || self.att.len() != self.mlp.len()
            || self.summands().any(|v| v.len() != d);
        if bad_len {
            return Err(Error::Validation("ledger vectors have inconsistent lengths".into()));
        }
        let err = self.mass_relative_error();
        if err > RECONSTRUCTION_TOL {
            return Err(Error::Validation(format!(
                "ledger does not reconstruct its final state (relative error {err:e})"
            )));
        }
        Ok(())
    }
}

/// Extract token `m`'s row from every tap of the trace.
pub fn build_ledger(trace: &ForwardTrace, token: usize) -> Result<ContributionLedger> {
    if token >= trace.seq_len() {
        return Err(Error::Index(format!(
            "token {token} with sequence length {}",
            trace.seq_len()
        )));
    }
    let row = |m: &crate::numerics::Matrix| m.row(token).to_vec();
    let mut interventions = Vec::new();
    let mut initial = row(trace.input());
    if let Some(delta) = &trace.interventions[0] {
        // tap-0 edits are folded out of x0 so the ledger's initial state is
        // the unperturbed embedding
        for (x, d) in initial.iter_mut().zip(delta.row(token)) {
            *x -= d;
        }
        interventions.push((0, row(delta)));
    }
    for (tap, delta) in trace.interventions.iter().enumerate().skip(1) {
        if let Some(delta) = delta {
            interventions.push((tap, row(delta)));
        }
    }
    let ledger = ContributionLedger {
        token,
        initial,
        att: trace.att.iter().map(row).collect(),
        mlp: trace.mlp.iter().map(row).collect(),
        interventions,
        final_state: row(trace.final_state()),
    };
    ledger.validate()?;
    Ok(ledger)
}

/// Signed share of the final state carried by each summand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionReport {
    pub token: usize,
    pub initial: f64,
    pub att: Vec<f64>,
    pub mlp: Vec<f64>,
    /// Combined share of hook edits; zero for an unhooked trace.
    pub interventions: f64,
    pub att_total: f64,
    pub mlp_total: f64,
}

impl ProjectionReport {
    /// Sum of every share; one up to rounding.
    pub fn total(&self) -> f64 {
        self.initial + self.att_total + self.mlp_total + self.interventions
    }
}

pub fn projection_decomposition(ledger: &ContributionLedger) -> Result<ProjectionReport> {
    let target = &ledger.final_state;
    let frac = |v: &Vec<f64>| projection_fraction(v, target);
    let initial = frac(&ledger.initial)?;
    let att = ledger.att.iter().map(frac).collect::<Result<Vec<_>>>()?;
    let mlp = ledger.mlp.iter().map(frac).collect::<Result<Vec<_>>>()?;
    let interventions = ledger
        .interventions
        .iter()
        .try_fold(0.0, |acc, (_, v)| frac(v).map(|f| acc + f))?;
    Ok(ProjectionReport {
        token: ledger.token,
        initial,
        att_total: att.iter().sum(),
        mlp_total: mlp.iter().sum(),
        att,
        mlp,
        interventions,
    })
}
