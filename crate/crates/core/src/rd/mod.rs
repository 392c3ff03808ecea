//! Rate-distortion solvers for finite sources under multiple distortion
//! constraints.
//!
//! The inner solver is an alternating-minimization iteration at fixed
//! Lagrange multipliers; the outer solver searches the multipliers by
//! per-coordinate bisection until every constraint is tight or slack at a
//! zero multiplier. The reweighted matrices produced by
//! [`crate::model::modified_distortion`] turn subsource-dependent
//! constraints into plain expectations, so the same machinery evaluates the
//! constrained rate of a composite source directly.

mod ba;
mod brute;
mod dual;

pub use ba::{ba_fixed_multipliers, BaOutcome};
pub use brute::optimal_rate_bruteforce;
pub use dual::{classical_rd, rate_for_budget, RawSolution, SolverOptions};

use std::collections::BTreeMap;

use thiserror::Error;

use crate::model::{
    active_criteria, modified_distortion, CompositeSource, DistortionBudget, FidelityCriterion,
    ModelError,
};

#[derive(Debug, Error, PartialEq)]
pub enum RdError {
    #[error("no channel satisfies the constraints of criteria {violating:?}")]
    Infeasible { violating: Vec<String> },
    #[error("solver failed to converge: {0}")]
    NonConvergence(String),
    #[error("brute-force oracle requires binary alphabets, got {symbols} symbols x {reproductions} reproductions")]
    AlphabetTooLarge {
        symbols: usize,
        reproductions: usize,
    },
    #[error("no grid channel satisfies the constraints")]
    InfeasibleOnGrid,
    #[error("classification is not perfect: criterion `{id}` mismatches its label event with probability {mismatch:e}")]
    NotPerfectClassification { id: String, mismatch: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A conditional pmf from source symbols to reproduction symbols. Rows are
/// pmfs; the channel depends on the symbol only, so any state/symbol pair is
/// carried through it unchanged in law.
#[derive(Debug, Clone, PartialEq)]
pub struct TestChannel {
    rows: usize,
    cols: usize,
    w: Vec<f64>,
}

impl TestChannel {
    pub fn new(rows: usize, cols: usize, w: Vec<f64>) -> Result<Self, RdError> {
        assert_eq!(w.len(), rows * cols, "channel shape mismatch");
        for r in 0..rows {
            let sum: f64 = w[r * cols..(r + 1) * cols].iter().sum();
            if (sum - 1.0).abs() > 1e-9 || w[r * cols..(r + 1) * cols].iter().any(|&p| !(0.0..=1.0 + 1e-12).contains(&p)) {
                return Err(RdError::NonConvergence(format!(
                    "channel row {r} is not a pmf (sum {sum})"
                )));
            }
        }
        Ok(Self { rows, cols, w })
    }

    pub(crate) fn from_raw(rows: usize, cols: usize, w: Vec<f64>) -> Self {
        Self { rows, cols, w }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn prob(&self, x: usize, xhat: usize) -> f64 {
        self.w[x * self.cols + xhat]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.w[x * self.cols..(x + 1) * self.cols]
    }

    /// Output marginal under the input pmf `px`.
    pub fn output_marginal(&self, px: &[f64]) -> Vec<f64> {
        let mut q = vec![0.0; self.cols];
        for (x, &p) in px.iter().enumerate() {
            if p > 0.0 {
                for (j, qj) in q.iter_mut().enumerate() {
                    *qj += p * self.prob(x, j);
                }
            }
        }
        q
    }
}

/// Mutual information I(X; Xhat) in bits for input pmf `px` and a channel.
pub fn mutual_information(px: &[f64], channel: &TestChannel) -> f64 {
    let q = channel.output_marginal(px);
    let mut info = 0.0;
    for (x, &p) in px.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        for (j, &qj) in q.iter().enumerate() {
            let w = channel.prob(x, j);
            if w > 0.0 && qj > 0.0 {
                info += p * w * (w / qj).log2();
            }
        }
    }
    info.max(0.0)
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        0.0
    } else {
        -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
    }
}

/// Entropy of a pmf in bits.
pub fn entropy(p: &[f64]) -> f64 {
    p.iter()
        .filter(|&&v| v > 0.0)
        .map(|&v| -v * v.log2())
        .sum()
}

/// One solved point on a rate-distortion curve.
#[derive(Debug, Clone)]
pub struct RdPoint {
    pub budget: DistortionBudget,
    /// Bits per source symbol.
    pub rate: f64,
    pub channel: TestChannel,
    /// Lagrange multiplier per active criterion id.
    pub multipliers: BTreeMap<String, f64>,
    /// Achieved expected distortion per active criterion id.
    pub achieved_distortions: BTreeMap<String, f64>,
}

/// The constrained rate of a composite source: the least mutual information
/// I(X; Xhat) over channels meeting every active criterion at its budget
/// level. Computed by reducing each criterion to its reweighted matrix and
/// running the multi-constraint solver on the symbol marginal.
pub fn optimal_rate(
    source: &CompositeSource,
    criteria: &[FidelityCriterion],
    budget: &DistortionBudget,
    opts: &SolverOptions,
) -> Result<RdPoint, RdError> {
    optimal_rate_warm(source, criteria, budget, opts, None)
}

/// [`optimal_rate`] with a warm-start multiplier vector (aligned with the
/// active criteria), useful while sweeping budgets.
pub fn optimal_rate_warm(
    source: &CompositeSource,
    criteria: &[FidelityCriterion],
    budget: &DistortionBudget,
    opts: &SolverOptions,
    warm_multipliers: Option<&[f64]>,
) -> Result<RdPoint, RdError> {
    let act = active_criteria(source, criteria);
    let px = source.symbol_marginal();
    let mut matrices = Vec::with_capacity(act.len());
    let mut levels = Vec::with_capacity(act.len());
    let mut ids = Vec::with_capacity(act.len());
    for &k in &act {
        matrices.push(modified_distortion(source, &criteria[k])?);
        levels.push(
            budget
                .level(criteria[k].id())
                .ok_or_else(|| ModelError::MissingBudgetLevel {
                    id: criteria[k].id().to_string(),
                })?,
        );
        ids.push(criteria[k].id().to_string());
    }
    let raw = rate_for_budget(
        &px,
        &matrices,
        source.n_reproductions(),
        None,
        &levels,
        &ids,
        opts,
        warm_multipliers,
    )?;
    Ok(raw.into_point(budget.clone(), &ids))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mutual_information_of_identity_channel_is_entropy() {
        let ch = TestChannel::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let px = [0.4, 0.6];
        assert!((mutual_information(&px, &ch) - binary_entropy(0.4)).abs() < 1e-12);
    }

    #[test]
    fn mutual_information_of_constant_channel_is_zero() {
        let ch = TestChannel::new(2, 2, vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let px = [0.4, 0.6];
        assert_eq!(mutual_information(&px, &ch), 0.0);
    }

    #[test]
    fn channel_rows_must_be_pmfs() {
        assert!(TestChannel::new(1, 2, vec![0.7, 0.2]).is_err());
    }
}
