//! Evaluation of subsource-dependent fidelity criteria on realized
//! state/symbol/reproduction triples.
//!
//! A triple meets the criterion `(d, subset, delta)` when the signed sum of
//! `d(x_i, xhat_i) - delta` over the positions whose state lies in the
//! subset is nonpositive; equivalently, when the average distortion over
//! those positions does not exceed `delta`. Sums are accumulated with
//! compensated summation so the boundary test is stable, and equality counts
//! as met.

use thiserror::Error;

use crate::model::{compensated_sum, FidelityCriterion};

#[derive(Debug, Error, PartialEq)]
pub enum FidelityError {
    #[error("sequence lengths differ: states {states}, symbols {symbols}, reproductions {reproductions}")]
    LengthMismatch {
        states: usize,
        symbols: usize,
        reproductions: usize,
    },
    #[error("index sets do not partition the merged range: {0}")]
    NotAPartition(String),
}

/// A realized (state, symbol, reproduction) sequence triple, all of equal
/// length. Symbols are alphabet positions.
#[derive(Debug, Clone, PartialEq)]
pub struct Triple {
    pub states: Vec<usize>,
    pub symbols: Vec<usize>,
    pub reproductions: Vec<usize>,
}

impl Triple {
    pub fn new(
        states: Vec<usize>,
        symbols: Vec<usize>,
        reproductions: Vec<usize>,
    ) -> Result<Self, FidelityError> {
        if states.len() != symbols.len() || symbols.len() != reproductions.len() {
            return Err(FidelityError::LengthMismatch {
                states: states.len(),
                symbols: symbols.len(),
                reproductions: reproductions.len(),
            });
        }
        Ok(Self {
            states,
            symbols,
            reproductions,
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Whether the triple meets the criterion at distortion level `delta`.
///
/// Positions whose state falls outside the criterion's subset contribute
/// nothing; with no in-subset position the criterion is vacuously met.
pub fn meets(triple: &Triple, criterion: &FidelityCriterion, delta: f64) -> bool {
    signed_excess(triple, criterion, delta) <= 0.0
}

/// The signed sum of `d(x_i, xhat_i) - delta` over in-subset positions.
pub fn signed_excess(triple: &Triple, criterion: &FidelityCriterion, delta: f64) -> f64 {
    let subset = criterion.state_subset();
    compensated_sum(
        triple
            .states
            .iter()
            .zip(triple.symbols.iter().zip(&triple.reproductions))
            .filter(|(&s, _)| subset[s])
            .map(|(_, (&x, &xhat))| criterion.distortion(x, xhat) - delta),
    )
}

/// Average distortion over in-subset positions, together with their count.
pub fn subset_average(triple: &Triple, criterion: &FidelityCriterion) -> (f64, usize) {
    let subset = criterion.state_subset();
    let mut count = 0usize;
    let total = compensated_sum(
        triple
            .states
            .iter()
            .zip(triple.symbols.iter().zip(&triple.reproductions))
            .filter(|(&s, _)| subset[s])
            .inspect(|_| count += 1)
            .map(|(_, (&x, &xhat))| criterion.distortion(x, xhat)),
    );
    if count == 0 {
        (0.0, 0)
    } else {
        (total / count as f64, count)
    }
}

/// The state-dependent conversion of a criterion at level `delta`: the value
/// is the criterion's distortion when the state is in the subset and `delta`
/// otherwise. Averaging this tensor over a triple and comparing against
/// `delta` decides the criterion exactly.
#[derive(Debug, Clone)]
pub struct ConvertedDistortion {
    data: Vec<f64>,
    n_reproductions: usize,
    n_states: usize,
}

impl ConvertedDistortion {
    pub fn value(&self, x: usize, xhat: usize, s: usize) -> f64 {
        self.data[(x * self.n_reproductions + xhat) * self.n_states + s]
    }
}

/// Builds the conversion tensor over symbols x reproductions x states.
pub fn converted_distortion(
    criterion: &FidelityCriterion,
    delta: f64,
    n_states: usize,
) -> ConvertedDistortion {
    let nr = criterion.n_reproductions();
    let mut data = vec![0.0; criterion.n_symbols() * nr * n_states];
    for x in 0..criterion.n_symbols() {
        for xhat in 0..nr {
            for s in 0..n_states {
                data[(x * nr + xhat) * n_states + s] = if criterion.state_subset()[s] {
                    criterion.distortion(x, xhat)
                } else {
                    delta
                };
            }
        }
    }
    ConvertedDistortion {
        data,
        n_reproductions: nr,
        n_states,
    }
}

/// Averages the conversion tensor along a triple. Empty triples average to
/// zero.
pub fn converted_average(triple: &Triple, conversion: &ConvertedDistortion) -> f64 {
    if triple.is_empty() {
        return 0.0;
    }
    let total = compensated_sum(
        triple
            .states
            .iter()
            .zip(triple.symbols.iter().zip(&triple.reproductions))
            .map(|(&s, (&x, &xhat))| conversion.value(x, xhat, s)),
    );
    total / triple.len() as f64
}

/// Result of checking the per-class combining argument on a partitioned
/// triple.
#[derive(Debug, Clone, PartialEq)]
pub enum CombineVerdict {
    /// Every class met its level and the weighted levels fit the merged
    /// budget, so the merged triple meets the criterion.
    MergedMeets,
    /// No class met its level and the weighted levels exhaust the merged
    /// budget, so the merged triple fails the criterion.
    MergedFails,
    /// Neither set of hypotheses holds; the check is inconclusive.
    Inconclusive,
}

/// Witness accompanying a [`CombineVerdict`].
#[derive(Debug, Clone, PartialEq)]
pub struct CombineReport {
    pub verdict: CombineVerdict,
    /// Whether each class met its per-class level, in input order.
    pub class_met: Vec<bool>,
    /// Sum of |J(u) and J*| * delta_u over classes.
    pub weighted_levels: f64,
    /// |J*| * delta.
    pub merged_budget: f64,
    /// Direct evaluation of the merged triple, for cross-checking.
    pub merged_meets: bool,
}

/// Checks the combining argument: classes are given as index sets `J(u)`
/// over a merged triple of length n, each with its own level `delta_u`. If
/// every class triple meets `(d, subset, delta_u)` and the weighted levels
/// fit within `|J*| * delta`, the merged triple meets `(d, subset, delta)`;
/// if no class meets its level and the weighted levels exhaust the budget,
/// the merged triple fails.
pub fn combine_check(
    merged: &Triple,
    partition: &[Vec<usize>],
    class_levels: &[f64],
    criterion: &FidelityCriterion,
    delta: f64,
) -> Result<CombineReport, FidelityError> {
    if partition.len() != class_levels.len() {
        return Err(FidelityError::NotAPartition(format!(
            "{} index sets but {} class levels",
            partition.len(),
            class_levels.len()
        )));
    }
    let n = merged.len();
    let mut seen = vec![false; n];
    for class in partition {
        for &i in class {
            if i >= n {
                return Err(FidelityError::NotAPartition(format!(
                    "index {i} out of range for length {n}"
                )));
            }
            if seen[i] {
                return Err(FidelityError::NotAPartition(format!(
                    "index {i} appears in two classes"
                )));
            }
            seen[i] = true;
        }
    }
    if seen.iter().any(|&s| !s) {
        return Err(FidelityError::NotAPartition(
            "some index belongs to no class".to_string(),
        ));
    }

    let subset = criterion.state_subset();
    let in_subset_total = merged.states.iter().filter(|&&s| subset[s]).count();

    let mut class_met = Vec::with_capacity(partition.len());
    let mut weighted_levels = 0.0;
    for (class, &level) in partition.iter().zip(class_levels) {
        let sub = Triple {
            states: class.iter().map(|&i| merged.states[i]).collect(),
            symbols: class.iter().map(|&i| merged.symbols[i]).collect(),
            reproductions: class.iter().map(|&i| merged.reproductions[i]).collect(),
        };
        class_met.push(meets(&sub, criterion, level));
        let overlap = class.iter().filter(|&&i| subset[merged.states[i]]).count();
        weighted_levels += overlap as f64 * level;
    }
    let merged_budget = in_subset_total as f64 * delta;
    let merged_meets = meets(merged, criterion, delta);

    let verdict = if class_met.iter().all(|&m| m) && weighted_levels <= merged_budget {
        CombineVerdict::MergedMeets
    } else if class_met.iter().all(|&m| !m) && weighted_levels >= merged_budget {
        CombineVerdict::MergedFails
    } else {
        CombineVerdict::Inconclusive
    };
    Ok(CombineReport {
        verdict,
        class_met,
        weighted_levels,
        merged_budget,
        merged_meets,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::FidelityCriterion;

    fn hamming2(subset: Vec<bool>) -> FidelityCriterion {
        FidelityCriterion::new("c".into(), subset, vec![0.0, 1.0, 1.0, 0.0], 2, 2).unwrap()
    }

    #[test]
    fn vacuous_when_no_state_in_subset() {
        let crit = hamming2(vec![true, false]);
        let t = Triple::new(vec![1, 1], vec![0, 1], vec![1, 0]).unwrap();
        assert!(meets(&t, &crit, 0.0));
    }

    #[test]
    fn single_mismatch_fails_half_budget() {
        let crit = hamming2(vec![true, false]);
        let t = Triple::new(vec![0], vec![0], vec![1]).unwrap();
        assert!(!meets(&t, &crit, 0.5));
        assert!(meets(&t, &crit, 1.0));
    }

    #[test]
    fn hand_evaluated_mixed_sequence() {
        // In-subset positions are 0 and 2 and both reproductions match.
        let crit = hamming2(vec![true, false]);
        let t = Triple::new(vec![0, 1, 0], vec![0, 0, 1], vec![0, 1, 1]).unwrap();
        assert!(meets(&t, &crit, 0.0));
    }

    #[test]
    fn boundary_equality_counts_as_met() {
        let crit = hamming2(vec![true, true]);
        // Average distortion exactly 0.5.
        let t = Triple::new(vec![0, 1], vec![0, 1], vec![1, 1]).unwrap();
        assert!(meets(&t, &crit, 0.5));
        assert!(!meets(&t, &crit, 0.4999999999));
    }

    #[test]
    fn conversion_constant_in_state_when_subset_is_everything() {
        let crit = hamming2(vec![true, true]);
        let conv = converted_distortion(&crit, 0.7, 2);
        for x in 0..2 {
            for xhat in 0..2 {
                assert_eq!(conv.value(x, xhat, 0), conv.value(x, xhat, 1));
                assert_eq!(conv.value(x, xhat, 0), crit.distortion(x, xhat));
            }
        }
    }

    #[test]
    fn conversion_all_delta_when_subset_empty() {
        let crit = hamming2(vec![false, false]);
        let conv = converted_distortion(&crit, 0.25, 2);
        for x in 0..2 {
            for xhat in 0..2 {
                for s in 0..2 {
                    assert_eq!(conv.value(x, xhat, s), 0.25);
                }
            }
        }
        // The block-average condition is always exactly tight.
        let t = Triple::new(vec![0, 1, 0], vec![0, 1, 1], vec![1, 0, 0]).unwrap();
        assert_eq!(converted_average(&t, &conv), 0.25);
        assert!(meets(&t, &crit, 0.25));
    }

    #[test]
    fn conversion_substitutes_level_outside_subset() {
        let crit = hamming2(vec![true, false]);
        let conv = converted_distortion(&crit, 0.25, 2);
        assert_eq!(conv.value(0, 1, 0), 1.0);
        assert_eq!(conv.value(0, 1, 1), 0.25);
    }

    #[test]
    fn combine_check_rejects_non_partition() {
        let crit = hamming2(vec![true, true]);
        let t = Triple::new(vec![0, 1], vec![0, 1], vec![0, 1]).unwrap();
        let err = combine_check(&t, &[vec![0], vec![0]], &[0.1, 0.1], &crit, 0.1).unwrap_err();
        assert!(matches!(err, FidelityError::NotAPartition(_)));
        let err = combine_check(&t, &[vec![0]], &[0.1], &crit, 0.1).unwrap_err();
        assert!(matches!(err, FidelityError::NotAPartition(_)));
    }

    #[test]
    fn combine_check_positive_direction() {
        let crit = hamming2(vec![true, true]);
        let t = Triple::new(vec![0, 1, 0, 1], vec![0, 1, 1, 0], vec![0, 1, 0, 0]).unwrap();
        let report = combine_check(
            &t,
            &[vec![0, 2], vec![1, 3]],
            &[0.5, 0.5],
            &crit,
            0.5,
        )
        .unwrap();
        assert_eq!(report.verdict, CombineVerdict::MergedMeets);
        assert!(report.merged_meets);
    }

    #[test]
    fn empty_subset_is_vacuously_met_for_all_classes() {
        let crit = hamming2(vec![false, false]);
        let t = Triple::new(vec![0, 1], vec![0, 1], vec![1, 0]).unwrap();
        let report = combine_check(&t, &[vec![0], vec![1]], &[0.0, 0.0], &crit, 0.0).unwrap();
        assert_eq!(report.verdict, CombineVerdict::MergedMeets);
        assert!(report.merged_meets);
    }
}
