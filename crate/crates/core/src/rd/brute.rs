//! Exhaustive grid oracle for tiny instances.
//!
//! Enumerates every row-stochastic 2x2 channel on a uniform grid and returns
//! the least mutual information among the grid channels meeting all active
//! constraints. The result upper-bounds the true constrained rate and
//! converges to it as the grid step shrinks, which makes it an independent
//! check on the dual solver.

use super::RdError;
use crate::model::{
    active_criteria, modified_distortion, CompositeSource, DistortionBudget, FidelityCriterion,
};

/// Brute-force value of the constrained rate over a channel grid with the
/// given step. Only binary symbol and reproduction alphabets are accepted.
pub fn optimal_rate_bruteforce(
    source: &CompositeSource,
    criteria: &[FidelityCriterion],
    budget: &DistortionBudget,
    grid_step: f64,
) -> Result<f64, RdError> {
    if source.n_symbols() > 2 || source.n_reproductions() > 2 {
        return Err(RdError::AlphabetTooLarge {
            symbols: source.n_symbols(),
            reproductions: source.n_reproductions(),
        });
    }
    assert!(grid_step > 0.0 && grid_step <= 1.0);
    let act = active_criteria(source, criteria);
    let px = source.symbol_marginal();
    let mut matrices = Vec::with_capacity(act.len());
    let mut levels = Vec::with_capacity(act.len());
    for &k in &act {
        matrices.push(modified_distortion(source, &criteria[k])?);
        levels.push(budget.resolve(criteria)?[k]);
    }

    let steps = (1.0 / grid_step).round() as usize;
    let grid: Vec<f64> = (0..=steps)
        .map(|i| (i as f64 * grid_step).min(1.0))
        .collect();

    // Degenerate single-symbol or single-output cases collapse to a 1-D scan.
    let two_in = source.n_symbols() == 2;
    let two_out = source.n_reproductions() == 2;

    let mut best = f64::INFINITY;
    let a_choices: &[f64] = if two_out { &grid } else { &[0.0] };
    for &a in a_choices {
        let b_choices: &[f64] = if two_in && two_out { &grid } else { &[0.0] };
        for &b in b_choices {
            // Row 0: (1-a, a); row 1: (b, 1-b).
            let feasible = matrices.iter().zip(&levels).all(|(m, &lvl)| {
                let mut e = px[0] * ((1.0 - a) * m[0] + a * m[1]);
                if two_in {
                    e += px[1] * (b * m[2] + (1.0 - b) * m[3]);
                }
                e <= lvl
            });
            if !feasible {
                continue;
            }
            let info = grid_mutual_information(&px, a, b, two_in);
            if info < best {
                best = info;
            }
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(RdError::InfeasibleOnGrid)
    }
}

fn grid_mutual_information(px: &[f64], a: f64, b: f64, two_in: bool) -> f64 {
    let p0 = px[0];
    let p1 = if two_in { px[1] } else { 0.0 };
    let q0 = p0 * (1.0 - a) + p1 * b;
    let q1 = p0 * a + p1 * (1.0 - b);
    let mut info = 0.0;
    let mut add = |p: f64, w: f64, q: f64| {
        if p > 0.0 && w > 0.0 && q > 0.0 {
            info += p * w * (w / q).log2();
        }
    };
    add(p0, 1.0 - a, q0);
    add(p0, a, q1);
    add(p1, b, q0);
    add(p1, 1.0 - b, q1);
    info.max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DistortionBudget;
    use crate::rd::binary_entropy;

    fn pair_instance() -> (CompositeSource, Vec<FidelityCriterion>) {
        let source = CompositeSource::new(
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into()],
            vec![0.1, 0.4, 0.3, 0.2],
        )
        .unwrap();
        let hamming = vec![0.0, 1.0, 1.0, 0.0];
        let criteria = vec![
            FidelityCriterion::new("0".into(), vec![true, false], hamming.clone(), 2, 2).unwrap(),
            FidelityCriterion::new("1".into(), vec![false, true], hamming, 2, 2).unwrap(),
        ];
        (source, criteria)
    }

    #[test]
    fn saturated_budget_reaches_zero_rate() {
        let (source, criteria) = pair_instance();
        let budget = DistortionBudget::from_pairs(&[("0", 1.0), ("1", 1.0)]).unwrap();
        let rate = optimal_rate_bruteforce(&source, &criteria, &budget, 0.01).unwrap();
        assert_eq!(rate, 0.0);
    }

    #[test]
    fn zero_budget_returns_marginal_entropy() {
        let (source, criteria) = pair_instance();
        let budget = DistortionBudget::from_pairs(&[("0", 0.0), ("1", 0.0)]).unwrap();
        let rate = optimal_rate_bruteforce(&source, &criteria, &budget, 0.01).unwrap();
        assert!((rate - binary_entropy(0.4)).abs() < 1e-12);
    }

    #[test]
    fn oversized_alphabets_are_rejected() {
        let source = CompositeSource::new(
            vec!["0".into()],
            vec!["0".into(), "1".into(), "2".into()],
            vec!["0".into(), "1".into(), "2".into()],
            vec![0.5, 0.25, 0.25],
        )
        .unwrap();
        let err = optimal_rate_bruteforce(
            &source,
            &[],
            &DistortionBudget::from_pairs(&[]).unwrap(),
            0.1,
        )
        .unwrap_err();
        assert!(matches!(err, RdError::AlphabetTooLarge { .. }));
    }
}
