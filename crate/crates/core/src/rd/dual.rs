//! Outer dual search over the constraint multipliers.
//!
//! Each multiplier is adjusted by bisection against its achieved distortion,
//! cycling over the coordinates until every constraint is either tight or
//! slack with a zero multiplier. The achieved distortion of a coordinate is
//! non-increasing in its own multiplier, which makes per-coordinate
//! bisection an exact coordinate-ascent step on the concave dual.

use std::collections::BTreeMap;

use super::ba::{BaOutcome, BaProblem};
use super::{RdError, RdPoint, TestChannel};
use crate::model::DistortionBudget;



/// Tolerances and caps for the solver stack.
#[derive(Debug, Clone)]
pub struct SolverOptions {
    /// Sup-norm tolerance on successive output marginals in the inner
    /// iteration.
    pub ba_tol: f64,
    /// Iteration cap for the inner solver.
    pub ba_max_iters: usize,
    /// Dual-value gap (nats) below which the inner iteration may also stop.
    pub ba_value_tol: f64,
    /// A constraint counts as tight when its achieved distortion is within
    /// this tolerance of the budget level.
    pub constraint_tol: f64,
    /// Multipliers beyond this are treated as a diverging dual.
    pub multiplier_cap: f64,
    /// Cap on full cycles over the multiplier coordinates.
    pub max_cycles: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            ba_tol: 1e-10,
            ba_max_iters: 50_000,
            ba_value_tol: 1e-9,
            constraint_tol: 1e-6,
            multiplier_cap: 1e6,
            max_cycles: 200,
        }
    }
}

/// A solved constrained-rate problem in positional (criteria-list) form.
#[derive(Debug, Clone)]
pub struct RawSolution {
    pub rate: f64,
    pub multipliers: Vec<f64>,
    pub distortions: Vec<f64>,
    pub channel: TestChannel,
    pub output_marginal: Vec<f64>,
}

impl RawSolution {
    pub fn into_point(self, budget: DistortionBudget, ids: &[String]) -> RdPoint {
        let multipliers: BTreeMap<String, f64> = ids
            .iter()
            .cloned()
            .zip(self.multipliers.iter().copied())
            .collect();
        let achieved: BTreeMap<String, f64> = ids
            .iter()
            .cloned()
            .zip(self.distortions.iter().copied())
            .collect();
        RdPoint {
            budget,
            rate: self.rate,
            channel: self.channel,
            multipliers,
            achieved_distortions: achieved,
        }
    }
}

struct DualState<'a> {
    px: &'a [f64],
    matrices: &'a [Vec<f64>],
    n_outputs: usize,
    mask: Option<&'a [bool]>,
    opts: &'a SolverOptions,
    s: Vec<f64>,
    outcome: BaOutcome,
}

impl<'a> DualState<'a> {
    fn new(
        px: &'a [f64],
        matrices: &'a [Vec<f64>],
        n_outputs: usize,
        mask: Option<&'a [bool]>,
        opts: &'a SolverOptions,
        s: Vec<f64>,
    ) -> Result<Self, RdError> {
        let outcome = BaProblem::new(px, matrices, n_outputs, mask, &s).solve(
            px,
            matrices,
            opts.ba_tol,
            opts.ba_value_tol,
            opts.ba_max_iters,
            None,
        )?;
        Ok(Self {
            px,
            matrices,
            n_outputs,
            mask,
            opts,
            s,
            outcome,
        })
    }

    fn set(&mut self, k: usize, value: f64) -> Result<(), RdError> {
        self.s[k] = value;
        self.outcome = BaProblem::new(self.px, self.matrices, self.n_outputs, self.mask, &self.s)
            .solve(
                self.px,
                self.matrices,
                self.opts.ba_tol,
                self.opts.ba_value_tol,
                self.opts.ba_max_iters,
                Some(&self.outcome.output_marginal),
            )?;
        if std::env::var_os("CTCRD_TRACE_DUAL").is_some() {
            eprintln!(
                "dual set s={:?} -> rate {:.6} dv {:?}",
                self.s, self.outcome.rate, self.outcome.distortions
            );
        }
        Ok(())
    }

    fn distortion(&self, k: usize) -> f64 {
        self.outcome.distortions[k]
    }
}

/// Finds the least rate meeting `E[d_k] <= budget[k]` for every matrix, with
/// complementary slackness: every strictly positive multiplier ends on a
/// tight constraint.
///
/// `mask`, when present, restricts each source symbol's admissible outputs;
/// the restriction is enforced structurally rather than through a diverging
/// multiplier.
#[allow(clippy::too_many_arguments)]
pub fn rate_for_budget(
    px: &[f64],
    matrices: &[Vec<f64>],
    n_outputs: usize,
    mask: Option<&[bool]>,
    budget: &[f64],
    ids: &[String],
    opts: &SolverOptions,
    warm_multipliers: Option<&[f64]>,
) -> Result<RawSolution, RdError> {
    assert_eq!(matrices.len(), budget.len());
    assert_eq!(matrices.len(), ids.len());
    let k_count = matrices.len();

    // Per-constraint lower bound: the row-wise minimum is achievable (by the
    // channel picking each row's best output), so any budget below it is
    // infeasible outright.
    let mut violating = Vec::new();
    for (k, m) in matrices.iter().enumerate() {
        let mut lb = 0.0;
        for (x, &p) in px.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            let mut best = f64::INFINITY;
            for j in 0..n_outputs {
                if mask.map_or(true, |mm| mm[x * n_outputs + j]) {
                    best = best.min(m[x * n_outputs + j]);
                }
            }
            lb += p * best;
        }
        if budget[k] < lb - 1e-12 * (1.0 + lb) {
            violating.push(ids[k].clone());
        }
    }
    if !violating.is_empty() {
        return Err(RdError::Infeasible { violating });
    }

    // Zero-rate shortcut: a constant reproduction feasible for every
    // constraint settles the problem. Ties broken by lowest output index.
    if mask.is_none() {
        'cols: for j in 0..n_outputs {
            let mut v = vec![0.0; k_count];
            for (k, m) in matrices.iter().enumerate() {
                for (x, &p) in px.iter().enumerate() {
                    v[k] += p * m[x * n_outputs + j];
                }
                if v[k] > budget[k] {
                    continue 'cols;
                }
            }
            let mut w = vec![0.0; px.len() * n_outputs];
            for x in 0..px.len() {
                w[x * n_outputs + j] = 1.0;
            }
            let mut marginal = vec![0.0; n_outputs];
            marginal[j] = 1.0;
            return Ok(RawSolution {
                rate: 0.0,
                multipliers: vec![0.0; k_count],
                distortions: v,
                channel: TestChannel::from_raw(px.len(), n_outputs, w),
                output_marginal: marginal,
            });
        }
    }

    let start = warm_multipliers
        .map(|w| {
            w.iter()
                .map(|&v| v.clamp(0.0, opts.multiplier_cap))
                .collect::<Vec<_>>()
        })
        .unwrap_or_else(|| vec![0.0; k_count]);
    let mut state = DualState::new(px, matrices, n_outputs, mask, opts, start)?;

    for cycle in 0..opts.max_cycles {
        // Coordinates are coupled: re-bisecting one to full tolerance
        // perturbs the others, so early cycles bracket coarsely and a joint
        // secant polish takes over once every coordinate is in its
        // neighborhood.
        let band = |target: f64| {
            if cycle < 2 {
                (0.02 * target.abs()).max(opts.constraint_tol)
            } else {
                opts.constraint_tol
            }
        };
        let mut adjusted = false;
        for k in 0..k_count {
            let target = budget[k];
            let dv = state.distortion(k);
            if dv > target + band(target) {
                raise_and_bisect(&mut state, k, target, band(target), opts, ids)?;
                adjusted = true;
            } else if state.s[k] > 0.0 && dv < target - band(target) {
                lower_and_bisect(&mut state, k, target, band(target), opts)?;
                adjusted = true;
            }
        }
        if !adjusted && cycle >= 2 {
            break;
        }
        if joint_polish(&mut state, budget, opts)? {
            break;
        }
    }

    for k in 0..k_count {
        let dv = state.distortion(k);
        let tight = (dv - budget[k]).abs() <= opts.constraint_tol;
        let slack = state.s[k] == 0.0 && dv <= budget[k] + opts.constraint_tol;
        if !tight && !slack {
            return Err(RdError::NonConvergence(format!(
                "constraint `{}` ended neither tight nor slack (achieved {dv}, budget {})",
                ids[k], budget[k]
            )));
        }
    }

    let outcome = state.outcome;
    Ok(RawSolution {
        rate: outcome.rate,
        multipliers: state.s,
        distortions: outcome.distortions,
        channel: outcome.channel,
        output_marginal: outcome.output_marginal,
    })
}

/// Grows `s[k]` until constraint `k` is met, then bisects to tightness.
fn raise_and_bisect(
    state: &mut DualState,
    k: usize,
    target: f64,
    band: f64,
    opts: &SolverOptions,
    ids: &[String],
) -> Result<(), RdError> {
    let mut lo = state.s[k];
    let mut hi = if state.s[k] > 0.0 { state.s[k] * 2.0 } else { 1.0 };
    loop {
        state.set(k, hi)?;
        if state.distortion(k) <= target {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi > opts.multiplier_cap {
            // The dual diverges: no channel can meet this budget jointly
            // with the others.
            return Err(RdError::Infeasible {
                violating: vec![ids[k].clone()],
            });
        }
    }
    bisect(state, k, lo, hi, target, band, opts)
}

/// Tries dropping `s[k]` to zero; if the constraint then overshoots, bisects
/// back to tightness.
fn lower_and_bisect(
    state: &mut DualState,
    k: usize,
    target: f64,
    band: f64,
    opts: &SolverOptions,
) -> Result<(), RdError> {
    let old = state.s[k];
    state.set(k, 0.0)?;
    if state.distortion(k) <= target + band {
        return Ok(());
    }
    bisect(state, k, 0.0, old, target, band, opts)
}

/// Joint secant polish of the positive multipliers against their targets.
/// Returns true when every constraint ends tight or slack within tolerance.
fn joint_polish(
    state: &mut DualState,
    budget: &[f64],
    opts: &SolverOptions,
) -> Result<bool, RdError> {
    let k_count = budget.len();
    for _attempt in 0..10 {
        let active: Vec<usize> = (0..k_count).filter(|&k| state.s[k] > 0.0).collect();
        let satisfied = (0..k_count).all(|k| {
            let dv = state.distortion(k);
            (dv - budget[k]).abs() <= opts.constraint_tol
                || (state.s[k] == 0.0 && dv <= budget[k] + opts.constraint_tol)
        });
        if satisfied {
            return Ok(true);
        }
        if active.is_empty() {
            return Ok(false);
        }
        // Any inactive coordinate violating its budget needs bracketing, not
        // polish.
        if (0..k_count).any(|k| {
            state.s[k] == 0.0 && state.distortion(k) > budget[k] + opts.constraint_tol
        }) {
            return Ok(false);
        }

        // Finite-difference Jacobian of the active distortions in the
        // active multipliers.
        let m = active.len();
        let base_s: Vec<f64> = active.iter().map(|&k| state.s[k]).collect();
        let base_dv: Vec<f64> = active.iter().map(|&k| state.distortion(k)).collect();
        let base_outcome = state.outcome.clone();
        let mut jac = vec![0.0; m * m];
        for (col, &k) in active.iter().enumerate() {
            let h = (1e-4 * base_s[col]).max(1e-8);
            state.set(k, base_s[col] + h)?;
            for (row, &kr) in active.iter().enumerate() {
                jac[row * m + col] = (state.distortion(kr) - base_dv[row]) / h;
            }
            state.s[k] = base_s[col];
        }
        state.outcome = base_outcome;

        let residual: Vec<f64> = active
            .iter()
            .zip(&base_dv)
            .map(|(&k, &dv)| dv - budget[k])
            .collect();
        let Some(step) = solve_linear(&jac, &residual, m) else {
            return Ok(false);
        };
        let mut new_s = state.s.clone();
        for (col, &k) in active.iter().enumerate() {
            let proposed = base_s[col] - step[col];
            if !proposed.is_finite() || proposed > opts.multiplier_cap {
                return Ok(false);
            }
            new_s[k] = proposed.max(0.0);
        }
        for (k, &v) in new_s.iter().enumerate() {
            if state.s[k] != v {
                state.set(k, v)?;
            }
        }
        let old_err = residual.iter().fold(0.0f64, |a, &r| a.max(r.abs()));
        let new_err = active
            .iter()
            .map(|&k| (state.distortion(k) - budget[k]).abs())
            .fold(0.0f64, f64::max);
        if !(new_err < 0.9 * old_err || new_err <= opts.constraint_tol) {
            return Ok(false);
        }
    }
    Ok(false)
}

/// Gaussian elimination with partial pivoting for the tiny polish systems.
fn solve_linear(matrix: &[f64], rhs: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = matrix.to_vec();
    let mut b = rhs.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| {
            a[i * n + col].abs().partial_cmp(&a[j * n + col].abs()).unwrap()
        })?;
        if a[pivot * n + col].abs() < 1e-14 {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(col * n + j, pivot * n + j);
            }
            b.swap(col, pivot);
        }
        for row in (col + 1)..n {
            let f = a[row * n + col] / a[col * n + col];
            for j in col..n {
                a[row * n + j] -= f * a[col * n + j];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for j in (col + 1)..n {
            acc -= a[col * n + j] * x[j];
        }
        x[col] = acc / a[col * n + col];
    }
    Some(x)
}

/// Bisects `s[k]` in `(lo, hi]` with `dv(lo) > target >= dv(hi)` until the
/// achieved distortion is within tolerance of the target.
///
/// The achieved distortion jumps across the target where the inner minimum
/// switches facets. A bracket collapsing onto zero is snapped there so the
/// coordinate reads as slack; a bracket collapsing at a positive kink is
/// resolved by time-sharing the two facet solutions, which are both optimal
/// for the kink's multiplier, mixed so the constraint lands exactly on its
/// target.
fn bisect(
    state: &mut DualState,
    k: usize,
    mut lo: f64,
    mut hi: f64,
    target: f64,
    band: f64,
    opts: &SolverOptions,
) -> Result<(), RdError> {
    let _ = opts;
    if (state.distortion(k) - target).abs() <= band {
        return Ok(());
    }
    for _ in 0..120 {
        let mid = 0.5 * (lo + hi);
        state.set(k, mid)?;
        let dv = state.distortion(k);
        if (dv - target).abs() <= band {
            return Ok(());
        }
        if dv > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi.max(1.0) {
            break;
        }
    }
    if hi <= MULTIPLIER_SNAP {
        if state.s[k] != 0.0 {
            state.set(k, 0.0)?;
        }
        return Ok(());
    }
    if state.s[k] != hi {
        state.set(k, hi)?;
    }
    let dv_hi = state.distortion(k);
    if (dv_hi - target).abs() <= band {
        return Ok(());
    }
    // Jump across the target: blend the facet solutions on both sides.
    let hi_outcome = state.outcome.clone();
    state.set(k, lo.max(MULTIPLIER_SNAP))?;
    let lo_outcome = state.outcome.clone();
    state.s[k] = hi;
    let dv_lo = lo_outcome.distortions[k];
    if dv_lo > target && dv_hi < target && dv_lo > dv_hi {
        let theta = (target - dv_hi) / (dv_lo - dv_hi);
        state.outcome = mix_outcomes(state.px, state.matrices, theta, &lo_outcome, &hi_outcome);
    } else {
        state.outcome = hi_outcome;
    }
    Ok(())
}

/// Multipliers below this are indistinguishable from zero.
const MULTIPLIER_SNAP: f64 = 1e-9;

/// Convex combination of two solutions: `theta` parts of `lo`, the rest of
/// `hi`, with the rate and distortions recomputed from the mixed channel.
fn mix_outcomes(
    px: &[f64],
    matrices: &[Vec<f64>],
    theta: f64,
    lo: &BaOutcome,
    hi: &BaOutcome,
) -> BaOutcome {
    let rows = lo.channel.rows();
    let cols = lo.channel.cols();
    let mut w = vec![0.0; rows * cols];
    for x in 0..rows {
        for j in 0..cols {
            w[x * cols + j] = theta * lo.channel.prob(x, j) + (1.0 - theta) * hi.channel.prob(x, j);
        }
    }
    let channel = TestChannel::from_raw(rows, cols, w);
    let rate = crate::rd::mutual_information(px, &channel);
    let mut distortions = vec![0.0; matrices.len()];
    for (k, m) in matrices.iter().enumerate() {
        for (x, &p) in px.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            for j in 0..cols {
                distortions[k] += p * channel.prob(x, j) * m[x * cols + j];
            }
        }
    }
    let output_marginal = channel.output_marginal(px);
    BaOutcome {
        rate,
        distortions,
        channel,
        output_marginal,
        iterations: lo.iterations + hi.iterations,
    }
}

/// The classical constrained rate of a plain source: the least I(X; Xhat)
/// with a single distortion constraint `E[d] <= delta`.
pub fn classical_rd(
    px: &[f64],
    distortion: &[f64],
    n_outputs: usize,
    delta: f64,
    opts: &SolverOptions,
) -> Result<f64, RdError> {
    let sol = rate_for_budget(
        px,
        std::slice::from_ref(&distortion.to_vec()),
        n_outputs,
        None,
        &[delta],
        &["d".to_string()],
        opts,
        None,
    )?;
    Ok(sol.rate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rd::binary_entropy;

    fn hamming(n: usize) -> Vec<f64> {
        let mut d = vec![1.0; n * n];
        for i in 0..n {
            d[i * n + i] = 0.0;
        }
        d
    }

    fn solve_single(px: &[f64], d: Vec<f64>, n: usize, delta: f64) -> RawSolution {
        rate_for_budget(
            px,
            &[d],
            n,
            None,
            &[delta],
            &["0".to_string()],
            &SolverOptions::default(),
            None,
        )
        .unwrap()
    }

    #[test]
    fn loose_budget_gives_zero_rate_constant_channel() {
        let sol = solve_single(&[0.4, 0.6], hamming(2), 2, 1.0);
        assert_eq!(sol.rate, 0.0);
        // Lowest feasible output index wins.
        assert_eq!(sol.channel.prob(0, 0), 1.0);
        assert_eq!(sol.channel.prob(1, 0), 1.0);
        assert!(sol.distortions[0] <= 1.0);
    }

    #[test]
    fn binary_rd_matches_closed_form() {
        let sol = solve_single(&[0.4, 0.6], hamming(2), 2, 0.25);
        let expected = binary_entropy(0.4) - binary_entropy(0.25);
        assert!((sol.rate - expected).abs() < 1e-3, "rate {}", sol.rate);
        assert!((sol.distortions[0] - 0.25).abs() < 2e-6);
        assert!(sol.multipliers[0] > 0.0);
    }

    #[test]
    fn zero_budget_forces_lossless_rate() {
        let sol = solve_single(&[0.25; 4], hamming(4), 4, 0.0);
        assert!((sol.rate - 2.0).abs() < 1e-3);
    }

    #[test]
    fn infeasible_budget_is_detected_per_criterion() {
        // Minimum achievable distortion is 0.3: symbol 0 cannot do better
        // than 0.6 anywhere.
        let d = vec![0.6, 0.8, 0.0, 0.0];
        let err =
            rate_for_budget(
                &[0.5, 0.5],
                &[d],
                2,
                None,
                &[0.1],
                &["tight".to_string()],
                &SolverOptions::default(),
                None,
            )
            .unwrap_err();
        match err {
            RdError::Infeasible { violating } => assert_eq!(violating, vec!["tight".to_string()]),
            other => panic!("expected infeasibility, got {other:?}"),
        }
    }

    #[test]
    fn classical_rd_lossless_point_is_source_entropy() {
        let rate = classical_rd(
            &[0.4, 0.6],
            &hamming(2),
            2,
            0.0,
            &SolverOptions::default(),
        )
        .unwrap();
        assert!((rate - binary_entropy(0.4)).abs() < 1e-3);
    }

    #[test]
    fn two_constraints_settle_with_complementary_slackness() {
        // Two reweighted Hamming-like matrices pulling differently.
        let d0 = vec![0.0, 0.5, 4.0 / 3.0, 0.0];
        let d1 = vec![0.0, 1.5, 2.0 / 3.0, 0.0];
        let sol = rate_for_budget(
            &[0.4, 0.6],
            &[d0, d1],
            2,
            None,
            &[0.25, 0.25],
            &["0".to_string(), "1".to_string()],
            &SolverOptions::default(),
            None,
        )
        .unwrap();
        for k in 0..2 {
            let tight = (sol.distortions[k] - 0.25).abs() <= 1e-6;
            let slack = sol.multipliers[k] == 0.0 && sol.distortions[k] <= 0.25 + 1e-6;
            assert!(tight || slack, "constraint {k} neither tight nor slack");
        }
        assert!(sol.rate > 0.0);
    }
}
