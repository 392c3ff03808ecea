//! Rate-distortion comparisons for classify-then-compress coding.
//!
//! Three quantities are computed for a source/classifier pair under a
//! distortion budget:
//!
//! * the unconstrained-coding rate (the plain constrained RD value of the
//!   source, [`crate::rd::optimal_rate`]),
//! * the label-conditional rate: the least rate of codes whose decoder and
//!   encoder both see the class labels, obtained by optimally allocating
//!   per-class distortion levels and weighting per-class RD values, and
//! * the CTC rate: label-conditional rate plus the label entropy, which is
//!   what a code pays when it must embed the labels losslessly. An
//!   independent evaluation over an augmented reproduction alphabet
//!   cross-checks it.
//!
//! The allocation program is solved by coordinate descent over per-class
//! levels: within each criterion's budget constraint, mass is exchanged
//! between class pairs with golden-section refinement. Per-class values are
//! convex in the levels, so exchanges improve monotonically; the search is
//! additionally seeded from the allocation induced by the unconstrained
//! solution's channel, which is always feasible and already evaluates below
//! the unconstrained rate.

use std::cell::RefCell;
use std::collections::HashMap;

use rayon::prelude::*;

use crate::model::{
    active_criteria, active_labels, class_conditional, label_entropy, modified_distortion,
    Classifier, CompositeSource, DistortionBudget, FidelityCriterion, ModelError,
};
use crate::rd::{
    classical_rd, optimal_rate, rate_for_budget, RdError, RdPoint, SolverOptions,
};

/// Per-criterion, per-class distortion levels.
#[derive(Debug, Clone)]
pub struct DistortionAllocation {
    criteria_ids: Vec<String>,
    labels: Vec<String>,
    /// Row-major criteria x labels.
    table: Vec<f64>,
}

impl DistortionAllocation {
    pub fn criteria_ids(&self) -> &[String] {
        &self.criteria_ids
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn level(&self, criterion: usize, label: usize) -> f64 {
        self.table[criterion * self.labels.len() + label]
    }

    /// The level column for one class, in criteria order.
    pub fn class_levels(&self, label: usize) -> Vec<f64> {
        (0..self.criteria_ids.len())
            .map(|k| self.level(k, label))
            .collect()
    }
}

/// One evaluated budget in a sweep.
#[derive(Debug, Clone)]
pub struct GapPoint {
    /// Budget levels in criteria order.
    pub levels: Vec<f64>,
    pub rate_optimal: f64,
    pub rate_ctc: f64,
    pub rate_labels_given: f64,
    pub gap_ctc: f64,
    pub gap_labels_given: f64,
    pub status: String,
}

/// Sweep results over a budget grid.
#[derive(Debug, Clone)]
pub struct GapReport {
    pub criteria_ids: Vec<String>,
    pub points: Vec<GapPoint>,
}

impl GapReport {
    /// CSV with one row per grid point. Floats carry 17 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for id in &self.criteria_ids {
            out.push_str(&format!("D_{id},"));
        }
        out.push_str("R_star,R_C,R_G,gap_C,gap_G,status\n");
        for p in &self.points {
            for v in &p.levels {
                out.push_str(&format_float(*v));
                out.push(',');
            }
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                format_float(p.rate_optimal),
                format_float(p.rate_ctc),
                format_float(p.rate_labels_given),
                format_float(p.gap_ctc),
                format_float(p.gap_labels_given),
                p.status
            ));
        }
        out
    }
}

/// Full-precision float formatting shared by the CSV writers.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// One per-class constrained-rate subproblem, with memoized evaluations and
/// warm-started multipliers.
struct ClassProblem {
    weight: f64,
    px: Vec<f64>,
    n_outputs: usize,
    /// Positions (into the active-criteria list) that carry positive
    /// probability within this class.
    active: Vec<usize>,
    matrices: Vec<Vec<f64>>,
    ids: Vec<String>,
    /// Row-wise minimum achievable distortion per active criterion.
    lower_bounds: Vec<f64>,
    warm: RefCell<Option<Vec<f64>>>,
    cache: RefCell<HashMap<Vec<u64>, f64>>,
}

impl ClassProblem {
    /// Value of this class's constrained rate at the given level column
    /// (indexed like the active-criteria list).
    fn rate(&self, column: &[f64], opts: &SolverOptions) -> Result<f64, RdError> {
        let levels: Vec<f64> = self
            .active
            .iter()
            .zip(&self.lower_bounds)
            .map(|(&k, &lb)| column[k].max(lb))
            .collect();
        let key: Vec<u64> = levels.iter().map(|v| v.to_bits()).collect();
        if let Some(&v) = self.cache.borrow().get(&key) {
            return Ok(v);
        }
        let warm = self.warm.borrow().clone();
        let sol = rate_for_budget(
            &self.px,
            &self.matrices,
            self.n_outputs,
            None,
            &levels,
            &self.ids,
            opts,
            warm.as_deref(),
        )?;
        *self.warm.borrow_mut() = Some(sol.multipliers.clone());
        self.cache.borrow_mut().insert(key, sol.rate);
        Ok(sol.rate)
    }
}

struct AllocationProgram<'a> {
    opts: &'a SolverOptions,
    /// Active criteria indices into the caller's criteria list.
    act_criteria: Vec<usize>,
    /// Active label indices.
    act_labels: Vec<usize>,
    /// a[l][m] = P(S in subset_l, c(X) = u_m), over active indices.
    mass: Vec<Vec<f64>>,
    /// b[l] = P(S in subset_l) * D(l).
    rhs: Vec<f64>,
    classes: Vec<ClassProblem>,
}

impl<'a> AllocationProgram<'a> {
    fn objective(&self, table: &[Vec<f64>]) -> Result<f64, RdError> {
        let mut total = 0.0;
        for (m, class) in self.classes.iter().enumerate() {
            let column: Vec<f64> = (0..self.act_criteria.len()).map(|l| table[l][m]).collect();
            total += class.weight * class.rate(&column, self.opts)?;
        }
        Ok(total)
    }
}

/// The label-conditional rate: the least achievable rate when both coder
/// ends observe the class labels. Returns the rate together with the
/// distortion allocation achieving it.
pub fn label_based_rate(
    source: &CompositeSource,
    classifier: &Classifier,
    criteria: &[FidelityCriterion],
    budget: &DistortionBudget,
    alloc_resolution: f64,
    opts: &SolverOptions,
) -> Result<(f64, DistortionAllocation), RdError> {
    label_based_rate_with_reference(source, classifier, criteria, budget, alloc_resolution, opts, None)
}

/// [`label_based_rate`] seeded from an already-solved unconstrained point,
/// whose channel induces a feasible allocation. Sweeps pass the point they
/// computed anyway; otherwise it is solved internally.
#[allow(clippy::too_many_arguments)]
pub fn label_based_rate_with_reference(
    source: &CompositeSource,
    classifier: &Classifier,
    criteria: &[FidelityCriterion],
    budget: &DistortionBudget,
    alloc_resolution: f64,
    opts: &SolverOptions,
    reference: Option<&RdPoint>,
) -> Result<(f64, DistortionAllocation), RdError> {
    assert!(alloc_resolution > 0.0);
    let act_criteria = active_criteria(source, criteria);
    let act_labels = active_labels(source, classifier);
    let levels = budget.resolve(criteria)?;

    let full_allocation = |working: &[Vec<f64>]| {
        build_full_allocation(source, classifier, criteria, &act_criteria, &act_labels, working)
    };

    if act_criteria.is_empty() {
        let working: Vec<Vec<f64>> = Vec::new();
        return Ok((0.0, full_allocation(&working)));
    }

    // Joint class/subset masses and per-criterion right-hand sides.
    let label_marginal = classifier.label_marginal(source);
    let mut mass = vec![vec![0.0; act_labels.len()]; act_criteria.len()];
    let mut rhs = vec![0.0; act_criteria.len()];
    for (l, &k) in act_criteria.iter().enumerate() {
        let subset = criteria[k].state_subset();
        for (m, &u) in act_labels.iter().enumerate() {
            let mut p = 0.0;
            for s in 0..source.n_states() {
                if subset[s] {
                    for x in 0..source.n_symbols() {
                        if classifier.label_of(x) == u {
                            p += source.joint(s, x);
                        }
                    }
                }
            }
            mass[l][m] = p;
        }
        rhs[l] = source.state_subset_probability(subset) * levels[k];
    }

    // Per-class subproblems on the class-conditional laws.
    let mut classes = Vec::with_capacity(act_labels.len());
    for (m, &u) in act_labels.iter().enumerate() {
        let conditional = class_conditional(source, classifier, u)?;
        let px = conditional.symbol_marginal();
        let mut active = Vec::new();
        let mut matrices = Vec::new();
        let mut ids = Vec::new();
        let mut lower_bounds = Vec::new();
        for (l, &k) in act_criteria.iter().enumerate() {
            if mass[l][m] > 0.0 {
                let matrix = modified_distortion(&conditional, &criteria[k])?;
                let mut lb = 0.0;
                for (x, &p) in px.iter().enumerate() {
                    if p > 0.0 {
                        let row = &matrix
                            [x * source.n_reproductions()..(x + 1) * source.n_reproductions()];
                        lb += p * row.iter().copied().fold(f64::INFINITY, f64::min);
                    }
                }
                active.push(l);
                matrices.push(matrix);
                ids.push(criteria[k].id().to_string());
                lower_bounds.push(lb);
            }
        }
        classes.push(ClassProblem {
            weight: label_marginal[u],
            px,
            n_outputs: source.n_reproductions(),
            active,
            matrices,
            ids,
            lower_bounds,
            warm: RefCell::new(None),
            cache: RefCell::new(HashMap::new()),
        });
    }

    let program = AllocationProgram {
        opts,
        act_criteria: act_criteria.clone(),
        act_labels: act_labels.clone(),
        mass,
        rhs,
        classes,
    };

    // Proportional start: every class gets the full level of each criterion,
    // which consumes each budget exactly.
    let mut table = vec![vec![0.0; program.act_labels.len()]; program.act_criteria.len()];
    for (l, &k) in program.act_criteria.iter().enumerate() {
        for m in 0..program.act_labels.len() {
            table[l][m] = levels[k];
        }
    }
    repair_feasibility(&program, &mut table, criteria)?;

    // Candidate start induced by the reference channel: conditional per-class
    // distortions of an unconstrained-optimal channel are feasible and
    // already evaluate at or below the unconstrained rate.
    let reference_point;
    let reference = match reference {
        Some(p) => Some(p),
        None => match optimal_rate(source, criteria, budget, opts) {
            Ok(p) => {
                reference_point = p;
                Some(&reference_point)
            }
            Err(_) => None,
        },
    };
    if let Some(point) = reference {
        if let Some(candidate) = allocation_from_channel(source, classifier, criteria, &program, point)
        {
            let mut cand = candidate;
            if repair_feasibility(&program, &mut cand, criteria).is_ok()
                && program.objective(&cand)? < program.objective(&table)?
            {
                table = cand;
            }
        }
    }

    let mut value = program.objective(&table)?;
    let improvement_floor = 1e-10;
    for _sweep in 0..60 {
        let mut improved = false;
        for l in 0..program.act_criteria.len() {
            let participants: Vec<usize> = (0..program.act_labels.len())
                .filter(|&m| program.mass[l][m] > 0.0)
                .collect();
            for i in 0..participants.len() {
                for j in (i + 1)..participants.len() {
                    let (m1, m2) = (participants[i], participants[j]);
                    if let Some(new_value) = exchange(
                        &program,
                        &mut table,
                        l,
                        m1,
                        m2,
                        value,
                        alloc_resolution,
                    )? {
                        if new_value < value - improvement_floor {
                            improved = true;
                        }
                        value = value.min(new_value);
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }

    enforce_constraints_exactly(&program, &mut table);
    let value = program.objective(&table)?;
    Ok((value, full_allocation(&table)))
}

/// Golden-section over the budget-preserving exchange between two classes on
/// one criterion. Returns the improved objective when a move was applied.
fn exchange(
    program: &AllocationProgram,
    table: &mut [Vec<f64>],
    l: usize,
    m1: usize,
    m2: usize,
    current: f64,
    alloc_resolution: f64,
) -> Result<Option<f64>, RdError> {
    let a1 = program.mass[l][m1];
    let a2 = program.mass[l][m2];
    let share = a1 * table[l][m1] + a2 * table[l][m2];
    let lb1 = class_lower_bound(program, l, m1);
    let lb2 = class_lower_bound(program, l, m2);
    let t_lo = lb1;
    let t_hi = ((share - a2 * lb2) / a1).max(lb1);
    if t_hi - t_lo <= 0.0 {
        return Ok(None);
    }

    let eval = |t: f64, table: &mut [Vec<f64>]| -> Result<f64, RdError> {
        table[l][m1] = t;
        table[l][m2] = ((share - a1 * t) / a2).max(lb2);
        program.objective(table)
    };

    let original = (table[l][m1], table[l][m2]);
    let tol = (alloc_resolution * (t_hi - t_lo)).max(f64::EPSILON * t_hi.max(1.0));
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut lo = t_lo;
    let mut hi = t_hi;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = eval(x1, table)?;
    let mut f2 = eval(x2, table)?;
    let mut best = (original.0, current);
    if f1 < best.1 {
        best = (x1, f1);
    }
    if f2 < best.1 {
        best = (x2, f2);
    }
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = eval(x1, table)?;
            if f1 < best.1 {
                best = (x1, f1);
            }
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = eval(x2, table)?;
            if f2 < best.1 {
                best = (x2, f2);
            }
        }
    }

    if best.1 < current {
        let value = eval(best.0, table)?;
        Ok(Some(value))
    } else {
        table[l][m1] = original.0;
        table[l][m2] = original.1;
        Ok(None)
    }
}

fn class_lower_bound(program: &AllocationProgram, l: usize, m: usize) -> f64 {
    let class = &program.classes[m];
    class
        .active
        .iter()
        .position(|&al| al == l)
        .map(|pos| class.lower_bounds[pos])
        .unwrap_or(0.0)
}

/// Raises levels to their per-class minima and rescales the remaining slack
/// so every budget row holds. Fails when the minima alone exceed a budget.
fn repair_feasibility(
    program: &AllocationProgram,
    table: &mut [Vec<f64>],
    criteria: &[FidelityCriterion],
) -> Result<(), RdError> {
    for l in 0..program.act_criteria.len() {
        let b = program.rhs[l];
        let lbs: Vec<f64> = (0..program.act_labels.len())
            .map(|m| class_lower_bound(program, l, m))
            .collect();
        let floor: f64 = (0..program.act_labels.len())
            .map(|m| program.mass[l][m] * lbs[m])
            .sum();
        if floor > b + 1e-12 * (1.0 + b) {
            return Err(RdError::Infeasible {
                violating: vec![criteria[program.act_criteria[l]].id().to_string()],
            });
        }
        let spread: f64 = (0..program.act_labels.len())
            .map(|m| program.mass[l][m] * (table[l][m] - lbs[m]).max(0.0))
            .sum();
        let theta = if spread > 0.0 {
            ((b - floor) / spread).min(1.0)
        } else {
            0.0
        };
        for m in 0..program.act_labels.len() {
            let extra = (table[l][m] - lbs[m]).max(0.0);
            table[l][m] = lbs[m] + theta * extra;
        }
    }
    enforce_constraints_exactly(program, table);
    Ok(())
}

/// Shaves rounding overshoot so each budget row holds as a true float
/// inequality.
fn enforce_constraints_exactly(program: &AllocationProgram, table: &mut [Vec<f64>]) {
    for l in 0..program.act_criteria.len() {
        let b = program.rhs[l];
        for _ in 0..4 {
            let used: f64 = (0..program.act_labels.len())
                .map(|m| program.mass[l][m] * table[l][m])
                .sum();
            if used <= b {
                break;
            }
            let factor = if used > 0.0 { b / used } else { 0.0 };
            for m in 0..program.act_labels.len() {
                table[l][m] *= factor;
            }
        }
    }
}

/// The allocation induced by a channel: per-class conditional expected
/// distortion given the state subset, the quantity the weighted per-class
/// rates are measured against.
fn allocation_from_channel(
    source: &CompositeSource,
    classifier: &Classifier,
    criteria: &[FidelityCriterion],
    program: &AllocationProgram,
    point: &RdPoint,
) -> Option<Vec<Vec<f64>>> {
    let channel = &point.channel;
    if channel.rows() != source.n_symbols() || channel.cols() != source.n_reproductions() {
        return None;
    }
    let mut table = vec![vec![0.0; program.act_labels.len()]; program.act_criteria.len()];
    for (l, &k) in program.act_criteria.iter().enumerate() {
        let crit = &criteria[k];
        let subset = crit.state_subset();
        for (m, &u) in program.act_labels.iter().enumerate() {
            if program.mass[l][m] <= 0.0 {
                continue;
            }
            let mut num = 0.0;
            for s in 0..source.n_states() {
                if !subset[s] {
                    continue;
                }
                for x in 0..source.n_symbols() {
                    if classifier.label_of(x) != u {
                        continue;
                    }
                    let p = source.joint(s, x);
                    if p <= 0.0 {
                        continue;
                    }
                    for xhat in 0..source.n_reproductions() {
                        num += p * channel.prob(x, xhat) * crit.distortion(x, xhat);
                    }
                }
            }
            table[l][m] = num / program.mass[l][m];
        }
    }
    Some(table)
}

/// Expands a working table over active indices into the full criteria x
/// labels allocation, applying the conventions for inactive entries:
/// zero-probability classes get zero, and entries whose joint mass vanishes
/// get the criterion's largest distortion entry.
fn build_full_allocation(
    source: &CompositeSource,
    classifier: &Classifier,
    criteria: &[FidelityCriterion],
    act_criteria: &[usize],
    act_labels: &[usize],
    working: &[Vec<f64>],
) -> DistortionAllocation {
    let n_labels = classifier.n_labels();
    let label_marginal = classifier.label_marginal(source);
    let mut table = vec![0.0; criteria.len() * n_labels];
    for (k, crit) in criteria.iter().enumerate() {
        for u in 0..n_labels {
            let entry = &mut table[k * n_labels + u];
            if label_marginal[u] <= 0.0 {
                *entry = 0.0;
                continue;
            }
            let l = act_criteria.iter().position(|&ak| ak == k);
            let m = act_labels.iter().position(|&au| au == u);
            match (l, m) {
                (Some(l), Some(m)) => {
                    let mut joint_mass = 0.0;
                    for s in 0..source.n_states() {
                        if crit.state_subset()[s] {
                            for x in 0..source.n_symbols() {
                                if classifier.label_of(x) == u {
                                    joint_mass += source.joint(s, x);
                                }
                            }
                        }
                    }
                    *entry = if joint_mass > 0.0 {
                        working[l][m]
                    } else {
                        crit.max_entry()
                    };
                }
                _ => {
                    // Inactive criterion for an active class: no constraint,
                    // keep the search space closed at the largest entry.
                    *entry = crit.max_entry();
                }
            }
        }
    }
    DistortionAllocation {
        criteria_ids: criteria.iter().map(|c| c.id().to_string()).collect(),
        labels: classifier.labels().to_vec(),
        table,
    }
}

/// The CTC rate: label-conditional rate plus the entropy of the labels.
pub fn ctc_rate(
    source: &CompositeSource,
    classifier: &Classifier,
    criteria: &[FidelityCriterion],
    budget: &DistortionBudget,
    alloc_resolution: f64,
    opts: &SolverOptions,
) -> Result<f64, RdError> {
    let (given, _) = label_based_rate(source, classifier, criteria, budget, alloc_resolution, opts)?;
    Ok(given + label_entropy(source, classifier))
}

/// The CTC rate evaluated independently: the constrained rate of the source
/// over the augmented reproduction alphabet (reproduction, label), with the
/// channel support restricted to pairs carrying the correct label. The
/// restriction enforces exact label recovery structurally.
pub fn ctc_rate_augmented(
    source: &CompositeSource,
    classifier: &Classifier,
    criteria: &[FidelityCriterion],
    budget: &DistortionBudget,
    opts: &SolverOptions,
) -> Result<f64, RdError> {
    let act = active_criteria(source, criteria);
    let px = source.symbol_marginal();
    let levels = budget.resolve(criteria)?;
    let n_rep = source.n_reproductions();
    let n_labels = classifier.n_labels();
    let n_aug = n_rep * n_labels;

    let mut matrices = Vec::with_capacity(act.len());
    let mut budget_vec = Vec::with_capacity(act.len());
    let mut ids = Vec::with_capacity(act.len());
    for &k in &act {
        let dhat = modified_distortion(source, &criteria[k])?;
        let mut aug = vec![0.0; source.n_symbols() * n_aug];
        for x in 0..source.n_symbols() {
            for xhat in 0..n_rep {
                for u in 0..n_labels {
                    aug[x * n_aug + xhat * n_labels + u] = dhat[x * n_rep + xhat];
                }
            }
        }
        matrices.push(aug);
        budget_vec.push(levels[k]);
        ids.push(criteria[k].id().to_string());
    }

    let mut mask = vec![false; source.n_symbols() * n_aug];
    for x in 0..source.n_symbols() {
        let u = classifier.label_of(x);
        for xhat in 0..n_rep {
            mask[x * n_aug + xhat * n_labels + u] = true;
        }
    }

    let sol = rate_for_budget(
        &px,
        &matrices,
        n_aug,
        Some(&mask),
        &budget_vec,
        &ids,
        opts,
        None,
    )?;
    Ok(sol.rate)
}

/// Closed-form label-conditional rate under perfect classification: the
/// state-subset events must coincide with the label events almost surely,
/// in which case the rate is the subset-probability-weighted sum of the
/// per-subset classical RD values.
pub fn label_based_rate_perfect(
    source: &CompositeSource,
    criteria: &[FidelityCriterion],
    budget: &DistortionBudget,
    opts: &SolverOptions,
) -> Result<f64, RdError> {
    let levels = budget.resolve(criteria)?;

    // The implied classifier labels each symbol by its most likely subset.
    let implied: Vec<usize> = (0..source.n_symbols())
        .map(|x| {
            let mut best = 0;
            let mut best_mass = f64::NEG_INFINITY;
            for (k, crit) in criteria.iter().enumerate() {
                let mut mass = 0.0;
                for s in 0..source.n_states() {
                    if crit.state_subset()[s] {
                        mass += source.joint(s, x);
                    }
                }
                if mass > best_mass {
                    best_mass = mass;
                    best = k;
                }
            }
            best
        })
        .collect();

    for (k, crit) in criteria.iter().enumerate() {
        let mut mismatch = 0.0;
        for s in 0..source.n_states() {
            for x in 0..source.n_symbols() {
                let in_subset = crit.state_subset()[s];
                let labeled = implied[x] == k;
                if in_subset != labeled {
                    mismatch += source.joint(s, x);
                }
            }
        }
        if mismatch >= 1e-12 {
            return Err(RdError::NotPerfectClassification {
                id: crit.id().to_string(),
                mismatch,
            });
        }
    }

    let mut total = 0.0;
    for (k, crit) in criteria.iter().enumerate() {
        let weight = source.state_subset_probability(crit.state_subset());
        if weight <= 0.0 {
            continue;
        }
        // Conditional symbol law given the subset.
        let joint = source.subset_symbol_joint(crit.state_subset());
        let q: Vec<f64> = joint.iter().map(|&p| p / weight).collect();
        let rate = classical_rd(
            &q,
            crit.distortion_row_major(),
            source.n_reproductions(),
            levels[k],
            opts,
        )?;
        total += weight * rate;
    }
    Ok(total)
}

/// Evaluates the three rates over a budget grid. Per-point failures are
/// recorded in the point status rather than aborting the sweep.
pub fn gap_sweep(
    source: &CompositeSource,
    classifier: &Classifier,
    criteria: &[FidelityCriterion],
    budgets: &[DistortionBudget],
    alloc_resolution: f64,
    opts: &SolverOptions,
) -> Result<GapReport, ModelError> {
    for budget in budgets {
        budget.resolve(criteria)?;
    }
    let entropy = label_entropy(source, classifier);
    let points: Vec<GapPoint> = budgets
        .par_iter()
        .map(|budget| {
            let levels = budget.resolve(criteria).unwrap_or_default();
            match evaluate_point(source, classifier, criteria, budget, alloc_resolution, opts, entropy)
            {
                Ok(mut p) => {
                    p.levels = levels;
                    p
                }
                Err(e) => GapPoint {
                    levels,
                    rate_optimal: f64::NAN,
                    rate_ctc: f64::NAN,
                    rate_labels_given: f64::NAN,
                    gap_ctc: f64::NAN,
                    gap_labels_given: f64::NAN,
                    status: status_of(&e),
                },
            }
        })
        .collect();
    Ok(GapReport {
        criteria_ids: criteria.iter().map(|c| c.id().to_string()).collect(),
        points,
    })
}

fn evaluate_point(
    source: &CompositeSource,
    classifier: &Classifier,
    criteria: &[FidelityCriterion],
    budget: &DistortionBudget,
    alloc_resolution: f64,
    opts: &SolverOptions,
    entropy: f64,
) -> Result<GapPoint, RdError> {
    let point = optimal_rate(source, criteria, budget, opts)?;
    let (given, _) = label_based_rate_with_reference(
        source,
        classifier,
        criteria,
        budget,
        alloc_resolution,
        opts,
        Some(&point),
    )?;
    let ctc = given + entropy;
    Ok(GapPoint {
        levels: Vec::new(),
        rate_optimal: point.rate,
        rate_ctc: ctc,
        rate_labels_given: given,
        gap_ctc: ctc - point.rate,
        gap_labels_given: point.rate - given,
        status: "ok".to_string(),
    })
}

fn status_of(e: &RdError) -> String {
    match e {
        RdError::Infeasible { .. } => "infeasible".to_string(),
        RdError::NonConvergence(_) => "nonconvergence".to_string(),
        other => format!("error: {other}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DistortionBudget;
    use crate::rd::binary_entropy;

    /// Uniform quaternary source with S = X and paired classes.
    fn perfect_instance() -> (CompositeSource, Classifier, Vec<FidelityCriterion>) {
        let names: Vec<String> = (0..4).map(|i| i.to_string()).collect();
        let mut joint = vec![0.0; 16];
        for i in 0..4 {
            joint[i * 4 + i] = 0.25;
        }
        let source =
            CompositeSource::new(names.clone(), names.clone(), names.clone(), joint).unwrap();
        let assignment: std::collections::BTreeMap<String, String> = [
            ("0", "0"),
            ("1", "0"),
            ("2", "1"),
            ("3", "1"),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        let classifier = Classifier::new(&names, &assignment).unwrap();
        let mut hamming = vec![1.0; 16];
        for i in 0..4 {
            hamming[i * 4 + i] = 0.0;
        }
        let criteria = vec![
            FidelityCriterion::new(
                "0".into(),
                vec![true, true, false, false],
                hamming.clone(),
                4,
                4,
            )
            .unwrap(),
            FidelityCriterion::new(
                "1".into(),
                vec![false, false, true, true],
                hamming,
                4,
                4,
            )
            .unwrap(),
        ];
        (source, classifier, criteria)
    }

    #[test]
    fn perfect_classification_matches_binary_closed_form() {
        let (source, classifier, criteria) = perfect_instance();
        let opts = SolverOptions::default();
        for d in [0.1, 0.25, 0.4] {
            let budget = DistortionBudget::uniform(&criteria, d).unwrap();
            let expected = 1.0 - binary_entropy(d);
            let (rg, alloc) =
                label_based_rate(&source, &classifier, &criteria, &budget, 1e-3, &opts).unwrap();
            assert!((rg - expected).abs() < 1e-3, "rg {rg} vs {expected} at {d}");
            let closed =
                label_based_rate_perfect(&source, &criteria, &budget, &opts).unwrap();
            assert!((closed - expected).abs() < 1e-3);
            // The achieving allocation respects each budget row.
            for (k, crit) in criteria.iter().enumerate() {
                let mut used = 0.0;
                for u in 0..classifier.n_labels() {
                    let mut mass = 0.0;
                    for s in 0..source.n_states() {
                        if crit.state_subset()[s] {
                            for x in 0..source.n_symbols() {
                                if classifier.label_of(x) == u {
                                    mass += source.joint(s, x);
                                }
                            }
                        }
                    }
                    used += mass * alloc.level(k, u);
                }
                let bound = source.state_subset_probability(crit.state_subset()) * d;
                assert!(used <= bound, "allocation overshoots row {k}");
            }
        }
    }

    #[test]
    fn single_class_collapses_all_three_rates() {
        let (source, _, criteria) = perfect_instance();
        let classifier = Classifier::single_class(4);
        let opts = SolverOptions::default();
        let budget = DistortionBudget::uniform(&criteria, 0.2).unwrap();
        let star = optimal_rate(&source, &criteria, &budget, &opts).unwrap().rate;
        let (rg, _) =
            label_based_rate(&source, &classifier, &criteria, &budget, 1e-3, &opts).unwrap();
        let rc = ctc_rate(&source, &classifier, &criteria, &budget, 1e-3, &opts).unwrap();
        let rc_aug =
            ctc_rate_augmented(&source, &classifier, &criteria, &budget, &opts).unwrap();
        assert!((rg - star).abs() < 1e-3);
        assert!((rc - star).abs() < 1e-3);
        assert!((rc_aug - star).abs() < 1e-3);
    }

    #[test]
    fn saturated_budgets_leave_only_the_label_entropy() {
        let (source, classifier, criteria) = perfect_instance();
        let opts = SolverOptions::default();
        let budget = DistortionBudget::uniform(&criteria, 1.0).unwrap();
        let (rg, _) =
            label_based_rate(&source, &classifier, &criteria, &budget, 1e-3, &opts).unwrap();
        assert!(rg.abs() < 1e-9);
        let rc = ctc_rate(&source, &classifier, &criteria, &budget, 1e-3, &opts).unwrap();
        assert!((rc - 1.0).abs() < 1e-9);
        let rc_aug =
            ctc_rate_augmented(&source, &classifier, &criteria, &budget, &opts).unwrap();
        assert!((rc_aug - 1.0).abs() < 1e-3);
    }

    #[test]
    fn zero_budget_pins_both_formulations_at_two_bits() {
        let (source, classifier, criteria) = perfect_instance();
        let opts = SolverOptions::default();
        let budget = DistortionBudget::uniform(&criteria, 0.0).unwrap();
        let (rg, _) =
            label_based_rate(&source, &classifier, &criteria, &budget, 1e-3, &opts).unwrap();
        assert!((rg - 1.0).abs() < 1e-3);
        let rc = ctc_rate(&source, &classifier, &criteria, &budget, 1e-3, &opts).unwrap();
        assert!((rc - 2.0).abs() < 1e-3);
        let rc_aug =
            ctc_rate_augmented(&source, &classifier, &criteria, &budget, &opts).unwrap();
        assert!((rc_aug - rc).abs() < 1e-3);
        let star = optimal_rate(&source, &criteria, &budget, &opts).unwrap().rate;
        assert!((star - 2.0).abs() < 1e-3);
    }

    #[test]
    fn perfect_closed_form_rejects_imperfect_classification() {
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
        let budget = DistortionBudget::uniform(&criteria, 0.2).unwrap();
        let err = label_based_rate_perfect(&source, &criteria, &budget, &SolverOptions::default())
            .unwrap_err();
        assert!(matches!(err, RdError::NotPerfectClassification { .. }));
    }
}
