//! Source model: finite composite sources, classifiers, fidelity criteria
//! and distortion budgets.
//!
//! A composite source emits state/symbol pairs `(S, X)` drawn i.i.d. from a
//! joint pmf over finite alphabets. A fidelity criterion constrains the
//! average distortion of the symbols whose state falls in a designated state
//! subset. All downstream solvers consume the derived quantities computed
//! here: class-conditional laws, label entropy and the reweighted distortion
//! matrices that reduce the constrained problem to a classical one.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance accepted on the raw input pmf before rejection.
pub const INPUT_PMF_TOLERANCE: f64 = 1e-9;
/// Tolerance guaranteed after internal renormalization.
pub const NORMALIZED_PMF_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("joint pmf sums to {sum}, deviating from 1 by more than {INPUT_PMF_TOLERANCE}")]
    NonStochastic { sum: f64 },
    #[error("negative entry {value} at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("alphabet `{name}` is empty")]
    EmptyAlphabet { name: &'static str },
    #[error("{context}: expected {expected} entries, got {got}")]
    ShapeMismatch {
        context: String,
        expected: usize,
        got: usize,
    },
    #[error("unknown name `{name}` in {context}")]
    UnknownName { context: String, name: String },
    #[error("duplicate name `{name}` in alphabet `{context}`")]
    DuplicateName { context: String, name: String },
    #[error("classifier does not assign a label to symbol `{symbol}`")]
    MissingLabel { symbol: String },
    #[error("distortion entry {value} at row {row}, column {col} is not a finite nonnegative real")]
    InvalidDistortion { row: usize, col: usize, value: f64 },
    #[error("class `{label}` has probability zero")]
    ZeroProbabilityClass { label: String },
    #[error("criterion `{id}` is inactive: its state subset has probability zero")]
    InactiveCriterion { id: String },
    #[error("budget is missing a level for criterion `{id}`")]
    MissingBudgetLevel { id: String },
    #[error("budget level {value} for criterion `{id}` is negative")]
    NegativeBudgetLevel { id: String, value: f64 },
    #[error("document parse error: {0}")]
    Parse(String),
}

/// A memoryless composite source over finite ordered alphabets.
///
/// `joint` is the pmf of a state/symbol pair, stored row-major with one row
/// per state. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSource {
    states: Vec<String>,
    symbols: Vec<String>,
    reproductions: Vec<String>,
    joint: Vec<f64>,
}

impl CompositeSource {
    /// Builds a source from alphabets and a row-major joint pmf, enforcing
    /// the stochasticity invariants. Probabilities off by at most
    /// [`INPUT_PMF_TOLERANCE`] are renormalized; larger deviations are
    /// rejected.
    pub fn new(
        states: Vec<String>,
        symbols: Vec<String>,
        reproductions: Vec<String>,
        joint: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if states.is_empty() {
            return Err(ModelError::EmptyAlphabet { name: "states" });
        }
        if symbols.is_empty() {
            return Err(ModelError::EmptyAlphabet { name: "symbols" });
        }
        if reproductions.is_empty() {
            return Err(ModelError::EmptyAlphabet {
                name: "reproductions",
            });
        }
        check_unique(&states, "states")?;
        check_unique(&symbols, "symbols")?;
        check_unique(&reproductions, "reproductions")?;
        if joint.len() != states.len() * symbols.len() {
            return Err(ModelError::ShapeMismatch {
                context: "joint_pmf".to_string(),
                expected: states.len() * symbols.len(),
                got: joint.len(),
            });
        }
        for (i, &p) in joint.iter().enumerate() {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(ModelError::NegativeEntry {
                    row: i / symbols.len(),
                    col: i % symbols.len(),
                    value: p,
                });
            }
        }
        let sum: f64 = compensated_sum(joint.iter().copied());
        if (sum - 1.0).abs() > INPUT_PMF_TOLERANCE {
            return Err(ModelError::NonStochastic { sum });
        }
        let joint = joint.into_iter().map(|p| p / sum).collect();
        Ok(Self {
            states,
            symbols,
            reproductions,
            joint,
        })
    }

    pub fn n_states(&self) -> usize {
        self.states.len()
    }

    pub fn n_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn n_reproductions(&self) -> usize {
        self.reproductions.len()
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn reproductions(&self) -> &[String] {
        &self.reproductions
    }

    /// P(S = s, X = x), indexed by position.
    pub fn joint(&self, s: usize, x: usize) -> f64 {
        self.joint[s * self.symbols.len() + x]
    }

    pub fn joint_row_major(&self) -> &[f64] {
        &self.joint
    }

    /// Marginal pmf of the symbol X.
    pub fn symbol_marginal(&self) -> Vec<f64> {
        let mut px = vec![0.0; self.symbols.len()];
        for s in 0..self.states.len() {
            for (x, p) in px.iter_mut().enumerate() {
                *p += self.joint(s, x);
            }
        }
        px
    }

    /// Marginal pmf of the state S.
    pub fn state_marginal(&self) -> Vec<f64> {
        (0..self.states.len())
            .map(|s| (0..self.symbols.len()).map(|x| self.joint(s, x)).sum())
            .collect()
    }

    /// P(S in subset).
    pub fn state_subset_probability(&self, subset: &[bool]) -> f64 {
        let sm = self.state_marginal();
        sm.iter()
            .zip(subset)
            .filter(|(_, &inside)| inside)
            .map(|(&p, _)| p)
            .sum()
    }

    /// P(S in subset, X = x) for every x.
    pub fn subset_symbol_joint(&self, subset: &[bool]) -> Vec<f64> {
        let mut out = vec![0.0; self.symbols.len()];
        for s in 0..self.states.len() {
            if subset[s] {
                for (x, o) in out.iter_mut().enumerate() {
                    *o += self.joint(s, x);
                }
            }
        }
        out
    }

    /// Replaces the joint pmf, keeping alphabets. Used to build conditional
    /// laws; the replacement must already be normalized.
    fn with_joint(&self, joint: Vec<f64>) -> Self {
        Self {
            states: self.states.clone(),
            symbols: self.symbols.clone(),
            reproductions: self.reproductions.clone(),
            joint,
        }
    }
}

/// A total map from symbols to class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Classifier {
    labels: Vec<String>,
    map: Vec<usize>,
}

impl Classifier {
    /// Builds a classifier from per-symbol label names. The label alphabet
    /// is ordered by first appearance.
    pub fn new(symbols: &[String], assignment: &BTreeMap<String, String>) -> Result<Self, ModelError> {
        let mut labels: Vec<String> = Vec::new();
        let mut map = Vec::with_capacity(symbols.len());
        for sym in symbols {
            let label = assignment
                .get(sym)
                .ok_or_else(|| ModelError::MissingLabel { symbol: sym.clone() })?;
            let idx = match labels.iter().position(|l| l == label) {
                Some(i) => i,
                None => {
                    labels.push(label.clone());
                    labels.len() - 1
                }
            };
            map.push(idx);
        }
        Ok(Self { labels, map })
    }

    /// Classifier with a single label covering every symbol.
    pub fn single_class(n_symbols: usize) -> Self {
        Self {
            labels: vec!["all".to_string()],
            map: vec![0; n_symbols],
        }
    }

    /// Identity classifier: one label per symbol, named after the symbols.
    pub fn identity(symbols: &[String]) -> Self {
        Self {
            labels: symbols.to_vec(),
            map: (0..symbols.len()).collect(),
        }
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }

    /// Number of symbols the map covers.
    pub fn symbol_count(&self) -> usize {
        self.map.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Label index assigned to symbol index `x`.
    pub fn label_of(&self, x: usize) -> usize {
        self.map[x]
    }

    /// P(c(X) = u) for every label u.
    pub fn label_marginal(&self, source: &CompositeSource) -> Vec<f64> {
        let px = source.symbol_marginal();
        let mut out = vec![0.0; self.labels.len()];
        for (x, &p) in px.iter().enumerate() {
            out[self.map[x]] += p;
        }
        out
    }
}

/// One subsource-dependent fidelity criterion: a distortion matrix together
/// with the state subset it constrains.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelityCriterion {
    id: String,
    state_subset: Vec<bool>,
    distortion: Vec<f64>,
    n_symbols: usize,
    n_reproductions: usize,
}

impl FidelityCriterion {
    pub fn new(
        id: String,
        state_subset: Vec<bool>,
        distortion: Vec<f64>,
        n_symbols: usize,
        n_reproductions: usize,
    ) -> Result<Self, ModelError> {
        if distortion.len() != n_symbols * n_reproductions {
            return Err(ModelError::ShapeMismatch {
                context: format!("distortion matrix of criterion `{id}`"),
                expected: n_symbols * n_reproductions,
                got: distortion.len(),
            });
        }
        for (i, &d) in distortion.iter().enumerate() {
            if !d.is_finite() || d < 0.0 {
                return Err(ModelError::InvalidDistortion {
                    row: i / n_reproductions,
                    col: i % n_reproductions,
                    value: d,
                });
            }
        }
        Ok(Self {
            id,
            state_subset,
            distortion,
            n_symbols,
            n_reproductions,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn state_subset(&self) -> &[bool] {
        &self.state_subset
    }

    /// d(x, xhat), indexed by position.
    pub fn distortion(&self, x: usize, xhat: usize) -> f64 {
        self.distortion[x * self.n_reproductions + xhat]
    }

    pub fn distortion_row_major(&self) -> &[f64] {
        &self.distortion
    }

    pub fn max_entry(&self) -> f64 {
        self.distortion.iter().copied().fold(0.0, f64::max)
    }

    pub fn n_symbols(&self) -> usize {
        self.n_symbols
    }

    pub fn n_reproductions(&self) -> usize {
        self.n_reproductions
    }
}

/// Per-criterion distortion levels, keyed by criterion id.
#[derive(Debug, Clone, PartialEq)]
pub struct DistortionBudget {
    levels: BTreeMap<String, f64>,
}

impl DistortionBudget {
    pub fn new(levels: BTreeMap<String, f64>) -> Result<Self, ModelError> {
        for (id, &v) in &levels {
            if !v.is_finite() || v < 0.0 {
                return Err(ModelError::NegativeBudgetLevel {
                    id: id.clone(),
                    value: v,
                });
            }
        }
        Ok(Self { levels })
    }

    pub fn from_pairs(pairs: &[(&str, f64)]) -> Result<Self, ModelError> {
        Self::new(
            pairs
                .iter()
                .map(|(k, v)| (k.to_string(), *v))
                .collect::<BTreeMap<_, _>>(),
        )
    }

    /// Uniform budget assigning the same level to every criterion.
    pub fn uniform(criteria: &[FidelityCriterion], level: f64) -> Result<Self, ModelError> {
        Self::new(
            criteria
                .iter()
                .map(|c| (c.id().to_string(), level))
                .collect(),
        )
    }

    pub fn level(&self, id: &str) -> Option<f64> {
        self.levels.get(id).copied()
    }

    pub fn levels(&self) -> &BTreeMap<String, f64> {
        &self.levels
    }

    /// Aligns the budget with a criteria family, erroring if any criterion
    /// lacks a level.
    pub fn resolve(&self, criteria: &[FidelityCriterion]) -> Result<Vec<f64>, ModelError> {
        criteria
            .iter()
            .map(|c| {
                self.levels
                    .get(c.id())
                    .copied()
                    .ok_or_else(|| ModelError::MissingBudgetLevel { id: c.id().to_string() })
            })
            .collect()
    }
}

/// Indices of the criteria whose state subsets have strictly positive
/// probability. Criteria outside this set carry no constraint.
pub fn active_criteria(source: &CompositeSource, criteria: &[FidelityCriterion]) -> Vec<usize> {
    criteria
        .iter()
        .enumerate()
        .filter(|(_, c)| source.state_subset_probability(c.state_subset()) > 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Indices of the labels with strictly positive probability.
pub fn active_labels(source: &CompositeSource, classifier: &Classifier) -> Vec<usize> {
    classifier
        .label_marginal(source)
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(i, _)| i)
        .collect()
}

/// Conditional law of (S, X) given c(X) = u, returned as a composite source
/// over the same alphabets.
///
/// The result is supported exactly on the pairs whose symbol carries label
/// `u` and sums to one.
pub fn class_conditional(
    source: &CompositeSource,
    classifier: &Classifier,
    u: usize,
) -> Result<CompositeSource, ModelError> {
    let mass = classifier.label_marginal(source)[u];
    if mass <= 0.0 {
        return Err(ModelError::ZeroProbabilityClass {
            label: classifier.labels()[u].clone(),
        });
    }
    let mut joint = vec![0.0; source.n_states() * source.n_symbols()];
    for s in 0..source.n_states() {
        for x in 0..source.n_symbols() {
            if classifier.label_of(x) == u {
                joint[s * source.n_symbols() + x] = source.joint(s, x) / mass;
            }
        }
    }
    Ok(source.with_joint(joint))
}

/// Entropy of the class label c(X), in bits.
pub fn label_entropy(source: &CompositeSource, classifier: &Classifier) -> f64 {
    classifier
        .label_marginal(source)
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Reweights a criterion's distortion matrix by the state-subset posterior,
/// so that the subset-conditional expected distortion of any channel equals
/// the plain expectation of the returned matrix:
///
/// `dhat(x, xhat) = P(S in subset | X = x) / P(S in subset) * d(x, xhat)`.
///
/// Rows with P(X = x) = 0 are returned as zero; they never contribute.
pub fn modified_distortion(
    source: &CompositeSource,
    criterion: &FidelityCriterion,
) -> Result<Vec<f64>, ModelError> {
    let subset_prob = source.state_subset_probability(criterion.state_subset());
    if subset_prob <= 0.0 {
        return Err(ModelError::InactiveCriterion {
            id: criterion.id().to_string(),
        });
    }
    let px = source.symbol_marginal();
    let subset_joint = source.subset_symbol_joint(criterion.state_subset());
    let nr = criterion.n_reproductions();
    let mut out = vec![0.0; criterion.n_symbols() * nr];
    for x in 0..criterion.n_symbols() {
        if px[x] <= 0.0 {
            continue;
        }
        let weight = subset_joint[x] / px[x] / subset_prob;
        for xhat in 0..nr {
            out[x * nr + xhat] = weight * criterion.distortion(x, xhat);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Document parsing
// ---------------------------------------------------------------------------

/// The JSON document describing a source, as published in the repo docs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceDocument {
    pub states: Vec<String>,
    pub symbols: Vec<String>,
    pub reproductions: Vec<String>,
    /// Row-major states x symbols.
    pub joint_pmf: Vec<Vec<f64>>,
    /// Map symbol name -> label name.
    pub classifier: BTreeMap<String, String>,
    pub criteria: Vec<CriterionDocument>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CriterionDocument {
    pub id: String,
    pub state_subset: Vec<String>,
    /// Row-major symbols x reproductions.
    pub distortion: Vec<Vec<f64>>,
}

/// A fully validated model: the source together with its classifier and
/// fidelity-criteria family.
#[derive(Debug, Clone)]
pub struct ValidatedSource {
    pub source: CompositeSource,
    pub classifier: Classifier,
    pub criteria: Vec<FidelityCriterion>,
}

/// Parses and validates a JSON source document.
pub fn validate_source(raw: &str) -> Result<ValidatedSource, ModelError> {
    let doc: SourceDocument =
        serde_json::from_str(raw).map_err(|e| ModelError::Parse(e.to_string()))?;
    validate_document(&doc)
}

/// Validates an already-parsed source document.
pub fn validate_document(doc: &SourceDocument) -> Result<ValidatedSource, ModelError> {
    if doc.joint_pmf.len() != doc.states.len() {
        return Err(ModelError::ShapeMismatch {
            context: "joint_pmf rows".to_string(),
            expected: doc.states.len(),
            got: doc.joint_pmf.len(),
        });
    }
    let mut joint = Vec::with_capacity(doc.states.len() * doc.symbols.len());
    for row in &doc.joint_pmf {
        if row.len() != doc.symbols.len() {
            return Err(ModelError::ShapeMismatch {
                context: "joint_pmf row".to_string(),
                expected: doc.symbols.len(),
                got: row.len(),
            });
        }
        joint.extend_from_slice(row);
    }
    let source = CompositeSource::new(
        doc.states.clone(),
        doc.symbols.clone(),
        doc.reproductions.clone(),
        joint,
    )?;
    let classifier = Classifier::new(&doc.symbols, &doc.classifier)?;
    let mut criteria = Vec::with_capacity(doc.criteria.len());
    for c in &doc.criteria {
        let mut subset = vec![false; doc.states.len()];
        for name in &c.state_subset {
            let idx = doc.states.iter().position(|s| s == name).ok_or_else(|| {
                ModelError::UnknownName {
                    context: format!("state_subset of criterion `{}`", c.id),
                    name: name.clone(),
                }
            })?;
            subset[idx] = true;
        }
        if c.distortion.len() != doc.symbols.len() {
            return Err(ModelError::ShapeMismatch {
                context: format!("distortion rows of criterion `{}`", c.id),
                expected: doc.symbols.len(),
                got: c.distortion.len(),
            });
        }
        let mut dist = Vec::with_capacity(doc.symbols.len() * doc.reproductions.len());
        for row in &c.distortion {
            if row.len() != doc.reproductions.len() {
                return Err(ModelError::ShapeMismatch {
                    context: format!("distortion row of criterion `{}`", c.id),
                    expected: doc.reproductions.len(),
                    got: row.len(),
                });
            }
            dist.extend_from_slice(row);
        }
        criteria.push(FidelityCriterion::new(
            c.id.clone(),
            subset,
            dist,
            doc.symbols.len(),
            doc.reproductions.len(),
        )?);
    }
    Ok(ValidatedSource {
        source,
        classifier,
        criteria,
    })
}

fn check_unique(names: &[String], context: &str) -> Result<(), ModelError> {
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(ModelError::DuplicateName {
                context: context.to_string(),
                name: n.clone(),
            });
        }
    }
    Ok(())
}

/// Neumaier compensated summation.
pub(crate) fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_pair_source() -> CompositeSource {
        // 2x2 joint with dependent state and symbol.
        CompositeSource::new(
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into()],
            vec![0.1, 0.4, 0.3, 0.2],
        )
        .unwrap()
    }

    fn hamming(n: usize) -> Vec<f64> {
        let mut d = vec![1.0; n * n];
        for i in 0..n {
            d[i * n + i] = 0.0;
        }
        d
    }

    #[test]
    fn accepts_example_pair_matrix() {
        let s = example_pair_source();
        assert_eq!(s.n_states(), 2);
        let px = s.symbol_marginal();
        assert!((px[0] - 0.4).abs() < 1e-15);
        assert!((px[1] - 0.6).abs() < 1e-15);
    }

    #[test]
    fn rejects_non_stochastic_matrix() {
        let err = CompositeSource::new(
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into()],
            vec!["0".into()],
            vec![0.1, 0.4, 0.3, 0.1],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::NonStochastic { .. }));
    }

    #[test]
    fn rejects_negative_entry() {
        let err = CompositeSource::new(
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into()],
            vec!["0".into()],
            vec![0.6, 0.5, -0.1, 0.0],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::NegativeEntry { .. }));
    }

    #[test]
    fn renormalizes_tiny_deviation() {
        let s = CompositeSource::new(
            vec!["0".into()],
            vec!["0".into(), "1".into()],
            vec!["0".into()],
            vec![0.5 + 3e-10, 0.5],
        )
        .unwrap();
        let total: f64 = s.joint_row_major().iter().sum();
        assert!((total - 1.0).abs() <= NORMALIZED_PMF_TOLERANCE);
    }

    #[test]
    fn class_conditional_on_uniform_quaternary() {
        // S = X uniform over four values, labels pair them up.
        let mut joint = vec![0.0; 16];
        for i in 0..4 {
            joint[i * 4 + i] = 0.25;
        }
        let names: Vec<String> = (0..4).map(|i| i.to_string()).collect();
        let source =
            CompositeSource::new(names.clone(), names.clone(), names.clone(), joint).unwrap();
        let assignment: BTreeMap<String, String> = [
            ("0", "a"),
            ("1", "a"),
            ("2", "b"),
            ("3", "b"),
        ]
        .iter()
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
        let classifier = Classifier::new(&names, &assignment).unwrap();

        let cond = class_conditional(&source, &classifier, 0).unwrap();
        assert!((cond.joint(0, 0) - 0.5).abs() < 1e-15);
        assert!((cond.joint(1, 1) - 0.5).abs() < 1e-15);
        let total: f64 = cond.joint_row_major().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        for s in 0..4 {
            for x in 2..4 {
                assert_eq!(cond.joint(s, x), 0.0);
            }
        }

        assert!((label_entropy(&source, &classifier) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn single_class_conditional_is_identity_and_entropy_zero() {
        let s = example_pair_source();
        let c = Classifier::single_class(2);
        let cond = class_conditional(&s, &c, 0).unwrap();
        assert_eq!(cond.joint_row_major(), s.joint_row_major());
        assert_eq!(label_entropy(&s, &c), 0.0);
    }

    #[test]
    fn zero_probability_class_is_rejected() {
        let s = CompositeSource::new(
            vec!["0".into()],
            vec!["0".into(), "1".into()],
            vec!["0".into()],
            vec![1.0, 0.0],
        )
        .unwrap();
        let assignment: BTreeMap<String, String> =
            [("0", "a"), ("1", "b")].iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        let c = Classifier::new(&[
            "0".to_string(),
            "1".to_string(),
        ], &assignment)
        .unwrap();
        let err = class_conditional(&s, &c, 1).unwrap_err();
        assert!(matches!(err, ModelError::ZeroProbabilityClass { .. }));
    }

    #[test]
    fn modified_distortion_matches_hand_computed_posterior_weights() {
        // P(S=0) = 0.5, P(S=0|X=0) = 0.25, P(S=0|X=1) = 2/3.
        let s = example_pair_source();
        let crit = FidelityCriterion::new(
            "0".into(),
            vec![true, false],
            hamming(2),
            2,
            2,
        )
        .unwrap();
        let dhat = modified_distortion(&s, &crit).unwrap();
        assert!((dhat[0] - 0.0).abs() < 1e-15);
        assert!((dhat[1] - 0.5).abs() < 1e-15);
        assert!((dhat[2] - 4.0 / 3.0).abs() < 1e-15);
        assert!((dhat[3] - 0.0).abs() < 1e-15);
    }

    #[test]
    fn modified_distortion_is_unchanged_when_state_independent() {
        let s = CompositeSource::new(
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into()],
            vec![0.2 * 0.3, 0.2 * 0.7, 0.8 * 0.3, 0.8 * 0.7],
        )
        .unwrap();
        let crit =
            FidelityCriterion::new("0".into(), vec![true, false], hamming(2), 2, 2).unwrap();
        let dhat = modified_distortion(&s, &crit).unwrap();
        for (a, b) in dhat.iter().zip(hamming(2)) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn inactive_criterion_is_rejected() {
        let s = example_pair_source();
        let crit =
            FidelityCriterion::new("dead".into(), vec![false, false], hamming(2), 2, 2).unwrap();
        assert!(matches!(
            modified_distortion(&s, &crit),
            Err(ModelError::InactiveCriterion { .. })
        ));
    }

    #[test]
    fn document_roundtrip_via_json() {
        let raw = r#"{
            "states": ["0", "1"],
            "symbols": ["0", "1"],
            "reproductions": ["0", "1"],
            "joint_pmf": [[0.1, 0.4], [0.3, 0.2]],
            "classifier": {"0": "0", "1": "1"},
            "criteria": [
                {"id": "0", "state_subset": ["0"], "distortion": [[0.0, 1.0], [1.0, 0.0]]},
                {"id": "1", "state_subset": ["1"], "distortion": [[0.0, 1.0], [1.0, 0.0]]}
            ]
        }"#;
        let v = validate_source(raw).unwrap();
        assert_eq!(v.criteria.len(), 2);
        assert_eq!(v.classifier.n_labels(), 2);
        assert_eq!(active_criteria(&v.source, &v.criteria), vec![0, 1]);
    }
}
