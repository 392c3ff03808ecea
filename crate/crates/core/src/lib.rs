//! Rate-distortion analysis and codec simulation for finite memoryless
//! composite sources under per-subsource fidelity criteria.
//!
//! A composite source emits state/symbol pairs; each fidelity criterion
//! bounds the average distortion of the symbols whose state falls in a
//! designated subset. The crate computes three constrained rates — the
//! optimal variable-length coding rate, the classify-then-compress rate and
//! the label-conditional rate — and builds the codes that realize the CTC
//! rate operationally: a prefix-free integer representation, a lossless
//! label coder, per-class quantizers and the assemblies that tie them
//! together. A Monte-Carlo simulator measures the assembled codes against
//! the computed curves.

pub mod codec;
pub mod ctc;
pub mod fidelity;
pub mod model;
pub mod presets;
pub mod rd;

pub use ctc::{
    ctc_rate, ctc_rate_augmented, format_float, gap_sweep, label_based_rate,
    label_based_rate_perfect, label_based_rate_with_reference, DistortionAllocation, GapPoint,
    GapReport,
};
pub use model::{
    active_criteria, active_labels, class_conditional, label_entropy, modified_distortion,
    validate_document, validate_source, Classifier, CompositeSource, CriterionDocument,
    DistortionBudget, FidelityCriterion, ModelError, SourceDocument, ValidatedSource,
};
pub use rd::{
    ba_fixed_multipliers, binary_entropy, classical_rd, entropy, mutual_information, optimal_rate,
    optimal_rate_bruteforce, optimal_rate_warm, rate_for_budget, RdError, RdPoint, SolverOptions,
    TestChannel,
};
