//! Monte-Carlo measurement of a code's operational rate and fidelity.
//!
//! Each trial draws an i.i.d. state/symbol block from the source, encodes
//! and decodes it, and evaluates every fidelity criterion at its budget
//! level plus each configured slack. Trials are independent and seeded from
//! (seed, trial index), so runs are reproducible and may execute in
//! parallel.

use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::ctc::format_float;
use crate::fidelity::{subset_average, Triple};
use crate::model::{CompositeSource, DistortionBudget, FidelityCriterion, ModelError};

use super::assemble::CtcCode;
use super::vlc::VariableLengthCode;
use super::CodecError;

/// The code being measured.
pub enum CodeUnderTest<'a> {
    VariableLength(&'a dyn VariableLengthCode),
    Ctc(&'a CtcCode),
}

#[derive(Debug, Clone)]
pub struct SimulationParams {
    /// Symbols per trial.
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Slack values at which fidelity frequencies are reported.
    pub eps: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub trial: usize,
    pub n: usize,
    /// Bits per source symbol (zero-length trials report zero).
    pub rate: f64,
    /// Average in-subset distortion per criterion.
    pub distortions: Vec<f64>,
    /// met[criterion][eps index].
    pub met: Vec<Vec<bool>>,
    /// Symbols per class, when the code carries a classifier.
    pub class_counts: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SimulationReport {
    pub criteria_ids: Vec<String>,
    pub eps: Vec<f64>,
    pub trials: Vec<TrialRecord>,
}

impl SimulationReport {
    pub fn mean_rate(&self) -> f64 {
        if self.trials.is_empty() {
            return 0.0;
        }
        self.trials.iter().map(|t| t.rate).sum::<f64>() / self.trials.len() as f64
    }

    pub fn max_rate(&self) -> f64 {
        self.trials.iter().map(|t| t.rate).fold(0.0, f64::max)
    }

    /// Fraction of trials meeting criterion `k` at slack index `e`.
    pub fn met_frequency(&self, k: usize, e: usize) -> f64 {
        if self.trials.is_empty() {
            return 1.0;
        }
        self.trials.iter().filter(|t| t.met[k][e]).count() as f64 / self.trials.len() as f64
    }

    /// CSV with one row per trial.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trial,n,rate");
        for id in &self.criteria_ids {
            out.push_str(&format!(",distortion_{id}"));
        }
        for id in &self.criteria_ids {
            for e in &self.eps {
                out.push_str(&format!(",met_{id}_{e}"));
            }
        }
        out.push('\n');
        for t in &self.trials {
            out.push_str(&format!("{},{},{}", t.trial, t.n, format_float(t.rate)));
            for d in &t.distortions {
                out.push(',');
                out.push_str(&format_float(*d));
            }
            for met_k in &t.met {
                for &m in met_k {
                    out.push_str(if m { ",1" } else { ",0" });
                }
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SimulationError {
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("decoded length {got} differs from input length {expected}")]
    LengthViolation { expected: usize, got: usize },
    #[error("recovered labels differ from the classifier's labels")]
    LabelViolation,
}

/// Runs the simulation and gathers per-trial records.
pub fn simulate(
    source: &CompositeSource,
    code: &CodeUnderTest,
    criteria: &[FidelityCriterion],
    budget: &DistortionBudget,
    params: &SimulationParams,
) -> Result<SimulationReport, SimulationError> {
    let levels = budget.resolve(criteria)?;
    let joint = source.joint_row_major();
    let sampler = WeightedIndex::new(joint.iter().map(|&p| p.max(0.0)))
        .expect("joint pmf has positive mass");
    let n_symbols = source.n_symbols();

    let records: Result<Vec<TrialRecord>, SimulationError> = (0..params.trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(params.seed, trial as u64));
            let mut states = Vec::with_capacity(params.n);
            let mut symbols = Vec::with_capacity(params.n);
            for _ in 0..params.n {
                let cell = sampler.sample(&mut rng);
                states.push(cell / n_symbols);
                symbols.push(cell % n_symbols);
            }

            let (bits, reproductions, class_counts) = match code {
                CodeUnderTest::VariableLength(vlc) => {
                    let bits = vlc.encode(&symbols)?;
                    let rec = vlc.decode(&bits)?;
                    (bits, rec, Vec::new())
                }
                CodeUnderTest::Ctc(ctc) => {
                    let bits = ctc.encode(&symbols)?;
                    let labels = ctc.labels_of(&symbols);
                    let recovered = ctc.recover_labels(&bits)?;
                    if recovered != labels {
                        return Err(SimulationError::LabelViolation);
                    }
                    let rec = ctc.decode(&bits)?;
                    let mut counts = vec![0usize; ctc.label_based().n_classes()];
                    for &u in &labels {
                        counts[u] += 1;
                    }
                    (bits, rec, counts)
                }
            };
            if reproductions.len() != symbols.len() {
                return Err(SimulationError::LengthViolation {
                    expected: symbols.len(),
                    got: reproductions.len(),
                });
            }

            let triple = Triple::new(states, symbols, reproductions).expect("equal lengths");
            let mut distortions = Vec::with_capacity(criteria.len());
            let mut met = Vec::with_capacity(criteria.len());
            for (k, criterion) in criteria.iter().enumerate() {
                let (avg, count) = subset_average(&triple, criterion);
                distortions.push(avg);
                met.push(
                    params
                        .eps
                        .iter()
                        .map(|&e| count == 0 || avg <= levels[k] + e)
                        .collect(),
                );
            }
            let rate = if params.n == 0 {
                0.0
            } else {
                bits.len() as f64 / params.n as f64
            };
            Ok(TrialRecord {
                trial,
                n: params.n,
                rate,
                distortions,
                met,
                class_counts,
            })
        })
        .collect();

    let mut trials = records?;
    trials.sort_by_key(|t| t.trial);
    Ok(SimulationReport {
        criteria_ids: criteria.iter().map(|c| c.id().to_string()).collect(),
        eps: params.eps.clone(),
        trials,
    })
}

/// Splitmix-style per-trial seed derivation.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{BitCursor, BitString};
    use crate::model::FidelityCriterion;

    /// Fixed-width identity code over the full symbol alphabet.
    struct IdentityVlc {
        width: usize,
    }

    impl VariableLengthCode for IdentityVlc {
        fn encode(&self, input: &[usize]) -> Result<BitString, CodecError> {
            let mut out = BitString::new();
            for &x in input {
                out.push_uint(x as u64, self.width);
            }
            Ok(out)
        }

        fn decode(&self, bits: &BitString) -> Result<Vec<usize>, CodecError> {
            let mut cursor = BitCursor::new(bits);
            let mut out = Vec::new();
            while cursor.remaining() >= self.width {
                out.push(cursor.read_uint(self.width).unwrap() as usize);
            }
            Ok(out)
        }
    }

    #[test]
    fn identity_code_meets_zero_budget_always() {
        let source = CompositeSource::new(
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into()],
            vec![0.1, 0.4, 0.3, 0.2],
        )
        .unwrap();
        let criteria = vec![FidelityCriterion::new(
            "0".into(),
            vec![true, false],
            vec![0.0, 1.0, 1.0, 0.0],
            2,
            2,
        )
        .unwrap()];
        let budget = DistortionBudget::from_pairs(&[("0", 0.0)]).unwrap();
        let code = IdentityVlc { width: 1 };
        let report = simulate(
            &source,
            &CodeUnderTest::VariableLength(&code),
            &criteria,
            &budget,
            &SimulationParams {
                n: 500,
                trials: 20,
                seed: 9,
                eps: vec![0.0, 0.05],
            },
        )
        .unwrap();
        assert_eq!(report.met_frequency(0, 0), 1.0);
        assert_eq!(report.met_frequency(0, 1), 1.0);
        assert!((report.mean_rate() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identical_seeds_reproduce_identical_reports() {
        let source = CompositeSource::new(
            vec!["0".into()],
            vec!["0".into(), "1".into()],
            vec!["0".into(), "1".into()],
            vec![0.5, 0.5],
        )
        .unwrap();
        let criteria = vec![FidelityCriterion::new(
            "0".into(),
            vec![true],
            vec![0.0, 1.0, 1.0, 0.0],
            2,
            2,
        )
        .unwrap()];
        let budget = DistortionBudget::from_pairs(&[("0", 0.5)]).unwrap();
        let code = IdentityVlc { width: 1 };
        let params = SimulationParams {
            n: 100,
            trials: 10,
            seed: 4,
            eps: vec![0.01],
        };
        let a = simulate(
            &source,
            &CodeUnderTest::VariableLength(&code),
            &criteria,
            &budget,
            &params,
        )
        .unwrap();
        let b = simulate(
            &source,
            &CodeUnderTest::VariableLength(&code),
            &criteria,
            &budget,
            &params,
        )
        .unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
    }
}
