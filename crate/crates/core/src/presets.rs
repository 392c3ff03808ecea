//! Built-in reference instances used by the command-line tools and the
//! verification suite.
//!
//! * `example1` — a dependent binary pair with one Hamming criterion per
//!   state.
//! * `example2` — a uniform quaternary source with state equal to symbol,
//!   two-symbol classes and per-class Hamming criteria; classification is
//!   perfect by construction.
//! * `example3` — an 8-bit quantized mixture of two Gaussians (means 0.3
//!   and 0.7, variance 0.04), squared-error criteria per mixture component
//!   and a threshold classifier at 1/2.

use std::collections::BTreeMap;

use statrs::function::erf::erfc;

use crate::model::{CriterionDocument, SourceDocument};

#[derive(Debug, thiserror::Error)]
#[error("unknown instance `{0}`; expected example1, example2 or example3")]
pub struct UnknownExample(pub String);

/// Builds one of the reference source documents by name.
pub fn preset_document(name: &str) -> Result<SourceDocument, UnknownExample> {
    match name {
        "example1" => Ok(example1()),
        "example2" => Ok(example2()),
        "example3" => Ok(example3()),
        other => Err(UnknownExample(other.to_string())),
    }
}

fn names(n: usize) -> Vec<String> {
    (0..n).map(|i| i.to_string()).collect()
}

fn hamming_rows(n: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { 0.0 } else { 1.0 }).collect())
        .collect()
}

fn example1() -> SourceDocument {
    SourceDocument {
        states: names(2),
        symbols: names(2),
        reproductions: names(2),
        joint_pmf: vec![vec![0.1, 0.4], vec![0.3, 0.2]],
        classifier: [("0", "0"), ("1", "1")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        criteria: vec![
            CriterionDocument {
                id: "0".into(),
                state_subset: vec!["0".into()],
                distortion: hamming_rows(2),
            },
            CriterionDocument {
                id: "1".into(),
                state_subset: vec!["1".into()],
                distortion: hamming_rows(2),
            },
        ],
    }
}

fn example2() -> SourceDocument {
    let mut joint = vec![vec![0.0; 4]; 4];
    for (i, row) in joint.iter_mut().enumerate() {
        row[i] = 0.25;
    }
    SourceDocument {
        states: names(4),
        symbols: names(4),
        reproductions: names(4),
        joint_pmf: joint,
        classifier: [("0", "0"), ("1", "0"), ("2", "1"), ("3", "1")]
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_string()))
            .collect(),
        criteria: vec![
            CriterionDocument {
                id: "0".into(),
                state_subset: vec!["0".into(), "1".into()],
                distortion: hamming_rows(4),
            },
            CriterionDocument {
                id: "1".into(),
                state_subset: vec!["2".into(), "3".into()],
                distortion: hamming_rows(4),
            },
        ],
    }
}

const CELLS: usize = 256;

/// Midpoint value of quantizer cell `k`.
fn cell_value(k: usize) -> f64 {
    k as f64 / CELLS as f64 + 1.0 / (2 * CELLS) as f64
}

fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    0.5 * erfc(-(x - mean) / (sd * std::f64::consts::SQRT_2))
}

/// Cell masses of a Gaussian pushed through the 8-bit quantizer: everything
/// below the first cell edge lands in cell 0 and everything above the last
/// edge lands in cell 255.
fn quantized_gaussian(mean: f64, sd: f64) -> Vec<f64> {
    let edge = |k: usize| k as f64 / CELLS as f64;
    let mut masses = Vec::with_capacity(CELLS);
    masses.push(normal_cdf(edge(1), mean, sd));
    for k in 1..CELLS - 1 {
        masses.push(normal_cdf(edge(k + 1), mean, sd) - normal_cdf(edge(k), mean, sd));
    }
    masses.push(1.0 - normal_cdf(edge(CELLS - 1), mean, sd));
    masses
}

fn example3() -> SourceDocument {
    // Component 1 is the exact mirror of component 0, which keeps the two
    // class masses equal.
    let component0 = quantized_gaussian(0.3, 0.2);
    let row0: Vec<f64> = component0.iter().map(|&m| 0.5 * m).collect();
    let row1: Vec<f64> = (0..CELLS).map(|k| 0.5 * component0[CELLS - 1 - k]).collect();

    let squared_error: Vec<Vec<f64>> = (0..CELLS)
        .map(|x| {
            (0..CELLS)
                .map(|xhat| {
                    let d = cell_value(x) - cell_value(xhat);
                    d * d
                })
                .collect()
        })
        .collect();

    let classifier: BTreeMap<String, String> = (0..CELLS)
        .map(|k| {
            let label = if cell_value(k) < 0.5 { "0" } else { "1" };
            (k.to_string(), label.to_string())
        })
        .collect();

    SourceDocument {
        states: names(2),
        symbols: names(CELLS),
        reproductions: names(CELLS),
        joint_pmf: vec![row0, row1],
        classifier,
        criteria: vec![
            CriterionDocument {
                id: "0".into(),
                state_subset: vec!["0".into()],
                distortion: squared_error.clone(),
            },
            CriterionDocument {
                id: "1".into(),
                state_subset: vec!["1".into()],
                distortion: squared_error,
            },
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{label_entropy, validate_document};

    #[test]
    fn example1_matches_the_stated_joint() {
        let v = validate_document(&example1()).unwrap();
        assert_eq!(v.source.joint_row_major(), &[0.1, 0.4, 0.3, 0.2]);
        assert_eq!(v.criteria.len(), 2);
    }

    #[test]
    fn example2_is_uniform_diagonal_with_paired_classes() {
        let v = validate_document(&example2()).unwrap();
        for s in 0..4 {
            for x in 0..4 {
                let expected = if s == x { 0.25 } else { 0.0 };
                assert_eq!(v.source.joint(s, x), expected);
            }
        }
        assert_eq!(v.classifier.n_labels(), 2);
        assert!((label_entropy(&v.source, &v.classifier) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn example3_has_balanced_classes_and_valid_pmf() {
        let v = validate_document(&example3()).unwrap();
        assert_eq!(v.source.n_symbols(), 256);
        let masses = v.classifier.label_marginal(&v.source);
        assert!((masses[0] - 0.5).abs() < 1e-12, "class mass {}", masses[0]);
        assert!((masses[1] - 0.5).abs() < 1e-12);
        assert!((label_entropy(&v.source, &v.classifier) - 1.0).abs() < 1e-9);
        // Mirror symmetry of the joint pmf.
        for k in 0..256 {
            assert_eq!(v.source.joint(0, k), v.source.joint(1, 255 - k));
        }
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert!(preset_document("example9").is_err());
    }
}
