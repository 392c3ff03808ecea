//! Code assemblies: per-class concatenation with labels as side
//! information, and the full classify-then-compress code that prepends a
//! losslessly coded label stream.

use crate::model::Classifier;

use super::gamma::{gamma_append, gamma_read};
use super::vlc::{LosslessLabelCode, VariableLengthCode};
use super::{BitCursor, BitString, CodecError};

/// A code whose encoder and decoder both receive the label sequence. The
/// bit string concatenates one length-prefixed payload per class, in a fixed
/// class order; the decoder splits the payloads and routes each class's
/// subsequence through its own code.
pub struct LabelBasedCode {
    per_class: Vec<Box<dyn VariableLengthCode>>,
    order: Vec<usize>,
}

/// Assembles per-class codes (indexed by label) into a label-based code.
/// `class_order` fixes the payload order in the stream and must be a
/// permutation of the labels.
pub fn assemble_label_based(
    per_class: Vec<Box<dyn VariableLengthCode>>,
    class_order: Vec<usize>,
) -> LabelBasedCode {
    assert_eq!(per_class.len(), class_order.len());
    let mut seen = vec![false; per_class.len()];
    for &u in &class_order {
        assert!(u < per_class.len() && !seen[u], "class order must be a permutation");
        seen[u] = true;
    }
    LabelBasedCode { per_class, order: class_order }
}

impl LabelBasedCode {
    pub fn n_classes(&self) -> usize {
        self.per_class.len()
    }

    pub fn class_code(&self, u: usize) -> &dyn VariableLengthCode {
        self.per_class[u].as_ref()
    }

    /// Positions of each class in a label sequence, in stream order of use.
    fn class_positions(&self, labels: &[usize], u: usize) -> Vec<usize> {
        labels
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == u)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn encode(&self, symbols: &[usize], labels: &[usize]) -> Result<BitString, CodecError> {
        if symbols.len() != labels.len() {
            return Err(CodecError::LabelLengthMismatch {
                symbols: symbols.len(),
                labels: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.per_class.len()) {
            return Err(CodecError::MalformedStream(format!(
                "label {bad} outside the {} classes",
                self.per_class.len()
            )));
        }
        if symbols.is_empty() {
            return Ok(BitString::new());
        }
        let mut out = BitString::new();
        for &u in &self.order {
            let class_symbols: Vec<usize> = self
                .class_positions(labels, u)
                .into_iter()
                .map(|i| symbols[i])
                .collect();
            let payload = self.per_class[u].encode(&class_symbols)?;
            gamma_append(&mut out, payload.len() as u64 + 1)?;
            out.extend(&payload);
        }
        Ok(out)
    }

    pub fn decode(&self, bits: &BitString, labels: &[usize]) -> Result<Vec<usize>, CodecError> {
        if labels.is_empty() {
            if !bits.is_empty() {
                return Err(CodecError::MalformedStream(
                    "nonempty stream for an empty label sequence".into(),
                ));
            }
            return Ok(Vec::new());
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= self.per_class.len()) {
            return Err(CodecError::MalformedStream(format!(
                "label {bad} outside the {} classes",
                self.per_class.len()
            )));
        }
        let mut cursor = BitCursor::new(bits);
        let mut out = vec![usize::MAX; labels.len()];
        for &u in &self.order {
            let len = gamma_read(&mut cursor)? - 1;
            let payload = cursor.take(len as usize).ok_or(CodecError::Truncated)?;
            let rec = self.per_class[u].decode(&payload)?;
            let positions = self.class_positions(labels, u);
            if rec.len() != positions.len() {
                return Err(CodecError::MalformedStream(format!(
                    "class {u} decoded {} symbols for {} positions",
                    rec.len(),
                    positions.len()
                )));
            }
            for (i, xhat) in positions.into_iter().zip(rec) {
                out[i] = xhat;
            }
        }
        if cursor.remaining() != 0 {
            return Err(CodecError::MalformedStream(format!(
                "{} unconsumed bits",
                cursor.remaining()
            )));
        }
        Ok(out)
    }
}

/// A classify-then-compress code: labels are recovered exactly from the
/// stream, and each class's reproduction factors through that class's own
/// code.
pub struct CtcCode {
    label_code: LosslessLabelCode,
    label_based: LabelBasedCode,
    symbol_label: Vec<usize>,
}

/// Assembles the label coder and the label-based code into a CTC code for
/// the given classifier.
pub fn assemble_ctc(
    label_code: LosslessLabelCode,
    label_based: LabelBasedCode,
    classifier: &Classifier,
) -> CtcCode {
    assert_eq!(classifier.n_labels(), label_based.n_classes());
    CtcCode {
        label_code,
        label_based,
        symbol_label: (0..classifier.symbol_count())
            .map(|x| classifier.label_of(x))
            .collect(),
    }
}

impl CtcCode {
    pub fn labels_of(&self, symbols: &[usize]) -> Vec<usize> {
        symbols.iter().map(|&x| self.symbol_label[x]).collect()
    }

    /// Recovers the label sequence from an encoded stream.
    pub fn recover_labels(&self, bits: &BitString) -> Result<Vec<usize>, CodecError> {
        let mut cursor = BitCursor::new(bits);
        let len = gamma_read(&mut cursor)? - 1;
        let payload = cursor.take(len as usize).ok_or(CodecError::Truncated)?;
        self.label_code.decode(&payload)
    }

    /// The per-class reproduction map the decoder factors through.
    pub fn class_map(&self, class_symbols: &[usize], u: usize) -> Result<Vec<usize>, CodecError> {
        let code = self.label_based.class_code(u);
        code.decode(&code.encode(class_symbols)?)
    }

    pub fn label_based(&self) -> &LabelBasedCode {
        &self.label_based
    }
}

impl VariableLengthCode for CtcCode {
    fn encode(&self, symbols: &[usize]) -> Result<BitString, CodecError> {
        let labels = self.labels_of(symbols);
        let label_payload = self.label_code.encode(&labels)?;
        let mut out = BitString::new();
        gamma_append(&mut out, label_payload.len() as u64 + 1)?;
        out.extend(&label_payload);
        let body = self.label_based.encode(symbols, &labels)?;
        out.extend(&body);
        Ok(out)
    }

    fn decode(&self, bits: &BitString) -> Result<Vec<usize>, CodecError> {
        let mut cursor = BitCursor::new(bits);
        let len = gamma_read(&mut cursor)? - 1;
        let payload = cursor.take(len as usize).ok_or(CodecError::Truncated)?;
        let labels = self.label_code.decode(&payload)?;
        let body = cursor.rest();
        self.label_based.decode(&body, &labels)
    }
}
