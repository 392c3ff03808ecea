//! Variable-length codes: the common trait, the lossless label coder, the
//! block-family wrapper and the chunked block code used for per-class lossy
//! coding.

use super::arith::{self, StaticModel};
use super::block::{design_class_codebook, BlockCode, NearestCodebook};
use super::gamma::{gamma_append, gamma_read};
use super::{BitCursor, BitString, CodecError};

/// A sequence coder whose reproduction always has the input's length.
/// Symbols are alphabet positions.
pub trait VariableLengthCode: Send + Sync {
    fn encode(&self, input: &[usize]) -> Result<BitString, CodecError>;
    fn decode(&self, bits: &BitString) -> Result<Vec<usize>, CodecError>;
}

// ---------------------------------------------------------------------------
// Lossless label coder
// ---------------------------------------------------------------------------

/// Round-trip-exact coder for label sequences, driven by the known label
/// pmf. The payload is a length prefix followed by the arithmetic-coded
/// sequence; the empty sequence maps to the empty bit string.
pub struct LosslessLabelCode {
    model: StaticModel,
}

/// Builds the label coder from the label pmf. Labels of probability zero
/// stay representable so losslessness holds on every input sequence.
pub fn lossless_label_code(label_pmf: &[f64]) -> LosslessLabelCode {
    LosslessLabelCode {
        model: StaticModel::from_pmf(label_pmf),
    }
}

impl VariableLengthCode for LosslessLabelCode {
    fn encode(&self, input: &[usize]) -> Result<BitString, CodecError> {
        if input.is_empty() {
            return Ok(BitString::new());
        }
        if let Some(&bad) = input.iter().find(|&&u| u >= self.model.n_symbols()) {
            return Err(CodecError::MalformedStream(format!(
                "label {bad} outside alphabet of {}",
                self.model.n_symbols()
            )));
        }
        let mut out = BitString::new();
        gamma_append(&mut out, input.len() as u64 + 1)?;
        arith::encode(&self.model, input, &mut out);
        Ok(out)
    }

    fn decode(&self, bits: &BitString) -> Result<Vec<usize>, CodecError> {
        if bits.is_empty() {
            return Ok(Vec::new());
        }
        let mut cursor = BitCursor::new(bits);
        let n = gamma_read(&mut cursor)? - 1;
        Ok(arith::decode(&self.model, &mut cursor, n as usize))
    }
}

// ---------------------------------------------------------------------------
// Block-family wrapper
// ---------------------------------------------------------------------------

/// Width in bits of the fixed-length index for a block of `n` symbols at
/// the given rate, with near-integer products snapped before rounding up.
pub(crate) fn index_width(n: usize, rate: f64) -> usize {
    let product = n as f64 * rate;
    let rounded = product.round();
    let product = if (product - rounded).abs() < 1e-9 {
        rounded
    } else {
        product
    };
    product.ceil().max(0.0) as usize
}

/// Wraps a family of block codes, one per block length, into a
/// variable-length code: the codeword is the length's prefix-free
/// representation followed by the block index in `ceil(n * rate)` bits.
pub struct BlockFamilyVlc<F> {
    family: F,
    rate: f64,
}

/// Builds the wrapper. Encoding fails with [`CodecError::RateViolated`] if
/// the family produces more indices at some length than the rate allows.
pub fn vlc_from_blocks<F>(family: F, rate: f64) -> BlockFamilyVlc<F>
where
    F: Fn(usize) -> Box<dyn BlockCode> + Send + Sync,
{
    BlockFamilyVlc { family, rate }
}

impl<F> VariableLengthCode for BlockFamilyVlc<F>
where
    F: Fn(usize) -> Box<dyn BlockCode> + Send + Sync,
{
    fn encode(&self, input: &[usize]) -> Result<BitString, CodecError> {
        if input.is_empty() {
            return Ok(BitString::new());
        }
        let n = input.len();
        let code = (self.family)(n);
        if code.block_len() != n {
            return Err(CodecError::MalformedStream(format!(
                "family returned block length {} for input length {n}",
                code.block_len()
            )));
        }
        let width = index_width(n, self.rate);
        if width < 64 && code.index_bound() > 1u64 << width {
            return Err(CodecError::RateViolated {
                n,
                m: code.index_bound(),
                width,
            });
        }
        let mut out = BitString::new();
        gamma_append(&mut out, n as u64)?;
        out.push_uint(code.encode_block(input), width);
        Ok(out)
    }

    fn decode(&self, bits: &BitString) -> Result<Vec<usize>, CodecError> {
        if bits.is_empty() {
            return Ok(Vec::new());
        }
        let mut cursor = BitCursor::new(bits);
        let n = gamma_read(&mut cursor)? as usize;
        let code = (self.family)(n);
        let width = index_width(n, self.rate);
        let index = cursor.read_uint(width).ok_or(CodecError::Truncated)?;
        if index >= code.index_bound() {
            return Err(CodecError::MalformedStream(format!(
                "index {index} out of bound {}",
                code.index_bound()
            )));
        }
        if cursor.remaining() != 0 {
            return Err(CodecError::MalformedStream(format!(
                "{} unconsumed bits",
                cursor.remaining()
            )));
        }
        let out = code.decode_block(index);
        debug_assert_eq!(out.len(), n);
        Ok(out)
    }
}

// ---------------------------------------------------------------------------
// Chunked block code
// ---------------------------------------------------------------------------

/// A practical per-class lossy coder: fixed-rate nearest-codeword coding of
/// consecutive chunks, with smaller codebooks covering the remainder
/// lengths. The codeword is the sequence length's prefix followed by one
/// fixed-width index per chunk, so the rate overhead over the design rate is
/// the index-width ceiling plus O(log n)/n.
pub struct ChunkedBlockVlc {
    full: NearestCodebook,
    remainders: Vec<NearestCodebook>,
    rate: f64,
}

/// Designs the chunk codebook and the remainder codebooks for one class at
/// the target rate (bits per symbol).
pub fn chunked_vlc(
    class_pmf: &[f64],
    distortion: &[f64],
    n_outputs: usize,
    target_rate: f64,
    block_len: usize,
    seed: u64,
) -> ChunkedBlockVlc {
    assert!(block_len >= 1);
    let full = design_class_codebook(class_pmf, distortion, n_outputs, target_rate, block_len, seed);
    let remainders = (1..block_len)
        .map(|r| {
            design_class_codebook(
                class_pmf,
                distortion,
                n_outputs,
                target_rate,
                r,
                seed.wrapping_add(r as u64),
            )
        })
        .collect();
    ChunkedBlockVlc {
        full,
        remainders,
        rate: target_rate,
    }
}

impl ChunkedBlockVlc {
    pub fn block_len(&self) -> usize {
        self.full.block_len()
    }

    pub fn design_rate(&self) -> f64 {
        self.rate
    }

    /// Bits this code spends on an input of length `n`.
    pub fn codeword_len(&self, n: usize) -> usize {
        if n == 0 {
            return 0;
        }
        let nb = self.block_len();
        let mut len = super::gamma::gamma_len(n as u64);
        len += (n / nb) * index_width(nb, self.rate);
        if n % nb != 0 {
            len += index_width(n % nb, self.rate);
        }
        len
    }
}

impl VariableLengthCode for ChunkedBlockVlc {
    fn encode(&self, input: &[usize]) -> Result<BitString, CodecError> {
        if input.is_empty() {
            return Ok(BitString::new());
        }
        let nb = self.block_len();
        let mut out = BitString::new();
        gamma_append(&mut out, input.len() as u64)?;
        let width_full = index_width(nb, self.rate);
        let mut chunks = input.chunks_exact(nb);
        for chunk in &mut chunks {
            out.push_uint(self.full.encode_block(chunk), width_full);
        }
        let rem = chunks.remainder();
        if !rem.is_empty() {
            let code = &self.remainders[rem.len() - 1];
            out.push_uint(code.encode_block(rem), index_width(rem.len(), self.rate));
        }
        Ok(out)
    }

    fn decode(&self, bits: &BitString) -> Result<Vec<usize>, CodecError> {
        if bits.is_empty() {
            return Ok(Vec::new());
        }
        let mut cursor = BitCursor::new(bits);
        let n = gamma_read(&mut cursor)? as usize;
        let nb = self.block_len();
        let width_full = index_width(nb, self.rate);
        let mut out = Vec::with_capacity(n);
        for _ in 0..n / nb {
            let index = cursor.read_uint(width_full).ok_or(CodecError::Truncated)?;
            if index >= self.full.index_bound() {
                return Err(CodecError::MalformedStream("chunk index out of bound".into()));
            }
            out.extend(self.full.decode_block(index));
        }
        let r = n % nb;
        if r != 0 {
            let code = &self.remainders[r - 1];
            let index = cursor
                .read_uint(index_width(r, self.rate))
                .ok_or(CodecError::Truncated)?;
            if index >= code.index_bound() {
                return Err(CodecError::MalformedStream(
                    "remainder index out of bound".into(),
                ));
            }
            out.extend(code.decode_block(index));
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

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn label_code_roundtrips_random_sequences() {
        let code = lossless_label_code(&[0.3, 0.6, 0.1]);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let n = rng.gen_range(0..100);
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            let bits = code.encode(&labels).unwrap();
            assert_eq!(code.decode(&bits).unwrap(), labels);
        }
    }

    #[test]
    fn degenerate_label_pmf_costs_almost_nothing() {
        let code = lossless_label_code(&[1.0]);
        let labels = vec![0usize; 50_000];
        let bits = code.encode(&labels).unwrap();
        let rate = bits.len() as f64 / labels.len() as f64;
        assert!(rate <= 0.01, "rate {rate}");
        assert_eq!(code.decode(&bits).unwrap(), labels);
    }

    /// A constant-decoder family: one index, fixed reproduction.
    struct ConstantBlock {
        n: usize,
    }

    impl BlockCode for ConstantBlock {
        fn block_len(&self) -> usize {
            self.n
        }
        fn index_bound(&self) -> u64 {
            1
        }
        fn encode_block(&self, _block: &[usize]) -> u64 {
            0
        }
        fn decode_block(&self, _index: u64) -> Vec<usize> {
            vec![0; self.n]
        }
    }

    #[test]
    fn zero_rate_family_costs_only_the_length_prefix() {
        let code = vlc_from_blocks(|n| Box::new(ConstantBlock { n }) as Box<dyn BlockCode>, 0.0);
        for n in [1usize, 2, 7, 100] {
            let input = vec![0usize; n];
            let bits = code.encode(&input).unwrap();
            assert_eq!(bits.len(), super::super::gamma::gamma_len(n as u64));
            assert!(bits.len() as f64 <= 1.0 + 2.0 * (n as f64).log2());
            assert_eq!(code.decode(&bits).unwrap().len(), n);
        }
        assert!(code.encode(&[]).unwrap().is_empty());
        assert!(code.decode(&BitString::new()).unwrap().is_empty());
    }

    /// Identity block code on a binary alphabet.
    struct IdentityBlock {
        n: usize,
    }

    impl BlockCode for IdentityBlock {
        fn block_len(&self) -> usize {
            self.n
        }
        fn index_bound(&self) -> u64 {
            1 << self.n
        }
        fn encode_block(&self, block: &[usize]) -> u64 {
            block.iter().fold(0, |acc, &b| acc << 1 | b as u64)
        }
        fn decode_block(&self, index: u64) -> Vec<usize> {
            (0..self.n)
                .rev()
                .map(|i| (index >> i & 1) as usize)
                .collect()
        }
    }

    #[test]
    fn rate_one_family_has_expected_codeword_length() {
        let code = vlc_from_blocks(|n| Box::new(IdentityBlock { n }) as Box<dyn BlockCode>, 1.0);
        // gamma(4) has 5 bits, the index takes 4.
        let bits = code.encode(&[1, 0, 1, 1]).unwrap();
        assert_eq!(bits.len(), 9);
        assert_eq!(code.decode(&bits).unwrap(), vec![1, 0, 1, 1]);
    }

    #[test]
    fn rate_violation_is_reported() {
        let code = vlc_from_blocks(|n| Box::new(IdentityBlock { n }) as Box<dyn BlockCode>, 0.5);
        let err = code.encode(&[1, 0, 1, 1]).unwrap_err();
        assert!(matches!(err, CodecError::RateViolated { .. }));
    }

    #[test]
    fn chunked_code_preserves_length_on_random_inputs() {
        let pmf = [0.5, 0.5];
        let hamming = [0.0, 1.0, 1.0, 0.0];
        let code = chunked_vlc(&pmf, &hamming, 2, 0.55, 8, 17);
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..200 {
            let n = rng.gen_range(0..60);
            let input: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            let bits = code.encode(&input).unwrap();
            assert_eq!(bits.len(), code.codeword_len(n));
            let out = code.decode(&bits).unwrap();
            assert_eq!(out.len(), n);
        }
    }
}
