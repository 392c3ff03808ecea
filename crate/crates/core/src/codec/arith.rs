//! Static arithmetic coder over a fixed symbol pmf.
//!
//! A 32-bit renormalizing range coder with carry handling through pending
//! bits. Frequencies are quantized to integer counts with every symbol kept
//! representable, so any sequence over the alphabet round-trips exactly even
//! when the pmf assigns it probability zero. Decoding takes the symbol count
//! from the caller; the coder itself carries no terminator.

use super::{BitCursor, BitString};

const CODE_BITS: u32 = 32;
const TOP: u64 = (1 << CODE_BITS) - 1;
const QTR: u64 = 1 << (CODE_BITS - 2);
const HALF: u64 = 2 * QTR;
const THREE_QTR: u64 = 3 * QTR;
const TOTAL_BUDGET: u64 = 1 << 16;

/// Quantized cumulative frequencies.
#[derive(Debug, Clone)]
pub(crate) struct StaticModel {
    cum: Vec<u64>,
}

impl StaticModel {
    pub(crate) fn from_pmf(pmf: &[f64]) -> Self {
        assert!(!pmf.is_empty());
        let spread = (TOTAL_BUDGET - pmf.len() as u64) as f64;
        let mut cum = Vec::with_capacity(pmf.len() + 1);
        cum.push(0);
        let mut acc = 0u64;
        for &p in pmf {
            let count = 1 + (p.max(0.0) * spread).floor() as u64;
            acc += count;
            cum.push(acc);
        }
        debug_assert!(acc <= TOTAL_BUDGET);
        Self { cum }
    }

    pub(crate) fn n_symbols(&self) -> usize {
        self.cum.len() - 1
    }

    fn total(&self) -> u64 {
        *self.cum.last().unwrap()
    }

    fn find(&self, scaled: u64) -> usize {
        // Largest symbol whose cumulative start is <= scaled.
        self.cum.partition_point(|&c| c <= scaled) - 1
    }
}

pub(crate) fn encode(model: &StaticModel, symbols: &[usize], out: &mut BitString) {
    let total = model.total();
    let mut low: u64 = 0;
    let mut high: u64 = TOP;
    let mut pending: usize = 0;

    let emit = |out: &mut BitString, bit: bool, pending: &mut usize| {
        out.push(bit);
        for _ in 0..*pending {
            out.push(!bit);
        }
        *pending = 0;
    };

    for &sym in symbols {
        debug_assert!(sym < model.n_symbols());
        let range = high - low + 1;
        high = low + range * model.cum[sym + 1] / total - 1;
        low += range * model.cum[sym] / total;
        loop {
            if high < HALF {
                emit(out, false, &mut pending);
            } else if low >= HALF {
                emit(out, true, &mut pending);
                low -= HALF;
                high -= HALF;
            } else if low >= QTR && high < THREE_QTR {
                pending += 1;
                low -= QTR;
                high -= QTR;
            } else {
                break;
            }
            low <<= 1;
            high = (high << 1) | 1;
        }
    }
    pending += 1;
    if low < QTR {
        emit(out, false, &mut pending);
    } else {
        emit(out, true, &mut pending);
    }
}

/// Decodes exactly `count` symbols, reading zeros past the end of the
/// stream as the encoder's flush allows.
pub(crate) fn decode(model: &StaticModel, cursor: &mut BitCursor, count: usize) -> Vec<usize> {
    let total = model.total();
    let mut low: u64 = 0;
    let mut high: u64 = TOP;
    let mut value: u64 = 0;
    for _ in 0..CODE_BITS {
        value = (value << 1) | cursor.read_bit().unwrap_or(false) as u64;
    }

    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let range = high - low + 1;
        let scaled = ((value - low + 1) * total - 1) / range;
        let sym = model.find(scaled);
        out.push(sym);
        high = low + range * model.cum[sym + 1] / total - 1;
        low += range * model.cum[sym] / total;
        loop {
            if high < HALF {
            } else if low >= HALF {
                value -= HALF;
                low -= HALF;
                high -= HALF;
            } else if low >= QTR && high < THREE_QTR {
                value -= QTR;
                low -= QTR;
                high -= QTR;
            } else {
                break;
            }
            low <<= 1;
            high = (high << 1) | 1;
            value = (value << 1) | cursor.read_bit().unwrap_or(false) as u64;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn roundtrip(pmf: &[f64], symbols: &[usize]) {
        let model = StaticModel::from_pmf(pmf);
        let mut bits = BitString::new();
        encode(&model, symbols, &mut bits);
        let mut cursor = BitCursor::new(&bits);
        let back = decode(&model, &mut cursor, symbols.len());
        assert_eq!(back, symbols);
    }

    #[test]
    fn roundtrips_exactly_including_zero_probability_symbols() {
        roundtrip(&[0.7, 0.3, 0.0], &[0, 1, 2, 2, 0, 1, 2, 0, 0, 0]);
        roundtrip(&[1.0], &[0; 100]);
        roundtrip(&[0.5, 0.5], &[]);
    }

    #[test]
    fn random_sequences_roundtrip() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..200 {
            let k = rng.gen_range(1..6);
            let mut pmf: Vec<f64> = (0..k).map(|_| rng.gen::<f64>()).collect();
            let total: f64 = pmf.iter().sum();
            pmf.iter_mut().for_each(|p| *p /= total);
            let n = rng.gen_range(0..200);
            let symbols: Vec<usize> = (0..n).map(|_| rng.gen_range(0..k)).collect();
            roundtrip(&pmf, &symbols);
        }
    }

    #[test]
    fn uniform_binary_costs_about_one_bit_per_symbol() {
        let model = StaticModel::from_pmf(&[0.5, 0.5]);
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let symbols: Vec<usize> = (0..10_000).map(|_| rng.gen_range(0..2)).collect();
        let mut bits = BitString::new();
        encode(&model, &symbols, &mut bits);
        let rate = bits.len() as f64 / symbols.len() as f64;
        assert!((rate - 1.0).abs() < 0.01, "rate {rate}");
    }
}
