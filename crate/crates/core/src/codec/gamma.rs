//! Prefix-free compound representation of positive integers.
//!
//! The codeword for `j >= 1` interleaves the bits of `j` below its leading
//! one with zero flags and terminates with a one flag: writing `j` in binary
//! as `1 b_{k-1} ... b_0`, the codeword is `0 b_{k-1} 0 b_{k-2} ... 0 b_0 1`.
//! Its length is exactly `1 + 2*floor(log2 j)` and no codeword is a prefix
//! of another, so the decoder can split a codeword off the front of any
//! stream.

use super::{BitCursor, BitString, CodecError};

/// Codeword length of `j`, `1 + 2*floor(log2 j)`.
pub fn gamma_len(j: u64) -> usize {
    assert!(j >= 1);
    1 + 2 * (63 - j.leading_zeros() as usize)
}

/// Encodes `j >= 1`.
pub fn gamma_encode(j: u64) -> Result<BitString, CodecError> {
    let mut out = BitString::new();
    gamma_append(&mut out, j)?;
    Ok(out)
}

/// Appends the codeword of `j` to an existing bit string.
pub fn gamma_append(out: &mut BitString, j: u64) -> Result<(), CodecError> {
    if j == 0 {
        return Err(CodecError::ZeroOrNegative);
    }
    let k = 63 - j.leading_zeros() as usize;
    for i in (0..k).rev() {
        out.push(false);
        out.push(j >> i & 1 == 1);
    }
    out.push(true);
    Ok(())
}

/// Reads one codeword from a cursor.
pub fn gamma_read(cursor: &mut BitCursor) -> Result<u64, CodecError> {
    let mut value: u64 = 1;
    loop {
        match cursor.read_bit() {
            None => return Err(CodecError::Truncated),
            Some(true) => return Ok(value),
            Some(false) => {
                let bit = cursor.read_bit().ok_or(CodecError::Truncated)?;
                if value >= 1 << 63 {
                    return Err(CodecError::Overflow);
                }
                value = value << 1 | bit as u64;
            }
        }
    }
}

/// Splits a bit string into the leading codeword's value and the remainder.
pub fn gamma_decode(bits: &BitString) -> Result<(u64, BitString), CodecError> {
    let mut cursor = BitCursor::new(bits);
    let value = gamma_read(&mut cursor)?;
    Ok((value, cursor.rest()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(pattern: &str) -> BitString {
        BitString::from_bits(&pattern.chars().map(|c| c == '1').collect::<Vec<_>>())
    }

    #[test]
    fn known_codewords() {
        assert_eq!(gamma_encode(1).unwrap(), bits("1"));
        assert_eq!(gamma_encode(2).unwrap(), bits("001"));
        assert_eq!(gamma_encode(5).unwrap(), bits("00011"));
    }

    #[test]
    fn length_law_on_small_range() {
        for j in 1..=4096u64 {
            let code = gamma_encode(j).unwrap();
            assert_eq!(code.len(), gamma_len(j));
            assert_eq!(code.len(), 1 + 2 * (j as f64).log2().floor() as usize);
        }
    }

    #[test]
    fn decode_passes_remainder_through() {
        let mut b = gamma_encode(5).unwrap();
        b.extend(&bits("101"));
        let (j, rest) = gamma_decode(&b).unwrap();
        assert_eq!(j, 5);
        assert_eq!(rest, bits("101"));
    }

    #[test]
    fn single_bit_roundtrip() {
        let (j, rest) = gamma_decode(&bits("1")).unwrap();
        assert_eq!(j, 1);
        assert!(rest.is_empty());
    }

    #[test]
    fn truncated_prefix_is_rejected() {
        assert_eq!(gamma_decode(&bits("00")).unwrap_err(), CodecError::Truncated);
        assert_eq!(gamma_decode(&BitString::new()).unwrap_err(), CodecError::Truncated);
        assert_eq!(gamma_decode(&bits("0001")).unwrap_err(), CodecError::Truncated);
    }
}
