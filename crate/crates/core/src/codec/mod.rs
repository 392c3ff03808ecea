//! Constructive coding machinery: bit strings, the prefix-free integer
//! representation, a static entropy coder for labels, variable-length code
//! assemblies and the Monte-Carlo simulator that measures their operational
//! rate and fidelity.

mod arith;
mod assemble;
mod block;
mod gamma;
mod simulate;
mod vlc;

pub use assemble::{assemble_ctc, assemble_label_based, CtcCode, LabelBasedCode};
pub use block::{design_class_codebook, target_rate_marginal, BlockCode, NearestCodebook};
pub use gamma::{gamma_append, gamma_decode, gamma_encode, gamma_len, gamma_read};
pub use simulate::{
    simulate, CodeUnderTest, SimulationParams, SimulationReport, TrialRecord,
};
pub use vlc::{
    chunked_vlc, lossless_label_code, vlc_from_blocks, BlockFamilyVlc, ChunkedBlockVlc,
    LosslessLabelCode, VariableLengthCode,
};

use std::io::{Read, Write};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CodecError {
    #[error("the compound representation is defined for positive integers only")]
    ZeroOrNegative,
    #[error("bit string ends before a complete codeword")]
    Truncated,
    #[error("decoded integer exceeds the representable range")]
    Overflow,
    #[error("block family violates the rate bound at n = {n}: {m} indices exceed 2^{width}")]
    RateViolated { n: usize, m: u64, width: usize },
    #[error("malformed stream: {0}")]
    MalformedStream(String),
    #[error("sequence lengths differ: {symbols} symbols vs {labels} labels")]
    LabelLengthMismatch { symbols: usize, labels: usize },
}

/// A bit string stored most-significant-bit first within each byte.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitString {
    bytes: Vec<u8>,
    len: usize,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(bits: usize) -> Self {
        Self {
            bytes: Vec::with_capacity(bits.div_ceil(8)),
            len: 0,
        }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut out = Self::with_capacity(bits.len());
        for &b in bits {
            out.push(b);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn push(&mut self, bit: bool) {
        if self.len % 8 == 0 {
            self.bytes.push(0);
        }
        if bit {
            self.bytes[self.len / 8] |= 1 << (7 - self.len % 8);
        }
        self.len += 1;
    }

    pub fn get(&self, index: usize) -> bool {
        assert!(index < self.len, "bit index out of range");
        self.bytes[index / 8] & (1 << (7 - index % 8)) != 0
    }

    /// Appends `value` in `width` bits, most significant first.
    pub fn push_uint(&mut self, value: u64, width: usize) {
        assert!(width <= 64);
        assert!(width == 64 || value < (1u64 << width), "value does not fit");
        for i in (0..width).rev() {
            self.push(value >> i & 1 == 1);
        }
    }

    pub fn extend(&mut self, other: &BitString) {
        for b in other.iter() {
            self.push(b);
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// The storage bytes, padded with trailing zero bits.
    pub fn padded_bytes(&self) -> &[u8] {
        &self.bytes
    }
}

/// Sequential reader over a [`BitString`].
#[derive(Debug, Clone)]
pub struct BitCursor<'a> {
    bits: &'a BitString,
    pos: usize,
}

impl<'a> BitCursor<'a> {
    pub fn new(bits: &'a BitString) -> Self {
        Self { bits, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.bits.len() - self.pos
    }

    pub fn read_bit(&mut self) -> Option<bool> {
        if self.pos < self.bits.len() {
            let b = self.bits.get(self.pos);
            self.pos += 1;
            Some(b)
        } else {
            None
        }
    }

    pub fn read_uint(&mut self, width: usize) -> Option<u64> {
        if self.remaining() < width {
            return None;
        }
        let mut v = 0u64;
        for _ in 0..width {
            v = v << 1 | self.read_bit().unwrap() as u64;
        }
        Some(v)
    }

    /// Copies the next `count` bits out as an owned bit string.
    pub fn take(&mut self, count: usize) -> Option<BitString> {
        if self.remaining() < count {
            return None;
        }
        let mut out = BitString::with_capacity(count);
        for _ in 0..count {
            out.push(self.read_bit().unwrap());
        }
        Some(out)
    }

    /// Copies everything left.
    pub fn rest(&mut self) -> BitString {
        self.take(self.remaining()).unwrap()
    }
}

const CONTAINER_MAGIC: &[u8; 4] = b"CRD1";

/// Writes a bit string in the container format: magic `CRD1`, 64-bit
/// little-endian bit length, then the padded bytes.
pub fn write_container<W: Write>(writer: &mut W, bits: &BitString) -> std::io::Result<()> {
    writer.write_all(CONTAINER_MAGIC)?;
    writer.write_all(&(bits.len() as u64).to_le_bytes())?;
    writer.write_all(bits.padded_bytes())?;
    Ok(())
}

/// Reads a container back into a bit string, validating magic and length.
pub fn read_container<R: Read>(reader: &mut R) -> std::io::Result<BitString> {
    let mut magic = [0u8; 4];
    reader.read_exact(&mut magic)?;
    if &magic != CONTAINER_MAGIC {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            "bad container magic",
        ));
    }
    let mut len_bytes = [0u8; 8];
    reader.read_exact(&mut len_bytes)?;
    let len = u64::from_le_bytes(len_bytes) as usize;
    let mut bytes = vec![0u8; len.div_ceil(8)];
    reader.read_exact(&mut bytes)?;
    let mut bits = BitString {
        bytes,
        len,
    };
    // Clear any nonzero padding so equality semantics stay byte-exact.
    let tail = bits.len % 8;
    if tail != 0 {
        let last = bits.bytes.len() - 1;
        bits.bytes[last] &= !(0xffu8 >> tail);
    }
    Ok(bits)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_and_get_msb_first() {
        let mut b = BitString::new();
        b.push_uint(0b1011, 4);
        assert_eq!(b.len(), 4);
        assert_eq!(b.padded_bytes(), &[0b1011_0000]);
        assert!(b.get(0));
        assert!(!b.get(1));
    }

    #[test]
    fn cursor_reads_back_uints() {
        let mut b = BitString::new();
        b.push_uint(0x2a, 8);
        b.push_uint(5, 3);
        let mut c = BitCursor::new(&b);
        assert_eq!(c.read_uint(8), Some(0x2a));
        assert_eq!(c.read_uint(3), Some(5));
        assert_eq!(c.read_bit(), None);
    }

    #[test]
    fn container_roundtrip() {
        let mut b = BitString::new();
        b.push_uint(0b10110, 5);
        let mut buf = Vec::new();
        write_container(&mut buf, &b).unwrap();
        assert_eq!(&buf[0..4], b"CRD1");
        assert_eq!(buf[4], 5);
        let back = read_container(&mut buf.as_slice()).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn container_rejects_bad_magic() {
        let buf = b"NOPE\x00\x00\x00\x00\x00\x00\x00\x00".to_vec();
        assert!(read_container(&mut buf.as_slice()).is_err());
    }
}
