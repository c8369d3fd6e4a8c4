//! Fixed-width bitstrings. Bit 0 is the first (leftmost) bit everywhere:
//! in `Display`, in prefixes, and in big-endian integer conversions.

use std::fmt;

/// An immutable-width vector of bits. Equality, hashing and ordering are
/// bitwise; ordering is lexicographic, which for equal widths coincides with
/// the big-endian integer order used by `to_uint`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    /// All-zero string of the given width.
    pub fn zeros(width: usize) -> Self {
        BitString { bits: vec![false; width] }
    }

    pub fn from_bools(bits: Vec<bool>) -> Self {
        BitString { bits }
    }

    /// Big-endian conversion: bit 0 receives the most significant of the
    /// `width` low bits of `value`. Panics if `width > 64` or the value does
    /// not fit.
    pub fn from_uint(value: u64, width: usize) -> Self {
        assert!(width <= 64, "from_uint supports widths up to 64");
        if width < 64 {
            assert!(value < (1u64 << width), "value {value} does not fit in {width} bits");
        }
        let bits = (0..width).map(|i| (value >> (width - 1 - i)) & 1 == 1).collect();
        BitString { bits }
    }

    /// Inverse of `from_uint`. Panics if wider than 64 bits.
    pub fn to_uint(&self) -> u64 {
        assert!(self.width() <= 64, "to_uint supports widths up to 64");
        self.bits.iter().fold(0u64, |acc, &b| (acc << 1) | b as u64)
    }

    /// Parses strings like "1011". Rejects anything but '0' and '1'.
    pub fn parse(s: &str) -> Result<Self, String> {
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => return Err(format!("invalid bit character {c:?}")),
            }
        }
        Ok(BitString { bits })
    }

    pub fn random<R: rand::Rng>(rng: &mut R, width: usize) -> Self {
        BitString { bits: (0..width).map(|_| rng.gen::<bool>()).collect() }
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, v: bool) {
        self.bits[i] = v;
    }

    pub fn push(&mut self, v: bool) {
        self.bits.push(v);
    }

    pub fn as_bools(&self) -> &[bool] {
        &self.bits
    }

    /// First `k` bits.
    pub fn prefix(&self, k: usize) -> BitString {
        BitString { bits: self.bits[..k].to_vec() }
    }

    pub fn slice(&self, start: usize, end: usize) -> BitString {
        BitString { bits: self.bits[start..end].to_vec() }
    }

    pub fn concat(&self, other: &BitString) -> BitString {
        let mut bits = self.bits.clone();
        bits.extend_from_slice(&other.bits);
        BitString { bits }
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// GF(2) inner product. Panics on width mismatch.
    pub fn dot(&self, other: &BitString) -> bool {
        assert_eq!(self.width(), other.width(), "dot requires equal widths");
        self.bits.iter().zip(&other.bits).filter(|(&a, &b)| a && b).count() % 2 == 1
    }

    pub fn xor(&self, other: &BitString) -> BitString {
        assert_eq!(self.width(), other.width(), "xor requires equal widths");
        BitString { bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a ^ b).collect() }
    }

    pub fn hamming(&self, other: &BitString) -> usize {
        assert_eq!(self.width(), other.width(), "hamming requires equal widths");
        self.bits.iter().zip(&other.bits).filter(|(&a, &b)| a != b).count()
    }

    /// All bitstrings of a width in lexicographic (= integer) order.
    /// Intended for exhaustive desk-scale sweeps; width must be ≤ 32.
    pub fn enumerate(width: usize) -> impl Iterator<Item = BitString> {
        assert!(width <= 32, "exhaustive enumeration capped at 32 bits");
        (0..(1u64 << width)).map(move |v| BitString::from_uint(v, width))
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uint_round_trip_is_big_endian() {
        let x = BitString::from_uint(0b1011, 4);
        assert_eq!(x.to_string(), "1011");
        assert!(x.get(0)); // most significant first
        assert!(!x.get(1));
        assert_eq!(x.to_uint(), 0b1011);
    }

    #[test]
    fn lexicographic_order_matches_integer_order() {
        let xs: Vec<BitString> = BitString::enumerate(4).collect();
        for w in xs.windows(2) {
            assert!(w[0] < w[1]);
        }
    }

    #[test]
    fn dot_and_xor() {
        let a = BitString::parse("1101").unwrap();
        let b = BitString::parse("1011").unwrap();
        assert!(!a.dot(&b)); // overlap at bits 0 and 3 -> even
        assert_eq!(a.xor(&b).to_string(), "0110");
        assert_eq!(a.hamming(&b), 2);
    }

    #[test]
    fn parse_rejects_junk() {
        assert!(BitString::parse("10x1").is_err());
    }
}
