//! GF(2^m) arithmetic for m in {2, 3, 4} and the evaluation-code encoder
//! behind the block concept class. A message of |k| field elements is read
//! as polynomial coefficients in increasing degree order and evaluated at
//! the first 3|k| field elements (0, 1, 2, ...), giving a codeword of 3|k|
//! symbols with minimum pairwise symbol distance 2|k|+1.
//!
//! Bit layout of a codeword is fixed: symbol-major, little-endian within
//! each symbol, so bit s*m + i is bit i of symbol s.

use crate::bits::BitString;
use thiserror::Error;

/// Irreducible reduction polynomials, indexed by degree. Bit i is the
/// coefficient of x^i: m=2 is x^2+x+1, m=3 is x^3+x+1, m=4 is x^4+x+1.
const REDUCTION_POLY: [u16; 5] = [0, 0, 0b111, 0b1011, 0b10011];

pub const MIN_DEGREE: u8 = 2;
pub const MAX_DEGREE: u8 = 4;

#[derive(Error, Debug, PartialEq, Eq)]
pub enum RsError {
    #[error("field degree mismatch: {0} vs {1}")]
    FieldMismatch(u8, u8),
    #[error("code needs {needed} evaluation points but GF(2^{degree}) has only {available}")]
    TooManyPoints { needed: usize, degree: u8, available: usize },
    #[error("message must not be empty")]
    EmptyMessage,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GfElement {
    value: u8,
    field_degree: u8,
}

impl GfElement {
    /// Panics when the degree is outside [2, 4] or the value does not fit.
    pub fn new(value: u8, field_degree: u8) -> GfElement {
        assert!(
            (MIN_DEGREE..=MAX_DEGREE).contains(&field_degree),
            "unsupported field degree {field_degree}"
        );
        assert!(
            (value as u16) < (1u16 << field_degree),
            "value {value} outside GF(2^{field_degree})"
        );
        GfElement { value, field_degree }
    }

    pub fn zero(field_degree: u8) -> GfElement {
        GfElement::new(0, field_degree)
    }

    pub fn one(field_degree: u8) -> GfElement {
        GfElement::new(1, field_degree)
    }

    pub fn value(&self) -> u8 {
        self.value
    }

    pub fn degree(&self) -> u8 {
        self.field_degree
    }

    /// All field elements in numeric order.
    pub fn all(field_degree: u8) -> impl Iterator<Item = GfElement> {
        assert!((MIN_DEGREE..=MAX_DEGREE).contains(&field_degree));
        (0..(1u16 << field_degree)).map(move |v| GfElement::new(v as u8, field_degree))
    }
}

/// Addition is coefficient-wise XOR.
pub fn gf_add(a: GfElement, b: GfElement) -> Result<GfElement, RsError> {
    if a.field_degree != b.field_degree {
        return Err(RsError::FieldMismatch(a.field_degree, b.field_degree));
    }
    Ok(GfElement { value: a.value ^ b.value, field_degree: a.field_degree })
}

/// Product modulo the fixed reduction polynomial for the degree.
pub fn gf_mul(a: GfElement, b: GfElement) -> Result<GfElement, RsError> {
    if a.field_degree != b.field_degree {
        return Err(RsError::FieldMismatch(a.field_degree, b.field_degree));
    }
    Ok(GfElement { value: mul_raw(a.value, b.value, a.field_degree), field_degree: a.field_degree })
}

/// Shift-and-xor multiply with reduction folded into each doubling step.
fn mul_raw(mut a: u8, mut b: u8, m: u8) -> u8 {
    let poly = REDUCTION_POLY[m as usize] as u8;
    let high_bit = 1u8 << (m - 1);
    let mask = if m == 4 { 0x0f } else { (1u8 << m) - 1 };
    let mut acc = 0u8;
    while b != 0 {
        if b & 1 == 1 {
            acc ^= a;
        }
        let carry = a & high_bit != 0;
        a = (a << 1) & mask;
        if carry {
            a ^= poly & mask;
        }
        b >>= 1;
    }
    acc
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RsCodeword {
    symbols: Vec<GfElement>,
    message_len: usize,
    field_degree: u8,
}

impl RsCodeword {
    pub fn symbols(&self) -> &[GfElement] {
        &self.symbols
    }

    pub fn message_len(&self) -> usize {
        self.message_len
    }

    pub fn degree(&self) -> u8 {
        self.field_degree
    }

    /// Symbol positions where two codewords differ.
    pub fn symbol_distance(&self, other: &RsCodeword) -> usize {
        assert_eq!(self.symbols.len(), other.symbols.len());
        self.symbols.iter().zip(&other.symbols).filter(|(a, b)| a != b).count()
    }
}

/// Evaluates the message polynomial at points 0, 1, ..., 3|k|-1.
pub fn rs_encode(message: &[GfElement]) -> Result<RsCodeword, RsError> {
    if message.is_empty() {
        return Err(RsError::EmptyMessage);
    }
    let m = message[0].field_degree;
    for c in message {
        if c.field_degree != m {
            return Err(RsError::FieldMismatch(m, c.field_degree));
        }
    }
    let needed = 3 * message.len();
    let available = 1usize << m;
    if needed > available {
        return Err(RsError::TooManyPoints { needed, degree: m, available });
    }
    let symbols = (0..needed)
        .map(|p| {
            let x = GfElement::new(p as u8, m);
            // Horner, highest coefficient first
            let mut acc = GfElement::zero(m);
            for c in message.iter().rev() {
                acc = gf_add(gf_mul(acc, x).unwrap(), *c).unwrap();
            }
            acc
        })
        .collect();
    Ok(RsCodeword { symbols, message_len: message.len(), field_degree: m })
}

/// Fixed bit layout: symbol-major, little-endian within each symbol.
pub fn codeword_bits(codeword: &RsCodeword) -> BitString {
    let m = codeword.field_degree as usize;
    let mut bits = Vec::with_capacity(codeword.symbols.len() * m);
    for s in &codeword.symbols {
        for i in 0..m {
            bits.push((s.value >> i) & 1 == 1);
        }
    }
    BitString::from_bools(bits)
}

/// All q^k messages in lexicographic order (first coefficient most
/// significant), for exhaustive checks and brute-force decoding.
pub fn enumerate_messages(field_degree: u8, k: usize) -> Vec<Vec<GfElement>> {
    let q = 1usize << field_degree;
    let total = q.checked_pow(k as u32).expect("message space too large to enumerate");
    (0..total)
        .map(|idx| {
            let mut rem = idx;
            let mut msg = vec![GfElement::zero(field_degree); k];
            for j in (0..k).rev() {
                msg[j] = GfElement::new((rem % q) as u8, field_degree);
                rem /= q;
            }
            msg
        })
        .collect()
}
