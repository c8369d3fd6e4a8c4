//! Concept classes with checkable pairwise structure, and brute-force
//! verifiers for distinctness and smoothness certificates.
//!
//! Three constructions:
//! - `xor_mask`: f^a(x) = f(x) xor (a . x) for a base target f; any two
//!   distinct masks disagree on exactly half the inputs.
//! - `bit_index`: the first ceil(log2 m) bits of x pick a 1-based position
//!   i(x); f^a(x) = a_{i(x)} when i(x) <= m, else 0.
//! - `rs_block`: the input space splits into 3n contiguous lexicographic
//!   blocks and f^k(x) is the block's bit of the encoded message k.

use crate::bits::BitString;
use crate::rscode::{codeword_bits, rs_encode, GfElement};
use crate::targets::{InputDistribution, TargetFunction};
use serde::Serialize;
use std::sync::Arc;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum ConceptError {
    #[error("width mismatch: {0}")]
    WidthMismatch(String),
    #[error("exhaustive verification capped at 2^16 concepts and 2^16 inputs, got {0}")]
    TooLarge(String),
    #[error("bad class parameters: {0}")]
    BadParams(String),
}

/// ceil(log2 m); the number of leading input bits that address a position.
pub fn index_bits(m: usize) -> usize {
    assert!(m >= 1);
    m.next_power_of_two().trailing_zeros() as usize
}

/// f(x) xor (alpha . x), the mask class member at alpha.
pub fn xor_mask_eval(
    f: &TargetFunction,
    alpha: &BitString,
    x: &BitString,
) -> Result<bool, ConceptError> {
    if alpha.width() != f.n() || x.width() != f.n() {
        return Err(ConceptError::WidthMismatch(format!(
            "target n={}, alpha {}, x {}",
            f.n(),
            alpha.width(),
            x.width()
        )));
    }
    Ok(f.eval(x) ^ alpha.dot(x))
}

/// alpha_{i(x)} when the 1-based index i(x) fits inside alpha, else 0.
/// i(x) reads the first ceil(log2 m) bits of x as a big-endian integer,
/// with 00...0 meaning i = 1.
pub fn bit_index_eval(alpha: &BitString, x: &BitString) -> bool {
    let m = alpha.width();
    let ell = index_bits(m);
    assert!(x.width() >= ell, "input shorter than the index prefix");
    let i = x.prefix(ell).to_uint() as usize + 1;
    if i <= m {
        alpha.get(i - 1)
    } else {
        false
    }
}

/// Contiguous equal-size lexicographic blocks over {0,1}^n; the last block
/// absorbs the remainder.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockPartition {
    n: usize,
    num_blocks: usize,
    block_size: u64,
}

impl BlockPartition {
    pub fn new(n: usize, num_blocks: usize) -> Result<Self, ConceptError> {
        assert!(n <= 32);
        let total = 1u64 << n;
        let block_size = total / num_blocks as u64;
        if block_size == 0 {
            return Err(ConceptError::BadParams(format!(
                "2^{n} inputs cannot fill {num_blocks} blocks"
            )));
        }
        Ok(BlockPartition { n, num_blocks, block_size })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn num_blocks(&self) -> usize {
        self.num_blocks
    }

    /// Inputs in block j; the last block also holds the remainder.
    pub fn block_len(&self, j: usize) -> u64 {
        assert!(j < self.num_blocks);
        if j + 1 == self.num_blocks {
            (1u64 << self.n) - self.block_size * (self.num_blocks as u64 - 1)
        } else {
            self.block_size
        }
    }

    pub fn block_of(&self, x: &BitString) -> usize {
        assert_eq!(x.width(), self.n);
        let j = (x.to_uint() / self.block_size) as usize;
        j.min(self.num_blocks - 1)
    }
}

/// Bit j of the encoded message, where j is the block containing x.
pub fn rs_block_eval(message: &[GfElement], blocks: &BlockPartition, x: &BitString) -> bool {
    let bits = codeword_bits(&rs_encode(message).expect("valid message"));
    assert_eq!(bits.width(), blocks.num_blocks(), "one block per codeword bit");
    bits.get(blocks.block_of(x))
}

/// One member of a class: the index alpha plus enough state to evaluate.
#[derive(Clone, Debug)]
pub struct Concept {
    alpha: BitString,
    n: usize,
    body: ConceptBody,
}

#[derive(Clone, Debug)]
enum ConceptBody {
    XorMask { target: Arc<TargetFunction> },
    BitIndex,
    RsBlock { code_bits: BitString, blocks: BlockPartition },
    Singleton { target: Arc<TargetFunction> },
}

impl Concept {
    pub fn alpha(&self) -> &BitString {
        &self.alpha
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eval(&self, x: &BitString) -> bool {
        assert_eq!(x.width(), self.n, "input width mismatch");
        match &self.body {
            ConceptBody::XorMask { target } => target.eval(x) ^ self.alpha.dot(x),
            ConceptBody::BitIndex => bit_index_eval(&self.alpha, x),
            ConceptBody::RsBlock { code_bits, blocks } => code_bits.get(blocks.block_of(x)),
            ConceptBody::Singleton { target } => target.eval(x),
        }
    }
}

/// A family of concepts indexed by alpha.
#[derive(Clone, Debug)]
pub enum ConceptClass {
    /// f^a = f xor (a . x); index set {0,1}^n.
    XorMask { target: Arc<TargetFunction> },
    /// Index set {0,1}^m over n-bit inputs.
    BitIndex { n: usize, m: usize },
    /// Index set: messages of `k` symbols over GF(2^degree), packed
    /// symbol-major little-endian into k*degree bits; n = k*degree.
    RsBlock { field_degree: u8, k: usize },
    /// One concept, indexed by the empty string.
    Singleton { target: Arc<TargetFunction> },
}

impl ConceptClass {
    pub fn xor_mask(target: TargetFunction) -> ConceptClass {
        ConceptClass::XorMask { target: Arc::new(target) }
    }

    pub fn singleton(target: TargetFunction) -> ConceptClass {
        ConceptClass::Singleton { target: Arc::new(target) }
    }

    pub fn bit_index(n: usize, m: usize) -> Result<ConceptClass, ConceptError> {
        if m < 1 || n < index_bits(m) {
            return Err(ConceptError::BadParams(format!(
                "bit_index needs n >= ceil(log2 m), got n={n} m={m}"
            )));
        }
        Ok(ConceptClass::BitIndex { n, m })
    }

    pub fn rs_block(field_degree: u8, k: usize) -> Result<ConceptClass, ConceptError> {
        if k < 1 {
            return Err(ConceptError::BadParams("k must be positive".to_string()));
        }
        if 3 * k > 1 << field_degree {
            return Err(ConceptError::BadParams(format!(
                "3k = {} evaluation points exceed GF(2^{field_degree})",
                3 * k
            )));
        }
        let n = k * field_degree as usize;
        // every codeword bit needs a nonempty block
        BlockPartition::new(n, 3 * n)?;
        Ok(ConceptClass::RsBlock { field_degree, k })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ConceptClass::XorMask { .. } => "xor_mask",
            ConceptClass::BitIndex { .. } => "bit_index",
            ConceptClass::RsBlock { .. } => "rs_block",
            ConceptClass::Singleton { .. } => "singleton",
        }
    }

    pub fn n(&self) -> usize {
        match self {
            ConceptClass::XorMask { target } => target.n(),
            ConceptClass::BitIndex { n, .. } => *n,
            ConceptClass::RsBlock { field_degree, k } => k * *field_degree as usize,
            ConceptClass::Singleton { target } => target.n(),
        }
    }

    /// Width of the index alpha.
    pub fn index_width(&self) -> usize {
        match self {
            ConceptClass::XorMask { target } => target.n(),
            ConceptClass::BitIndex { m, .. } => *m,
            ConceptClass::RsBlock { field_degree, k } => k * *field_degree as usize,
            ConceptClass::Singleton { .. } => 0,
        }
    }

    pub fn size(&self) -> u64 {
        1u64 << self.index_width()
    }

    pub fn params_json(&self) -> serde_json::Value {
        match self {
            ConceptClass::XorMask { target } => serde_json::json!({ "n": target.n() }),
            ConceptClass::BitIndex { n, m } => serde_json::json!({ "n": n, "m": m }),
            ConceptClass::RsBlock { field_degree, k } => {
                serde_json::json!({ "field_degree": field_degree, "k": k, "n": self.n() })
            }
            ConceptClass::Singleton { target } => serde_json::json!({ "n": target.n() }),
        }
    }

    /// The concept at a given index.
    pub fn concept(&self, alpha: &BitString) -> Result<Concept, ConceptError> {
        if alpha.width() != self.index_width() {
            return Err(ConceptError::WidthMismatch(format!(
                "alpha width {} for index width {}",
                alpha.width(),
                self.index_width()
            )));
        }
        let body = match self {
            ConceptClass::XorMask { target } => ConceptBody::XorMask { target: target.clone() },
            ConceptClass::BitIndex { .. } => ConceptBody::BitIndex,
            ConceptClass::RsBlock { field_degree, k } => {
                let message = unpack_message(alpha, *field_degree, *k);
                let code_bits = codeword_bits(&rs_encode(&message).expect("validated params"));
                let blocks = BlockPartition::new(self.n(), 3 * self.n())?;
                ConceptBody::RsBlock { code_bits, blocks }
            }
            ConceptClass::Singleton { target } => ConceptBody::Singleton { target: target.clone() },
        };
        Ok(Concept { alpha: alpha.clone(), n: self.n(), body })
    }

    /// Every concept, in lexicographic alpha order. Capped at 2^16.
    pub fn concepts(&self) -> Result<Vec<Concept>, ConceptError> {
        let w = self.index_width();
        if w > 16 {
            return Err(ConceptError::TooLarge(format!("2^{w} concepts")));
        }
        BitString::enumerate(w).map(|alpha| self.concept(&alpha)).collect()
    }
}

/// Message symbols from packed index bits, symbol-major little-endian,
/// mirroring the codeword bit layout.
fn unpack_message(alpha: &BitString, field_degree: u8, k: usize) -> Vec<GfElement> {
    let m = field_degree as usize;
    assert_eq!(alpha.width(), k * m);
    (0..k)
        .map(|s| {
            let mut v = 0u8;
            for i in 0..m {
                if alpha.get(s * m + i) {
                    v |= 1 << i;
                }
            }
            GfElement::new(v, field_degree)
        })
        .collect()
}

/// Average disagreement under the distribution; exact by support sweep.
pub fn pac_distance(c1: &Concept, c2: &Concept, dist: &InputDistribution) -> f64 {
    assert_eq!(c1.n(), c2.n(), "concepts over different input widths");
    assert!(dist.n() == c1.n(), "distribution width mismatch");
    assert!(c1.n() <= 16, "exact mode needs an enumerable support");
    let mut disagree = 0u64;
    let mut total = 0u64;
    match dist {
        InputDistribution::Uniform { n } => {
            for x in BitString::enumerate(*n) {
                total += 1;
                if c1.eval(&x) != c2.eval(&x) {
                    disagree += 1;
                }
            }
        }
        InputDistribution::PromiseUniform { support } => {
            for x in support {
                total += 1;
                if c1.eval(x) != c2.eval(x) {
                    disagree += 1;
                }
            }
        }
    }
    disagree as f64 / total as f64
}

/// Sampled estimate with a 95% normal-approximation confidence half-width,
/// for supports too large to sweep.
pub fn pac_distance_sampled<R: rand::Rng>(
    c1: &Concept,
    c2: &Concept,
    dist: &InputDistribution,
    rng: &mut R,
    trials: u64,
) -> (f64, f64) {
    assert_eq!(c1.n(), c2.n());
    assert!(trials > 0);
    let mut disagree = 0u64;
    for _ in 0..trials {
        let x = dist.sample(rng);
        if c1.eval(&x) != c2.eval(&x) {
            disagree += 1;
        }
    }
    let p = disagree as f64 / trials as f64;
    let half = 1.96 * (p * (1.0 - p) / trials as f64).sqrt();
    (p, half)
}

#[derive(Clone, Debug, Serialize)]
pub struct DistinctReport {
    pub class: String,
    pub params: serde_json::Value,
    pub min_fraction: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct SmoothReport {
    pub class: String,
    pub params: serde_json::Value,
    pub min_ratio: Option<f64>,
    pub threshold: f64,
    pub pass: bool,
}

/// Truth tables packed 64 inputs per word, lexicographic input order.
fn packed_tables(concepts: &[Concept], n: usize) -> Vec<Vec<u64>> {
    let words = (1usize << n).div_ceil(64);
    concepts
        .iter()
        .map(|c| {
            let mut t = vec![0u64; words];
            for (i, x) in BitString::enumerate(n).enumerate() {
                if c.eval(&x) {
                    t[i / 64] |= 1 << (i % 64);
                }
            }
            t
        })
        .collect()
}

/// Support restricted to the distribution, packed like the truth tables.
fn packed_support(dist: &InputDistribution, n: usize) -> Vec<u64> {
    let words = (1usize << n).div_ceil(64);
    match dist {
        InputDistribution::Uniform { .. } => {
            let mut mask = vec![u64::MAX; words];
            let extra = words * 64 - (1usize << n);
            if extra > 0 {
                *mask.last_mut().unwrap() >>= extra;
            }
            mask
        }
        InputDistribution::PromiseUniform { support } => {
            let mut mask = vec![0u64; words];
            for x in support {
                let i = x.to_uint() as usize;
                mask[i / 64] |= 1 << (i % 64);
            }
            mask
        }
    }
}

fn check_verifier_size(class: &ConceptClass) -> Result<(), ConceptError> {
    if class.index_width() > 16 {
        return Err(ConceptError::TooLarge(format!("2^{} concepts", class.index_width())));
    }
    if class.n() > 16 {
        return Err(ConceptError::TooLarge(format!("2^{} inputs", class.n())));
    }
    Ok(())
}

/// Minimum pairwise disagreement fraction vs the threshold c, uniform
/// inputs.
pub fn verify_c_distinct(class: &ConceptClass, c: f64) -> Result<DistinctReport, ConceptError> {
    verify_c_distinct_on(class, c, &InputDistribution::uniform(class.n()))
}

/// Same certificate restricted to a distribution's support; pass promise
/// support to count only promise inputs.
pub fn verify_c_distinct_on(
    class: &ConceptClass,
    c: f64,
    dist: &InputDistribution,
) -> Result<DistinctReport, ConceptError> {
    check_verifier_size(class)?;
    let concepts = class.concepts()?;
    let min = min_pair_disagreement(&concepts, class.n(), dist);
    Ok(DistinctReport {
        class: class.kind_name().to_string(),
        params: class.params_json(),
        min_fraction: min,
        threshold: c,
        pass: min.map_or(true, |f| f >= c),
    })
}

/// Shared sweep: None when there are no pairs (vacuous pass).
fn min_pair_disagreement(
    concepts: &[Concept],
    n: usize,
    dist: &InputDistribution,
) -> Option<f64> {
    if concepts.len() < 2 {
        return None;
    }
    let tables = packed_tables(concepts, n);
    let support = packed_support(dist, n);
    let total: u64 = support.iter().map(|w| w.count_ones() as u64).sum();
    assert!(total > 0, "empty support");
    let mut min_count = u64::MAX;
    for i in 0..tables.len() {
        for j in (i + 1)..tables.len() {
            let mut count = 0u64;
            for ((a, b), s) in tables[i].iter().zip(&tables[j]).zip(&support) {
                count += ((a ^ b) & s).count_ones() as u64;
                // this pair can no longer improve the minimum
                if count >= min_count {
                    break;
                }
            }
            min_count = min_count.min(count);
        }
    }
    Some(min_count as f64 / total as f64)
}

/// Minimum over pairs of E|f^a - f^a'| / d(a, a') with d the normalized
/// Hamming distance on indices, vs the threshold C. Uniform inputs.
pub fn verify_avg_smooth(class: &ConceptClass, cap: f64) -> Result<SmoothReport, ConceptError> {
    check_verifier_size(class)?;
    let concepts = class.concepts()?;
    let n = class.n();
    let m = class.index_width();
    let min_ratio = if concepts.len() < 2 {
        None
    } else {
        let tables = packed_tables(&concepts, n);
        let total = 1u64 << n;
        let mut min: f64 = f64::INFINITY;
        for i in 0..tables.len() {
            for j in (i + 1)..tables.len() {
                let d = concepts[i].alpha.hamming(&concepts[j].alpha) as f64 / m as f64;
                // count at which this pair's ratio reaches the current min
                let bound = (min * d * total as f64).ceil() as u64;
                let mut count = 0u64;
                for (a, b) in tables[i].iter().zip(&tables[j]) {
                    count += (a ^ b).count_ones() as u64;
                    if count >= bound {
                        break;
                    }
                }
                let ratio = (count as f64 / total as f64) / d;
                min = min.min(ratio);
            }
        }
        Some(min)
    };
    Ok(SmoothReport {
        class: class.kind_name().to_string(),
        params: class.params_json(),
        min_ratio,
        threshold: cap,
        pass: min_ratio.map_or(true, |r| r >= cap),
    })
}
