//! Reference identification algorithms for the three concept classes:
//! exact linear-algebra identification for xor masks, per-index majority
//! vote for bit-index concepts, and erasure-style nearest-codeword
//! decoding for the block-code class. Every learner is deterministic in
//! the dataset; the random string in the config is threaded only to keep
//! the identification signature uniform, so existential quantifiers over
//! it collapse to a single run.

use crate::bits::BitString;
use crate::circuit::{Circuit, CircuitBuilder};
use crate::concepts::{index_bits, BlockPartition, ConceptClass, ConceptError};
use crate::targets::TargetFunction;
use thiserror::Error;

/// Input-bit budget for learner circuits fed to the CNF pipeline.
pub const CIRCUIT_INPUT_CAP: usize = 96;

/// Default side thresholds; epsilon_c takes their minimum.
pub const DEFAULT_SIDE_EPSILON: f64 = 0.25;

#[derive(Error, Debug)]
pub enum LearnerError {
    #[error("dataset is malformed: {0}")]
    BadDataset(String),
    #[error("rs index space 2^{0} exceeds the 2^16 enumeration cap")]
    TooLarge(usize),
    #[error("no circuit form for learner kind {0}")]
    Unsupported(&'static str),
    #[error("learner circuit needs {0} input bits, cap is {CIRCUIT_INPUT_CAP}")]
    TooWide(usize),
    #[error(transparent)]
    Concept(#[from] ConceptError),
}

/// An ordered list of labeled examples with a lossless bitstring encoding:
/// sample ell occupies bits [ell*(n+1), (ell+1)*(n+1)), x first, label last.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    n: usize,
    samples: Vec<(BitString, bool)>,
}

impl Dataset {
    pub fn new(n: usize, samples: Vec<(BitString, bool)>) -> Result<Dataset, LearnerError> {
        if samples.is_empty() {
            return Err(LearnerError::BadDataset("need at least one sample".to_string()));
        }
        if let Some((x, _)) = samples.iter().find(|(x, _)| x.width() != n) {
            return Err(LearnerError::BadDataset(format!(
                "sample width {} in a width-{n} dataset",
                x.width()
            )));
        }
        Ok(Dataset { n, samples })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of samples, B.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[(BitString, bool)] {
        &self.samples
    }

    pub fn encode(&self) -> BitString {
        let mut bits = BitString::zeros(0);
        for (x, y) in &self.samples {
            bits = bits.concat(x);
            bits.push(*y);
        }
        bits
    }

    pub fn decode(n: usize, bits: &BitString) -> Result<Dataset, LearnerError> {
        let stride = n + 1;
        if bits.width() == 0 || bits.width() % stride != 0 {
            return Err(LearnerError::BadDataset(format!(
                "{} bits do not split into (x, y) records of {stride}",
                bits.width()
            )));
        }
        let samples = (0..bits.width() / stride)
            .map(|ell| {
                let off = ell * stride;
                (bits.slice(off, off + n), bits.get(off + n))
            })
            .collect();
        Dataset::new(n, samples)
    }

    /// One sample per line, `<x-bits> <y>`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (x, y) in &self.samples {
            s.push_str(&format!("{x} {}\n", if *y { '1' } else { '0' }));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Dataset, LearnerError> {
        let mut samples = Vec::new();
        let mut n: Option<usize> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(xs), Some(ys), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(LearnerError::BadDataset(format!(
                    "line {}: expected `<x-bits> <y>`",
                    idx + 1
                )));
            };
            let x = BitString::parse(xs)
                .map_err(|e| LearnerError::BadDataset(format!("line {}: {e}", idx + 1)))?;
            let y = match ys {
                "0" => false,
                "1" => true,
                other => {
                    return Err(LearnerError::BadDataset(format!(
                        "line {}: label {other} is not 0 or 1",
                        idx + 1
                    )))
                }
            };
            let expect = *n.get_or_insert(x.width());
            if x.width() != expect {
                return Err(LearnerError::BadDataset(format!(
                    "line {}: width {} after width {expect}",
                    idx + 1,
                    x.width()
                )));
            }
            samples.push((x, y));
        }
        let n = n.ok_or_else(|| LearnerError::BadDataset("no samples".to_string()))?;
        Dataset::new(n, samples)
    }
}

/// Output alphabet of every identifier. Invalid is a verdict, not an error.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LearnerVerdict {
    Identified(BitString),
    Invalid,
}

impl LearnerVerdict {
    pub fn identified(&self) -> Option<&BitString> {
        match self {
            LearnerVerdict::Identified(a) => Some(a),
            LearnerVerdict::Invalid => None,
        }
    }
}

/// Accuracy target, tie-break randomness, and side thresholds.
#[derive(Clone, Debug)]
pub struct LearnerConfig {
    pub epsilon: f64,
    pub r: BitString,
    pub epsilon1: f64,
    pub epsilon2: f64,
}

impl LearnerConfig {
    pub fn new(epsilon: f64) -> LearnerConfig {
        LearnerConfig::seeded(epsilon, BitString::zeros(0))
    }

    pub fn seeded(epsilon: f64, r: BitString) -> LearnerConfig {
        assert!(epsilon > 0.0 && epsilon < 0.5, "epsilon must sit in (0, 1/2)");
        LearnerConfig {
            epsilon,
            r,
            epsilon1: DEFAULT_SIDE_EPSILON,
            epsilon2: DEFAULT_SIDE_EPSILON,
        }
    }

    pub fn epsilon_c(&self) -> f64 {
        self.epsilon1.min(self.epsilon2)
    }
}

impl Default for LearnerConfig {
    fn default() -> LearnerConfig {
        LearnerConfig::new(1.0 / 3.0)
    }
}

/// Solves alpha . x_ell = y_ell xor f(x_ell) over GF(2). Free variables
/// go to zero, the lexicographically least completion. Invalid exactly
/// when the system is inconsistent, which is exactly when no mask concept
/// explains the dataset.
pub fn xor_mask_learn(
    t: &Dataset,
    _cfg: &LearnerConfig,
    f: &TargetFunction,
) -> LearnerVerdict {
    let n = t.n();
    assert_eq!(f.n(), n, "target width mismatch");
    assert!(n <= 64, "row masks are machine words");
    let mut rows: Vec<(u64, bool)> = t
        .samples()
        .iter()
        .map(|(x, y)| {
            let mut m = 0u64;
            for j in 0..n {
                if x.get(j) {
                    m |= 1 << j;
                }
            }
            (m, *y ^ f.eval(x))
        })
        .collect();

    let mut pivots: Vec<(usize, usize)> = Vec::new();
    let mut rank = 0;
    for col in 0..n {
        let Some(p) = (rank..rows.len()).find(|&i| rows[i].0 >> col & 1 == 1) else {
            continue;
        };
        rows.swap(rank, p);
        let (pm, pb) = rows[rank];
        for (i, row) in rows.iter_mut().enumerate() {
            if i != rank && row.0 >> col & 1 == 1 {
                row.0 ^= pm;
                row.1 ^= pb;
            }
        }
        pivots.push((rank, col));
        rank += 1;
    }
    // rows past the rank are fully eliminated; a surviving 1 there is 0 = 1
    if rows[rank..].iter().any(|&(m, b)| m == 0 && b) {
        return LearnerVerdict::Invalid;
    }

    let mut alpha = BitString::zeros(n);
    for &(r, c) in &pivots {
        // free columns are zero, so each pivot row reads off its parity
        if rows[r].1 {
            alpha.set(c, true);
        }
    }
    for (x, y) in t.samples() {
        assert_eq!(alpha.dot(x) ^ f.eval(x), *y, "solution must satisfy the system");
    }
    LearnerVerdict::Identified(alpha)
}

/// Majority vote per index; ties and unseen indices go to zero. Invalid
/// exactly when some sample claims a 1 at an out-of-range index, where
/// every concept in the class outputs 0.
pub fn bit_index_learn(t: &Dataset, m: usize, _cfg: &LearnerConfig) -> LearnerVerdict {
    let l = index_bits(m);
    assert!(t.n() >= l, "inputs too narrow for the index prefix");
    let mut ones = vec![0u32; m];
    let mut zeros = vec![0u32; m];
    for (x, y) in t.samples() {
        let i = x.prefix(l).to_uint() as usize + 1;
        if i > m {
            if *y {
                return LearnerVerdict::Invalid;
            }
            continue;
        }
        if *y {
            ones[i - 1] += 1;
        } else {
            zeros[i - 1] += 1;
        }
    }
    let alpha = BitString::from_bools((0..m).map(|i| ones[i] > zeros[i]).collect());
    LearnerVerdict::Identified(alpha)
}

/// Nearest-codeword decoder with the candidate table built once, for
/// callers that learn from many datasets of the same class.
pub struct RsDecoder {
    class: ConceptClass,
    blocks: BlockPartition,
    /// One input per block, the least element.
    reps: Vec<BitString>,
    /// (alpha, codeword bits indexed by block), in ascending alpha order.
    candidates: Vec<(BitString, BitString)>,
}

impl RsDecoder {
    pub fn new(field_degree: u8, k: usize) -> Result<RsDecoder, LearnerError> {
        let class = ConceptClass::rs_block(field_degree, k)?;
        let w = class.index_width();
        if w > 16 {
            return Err(LearnerError::TooLarge(w));
        }
        let n = class.n();
        let blocks = BlockPartition::new(n, 3 * n)?;
        let mut reps = Vec::with_capacity(blocks.num_blocks());
        let mut start = 0u64;
        for j in 0..blocks.num_blocks() {
            reps.push(BitString::from_uint(start, n));
            start += blocks.block_len(j);
        }
        let candidates = BitString::enumerate(w)
            .map(|alpha| {
                let c = class.concept(&alpha)?;
                let bits = BitString::from_bools(reps.iter().map(|r| c.eval(r)).collect());
                Ok((alpha, bits))
            })
            .collect::<Result<Vec<_>, LearnerError>>()?;
        Ok(RsDecoder { class, blocks, reps, candidates })
    }

    pub fn class(&self) -> &ConceptClass {
        &self.class
    }

    pub fn blocks(&self) -> &BlockPartition {
        &self.blocks
    }

    /// Exact consistency: conflicting labels inside one block rule out
    /// every candidate; otherwise some candidate must match each block
    /// that carries a sample.
    pub fn consistent(&self, t: &Dataset) -> bool {
        assert_eq!(t.n(), self.class.n(), "dataset width mismatch");
        let nb = self.blocks.num_blocks();
        let mut pinned: Vec<Option<bool>> = vec![None; nb];
        for (x, y) in t.samples() {
            let j = self.blocks.block_of(x);
            match pinned[j] {
                None => pinned[j] = Some(*y),
                Some(prev) if prev != *y => return false,
                Some(_) => {}
            }
        }
        self.candidates.iter().any(|(_, bits)| {
            pinned.iter().enumerate().all(|(j, p)| p.map_or(true, |v| bits.get(j) == v))
        })
    }

    pub fn block_representatives(&self) -> &[BitString] {
        &self.reps
    }

    /// Votes each sampled block, decodes to the candidate disagreeing with
    /// the fewest voted blocks (unvoted blocks are erasures, ties vote
    /// zero, the least alpha wins decode ties), then rejects the decode
    /// only if it contradicts every sample.
    pub fn learn(&self, t: &Dataset, _cfg: &LearnerConfig) -> LearnerVerdict {
        assert_eq!(t.n(), self.class.n(), "dataset width mismatch");
        let nb = self.blocks.num_blocks();
        let mut ones = vec![0u32; nb];
        let mut zeros = vec![0u32; nb];
        for (x, y) in t.samples() {
            let j = self.blocks.block_of(x);
            if *y {
                ones[j] += 1;
            } else {
                zeros[j] += 1;
            }
        }
        let mut best: Option<(u32, usize)> = None;
        for (ci, (_, bits)) in self.candidates.iter().enumerate() {
            let mut d = 0u32;
            for j in 0..nb {
                if ones[j] + zeros[j] > 0 && bits.get(j) != (ones[j] > zeros[j]) {
                    d += 1;
                }
            }
            if best.map_or(true, |(bd, _)| d < bd) {
                best = Some((d, ci));
            }
        }
        let (_, ci) = best.expect("candidate set is nonempty");
        let (alpha, bits) = &self.candidates[ci];
        let explains_any =
            t.samples().iter().any(|(x, y)| bits.get(self.blocks.block_of(x)) == *y);
        if explains_any {
            LearnerVerdict::Identified(alpha.clone())
        } else {
            LearnerVerdict::Invalid
        }
    }
}

pub fn rs_learn(
    t: &Dataset,
    field_degree: u8,
    k: usize,
    cfg: &LearnerConfig,
) -> Result<LearnerVerdict, LearnerError> {
    Ok(RsDecoder::new(field_degree, k)?.learn(t, cfg))
}

/// Dispatches to the reference learner for the class.
pub fn learn_for_class(
    class: &ConceptClass,
    t: &Dataset,
    cfg: &LearnerConfig,
) -> Result<LearnerVerdict, LearnerError> {
    match class {
        ConceptClass::XorMask { target } => Ok(xor_mask_learn(t, cfg, target)),
        ConceptClass::BitIndex { m, .. } => Ok(bit_index_learn(t, *m, cfg)),
        ConceptClass::RsBlock { field_degree, k } => rs_learn(t, *field_degree, *k, cfg),
        ConceptClass::Singleton { target } => {
            let ok = t.samples().iter().all(|(x, y)| target.eval(x) == *y);
            Ok(if ok { LearnerVerdict::Identified(BitString::zeros(0)) } else { LearnerVerdict::Invalid })
        }
    }
}

/// Exact consistency: does some concept of the class label every sample
/// correctly? Decided without enumeration, per class.
pub fn dataset_consistent(class: &ConceptClass, t: &Dataset) -> Result<bool, LearnerError> {
    match class {
        // linear system solvable over GF(2)
        ConceptClass::XorMask { target } => {
            let cfg = LearnerConfig::default();
            Ok(xor_mask_learn(t, &cfg, target).identified().is_some())
        }
        // consistent exactly when no index carries both labels and no
        // out-of-range input is labeled 1
        ConceptClass::BitIndex { m, .. } => {
            let l = index_bits(*m);
            let mut seen: Vec<Option<bool>> = vec![None; *m];
            for (x, y) in t.samples() {
                let i = x.prefix(l).to_uint() as usize + 1;
                if i > *m {
                    if *y {
                        return Ok(false);
                    }
                    continue;
                }
                match seen[i - 1] {
                    None => seen[i - 1] = Some(*y),
                    Some(prev) if prev != *y => return Ok(false),
                    Some(_) => {}
                }
            }
            Ok(true)
        }
        // consistent exactly when some candidate message explains every
        // pinned block; block label conflicts already rule all of them out
        ConceptClass::RsBlock { field_degree, k } => {
            let dec = RsDecoder::new(*field_degree, *k)?;
            Ok(dec.consistent(t))
        }
        ConceptClass::Singleton { target } => {
            Ok(t.samples().iter().all(|(x, y)| target.eval(x) == *y))
        }
    }
}

/// Learner with the verification contract: Invalid exactly when no concept
/// of the class labels the whole dataset, otherwise a consistent index.
pub fn verifiable_learn(
    class: &ConceptClass,
    t: &Dataset,
    cfg: &LearnerConfig,
) -> Result<LearnerVerdict, LearnerError> {
    if !dataset_consistent(class, t)? {
        return Ok(LearnerVerdict::Invalid);
    }
    let v = learn_for_class(class, t, cfg)?;
    debug_assert!(v.identified().is_some(), "consistent dataset must identify");
    Ok(v)
}

/// Circuit form of the bit-index learner: input groups "T" (the encoded
/// dataset, b records) and "r" (ignored by the vote, present so relation
/// builders can quantify over it), m output bits equal to the direct
/// learner's alpha-hat. The out-of-range Invalid verdict has no output
/// bit; relation builders conjoin that predicate themselves.
pub fn learner_as_circuit(
    class: &ConceptClass,
    b: usize,
    r_width: usize,
) -> Result<Circuit, LearnerError> {
    let ConceptClass::BitIndex { n, m } = class else {
        return Err(LearnerError::Unsupported(class.kind_name()));
    };
    let (n, m) = (*n, *m);
    assert!(b >= 1, "need at least one record");
    assert!(r_width >= 1, "the random group must be nonempty");
    let total = b * (n + 1) + r_width;
    if total > CIRCUIT_INPUT_CAP {
        return Err(LearnerError::TooWide(total));
    }
    let l = index_bits(m);
    let mut bld = CircuitBuilder::new();
    let t_wires = bld.input_group("T", b * (n + 1));
    let _r = bld.input_group("r", r_width);
    let mut alpha_out = Vec::with_capacity(m);
    for i in 0..m {
        let pat = BitString::from_uint(i as u64, l);
        let mut for_one = Vec::with_capacity(b);
        let mut for_zero = Vec::with_capacity(b);
        for ell in 0..b {
            let base = ell * (n + 1);
            let hit = bld.eq_const(&t_wires[base..base + l], &pat);
            let y = t_wires[base + n];
            for_one.push(bld.and(hit, y));
            let ny = bld.not(y);
            for_zero.push(bld.and(hit, ny));
        }
        alpha_out.push(bld.popcount_gt(&for_one, &for_zero));
    }
    Ok(bld.finish(alpha_out))
}

/// Fraction of seeded trials in which learning b uniform samples of a
/// random concept lands within epsilon of the truth.
pub fn pac_success_rate(
    class: &ConceptClass,
    b: usize,
    epsilon: f64,
    trials: u32,
    seed: u64,
) -> Result<f64, LearnerError> {
    use crate::concepts::pac_distance;
    use crate::targets::InputDistribution;
    use rand::SeedableRng;

    let n = class.n();
    assert!(n <= 16, "exact distances need an enumerable input space");
    let dist = InputDistribution::uniform(n);
    let cfg = LearnerConfig::default();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut successes = 0u32;
    for _ in 0..trials {
        let truth_alpha = BitString::random(&mut rng, class.index_width());
        let truth = class.concept(&truth_alpha)?;
        let samples = (0..b)
            .map(|_| {
                let x = BitString::random(&mut rng, n);
                let y = truth.eval(&x);
                (x, y)
            })
            .collect();
        let t = Dataset::new(n, samples)?;
        if let LearnerVerdict::Identified(alpha) = learn_for_class(class, &t, &cfg)? {
            let guess = class.concept(&alpha)?;
            if pac_distance(&guess, &truth, &dist) <= epsilon {
                successes += 1;
            }
        }
    }
    Ok(f64::from(successes) / f64::from(trials))
}

/// Smallest sample count whose measured success rate reaches 1 - delta,
/// scanning up to b_cap. None when the cap is exhausted.
pub fn measure_b0(
    class: &ConceptClass,
    epsilon: f64,
    delta: f64,
    trials: u32,
    seed: u64,
    b_cap: usize,
) -> Result<Option<usize>, LearnerError> {
    for b in 1..=b_cap {
        if pac_success_rate(class, b, epsilon, trials, seed.wrapping_add(b as u64))?
            >= 1.0 - delta
        {
            return Ok(Some(b));
        }
    }
    Ok(None)
}
