//! Evaluators recovered from samplers and identifiers by inversion.
//!
//! Three constructions share one shape: a generator (a sampler emitting
//! labeled examples, or an identifier mapping datasets to indices) is run
//! backwards through the SAT oracle, and the preimage is converted into a
//! label for a chosen input. The module also houses the dataset-acceptance
//! wrapper that turns an identifier into one with a per-dataset mislabel
//! budget, the sampler that draws accepted datasets addressing a fixed
//! input, and the success accounting shared by the experiments.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::bits::BitString;
use crate::circuit::{Circuit, CircuitBuilder, CircuitError};
use crate::concepts::{index_bits, Concept, ConceptClass, ConceptError};
use crate::learners::{
    bit_index_learn, dataset_consistent, learn_for_class, learner_as_circuit, verifiable_learn,
    Dataset, LearnerConfig, LearnerError, LearnerVerdict,
};
use crate::oracle::{OracleError, OracleStats, SatOracle, SolverBackend};
use crate::samplers::{Sampler, SamplerError};
use crate::witness::{RelationInstance, WitnessError, WitnessSampler};

/// Widest dataset encoding the enumeration routes will sweep, in bits.
pub const DATASET_ENUM_CAP: usize = 20;

/// Bound on choose(beta*b, b) times the tie-string count for the literal
/// subset scan inside the acceptance wrapper.
pub const SUBSET_SCAN_CAP: u64 = 1 << 22;

/// Fresh example-set draws before an identifier inversion gives up on
/// finding one that the target index explains.
pub const REDRAW_CAP: usize = 64;

/// Proposals per accepted-dataset draw before the rejection sampler stalls.
pub const PROPOSAL_CAP: usize = 200_000;

/// Witness width allowed for identifier inversion relations. Wider than
/// the sampler-inversion default because the witness carries labels and a
/// tie string rather than a single random string.
pub const IDENT_WITNESS_CAP: usize = 48;

#[derive(Error, Debug)]
pub enum ReductionError {
    /// Both candidate labels behave the same on the extended dataset, so
    /// the consistency probe carries no information about the input.
    #[error("consistency probe is uninformative: {0}")]
    Ambiguous(&'static str),
    #[error("search space too large: {0}")]
    TooLarge(String),
    #[error("bad construction parameters: {0}")]
    BadParams(String),
    #[error(transparent)]
    Witness(#[from] WitnessError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Learner(#[from] LearnerError),
    #[error(transparent)]
    Concept(#[from] ConceptError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

/// Errors that mean "this trial produced no answer" rather than a broken
/// construction. The accounting records them as abstentions.
pub fn is_abstention(e: &ReductionError) -> bool {
    matches!(
        e,
        ReductionError::Ambiguous(_)
            | ReductionError::Witness(WitnessError::NoWitness)
            | ReductionError::Witness(WitnessError::SamplerStall)
    )
}

/// Recovers some r with sampler(r) emitting x, one oracle query per random
/// bit. Each query asks whether the current prefix still extends to a full
/// preimage, trying the 1 branch first.
pub fn prefix_search(
    sampler: &Sampler,
    x: &BitString,
    oracle: &mut SatOracle,
) -> Result<BitString, ReductionError> {
    assert_eq!(x.width(), sampler.n(), "input width mismatch");
    let rho = sampler.r_width();
    let mut u = BitString::zeros(0);
    for _ in 0..rho {
        let mut cand = u.clone();
        cand.push(true);
        if oracle.prefix_extends(sampler.program(), x, &cand)? {
            u = cand;
        } else {
            u.push(false);
        }
    }
    // a run of negative answers can also mean x has no preimage at all;
    // the forward run separates the two cases
    if &sampler.run(&u).0 == x {
        Ok(u)
    } else {
        Err(ReductionError::Witness(WitnessError::NoWitness))
    }
}

/// Relation circuit for "the sampler emits x": instance = x, witness = r,
/// label output unconstrained.
pub fn emission_relation(sampler: &Sampler) -> Result<Circuit, ReductionError> {
    let n = sampler.n();
    let mut cb = CircuitBuilder::new();
    let inst = cb.input_group("instance", n);
    let wit = cb.input_group("witness", sampler.r_width());
    let outs = cb.append_circuit(sampler.program(), &[("r", &wit)])?;
    let mut eq = Vec::with_capacity(n);
    for i in 0..n {
        let d = cb.xor(outs[i], inst[i]);
        eq.push(cb.not(d));
    }
    let ok = cb.and_chain(&eq);
    Ok(cb.finish(vec![ok]))
}

enum Body {
    ExactRg {
        sampler: Sampler,
    },
    ApproxRg {
        sampler: Sampler,
        votes: u32,
        // per-input witness samplers; support scans are the dominant cost
        cache: HashMap<BitString, WitnessSampler>,
    },
    VerifiableIdent {
        class: ConceptClass,
        alpha: BitString,
        b: usize,
        r_width: usize,
        cfg: LearnerConfig,
    },
    Advice {
        class: ConceptClass,
        advice: Vec<(BitString, bool)>,
    },
}

/// A label heuristic assembled from an inverted generator. Owns its oracle
/// so query counts attribute to the construction under test.
pub struct EvaluatorUnderTest {
    construction: &'static str,
    oracle: SatOracle,
    body: Body,
}

impl EvaluatorUnderTest {
    /// Short name of the construction ("exact_rg", "approx_rg",
    /// "verifiable_ident", "advice").
    pub fn construction(&self) -> &'static str {
        self.construction
    }

    pub fn oracle_stats(&self) -> OracleStats {
        self.oracle.stats()
    }

    /// One evaluation. Deterministic in (x, seed); abstention errors are
    /// the caller's to count, anything else is a broken construction.
    pub fn eval(&mut self, x: &BitString, seed: u64) -> Result<bool, ReductionError> {
        let EvaluatorUnderTest { oracle, body, .. } = self;
        match body {
            Body::ExactRg { sampler } => {
                let r = prefix_search(sampler, x, oracle)?;
                Ok(sampler.run(&r).1)
            }
            Body::ApproxRg { sampler, votes, cache } => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                if !cache.contains_key(x) {
                    let rel = emission_relation(sampler)?;
                    let inst = RelationInstance::new(rel, x.clone())?;
                    let ws = WitnessSampler::configured(
                        inst,
                        oracle,
                        crate::witness::DEFAULT_LIST_CAP,
                        crate::witness::DEFAULT_MAX_WIDTH,
                    )?;
                    cache.insert(x.clone(), ws);
                }
                let ws = &cache[x];
                let mut ones = 0u32;
                for _ in 0..*votes {
                    match ws.draw(oracle, &mut rng) {
                        Ok(r) => {
                            if sampler.run(&r).1 {
                                ones += 1;
                            }
                        }
                        // no preimage at all: answer by coin, documented
                        // as the out-of-image convention
                        Err(WitnessError::NoWitness) => return Ok(rng.gen()),
                        Err(e) => return Err(e.into()),
                    }
                }
                Ok(2 * ones > *votes)
            }
            Body::VerifiableIdent { class, alpha, b, r_width, cfg } => {
                let n = class.n();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for _ in 0..REDRAW_CAP {
                    let xs: Vec<BitString> =
                        (0..*b).map(|_| BitString::random(&mut rng, n)).collect();
                    let wseed = rng.gen::<u64>();
                    match invert_identifier(class, &xs, alpha, *r_width, cfg, oracle, wseed) {
                        Ok((y, _r)) => {
                            let t: Vec<(BitString, bool)> = xs
                                .iter()
                                .cloned()
                                .zip((0..*b).map(|i| y.get(i)))
                                .collect();
                            return check_consistency(class, x, &t);
                        }
                        Err(ReductionError::Witness(WitnessError::NoWitness)) => continue,
                        Err(e) => return Err(e),
                    }
                }
                Err(ReductionError::Witness(WitnessError::NoWitness))
            }
            Body::Advice { class, advice } => check_consistency(class, x, advice),
        }
    }
}

/// Evaluator from an exact sampler: walk the oracle down the random-string
/// prefix tree, then read the label off the preimage.
pub fn eval_via_exact_rg(
    sampler: Sampler,
    backend: SolverBackend,
) -> Result<EvaluatorUnderTest, ReductionError> {
    if sampler.declared_epsilon() != 0.0 {
        return Err(ReductionError::BadParams(format!(
            "exact construction needs a zero-error sampler, declared {}",
            sampler.declared_epsilon()
        )));
    }
    Ok(EvaluatorUnderTest {
        construction: "exact_rg",
        oracle: SatOracle::new(backend),
        body: Body::ExactRg { sampler },
    })
}

/// Evaluator from an approximate sampler: draw several near-uniform
/// preimages of x and take the majority label. Inputs outside the image
/// are answered by a seeded coin.
pub fn eval_via_approx_rg(
    sampler: Sampler,
    votes: u32,
    backend: SolverBackend,
) -> Result<EvaluatorUnderTest, ReductionError> {
    if votes == 0 || votes % 2 == 0 {
        return Err(ReductionError::BadParams(format!("vote count must be odd, got {votes}")));
    }
    Ok(EvaluatorUnderTest {
        construction: "approx_rg",
        oracle: SatOracle::new(backend),
        body: Body::ApproxRg { sampler, votes, cache: HashMap::new() },
    })
}

/// Evaluator from an identifier: draw a fresh example set, invert the
/// identifier to a label assignment the target index explains, then probe
/// the set's consistency with each candidate label of x.
pub fn eval_via_verifiable_ident(
    class: ConceptClass,
    alpha: BitString,
    b: usize,
    r_width: usize,
    cfg: LearnerConfig,
    backend: SolverBackend,
) -> Result<EvaluatorUnderTest, ReductionError> {
    if alpha.width() != class.index_width() {
        return Err(ReductionError::BadParams(format!(
            "index width {} does not fit the class ({})",
            alpha.width(),
            class.index_width()
        )));
    }
    if b == 0 || r_width == 0 {
        return Err(ReductionError::BadParams("need b >= 1 and r_width >= 1".to_string()));
    }
    Ok(EvaluatorUnderTest {
        construction: "verifiable_ident",
        oracle: SatOracle::new(backend),
        body: Body::VerifiableIdent { class, alpha, b, r_width, cfg },
    })
}

/// Evaluator from fixed advice: a stored example set probed for
/// consistency against each candidate label of x.
pub fn advice_evaluator(
    class: ConceptClass,
    advice: Vec<(BitString, bool)>,
) -> Result<EvaluatorUnderTest, ReductionError> {
    let n = class.n();
    if advice.iter().any(|(x, _)| x.width() != n) {
        return Err(ReductionError::BadParams("advice width mismatch".to_string()));
    }
    Ok(EvaluatorUnderTest {
        construction: "advice",
        oracle: SatOracle::new(SolverBackend::Builtin),
        body: Body::Advice { class, advice },
    })
}

/// Relation circuit for "the identifier outputs alpha on (X, Y, r)" with X
/// baked in as constants: instance = alpha, witness = Y then r. The vote
/// circuit is conjoined with exact consistency of the labeled set, so a
/// witness is exactly a dataset the verifying identifier maps to alpha.
pub fn verifiable_ident_relation(
    class: &ConceptClass,
    xs: &[BitString],
    r_width: usize,
) -> Result<Circuit, ReductionError> {
    let ConceptClass::BitIndex { n, m } = class else {
        return Err(ReductionError::Learner(LearnerError::Unsupported(class.kind_name())));
    };
    let (n, m) = (*n, *m);
    let b = xs.len();
    assert!(b >= 1, "need at least one record");
    assert!(r_width >= 1, "tie-string group must be nonempty");
    let learner = learner_as_circuit(class, b, r_width)?;
    let l = index_bits(m);
    let mut cb = CircuitBuilder::new();
    let inst = cb.input_group("instance", m);
    let wit = cb.input_group("witness", b + r_width);
    let (ys, r) = wit.split_at(b);
    // dataset wires in encode order: x bits then the label, per record
    let mut t_wires = Vec::with_capacity(b * (n + 1));
    for (rec, x) in xs.iter().enumerate() {
        assert_eq!(x.width(), n, "record width mismatch");
        for i in 0..n {
            t_wires.push(cb.constant(x.get(i)));
        }
        t_wires.push(ys[rec]);
    }
    let alpha_hat = cb.append_circuit(&learner, &[("T", &t_wires), ("r", r)])?;
    let mut eq = Vec::with_capacity(m);
    for i in 0..m {
        let d = cb.xor(alpha_hat[i], inst[i]);
        eq.push(cb.not(d));
    }
    let vote_ok = cb.and_chain(&eq);
    // indices are fixed by the records, so inconsistency reduces to a
    // label disagreement inside an index or a 1 on an out-of-range input
    let idx: Vec<usize> = xs.iter().map(|x| x.prefix(l).to_uint() as usize + 1).collect();
    let mut bad = Vec::new();
    for a in 0..b {
        if idx[a] > m {
            bad.push(ys[a]);
            continue;
        }
        for c in (a + 1)..b {
            if idx[c] == idx[a] {
                bad.push(cb.xor(ys[a], ys[c]));
            }
        }
    }
    let any_bad = cb.or_chain(&bad);
    let consistent = cb.not(any_bad);
    let out = cb.and(vote_ok, consistent);
    Ok(cb.finish(vec![out]))
}

/// Every label assignment Y that makes the verifying identifier output
/// alpha on the fixed inputs, by sweeping all 2^b assignments.
pub fn enumerate_label_witnesses(
    class: &ConceptClass,
    xs: &[BitString],
    alpha: &BitString,
    cfg: &LearnerConfig,
) -> Result<Vec<BitString>, ReductionError> {
    let b = xs.len();
    if b > DATASET_ENUM_CAP {
        return Err(ReductionError::TooLarge(format!("2^{b} label assignments")));
    }
    let n = class.n();
    let mut out = Vec::new();
    for y in BitString::enumerate(b) {
        let samples: Vec<(BitString, bool)> =
            xs.iter().cloned().zip((0..b).map(|i| y.get(i))).collect();
        let t = Dataset::new(n, samples)?;
        if verifiable_learn(class, &t, cfg)? == LearnerVerdict::Identified(alpha.clone()) {
            out.push(y);
        }
    }
    Ok(out)
}

/// One near-uniform (Y, r) with the verifying identifier mapping the fixed
/// inputs labeled by Y to alpha. Classes with a vote circuit go through
/// the oracle; the rest enumerate label assignments directly.
pub fn invert_identifier(
    class: &ConceptClass,
    xs: &[BitString],
    alpha: &BitString,
    r_width: usize,
    cfg: &LearnerConfig,
    oracle: &mut SatOracle,
    seed: u64,
) -> Result<(BitString, BitString), ReductionError> {
    let b = xs.len();
    if matches!(class, ConceptClass::BitIndex { .. }) {
        let rel = verifiable_ident_relation(class, xs, r_width)?;
        let inst = RelationInstance::new(rel, alpha.clone())?;
        let ws = WitnessSampler::configured(inst, oracle, 0, IDENT_WITNESS_CAP)?;
        let w = ws.sample(oracle, seed)?;
        Ok((w.prefix(b), w.slice(b, w.width())))
    } else {
        let wits = enumerate_label_witnesses(class, xs, alpha, cfg)?;
        if wits.is_empty() {
            return Err(ReductionError::Witness(WitnessError::NoWitness));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y = wits[rng.gen_range(0..wits.len())].clone();
        let r = BitString::random(&mut rng, r_width);
        Ok((y, r))
    }
}

/// Labels x by probing which candidate label keeps the example set
/// explainable: 1 exactly when the set extended by (x, 0) is rejected.
/// The reference identifiers are deterministic, so the rejection question
/// under the all-zeros tie string is a pure consistency question.
pub fn check_consistency(
    class: &ConceptClass,
    x: &BitString,
    t: &[(BitString, bool)],
) -> Result<bool, ReductionError> {
    let n = class.n();
    assert_eq!(x.width(), n, "input width mismatch");
    let mut with0 = vec![(x.clone(), false)];
    with0.extend_from_slice(t);
    let mut with1 = vec![(x.clone(), true)];
    with1.extend_from_slice(t);
    let rejected0 = !dataset_consistent(class, &Dataset::new(n, with0)?)?;
    let rejected1 = !dataset_consistent(class, &Dataset::new(n, with1)?)?;
    match (rejected0, rejected1) {
        (true, false) => Ok(true),
        (false, true) => Ok(false),
        (false, false) => Err(ReductionError::Ambiguous("either label extends the dataset")),
        (true, true) => Err(ReductionError::Ambiguous("no label extends the dataset")),
    }
}

fn choose_capped(n: u64, k: u64, cap: u64) -> Option<u64> {
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 1..=k {
        c = c * (n - k + i) as u128 / i as u128;
        if c > cap as u128 {
            return None;
        }
    }
    Some(c as u64)
}

/// Visits every k-subset of 0..n in lexicographic order until the visitor
/// returns true. Returns whether any subset fired.
fn any_combination<F: FnMut(&[usize]) -> bool>(n: usize, k: usize, mut f: F) -> bool {
    if k > n {
        return false;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if f(&idx) {
            return true;
        }
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return false;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// An identifier wrapped with dataset acceptance: it rejects any dataset
/// of size beta * base_b containing a base_b-subset on which the
/// label-flipped identifier lands near the complement of the vote. An
/// accepted dataset then carries fewer than base_b mislabels, a fraction
/// below 1/beta of the whole.
pub struct ApproxVerifiable {
    class: ConceptClass,
    base_b: usize,
    beta: usize,
}

impl ApproxVerifiable {
    /// Classes route by their index geometry: well-separated classes get
    /// the exact complement test, the bit-index class gets the distance
    /// gate. The block-code class fits neither precondition at this scale
    /// (closest pair under 1/3 apart, index metric not vote-compatible).
    pub fn new(class: ConceptClass, base_b: usize, beta: usize) -> Result<Self, ReductionError> {
        if base_b == 0 || beta == 0 {
            return Err(ReductionError::BadParams("need base_b >= 1 and beta >= 1".to_string()));
        }
        if matches!(class, ConceptClass::RsBlock { .. }) {
            return Err(ReductionError::Learner(LearnerError::Unsupported("rs_block")));
        }
        let size = (beta * base_b) as u64;
        // the reference identifiers are deterministic, so the tie-string
        // factor in the scan bound is 1
        if choose_capped(size, base_b as u64, SUBSET_SCAN_CAP).is_none() {
            return Err(ReductionError::TooLarge(format!(
                "choose({size}, {base_b}) subsets exceed {SUBSET_SCAN_CAP}"
            )));
        }
        Ok(ApproxVerifiable { class, base_b, beta })
    }

    pub fn class(&self) -> &ConceptClass {
        &self.class
    }

    pub fn base_b(&self) -> usize {
        self.base_b
    }

    pub fn beta(&self) -> usize {
        self.beta
    }

    /// Accepted datasets have this many records.
    pub fn dataset_size(&self) -> usize {
        self.beta * self.base_b
    }

    /// Mislabels an accepted dataset may carry: size / beta.
    pub fn budget(&self) -> usize {
        self.base_b
    }

    /// Records whose label disagrees with the indexed concept.
    pub fn mislabel_count(
        &self,
        alpha: &BitString,
        t: &Dataset,
    ) -> Result<usize, ReductionError> {
        let c = self.class.concept(alpha)?;
        Ok(t.samples().iter().filter(|(x, y)| c.eval(x) != *y).count())
    }

    /// The acceptance gate. For well-separated classes a fully mislabeled
    /// base-size subset exists exactly when the mislabel count reaches the
    /// base size, so the subset scan collapses to a count.
    pub fn rejects(
        &self,
        alpha: &BitString,
        t: &Dataset,
        cfg: &LearnerConfig,
    ) -> Result<bool, ReductionError> {
        match &self.class {
            ConceptClass::XorMask { .. } | ConceptClass::Singleton { .. } => {
                Ok(self.mislabel_count(alpha, t)? >= self.base_b)
            }
            ConceptClass::BitIndex { .. } => self.literal_scan_rejects(alpha, t, cfg),
            ConceptClass::RsBlock { .. } => unreachable!("rejected at construction"),
        }
    }

    /// The gate by literal subset scan, kept as the reference for the
    /// counting shortcut and as the only implementation of the distance
    /// gate. A subset fires when the label-flipped identifier lands within
    /// a third of the vote in the index metric; for well-separated classes
    /// that means the flipped subset is consistent with the complement,
    /// i.e. every record in it is mislabeled.
    pub fn literal_scan_rejects(
        &self,
        alpha: &BitString,
        t: &Dataset,
        cfg: &LearnerConfig,
    ) -> Result<bool, ReductionError> {
        let samples = t.samples();
        let size = samples.len();
        match &self.class {
            ConceptClass::XorMask { .. } | ConceptClass::Singleton { .. } => {
                let c = self.class.concept(alpha)?;
                Ok(any_combination(size, self.base_b, |pick| {
                    pick.iter().all(|&i| {
                        let (x, y) = &samples[i];
                        c.eval(x) != *y
                    })
                }))
            }
            ConceptClass::BitIndex { m, .. } => {
                let m = *m;
                let n = t.n();
                Ok(any_combination(size, self.base_b, |pick| {
                    let flipped: Vec<(BitString, bool)> = pick
                        .iter()
                        .map(|&i| {
                            let (x, y) = &samples[i];
                            (x.clone(), !*y)
                        })
                        .collect();
                    let t_b = Dataset::new(n, flipped).expect("subset is nonempty");
                    match bit_index_learn(&t_b, m, cfg) {
                        LearnerVerdict::Identified(ah) => 3 * ah.hamming(alpha) <= m,
                        LearnerVerdict::Invalid => false,
                    }
                }))
            }
            ConceptClass::RsBlock { .. } => unreachable!("rejected at construction"),
        }
    }

    /// Base identification then the acceptance gate.
    pub fn learn(
        &self,
        t: &Dataset,
        cfg: &LearnerConfig,
    ) -> Result<LearnerVerdict, ReductionError> {
        if t.len() != self.dataset_size() {
            return Err(ReductionError::BadParams(format!(
                "dataset size {} does not match beta * base_b = {}",
                t.len(),
                self.dataset_size()
            )));
        }
        let v = learn_for_class(&self.class, t, cfg)?;
        let Some(alpha) = v.identified() else {
            return Ok(LearnerVerdict::Invalid);
        };
        let alpha = alpha.clone();
        if self.rejects(&alpha, t, cfg)? {
            Ok(LearnerVerdict::Invalid)
        } else {
            Ok(LearnerVerdict::Identified(alpha))
        }
    }
}

/// Every dataset of the wrapper's size that it maps to alpha, by sweeping
/// the full encoding space. Feasible only for tiny shapes; the exact
/// accounting oracle for the sampled routes.
pub fn enumerate_accepted_datasets(
    lp: &ApproxVerifiable,
    alpha: &BitString,
    cfg: &LearnerConfig,
) -> Result<Vec<Dataset>, ReductionError> {
    let n = lp.class().n();
    let bits = lp.dataset_size() * (n + 1);
    if bits > DATASET_ENUM_CAP {
        return Err(ReductionError::TooLarge(format!("2^{bits} dataset encodings")));
    }
    let mut out = Vec::new();
    for v in BitString::enumerate(bits) {
        let t = Dataset::decode(n, &v)?;
        if lp.learn(&t, cfg)? == LearnerVerdict::Identified(alpha.clone()) {
            out.push(t);
        }
    }
    Ok(out)
}

/// One uniform draw from the accepted datasets that mention x and map to
/// alpha, by rejection. Well-separated classes only accept exactly
/// labeled datasets, so proposals are drawn already labeled by alpha;
/// other classes propose labels uniformly.
pub fn m_alpha_draw<R: Rng>(
    lp: &ApproxVerifiable,
    alpha: &BitString,
    x: &BitString,
    cfg: &LearnerConfig,
    rng: &mut R,
) -> Result<Dataset, ReductionError> {
    let n = lp.class().n();
    assert_eq!(x.width(), n, "input width mismatch");
    let size = lp.dataset_size();
    let consistent_only =
        matches!(lp.class(), ConceptClass::XorMask { .. } | ConceptClass::Singleton { .. });
    let concept = lp.class().concept(alpha)?;
    for _ in 0..PROPOSAL_CAP {
        let mut samples = Vec::with_capacity(size);
        let mut mentions_x = false;
        for _ in 0..size {
            let xi = BitString::random(rng, n);
            mentions_x |= &xi == x;
            let yi = if consistent_only { concept.eval(&xi) } else { rng.gen() };
            samples.push((xi, yi));
        }
        if !mentions_x {
            continue;
        }
        let t = Dataset::new(n, samples)?;
        if lp.learn(&t, cfg)? == LearnerVerdict::Identified(alpha.clone()) {
            return Ok(t);
        }
    }
    Err(ReductionError::Witness(WitnessError::SamplerStall))
}

/// Labels x by drawing an accepted dataset mentioning it and reading off
/// the label of the first record that matches.
pub fn m_alpha_eval(
    lp: &ApproxVerifiable,
    alpha: &BitString,
    x: &BitString,
    cfg: &LearnerConfig,
    seed: u64,
) -> Result<bool, ReductionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let t = m_alpha_draw(lp, alpha, x, cfg, &mut rng)?;
    let (_, y) = t
        .samples()
        .iter()
        .find(|(xi, _)| xi == x)
        .expect("draw mentions x by construction");
    Ok(*y)
}

/// Per-input trial tally. Success counts only answered trials; an input
/// whose trials all abstain scores zero.
#[derive(Clone, Debug, Serialize)]
pub struct XTally {
    pub x: String,
    pub correct: u32,
    pub wrong: u32,
    pub abstained: u32,
}

impl XTally {
    pub fn success(&self) -> f64 {
        let answered = self.correct + self.wrong;
        if answered == 0 {
            0.0
        } else {
            f64::from(self.correct) / f64::from(answered)
        }
    }
}

/// Success accounting over a sweep of inputs: the measured fraction of
/// inputs the heuristic gets right too rarely, against a fixed bound.
#[derive(Clone, Debug, Serialize)]
pub struct HeuristicErrorReport {
    pub construction: String,
    pub trials_per_x: u32,
    pub success_threshold: f64,
    pub bound: f64,
    pub fraction_bad: f64,
    pub abstain_rate: f64,
    pub pass: bool,
    pub per_x: Vec<XTally>,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stable per-trial seed from (run seed, input ordinal, trial ordinal).
pub fn trial_seed(seed: u64, x_ord: u64, trial: u64) -> u64 {
    splitmix(seed ^ splitmix(x_ord ^ splitmix(trial)))
}

/// Runs the evaluator trials-per-input times across the sweep and scores
/// it against the truth concept. Inputs with success probability below
/// the threshold count as bad; pass means their fraction stays within the
/// bound. Abstentions are reported, not silently dropped.
pub fn measure_heuristic_error(
    ev: &mut EvaluatorUnderTest,
    truth: &Concept,
    xs: &[BitString],
    trials: u32,
    success_threshold: f64,
    bound: f64,
    seed: u64,
) -> Result<HeuristicErrorReport, ReductionError> {
    assert!(!xs.is_empty(), "need at least one input");
    let mut per_x = Vec::with_capacity(xs.len());
    let mut abstained_total = 0u64;
    for (xi, x) in xs.iter().enumerate() {
        let want = truth.eval(x);
        let mut tally = XTally { x: x.to_string(), correct: 0, wrong: 0, abstained: 0 };
        for t in 0..trials {
            match ev.eval(x, trial_seed(seed, xi as u64, u64::from(t))) {
                Ok(y) if y == want => tally.correct += 1,
                Ok(_) => tally.wrong += 1,
                Err(e) if is_abstention(&e) => tally.abstained += 1,
                Err(e) => return Err(e),
            }
        }
        abstained_total += u64::from(tally.abstained);
        per_x.push(tally);
    }
    let bad = per_x.iter().filter(|t| t.success() < success_threshold).count();
    let fraction_bad = bad as f64 / per_x.len() as f64;
    Ok(HeuristicErrorReport {
        construction: ev.construction().to_string(),
        trials_per_x: trials,
        success_threshold,
        bound,
        fraction_bad,
        abstain_rate: abstained_total as f64 / (xs.len() as u64 * u64::from(trials)) as f64,
        pass: fraction_bad <= bound,
        per_x,
    })
}

/// Probability that a b-record uniform example set separates two concepts
/// at distance eps: 1 - (1 - eps)^b.
pub fn predicted_validity(eps: f64, b: u32) -> f64 {
    1.0 - (1.0 - eps).powi(b as i32)
}

/// Measured fraction of b-record uniform input draws on which the two
/// concepts disagree somewhere.
pub fn detection_rate(c1: &Concept, c2: &Concept, b: u32, draws: u32, seed: u64) -> f64 {
    assert_eq!(c1.n(), c2.n(), "concept width mismatch");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hit = 0u32;
    for _ in 0..draws {
        let mut separated = false;
        for _ in 0..b {
            let x = BitString::random(&mut rng, c1.n());
            separated |= c1.eval(&x) != c2.eval(&x);
        }
        if separated {
            hit += 1;
        }
    }
    f64::from(hit) / f64::from(draws)
}

/// Records per example set so that a concept eps-far from the candidate
/// is separated with probability at least 2/3, from the exact coverage
/// form: ceil(ln 3 / -ln(1 - eps)).
pub fn b_for_validity(eps: f64) -> u32 {
    assert!(eps > 0.0 && eps < 1.0, "distance must be in (0, 1)");
    (3f64.ln() / -(1.0 - eps).ln()).ceil() as u32
}

/// The looser linearized form ceil(ln 3 / eps); never smaller than the
/// exact form, and both reach the 2/3 validity target for eps below 0.7.
pub fn b_for_validity_linear(eps: f64) -> u32 {
    assert!(eps > 0.0 && eps < 1.0, "distance must be in (0, 1)");
    (3f64.ln() / eps).ceil() as u32
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::to_cnf_pinned;
    use crate::samplers::{build_exact_sampler, build_feistel_scramble, identity_scramble};
    use crate::targets::make_classical_standin;
    use crate::witness::enumerate_witnesses;

    fn builtin() -> SatOracle {
        SatOracle::new(SolverBackend::Builtin)
    }

    #[test]
    fn prefix_search_inverts_the_identity_scramble_everywhere() {
        let f = make_classical_standin(41, 6);
        let s = build_exact_sampler(&f, &identity_scramble(6)).unwrap();
        let mut oracle = builtin();
        for x in BitString::enumerate(6) {
            let r = prefix_search(&s, &x, &mut oracle).unwrap();
            assert_eq!(r, x, "identity scramble preimage is the input itself");
        }
    }

    #[test]
    fn prefix_search_spends_one_query_per_random_bit() {
        let f = make_classical_standin(42, 10);
        let s = build_exact_sampler(&f, &build_feistel_scramble(10, 3, 7)).unwrap();
        let mut oracle = builtin();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let x = BitString::random(&mut rng, 10);
            let before = oracle.stats().queries;
            let r = prefix_search(&s, &x, &mut oracle).unwrap();
            let spent = oracle.stats().queries - before;
            assert_eq!(spent, 10, "one satisfiability question per bit");
            assert_eq!(s.run(&r).0, x);
        }
    }

    #[test]
    fn exact_rg_evaluator_recovers_the_target_function() {
        let f = make_classical_standin(43, 8);
        let s = build_exact_sampler(&f, &build_feistel_scramble(8, 3, 11)).unwrap();
        let mut ev = eval_via_exact_rg(s, SolverBackend::Builtin).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..64 {
            let x = BitString::random(&mut rng, 8);
            assert_eq!(ev.eval(&x, 0).unwrap(), f.eval(&x));
        }
    }

    #[test]
    fn exact_rg_rejects_samplers_with_declared_error() {
        let f = make_classical_standin(44, 6);
        let scr = build_feistel_scramble(6, 3, 1);
        let s = crate::samplers::build_approx_sampler(&f, &scr, 0.25, 9).unwrap();
        assert!(matches!(
            eval_via_exact_rg(s, SolverBackend::Builtin),
            Err(ReductionError::BadParams(_))
        ));
    }

    #[test]
    fn approx_rg_with_zero_error_sampler_is_exact_in_one_vote() {
        let f = make_classical_standin(45, 6);
        let s = build_exact_sampler(&f, &build_feistel_scramble(6, 3, 2)).unwrap();
        let mut ev = eval_via_approx_rg(s, 1, SolverBackend::Builtin).unwrap();
        for x in BitString::enumerate(6) {
            assert_eq!(ev.eval(&x, 77).unwrap(), f.eval(&x));
        }
    }

    #[test]
    fn approx_rg_majority_error_tracks_the_binomial_prediction() {
        // flip probability is exactly 64/256; a 9-vote majority is wrong
        // with probability sum_{j>=5} C(9,j) p^j (1-p)^(9-j) ~= 0.049
        let f = make_classical_standin(46, 6);
        let scr = build_feistel_scramble(6, 3, 3);
        let s = crate::samplers::build_approx_sampler(&f, &scr, 0.25, 13).unwrap();
        let mut ev = eval_via_approx_rg(s, 9, SolverBackend::Builtin).unwrap();
        let p: f64 = 0.25;
        let wrong_pred: f64 = (5..=9)
            .map(|j| {
                let c = choose_capped(9, j, u64::MAX >> 1).unwrap() as f64;
                c * p.powi(j as i32) * (1.0 - p).powi((9 - j) as i32)
            })
            .sum();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut wrong = 0u32;
        let trials = 160u32;
        for t in 0..trials {
            let x = BitString::random(&mut rng, 6);
            if ev.eval(&x, u64::from(t)).unwrap() != f.eval(&x) {
                wrong += 1;
            }
        }
        let measured = f64::from(wrong) / f64::from(trials);
        assert!(
            (measured - wrong_pred).abs() < 0.1,
            "measured {measured} vs predicted {wrong_pred}"
        );
    }

    #[test]
    fn approx_rg_answers_out_of_image_inputs_by_coin() {
        // a constant sampler leaves every other input without preimages
        let mut cb = CircuitBuilder::new();
        let _r = cb.input_group("r", 2);
        let one = cb.constant(true);
        let zero = cb.constant(false);
        let program = cb.finish(vec![one, zero, one]);
        let s = Sampler::new(program, 2, 0.0).unwrap();
        let mut ev = eval_via_approx_rg(s, 3, SolverBackend::Builtin).unwrap();
        let inside = BitString::parse("10").unwrap();
        assert!(ev.eval(&inside, 0).unwrap(), "constant label inside the image");
        let outside = BitString::parse("01").unwrap();
        let mut seen = [false; 2];
        for seed in 0..40u64 {
            seen[usize::from(ev.eval(&outside, seed).unwrap())] = true;
        }
        assert_eq!(seen, [true, true], "both coin outcomes occur across seeds");
    }

    #[test]
    fn ident_relation_agrees_with_label_enumeration() {
        let class = ConceptClass::bit_index(4, 4).unwrap();
        let cfg = LearnerConfig::default();
        let mut oracle = builtin();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..12 {
            let xs: Vec<BitString> = (0..3).map(|_| BitString::random(&mut rng, 4)).collect();
            let alpha = BitString::random(&mut rng, 4);
            let by_enum = enumerate_label_witnesses(&class, &xs, &alpha, &cfg).unwrap();
            let rel = verifiable_ident_relation(&class, &xs, 1).unwrap();
            let inst = RelationInstance::new(rel, alpha.clone()).unwrap();
            let cnf = inst.to_cnf().unwrap();
            let models = enumerate_witnesses(&inst, 1 << 12, &mut oracle).unwrap();
            let mut by_sat: Vec<BitString> = models.iter().map(|w| w.prefix(3)).collect();
            by_sat.sort();
            by_sat.dedup();
            assert_eq!(by_sat, by_enum, "trial {trial}: witness sets must match");
            drop(cnf);
        }
    }

    #[test]
    fn inverted_identifier_outputs_are_explained_by_the_index() {
        let class = ConceptClass::bit_index(8, 8).unwrap();
        let cfg = LearnerConfig::default();
        let mut oracle = builtin();
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let mut hits = 0;
        for trial in 0..20 {
            let xs: Vec<BitString> = (0..6).map(|_| BitString::random(&mut rng, 8)).collect();
            let alpha = BitString::random(&mut rng, 8);
            match invert_identifier(&class, &xs, &alpha, 2, &cfg, &mut oracle, 1000 + trial) {
                Ok((y, _r)) => {
                    let samples: Vec<(BitString, bool)> =
                        xs.iter().cloned().zip((0..6).map(|i| y.get(i))).collect();
                    let t = Dataset::new(8, samples).unwrap();
                    assert_eq!(
                        verifiable_learn(&class, &t, &cfg).unwrap(),
                        LearnerVerdict::Identified(alpha.clone())
                    );
                    hits += 1;
                }
                Err(ReductionError::Witness(WitnessError::NoWitness)) => {}
                Err(e) => panic!("unexpected failure: {e}"),
            }
        }
        assert!(hits >= 1, "some random draw must be invertible");
    }

    #[test]
    fn full_index_coverage_pins_the_witness_labels_exactly() {
        // one record per index: the only explaining labels are the
        // concept's own, and the relation must agree
        let class = ConceptClass::bit_index(4, 4).unwrap();
        let cfg = LearnerConfig::default();
        let xs: Vec<BitString> =
            (0..4).map(|i| BitString::from_uint(i << 2, 4)).collect();
        let alpha = BitString::parse("1010").unwrap();
        let c = class.concept(&alpha).unwrap();
        let want = BitString::from_bools(xs.iter().map(|x| c.eval(x)).collect());
        let by_enum = enumerate_label_witnesses(&class, &xs, &alpha, &cfg).unwrap();
        assert_eq!(by_enum, vec![want.clone()]);
        let mut oracle = builtin();
        let (y, _r) =
            invert_identifier(&class, &xs, &alpha, 1, &cfg, &mut oracle, 5).unwrap();
        assert_eq!(y, want);
    }

    #[test]
    fn consistency_probe_recovers_the_concept_from_a_full_rank_set() {
        let f = make_classical_standin(47, 8);
        let class = ConceptClass::xor_mask(f);
        let alpha = BitString::parse("01101001").unwrap();
        let c = class.concept(&alpha).unwrap();
        // the 8 unit vectors span the index space, so exactly one mask
        // explains the set and every probe is decisive
        let t: Vec<(BitString, bool)> = (0..8)
            .map(|i| {
                let x = BitString::from_uint(1 << (7 - i), 8);
                let y = c.eval(&x);
                (x, y)
            })
            .collect();
        for x in BitString::enumerate(8) {
            assert_eq!(check_consistency(&class, &x, &t).unwrap(), c.eval(&x));
        }
    }

    #[test]
    fn consistency_probe_reports_uninformative_extensions() {
        let f = make_classical_standin(48, 4);
        let class = ConceptClass::xor_mask(f);
        let x = BitString::parse("1011").unwrap();
        // empty advice: both labels extend
        match check_consistency(&class, &x, &[]) {
            Err(ReductionError::Ambiguous(msg)) => assert!(msg.contains("either")),
            other => panic!("expected ambiguity, got {other:?}"),
        }
        // contradictory advice: neither label extends
        let z = BitString::parse("0001").unwrap();
        let t = vec![(z.clone(), false), (z, true)];
        match check_consistency(&class, &x, &t) {
            Err(ReductionError::Ambiguous(msg)) => assert!(msg.contains("no label")),
            other => panic!("expected ambiguity, got {other:?}"),
        }
    }

    #[test]
    fn advice_evaluator_is_exact_for_the_singleton_class() {
        let f = make_classical_standin(49, 8);
        let truth = f.clone();
        let class = ConceptClass::singleton(f);
        let mut rng = ChaCha8Rng::seed_from_u64(55);
        let advice: Vec<(BitString, bool)> = (0..7)
            .map(|_| {
                let x = BitString::random(&mut rng, 8);
                let y = truth.eval(&x);
                (x, y)
            })
            .collect();
        let mut ev = advice_evaluator(class, advice).unwrap();
        for x in BitString::enumerate(8) {
            assert_eq!(ev.eval(&x, 0).unwrap(), truth.eval(&x));
        }
    }

    #[test]
    fn advice_evaluator_is_exact_for_bit_index_with_full_coverage() {
        let class = ConceptClass::bit_index(8, 8).unwrap();
        let alpha = BitString::parse("11001010").unwrap();
        let c = class.concept(&alpha).unwrap();
        let advice: Vec<(BitString, bool)> = (0..8u64)
            .map(|i| {
                let x = BitString::from_uint(i << 5, 8);
                let y = c.eval(&x);
                (x, y)
            })
            .collect();
        let mut ev = advice_evaluator(class, advice).unwrap();
        for x in BitString::enumerate(8) {
            assert_eq!(ev.eval(&x, 0).unwrap(), c.eval(&x));
        }
    }

    #[test]
    fn ident_evaluator_answers_or_abstains_and_never_lies() {
        let class = ConceptClass::bit_index(8, 8).unwrap();
        let alpha = BitString::parse("10110100").unwrap();
        let c = class.concept(&alpha).unwrap();
        let cfg = LearnerConfig::default();
        let mut ev = eval_via_verifiable_ident(
            class,
            alpha,
            9,
            1,
            cfg,
            SolverBackend::Builtin,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(66);
        let mut answered = 0u32;
        for t in 0..24u64 {
            let x = BitString::random(&mut rng, 8);
            match ev.eval(&x, 9000 + t) {
                Ok(y) => {
                    assert_eq!(y, c.eval(&x), "answers must match the concept");
                    answered += 1;
                }
                Err(e) if is_abstention(&e) => {}
                Err(e) => panic!("unexpected failure: {e}"),
            }
        }
        assert!(answered >= 6, "majority-weight index answers often, got {answered}");
    }

    #[test]
    fn acceptance_gate_shortcut_matches_the_literal_scan() {
        let f = make_classical_standin(50, 6);
        let class = ConceptClass::xor_mask(f);
        let lp = ApproxVerifiable::new(class.clone(), 2, 3).unwrap();
        let cfg = LearnerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(91);
        for _ in 0..300 {
            let alpha = BitString::random(&mut rng, 6);
            let samples: Vec<(BitString, bool)> = (0..6)
                .map(|_| (BitString::random(&mut rng, 6), rng.gen()))
                .collect();
            let t = Dataset::new(6, samples).unwrap();
            assert_eq!(
                lp.rejects(&alpha, &t, &cfg).unwrap(),
                lp.literal_scan_rejects(&alpha, &t, &cfg).unwrap()
            );
        }
    }

    #[test]
    fn fully_flipped_subsets_are_rejected() {
        // Random records with two flips can stay consistent with some other
        // mask, so the inputs carry two linear dependencies instead:
        // x3 = x1 xor x2 and x6 = x4 xor x5. Any mask's labels then obey the
        // matching parity relations, and flipping one label inside each
        // triple breaks both relations for every mask at once.
        let f = make_classical_standin(51, 6);
        let class = ConceptClass::xor_mask(f);
        let lp = ApproxVerifiable::new(class.clone(), 2, 3).unwrap();
        let cfg = LearnerConfig::default();
        let xs: Vec<BitString> = ["110000", "001100", "111100", "000011", "101010", "101001"]
            .iter()
            .map(|s| BitString::parse(s).unwrap())
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(92);
        for _ in 0..8 {
            let alpha = BitString::random(&mut rng, 6);
            let c = class.concept(&alpha).unwrap();
            let mut samples: Vec<(BitString, bool)> =
                xs.iter().map(|x| (x.clone(), c.eval(x))).collect();
            samples[0].1 = !samples[0].1;
            samples[3].1 = !samples[3].1;
            for m in 0..64u64 {
                let mask = BitString::from_uint(m, 6);
                let fits = samples
                    .iter()
                    .all(|(x, y)| *y == class.concept(&mask).unwrap().eval(x));
                assert!(!fits, "mask {mask} unexpectedly explains the flipped set");
            }
            let t = Dataset::new(6, samples).unwrap();
            assert_eq!(lp.learn(&t, &cfg).unwrap(), LearnerVerdict::Invalid);
        }
    }

    #[test]
    fn accepted_datasets_stay_under_the_mislabel_budget() {
        // well-separated route: acceptance implies full consistency here,
        // so the recount is not just under budget but zero
        let f = make_classical_standin(52, 6);
        let class = ConceptClass::xor_mask(f);
        let lp = ApproxVerifiable::new(class.clone(), 2, 3).unwrap();
        let cfg = LearnerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(93);
        let mut accepted = 0;
        while accepted < 200 {
            let alpha = BitString::random(&mut rng, 6);
            let c = class.concept(&alpha).unwrap();
            let samples: Vec<(BitString, bool)> = (0..6)
                .map(|_| {
                    let x = BitString::random(&mut rng, 6);
                    let y = c.eval(&x) ^ (rng.gen_range(0..12) == 0);
                    (x, y)
                })
                .collect();
            let t = Dataset::new(6, samples).unwrap();
            if let LearnerVerdict::Identified(ah) = lp.learn(&t, &cfg).unwrap() {
                let miss = lp.mislabel_count(&ah, &t).unwrap();
                assert!(miss <= lp.budget(), "budget exceeded: {miss}");
                assert_eq!(miss, 0, "this identifier only accepts consistent sets");
                accepted += 1;
            }
        }
    }

    #[test]
    fn distance_gate_accepts_noise_under_budget_and_fires_on_adjacent_votes() {
        let class = ConceptClass::bit_index(4, 4).unwrap();
        let lp = ApproxVerifiable::new(class.clone(), 1, 3).unwrap();
        let cfg = LearnerConfig::default();
        // records for indices 1, 2, 3 of alpha = 0110: the record at
        // index 2 carries the wrong label, and its flip votes within
        // distance 1 of alpha, so the gate fires
        let alpha = BitString::parse("0110").unwrap();
        let mk = |i: u64, y: bool| (BitString::from_uint(i << 2, 4), y);
        let t = Dataset::new(4, vec![mk(0, false), mk(1, false), mk(2, true)]).unwrap();
        assert_eq!(lp.learn(&t, &cfg).unwrap(), LearnerVerdict::Invalid);
        // the same shape fully consistent is accepted
        let t2 = Dataset::new(4, vec![mk(0, false), mk(1, true), mk(2, true)]).unwrap();
        assert_eq!(
            lp.learn(&t2, &cfg).unwrap(),
            LearnerVerdict::Identified(alpha.clone())
        );
    }

    #[test]
    fn acceptance_wrapper_rejects_unsupported_shapes() {
        let rs = ConceptClass::rs_block(4, 1).unwrap();
        assert!(matches!(
            ApproxVerifiable::new(rs, 2, 2),
            Err(ReductionError::Learner(LearnerError::Unsupported(_)))
        ));
        let f = make_classical_standin(53, 4);
        let wide = ConceptClass::xor_mask(f);
        assert!(matches!(
            ApproxVerifiable::new(wide, 20, 10),
            Err(ReductionError::TooLarge(_))
        ));
    }

    #[test]
    fn dataset_sampler_matches_exhaustive_enumeration_on_a_tiny_box() {
        // 3 records of 5 bits each: the full 2^15 universe is enumerable,
        // so both the acceptance set and the draw distribution are exact
        let class = ConceptClass::bit_index(4, 4).unwrap();
        let lp = ApproxVerifiable::new(class.clone(), 1, 3).unwrap();
        let cfg = LearnerConfig::default();
        let alpha = BitString::parse("1010").unwrap();
        let x = BitString::parse("0100").unwrap();
        let all = enumerate_accepted_datasets(&lp, &alpha, &cfg).unwrap();
        let support: Vec<&Dataset> = all
            .iter()
            .filter(|t| t.samples().iter().any(|(xi, _)| xi == &x))
            .collect();
        assert!(!support.is_empty(), "the box must be addressable");
        let mut counts: HashMap<BitString, u64> = HashMap::new();
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let draws = 40 * support.len() as u64;
        for _ in 0..draws {
            let t = m_alpha_draw(&lp, &alpha, &x, &cfg, &mut rng).unwrap();
            assert!(
                lp.mislabel_count(&alpha, &t).unwrap() <= lp.budget(),
                "draws must respect the budget"
            );
            *counts.entry(t.encode()).or_insert(0) += 1;
        }
        // every draw lands in the enumerated set, and the empirical
        // distribution stays close to uniform
        let keys: Vec<BitString> = support.iter().map(|t| t.encode()).collect();
        for k in counts.keys() {
            assert!(keys.contains(k), "sampled dataset outside the accepted set");
        }
        let ideal = 1.0 / support.len() as f64;
        let tv: f64 = keys
            .iter()
            .map(|k| {
                let got = *counts.get(k).unwrap_or(&0) as f64 / draws as f64;
                (got - ideal).abs()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.1, "total variation {tv} too far from uniform");
    }

    #[test]
    fn tiny_box_bad_fraction_stays_under_the_derived_bound() {
        // exact accounting over the same tiny box: for each input, the
        // wrong-vote mass across accepted datasets that mention it
        let class = ConceptClass::bit_index(4, 4).unwrap();
        let lp = ApproxVerifiable::new(class.clone(), 1, 3).unwrap();
        let cfg = LearnerConfig::default();
        let beta = lp.beta() as f64;
        let bound_derived = 5.0 / (2.0 * beta);
        let bound_tighter = 5.0 / (6.0 * beta);
        let mut worst = 0.0f64;
        let mut bad = 0usize;
        let mut total = 0usize;
        for alpha in [BitString::parse("1010").unwrap(), BitString::parse("0111").unwrap()] {
            let c = class.concept(&alpha).unwrap();
            let all = enumerate_accepted_datasets(&lp, &alpha, &cfg).unwrap();
            for x in BitString::enumerate(4) {
                let mut right = 0u64;
                let mut wrong = 0u64;
                for t in &all {
                    if let Some((_, y)) =
                        t.samples().iter().find(|(xi, _)| xi == &x)
                    {
                        if *y == c.eval(&x) {
                            right += 1;
                        } else {
                            wrong += 1;
                        }
                    }
                }
                if right + wrong == 0 {
                    continue;
                }
                total += 1;
                let success = right as f64 / (right + wrong) as f64;
                if success < 0.6 {
                    bad += 1;
                }
                worst = worst.max(wrong as f64 / (right + wrong) as f64);
            }
            let fraction = bad as f64 / total as f64;
            assert!(
                fraction <= bound_derived,
                "bad fraction {fraction} above {bound_derived} (tighter claim {bound_tighter}, worst wrong mass {worst})"
            );
        }
    }

    #[test]
    fn consistent_route_draws_always_answer_with_the_concept_label() {
        let f = make_classical_standin(54, 6);
        let class = ConceptClass::xor_mask(f);
        let lp = ApproxVerifiable::new(class.clone(), 2, 3).unwrap();
        let cfg = LearnerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(321);
        for trial in 0..25u64 {
            let alpha = BitString::random(&mut rng, 6);
            let c = class.concept(&alpha).unwrap();
            let x = BitString::random(&mut rng, 6);
            match m_alpha_eval(&lp, &alpha, &x, &cfg, 7000 + trial) {
                Ok(y) => assert_eq!(y, c.eval(&x)),
                Err(e) => panic!("draw failed: {e}"),
            }
        }
    }

    #[test]
    fn error_report_scores_exact_and_abstaining_evaluators() {
        let f = make_classical_standin(55, 6);
        let truth = f.clone();
        let class = ConceptClass::singleton(f);
        let c = class.concept(&BitString::zeros(0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let advice: Vec<(BitString, bool)> = (0..5)
            .map(|_| {
                let x = BitString::random(&mut rng, 6);
                let y = truth.eval(&x);
                (x, y)
            })
            .collect();
        let xs: Vec<BitString> = BitString::enumerate(6).collect();
        let mut ev = advice_evaluator(class.clone(), advice).unwrap();
        let rep = measure_heuristic_error(&mut ev, &c, &xs, 3, 2.0 / 3.0, 0.15, 1).unwrap();
        assert_eq!(rep.fraction_bad, 0.0);
        assert_eq!(rep.abstain_rate, 0.0);
        assert!(rep.pass);
        // an evaluator with contradictory advice abstains everywhere
        let z = BitString::zeros(6);
        let mut stuck =
            advice_evaluator(class, vec![(z.clone(), false), (z, true)]).unwrap();
        let rep2 = measure_heuristic_error(&mut stuck, &c, &xs, 2, 2.0 / 3.0, 0.15, 2).unwrap();
        assert_eq!(rep2.abstain_rate, 1.0);
        assert_eq!(rep2.fraction_bad, 1.0);
        assert!(!rep2.pass);
    }

    #[test]
    fn validity_prediction_matches_measured_detection() {
        let class = ConceptClass::bit_index(8, 8).unwrap();
        let a1 = BitString::parse("10110100").unwrap();
        let a2 = BitString::parse("10110101").unwrap();
        let c1 = class.concept(&a1).unwrap();
        let c2 = class.concept(&a2).unwrap();
        // adjacent indices differ on exactly one index cell of mass 1/8
        let pred = predicted_validity(0.125, 9);
        assert!((pred - (1.0 - 0.875f64.powi(9))).abs() < 1e-12);
        let measured = detection_rate(&c1, &c2, 9, 20_000, 99);
        assert!(
            (measured - pred).abs() < 0.03,
            "measured {measured} vs predicted {pred}"
        );
    }

    #[test]
    fn record_counts_reach_the_validity_target() {
        for eps in [0.05, 0.125, 0.25, 0.5] {
            let exact = b_for_validity(eps);
            let linear = b_for_validity_linear(eps);
            assert!(linear >= exact);
            assert!(predicted_validity(eps, exact) >= 2.0 / 3.0);
            assert!(predicted_validity(eps, exact - 1) < 2.0 / 3.0 || exact == 1);
        }
        assert_eq!(b_for_validity(0.125), 9);
        assert_eq!(b_for_validity_linear(0.125), 9);
        assert_eq!(b_for_validity(0.5), 2);
        assert_eq!(b_for_validity_linear(0.5), 3);
    }

    #[test]
    fn ident_relation_cnf_round_trips_through_the_oracle() {
        // pin the relation output to 1 and check a model decodes to a
        // dataset the identifier maps back to alpha
        let class = ConceptClass::bit_index(4, 4).unwrap();
        let cfg = LearnerConfig::default();
        let xs: Vec<BitString> =
            (0..4).map(|i| BitString::from_uint(i << 2, 4)).collect();
        let alpha = BitString::parse("0110").unwrap();
        let rel = verifiable_ident_relation(&class, &xs, 1).unwrap();
        let fixed = rel.fix_inputs("instance", &alpha).unwrap();
        let cnf = to_cnf_pinned(&fixed, &BitString::parse("1").unwrap()).unwrap();
        let mut oracle = builtin();
        match oracle.decide(&cnf).unwrap() {
            crate::oracle::SatVerdict::Sat(model) => {
                let wvars = cnf.group_vars("witness").unwrap();
                let y = BitString::from_bools(
                    wvars[..4].iter().map(|&v| model[(v - 1) as usize]).collect(),
                );
                let samples: Vec<(BitString, bool)> =
                    xs.iter().cloned().zip((0..4).map(|i| y.get(i))).collect();
                let t = Dataset::new(4, samples).unwrap();
                assert_eq!(
                    verifiable_learn(&class, &t, &cfg).unwrap(),
                    LearnerVerdict::Identified(alpha)
                );
            }
            crate::oracle::SatVerdict::Unsat => panic!("relation must be satisfiable"),
        }
    }
}
