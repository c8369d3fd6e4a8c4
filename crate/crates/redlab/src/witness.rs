//! Near-uniform witness sampling for circuit-defined relations.
//!
//! A relation is a circuit with input groups `instance` and `witness` and a
//! single output; pinning the output to 1 and fixing the instance carves out
//! the witness set R_x. Sampling works by XOR-hash halving: random parity
//! constraints shrink R_x to a cell of at most 64 elements, the cell is
//! enumerated, and one member is picked uniformly. Empty cells are retried.

use crate::bits::BitString;
use crate::circuit::{Circuit, CircuitError};
use crate::cnf::{to_cnf, CnfFormula, OutputPin};
use crate::oracle::{OracleError, SatOracle};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// Cells larger than this are split further before picking.
const CELL_CAP: usize = 64;

/// Rounds of fresh parity draws before giving up.
const STALL_CAP: usize = 64;

/// Default ceiling for the one-time exhaustive scan that backs the list
/// fast path. Supports larger than this fall back to per-draw SAT queries.
pub const DEFAULT_LIST_CAP: usize = 4096;

/// Default witness width limit.
pub const DEFAULT_MAX_WIDTH: usize = 32;

#[derive(Error, Debug)]
pub enum WitnessError {
    #[error("relation has no witness for this instance")]
    NoWitness,
    #[error("sampler stalled: {STALL_CAP} rounds of empty or oversized cells")]
    SamplerStall,
    #[error("witness width {0} exceeds the configured maximum {1}")]
    TooWide(usize, usize),
    #[error("relation circuit must have input groups (instance, witness) and one output, got {0}")]
    BadRelation(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// A relation circuit together with a concrete instance value.
#[derive(Clone, Debug)]
pub struct RelationInstance {
    relation_circuit: Circuit,
    instance_value: BitString,
}

impl RelationInstance {
    /// The circuit needs groups `instance` (width of `instance_value`) and
    /// `witness`, in either order, plus exactly one output pin. A relation
    /// with no instance part takes an empty `instance_value` and a circuit
    /// with only the `witness` group.
    pub fn new(relation_circuit: Circuit, instance_value: BitString) -> Result<Self, WitnessError> {
        let mut names: Vec<&str> =
            relation_circuit.groups().iter().map(|g| g.name.as_str()).collect();
        names.sort_unstable();
        let expected: &[&str] =
            if instance_value.is_empty() { &["witness"] } else { &["instance", "witness"] };
        if names != expected {
            return Err(WitnessError::BadRelation(format!("groups {names:?}")));
        }
        if !instance_value.is_empty() {
            let got = relation_circuit
                .groups()
                .iter()
                .find(|g| g.name == "instance")
                .map(|g| g.width)
                .unwrap();
            if got != instance_value.width() {
                return Err(WitnessError::BadRelation(format!(
                    "instance group width {got}, value width {}",
                    instance_value.width()
                )));
            }
        }
        if relation_circuit.outputs().len() != 1 {
            return Err(WitnessError::BadRelation(format!(
                "{} outputs",
                relation_circuit.outputs().len()
            )));
        }
        Ok(RelationInstance { relation_circuit, instance_value })
    }

    pub fn witness_width(&self) -> usize {
        self.relation_circuit
            .groups()
            .iter()
            .find(|g| g.name == "witness")
            .map(|g| g.width)
            .unwrap()
    }

    pub fn instance_value(&self) -> &BitString {
        &self.instance_value
    }

    /// Direct membership test R[x, w] = 1.
    pub fn check(&self, witness: &BitString) -> Result<bool, WitnessError> {
        let out = if self.instance_value.is_empty() {
            self.relation_circuit.eval(&[("witness", witness)])?
        } else {
            self.relation_circuit
                .eval(&[("instance", &self.instance_value), ("witness", witness)])?
        };
        Ok(out.get(0))
    }

    /// CNF whose models restricted to the witness variables are exactly R_x.
    pub fn to_cnf(&self) -> Result<CnfFormula, WitnessError> {
        let fixed = if self.instance_value.is_empty() {
            self.relation_circuit.clone()
        } else {
            self.relation_circuit.fix_inputs("instance", &self.instance_value)?
        };
        Ok(to_cnf(&fixed, &[OutputPin { index: 0, value: true }])?)
    }
}

/// Reusable sampler for one relation instance. Construction runs a single
/// exhaustive scan up to the list cap; when the scan completes, later draws
/// evaluate hash cells against the stored list instead of the oracle. Both
/// routes consume randomness identically, so a given seed yields the same
/// witness either way.
#[derive(Clone, Debug)]
pub struct WitnessSampler {
    instance: RelationInstance,
    cnf: CnfFormula,
    witness_vars: Vec<i32>,
    /// Full witness set when the constructor scan was exhaustive.
    support: Option<Vec<BitString>>,
}

impl WitnessSampler {
    pub fn new(instance: RelationInstance, oracle: &mut SatOracle) -> Result<Self, WitnessError> {
        Self::configured(instance, oracle, DEFAULT_LIST_CAP, DEFAULT_MAX_WIDTH)
    }

    /// `list_cap` bounds the constructor scan (0 disables the list path and
    /// keeps every draw on the oracle); `max_width` bounds the witness group.
    pub fn configured(
        instance: RelationInstance,
        oracle: &mut SatOracle,
        list_cap: usize,
        max_width: usize,
    ) -> Result<Self, WitnessError> {
        let w = instance.witness_width();
        if w > max_width {
            return Err(WitnessError::TooWide(w, max_width));
        }
        let cnf = instance.to_cnf()?;
        let witness_vars = cnf
            .group_vars("witness")
            .ok_or_else(|| WitnessError::BadRelation("witness group lost in CNF".to_string()))?
            .to_vec();
        // the scan must at least settle whether the support fits in one cell
        let scan_cap = list_cap.max(CELL_CAP).saturating_add(1);
        let scan = oracle.enumerate_models(&cnf, &witness_vars, scan_cap)?;
        let support = if scan.len() < scan_cap { Some(scan) } else { None };
        Ok(WitnessSampler { instance, cnf, witness_vars, support })
    }

    /// Exact support size when the constructor scan was exhaustive.
    pub fn known_support(&self) -> Option<usize> {
        self.support.as_ref().map(Vec::len)
    }

    /// One draw, fully determined by the instance and the seed.
    pub fn sample(&self, oracle: &mut SatOracle, seed: u64) -> Result<BitString, WitnessError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.draw(oracle, &mut rng)
    }

    /// One draw from a caller-owned stream.
    pub fn draw<R: Rng>(&self, oracle: &mut SatOracle, rng: &mut R) -> Result<BitString, WitnessError> {
        let w = self.instance.witness_width();
        match &self.support {
            Some(s) if s.is_empty() => return Err(WitnessError::NoWitness),
            Some(s) if s.len() <= CELL_CAP => {
                let pick = s[rng.gen_range(0..s.len())].clone();
                assert!(self.instance.check(&pick)?, "stored support member fails the relation");
                return Ok(pick);
            }
            _ => {}
        }
        // support exceeds one cell (the constructor scan saw > CELL_CAP
        // witnesses), so w >= 7 and the parity range [1, w] is nonempty
        for _round in 0..STALL_CAP {
            let parities: Vec<(BitString, bool)> =
                (0..w).map(|_| (BitString::random(rng, w), rng.gen())).collect();
            // smallest k whose cell fits; cell size is nonincreasing in k
            let mut lo = 1;
            let mut hi = w;
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if self.cell(oracle, &parities[..mid], CELL_CAP + 1)?.len() <= CELL_CAP {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            let mut cell = self.cell(oracle, &parities[..lo], CELL_CAP + 1)?;
            if cell.is_empty() || cell.len() > CELL_CAP {
                continue;
            }
            cell.sort();
            let pick = cell[rng.gen_range(0..cell.len())].clone();
            assert!(self.instance.check(&pick)?, "sampled witness fails the relation");
            return Ok(pick);
        }
        Err(WitnessError::SamplerStall)
    }

    /// Members of the hash cell, up to `cap`. Only the length is meaningful
    /// when it exceeds CELL_CAP; the full sorted cell comes back otherwise.
    fn cell(
        &self,
        oracle: &mut SatOracle,
        parities: &[(BitString, bool)],
        cap: usize,
    ) -> Result<Vec<BitString>, WitnessError> {
        if let Some(list) = &self.support {
            Ok(list
                .iter()
                .filter(|wv| parities.iter().all(|(a, b)| wv.dot(a) == *b))
                .take(cap)
                .cloned()
                .collect())
        } else {
            let mut g = self.cnf.clone();
            for (a, b) in parities {
                let vars: Vec<i32> = self
                    .witness_vars
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| a.get(*i))
                    .map(|(_, &v)| v)
                    .collect();
                g.add_parity_constraint(&vars, *b);
            }
            Ok(oracle.enumerate_models(&g, &self.witness_vars, cap)?)
        }
    }
}

/// One near-uniform draw from R_x, determined by (instance, seed).
pub fn sample_witness(
    instance: &RelationInstance,
    seed: u64,
    oracle: &mut SatOracle,
) -> Result<BitString, WitnessError> {
    let sampler = WitnessSampler::configured(instance.clone(), oracle, 0, DEFAULT_MAX_WIDTH)?;
    sampler.sample(oracle, seed)
}

/// All witnesses up to `cap`, sorted; exact whenever |R_x| <= cap.
pub fn enumerate_witnesses(
    instance: &RelationInstance,
    cap: usize,
    oracle: &mut SatOracle,
) -> Result<Vec<BitString>, WitnessError> {
    assert!(cap >= 1, "cap must be positive");
    let cnf = instance.to_cnf()?;
    let vars = cnf
        .group_vars("witness")
        .ok_or_else(|| WitnessError::BadRelation("witness group lost in CNF".to_string()))?
        .to_vec();
    Ok(oracle.enumerate_models(&cnf, &vars, cap)?)
}

/// Upper-tail p-value of a chi-square statistic with `df` degrees of
/// freedom, via the regularized incomplete gamma function.
pub fn chi_square_pvalue(stat: f64, df: u32) -> f64 {
    assert!(df >= 1, "degrees of freedom must be positive");
    if stat <= 0.0 {
        return 1.0;
    }
    upper_regularized_gamma(df as f64 / 2.0, stat / 2.0)
}

/// Q(s, x) = Gamma(s, x) / Gamma(s). Series for x < s + 1, Lentz continued
/// fraction otherwise; both converge fast for the small s used here.
fn upper_regularized_gamma(s: f64, x: f64) -> f64 {
    if x < s + 1.0 {
        // P(s, x) by series, then complement
        let mut term = 1.0 / s;
        let mut sum = term;
        let mut a = s;
        for _ in 0..500 {
            a += 1.0;
            term *= x / a;
            sum += term;
            if term.abs() < sum.abs() * 1e-15 {
                break;
            }
        }
        1.0 - sum * (-x + s * x.ln() - ln_gamma(s)).exp()
    } else {
        let tiny = 1e-300;
        let mut b = x + 1.0 - s;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - s);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < 1e-15 {
                break;
            }
        }
        (-x + s * x.ln() - ln_gamma(s)).exp() * h
    }
}

/// Lanczos approximation, g = 7, 9 coefficients.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 8] = [
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        // reflection keeps the approximation in its stable half
        return (std::f64::consts::PI / (std::f64::consts::PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = 0.99999999999980993;
    for (i, c) in COEF.iter().enumerate() {
        a += c / (x + i as f64 + 1.0);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::CircuitBuilder;
    use crate::oracle::SolverBackend;
    use proptest::prelude::*;
    use rand::Rng;
    use std::collections::HashMap;

    fn oracle() -> SatOracle {
        SatOracle::new(SolverBackend::Builtin)
    }

    /// Relation over an 8-bit witness: popcount(w) == target.
    fn popcount_relation(width: usize, target: u64) -> RelationInstance {
        let mut b = CircuitBuilder::new();
        let w = b.input_group("witness", width);
        let count = b.popcount(&w);
        let bits = count.len();
        let pattern = BitString::from_bools(
            (0..bits).map(|i| (target >> i) & 1 == 1).collect(),
        );
        // popcount wires are little-endian; eq_const takes them as given
        let out = b.eq_const(&count, &pattern);
        let c = b.finish(vec![out]);
        RelationInstance::new(c, BitString::zeros(0)).unwrap()
    }

    fn eq_relation(width: usize, value: u64) -> RelationInstance {
        let mut b = CircuitBuilder::new();
        let w = b.input_group("witness", width);
        let out = b.eq_const(&w, &BitString::from_uint(value, width));
        let c = b.finish(vec![out]);
        RelationInstance::new(c, BitString::zeros(0)).unwrap()
    }

    #[test]
    fn singleton_relation_always_returns_its_witness() {
        let inst = eq_relation(8, 0b1010_0110);
        let mut o = oracle();
        for seed in 0..10 {
            let w = sample_witness(&inst, seed, &mut o).unwrap();
            assert_eq!(w, BitString::from_uint(0b1010_0110, 8));
        }
        assert_eq!(enumerate_witnesses(&inst, 10, &mut o).unwrap().len(), 1);
    }

    #[test]
    fn unsatisfiable_relation_is_no_witness() {
        let mut b = CircuitBuilder::new();
        let w = b.input_group("witness", 4);
        let x = b.xor(w[0], w[0]);
        let c = b.finish(vec![x]);
        let inst = RelationInstance::new(c, BitString::zeros(0)).unwrap();
        let mut o = oracle();
        assert!(matches!(sample_witness(&inst, 3, &mut o), Err(WitnessError::NoWitness)));
    }

    #[test]
    fn unconstrained_four_bits_has_sixteen_witnesses() {
        let mut b = CircuitBuilder::new();
        let w = b.input_group("witness", 4);
        let t = b.or(w[0], w[0]);
        let x = b.xor(w[0], t);
        let out = b.not(x);
        let c = b.finish(vec![out]);
        // output is w0 or w0 xor w0, negated: always 1
        let inst = RelationInstance::new(c, BitString::zeros(0)).unwrap();
        let mut o = oracle();
        let all = enumerate_witnesses(&inst, 100, &mut o).unwrap();
        assert_eq!(all.len(), 16);
    }

    #[test]
    fn instance_group_selects_the_witness_set() {
        // R[x, w]: w equals x bitwise
        let mut b = CircuitBuilder::new();
        let x = b.input_group("instance", 4);
        let w = b.input_group("witness", 4);
        let eqs: Vec<_> = (0..4)
            .map(|i| {
                let d = b.xor(x[i], w[i]);
                b.not(d)
            })
            .collect();
        let out = b.and_chain(&eqs);
        let c = b.finish(vec![out]);
        let inst = RelationInstance::new(c, BitString::parse("1101").unwrap()).unwrap();
        let mut o = oracle();
        let ws = enumerate_witnesses(&inst, 10, &mut o).unwrap();
        assert_eq!(ws, vec![BitString::parse("1101").unwrap()]);
        assert!(inst.check(&BitString::parse("1101").unwrap()).unwrap());
        assert!(!inst.check(&BitString::parse("1100").unwrap()).unwrap());
    }

    #[test]
    fn enumeration_length_matches_projected_count() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let mut o = oracle();
        for _ in 0..50 {
            let n = rng.gen_range(3..=6);
            let mut b = CircuitBuilder::new();
            let w = b.input_group("witness", n);
            let mut pool = w.clone();
            for _ in 0..rng.gen_range(1..=8) {
                let a = pool[rng.gen_range(0..pool.len())];
                let c = pool[rng.gen_range(0..pool.len())];
                let g = match rng.gen_range(0..4) {
                    0 => b.and(a, c),
                    1 => b.or(a, c),
                    2 => b.xor(a, c),
                    _ => b.not(a),
                };
                pool.push(g);
            }
            let out = *pool.last().unwrap();
            let circuit = b.finish(vec![out]);
            let inst = RelationInstance::new(circuit, BitString::zeros(0)).unwrap();
            let cnf = inst.to_cnf().unwrap();
            let vars = cnf.group_vars("witness").unwrap().to_vec();
            let count = o.count_models(&cnf, &vars).unwrap();
            let listed = enumerate_witnesses(&inst, 1 << n, &mut o).unwrap();
            assert_eq!(count, listed.len() as u64);
        }
    }

    #[test]
    fn list_path_and_sat_path_agree_seed_by_seed() {
        // popcount(w) = 4 over 8 bits: 70 witnesses, above one cell
        let inst = popcount_relation(8, 4);
        let mut o = oracle();
        let listed = WitnessSampler::new(inst.clone(), &mut o).unwrap();
        let direct = WitnessSampler::configured(inst, &mut o, 0, DEFAULT_MAX_WIDTH).unwrap();
        assert_eq!(listed.known_support(), Some(70));
        assert_eq!(direct.known_support(), None);
        for seed in 0..20 {
            let a = listed.sample(&mut o, seed).unwrap();
            let b = direct.sample(&mut o, seed).unwrap();
            assert_eq!(a, b, "seed {seed} diverged between list and oracle paths");
        }
    }

    #[test]
    fn sampling_is_deterministic_and_valid() {
        let inst = popcount_relation(8, 3);
        let mut o = oracle();
        let s = WitnessSampler::new(inst.clone(), &mut o).unwrap();
        for seed in 0..30 {
            let w1 = s.sample(&mut o, seed).unwrap();
            let w2 = s.sample(&mut o, seed).unwrap();
            assert_eq!(w1, w2);
            assert!(inst.check(&w1).unwrap());
            assert_eq!(w1.count_ones(), 3);
        }
    }

    #[test]
    fn near_uniform_on_medium_support() {
        // support 70, list path makes the draws cheap
        let inst = popcount_relation(8, 4);
        let mut o = oracle();
        let s = WitnessSampler::new(inst.clone(), &mut o).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts: HashMap<BitString, u64> = HashMap::new();
        let draws = 20_000u64;
        for _ in 0..draws {
            let w = s.draw(&mut o, &mut rng).unwrap();
            *counts.entry(w).or_insert(0) += 1;
        }
        let support = enumerate_witnesses(&inst, 100, &mut o).unwrap();
        assert_eq!(support.len(), 70);
        let p = 1.0 / support.len() as f64;
        let tv: f64 = support
            .iter()
            .map(|w| {
                let emp = *counts.get(w).unwrap_or(&0) as f64 / draws as f64;
                (emp - p).abs()
            })
            .sum::<f64>()
            / 2.0;
        assert!(tv <= 0.1, "tv {tv}");
    }

    #[test]
    fn width_cap_is_enforced() {
        let inst = eq_relation(33, 7);
        let mut o = oracle();
        assert!(matches!(
            WitnessSampler::new(inst, &mut o),
            Err(WitnessError::TooWide(33, 32))
        ));
    }

    #[test]
    fn relation_shape_is_validated() {
        let mut b = CircuitBuilder::new();
        let w = b.input_group("wits", 4);
        let c = b.finish(vec![w[0]]);
        assert!(matches!(
            RelationInstance::new(c, BitString::zeros(0)),
            Err(WitnessError::BadRelation(_))
        ));
        let mut b = CircuitBuilder::new();
        let x = b.input_group("instance", 3);
        let _w = b.input_group("witness", 4);
        let c = b.finish(vec![x[0]]);
        assert!(matches!(
            RelationInstance::new(c, BitString::zeros(4)),
            Err(WitnessError::BadRelation(_))
        ));
    }

    #[test]
    fn chi_square_closed_forms() {
        // two degrees of freedom: Q = exp(-x/2); four: Q = exp(-x/2)(1 + x/2)
        for i in 1..=20 {
            let x = i as f64 * 0.7;
            let q2 = chi_square_pvalue(x, 2);
            assert!((q2 - (-x / 2.0).exp()).abs() < 1e-10, "df2 at {x}: {q2}");
            let q4 = chi_square_pvalue(x, 4);
            let want = (-x / 2.0).exp() * (1.0 + x / 2.0);
            assert!((q4 - want).abs() < 1e-10, "df4 at {x}: {q4}");
        }
    }

    #[test]
    fn chi_square_table_values() {
        // standard table entries (df, statistic, upper-tail p)
        let table = [
            (1, 3.841, 0.05),
            (1, 1.0, 0.3173),
            (5, 11.070, 0.05),
            (10, 18.307, 0.05),
            (10, 23.209, 0.01),
            (63, 82.529, 0.05),
        ];
        for (df, x, p) in table {
            let got = chi_square_pvalue(x, df);
            assert!((got - p).abs() < 2e-3, "df {df} x {x}: got {got}, want {p}");
        }
        assert_eq!(chi_square_pvalue(0.0, 3), 1.0);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(20))]
        #[test]
        fn sampled_witness_is_always_enumerated(target in 1u64..=7, seed in 0u64..1000) {
            let inst = popcount_relation(7, target);
            let mut o = oracle();
            let s = WitnessSampler::new(inst.clone(), &mut o).unwrap();
            let w = s.sample(&mut o, seed).unwrap();
            let all = enumerate_witnesses(&inst, 1 << 7, &mut o).unwrap();
            prop_assert!(all.contains(&w));
        }
    }
}
