//! Labeled-example samplers in circuit form, exact and label-corrupted,
//! plus exact total-variation measurement against the target distribution.
//!
//! A sampler is one circuit over input group "r": the first n outputs are
//! the example x, the last output is its label y. Exact samplers route r
//! through a bijective scramble so the x-marginal stays uniform while the
//! r -> x map is still worth inverting. Corruption appends auxiliary
//! randomness and flips the label when the auxiliary word falls below a
//! dyadic threshold, so the achieved flip probability is the largest
//! multiple of 2^-AUX_WIDTH that does not exceed the requested epsilon.

use crate::bits::BitString;
use crate::circuit::{Circuit, CircuitBuilder, CircuitError};
use crate::targets::{InputDistribution, TargetFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;
use thiserror::Error;

/// Auxiliary random bits backing one label-flip decision.
pub const AUX_WIDTH: usize = 8;

/// Enumeration ceiling for exact measurements over the full r space.
pub const MAX_ENUM_WIDTH: usize = 24;

#[derive(Error, Debug)]
pub enum SamplerError {
    #[error("target has no circuit form; only classical targets can be sampled")]
    NotClassical,
    #[error("scramble is not a bijection: {0}")]
    NotBijective(String),
    #[error("r width {0} exceeds the {MAX_ENUM_WIDTH}-bit enumeration ceiling")]
    TooLarge(usize),
    #[error("epsilon {0} outside [0, 1/2]")]
    BadEpsilon(f64),
    #[error("sampler circuit must have one input group \"r\" and n+1 outputs: {0}")]
    BadShape(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// A circuit emitting labeled examples (x, y) from random bits r.
#[derive(Clone, Debug)]
pub struct Sampler {
    program: Circuit,
    n: usize,
    declared_epsilon: f64,
}

impl Sampler {
    pub fn new(program: Circuit, n: usize, declared_epsilon: f64) -> Result<Sampler, SamplerError> {
        if program.groups().len() != 1 || program.groups()[0].name != "r" {
            return Err(SamplerError::BadShape(format!(
                "groups {:?}",
                program.groups().iter().map(|g| g.name.clone()).collect::<Vec<_>>()
            )));
        }
        if program.outputs().len() != n + 1 {
            return Err(SamplerError::BadShape(format!(
                "{} outputs for n = {n}",
                program.outputs().len()
            )));
        }
        Ok(Sampler { program, n, declared_epsilon })
    }

    pub fn program(&self) -> &Circuit {
        &self.program
    }

    /// Example width n; the label is the final output.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Total random-input width, auxiliary bits included.
    pub fn r_width(&self) -> usize {
        self.program.groups()[0].width
    }

    pub fn declared_epsilon(&self) -> f64 {
        self.declared_epsilon
    }

    pub fn run(&self, r: &BitString) -> (BitString, bool) {
        let out = self.program.eval(&[("r", r)]).expect("sampler is total");
        (out.prefix(self.n), out.get(self.n))
    }
}

/// Identity permutation, for degenerate scrambles in tests and baselines.
pub fn identity_scramble(n: usize) -> Circuit {
    let mut b = CircuitBuilder::new();
    let r = b.input_group("r", n);
    b.finish(r)
}

/// Unbalanced Feistel network: each round maps (L, R) to (R, L xor F(R))
/// with a nonlinear pseudorandom F, a bijection for any F. Splitting at
/// floor(n/2) keeps the construction valid for odd n.
pub fn build_feistel_scramble(n: usize, rounds: usize, seed: u64) -> Circuit {
    assert!(n >= 2, "scramble needs at least two bits");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut b = CircuitBuilder::new();
    let mut word = b.input_group("r", n);
    for _ in 0..rounds {
        let h = n / 2;
        let left = word[..h].to_vec();
        let right = word[h..].to_vec();
        let mut next = right.clone();
        for &l in &left {
            // F output bit: parity of a random subset of R, one AND term,
            // and a random constant
            let mut terms: Vec<usize> =
                right.iter().copied().filter(|_| rng.gen_bool(0.5)).collect();
            let a = right[rng.gen_range(0..right.len())];
            let c = right[rng.gen_range(0..right.len())];
            terms.push(b.and(a, c));
            if rng.gen_bool(0.5) {
                terms.push(b.constant(true));
            }
            let f_bit = b.xor_chain(&terms);
            next.push(b.xor(l, f_bit));
        }
        word = next;
    }
    b.finish(word)
}

/// Checks an n-output circuit with one n-bit group hits every value once.
fn verify_bijective(scramble: &Circuit, n: usize) -> Result<(), SamplerError> {
    if scramble.groups().len() != 1
        || scramble.groups()[0].width != n
        || scramble.outputs().len() != n
    {
        return Err(SamplerError::NotBijective(format!(
            "shape is not {n} bits to {n} bits"
        )));
    }
    assert!(n <= 16, "bijectivity check enumerates 2^n inputs");
    let name = scramble.groups()[0].name.clone();
    let mut seen = vec![false; 1 << n];
    for v in BitString::enumerate(n) {
        let out = scramble.eval(&[(name.as_str(), &v)]).expect("total circuit");
        let idx = out.to_uint() as usize;
        if seen[idx] {
            return Err(SamplerError::NotBijective(format!("value {out} hit twice")));
        }
        seen[idx] = true;
    }
    Ok(())
}

/// Sampler emitting (scramble(r), f(scramble(r))); the label is correct on
/// every random string.
pub fn build_exact_sampler(
    f: &TargetFunction,
    scramble: &Circuit,
) -> Result<Sampler, SamplerError> {
    let circuit_form = f.circuit_form().ok_or(SamplerError::NotClassical)?;
    let n = f.n();
    verify_bijective(scramble, n)?;
    let scramble_group = scramble.groups()[0].name.clone();
    let mut b = CircuitBuilder::new();
    let r = b.input_group("r", n);
    let x = b.append_circuit(scramble, &[(scramble_group.as_str(), &r)])?;
    let y = b.append_circuit(circuit_form, &[("x", &x)])?;
    let mut outputs = x;
    outputs.push(y[0]);
    Sampler::new(b.finish(outputs), n, 0.0)
}

/// Flip threshold realizing the largest dyadic probability <= eps.
pub fn dyadic_flip_count(eps: f64) -> u64 {
    (eps * (1u64 << AUX_WIDTH) as f64).floor() as u64
}

/// Label-corrupted sampler: r gains AUX_WIDTH auxiliary bits and the label
/// flips when (aux xor mask) < k, with k = floor(eps * 2^AUX_WIDTH) and a
/// seed-derived mask choosing which auxiliary words trigger. The x-marginal
/// stays uniform; the achieved TV from the exact distribution is exactly
/// k / 2^AUX_WIDTH.
pub fn build_approx_sampler(
    f: &TargetFunction,
    scramble: &Circuit,
    eps: f64,
    seed: u64,
) -> Result<Sampler, SamplerError> {
    if !(0.0..=0.5).contains(&eps) {
        return Err(SamplerError::BadEpsilon(eps));
    }
    if eps == 0.0 {
        return build_exact_sampler(f, scramble);
    }
    let circuit_form = f.circuit_form().ok_or(SamplerError::NotClassical)?;
    let n = f.n();
    verify_bijective(scramble, n)?;
    let k = dyadic_flip_count(eps);
    let scramble_group = scramble.groups()[0].name.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mask = BitString::random(&mut rng, AUX_WIDTH);

    let mut b = CircuitBuilder::new();
    let r = b.input_group("r", n + AUX_WIDTH);
    let base = r[..n].to_vec();
    let aux = r[n..].to_vec();
    let x = b.append_circuit(scramble, &[(scramble_group.as_str(), &base)])?;
    let y = b.append_circuit(circuit_form, &[("x", &x)])?;
    let masked: Vec<usize> = aux
        .iter()
        .enumerate()
        .map(|(i, &w)| if mask.get(i) { b.not(w) } else { w })
        .collect();
    let flip = b.lt_const(&masked, &BitString::from_uint(k, AUX_WIDTH));
    let flipped = b.xor(y[0], flip);
    let mut outputs = x;
    outputs.push(flipped);
    Sampler::new(b.finish(outputs), n, eps)
}

/// Exact TV between the sampler's (x, y) distribution and the ideal one
/// (x from dist, y = f(x)), by enumerating every random string. Integer
/// arithmetic throughout; the only rounding is the final division.
pub fn tv_distance_exact(
    s: &Sampler,
    f: &TargetFunction,
    dist: &InputDistribution,
) -> Result<f64, SamplerError> {
    let rho = s.r_width();
    if rho > MAX_ENUM_WIDTH {
        return Err(SamplerError::TooLarge(rho));
    }
    assert_eq!(s.n(), f.n());
    assert_eq!(dist.n(), f.n());
    let mut counts: HashMap<(BitString, bool), u64> = HashMap::new();
    for r in BitString::enumerate(rho) {
        let (x, y) = s.run(&r);
        *counts.entry((x, y)).or_insert(0) += 1;
    }
    let support = dist.support_size() as u128;
    let total = 1u128 << rho;
    // sum over the union of supports of |q - p|, scaled by total * support
    let mut acc: u128 = 0;
    let mut ideal_mass_covered: u128 = 0;
    for ((x, y), c) in &counts {
        let ideal = dist.contains(x) && *y == f.eval(x);
        let p = if ideal { total } else { 0 };
        let q = (*c as u128) * support;
        acc += q.abs_diff(p);
        if ideal {
            ideal_mass_covered += total;
        }
    }
    // ideal pairs the sampler never emits
    acc += support * total - ideal_mass_covered;
    Ok(acc as f64 / (2.0 * (support * total) as f64))
}
