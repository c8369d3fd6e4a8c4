//! Target functions: quantum statevector-backed promise functions and
//! classical SAT-invertible stand-ins.
//!
//! A quantum target applies a gate list to a basis state |x> and thresholds
//! the Z expectation on qubit 0: f(x) = 1 when the expectation is at most
//! -1/3, f(x) = 0 otherwise, and x is inside the promise when the
//! expectation clears 1/3 in magnitude. Everything outside the promise
//! evaluates to 0. A classical stand-in is a pseudorandom circuit whose
//! truth table is roughly balanced; those are the targets the SAT-driven
//! reductions accept, since their circuit form embeds directly into CNF.

use crate::bits::BitString;
use crate::circuit::{Circuit, CircuitBuilder};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::fmt;
use thiserror::Error;

/// Statevector ceiling; 2^12 amplitudes.
pub const MAX_QUBITS: usize = 12;

/// Promise threshold with the guard band that keeps borderline
/// expectations out of the promise.
const PROMISE_THRESHOLD: f64 = 1.0 / 3.0 + 1e-9;

#[derive(Error, Debug)]
pub enum TargetError {
    #[error("{0} qubits exceeds the {MAX_QUBITS}-qubit simulator ceiling")]
    TooManyQubits(usize),
    #[error("input width {got} does not match {want} qubits")]
    InputWidth { want: usize, got: usize },
    #[error("gate line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("target circuit must have input group \"x\" and one output: {0}")]
    BadCircuit(String),
}

/// Gate set {H, S, T, X, Z, CNOT}; qubit indices are 0-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QGate {
    H(usize),
    S(usize),
    T(usize),
    X(usize),
    Z(usize),
    Cnot(usize, usize),
}

impl fmt::Display for QGate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            QGate::H(q) => write!(f, "H {q}"),
            QGate::S(q) => write!(f, "S {q}"),
            QGate::T(q) => write!(f, "T {q}"),
            QGate::X(q) => write!(f, "X {q}"),
            QGate::Z(q) => write!(f, "Z {q}"),
            QGate::Cnot(c, t) => write!(f, "CNOT {c} {t}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QuantumCircuit {
    qubits: usize,
    gates: Vec<QGate>,
}

impl QuantumCircuit {
    pub fn new(qubits: usize, gates: Vec<QGate>) -> Result<Self, TargetError> {
        if qubits == 0 || qubits > MAX_QUBITS {
            return Err(TargetError::TooManyQubits(qubits));
        }
        for (i, g) in gates.iter().enumerate() {
            let ok = match *g {
                QGate::H(q) | QGate::S(q) | QGate::T(q) | QGate::X(q) | QGate::Z(q) => q < qubits,
                QGate::Cnot(c, t) => c < qubits && t < qubits && c != t,
            };
            if !ok {
                return Err(TargetError::Parse { line: i + 1, msg: format!("bad qubit in {g}") });
            }
        }
        Ok(QuantumCircuit { qubits, gates })
    }

    /// One gate per line (`H 0`, `CNOT 0 3`); blank lines and lines starting
    /// with `#` are skipped. Qubit count is one past the largest index.
    pub fn parse(text: &str) -> Result<Self, TargetError> {
        let mut gates = Vec::new();
        let mut max_q = 0usize;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_ascii_whitespace();
            let name = parts.next().unwrap();
            let args: Vec<usize> = parts
                .map(|t| {
                    t.parse::<usize>().map_err(|_| TargetError::Parse {
                        line: lineno + 1,
                        msg: format!("bad qubit index {t:?}"),
                    })
                })
                .collect::<Result<_, _>>()?;
            let gate = match (name, args.as_slice()) {
                ("H", [q]) => QGate::H(*q),
                ("S", [q]) => QGate::S(*q),
                ("T", [q]) => QGate::T(*q),
                ("X", [q]) => QGate::X(*q),
                ("Z", [q]) => QGate::Z(*q),
                ("CNOT", [c, t]) if c != t => QGate::Cnot(*c, *t),
                ("CNOT", [c, t]) if c == t => {
                    return Err(TargetError::Parse {
                        line: lineno + 1,
                        msg: "CNOT control equals target".to_string(),
                    })
                }
                _ => {
                    return Err(TargetError::Parse {
                        line: lineno + 1,
                        msg: format!("unrecognized gate {line:?}"),
                    })
                }
            };
            for &q in &args {
                max_q = max_q.max(q);
            }
            gates.push(gate);
        }
        QuantumCircuit::new(max_q + 1, gates)
    }

    pub fn qubits(&self) -> usize {
        self.qubits
    }

    pub fn gates(&self) -> &[QGate] {
        &self.gates
    }
}

impl fmt::Display for QuantumCircuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for g in &self.gates {
            writeln!(f, "{g}")?;
        }
        Ok(())
    }
}

/// Full statevector after running the circuit on basis state |x>.
/// Amplitude index packs qubit j into bit j; the norm is checked to 1e-12
/// after every gate.
pub fn simulate(qc: &QuantumCircuit, x: &BitString) -> Result<Vec<Complex64>, TargetError> {
    if qc.qubits > MAX_QUBITS {
        return Err(TargetError::TooManyQubits(qc.qubits));
    }
    if x.width() != qc.qubits {
        return Err(TargetError::InputWidth { want: qc.qubits, got: x.width() });
    }
    let dim = 1usize << qc.qubits;
    let mut state = vec![Complex64::new(0.0, 0.0); dim];
    let mut idx = 0usize;
    for j in 0..qc.qubits {
        if x.get(j) {
            idx |= 1 << j;
        }
    }
    state[idx] = Complex64::new(1.0, 0.0);
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let t_phase = Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4);
    for g in &qc.gates {
        match *g {
            QGate::H(q) => {
                let bit = 1 << q;
                for i in 0..dim {
                    if i & bit == 0 {
                        let a = state[i];
                        let b = state[i | bit];
                        state[i] = (a + b) * inv_sqrt2;
                        state[i | bit] = (a - b) * inv_sqrt2;
                    }
                }
            }
            QGate::S(q) => {
                let bit = 1 << q;
                for (i, amp) in state.iter_mut().enumerate() {
                    if i & bit != 0 {
                        *amp *= Complex64::new(0.0, 1.0);
                    }
                }
            }
            QGate::T(q) => {
                let bit = 1 << q;
                for (i, amp) in state.iter_mut().enumerate() {
                    if i & bit != 0 {
                        *amp *= t_phase;
                    }
                }
            }
            QGate::X(q) => {
                let bit = 1 << q;
                for i in 0..dim {
                    if i & bit == 0 {
                        state.swap(i, i | bit);
                    }
                }
            }
            QGate::Z(q) => {
                let bit = 1 << q;
                for (i, amp) in state.iter_mut().enumerate() {
                    if i & bit != 0 {
                        *amp = -*amp;
                    }
                }
            }
            QGate::Cnot(c, t) => {
                let cbit = 1 << c;
                let tbit = 1 << t;
                for i in 0..dim {
                    if i & cbit != 0 && i & tbit == 0 {
                        state.swap(i, i | tbit);
                    }
                }
            }
        }
        let norm: f64 = state.iter().map(|a| a.norm_sqr()).sum();
        assert!((norm - 1.0).abs() <= 1e-12, "norm drifted to {norm} after {g}");
    }
    Ok(state)
}

/// Exact Z expectation on qubit 0 after applying the circuit to |x>.
pub fn expval_z1(qc: &QuantumCircuit, x: &BitString) -> Result<f64, TargetError> {
    let state = simulate(qc, x)?;
    let mut e = 0.0;
    for (i, amp) in state.iter().enumerate() {
        let sign = if i & 1 == 0 { 1.0 } else { -1.0 };
        e += sign * amp.norm_sqr();
    }
    Ok(e)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TargetKind {
    Quantum,
    Classical,
}

/// A total boolean function on n-bit inputs, quantum- or circuit-backed.
#[derive(Clone, Debug)]
pub struct TargetFunction {
    kind: TargetKind,
    n: usize,
    quantum: Option<QuantumCircuit>,
    circuit_form: Option<Circuit>,
}

impl TargetFunction {
    pub fn kind(&self) -> TargetKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// The CNF-encodable form; present exactly for classical targets.
    pub fn circuit_form(&self) -> Option<&Circuit> {
        self.circuit_form.as_ref()
    }

    pub fn quantum_circuit(&self) -> Option<&QuantumCircuit> {
        self.quantum.as_ref()
    }

    /// f(x); total, and 0 everywhere outside a quantum target's promise.
    pub fn eval(&self, x: &BitString) -> bool {
        assert_eq!(x.width(), self.n, "input width mismatch");
        match self.kind {
            TargetKind::Quantum => {
                let e = expval_z1(self.quantum.as_ref().unwrap(), x).unwrap();
                e <= -PROMISE_THRESHOLD
            }
            TargetKind::Classical => {
                self.circuit_form.as_ref().unwrap().eval(&[("x", x)]).unwrap().get(0)
            }
        }
    }

    /// Wraps an explicit circuit (single input group "x", single output) as
    /// a classical target.
    pub fn from_circuit(circuit: Circuit) -> Result<TargetFunction, TargetError> {
        if circuit.groups().len() != 1 || circuit.groups()[0].name != "x" {
            return Err(TargetError::BadCircuit(format!(
                "groups {:?}",
                circuit.groups().iter().map(|g| g.name.clone()).collect::<Vec<_>>()
            )));
        }
        if circuit.outputs().len() != 1 {
            return Err(TargetError::BadCircuit(format!("{} outputs", circuit.outputs().len())));
        }
        let n = circuit.groups()[0].width;
        Ok(TargetFunction { kind: TargetKind::Classical, n, quantum: None, circuit_form: Some(circuit) })
    }

    /// Promise membership; classical targets are total and always inside.
    pub fn in_promise(&self, x: &BitString) -> bool {
        match self.kind {
            TargetKind::Quantum => {
                let e = expval_z1(self.quantum.as_ref().unwrap(), x).unwrap();
                e.abs() >= PROMISE_THRESHOLD
            }
            TargetKind::Classical => true,
        }
    }
}

/// Thresholds the Z expectation on qubit 0 into a promise function over
/// n-bit inputs; n must equal the qubit count.
pub fn make_quantum_target(qc: QuantumCircuit, n: usize) -> Result<TargetFunction, TargetError> {
    if qc.qubits() > MAX_QUBITS {
        return Err(TargetError::TooManyQubits(qc.qubits()));
    }
    if n != qc.qubits() {
        return Err(TargetError::InputWidth { want: qc.qubits(), got: n });
    }
    Ok(TargetFunction { kind: TargetKind::Quantum, n, quantum: Some(qc), circuit_form: None })
}

/// Pseudorandom layered circuit over input group "x", resampled until its
/// ones-fraction lands in [0.42, 0.58] so downstream experiments see label
/// variety. Exact fraction for n <= 16, a 4096-input estimate above that.
pub fn make_classical_standin(seed: u64, n: usize) -> TargetFunction {
    assert!((1..=32).contains(&n), "stand-in width {n} outside [1, 32]");
    for attempt in 0..1000u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(attempt));
        let circuit = random_layered_circuit(&mut rng, n);
        let fraction = if n <= 16 {
            let total = 1u64 << n;
            let ones = BitString::enumerate(n)
                .filter(|x| circuit.eval(&[("x", x)]).unwrap().get(0))
                .count() as f64;
            ones / total as f64
        } else {
            let trials = 4096;
            let ones = (0..trials)
                .filter(|_| {
                    let x = BitString::random(&mut rng, n);
                    circuit.eval(&[("x", &x)]).unwrap().get(0)
                })
                .count() as f64;
            ones / trials as f64
        };
        if (0.42..=0.58).contains(&fraction) {
            return TargetFunction {
                kind: TargetKind::Classical,
                n,
                quantum: None,
                circuit_form: Some(circuit),
            };
        }
    }
    unreachable!("balanced stand-in not found in 1000 attempts");
}

/// n layers of n wires each, mixed gate types, output from the last layer.
fn random_layered_circuit<R: Rng>(rng: &mut R, n: usize) -> Circuit {
    let mut b = CircuitBuilder::new();
    let mut prev = b.input_group("x", n);
    for _ in 0..n {
        let mut layer = Vec::with_capacity(n);
        for _ in 0..n {
            let a = prev[rng.gen_range(0..prev.len())];
            let c = prev[rng.gen_range(0..prev.len())];
            let w = match rng.gen_range(0..6) {
                0 => b.and(a, c),
                1 => b.or(a, c),
                // xor-heavy mix keeps truth tables near balanced
                2 | 3 | 4 => b.xor(a, c),
                _ => b.not(a),
            };
            layer.push(w);
        }
        prev = layer;
    }
    let out = prev[0];
    b.finish(vec![out])
}

/// Input distribution for experiments: uniform over all n-bit strings, or
/// uniform over a promise target's promise set.
#[derive(Clone, Debug)]
pub enum InputDistribution {
    Uniform { n: usize },
    PromiseUniform { support: Vec<BitString> },
}

impl InputDistribution {
    pub fn uniform(n: usize) -> InputDistribution {
        InputDistribution::Uniform { n }
    }

    /// Materializes the promise set by a full sweep; the target must be
    /// small enough to enumerate and must have a nonempty promise.
    pub fn promise_uniform(target: &TargetFunction) -> InputDistribution {
        assert!(target.n() <= 16, "promise sweep needs n <= 16");
        let support: Vec<BitString> =
            BitString::enumerate(target.n()).filter(|x| target.in_promise(x)).collect();
        assert!(!support.is_empty(), "empty promise set");
        InputDistribution::PromiseUniform { support }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> BitString {
        match self {
            InputDistribution::Uniform { n } => BitString::random(rng, *n),
            InputDistribution::PromiseUniform { support } => {
                support[rng.gen_range(0..support.len())].clone()
            }
        }
    }

    pub fn n(&self) -> usize {
        match self {
            InputDistribution::Uniform { n } => *n,
            InputDistribution::PromiseUniform { support } => support[0].width(),
        }
    }

    /// Number of equally weighted support points.
    pub fn support_size(&self) -> u64 {
        match self {
            InputDistribution::Uniform { n } => 1u64 << n,
            InputDistribution::PromiseUniform { support } => support.len() as u64,
        }
    }

    pub fn contains(&self, x: &BitString) -> bool {
        match self {
            InputDistribution::Uniform { n } => x.width() == *n,
            InputDistribution::PromiseUniform { support } => support.contains(x),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    #[test]
    fn empty_circuit_measures_plus_one_on_zero() {
        let qc = QuantumCircuit::new(3, vec![]).unwrap();
        let e = expval_z1(&qc, &BitString::zeros(3)).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
        let e = expval_z1(&qc, &BitString::parse("100").unwrap()).unwrap();
        assert!((e + 1.0).abs() < 1e-12);
    }

    #[test]
    fn hadamard_on_measured_qubit_gives_zero() {
        let qc = QuantumCircuit::parse("H 0").unwrap();
        let e = expval_z1(&qc, &BitString::parse("0").unwrap()).unwrap();
        assert!(e.abs() < 1e-12);
    }

    /// Independent oracle: dense unitaries assembled by Kronecker products,
    /// multiplied onto the basis vector.
    mod dense {
        use num_complex::Complex64;

        pub type Mat = Vec<Vec<Complex64>>;

        pub fn eye(d: usize) -> Mat {
            let mut m = vec![vec![Complex64::new(0.0, 0.0); d]; d];
            for (i, row) in m.iter_mut().enumerate() {
                row[i] = Complex64::new(1.0, 0.0);
            }
            m
        }

        pub fn kron(a: &Mat, b: &Mat) -> Mat {
            let (ra, ca, rb, cb) = (a.len(), a[0].len(), b.len(), b[0].len());
            let mut m = vec![vec![Complex64::new(0.0, 0.0); ca * cb]; ra * rb];
            for i in 0..ra {
                for j in 0..ca {
                    for k in 0..rb {
                        for l in 0..cb {
                            m[i * rb + k][j * cb + l] = a[i][j] * b[k][l];
                        }
                    }
                }
            }
            m
        }

        pub fn matvec(m: &Mat, v: &[Complex64]) -> Vec<Complex64> {
            m.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
        }
    }

    /// Dense single-qubit gate on qubit q of a dim-2^n space. The simulator
    /// packs qubit j into bit j of the amplitude index, so qubit 0 is the
    /// LAST factor of the Kronecker chain.
    fn lift_1q(gate: &dense::Mat, q: usize, n: usize) -> dense::Mat {
        let mut m = dense::eye(1);
        for j in (0..n).rev() {
            let f = if j == q { gate.clone() } else { dense::eye(2) };
            m = dense::kron(&m, &f);
        }
        m
    }

    fn dense_expval(qc: &QuantumCircuit, x: &BitString) -> f64 {
        use dense::*;
        let n = qc.qubits();
        let dim = 1usize << n;
        let c = |re: f64, im: f64| Complex64::new(re, im);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = vec![vec![c(s, 0.0), c(s, 0.0)], vec![c(s, 0.0), c(-s, 0.0)]];
        let sg = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 1.0)]];
        let tg = vec![
            vec![c(1.0, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), Complex64::from_polar(1.0, std::f64::consts::FRAC_PI_4)],
        ];
        let xg = vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]];
        let zg = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]];

        let mut v = vec![c(0.0, 0.0); dim];
        let mut idx = 0usize;
        for j in 0..n {
            if x.get(j) {
                idx |= 1 << j;
            }
        }
        v[idx] = c(1.0, 0.0);
        for g in qc.gates() {
            let m = match *g {
                QGate::H(q) => lift_1q(&h, q, n),
                QGate::S(q) => lift_1q(&sg, q, n),
                QGate::T(q) => lift_1q(&tg, q, n),
                QGate::X(q) => lift_1q(&xg, q, n),
                QGate::Z(q) => lift_1q(&zg, q, n),
                QGate::Cnot(ctl, tgt) => {
                    // build elementwise from the permutation it induces
                    let mut m = vec![vec![c(0.0, 0.0); dim]; dim];
                    for i in 0..dim {
                        let j = if i & (1 << ctl) != 0 { i ^ (1 << tgt) } else { i };
                        m[j][i] = c(1.0, 0.0);
                    }
                    m
                }
            };
            v = matvec(&m, &v);
        }
        v.iter()
            .enumerate()
            .map(|(i, a)| if i & 1 == 0 { a.norm_sqr() } else { -a.norm_sqr() })
            .sum()
    }

    #[test]
    fn statevector_agrees_with_dense_matrix_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let n = rng.gen_range(2..=5);
            let gates: Vec<QGate> = (0..30)
                .map(|_| {
                    let q = rng.gen_range(0..n);
                    match rng.gen_range(0..6) {
                        0 => QGate::H(q),
                        1 => QGate::S(q),
                        2 => QGate::T(q),
                        3 => QGate::X(q),
                        4 => QGate::Z(q),
                        _ => {
                            let mut t = rng.gen_range(0..n);
                            while t == q {
                                t = rng.gen_range(0..n);
                            }
                            QGate::Cnot(q, t)
                        }
                    }
                })
                .collect();
            let qc = QuantumCircuit::new(n, gates).unwrap();
            for _ in 0..4 {
                let x = BitString::random(&mut rng, n);
                let fast = expval_z1(&qc, &x).unwrap();
                let slow = dense_expval(&qc, &x);
                assert!((fast - slow).abs() < 1e-10, "n={n} x={x}: {fast} vs {slow}");
            }
        }
    }

    #[test]
    fn identity_target_reads_first_bit() {
        let qc = QuantumCircuit::new(4, vec![]).unwrap();
        let t = make_quantum_target(qc, 4).unwrap();
        for x in BitString::enumerate(4) {
            assert!(t.in_promise(&x));
            assert_eq!(t.eval(&x), x.get(0));
        }
    }

    #[test]
    fn hadamard_target_is_all_outside_promise() {
        let qc = QuantumCircuit::parse("H 0").unwrap();
        let t = make_quantum_target(qc, 1).unwrap();
        for x in BitString::enumerate(1) {
            assert!(!t.in_promise(&x));
            assert!(!t.eval(&x), "outside the promise the value is 0");
        }
    }

    /// Controlled-S sandwiched in Hadamards: qubit 1 decides whether the
    /// phase kicks qubit 0 to expectation 0 (outside) or leaves it at +1.
    fn mixed_promise_circuit() -> QuantumCircuit {
        let text = "H 0\nT 1\nT 0\nCNOT 1 0\nT 0\nT 0\nT 0\nT 0\nT 0\nT 0\nT 0\nCNOT 1 0\nH 0";
        QuantumCircuit::parse(text).unwrap()
    }

    #[test]
    fn mixed_promise_membership_follows_control_bit() {
        let qc = mixed_promise_circuit();
        let t = make_quantum_target(qc, 2).unwrap();
        for x in BitString::enumerate(2) {
            // qubit 1 is the second input bit; inside the promise the
            // Hadamard pair acts as identity and qubit 0 reads out directly
            assert_eq!(t.in_promise(&x), !x.get(1), "at {x}");
            assert_eq!(t.eval(&x), !x.get(1) && x.get(0), "at {x}");
        }
    }

    #[test]
    fn promise_fractions_match_direct_sweep_at_n8() {
        // pad the mixed circuit to 8 qubits with gates on high qubits
        let mut gates = mixed_promise_circuit().gates().to_vec();
        gates.push(QGate::X(5));
        gates.push(QGate::Cnot(5, 6));
        gates.push(QGate::H(7));
        let qc = QuantumCircuit::new(8, gates).unwrap();
        let t = make_quantum_target(qc.clone(), 8).unwrap();
        let via_target = BitString::enumerate(8).filter(|x| t.in_promise(x)).count();
        let direct = BitString::enumerate(8)
            .filter(|x| expval_z1(&qc, x).unwrap().abs() >= 1.0 / 3.0 + 1e-9)
            .count();
        assert_eq!(via_target, direct);
        assert_eq!(via_target, 128, "half the inputs carry the dephasing control");
    }

    #[test]
    fn standin_is_deterministic_per_seed() {
        let a = make_classical_standin(42, 8);
        let b = make_classical_standin(42, 8);
        for x in BitString::enumerate(8) {
            assert_eq!(a.eval(&x), b.eval(&x));
        }
    }

    #[test]
    fn standin_circuit_form_matches_evaluator() {
        let t = make_classical_standin(7, 10);
        let c = t.circuit_form().expect("classical targets carry a circuit");
        for x in BitString::enumerate(10) {
            assert_eq!(t.eval(&x), c.eval(&[("x", &x)]).unwrap().get(0));
        }
    }

    #[test]
    fn standin_truth_tables_are_roughly_balanced() {
        for seed in 0..20 {
            let t = make_classical_standin(seed, 10);
            let ones = BitString::enumerate(10).filter(|x| t.eval(x)).count() as f64;
            let frac = ones / 1024.0;
            assert!((0.4..=0.6).contains(&frac), "seed {seed}: fraction {frac}");
        }
    }

    #[test]
    fn gate_text_round_trip_and_errors() {
        let text = "H 0\nCNOT 0 3\nT 2\n";
        let qc = QuantumCircuit::parse(text).unwrap();
        assert_eq!(qc.qubits(), 4);
        assert_eq!(qc.to_string(), text);
        assert!(QuantumCircuit::parse("CNOT 1 1").is_err());
        assert!(QuantumCircuit::parse("RY 0").is_err());
        assert!(QuantumCircuit::parse("H x").is_err());
        // comments and blanks are tolerated
        assert!(QuantumCircuit::parse("# bell pair\n\nH 0\nCNOT 0 1\n").is_ok());
    }

    #[test]
    fn qubit_ceiling_is_enforced() {
        assert!(matches!(
            QuantumCircuit::new(13, vec![]),
            Err(TargetError::TooManyQubits(13))
        ));
    }

    #[test]
    fn uniform_distribution_frequencies_within_three_sigma() {
        let d = InputDistribution::uniform(4);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let n = 100_000u64;
        let mut counts = vec![0u64; 16];
        for _ in 0..n {
            counts[d.sample(&mut rng).to_uint() as usize] += 1;
        }
        let p = 1.0 / 16.0;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        for (v, &c) in counts.iter().enumerate() {
            let dev = (c as f64 - n as f64 * p).abs();
            assert!(dev <= 3.0 * sigma, "value {v}: deviation {dev} vs sigma {sigma}");
        }
    }

    #[test]
    fn promise_uniform_sticks_to_the_promise_set() {
        let qc = mixed_promise_circuit();
        let t = make_quantum_target(qc, 2).unwrap();
        let d = InputDistribution::promise_uniform(&t);
        assert_eq!(d.support_size(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let x = d.sample(&mut rng);
            assert!(t.in_promise(&x));
            assert!(d.contains(&x));
        }
    }
}
