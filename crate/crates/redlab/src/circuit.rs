//! Boolean circuits over the gate basis {AND, OR, XOR, NOT, CONST} with named
//! input-bit groups. Wires are numbered with all input bits first (group by
//! group, in declaration order), then one wire per gate; gate operands must
//! refer to strictly earlier wires, so a circuit is a straight-line program.

use crate::bits::BitString;
use thiserror::Error;

pub type Wire = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Gate {
    And(Wire, Wire),
    Or(Wire, Wire),
    Xor(Wire, Wire),
    Not(Wire),
    Const(bool),
}

impl Gate {
    fn operands(&self) -> (Option<Wire>, Option<Wire>) {
        match *self {
            Gate::And(a, b) | Gate::Or(a, b) | Gate::Xor(a, b) => (Some(a), Some(b)),
            Gate::Not(a) => (Some(a), None),
            Gate::Const(_) => (None, None),
        }
    }

    fn map_wires(&self, f: impl Fn(Wire) -> Wire) -> Gate {
        match *self {
            Gate::And(a, b) => Gate::And(f(a), f(b)),
            Gate::Or(a, b) => Gate::Or(f(a), f(b)),
            Gate::Xor(a, b) => Gate::Xor(f(a), f(b)),
            Gate::Not(a) => Gate::Not(f(a)),
            Gate::Const(v) => Gate::Const(v),
        }
    }
}

#[derive(Clone, Debug)]
pub struct InputGroup {
    pub name: String,
    pub width: usize,
}

#[derive(Error, Debug, PartialEq, Eq)]
pub enum CircuitError {
    #[error("unknown input group {0:?}")]
    UnknownGroup(String),
    #[error("group {group:?} expects {expected} bits, got {got}")]
    WidthMismatch { group: String, expected: usize, got: usize },
    #[error("duplicate assignment for group {0:?}")]
    DuplicateGroup(String),
    #[error("missing assignment for group {0:?}")]
    MissingGroup(String),
    #[error("gate {gate} references wire {wire}, but only {available} wires precede it")]
    ForwardReference { gate: usize, wire: Wire, available: usize },
    #[error("output {index} references unknown wire {wire}")]
    BadOutput { index: usize, wire: Wire },
    #[error("output pin index {0} out of range")]
    BadPin(usize),
    #[error("empty group name or zero-width group {0:?}")]
    BadGroup(String),
}

/// A straight-line circuit with named inputs and an ordered output list.
#[derive(Clone, Debug)]
pub struct Circuit {
    groups: Vec<InputGroup>,
    gates: Vec<Gate>,
    outputs: Vec<Wire>,
}

impl Circuit {
    pub fn new(
        groups: Vec<InputGroup>,
        gates: Vec<Gate>,
        outputs: Vec<Wire>,
    ) -> Result<Self, CircuitError> {
        let mut seen = std::collections::HashSet::new();
        for g in &groups {
            if g.name.is_empty() || g.width == 0 {
                return Err(CircuitError::BadGroup(g.name.clone()));
            }
            if !seen.insert(g.name.clone()) {
                return Err(CircuitError::DuplicateGroup(g.name.clone()));
            }
        }
        let num_inputs: usize = groups.iter().map(|g| g.width).sum();
        for (i, gate) in gates.iter().enumerate() {
            let limit = num_inputs + i;
            let (a, b) = gate.operands();
            for w in [a, b].into_iter().flatten() {
                if w >= limit {
                    return Err(CircuitError::ForwardReference { gate: i, wire: w, available: limit });
                }
            }
        }
        let total = num_inputs + gates.len();
        for (i, &w) in outputs.iter().enumerate() {
            if w >= total {
                return Err(CircuitError::BadOutput { index: i, wire: w });
            }
        }
        Ok(Circuit { groups, gates, outputs })
    }

    pub fn groups(&self) -> &[InputGroup] {
        &self.groups
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn outputs(&self) -> &[Wire] {
        &self.outputs
    }

    pub fn num_inputs(&self) -> usize {
        self.groups.iter().map(|g| g.width).sum()
    }

    pub fn num_wires(&self) -> usize {
        self.num_inputs() + self.gates.len()
    }

    /// Wire index of bit `bit` in group `name`.
    pub fn input_wire(&self, name: &str, bit: usize) -> Result<Wire, CircuitError> {
        let mut offset = 0;
        for g in &self.groups {
            if g.name == name {
                assert!(bit < g.width);
                return Ok(offset + bit);
            }
            offset += g.width;
        }
        Err(CircuitError::UnknownGroup(name.to_string()))
    }

    /// Evaluates the circuit on one bitstring per input group (any order,
    /// every group exactly once) and returns the output bits in order.
    pub fn eval(&self, inputs: &[(&str, &BitString)]) -> Result<BitString, CircuitError> {
        let mut values = vec![false; self.num_wires()];
        let mut assigned = vec![false; self.groups.len()];
        for &(name, bits) in inputs {
            let gi = self
                .groups
                .iter()
                .position(|g| g.name == name)
                .ok_or_else(|| CircuitError::UnknownGroup(name.to_string()))?;
            if assigned[gi] {
                return Err(CircuitError::DuplicateGroup(name.to_string()));
            }
            if bits.width() != self.groups[gi].width {
                return Err(CircuitError::WidthMismatch {
                    group: name.to_string(),
                    expected: self.groups[gi].width,
                    got: bits.width(),
                });
            }
            assigned[gi] = true;
            let offset: usize = self.groups[..gi].iter().map(|g| g.width).sum();
            for i in 0..bits.width() {
                values[offset + i] = bits.get(i);
            }
        }
        if let Some(gi) = assigned.iter().position(|&a| !a) {
            return Err(CircuitError::MissingGroup(self.groups[gi].name.clone()));
        }
        let base = self.num_inputs();
        for (i, gate) in self.gates.iter().enumerate() {
            values[base + i] = match *gate {
                Gate::And(a, b) => values[a] && values[b],
                Gate::Or(a, b) => values[a] || values[b],
                Gate::Xor(a, b) => values[a] ^ values[b],
                Gate::Not(a) => !values[a],
                Gate::Const(v) => v,
            };
        }
        Ok(BitString::from_bools(self.outputs.iter().map(|&w| values[w]).collect()))
    }

    /// Substitutes constants for the first `value.width()` bits of `group`.
    /// The returned circuit keeps the remaining free bits of the group (the
    /// group disappears entirely when fully fixed); all other groups, gate
    /// structure and outputs are preserved up to renumbering.
    pub fn fix_inputs(&self, group: &str, value: &BitString) -> Result<Circuit, CircuitError> {
        let gi = self
            .groups
            .iter()
            .position(|g| g.name == group)
            .ok_or_else(|| CircuitError::UnknownGroup(group.to_string()))?;
        let old_width = self.groups[gi].width;
        if value.width() > old_width {
            return Err(CircuitError::WidthMismatch {
                group: group.to_string(),
                expected: old_width,
                got: value.width(),
            });
        }
        let fixed = value.width();
        let old_offset: usize = self.groups[..gi].iter().map(|g| g.width).sum();
        let old_num_inputs = self.num_inputs();

        let mut new_groups = Vec::new();
        for (j, g) in self.groups.iter().enumerate() {
            if j == gi {
                if old_width - fixed > 0 {
                    new_groups.push(InputGroup { name: g.name.clone(), width: old_width - fixed });
                }
            } else {
                new_groups.push(g.clone());
            }
        }
        let new_num_inputs = old_num_inputs - fixed;

        // Old input wire -> new wire. Fixed bits point at the Const gates
        // inserted ahead of the original gate list.
        let mut input_map = vec![0usize; old_num_inputs];
        let mut next = 0;
        for (j, g) in self.groups.iter().enumerate() {
            let offset: usize = self.groups[..j].iter().map(|h| h.width).sum();
            for b in 0..g.width {
                if j == gi && b < fixed {
                    input_map[offset + b] = new_num_inputs + b;
                } else {
                    input_map[offset + b] = next;
                    next += 1;
                }
            }
        }
        debug_assert_eq!(next, new_num_inputs);
        let _ = old_offset;

        let remap = |w: Wire| -> Wire {
            if w < old_num_inputs {
                input_map[w]
            } else {
                new_num_inputs + fixed + (w - old_num_inputs)
            }
        };

        let mut new_gates: Vec<Gate> = (0..fixed).map(|b| Gate::Const(value.get(b))).collect();
        new_gates.extend(self.gates.iter().map(|g| g.map_wires(remap)));
        let new_outputs = self.outputs.iter().map(|&w| remap(w)).collect();
        Circuit::new(new_groups, new_gates, new_outputs)
    }
}

/// Incremental circuit construction. Wires handed out by the builder are
/// valid operands for every later gate.
pub struct CircuitBuilder {
    groups: Vec<InputGroup>,
    gates: Vec<Gate>,
    inputs_frozen: bool,
}

impl CircuitBuilder {
    pub fn new() -> Self {
        CircuitBuilder { groups: Vec::new(), gates: Vec::new(), inputs_frozen: false }
    }

    /// Declares an input group and returns its wires. All groups must be
    /// declared before the first gate.
    pub fn input_group(&mut self, name: &str, width: usize) -> Vec<Wire> {
        assert!(!self.inputs_frozen, "declare all input groups before adding gates");
        assert!(width > 0, "zero-width input group");
        let offset: usize = self.groups.iter().map(|g| g.width).sum();
        self.groups.push(InputGroup { name: name.to_string(), width });
        (offset..offset + width).collect()
    }

    fn push(&mut self, gate: Gate) -> Wire {
        self.inputs_frozen = true;
        let num_inputs: usize = self.groups.iter().map(|g| g.width).sum();
        let w = num_inputs + self.gates.len();
        self.gates.push(gate);
        w
    }

    pub fn and(&mut self, a: Wire, b: Wire) -> Wire {
        self.push(Gate::And(a, b))
    }

    pub fn or(&mut self, a: Wire, b: Wire) -> Wire {
        self.push(Gate::Or(a, b))
    }

    pub fn xor(&mut self, a: Wire, b: Wire) -> Wire {
        self.push(Gate::Xor(a, b))
    }

    pub fn not(&mut self, a: Wire) -> Wire {
        self.push(Gate::Not(a))
    }

    pub fn constant(&mut self, v: bool) -> Wire {
        self.push(Gate::Const(v))
    }

    /// Inlines another circuit's gates, wiring each of its input groups to
    /// existing wires of this builder. Returns the sub-circuit's outputs as
    /// builder wires.
    pub fn append_circuit(
        &mut self,
        sub: &Circuit,
        bindings: &[(&str, &[Wire])],
    ) -> Result<Vec<Wire>, CircuitError> {
        for (name, _) in bindings {
            if !sub.groups().iter().any(|g| g.name == *name) {
                return Err(CircuitError::UnknownGroup(name.to_string()));
            }
        }
        let mut input_map: Vec<Wire> = Vec::with_capacity(sub.num_inputs());
        for g in sub.groups() {
            let (_, wires) = bindings
                .iter()
                .find(|(name, _)| *name == g.name)
                .ok_or_else(|| CircuitError::MissingGroup(g.name.clone()))?;
            if wires.len() != g.width {
                return Err(CircuitError::WidthMismatch {
                    group: g.name.clone(),
                    expected: g.width,
                    got: wires.len(),
                });
            }
            input_map.extend_from_slice(wires);
        }
        let num_inputs = sub.num_inputs();
        let mut gate_map: Vec<Wire> = Vec::with_capacity(sub.gates().len());
        for gate in sub.gates() {
            let mapped = gate.map_wires(|w| {
                if w < num_inputs {
                    input_map[w]
                } else {
                    gate_map[w - num_inputs]
                }
            });
            let new_wire = self.push(mapped);
            gate_map.push(new_wire);
        }
        Ok(sub
            .outputs()
            .iter()
            .map(|&w| if w < num_inputs { input_map[w] } else { gate_map[w - num_inputs] })
            .collect())
    }

    /// XOR of a wire list; empty list is the constant 0.
    pub fn xor_chain(&mut self, wires: &[Wire]) -> Wire {
        match wires.split_first() {
            None => self.constant(false),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &w| self.xor(acc, w)),
        }
    }

    /// AND of a wire list; empty list is the constant 1.
    pub fn and_chain(&mut self, wires: &[Wire]) -> Wire {
        match wires.split_first() {
            None => self.constant(true),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &w| self.and(acc, w)),
        }
    }

    /// OR of a wire list; empty list is the constant 0.
    pub fn or_chain(&mut self, wires: &[Wire]) -> Wire {
        match wires.split_first() {
            None => self.constant(false),
            Some((&first, rest)) => rest.iter().fold(first, |acc, &w| self.or(acc, w)),
        }
    }

    /// 1 iff the wires equal the constant pattern bit for bit.
    pub fn eq_const(&mut self, wires: &[Wire], pattern: &BitString) -> Wire {
        assert_eq!(wires.len(), pattern.width());
        let mut terms = Vec::with_capacity(wires.len());
        for (i, &w) in wires.iter().enumerate() {
            terms.push(if pattern.get(i) { w } else { self.not(w) });
        }
        self.and_chain(&terms)
    }

    /// 1 iff the wires, read big-endian, are strictly less than `bound`.
    /// Standard most-significant-first comparison chain.
    pub fn lt_const(&mut self, wires: &[Wire], bound: &BitString) -> Wire {
        assert_eq!(wires.len(), bound.width());
        let mut lt = self.constant(false);
        let mut eq = self.constant(true);
        for (i, &w) in wires.iter().enumerate() {
            if bound.get(i) {
                // wire 0 here makes the value smaller
                let nw = self.not(w);
                let here = self.and(eq, nw);
                lt = self.or(lt, here);
                eq = self.and(eq, w);
            } else {
                let nw = self.not(w);
                eq = self.and(eq, nw);
            }
        }
        lt
    }

    /// Unsigned binary sum of single-bit wires, little-endian result.
    /// Uses a ripple counter; adequate for desk-scale operand counts.
    pub fn popcount(&mut self, wires: &[Wire]) -> Vec<Wire> {
        let width = usize::BITS as usize - wires.len().leading_zeros() as usize;
        let width = width.max(1);
        let mut acc: Vec<Wire> = vec![self.constant(false); width];
        for &w in wires {
            let mut carry = w;
            for slot in acc.iter_mut() {
                let sum = self.xor(*slot, carry);
                carry = self.and(*slot, carry);
                *slot = sum;
            }
        }
        acc
    }

    /// 1 iff popcount(a) > popcount(b). Little-endian magnitude comparison.
    pub fn popcount_gt(&mut self, a: &[Wire], b: &[Wire]) -> Wire {
        let ca = self.popcount(a);
        let cb = self.popcount(b);
        let width = ca.len().max(cb.len());
        let zero = self.constant(false);
        let get = |v: &[Wire], i: usize| if i < v.len() { v[i] } else { zero };
        let mut gt = self.constant(false);
        let mut eq = self.constant(true);
        for i in (0..width).rev() {
            let (ai, bi) = (get(&ca, i), get(&cb, i));
            let nbi = self.not(bi);
            let here = self.and(ai, nbi);
            let here = self.and(eq, here);
            gt = self.or(gt, here);
            let x = self.xor(ai, bi);
            let same = self.not(x);
            eq = self.and(eq, same);
        }
        gt
    }

    pub fn finish(self, outputs: Vec<Wire>) -> Circuit {
        Circuit::new(self.groups, self.gates, outputs).expect("builder produced invalid circuit")
    }
}

impl Default for CircuitBuilder {
    fn default() -> Self {
        Self::new()
    }
}
