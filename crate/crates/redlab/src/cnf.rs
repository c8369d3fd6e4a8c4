//! CNF formulas with DIMACS-style signed literals and the Tseitin encoding
//! of circuits. Variable numbering is fixed by construction: one variable per
//! circuit wire, input wires first, so projections onto input groups never
//! need a separate lookup table.

use crate::bits::BitString;
use crate::circuit::{Circuit, CircuitError, Gate};
use std::fmt::Write as _;

/// A clause list over variables 1..=num_vars. The only formula allowed to
/// contain an empty clause is the explicit contradiction.
#[derive(Clone, Debug)]
pub struct CnfFormula {
    num_vars: usize,
    clauses: Vec<Vec<i32>>,
    input_vars: Vec<(String, Vec<i32>)>,
    output_vars: Vec<i32>,
}

impl CnfFormula {
    pub fn new(num_vars: usize) -> Self {
        CnfFormula { num_vars, clauses: Vec::new(), input_vars: Vec::new(), output_vars: Vec::new() }
    }

    /// The explicit FALSE formula: one empty clause, no variables.
    pub fn contradiction() -> Self {
        CnfFormula { num_vars: 0, clauses: vec![vec![]], input_vars: Vec::new(), output_vars: Vec::new() }
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn clauses(&self) -> &[Vec<i32>] {
        &self.clauses
    }

    /// Variables carrying each input group's bits, in group declaration order.
    pub fn input_vars(&self) -> &[(String, Vec<i32>)] {
        &self.input_vars
    }

    pub fn group_vars(&self, name: &str) -> Option<&[i32]> {
        self.input_vars.iter().find(|(g, _)| g == name).map(|(_, v)| v.as_slice())
    }

    /// Variables carrying the circuit outputs (before any pinning).
    pub fn output_vars(&self) -> &[i32] {
        &self.output_vars
    }

    pub fn fresh_var(&mut self) -> i32 {
        self.num_vars += 1;
        self.num_vars as i32
    }

    pub fn add_clause(&mut self, clause: Vec<i32>) {
        assert!(!clause.is_empty(), "empty clause; use CnfFormula::contradiction");
        for &lit in &clause {
            let v = lit.unsigned_abs() as usize;
            assert!(lit != 0 && v <= self.num_vars, "literal {lit} out of range");
        }
        self.clauses.push(clause);
    }

    /// Constrains XOR of `vars` to equal `parity` via a Tseitin-encoded XOR
    /// chain: one fresh variable per link, then a unit clause on the last.
    /// An empty variable list with odd parity is a contradiction, encoded as
    /// a fresh variable forced both ways.
    pub fn add_parity_constraint(&mut self, vars: &[i32], parity: bool) {
        if vars.is_empty() {
            if parity {
                let v = self.fresh_var();
                self.add_clause(vec![v]);
                self.add_clause(vec![-v]);
            }
            return;
        }
        let mut acc = vars[0];
        for &v in &vars[1..] {
            let t = self.fresh_var();
            // t <-> acc xor v
            self.add_clause(vec![-t, acc, v]);
            self.add_clause(vec![-t, -acc, -v]);
            self.add_clause(vec![t, -acc, v]);
            self.add_clause(vec![t, acc, -v]);
            acc = t;
        }
        self.add_clause(vec![if parity { acc } else { -acc }]);
    }

    /// Checks a full assignment (index 0 = variable 1) against every clause.
    pub fn satisfied_by(&self, assignment: &[bool]) -> bool {
        assert!(assignment.len() >= self.num_vars);
        self.clauses.iter().all(|c| {
            c.iter().any(|&lit| {
                let v = lit.unsigned_abs() as usize - 1;
                assignment[v] == (lit > 0)
            })
        })
    }

    /// DIMACS text: header then one zero-terminated clause per line.
    pub fn to_dimacs(&self) -> String {
        let mut s = String::new();
        writeln!(s, "p cnf {} {}", self.num_vars, self.clauses.len()).unwrap();
        for c in &self.clauses {
            for &lit in c {
                write!(s, "{lit} ").unwrap();
            }
            writeln!(s, "0").unwrap();
        }
        s
    }

    /// Parses DIMACS text. Clauses may span lines; `c` comment lines are
    /// skipped. Input groups and output variables are not representable in
    /// DIMACS, so the parsed formula has neither.
    pub fn from_dimacs(text: &str) -> Result<Self, DimacsError> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses: Vec<Vec<i32>> = Vec::new();
        let mut current: Vec<i32> = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') {
                continue;
            }
            if line.starts_with('p') {
                if header.is_some() {
                    return Err(DimacsError::Malformed("duplicate header".into()));
                }
                let mut parts = line.split_whitespace();
                let (p, kind) = (parts.next(), parts.next());
                let nv = parts.next().and_then(|t| t.parse::<usize>().ok());
                let nc = parts.next().and_then(|t| t.parse::<usize>().ok());
                match (p, kind, nv, nc) {
                    (Some("p"), Some("cnf"), Some(nv), Some(nc)) => header = Some((nv, nc)),
                    _ => return Err(DimacsError::Malformed(format!("bad header line: {line}"))),
                }
                continue;
            }
            let Some((num_vars, _)) = header else {
                return Err(DimacsError::Malformed("clause before header".into()));
            };
            for tok in line.split_whitespace() {
                let lit: i32 = tok
                    .parse()
                    .map_err(|_| DimacsError::Malformed(format!("bad token: {tok}")))?;
                if lit == 0 {
                    clauses.push(std::mem::take(&mut current));
                } else {
                    if lit.unsigned_abs() as usize > num_vars {
                        return Err(DimacsError::LiteralOutOfRange(lit, num_vars));
                    }
                    current.push(lit);
                }
            }
        }
        let Some((num_vars, declared)) = header else {
            return Err(DimacsError::Malformed("missing header".into()));
        };
        if !current.is_empty() {
            return Err(DimacsError::Malformed("unterminated final clause".into()));
        }
        if clauses.len() != declared {
            return Err(DimacsError::ClauseCountMismatch(declared, clauses.len()));
        }
        Ok(CnfFormula { num_vars, clauses, input_vars: Vec::new(), output_vars: Vec::new() })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DimacsError {
    #[error("malformed dimacs: {0}")]
    Malformed(String),
    #[error("literal {0} exceeds declared variable count {1}")]
    LiteralOutOfRange(i32, usize),
    #[error("header declares {0} clauses, found {1}")]
    ClauseCountMismatch(usize, usize),
}

/// A request to fix one circuit output bit during CNF construction.
#[derive(Clone, Copy, Debug)]
pub struct OutputPin {
    pub index: usize,
    pub value: bool,
}

/// Tseitin transformation: one fresh variable per wire (inputs included),
/// standard gate clauses, no structural minimization. `pins` adds a unit
/// clause per fixed output bit.
pub fn to_cnf(circuit: &Circuit, pins: &[OutputPin]) -> Result<CnfFormula, CircuitError> {
    for p in pins {
        if p.index >= circuit.outputs().len() {
            return Err(CircuitError::BadPin(p.index));
        }
    }
    let num_inputs = circuit.num_inputs();
    let mut f = CnfFormula::new(circuit.num_wires());
    let var = |w: usize| -> i32 { (w + 1) as i32 };

    let mut offset = 0;
    for g in circuit.groups() {
        let vars = (offset..offset + g.width).map(var).collect();
        f.input_vars.push((g.name.clone(), vars));
        offset += g.width;
    }
    f.output_vars = circuit.outputs().iter().map(|&w| var(w)).collect();

    for (i, gate) in circuit.gates().iter().enumerate() {
        let z = var(num_inputs + i);
        match *gate {
            Gate::And(a, b) => {
                let (a, b) = (var(a), var(b));
                f.add_clause(vec![-z, a]);
                f.add_clause(vec![-z, b]);
                f.add_clause(vec![z, -a, -b]);
            }
            Gate::Or(a, b) => {
                let (a, b) = (var(a), var(b));
                f.add_clause(vec![z, -a]);
                f.add_clause(vec![z, -b]);
                f.add_clause(vec![-z, a, b]);
            }
            Gate::Xor(a, b) => {
                let (a, b) = (var(a), var(b));
                f.add_clause(vec![-z, a, b]);
                f.add_clause(vec![-z, -a, -b]);
                f.add_clause(vec![z, -a, b]);
                f.add_clause(vec![z, a, -b]);
            }
            Gate::Not(a) => {
                let a = var(a);
                f.add_clause(vec![z, a]);
                f.add_clause(vec![-z, -a]);
            }
            Gate::Const(v) => {
                f.add_clause(vec![if v { z } else { -z }]);
            }
        }
    }
    for p in pins {
        let ov = f.output_vars[p.index];
        f.add_clause(vec![if p.value { ov } else { -ov }]);
    }
    Ok(f)
}

/// Pins every output to the bits of `values`.
pub fn to_cnf_pinned(circuit: &Circuit, values: &BitString) -> Result<CnfFormula, CircuitError> {
    assert_eq!(values.width(), circuit.outputs().len(), "pin width must match output count");
    let pins: Vec<OutputPin> =
        (0..values.width()).map(|i| OutputPin { index: i, value: values.get(i) }).collect();
    to_cnf(circuit, &pins)
}
