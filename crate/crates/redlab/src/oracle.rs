//! The SAT decision oracle every reduction drives. SAT answers are verified
//! against the formula before being returned; UNSAT answers are trusted.
//! Backends: the built-in CDCL solver, or any external solver speaking
//! DIMACS on the command line (SAT-competition output: an `s` status line
//! plus zero-terminated `v` value lines on stdout).

use crate::bits::BitString;
use crate::cdcl::{SolveResult, Solver};
use crate::circuit::{Circuit, CircuitError};
use crate::cnf::{to_cnf, CnfFormula, OutputPin};
use std::io::Write as _;
use std::path::PathBuf;
use thiserror::Error;

/// Environment variable naming an external solver binary. When set it
/// overrides the built-in solver unless a backend is chosen explicitly.
pub const SOLVER_ENV_VAR: &str = "REDLAB_SAT_SOLVER";

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolverBackend {
    Builtin,
    /// Path to a binary invoked as `<path> <cnf-file>`.
    External(PathBuf),
}

impl SolverBackend {
    /// Built-in unless `REDLAB_SAT_SOLVER` points at an external binary.
    pub fn from_env() -> SolverBackend {
        match std::env::var(SOLVER_ENV_VAR) {
            Ok(path) if !path.is_empty() => SolverBackend::External(PathBuf::from(path)),
            _ => SolverBackend::Builtin,
        }
    }

    /// Parses the `--solver` flag syntax: `builtin` or `dimacs:<path>`.
    pub fn parse_flag(s: &str) -> Result<SolverBackend, String> {
        if s == "builtin" {
            Ok(SolverBackend::Builtin)
        } else if let Some(path) = s.strip_prefix("dimacs:") {
            if path.is_empty() {
                Err("dimacs: requires a path".to_string())
            } else {
                Ok(SolverBackend::External(PathBuf::from(path)))
            }
        } else {
            Err(format!("unknown solver backend {s:?} (expected builtin or dimacs:<path>)"))
        }
    }

    pub fn id(&self) -> String {
        match self {
            SolverBackend::Builtin => "builtin".to_string(),
            SolverBackend::External(p) => format!("dimacs:{}", p.display()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum SatVerdict {
    /// Model indexed by variable (index 0 = variable 1), verified.
    Sat(Vec<bool>),
    Unsat,
}

#[derive(Clone, Copy, Debug, Default, serde::Serialize)]
pub struct OracleStats {
    pub queries: u64,
    pub conflicts: u64,
}

#[derive(Error, Debug)]
pub enum OracleError {
    #[error("external solver unavailable: {0}")]
    BackendUnavailable(String),
    #[error("external solver returned a model that violates the formula")]
    BadModel,
    #[error("projected model count needs {0} variables, cap is 24")]
    TooLarge(usize),
    #[error("circuit error: {0}")]
    Circuit(#[from] CircuitError),
}

/// One oracle per worker: instances carry their own query statistics and are
/// not shared across threads.
#[derive(Clone, Debug)]
pub struct SatOracle {
    backend: SolverBackend,
    stats: OracleStats,
}

impl SatOracle {
    pub fn new(backend: SolverBackend) -> Self {
        SatOracle { backend, stats: OracleStats::default() }
    }

    pub fn from_env() -> Self {
        SatOracle::new(SolverBackend::from_env())
    }

    pub fn stats(&self) -> OracleStats {
        self.stats
    }

    pub fn backend(&self) -> &SolverBackend {
        &self.backend
    }

    /// Decides satisfiability. A SAT answer always carries a full assignment
    /// checked against every clause.
    pub fn decide(&mut self, f: &CnfFormula) -> Result<SatVerdict, OracleError> {
        self.stats.queries += 1;
        match &self.backend {
            SolverBackend::Builtin => {
                let mut solver = Solver::from_formula(f);
                let res = solver.solve();
                self.stats.conflicts += solver.conflicts;
                match res {
                    SolveResult::Sat(model) => {
                        if !f.satisfied_by(&model) {
                            return Err(OracleError::BadModel);
                        }
                        Ok(SatVerdict::Sat(model))
                    }
                    SolveResult::Unsat => Ok(SatVerdict::Unsat),
                }
            }
            SolverBackend::External(path) => {
                let verdict = run_external(path, f)?;
                if let SatVerdict::Sat(model) = &verdict {
                    if !f.satisfied_by(model) {
                        return Err(OracleError::BadModel);
                    }
                }
                Ok(verdict)
            }
        }
    }

    /// Prefix-extendability query against a sampler circuit with input group
    /// "r" and outputs (x bits, label bit): is there a completion v of the
    /// prefix u such that the circuit on u·v emits x? The label output is
    /// left free.
    pub fn prefix_extends(
        &mut self,
        sampler_circuit: &Circuit,
        target_x: &BitString,
        prefix_u: &BitString,
    ) -> Result<bool, OracleError> {
        let fixed = sampler_circuit.fix_inputs("r", prefix_u)?;
        let pins: Vec<OutputPin> =
            (0..target_x.width()).map(|i| OutputPin { index: i, value: target_x.get(i) }).collect();
        let f = to_cnf(&fixed, &pins)?;
        Ok(matches!(self.decide(&f)?, SatVerdict::Sat(_)))
    }

    /// Exact model count projected onto `vars`, by enumerating all 2^k
    /// assignments of the projection and deciding each. Capped at 24
    /// projected variables.
    pub fn count_models(&mut self, f: &CnfFormula, vars: &[i32]) -> Result<u64, OracleError> {
        if vars.len() > 24 {
            return Err(OracleError::TooLarge(vars.len()));
        }
        let mut count = 0;
        for m in 0..(1u64 << vars.len()) {
            let mut g = f.clone();
            for (i, &v) in vars.iter().enumerate() {
                let bit = (m >> (vars.len() - 1 - i)) & 1 == 1;
                g.add_clause(vec![if bit { v } else { -v }]);
            }
            if matches!(self.decide(&g)?, SatVerdict::Sat(_)) {
                count += 1;
            }
        }
        Ok(count)
    }

    /// Enumerates distinct projections of models onto `vars` via blocking
    /// clauses, stopping after `cap` solutions (so a return shorter than
    /// `cap` is exhaustive). Results are sorted.
    pub fn enumerate_models(
        &mut self,
        f: &CnfFormula,
        vars: &[i32],
        cap: usize,
    ) -> Result<Vec<BitString>, OracleError> {
        let mut g = f.clone();
        let mut found = Vec::new();
        while found.len() < cap {
            match self.decide(&g)? {
                SatVerdict::Unsat => break,
                SatVerdict::Sat(model) => {
                    let bits = BitString::from_bools(
                        vars.iter().map(|&v| model[v.unsigned_abs() as usize - 1]).collect(),
                    );
                    let blocking: Vec<i32> =
                        vars.iter().enumerate().map(|(i, &v)| if bits.get(i) { -v } else { v }).collect();
                    g.add_clause(blocking);
                    found.push(bits);
                }
            }
        }
        found.sort();
        Ok(found)
    }
}

fn run_external(path: &PathBuf, f: &CnfFormula) -> Result<SatVerdict, OracleError> {
    let dir = tempfile::tempdir().map_err(|e| OracleError::BackendUnavailable(e.to_string()))?;
    let cnf_path = dir.path().join("query.cnf");
    {
        let mut file = std::fs::File::create(&cnf_path)
            .map_err(|e| OracleError::BackendUnavailable(e.to_string()))?;
        file.write_all(f.to_dimacs().as_bytes())
            .map_err(|e| OracleError::BackendUnavailable(e.to_string()))?;
    }
    let out = std::process::Command::new(path)
        .arg(&cnf_path)
        .output()
        .map_err(|e| OracleError::BackendUnavailable(format!("{}: {e}", path.display())))?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    let mut status: Option<bool> = None;
    let mut assignment = vec![false; f.num_vars()];
    for line in stdout.lines() {
        let line = line.trim();
        if let Some(rest) = line.strip_prefix("s ") {
            status = match rest.trim() {
                "SATISFIABLE" => Some(true),
                "UNSATISFIABLE" => Some(false),
                other => {
                    return Err(OracleError::BackendUnavailable(format!(
                        "unrecognized status line {other:?}"
                    )))
                }
            };
        } else if let Some(rest) = line.strip_prefix("v ") {
            for tok in rest.split_ascii_whitespace() {
                let lit: i64 = tok
                    .parse()
                    .map_err(|_| OracleError::BackendUnavailable(format!("bad literal {tok:?}")))?;
                if lit == 0 {
                    continue;
                }
                let v = lit.unsigned_abs() as usize - 1;
                if v < assignment.len() {
                    assignment[v] = lit > 0;
                }
            }
        }
    }
    match status {
        Some(true) => Ok(SatVerdict::Sat(assignment)),
        Some(false) => Ok(SatVerdict::Unsat),
        None => Err(OracleError::BackendUnavailable("no s-line in solver output".to_string())),
    }
}
