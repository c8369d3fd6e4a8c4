//! Conflict-driven clause learning SAT solver: two-literal watching,
//! first-UIP conflict analysis, VSIDS branching with phase saving, Luby
//! restarts. No preprocessing and no clause-database reduction; instances
//! here are desk-scale. Fully deterministic for a given clause list.

use crate::cnf::CnfFormula;

/// Literal encoding: variable v (0-based) positive = 2v, negated = 2v+1.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub(crate) struct Lit(u32);

impl Lit {
    fn new(var: usize, positive: bool) -> Lit {
        Lit((var as u32) << 1 | (!positive) as u32)
    }

    fn from_dimacs(lit: i32) -> Lit {
        Lit::new(lit.unsigned_abs() as usize - 1, lit > 0)
    }

    fn var(self) -> usize {
        (self.0 >> 1) as usize
    }

    fn is_pos(self) -> bool {
        self.0 & 1 == 0
    }

    fn neg(self) -> Lit {
        Lit(self.0 ^ 1)
    }

    fn index(self) -> usize {
        self.0 as usize
    }
}

const NO_REASON: u32 = u32::MAX;

#[derive(Clone, Copy)]
struct Watcher {
    clause: u32,
    blocker: Lit,
}

const UNASSIGNED: u8 = 2;

pub(crate) enum SolveResult {
    Sat(Vec<bool>),
    Unsat,
}

pub(crate) struct Solver {
    nvars: usize,
    clauses: Vec<Vec<Lit>>,
    watches: Vec<Vec<Watcher>>,
    value: Vec<u8>,
    level: Vec<u32>,
    reason: Vec<u32>,
    trail: Vec<Lit>,
    trail_lim: Vec<usize>,
    qhead: usize,
    activity: Vec<f64>,
    var_inc: f64,
    saved_phase: Vec<bool>,
    seen: Vec<bool>,
    pub(crate) conflicts: u64,
    unsat: bool,
}

impl Solver {
    pub(crate) fn from_formula(f: &CnfFormula) -> Solver {
        let nvars = f.num_vars();
        let mut s = Solver {
            nvars,
            clauses: Vec::with_capacity(f.clauses().len()),
            watches: vec![Vec::new(); 2 * nvars],
            value: vec![UNASSIGNED; nvars],
            level: vec![0; nvars],
            reason: vec![NO_REASON; nvars],
            trail: Vec::with_capacity(nvars),
            trail_lim: Vec::new(),
            qhead: 0,
            activity: vec![0.0; nvars],
            var_inc: 1.0,
            saved_phase: vec![false; nvars],
            seen: vec![false; nvars],
            conflicts: 0,
            unsat: false,
        };
        for clause in f.clauses() {
            let lits: Vec<Lit> = clause.iter().map(|&l| Lit::from_dimacs(l)).collect();
            s.add_clause(lits);
            if s.unsat {
                break;
            }
        }
        s
    }

    fn lit_value(&self, l: Lit) -> u8 {
        let v = self.value[l.var()];
        if v == UNASSIGNED {
            UNASSIGNED
        } else {
            (v == 1) as u8 ^ (!l.is_pos()) as u8
        }
    }

    fn add_clause(&mut self, mut lits: Vec<Lit>) {
        // dedupe and drop tautologies; done once at load time
        lits.sort_unstable_by_key(|l| l.0);
        lits.dedup();
        for w in lits.windows(2) {
            if w[0].var() == w[1].var() {
                return; // x or not-x
            }
        }
        match lits.len() {
            0 => self.unsat = true,
            1 => match self.lit_value(lits[0]) {
                0 => self.unsat = true,
                1 => {}
                _ => self.enqueue(lits[0], NO_REASON),
            },
            _ => {
                let ci = self.clauses.len() as u32;
                self.watches[lits[0].neg().index()].push(Watcher { clause: ci, blocker: lits[1] });
                self.watches[lits[1].neg().index()].push(Watcher { clause: ci, blocker: lits[0] });
                self.clauses.push(lits);
            }
        }
    }

    fn enqueue(&mut self, l: Lit, reason: u32) {
        debug_assert_eq!(self.lit_value(l), UNASSIGNED);
        self.value[l.var()] = l.is_pos() as u8;
        self.level[l.var()] = self.trail_lim.len() as u32;
        self.reason[l.var()] = reason;
        self.trail.push(l);
    }

    /// Propagates until fixpoint; returns the index of a falsified clause.
    fn propagate(&mut self) -> Option<u32> {
        while self.qhead < self.trail.len() {
            let p = self.trail[self.qhead];
            self.qhead += 1;
            let false_lit = p.neg();
            let mut i = 0;
            'watchers: while i < self.watches[p.index()].len() {
                let w = self.watches[p.index()][i];
                if self.lit_value(w.blocker) == 1 {
                    i += 1;
                    continue;
                }
                let ci = w.clause as usize;
                // ensure the falsified literal sits at position 1
                if self.clauses[ci][0] == false_lit {
                    self.clauses[ci].swap(0, 1);
                }
                debug_assert_eq!(self.clauses[ci][1], false_lit);
                let first = self.clauses[ci][0];
                if first != w.blocker && self.lit_value(first) == 1 {
                    self.watches[p.index()][i].blocker = first;
                    i += 1;
                    continue;
                }
                for k in 2..self.clauses[ci].len() {
                    if self.lit_value(self.clauses[ci][k]) != 0 {
                        self.clauses[ci].swap(1, k);
                        let new_watch = self.clauses[ci][1];
                        self.watches[p.index()].swap_remove(i);
                        self.watches[new_watch.neg().index()]
                            .push(Watcher { clause: ci as u32, blocker: first });
                        continue 'watchers;
                    }
                }
                // no replacement: unit or conflict on first
                match self.lit_value(first) {
                    0 => return Some(ci as u32),
                    UNASSIGNED => {
                        self.enqueue(first, ci as u32);
                        i += 1;
                    }
                    _ => unreachable!(),
                }
            }
        }
        None
    }

    fn bump(&mut self, var: usize) {
        self.activity[var] += self.var_inc;
        if self.activity[var] > 1e100 {
            for a in &mut self.activity {
                *a *= 1e-100;
            }
            self.var_inc *= 1e-100;
        }
    }

    /// First-UIP learning. Returns the learnt clause (asserting literal
    /// first, a highest-level remaining literal second) and the backtrack
    /// level.
    fn analyze(&mut self, confl: u32) -> (Vec<Lit>, u32) {
        let current = self.trail_lim.len() as u32;
        let mut learnt: Vec<Lit> = vec![Lit(0)]; // slot 0 for the asserting literal
        let mut path = 0u32;
        let mut idx = self.trail.len();
        let mut cref = confl as usize;
        let mut skip: Option<Lit> = None;
        loop {
            for k in 0..self.clauses[cref].len() {
                let q = self.clauses[cref][k];
                if Some(q) == skip.map(Lit::neg) {
                    continue;
                }
                let v = q.var();
                if !self.seen[v] && self.level[v] > 0 {
                    self.seen[v] = true;
                    self.bump(v);
                    if self.level[v] >= current {
                        path += 1;
                    } else {
                        learnt.push(q);
                    }
                }
            }
            loop {
                idx -= 1;
                if self.seen[self.trail[idx].var()] {
                    break;
                }
            }
            let p = self.trail[idx];
            self.seen[p.var()] = false;
            path -= 1;
            if path == 0 {
                learnt[0] = p.neg();
                break;
            }
            cref = self.reason[p.var()] as usize;
            skip = Some(p.neg());
        }
        for l in &learnt {
            self.seen[l.var()] = false;
        }
        // backtrack to the second-highest decision level in the clause
        let mut blevel = 0;
        if learnt.len() > 1 {
            let mut max_i = 1;
            for i in 2..learnt.len() {
                if self.level[learnt[i].var()] > self.level[learnt[max_i].var()] {
                    max_i = i;
                }
            }
            learnt.swap(1, max_i);
            blevel = self.level[learnt[1].var()];
        }
        (learnt, blevel)
    }

    fn backtrack(&mut self, target: u32) {
        while self.trail_lim.len() as u32 > target {
            let lim = self.trail_lim.pop().unwrap();
            while self.trail.len() > lim {
                let l = self.trail.pop().unwrap();
                let v = l.var();
                self.saved_phase[v] = l.is_pos();
                self.value[v] = UNASSIGNED;
                self.reason[v] = NO_REASON;
            }
        }
        // A restart can fire while a freshly learnt unit is still queued at
        // level zero; qhead must stay behind it or the unit never propagates.
        self.qhead = self.trail.len().min(self.qhead);
    }

    fn pick_branch_var(&self) -> Option<usize> {
        // linear max-activity scan; desk instances never justify a heap
        let mut best: Option<usize> = None;
        for v in 0..self.nvars {
            if self.value[v] == UNASSIGNED {
                best = match best {
                    Some(b) if self.activity[b] >= self.activity[v] => Some(b),
                    _ => Some(v),
                };
            }
        }
        best
    }

    pub(crate) fn solve(&mut self) -> SolveResult {
        if self.unsat {
            return SolveResult::Unsat;
        }
        if self.propagate().is_some() {
            return SolveResult::Unsat;
        }
        let mut restart_count = 0u64;
        let mut conflicts_until_restart = luby(restart_count) * 64;
        loop {
            match self.propagate() {
                Some(confl) => {
                    self.conflicts += 1;
                    if self.trail_lim.is_empty() {
                        return SolveResult::Unsat;
                    }
                    let (learnt, blevel) = self.analyze(confl);
                    self.backtrack(blevel);
                    let asserting = learnt[0];
                    if learnt.len() == 1 {
                        self.enqueue(asserting, NO_REASON);
                    } else {
                        let ci = self.clauses.len() as u32;
                        self.watches[learnt[0].neg().index()]
                            .push(Watcher { clause: ci, blocker: learnt[1] });
                        self.watches[learnt[1].neg().index()]
                            .push(Watcher { clause: ci, blocker: learnt[0] });
                        self.clauses.push(learnt);
                        self.enqueue(asserting, ci);
                    }
                    self.var_inc /= 0.95;
                    if conflicts_until_restart > 0 {
                        conflicts_until_restart -= 1;
                        if conflicts_until_restart == 0 {
                            restart_count += 1;
                            conflicts_until_restart = luby(restart_count) * 64;
                            self.backtrack(0);
                        }
                    }
                }
                None => match self.pick_branch_var() {
                    None => {
                        let model = (0..self.nvars).map(|v| self.value[v] == 1).collect();
                        return SolveResult::Sat(model);
                    }
                    Some(v) => {
                        self.trail_lim.push(self.trail.len());
                        self.enqueue(Lit::new(v, self.saved_phase[v]), NO_REASON);
                    }
                },
            }
        }
    }
}

/// Luby restart sequence: 1 1 2 1 1 2 4 1 1 2 1 1 2 4 8 ...
fn luby(x: u64) -> u64 {
    let (mut size, mut seq) = (1u64, 0u32);
    while size < x + 1 {
        seq += 1;
        size = 2 * size + 1;
    }
    let mut x = x;
    while size - 1 != x {
        size = (size - 1) / 2;
        seq -= 1;
        x %= size;
    }
    1u64 << seq
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve_clauses(nvars: usize, clauses: &[&[i32]]) -> SolveResult {
        let mut f = CnfFormula::new(nvars);
        for c in clauses {
            f.add_clause(c.to_vec());
        }
        Solver::from_formula(&f).solve()
    }

    #[test]
    fn trivial_sat_unsat() {
        assert!(matches!(solve_clauses(1, &[&[1]]), SolveResult::Sat(_)));
        assert!(matches!(solve_clauses(1, &[&[1], &[-1]]), SolveResult::Unsat));
    }

    #[test]
    fn models_satisfy() {
        let mut f = CnfFormula::new(4);
        for c in [vec![1, 2], vec![-1, 3], vec![-2, -3], vec![2, 3, -4], vec![4, 1]] {
            f.add_clause(c);
        }
        match Solver::from_formula(&f).solve() {
            SolveResult::Sat(m) => assert!(f.satisfied_by(&m)),
            SolveResult::Unsat => panic!("expected sat"),
        }
    }

    #[test]
    fn luby_sequence() {
        let want = [1, 1, 2, 1, 1, 2, 4, 1, 1, 2, 1, 1, 2, 4, 8];
        let got: Vec<u64> = (0..want.len() as u64).map(luby).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn pigeonhole_3_into_2_unsat() {
        // p_{i,j}: pigeon i in hole j; vars 1..=6
        let var = |i: usize, j: usize| (i * 2 + j + 1) as i32;
        let mut f = CnfFormula::new(6);
        for i in 0..3 {
            f.add_clause(vec![var(i, 0), var(i, 1)]);
        }
        for j in 0..2 {
            for a in 0..3 {
                for b in (a + 1)..3 {
                    f.add_clause(vec![-var(a, j), -var(b, j)]);
                }
            }
        }
        assert!(matches!(Solver::from_formula(&f).solve(), SolveResult::Unsat));
    }

    /// Model enumeration with full-width blocking clauses: the mix of narrow
    /// random clauses and hundreds of wide ones exercises watch relocation
    /// and restarts far harder than 3-CNF alone. Every returned model must
    /// satisfy every clause added so far.
    #[test]
    fn blocking_clause_enumeration_returns_only_real_models() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for round in 0..3 {
            let nvars = 12;
            let extra = 18 + round * 4;
            let mut f = CnfFormula::new(nvars);
            for _ in 0..extra {
                let mut c = Vec::new();
                for _ in 0..3 {
                    let v = rng.gen_range(1..=nvars) as i32;
                    c.push(if rng.gen() { v } else { -v });
                }
                f.add_clause(c);
            }
            let mut found = 0usize;
            loop {
                match Solver::from_formula(&f).solve() {
                    SolveResult::Unsat => break,
                    SolveResult::Sat(model) => {
                        assert!(
                            f.satisfied_by(&model),
                            "round {round}: model violates the formula after {found} blocks"
                        );
                        found += 1;
                        assert!(found <= 1 << nvars, "round {round}: repeated models");
                        let block: Vec<i32> = (0..nvars)
                            .map(|v| if model[v] { -(v as i32 + 1) } else { v as i32 + 1 })
                            .collect();
                        f.add_clause(block);
                    }
                }
            }
        }
    }

    #[test]
    fn random_3cnf_agrees_with_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let nvars = rng.gen_range(3..=10);
            let nclauses = rng.gen_range(1..=40);
            let mut f = CnfFormula::new(nvars);
            for _ in 0..nclauses {
                let mut c = Vec::new();
                for _ in 0..3 {
                    let v = rng.gen_range(1..=nvars) as i32;
                    c.push(if rng.gen() { v } else { -v });
                }
                f.add_clause(c);
            }
            let brute = (0..1u32 << nvars).any(|m| {
                let assign: Vec<bool> = (0..nvars).map(|v| m >> v & 1 == 1).collect();
                f.satisfied_by(&assign)
            });
            match Solver::from_formula(&f).solve() {
                SolveResult::Sat(model) => {
                    assert!(brute, "solver said sat, brute force disagrees");
                    assert!(f.satisfied_by(&model));
                }
                SolveResult::Unsat => assert!(!brute, "solver said unsat, brute force disagrees"),
            }
        }
    }
}
