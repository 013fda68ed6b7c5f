//! Exhaustive DPLL search with unit propagation, connected-component
//! splitting, and component caching.
//!
//! One search core serves two drivers: projected counting (`count`) and
//! Decision-DNNF compilation (`dnnf`). A driver supplies a [`Sink`] that
//! folds the search trace into its value: big integers for counting, DAG
//! nodes for compilation. Components are cached by a 128-bit fingerprint of
//! `(alive clause ids, unassigned vars)`; an alive clause plus the set of
//! unassigned variables determines the residual clause content exactly
//! (every assigned literal in an alive clause is false), so the key is
//! sound.
//!
//! Branching picks the most frequent variable of the lowest-rank class
//! present in the component, ties to the smallest id. Class ranks encode
//! projection priorities: a driver that keeps rank-0 classes is guaranteed
//! that no lower-priority variable is decided while a rank-0 variable
//! remains in the same component.

use std::collections::HashMap;
use std::hash::BuildHasherDefault;
use std::time::Instant;

use crate::cnf::{ClassSet, CnfFormula, VarClass};
use crate::error::{Error, Result};

pub(crate) const DEFAULT_CACHE_BUDGET: usize = 1 << 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum CachePolicy {
    /// Drop the whole cache and keep going (counting: always sound).
    Clear,
    /// Fail with a resource error (compilation: the DAG would dangle).
    Error,
}

#[derive(Debug, Clone)]
pub(crate) struct SearchConfig {
    pub cache_budget: usize,
    pub cache_policy: CachePolicy,
    pub deadline: Option<Instant>,
    /// Rank per class, indexed by [`class_index`]; lower ranks are decided
    /// first within a component.
    pub ranks: [u8; 4],
}

impl SearchConfig {
    pub fn counting(keep: ClassSet) -> SearchConfig {
        let mut ranks = [1u8; 4];
        for class in VarClass::ALL {
            if keep.contains(class) {
                ranks[class_index(class)] = 0;
            }
        }
        SearchConfig {
            cache_budget: DEFAULT_CACHE_BUDGET,
            cache_policy: CachePolicy::Clear,
            deadline: None,
            ranks,
        }
    }

    pub fn compiling(priority: &[VarClass; 4]) -> SearchConfig {
        let mut ranks = [0u8; 4];
        for (rank, class) in priority.iter().enumerate() {
            ranks[class_index(*class)] = rank as u8;
        }
        SearchConfig {
            cache_budget: DEFAULT_CACHE_BUDGET,
            cache_policy: CachePolicy::Error,
            deadline: None,
            ranks,
        }
    }
}

pub(crate) fn class_index(c: VarClass) -> usize {
    match c {
        VarClass::Input => 0,
        VarClass::Output => 1,
        VarClass::Coin => 2,
        VarClass::Aux => 3,
    }
}

/// Folds the search trace. `conj` receives decomposable parts (disjoint
/// variable scopes); `decide` receives the two branch values of a decision
/// variable whose branches cover the same scope.
pub(crate) trait Sink {
    type V: Clone;
    /// Allow satisfiability shortcuts on components without rank-0 vars.
    const SAT_SHORTCUT: bool;
    fn false_(&mut self) -> Self::V;
    fn true_(&mut self) -> Self::V;
    fn lit(&mut self, lit: i32) -> Self::V;
    fn free(&mut self, var: u32) -> Self::V;
    fn conj(&mut self, parts: Vec<Self::V>) -> Self::V;
    fn decide(&mut self, var: u32, lo: Self::V, hi: Self::V) -> Self::V;
    fn is_false(v: &Self::V) -> bool;
}

#[derive(Default)]
struct IdentityHasher(u64);

impl std::hash::Hasher for IdentityHasher {
    fn finish(&self) -> u64 {
        self.0
    }
    fn write(&mut self, bytes: &[u8]) {
        for chunk in bytes.chunks(8) {
            let mut v = [0u8; 8];
            v[..chunk.len()].copy_from_slice(chunk);
            self.0 ^= u64::from_le_bytes(v);
        }
    }
    fn write_u128(&mut self, v: u128) {
        self.0 = (v as u64) ^ ((v >> 64) as u64);
    }
}

struct Comp {
    vars: Vec<u32>,
    clauses: Vec<u32>,
    min_var: u32,
}

pub(crate) struct Searcher<'f, S: Sink> {
    sink: S,
    cfg: SearchConfig,
    classes: &'f [VarClass],
    // flattened clause storage
    lits: Vec<i32>,
    clause_span: Vec<(u32, u32)>,
    occ_pos: Vec<Vec<u32>>,
    occ_neg: Vec<Vec<u32>>,
    // dynamic state
    assign: Vec<u8>, // 0 unassigned, 1 true, 2 false
    n_true: Vec<u32>,
    n_unassigned: Vec<u32>,
    trail: Vec<u32>,
    queue: Vec<(u32, bool)>,
    // component extraction scratch
    var_stamp: Vec<u32>,
    clause_stamp: Vec<u32>,
    occ_count: Vec<u32>,
    epoch: u32,
    cache: HashMap<u128, S::V, BuildHasherDefault<IdentityHasher>>,
    steps: u64,
    stat_solves: u64,
    stat_hits: u64,
    stat_sat_solves: u64,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x ^= x >> 30;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 27;
    x = x.wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^= x >> 31;
    x
}

/// Order-insensitive fingerprint: per-element strong mixes combined with
/// commutative sums, two independent 64-bit channels plus the lengths. The
/// clause and variable sets need no sorting this way.
fn fingerprint(clauses: &[u32], vars: &[u32]) -> u128 {
    let mut h1: u64 = 0;
    let mut h2: u64 = 0;
    for &c in clauses {
        h1 = h1.wrapping_add(splitmix((c as u64).wrapping_add(0x9E37_0001)));
        h2 ^= splitmix((c as u64).wrapping_mul(0x0001_0003_0005_0011));
    }
    for &v in vars {
        h1 = h1.wrapping_add(splitmix((v as u64).wrapping_add(0xABCD_EF12_3456_0001)));
        h2 ^= splitmix((v as u64).wrapping_mul(0x0002_0005_0009_0013).wrapping_add(1));
    }
    let tail = splitmix((clauses.len() as u64) << 32 | vars.len() as u64);
    ((h1.wrapping_add(tail) as u128) << 64) | ((h2 ^ tail.rotate_left(17)) as u128)
}

impl<'f, S: Sink> Searcher<'f, S> {
    pub(crate) fn new(f: &'f CnfFormula, sink: S, cfg: SearchConfig) -> Searcher<'f, S> {
        let nv = f.num_vars as usize;
        let mut lits = Vec::new();
        let mut clause_span = Vec::new();
        let mut occ_pos: Vec<Vec<u32>> = vec![Vec::new(); nv + 1];
        let mut occ_neg: Vec<Vec<u32>> = vec![Vec::new(); nv + 1];
        let mut n_unassigned = Vec::new();

        for clause in &f.clauses {
            let mut c: Vec<i32> = clause.clone();
            c.sort_unstable();
            c.dedup();
            if c.iter().any(|&l| c.binary_search(&-l).is_ok()) {
                continue; // tautology constrains nothing
            }
            let id = clause_span.len() as u32;
            let start = lits.len() as u32;
            for &l in &c {
                lits.push(l);
                if l > 0 {
                    occ_pos[l as usize].push(id);
                } else {
                    occ_neg[(-l) as usize].push(id);
                }
            }
            clause_span.push((start, lits.len() as u32));
            n_unassigned.push(c.len() as u32);
        }

        let n_clauses = clause_span.len();
        Searcher {
            sink,
            cfg,
            classes: &f.classes,
            lits,
            n_true: vec![0; n_clauses],
            n_unassigned,
            clause_span,
            occ_pos,
            occ_neg,
            assign: vec![0; nv + 1],
            trail: Vec::new(),
            queue: Vec::new(),
            var_stamp: vec![0; nv + 1],
            clause_stamp: vec![0; n_clauses],
            occ_count: vec![0; nv + 1],
            epoch: 0,
            cache: HashMap::default(),
            steps: 0,
            stat_solves: 0,
            stat_hits: 0,
            stat_sat_solves: 0,
        }
    }

    fn clause_lits(&self, c: u32) -> &[i32] {
        let (s, e) = self.clause_span[c as usize];
        &self.lits[s as usize..e as usize]
    }

    fn rank(&self, var: u32) -> u8 {
        self.cfg.ranks[class_index(self.classes[(var - 1) as usize])]
    }

    fn tick(&mut self) -> Result<()> {
        self.steps += 1;
        if self.steps % 4096 == 0 {
            if let Some(deadline) = self.cfg.deadline {
                if Instant::now() > deadline {
                    return Err(Error::Resource {
                        what: "search deadline",
                        limit: 0,
                    });
                }
            }
        }
        Ok(())
    }

    /// Assign and propagate; returns false on conflict. The trail records
    /// every assignment made, including the failed path (caller unwinds).
    fn propagate(&mut self, var: u32, value: bool) -> bool {
        self.queue.clear();
        self.queue.push((var, value));
        let mut qi = 0;
        while qi < self.queue.len() {
            let (v, val) = self.queue[qi];
            qi += 1;
            match self.assign[v as usize] {
                1 if val => continue,
                2 if !val => continue,
                0 => {}
                _ => return false, // conflicting implication
            }
            self.assign[v as usize] = if val { 1 } else { 2 };
            self.trail.push(v);
            let (sat_side, unsat_side) = if val {
                (&self.occ_pos[v as usize], &self.occ_neg[v as usize])
            } else {
                (&self.occ_neg[v as usize], &self.occ_pos[v as usize])
            };
            for &c in sat_side {
                self.n_true[c as usize] += 1;
            }
            let mut conflict = false;
            for i in 0..unsat_side.len() {
                let c = unsat_side[i];
                self.n_unassigned[c as usize] -= 1;
                if self.n_true[c as usize] == 0 {
                    match self.n_unassigned[c as usize] {
                        0 => conflict = true,
                        1 => {
                            let (s, e) = self.clause_span[c as usize];
                            for j in s..e {
                                let l = self.lits[j as usize];
                                let lv = l.unsigned_abs();
                                if self.assign[lv as usize] == 0 {
                                    self.queue.push((lv, l > 0));
                                    break;
                                }
                            }
                        }
                        _ => {}
                    }
                }
            }
            if conflict {
                return false;
            }
        }
        true
    }

    fn undo(&mut self, mark: usize) {
        while self.trail.len() > mark {
            let v = self.trail.pop().unwrap();
            let val = self.assign[v as usize] == 1;
            let (sat_side, unsat_side) = if val {
                (&self.occ_pos[v as usize], &self.occ_neg[v as usize])
            } else {
                (&self.occ_neg[v as usize], &self.occ_pos[v as usize])
            };
            for &c in sat_side {
                self.n_true[c as usize] -= 1;
            }
            for &c in unsat_side {
                self.n_unassigned[c as usize] += 1;
            }
            self.assign[v as usize] = 0;
        }
    }

    /// Split the alive remainder of `comp` into connected components; also
    /// reports vars of `comp` that became unconstrained. Every unassigned
    /// var is visited as a BFS seed, so a var lands either in a component or
    /// in `freed` (no alive clause mentions it).
    fn split(&mut self, comp_vars: &[u32]) -> (Vec<Comp>, Vec<u32>) {
        self.epoch += 1;
        let epoch = self.epoch;
        let mut comps = Vec::new();
        let mut freed = Vec::new();
        for &seed in comp_vars {
            if self.assign[seed as usize] != 0 || self.var_stamp[seed as usize] == epoch {
                continue;
            }
            // BFS from this variable over alive clauses
            let mut vars = vec![seed];
            let mut clauses = Vec::new();
            self.var_stamp[seed as usize] = epoch;
            let mut vi = 0;
            while vi < vars.len() {
                let v = vars[vi];
                vi += 1;
                for side in [&self.occ_pos[v as usize], &self.occ_neg[v as usize]] {
                    for &c in side {
                        if self.n_true[c as usize] > 0
                            || self.clause_stamp[c as usize] == epoch
                        {
                            continue;
                        }
                        self.clause_stamp[c as usize] = epoch;
                        clauses.push(c);
                        let (s, e) = self.clause_span[c as usize];
                        for j in s..e {
                            let w = self.lits[j as usize].unsigned_abs();
                            if self.assign[w as usize] == 0
                                && self.var_stamp[w as usize] != epoch
                            {
                                self.var_stamp[w as usize] = epoch;
                                vars.push(w);
                            }
                        }
                    }
                }
            }
            if clauses.is_empty() {
                freed.push(seed);
                continue;
            }
            let min_var = vars.iter().copied().min().unwrap();
            comps.push(Comp {
                vars,
                clauses,
                min_var,
            });
        }
        // deterministic traversal order regardless of discovery order
        comps.sort_unstable_by_key(|c| c.min_var);
        freed.sort_unstable();
        (comps, freed)
    }

    /// Smallest free variable of the lowest-rank class present. Variable
    /// ids follow the bit-blaster's allocation order, so this walks program
    /// variables bit by bit; adjacent decisions complete adder fields in
    /// sequence, which keeps equal-partial-sum branches mergeable in the
    /// component cache. (A highest-occurrence rule was measurably worse: it
    /// interleaves unrelated fields and defeats caching on circuit CNFs.)
    fn pick(&mut self, comp: &Comp) -> u32 {
        let mut best_rank = u8::MAX;
        let mut best = 0u32;
        for &v in &comp.vars {
            let r = self.rank(v);
            if r < best_rank {
                best_rank = r;
                best = v;
            }
        }
        debug_assert!(best != 0);
        best
    }

    fn cache_insert(&mut self, key: u128, v: S::V) -> Result<()> {
        if self.cache.len() >= self.cfg.cache_budget {
            match self.cfg.cache_policy {
                CachePolicy::Clear => self.cache.clear(),
                CachePolicy::Error => {
                    return Err(Error::Resource {
                        what: "component cache entries",
                        limit: self.cfg.cache_budget as u64,
                    })
                }
            }
        }
        self.cache.insert(key, v);
        Ok(())
    }

    fn solve(&mut self, comp: &Comp) -> Result<S::V> {
        self.tick()?;
        self.stat_solves += 1;
        let key = fingerprint(&comp.clauses, &comp.vars);
        if let Some(v) = self.cache.get(&key) {
            self.stat_hits += 1;
            return Ok(v.clone());
        }
        if S::SAT_SHORTCUT && comp.vars.iter().all(|&v| self.rank(v) != 0) {
            let sat = self.solve_sat(comp)?;
            let v = if sat {
                self.sink.true_()
            } else {
                self.sink.false_()
            };
            return Ok(v);
        }
        let var = self.pick(comp);
        let lo = self.branch(comp, var, false)?;
        let hi = self.branch(comp, var, true)?;
        let v = self.sink.decide(var, lo, hi);
        self.cache_insert(key, v.clone())?;
        Ok(v)
    }

    fn branch(&mut self, comp: &Comp, var: u32, value: bool) -> Result<S::V> {
        let mark = self.trail.len();
        if !self.propagate(var, value) {
            self.undo(mark);
            return Ok(self.sink.false_());
        }
        let mut parts = Vec::new();
        for i in mark..self.trail.len() {
            let v = self.trail[i];
            if v == var {
                continue; // the decision is carried by the Decision node
            }
            let l = if self.assign[v as usize] == 1 {
                v as i32
            } else {
                -(v as i32)
            };
            parts.push(self.sink.lit(l));
        }
        let (subcomps, freed) = self.split(&comp.vars);
        for v in freed {
            if v != var {
                parts.push(self.sink.free(v));
            }
        }
        let mut dead = false;
        for sc in &subcomps {
            let v = self.solve(sc)?;
            if S::is_false(&v) {
                dead = true;
                break;
            }
            parts.push(v);
        }
        self.undo(mark);
        if dead {
            return Ok(self.sink.false_());
        }
        Ok(self.sink.conj(parts))
    }

    /// Early-exit satisfiability on a component, cached with the same keys
    /// (a satisfiable rank-free component counts 1, an unsatisfiable one 0,
    /// which is exactly its projected value).
    fn solve_sat(&mut self, comp: &Comp) -> Result<bool> {
        self.tick()?;
        self.stat_sat_solves += 1;
        let key = fingerprint(&comp.clauses, &comp.vars);
        if let Some(v) = self.cache.get(&key) {
            self.stat_hits += 1;
            return Ok(!S::is_false(v));
        }
        let var = self.pick(comp);
        let mut sat = false;
        for value in [false, true] {
            let mark = self.trail.len();
            if !self.propagate(var, value) {
                self.undo(mark);
                continue;
            }
            let (subcomps, _freed) = self.split(&comp.vars);
            let mut all = true;
            for sc in &subcomps {
                if !self.solve_sat(sc)? {
                    all = false;
                    break;
                }
            }
            self.undo(mark);
            if all {
                sat = true;
                break;
            }
        }
        let v = if sat {
            self.sink.true_()
        } else {
            self.sink.false_()
        };
        self.cache_insert(key, v)?;
        Ok(sat)
    }

    /// Run the whole search and fold the formula's value.
    pub(crate) fn run(mut self) -> Result<(S::V, S)> {
        // empty clause: contradiction at construction
        if self.clause_span.iter().any(|&(s, e)| s == e) {
            let v = self.sink.false_();
            return Ok((v, self.sink));
        }
        // top-level units
        let mut ok = true;
        let unit_ids: Vec<u32> = (0..self.clause_span.len() as u32)
            .filter(|&c| {
                let (s, e) = self.clause_span[c as usize];
                e - s == 1
            })
            .collect();
        for c in unit_ids {
            let l = self.clause_lits(c)[0];
            let v = l.unsigned_abs();
            match self.assign[v as usize] {
                0 => {
                    if !self.propagate(v, l > 0) {
                        ok = false;
                        break;
                    }
                }
                1 if l > 0 => {}
                2 if l < 0 => {}
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            let v = self.sink.false_();
            return Ok((v, self.sink));
        }
        let all_vars: Vec<u32> = (1..=self.classes.len() as u32).collect();
        let mut parts = Vec::new();
        for i in 0..self.trail.len() {
            let v = self.trail[i];
            let l = if self.assign[v as usize] == 1 {
                v as i32
            } else {
                -(v as i32)
            };
            parts.push(self.sink.lit(l));
        }
        let (comps, freed) = self.split(&all_vars);
        for v in freed {
            parts.push(self.sink.free(v));
        }
        let mut dead = false;
        for sc in &comps {
            let v = self.solve(sc)?;
            if S::is_false(&v) {
                dead = true;
                break;
            }
            parts.push(v);
        }
        let v = if dead {
            self.sink.false_()
        } else {
            self.sink.conj(parts)
        };
        if std::env::var_os("DLQ_SEARCH_STATS").is_some() {
            eprintln!(
                "search stats: solves={} sat_solves={} cache_hits={} cache_entries={}",
                self.stat_solves,
                self.stat_sat_solves,
                self.stat_hits,
                self.cache.len()
            );
        }
        Ok((v, self.sink))
    }
}

/// Plain model search (no caching): returns a full satisfying assignment,
/// used by blocking-clause enumeration.
pub(crate) fn sat_model(f: &CnfFormula, extra_clauses: &[Vec<i32>]) -> Option<Vec<bool>> {
    struct M {
        lits: Vec<i32>,
        clause_span: Vec<(u32, u32)>,
        occ_pos: Vec<Vec<u32>>,
        occ_neg: Vec<Vec<u32>>,
        assign: Vec<u8>,
        n_true: Vec<u32>,
        n_unassigned: Vec<u32>,
        trail: Vec<u32>,
    }
    impl M {
        fn propagate(&mut self, var: u32, value: bool) -> bool {
            let mut queue = vec![(var, value)];
            let mut qi = 0;
            while qi < queue.len() {
                let (v, val) = queue[qi];
                qi += 1;
                match self.assign[v as usize] {
                    1 if val => continue,
                    2 if !val => continue,
                    0 => {}
                    _ => return false,
                }
                self.assign[v as usize] = if val { 1 } else { 2 };
                self.trail.push(v);
                let (sat_side, unsat_side) = if val {
                    (&self.occ_pos[v as usize], &self.occ_neg[v as usize])
                } else {
                    (&self.occ_neg[v as usize], &self.occ_pos[v as usize])
                };
                for &c in sat_side {
                    self.n_true[c as usize] += 1;
                }
                let mut conflict = false;
                for i in 0..unsat_side.len() {
                    let c = unsat_side[i];
                    self.n_unassigned[c as usize] -= 1;
                    if self.n_true[c as usize] == 0 {
                        match self.n_unassigned[c as usize] {
                            0 => conflict = true,
                            1 => {
                                let (s, e) = self.clause_span[c as usize];
                                for j in s..e {
                                    let l = self.lits[j as usize];
                                    if self.assign[l.unsigned_abs() as usize] == 0 {
                                        queue.push((l.unsigned_abs(), l > 0));
                                        break;
                                    }
                                }
                            }
                            _ => {}
                        }
                    }
                }
                if conflict {
                    return false;
                }
            }
            true
        }

        fn undo(&mut self, mark: usize) {
            while self.trail.len() > mark {
                let v = self.trail.pop().unwrap();
                let val = self.assign[v as usize] == 1;
                let (sat_side, unsat_side) = if val {
                    (&self.occ_pos[v as usize], &self.occ_neg[v as usize])
                } else {
                    (&self.occ_neg[v as usize], &self.occ_pos[v as usize])
                };
                for &c in sat_side {
                    self.n_true[c as usize] -= 1;
                }
                for &c in unsat_side {
                    self.n_unassigned[c as usize] += 1;
                }
                self.assign[v as usize] = 0;
            }
        }

        fn search(&mut self) -> bool {
            // pick the unassigned var with most alive occurrences
            let mut best = (0u32, 0u32);
            for c in 0..self.clause_span.len() {
                if self.n_true[c] > 0 {
                    continue;
                }
                let (s, e) = self.clause_span[c];
                for j in s..e {
                    let v = self.lits[j as usize].unsigned_abs();
                    if self.assign[v as usize] == 0 {
                        // occurrence counting proxy: first alive literal wins ties
                        if best.0 == 0 {
                            best = (v, 1);
                        }
                    }
                }
                if best.0 != 0 {
                    break;
                }
            }
            if best.0 == 0 {
                return true; // all clauses satisfied
            }
            for value in [true, false] {
                let mark = self.trail.len();
                if self.propagate(best.0, value) && self.search() {
                    return true;
                }
                self.undo(mark);
            }
            false
        }
    }

    let nv = f.num_vars as usize;
    let mut m = M {
        lits: Vec::new(),
        clause_span: Vec::new(),
        occ_pos: vec![Vec::new(); nv + 1],
        occ_neg: vec![Vec::new(); nv + 1],
        assign: vec![0; nv + 1],
        n_true: Vec::new(),
        n_unassigned: Vec::new(),
        trail: Vec::new(),
    };
    for clause in f.clauses.iter().chain(extra_clauses) {
        let mut c = clause.clone();
        c.sort_unstable();
        c.dedup();
        if c.iter().any(|&l| c.binary_search(&-l).is_ok()) {
            continue;
        }
        if c.is_empty() {
            return None;
        }
        let id = m.clause_span.len() as u32;
        let start = m.lits.len() as u32;
        for &l in &c {
            m.lits.push(l);
            if l > 0 {
                m.occ_pos[l as usize].push(id);
            } else {
                m.occ_neg[(-l) as usize].push(id);
            }
        }
        m.clause_span.push((start, m.lits.len() as u32));
        m.n_unassigned.push(c.len() as u32);
        m.n_true.push(0);
    }
    // top-level units
    for c in 0..m.clause_span.len() {
        let (s, e) = m.clause_span[c];
        if e - s == 1 && m.n_true[c] == 0 {
            let l = m.lits[s as usize];
            let v = l.unsigned_abs();
            if m.assign[v as usize] == 0 && !m.propagate(v, l > 0) {
                return None;
            }
        }
    }
    if !m.search() {
        return None;
    }
    Some((1..=nv).map(|v| m.assign[v] == 1).collect())
}
