//! Construct-in-Advance engine #1: a reduced ordered BDD store with
//! hash-consing, an apply/exists/restrict kernel, projected counting, lazy
//! model enumeration, and the FORCE variable-ordering heuristic.
//!
//! Nodes live in one arena per manager; ids 0 and 1 are the terminals. A
//! node stores the *position* of its variable under the manager's order, so
//! orderedness is structural. One manager is single-threaded; independent
//! managers parallelize (one per worker).

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::cnf::{ClassSet, CnfFormula};
use crate::error::{Error, Result};

pub const FALSE: u32 = 0;
pub const TRUE: u32 = 1;
const TERMINAL_LEVEL: u32 = u32::MAX;

pub const DEFAULT_NODE_BUDGET: usize = 10_000_000;

/// A variable order: `perm[position] = var`, `pos[var - 1] = position`, and
/// the total clause span that ranked it.
#[derive(Debug, Clone)]
pub struct VarOrder {
    perm: Vec<u32>,
    pos: Vec<u32>,
    pub span: u64,
}

impl VarOrder {
    fn from_perm(perm: Vec<u32>, f: &CnfFormula) -> VarOrder {
        let mut pos = vec![0u32; f.num_vars as usize];
        for (p, &v) in perm.iter().enumerate() {
            pos[(v - 1) as usize] = p as u32;
        }
        let span = total_span(f, &pos);
        VarOrder { perm, pos, span }
    }

    pub fn identity(f: &CnfFormula) -> VarOrder {
        VarOrder::from_perm((1..=f.num_vars).collect(), f)
    }

    pub fn position(&self, var: u32) -> u32 {
        self.pos[(var - 1) as usize]
    }

    pub fn var_at(&self, position: u32) -> u32 {
        self.perm[position as usize]
    }

    pub fn len(&self) -> u32 {
        self.perm.len() as u32
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }
}

fn total_span(f: &CnfFormula, pos: &[u32]) -> u64 {
    let mut span = 0u64;
    for clause in &f.clauses {
        let mut lo = u32::MAX;
        let mut hi = 0u32;
        for &l in clause {
            let p = pos[(l.unsigned_abs() - 1) as usize];
            lo = lo.min(p);
            hi = hi.max(p);
        }
        if lo != u32::MAX {
            span += (hi - lo) as u64;
        }
    }
    span
}

/// Force-directed linear arrangement: iteratively place each variable at the
/// mean center of gravity of its clauses. Returns the best-scoring order
/// seen, the identity included, so the result never scores worse than the
/// identity order.
pub fn force_order(f: &CnfFormula, iterations: u32) -> VarOrder {
    let identity = VarOrder::identity(f);
    if f.num_vars == 0 || f.clauses.is_empty() || iterations == 0 {
        return identity;
    }
    let nv = f.num_vars as usize;
    let mut clauses_of: Vec<Vec<u32>> = vec![Vec::new(); nv];
    for (ci, clause) in f.clauses.iter().enumerate() {
        for &l in clause {
            clauses_of[(l.unsigned_abs() - 1) as usize].push(ci as u32);
        }
    }
    for c in &mut clauses_of {
        c.sort_unstable();
        c.dedup();
    }

    let mut pos: Vec<u32> = identity.pos.clone();
    let mut best = identity;
    for _ in 0..iterations {
        let mut cog = vec![0f64; f.clauses.len()];
        for (ci, clause) in f.clauses.iter().enumerate() {
            if clause.is_empty() {
                continue;
            }
            let sum: f64 = clause
                .iter()
                .map(|&l| pos[(l.unsigned_abs() - 1) as usize] as f64)
                .sum();
            cog[ci] = sum / clause.len() as f64;
        }
        let mut keyed: Vec<(f64, u32, u32)> = (0..nv as u32)
            .map(|v| {
                let cs = &clauses_of[v as usize];
                let key = if cs.is_empty() {
                    pos[v as usize] as f64
                } else {
                    cs.iter().map(|&c| cog[c as usize]).sum::<f64>() / cs.len() as f64
                };
                (key, pos[v as usize], v + 1)
            })
            .collect();
        keyed.sort_by(|a, b| {
            a.0.partial_cmp(&b.0)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.1.cmp(&b.1))
        });
        let perm: Vec<u32> = keyed.iter().map(|&(_, _, v)| v).collect();
        let candidate = VarOrder::from_perm(perm, f);
        pos = candidate.pos.clone();
        if candidate.span < best.span {
            best = candidate;
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Node {
    level: u32,
    lo: u32,
    hi: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Op {
    And(u32, u32),
    Or(u32, u32),
}

pub struct BddManager {
    nodes: Vec<Node>,
    unique: HashMap<Node, u32>,
    op_cache: HashMap<Op, u32>,
    order: VarOrder,
    node_budget: usize,
}

impl BddManager {
    pub fn new(order: VarOrder) -> BddManager {
        BddManager::with_budget(order, DEFAULT_NODE_BUDGET)
    }

    pub fn with_budget(order: VarOrder, node_budget: usize) -> BddManager {
        let terminal = Node {
            level: TERMINAL_LEVEL,
            lo: 0,
            hi: 0,
        };
        let mut nodes = Vec::with_capacity(1024);
        nodes.push(terminal); // FALSE
        nodes.push(Node {
            level: TERMINAL_LEVEL,
            lo: 1,
            hi: 1,
        }); // TRUE
        BddManager {
            nodes,
            unique: HashMap::new(),
            op_cache: HashMap::new(),
            order,
            node_budget,
        }
    }

    pub fn order(&self) -> &VarOrder {
        &self.order
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn level(&self, n: u32) -> u32 {
        self.nodes[n as usize].level
    }

    fn mk(&mut self, level: u32, lo: u32, hi: u32) -> Result<u32> {
        if lo == hi {
            return Ok(lo);
        }
        let node = Node { level, lo, hi };
        if let Some(&id) = self.unique.get(&node) {
            return Ok(id);
        }
        if self.nodes.len() >= self.node_budget {
            return Err(Error::Resource {
                what: "BDD nodes",
                limit: self.node_budget as u64,
            });
        }
        let id = self.nodes.len() as u32;
        self.nodes.push(node);
        self.unique.insert(node, id);
        Ok(id)
    }

    pub fn var(&mut self, var: u32) -> Result<u32> {
        self.mk(self.order.position(var), FALSE, TRUE)
    }

    fn cofactors(&self, n: u32, level: u32) -> (u32, u32) {
        let node = self.nodes[n as usize];
        if node.level == level {
            (node.lo, node.hi)
        } else {
            (n, n)
        }
    }

    pub fn and(&mut self, a: u32, b: u32) -> Result<u32> {
        if a == FALSE || b == FALSE {
            return Ok(FALSE);
        }
        if a == TRUE {
            return Ok(b);
        }
        if b == TRUE || a == b {
            return Ok(a);
        }
        let key = Op::And(a.min(b), a.max(b));
        if let Some(&r) = self.op_cache.get(&key) {
            return Ok(r);
        }
        let level = self.level(a).min(self.level(b));
        let (alo, ahi) = self.cofactors(a, level);
        let (blo, bhi) = self.cofactors(b, level);
        let lo = self.and(alo, blo)?;
        let hi = self.and(ahi, bhi)?;
        let r = self.mk(level, lo, hi)?;
        self.op_cache.insert(key, r);
        Ok(r)
    }

    pub fn or(&mut self, a: u32, b: u32) -> Result<u32> {
        if a == TRUE || b == TRUE {
            return Ok(TRUE);
        }
        if a == FALSE {
            return Ok(b);
        }
        if b == FALSE || a == b {
            return Ok(a);
        }
        let key = Op::Or(a.min(b), a.max(b));
        if let Some(&r) = self.op_cache.get(&key) {
            return Ok(r);
        }
        let level = self.level(a).min(self.level(b));
        let (alo, ahi) = self.cofactors(a, level);
        let (blo, bhi) = self.cofactors(b, level);
        let lo = self.or(alo, blo)?;
        let hi = self.or(ahi, bhi)?;
        let r = self.mk(level, lo, hi)?;
        self.op_cache.insert(key, r);
        Ok(r)
    }

    fn clause_bdd(&mut self, clause: &[i32]) -> Result<u32> {
        let mut lits: Vec<(u32, bool)> = clause
            .iter()
            .map(|&l| (self.order.position(l.unsigned_abs()), l > 0))
            .collect();
        lits.sort_unstable();
        lits.dedup();
        // complementary literals on one variable: tautology
        if lits.windows(2).any(|w| w[0].0 == w[1].0) {
            return Ok(TRUE);
        }
        let mut acc = FALSE;
        for &(level, positive) in lits.iter().rev() {
            acc = if positive {
                self.mk(level, acc, TRUE)?
            } else {
                self.mk(level, TRUE, acc)?
            };
        }
        Ok(acc)
    }

    /// Clause processing order for the apply chain: by minimum variable
    /// position, then clause length.
    fn clause_schedule(&self, f: &CnfFormula) -> Vec<usize> {
        let mut ids: Vec<usize> = (0..f.clauses.len()).collect();
        let key = |ci: usize| {
            let clause = &f.clauses[ci];
            let min = clause
                .iter()
                .map(|&l| self.order.position(l.unsigned_abs()))
                .min()
                .unwrap_or(u32::MAX);
            (min, clause.len())
        };
        ids.sort_by_key(|&ci| key(ci));
        ids
    }

    /// Conjoin every clause; the result represents exactly the models of `f`.
    pub fn build(&mut self, f: &CnfFormula) -> Result<u32> {
        self.op_cache.clear();
        let mut acc = TRUE;
        for ci in self.clause_schedule(f) {
            let cb = self.clause_bdd(&f.clauses[ci])?;
            acc = self.and(acc, cb)?;
            if acc == FALSE {
                return Ok(FALSE);
            }
        }
        Ok(acc)
    }

    /// Conjoin clauses while existentially quantifying every variable whose
    /// class is outside `keep` as soon as its last clause has been merged.
    /// The result represents the models of `∃(non-keep vars). f`, projected
    /// construction for the Construct-in-Advance flow.
    ///
    /// Clauses are processed in emission order: the bit blaster emits gates
    /// in program order, so this sweeps the circuit like a symbolic
    /// simulation and internal wires quantify out right after their last
    /// use, keeping intermediate diagrams near the live-wire frontier.
    pub fn build_projected(&mut self, f: &CnfFormula, keep: ClassSet) -> Result<u32> {
        self.op_cache.clear();
        let schedule: Vec<usize> = (0..f.clauses.len()).collect();
        let mut last_use: HashMap<u32, usize> = HashMap::new();
        for (i, &ci) in schedule.iter().enumerate() {
            for &l in &f.clauses[ci] {
                last_use.insert(l.unsigned_abs(), i);
            }
        }
        let mut acc = TRUE;
        for (i, &ci) in schedule.iter().enumerate() {
            let cb = self.clause_bdd(&f.clauses[ci])?;
            acc = self.and(acc, cb)?;
            if acc == FALSE {
                return Ok(FALSE);
            }
            let ready: Vec<u32> = f.clauses[ci]
                .iter()
                .map(|&l| l.unsigned_abs())
                .filter(|v| last_use.get(v) == Some(&i) && !keep.contains(f.class_of(*v)))
                .collect();
            if !ready.is_empty() {
                acc = self.exists(acc, &ready)?;
            }
        }
        Ok(acc)
    }

    /// Existential quantification over a set of variables.
    pub fn exists(&mut self, n: u32, vars: &[u32]) -> Result<u32> {
        let levels: BTreeSet<u32> = vars.iter().map(|&v| self.order.position(v)).collect();
        if levels.is_empty() {
            return Ok(n);
        }
        let mut cache: HashMap<u32, u32> = HashMap::new();
        self.exists_rec(n, &levels, &mut cache)
    }

    fn exists_rec(
        &mut self,
        n: u32,
        levels: &BTreeSet<u32>,
        cache: &mut HashMap<u32, u32>,
    ) -> Result<u32> {
        if n == TRUE || n == FALSE {
            return Ok(n);
        }
        // nothing quantified at or below this node
        if levels.iter().next_back() < Some(&self.level(n)) {
            return Ok(n);
        }
        if let Some(&r) = cache.get(&n) {
            return Ok(r);
        }
        let node = self.nodes[n as usize];
        let lo = self.exists_rec(node.lo, levels, cache)?;
        let hi = self.exists_rec(node.hi, levels, cache)?;
        let r = if levels.contains(&node.level) {
            self.or(lo, hi)?
        } else {
            self.mk(node.level, lo, hi)?
        };
        cache.insert(n, r);
        Ok(r)
    }

    /// Cofactor by a partial assignment of variables.
    pub fn restrict(&mut self, n: u32, assignment: &[(u32, bool)]) -> Result<u32> {
        let by_level: HashMap<u32, bool> = assignment
            .iter()
            .map(|&(v, b)| (self.order.position(v), b))
            .collect();
        let mut cache: HashMap<u32, u32> = HashMap::new();
        self.restrict_rec(n, &by_level, &mut cache)
    }

    fn restrict_rec(
        &mut self,
        n: u32,
        by_level: &HashMap<u32, bool>,
        cache: &mut HashMap<u32, u32>,
    ) -> Result<u32> {
        if n == TRUE || n == FALSE {
            return Ok(n);
        }
        if let Some(&r) = cache.get(&n) {
            return Ok(r);
        }
        let node = self.nodes[n as usize];
        let r = match by_level.get(&node.level) {
            Some(&true) => self.restrict_rec(node.hi, by_level, cache)?,
            Some(&false) => self.restrict_rec(node.lo, by_level, cache)?,
            None => {
                let lo = self.restrict_rec(node.lo, by_level, cache)?;
                let hi = self.restrict_rec(node.hi, by_level, cache)?;
                self.mk(node.level, lo, hi)?
            }
        };
        cache.insert(n, r);
        Ok(r)
    }

    /// Number of assignments to `projection` extendable to a model of `n`.
    /// Variables outside the projection must be functionally determined by
    /// it or quantified away first; otherwise paths that differ only on them
    /// are counted more than once.
    pub fn count(&self, n: u32, projection: &[u32]) -> BigUint {
        let nlevels = self.order.len();
        let proj_levels: BTreeSet<u32> =
            projection.iter().map(|&v| self.order.position(v)).collect();
        // prefix[p] = number of projection levels strictly below position p
        let mut prefix = vec![0u32; (nlevels + 2) as usize];
        for p in 0..nlevels {
            prefix[(p + 1) as usize] =
                prefix[p as usize] + proj_levels.contains(&p) as u32;
        }
        let proj_between = |upper: u32, lower: u32| -> u32 {
            // projection levels strictly between positions upper and lower
            let lower = lower.min(nlevels);
            prefix[lower as usize] - prefix[(upper + 1) as usize]
        };
        let mut memo: HashMap<u32, BigUint> = HashMap::new();
        memo.insert(FALSE, BigUint::zero());
        memo.insert(TRUE, BigUint::one());
        let mut stack = vec![n];
        while let Some(&top) = stack.last() {
            if memo.contains_key(&top) {
                stack.pop();
                continue;
            }
            let node = self.nodes[top as usize];
            let lo_ready = memo.contains_key(&node.lo);
            let hi_ready = memo.contains_key(&node.hi);
            if !lo_ready {
                stack.push(node.lo);
            }
            if !hi_ready {
                stack.push(node.hi);
            }
            if lo_ready && hi_ready {
                stack.pop();
                let lo_level = self.level(node.lo);
                let hi_level = self.level(node.hi);
                let lo_gap = proj_between(node.level, lo_level);
                let hi_gap = proj_between(node.level, hi_level);
                let total = (&memo[&node.lo] << lo_gap) + (&memo[&node.hi] << hi_gap);
                memo.insert(top, total);
            }
        }
        let head = if n == TRUE || n == FALSE {
            prefix[nlevels as usize]
        } else {
            prefix[self.level(n) as usize]
        };
        memo[&n].clone() << head
    }

    /// Lazily enumerate projected models in lexicographic order of the
    /// projection variables under the manager's order. Every node below `n`
    /// must sit on a projection level (quantify the rest first).
    pub fn models<'a>(&'a self, n: u32, projection: &[u32]) -> Result<BddModels<'a>> {
        let mut levels: Vec<u32> = projection.iter().map(|&v| self.order.position(v)).collect();
        levels.sort_unstable();
        // validate the precondition once, up front
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![n];
        while let Some(x) = stack.pop() {
            if x == TRUE || x == FALSE || !seen.insert(x) {
                continue;
            }
            let node = self.nodes[x as usize];
            if levels.binary_search(&node.level).is_err() {
                return Err(Error::semantic(format!(
                    "enumeration reached variable {} outside the projection",
                    self.order.var_at(node.level)
                )));
            }
            stack.push(node.lo);
            stack.push(node.hi);
        }
        Ok(BddModels {
            mgr: self,
            levels,
            stack: vec![(n, 0, Vec::new())],
        })
    }

    pub fn to_dot(&self, n: u32) -> String {
        use std::fmt::Write;
        let mut s = String::from("digraph bdd {\n");
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![n];
        while let Some(x) = stack.pop() {
            if !seen.insert(x) {
                continue;
            }
            if x == TRUE || x == FALSE {
                let _ = writeln!(s, "  n{x} [label=\"{}\" shape=box];", x == TRUE);
                continue;
            }
            let node = self.nodes[x as usize];
            let _ = writeln!(s, "  n{x} [label=\"x{}\"];", self.order.var_at(node.level));
            let _ = writeln!(s, "  n{x} -> n{} [style=dashed];", node.lo);
            let _ = writeln!(s, "  n{x} -> n{};", node.hi);
            stack.push(node.lo);
            stack.push(node.hi);
        }
        s.push_str("}\n");
        s
    }
}

/// Lazy projected-model stream; see [`BddManager::models`].
pub struct BddModels<'a> {
    mgr: &'a BddManager,
    levels: Vec<u32>,
    stack: Vec<(u32, usize, Vec<bool>)>,
}

impl<'a> Iterator for BddModels<'a> {
    type Item = Vec<(u32, bool)>;

    fn next(&mut self) -> Option<Self::Item> {
        while let Some((n, i, partial)) = self.stack.pop() {
            if n == FALSE {
                continue;
            }
            if i == self.levels.len() {
                debug_assert_eq!(n, TRUE);
                return Some(
                    self.levels
                        .iter()
                        .zip(&partial)
                        .map(|(&lvl, &b)| (self.mgr.order.var_at(lvl), b))
                        .collect(),
                );
            }
            let target = self.levels[i];
            let level = self.mgr.level(n);
            // push true-branch first so false pops first (lexicographic)
            if n == TRUE || level > target {
                let mut hi = partial.clone();
                hi.push(true);
                self.stack.push((n, i + 1, hi));
                let mut lo = partial;
                lo.push(false);
                self.stack.push((n, i + 1, lo));
            } else {
                debug_assert_eq!(level, target);
                let node = self.mgr.nodes[n as usize];
                let mut hi = partial.clone();
                hi.push(true);
                self.stack.push((node.hi, i + 1, hi));
                let mut lo = partial;
                lo.push(false);
                self.stack.push((node.lo, i + 1, lo));
            }
        }
        None
    }
}

/// Run a closure on a dedicated thread with a large stack; BDD recursions
/// can nest as deep as the variable count.
pub(crate) fn with_big_stack<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    std::thread::scope(|scope| {
        std::thread::Builder::new()
            .stack_size(256 << 20)
            .spawn_scoped(scope, f)
            .expect("failed to spawn worker thread")
            .join()
            .expect("BDD worker panicked")
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::VarClass;

    fn cnf(clauses: &[&[i32]], nvars: u32) -> CnfFormula {
        let mut f = CnfFormula::new();
        for _ in 0..nvars {
            f.fresh_var(VarClass::Input, None);
        }
        for c in clauses {
            f.add_clause(c.to_vec());
        }
        f
    }

    #[test]
    fn unsat_builds_terminal_false() {
        let f = cnf(&[&[1], &[-1]], 1);
        let mut m = BddManager::new(VarOrder::identity(&f));
        assert_eq!(m.build(&f).unwrap(), FALSE);
    }

    #[test]
    fn simple_or_counts_three() {
        let f = cnf(&[&[1, 2]], 2);
        let mut m = BddManager::new(VarOrder::identity(&f));
        let b = m.build(&f).unwrap();
        assert_eq!(m.count(b, &[1, 2]), 3u32.into());
        // (x1 ∨ x2) is a 1-node BDD plus terminals
        assert_eq!(m.node_count(), 2 + 2);
    }

    #[test]
    fn terminal_true_counts_full_space() {
        let f = cnf(&[], 5);
        let m = BddManager::new(VarOrder::identity(&f));
        assert_eq!(m.count(TRUE, &[1, 2, 3, 4, 5]), 32u32.into());
    }

    #[test]
    fn exists_all_vars_of_sat_is_true() {
        let f = cnf(&[&[1, -2], &[2, 3]], 3);
        let mut m = BddManager::new(VarOrder::identity(&f));
        let b = m.build(&f).unwrap();
        assert_eq!(m.exists(b, &[1, 2, 3]).unwrap(), TRUE);
        assert_eq!(m.exists(b, &[]).unwrap(), b);
    }

    #[test]
    fn canonicity_same_models_same_root() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..40 {
            let nvars = rng.gen_range(2..=8u32);
            let nclauses = rng.gen_range(1..=12);
            let mut clauses: Vec<Vec<i32>> = Vec::new();
            for _ in 0..nclauses {
                let len = rng.gen_range(1..=3.min(nvars));
                let mut clause: Vec<i32> = Vec::new();
                for _ in 0..len {
                    let v = rng.gen_range(1..=nvars) as i32;
                    clause.push(if rng.gen_bool(0.5) { v } else { -v });
                }
                clauses.push(clause);
            }
            let mut f1 = cnf(&[], nvars);
            for c in &clauses {
                f1.add_clause(c.clone());
            }
            // same models: clauses permuted, literals shuffled, one duplicate
            let mut f2 = cnf(&[], nvars);
            let mut ids: Vec<usize> = (0..clauses.len()).collect();
            ids.reverse();
            for &i in &ids {
                let mut c = clauses[i].clone();
                c.reverse();
                f2.add_clause(c);
            }
            f2.add_clause(clauses[0].clone());
            let mut m = BddManager::new(VarOrder::identity(&f1));
            let b1 = m.build(&f1).unwrap();
            let b2 = m.build(&f2).unwrap();
            assert_eq!(b1, b2);
        }
    }

    #[test]
    fn count_matches_brute_force_on_random_formulas() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..60 {
            let nvars = rng.gen_range(1..=10u32);
            let nclauses = rng.gen_range(0..=20);
            let mut f = cnf(&[], nvars);
            for _ in 0..nclauses {
                let len = rng.gen_range(1..=3.min(nvars));
                let mut clause = Vec::new();
                for _ in 0..len {
                    let v = rng.gen_range(1..=nvars) as i32;
                    clause.push(if rng.gen_bool(0.5) { v } else { -v });
                }
                f.add_clause(clause);
            }
            let mut m = BddManager::new(VarOrder::identity(&f));
            let b = m.build(&f).unwrap();
            let all: Vec<u32> = (1..=nvars).collect();
            let mut want = 0u64;
            'outer: for model in 0u64..(1 << nvars) {
                for clause in &f.clauses {
                    if !clause.iter().any(|&l| {
                        ((model >> (l.unsigned_abs() - 1)) & 1 == 1) == (l > 0)
                    }) {
                        continue 'outer;
                    }
                }
                want += 1;
            }
            assert_eq!(m.count(b, &all), want.into());
            // enumeration agrees with the count
            let got = m.models(b, &all).unwrap().count() as u64;
            assert_eq!(got, want);
        }
    }

    #[test]
    fn force_identity_when_zero_iterations() {
        let f = cnf(&[&[1, 4], &[2, 3]], 4);
        let ord = force_order(&f, 0);
        assert_eq!((0..4).map(|p| ord.var_at(p)).collect::<Vec<_>>(), vec![1, 2, 3, 4]);
    }

    #[test]
    fn force_single_clause_span_is_len_minus_one() {
        // one clause over vars {1, 4, 8} of 8: optimal adjacent placement
        let f = cnf(&[&[1, 4, 8]], 8);
        let ord = force_order(&f, 20);
        assert_eq!(ord.span, 2);
    }

    #[test]
    fn force_improves_scrambled_chain() {
        // chain (x1 x2)(x2 x3)...(x15 x16) relabeled by a fixed scramble
        let n = 16u32;
        let scramble: Vec<u32> = (0..n).map(|i| (i * 7 + 3) % n + 1).collect();
        let mut f = cnf(&[], n);
        for i in 0..(n - 1) as usize {
            f.add_clause(vec![scramble[i] as i32, scramble[i + 1] as i32]);
        }
        let identity_span = VarOrder::identity(&f).span;
        let ord = force_order(&f, 50);
        assert!(
            ord.span < identity_span,
            "FORCE span {} not below identity span {identity_span}",
            ord.span
        );
    }

    #[test]
    fn models_enumerates_lexicographically() {
        let f = cnf(&[&[1, 2]], 2);
        let mut m = BddManager::new(VarOrder::identity(&f));
        let b = m.build(&f).unwrap();
        let rows: Vec<Vec<(u32, bool)>> = m.models(b, &[1, 2]).unwrap().collect();
        assert_eq!(
            rows,
            vec![
                vec![(1, false), (2, true)],
                vec![(1, true), (2, false)],
                vec![(1, true), (2, true)],
            ]
        );
    }

    #[test]
    fn node_budget_fails_loudly() {
        let f = cnf(&[&[1, 2], &[3, 4], &[5, 6]], 6);
        let mut m = BddManager::with_budget(VarOrder::identity(&f), 4);
        assert!(matches!(
            m.build(&f),
            Err(Error::Resource { what: "BDD nodes", .. })
        ));
    }
}
