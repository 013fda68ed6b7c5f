//! Construct-in-Advance engine #2: compile a CNF to Decision-DNNF by tracing
//! the exhaustive DPLL search, then count in linear time over the DAG.
//!
//! Node semantics: `Decision { var, lo, hi }` denotes (¬var ∧ lo) ∨ (var ∧
//! hi), so determinism is structural; `And` children have pairwise disjoint
//! variable scopes (decomposability). Branches of a decision cover the same
//! scope by construction: implied literals appear as `Lit` conjuncts and
//! variables that vanish inside a component appear as `Decision(v, True,
//! True)` conjuncts, so counting needs no smoothing pass. Variables that
//! appear in no clause at all surface the same way at the root.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::cnf::{ClassSet, CnfFormula, VarClass};
use crate::error::{Error, Result};
use crate::search::{SearchConfig, Searcher, Sink};

pub type NodeId = u32;

pub const FALSE: NodeId = 0;
pub const TRUE: NodeId = 1;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DnnfNode {
    False,
    True,
    Lit(i32),
    And(Box<[NodeId]>),
    Decision { var: u32, lo: NodeId, hi: NodeId },
}

#[derive(Debug, Clone)]
pub struct DnnfGraph {
    pub nodes: Vec<DnnfNode>,
    pub root: NodeId,
    pub num_vars: u32,
    pub classes: Vec<VarClass>,
}

struct DnnfSink {
    nodes: Vec<DnnfNode>,
    lit_ids: HashMap<i32, NodeId>,
    free_ids: HashMap<u32, NodeId>,
    and_ids: HashMap<Box<[NodeId]>, NodeId>,
    dec_ids: HashMap<(u32, NodeId, NodeId), NodeId>,
}

impl DnnfSink {
    fn new() -> DnnfSink {
        DnnfSink {
            nodes: vec![DnnfNode::False, DnnfNode::True],
            lit_ids: HashMap::new(),
            free_ids: HashMap::new(),
            and_ids: HashMap::new(),
            dec_ids: HashMap::new(),
        }
    }

    fn push(&mut self, n: DnnfNode) -> NodeId {
        let id = self.nodes.len() as NodeId;
        self.nodes.push(n);
        id
    }
}

impl Sink for DnnfSink {
    type V = NodeId;
    const SAT_SHORTCUT: bool = false; // the DAG must represent every component

    fn false_(&mut self) -> NodeId {
        FALSE
    }
    fn true_(&mut self) -> NodeId {
        TRUE
    }
    fn lit(&mut self, lit: i32) -> NodeId {
        if let Some(&id) = self.lit_ids.get(&lit) {
            return id;
        }
        let id = self.push(DnnfNode::Lit(lit));
        self.lit_ids.insert(lit, id);
        id
    }
    fn free(&mut self, var: u32) -> NodeId {
        if let Some(&id) = self.free_ids.get(&var) {
            return id;
        }
        let id = self.push(DnnfNode::Decision {
            var,
            lo: TRUE,
            hi: TRUE,
        });
        self.free_ids.insert(var, id);
        id
    }
    fn conj(&mut self, parts: Vec<NodeId>) -> NodeId {
        let mut children: Vec<NodeId> = parts.into_iter().filter(|&p| p != TRUE).collect();
        if children.iter().any(|&c| c == FALSE) {
            return FALSE;
        }
        match children.len() {
            0 => TRUE,
            1 => children[0],
            _ => {
                children.sort_unstable();
                let key: Box<[NodeId]> = children.into_boxed_slice();
                if let Some(&id) = self.and_ids.get(&key) {
                    return id;
                }
                let id = self.push(DnnfNode::And(key.clone()));
                self.and_ids.insert(key, id);
                id
            }
        }
    }
    fn decide(&mut self, var: u32, lo: NodeId, hi: NodeId) -> NodeId {
        if lo == FALSE && hi == FALSE {
            return FALSE;
        }
        let key = (var, lo, hi);
        if let Some(&id) = self.dec_ids.get(&key) {
            return id;
        }
        let id = self.push(DnnfNode::Decision { var, lo, hi });
        self.dec_ids.insert(key, id);
        id
    }
    fn is_false(v: &NodeId) -> bool {
        *v == FALSE
    }
}

/// Compile `f` with the given class decision priority (a permutation of all
/// four classes; earlier classes are decided first along every path).
pub fn compile_dnnf(f: &CnfFormula, priority: &[VarClass; 4]) -> Result<DnnfGraph> {
    compile_dnnf_with(f, priority, SearchConfig::compiling(priority))
}

pub(crate) fn compile_dnnf_with(
    f: &CnfFormula,
    priority: &[VarClass; 4],
    cfg: SearchConfig,
) -> Result<DnnfGraph> {
    debug_assert_eq!(
        {
            let mut p = priority.to_vec();
            p.sort_by_key(|c| crate::search::class_index(*c));
            p
        },
        VarClass::ALL.to_vec(),
        "priority must be a permutation of the four classes"
    );
    let (root, sink) = Searcher::new(f, DnnfSink::new(), cfg).run()?;
    Ok(DnnfGraph {
        nodes: sink.nodes,
        root,
        num_vars: f.num_vars,
        classes: f.classes.clone(),
    })
}

impl DnnfGraph {
    fn var_of(&self, node: &DnnfNode) -> Option<u32> {
        match node {
            DnnfNode::Lit(l) => Some(l.unsigned_abs()),
            DnnfNode::Decision { var, .. } => Some(*var),
            _ => None,
        }
    }

    pub fn class_of(&self, var: u32) -> VarClass {
        self.classes[(var - 1) as usize]
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Model count over all formula variables. Branch scopes are complete by
    /// construction, so a decision is a plain sum and an And a plain
    /// product.
    pub fn count(&self) -> BigUint {
        self.project_count_conditioned(ClassSet::ALL, &HashMap::new())
            .expect("ALL-class projection cannot violate priorities")
    }

    /// Projected count over the `keep` classes. The graph must have been
    /// compiled with every keep class prioritized before every other class;
    /// violations are detected by scanning decision paths.
    pub fn project_count(&self, keep: ClassSet) -> Result<BigUint> {
        self.project_count_conditioned(keep, &HashMap::new())
    }

    /// Projected count of the graph conditioned on fixed variable values
    /// (the Construct-in-Advance query path: compile once, condition per
    /// observation).
    pub fn project_count_conditioned(
        &self,
        keep: ClassSet,
        units: &HashMap<u32, bool>,
    ) -> Result<BigUint> {
        // per node: (satisfiable, mentions a keep var, count over keep vars)
        let mut sat = vec![false; self.nodes.len()];
        let mut has_keep = vec![false; self.nodes.len()];
        let mut counts: Vec<BigUint> = vec![BigUint::zero(); self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            match node {
                DnnfNode::False => {}
                DnnfNode::True => {
                    sat[i] = true;
                    counts[i] = BigUint::one();
                }
                DnnfNode::Lit(l) => {
                    let var = l.unsigned_abs();
                    let keep_var = keep.contains(self.class_of(var));
                    match units.get(&var) {
                        Some(&forced) if forced != (*l > 0) => {
                            // contradicted literal: unsatisfiable node
                        }
                        _ => {
                            sat[i] = true;
                            counts[i] = BigUint::one();
                        }
                    }
                    has_keep[i] = keep_var && !units.contains_key(&var);
                }
                DnnfNode::And(children) => {
                    let mut all = true;
                    let mut any_keep = false;
                    let mut product = BigUint::one();
                    for &c in children.iter() {
                        all &= sat[c as usize];
                        any_keep |= has_keep[c as usize];
                        product *= &counts[c as usize];
                    }
                    sat[i] = all;
                    has_keep[i] = any_keep;
                    counts[i] = if all { product } else { BigUint::zero() };
                }
                DnnfNode::Decision { var, lo, hi } => {
                    let (lo, hi) = (*lo as usize, *hi as usize);
                    let keep_var = keep.contains(self.class_of(*var));
                    let (use_lo, use_hi) = match units.get(var) {
                        Some(&true) => (false, true),
                        Some(&false) => (true, false),
                        None => (true, true),
                    };
                    let lo_sat = use_lo && sat[lo];
                    let hi_sat = use_hi && sat[hi];
                    sat[i] = lo_sat || hi_sat;
                    let conditioned = units.contains_key(var);
                    has_keep[i] =
                        (keep_var && !conditioned) || has_keep[lo] || has_keep[hi];
                    if keep_var || conditioned {
                        let mut total = BigUint::zero();
                        if lo_sat {
                            total += &counts[lo];
                        }
                        if hi_sat {
                            total += &counts[hi];
                        }
                        counts[i] = total;
                    } else {
                        // a decision on a non-projected variable: its subtree
                        // must not mention projected variables
                        if has_keep[lo] || has_keep[hi] {
                            return Err(Error::semantic(
                                "projected counting requires the keep classes to be \
                                 prioritized before all others during compilation"
                                    .to_string(),
                            ));
                        }
                        counts[i] = if sat[i] {
                            BigUint::one()
                        } else {
                            BigUint::zero()
                        };
                    }
                }
            }
        }
        Ok(counts[self.root as usize].clone())
    }

    /// Check decomposability (And children have disjoint variable scopes)
    /// and determinism (a decision variable does not reappear below the
    /// decision). Intended for moderate graph sizes.
    pub fn validate(&self) -> Result<()> {
        let mut scopes: Vec<std::collections::BTreeSet<u32>> = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let scope = match node {
                DnnfNode::False | DnnfNode::True => Default::default(),
                DnnfNode::Lit(l) => std::iter::once(l.unsigned_abs()).collect(),
                DnnfNode::And(children) => {
                    let mut union: std::collections::BTreeSet<u32> = Default::default();
                    let mut total = 0usize;
                    for &c in children.iter() {
                        total += scopes[c as usize].len();
                        union.extend(scopes[c as usize].iter().copied());
                    }
                    if union.len() != total {
                        return Err(Error::semantic(format!(
                            "And node {i} is not decomposable: children share variables"
                        )));
                    }
                    union
                }
                DnnfNode::Decision { var, lo, hi } => {
                    let mut union: std::collections::BTreeSet<u32> = Default::default();
                    union.extend(scopes[*lo as usize].iter().copied());
                    union.extend(scopes[*hi as usize].iter().copied());
                    if union.contains(var) {
                        return Err(Error::semantic(format!(
                            "Decision node {i} is not deterministic: variable {var} reappears below"
                        )));
                    }
                    union.insert(*var);
                    union
                }
            };
            scopes.push(scope);
        }
        Ok(())
    }

    /// Enumerate the assignments to keep-class variables extendable to a
    /// model, as sorted `(var, value)` lists. Capped.
    pub fn enumerate(&self, keep: ClassSet, cap: usize) -> Result<Vec<Vec<(u32, bool)>>> {
        type Models = Vec<Vec<(u32, bool)>>;
        let mut sat = vec![false; self.nodes.len()];
        let mut models: Vec<Models> = Vec::with_capacity(self.nodes.len());
        for (i, node) in self.nodes.iter().enumerate() {
            let m: Models = match node {
                DnnfNode::False => Vec::new(),
                DnnfNode::True => vec![Vec::new()],
                DnnfNode::Lit(l) => {
                    sat[i] = true;
                    let var = l.unsigned_abs();
                    if keep.contains(self.class_of(var)) {
                        vec![vec![(var, *l > 0)]]
                    } else {
                        vec![Vec::new()]
                    }
                }
                DnnfNode::And(children) => {
                    let all = children.iter().all(|&c| sat[c as usize]);
                    if !all {
                        Vec::new()
                    } else {
                        let mut acc: Models = vec![Vec::new()];
                        for &c in children.iter() {
                            let mut next = Vec::new();
                            for base in &acc {
                                for ext in &models[c as usize] {
                                    let mut row = base.clone();
                                    row.extend_from_slice(ext);
                                    next.push(row);
                                }
                            }
                            if next.len() > cap {
                                return Err(Error::Guard(format!(
                                    "model enumeration exceeded the cap of {cap}"
                                )));
                            }
                            acc = next;
                        }
                        acc
                    }
                }
                DnnfNode::Decision { var, lo, hi } => {
                    if keep.contains(self.class_of(*var)) {
                        let mut rows = Vec::new();
                        for (child, value) in [(*lo, false), (*hi, true)] {
                            for ext in &models[child as usize] {
                                let mut row = ext.clone();
                                row.push((*var, value));
                                rows.push(row);
                            }
                        }
                        if rows.len() > cap {
                            return Err(Error::Guard(format!(
                                "model enumeration exceeded the cap of {cap}"
                            )));
                        }
                        rows
                    } else {
                        if sat[*lo as usize] || sat[*hi as usize] {
                            vec![Vec::new()]
                        } else {
                            Vec::new()
                        }
                    }
                }
            };
            sat[i] = !m.is_empty();
            models.push(m);
        }
        let mut rows = models[self.root as usize].clone();
        for row in &mut rows {
            row.sort_unstable();
        }
        rows.sort();
        rows.dedup();
        Ok(rows)
    }

    pub fn to_dot(&self) -> String {
        use std::fmt::Write;
        let mut s = String::from("digraph dnnf {\n");
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                DnnfNode::False => {
                    let _ = writeln!(s, "  n{i} [label=\"F\" shape=box];");
                }
                DnnfNode::True => {
                    let _ = writeln!(s, "  n{i} [label=\"T\" shape=box];");
                }
                DnnfNode::Lit(l) => {
                    let _ = writeln!(s, "  n{i} [label=\"{l}\"];");
                }
                DnnfNode::And(children) => {
                    let _ = writeln!(s, "  n{i} [label=\"AND\"];");
                    for c in children.iter() {
                        let _ = writeln!(s, "  n{i} -> n{c};");
                    }
                }
                DnnfNode::Decision { var, lo, hi } => {
                    let _ = writeln!(s, "  n{i} [label=\"x{var}?\"];");
                    let _ = writeln!(s, "  n{i} -> n{lo} [style=dashed];");
                    let _ = writeln!(s, "  n{i} -> n{hi};");
                }
            }
        }
        let _ = writeln!(s, "  root -> n{};", self.root);
        s.push_str("}\n");
        s
    }
}

/// The projection-friendly default priority: Input and Coin before Output
/// and Aux, so both preimage counts (keep Input) and joint input-coin counts
/// are valid on one compilation.
pub const DEFAULT_PRIORITY: [VarClass; 4] = [
    VarClass::Input,
    VarClass::Coin,
    VarClass::Output,
    VarClass::Aux,
];

#[cfg(test)]
mod tests {
    use super::*;

    fn cnf(clauses: &[&[i32]], classes: &[VarClass]) -> CnfFormula {
        let mut f = CnfFormula::new();
        for &c in classes {
            f.fresh_var(c, None);
        }
        for c in clauses {
            f.add_clause(c.to_vec());
        }
        f
    }

    #[test]
    fn unsat_compiles_to_false() {
        let f = cnf(&[&[1], &[-1]], &[VarClass::Input]);
        let g = compile_dnnf(&f, &DEFAULT_PRIORITY).unwrap();
        assert_eq!(g.root, FALSE);
        assert_eq!(g.count(), 0u32.into());
    }

    #[test]
    fn small_or_counts_three() {
        let f = cnf(&[&[1, 2]], &[VarClass::Input, VarClass::Input]);
        let g = compile_dnnf(&f, &DEFAULT_PRIORITY).unwrap();
        assert_eq!(g.count(), 3u32.into());
        g.validate().unwrap();
    }

    #[test]
    fn free_vars_scale_counts() {
        let f = cnf(&[], &[VarClass::Input; 5]);
        let g = compile_dnnf(&f, &DEFAULT_PRIORITY).unwrap();
        assert_eq!(g.count(), 32u32.into());
    }

    #[test]
    fn project_count_on_mixed_classes() {
        // x1 input, x2 aux: (x1 or x2) has 3 models, 2 projected on input
        let f = cnf(&[&[1, 2]], &[VarClass::Input, VarClass::Aux]);
        let g = compile_dnnf(&f, &DEFAULT_PRIORITY).unwrap();
        assert_eq!(g.count(), 3u32.into());
        assert_eq!(g.project_count(ClassSet::INPUT).unwrap(), 2u32.into());
    }

    #[test]
    fn random_formulas_match_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for round in 0..200 {
            let nvars = rng.gen_range(1..=12u32);
            let nclauses = rng.gen_range(0..=(nvars * 3));
            let mut f = CnfFormula::new();
            for _ in 0..nvars {
                let class = if rng.gen_bool(0.5) {
                    VarClass::Input
                } else {
                    VarClass::Aux
                };
                f.fresh_var(class, None);
            }
            for _ in 0..nclauses {
                let len = rng.gen_range(1..=3.min(nvars));
                let mut clause = Vec::new();
                for _ in 0..len {
                    let v = rng.gen_range(1..=nvars) as i32;
                    clause.push(if rng.gen_bool(0.5) { v } else { -v });
                }
                f.add_clause(clause);
            }
            let g = compile_dnnf(&f, &DEFAULT_PRIORITY).unwrap();
            g.validate().unwrap();
            let want_all = crate::count::dpll_count(&f, ClassSet::ALL).unwrap();
            assert_eq!(g.count(), want_all, "all-count, round {round}");
            let want_in = crate::count::dpll_count(&f, ClassSet::INPUT).unwrap();
            assert_eq!(
                g.project_count(ClassSet::INPUT).unwrap(),
                want_in,
                "projected, round {round}"
            );
        }
    }

    #[test]
    fn conditioning_matches_recompilation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        for _ in 0..50 {
            let nvars = rng.gen_range(2..=10u32);
            let nclauses = rng.gen_range(1..=(nvars * 2));
            let mut f = CnfFormula::new();
            for i in 0..nvars {
                let class = if i < nvars / 2 {
                    VarClass::Input
                } else {
                    VarClass::Output
                };
                f.fresh_var(class, None);
            }
            for _ in 0..nclauses {
                let len = rng.gen_range(1..=3.min(nvars));
                let mut clause = Vec::new();
                for _ in 0..len {
                    let v = rng.gen_range(1..=nvars) as i32;
                    clause.push(if rng.gen_bool(0.5) { v } else { -v });
                }
                f.add_clause(clause);
            }
            let g = compile_dnnf(&f, &DEFAULT_PRIORITY).unwrap();
            // condition on a random output var
            let out_vars = f.vars_of_class(VarClass::Output);
            if out_vars.is_empty() {
                continue;
            }
            let v = out_vars[rng.gen_range(0..out_vars.len())];
            let val = rng.gen_bool(0.5);
            let mut units = HashMap::new();
            units.insert(v, val);
            let got = g
                .project_count_conditioned(ClassSet::INPUT, &units)
                .unwrap();
            let mut f2 = f.clone();
            f2.add_clause(vec![if val { v as i32 } else { -(v as i32) }]);
            let want = crate::count::dpll_count(&f2, ClassSet::INPUT).unwrap();
            assert_eq!(got, want);
        }
    }
}
