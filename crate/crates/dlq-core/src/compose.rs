//! Compositional counting.
//!
//! Sequential composition: the preimage of `o` through `P1; …; Pn` is the
//! union over intermediate values `t ∈ Pre_{Pn}(o)` of the preimages of `t`
//! through the prefix. The exact method walks levels breadth-first and
//! counts the final union at stage 1; the lower bound walks depth-first
//! under a budget and accumulates exact per-chain counts; the upper bound
//! multiplies the last stage's count by per-stage maximum preimage sizes
//! (an exact Max#Count over enumerated outputs).
//!
//! Value-domain decomposition: input and output domains split into disjoint
//! covering parts; restricting the program to one input part and the
//! observed output's part gives an independent counting job, and the exact
//! count is the sum over input parts. Jobs fan out over a worker pool; the
//! sum is aggregated in part order, so results do not depend on scheduling.

use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::cnf::{ClassSet, CnfFormula, VarClass};
use crate::count;
use crate::domain::{Partition, ValueSet};
use crate::error::{Error, Result};
use crate::interp::{self, Prior, Valuation};
use crate::lang::{restrict_program, Pipeline, Program};
use crate::leakage::{EngineConfig, Prepared};

pub use crate::domain::IntervalSet;

/// Work budget for the lower-bound search: deterministic step counting (one
/// step per preimage enumeration or count), wall-clock, or none.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Budget {
    Unlimited,
    Steps(u64),
    WallMs(u64),
}

struct BudgetState {
    budget: Budget,
    started: Instant,
    steps_used: u64,
    exhausted: bool,
}

impl BudgetState {
    fn new(budget: Budget) -> BudgetState {
        BudgetState {
            budget,
            started: Instant::now(),
            steps_used: 0,
            exhausted: false,
        }
    }

    /// Permission for one more engine call.
    fn take(&mut self) -> bool {
        if self.exhausted {
            return false;
        }
        let ok = match self.budget {
            Budget::Unlimited => true,
            Budget::Steps(limit) => self.steps_used < limit,
            Budget::WallMs(ms) => (self.started.elapsed().as_millis() as u64) < ms,
        };
        if ok {
            self.steps_used += 1;
        } else {
            self.exhausted = true;
        }
        ok
    }
}

#[derive(Debug, Clone)]
pub struct BoundReport {
    pub lower: Option<BigUint>,
    pub upper: Option<BigUint>,
    pub exact: Option<BigUint>,
    pub per_stage_maxcount: Vec<BigUint>,
    pub steps_used: u64,
    pub completed: bool,
}

impl BoundReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "lower": self.lower.as_ref().map(|v| v.to_string()),
            "upper": self.upper.as_ref().map(|v| v.to_string()),
            "exact": self.exact.as_ref().map(|v| v.to_string()),
            "per_stage_maxcount": self.per_stage_maxcount.iter().map(|v| v.to_string()).collect::<Vec<_>>(),
            "steps_used": self.steps_used,
            "completed": self.completed,
        })
    }
}

/// Sequential-composition analyzer; keeps per-stage engine state alive
/// across queries (a stage's CNF, relation BDD or compiled DNNF is built
/// once).
pub struct SeqAnalyzer {
    stages: Vec<Prepared>,
    cfg: EngineConfig,
    /// Filter intermediate values by reachability from the original inputs
    /// (a satisfiability call per value). Sound to disable; pruning only.
    pub feasibility_filter: bool,
    pub frontier_cap: usize,
    maxcount_memo: HashMap<usize, BigUint>,
    chain_memo: HashMap<usize, CnfFormula>,
}

impl SeqAnalyzer {
    pub fn new(pl: &Pipeline, cfg: &EngineConfig) -> Result<SeqAnalyzer> {
        let stages = pl
            .stages
            .iter()
            .map(|p| Prepared::new(p, cfg))
            .collect::<Result<Vec<_>>>()?;
        Ok(SeqAnalyzer {
            stages,
            cfg: cfg.clone(),
            feasibility_filter: true,
            frontier_cap: 1 << 20,
            maxcount_memo: HashMap::new(),
            chain_memo: HashMap::new(),
        })
    }

    pub fn stage_count(&self) -> usize {
        self.stages.len()
    }

    fn program(&self, idx: usize) -> &Program {
        &self.stages[idx].program
    }

    fn out_valuation(&self, idx: usize, tuple: &[u64]) -> Valuation {
        self.program(idx)
            .out_vars
            .iter()
            .zip(tuple)
            .map(|(d, &v)| (d.name.clone(), v))
            .collect()
    }

    fn input_tuple(&self, idx: usize, v: &Valuation) -> Vec<u64> {
        self.program(idx)
            .in_vars
            .iter()
            .map(|d| v[&d.name])
            .collect()
    }

    /// All input values of stage `idx` that can produce output tuple `t`,
    /// ascending.
    fn enumerate_pre(&mut self, idx: usize, t: &[u64]) -> Result<Vec<Vec<u64>>> {
        let o = self.out_valuation(idx, t);
        let vals = self.stages[idx].enumerate_preimage(&o)?;
        let mut tuples: Vec<Vec<u64>> = vals
            .iter()
            .map(|v| self.input_tuple(idx, v))
            .collect();
        tuples.sort_unstable();
        Ok(tuples)
    }

    fn count_pre(&mut self, idx: usize, t: &[u64]) -> Result<BigUint> {
        let o = self.out_valuation(idx, t);
        self.stages[idx].count_preimage(&o)
    }

    /// Conjoined CNF of stages `0..k` with inter-stage interfaces wired;
    /// stage-0 inputs stay Input class, stage k-1 outputs stay Output class.
    fn chain_prefix(&mut self, k: usize) -> Result<&CnfFormula> {
        if !self.chain_memo.contains_key(&k) {
            let fs: Vec<&CnfFormula> = self.stages[..k].iter().map(|s| s.formula()).collect();
            let names: Vec<(Vec<String>, Vec<String>)> = self.stages[..k]
                .iter()
                .map(|s| {
                    (
                        s.program.in_vars.iter().map(|d| d.name.clone()).collect(),
                        s.program.out_vars.iter().map(|d| d.name.clone()).collect(),
                    )
                })
                .collect();
            let chained = chain_formulas(&fs, &names)?;
            self.chain_memo.insert(k, chained);
        }
        Ok(&self.chain_memo[&k])
    }

    /// Can the prefix `P1..Pk` produce intermediate tuple `t` from any
    /// original input?
    fn prefix_feasible(&mut self, k: usize, t: &[u64]) -> Result<bool> {
        let o = self.out_valuation(k - 1, t);
        let chained = self.chain_prefix(k)?.clone();
        let observed = crate::bitblast::observe(&chained, &o)?;
        count::dpll_sat(&observed)
    }

    /// Exact |Pre(o)| through the whole pipeline, breadth-first over levels.
    pub fn exact_preimage(&mut self, o: &Valuation) -> Result<BigUint> {
        let n = self.stages.len();
        let o_tuple: Vec<u64> = self
            .program(n - 1)
            .out_vars
            .iter()
            .map(|d| {
                o.get(&d.name).copied().ok_or_else(|| {
                    Error::semantic(format!("observation is missing output `{}`", d.name))
                })
            })
            .collect::<Result<_>>()?;
        let mut frontier: BTreeSet<Vec<u64>> = BTreeSet::new();
        frontier.insert(o_tuple);
        for idx in (1..n).rev() {
            let mut next: BTreeSet<Vec<u64>> = BTreeSet::new();
            for t in &frontier {
                for u in self.enumerate_pre(idx, t)? {
                    next.insert(u);
                }
                if next.len() > self.frontier_cap {
                    return Err(Error::Resource {
                        what: "intermediate frontier (use the lower/upper bound mode)",
                        limit: self.frontier_cap as u64,
                    });
                }
            }
            if self.feasibility_filter {
                let mut filtered = BTreeSet::new();
                for t in next {
                    if self.prefix_feasible(idx, &t)? {
                        filtered.insert(t);
                    }
                }
                next = filtered;
            }
            frontier = next;
            if frontier.is_empty() {
                return Ok(BigUint::zero());
            }
        }
        // count the union of stage-1 preimages over the frontier
        if self.program(0).is_deterministic() {
            // preimages of distinct outputs are disjoint
            let mut total = BigUint::zero();
            for t in &frontier {
                total += self.count_pre(0, t)?;
            }
            Ok(total)
        } else {
            let f = self.stages[0].formula().clone();
            let restricted = constrain_outputs(&f, &frontier)?;
            count::dpll_count(&restricted, ClassSet::INPUT)
        }
    }

    /// Depth-first lower bound under a budget; every prefix of the traversal
    /// yields a valid lower bound because preimages of distinct intermediate
    /// values are disjoint through a deterministic prefix. Requires every
    /// stage but the last to be deterministic (the last may be
    /// probabilistic: its preimage is a plain value set).
    pub fn lower_bound(&mut self, o: &Valuation, budget: Budget) -> Result<BoundReport> {
        let n = self.stages.len();
        for idx in 0..n - 1 {
            if !self.program(idx).is_deterministic() {
                return Err(Error::semantic(format!(
                    "lower bound requires deterministic prefix stages; stage {} (`{}`) is probabilistic",
                    idx + 1,
                    self.program(idx).name
                )));
            }
        }
        let o_tuple: Vec<u64> = self
            .program(n - 1)
            .out_vars
            .iter()
            .map(|d| {
                o.get(&d.name).copied().ok_or_else(|| {
                    Error::semantic(format!("observation is missing output `{}`", d.name))
                })
            })
            .collect::<Result<_>>()?;

        let mut state = BudgetState::new(budget);
        let mut acc = BigUint::zero();
        self.lower_dfs(n - 1, &o_tuple, &mut state, &mut acc)?;
        Ok(BoundReport {
            lower: Some(acc.clone()),
            upper: None,
            exact: if state.exhausted { None } else { Some(acc) },
            per_stage_maxcount: Vec::new(),
            steps_used: state.steps_used,
            completed: !state.exhausted,
        })
    }

    fn lower_dfs(
        &mut self,
        idx: usize,
        t: &[u64],
        state: &mut BudgetState,
        acc: &mut BigUint,
    ) -> Result<()> {
        if idx == 0 {
            if state.take() {
                *acc += self.count_pre(0, t)?;
            }
            return Ok(());
        }
        if !state.take() {
            return Ok(());
        }
        for u in self.enumerate_pre(idx, t)? {
            if state.exhausted {
                break;
            }
            self.lower_dfs(idx - 1, &u, state, acc)?;
        }
        Ok(())
    }

    /// Exact Max#Count of a stage: the largest preimage any of its feasible
    /// outputs has. Memoized per stage.
    pub fn max_count(&mut self, idx: usize) -> Result<BigUint> {
        if let Some(v) = self.maxcount_memo.get(&idx) {
            return Ok(v.clone());
        }
        let outputs = self.stages[idx].enumerate_outputs()?;
        let mut best = BigUint::zero();
        for o in &outputs {
            let c = self.stages[idx].count_preimage(o)?;
            best = best.max(c);
        }
        self.maxcount_memo.insert(idx, best.clone());
        Ok(best)
    }

    /// Upper bound: |Pre_{Pn}(o)| times the product of per-stage Max#Count
    /// values; `literal` multiplies over every stage including the last,
    /// the default stops before it (both are sound).
    pub fn upper_bound(&mut self, o: &Valuation, literal: bool) -> Result<BoundReport> {
        let n = self.stages.len();
        let last_count = self.stages[n - 1].count_preimage(o)?;
        let upto = if literal { n } else { n.saturating_sub(1) };
        let mut result = last_count;
        let mut per_stage = Vec::new();
        for idx in 0..upto {
            let mc = self.max_count(idx)?;
            per_stage.push(mc.clone());
            result *= mc;
        }
        Ok(BoundReport {
            lower: None,
            upper: Some(result),
            exact: None,
            per_stage_maxcount: per_stage,
            steps_used: 0,
            completed: true,
        })
    }

    /// Exact composed output probability. Deterministic pipelines under a
    /// uniform prior reduce to a preimage count; otherwise per-stage output
    /// distributions are chained through the interpreter (guarded).
    pub fn output_prob(&mut self, prior: &Prior, o: &Valuation) -> Result<BigRational> {
        prior.validate()?;
        let n = self.stages.len();
        let deterministic = (0..n).all(|i| self.program(i).is_deterministic());
        if deterministic && matches!(prior, Prior::Uniform) {
            let pre = self.exact_preimage(o)?;
            let s = self.stages[0].input_domain_size()?;
            return Ok(BigRational::new(
                num_bigint::BigInt::from(pre),
                num_bigint::BigInt::from(s),
            ));
        }
        // distribution DP across stages
        let mut dist: Vec<(Valuation, BigRational)> = match prior {
            Prior::Uniform => {
                let mut feasible = Vec::new();
                for s in interp::input_space(self.program(0))? {
                    let d = interp::output_distribution(self.program(0), &s)?;
                    if !d.defined_mass.is_zero() {
                        feasible.push(s);
                    }
                }
                let w = BigRational::new(1.into(), (feasible.len() as u64).into());
                feasible.into_iter().map(|s| (s, w.clone())).collect()
            }
            Prior::Explicit(entries) => entries.clone(),
        };
        for idx in 0..n {
            let mut next: HashMap<Valuation, BigRational> = HashMap::new();
            for (s, ps) in &dist {
                let d = interp::output_distribution(self.program(idx), s)?;
                for (out, _) in &d.weights {
                    let pr = d.prob(out);
                    // rename to the next stage's input names, positionally
                    let renamed: Valuation = if idx + 1 < n {
                        self.program(idx + 1)
                            .in_vars
                            .iter()
                            .zip(self.program(idx).out_vars.iter())
                            .map(|(next_d, cur_d)| (next_d.name.clone(), out[&cur_d.name]))
                            .collect()
                    } else {
                        out.clone()
                    };
                    *next.entry(renamed).or_insert_with(BigRational::zero) += ps * pr;
                }
            }
            if next.len() > self.frontier_cap {
                return Err(Error::Resource {
                    what: "intermediate distribution support",
                    limit: self.frontier_cap as u64,
                });
            }
            let mut v: Vec<(Valuation, BigRational)> = next.into_iter().collect();
            v.sort_by(|a, b| a.0.cmp(&b.0));
            dist = v;
        }
        Ok(dist
            .into_iter()
            .find(|(v, _)| v == o)
            .map(|(_, p)| p)
            .unwrap_or_else(BigRational::zero))
    }
}

/// Wire stage CNFs into one formula: variables renumbered, each stage's
/// inputs constrained equal to the previous stage's outputs (positionally),
/// inner interfaces and coins reclassified, names prefixed per stage except
/// the overall inputs and outputs.
pub fn chain_formulas(
    fs: &[&CnfFormula],
    names: &[(Vec<String>, Vec<String>)],
) -> Result<CnfFormula> {
    let last = fs.len() - 1;
    let mut out = CnfFormula::new();
    let mut prev_out_bits: Vec<Vec<u32>> = Vec::new();
    for (i, f) in fs.iter().enumerate() {
        let offset = out.num_vars;
        for v in 1..=f.num_vars {
            let class = f.class_of(v);
            let new_class = match class {
                VarClass::Input if i == 0 => VarClass::Input,
                VarClass::Input => VarClass::Aux,
                VarClass::Output if i == last => VarClass::Output,
                VarClass::Output => VarClass::Aux,
                other => other,
            };
            let origin = f.origin_of(v).map(|(name, bit)| {
                let keep_name = (i == 0 && new_class == VarClass::Input)
                    || (i == last && new_class == VarClass::Output);
                if keep_name {
                    (name.clone(), *bit)
                } else {
                    (format!("s{}__{name}", i + 1), *bit)
                }
            });
            out.fresh_var(new_class, origin);
        }
        for clause in &f.clauses {
            out.add_clause(
                clause
                    .iter()
                    .map(|&l| {
                        if l > 0 {
                            l + offset as i32
                        } else {
                            l - offset as i32
                        }
                    })
                    .collect(),
            );
        }
        // wire inputs to the previous stage's outputs
        if i > 0 {
            let in_names = &names[i].0;
            for (k, in_name) in in_names.iter().enumerate() {
                let in_bits: Vec<u32> = f
                    .bits_of(VarClass::Input, in_name)
                    .into_iter()
                    .map(|v| v + offset)
                    .collect();
                let prev_bits = &prev_out_bits[k];
                if in_bits.len() != prev_bits.len() {
                    return Err(Error::semantic(format!(
                        "stage {} interface width mismatch on `{in_name}`",
                        i + 1
                    )));
                }
                for (&a, &b) in in_bits.iter().zip(prev_bits) {
                    out.add_clause(vec![-(a as i32), b as i32]);
                    out.add_clause(vec![a as i32, -(b as i32)]);
                }
            }
        }
        prev_out_bits = names[i]
            .1
            .iter()
            .map(|out_name| {
                f.bits_of(VarClass::Output, out_name)
                    .into_iter()
                    .map(|v| v + offset)
                    .collect()
            })
            .collect();
        out.assume_exit_applied |= f.assume_exit_applied;
    }
    Ok(out)
}

/// Add the constraint "the output tuple is one of `values`" to a formula via
/// selector variables (one per value, existentially read off by projection).
fn constrain_outputs(f: &CnfFormula, values: &BTreeSet<Vec<u64>>) -> Result<CnfFormula> {
    let mut g = f.clone();
    let outs = g.named_vars(VarClass::Output);
    let mut any = Vec::new();
    for tuple in values {
        let sel = g.fresh_var(VarClass::Aux, None) as i32;
        any.push(sel);
        for ((name, width), &v) in outs.iter().zip(tuple) {
            if v > crate::domain::max_value(*width) {
                return Err(Error::semantic(format!(
                    "value {v} does not fit output `{name}`"
                )));
            }
            for (bit, var) in f.bits_of(VarClass::Output, name).iter().enumerate() {
                let lit = *var as i32;
                let signed = if (v >> bit) & 1 == 1 { lit } else { -lit };
                g.add_clause(vec![-sel, signed]);
            }
        }
    }
    g.add_clause(any);
    Ok(g)
}

/// Image of the program over an input set: every reachable output value.
pub fn post_set(p: &Program, inputs: &ValueSet, cfg: &EngineConfig) -> Result<Vec<Valuation>> {
    let restricted = restrict_program(p, inputs, &ValueSet::full())?;
    let mut cfg = cfg.clone();
    cfg.enumeration_cap = cfg.enumeration_cap.min(1 << 20);
    let mut prepared = Prepared::new(&restricted, &cfg)?;
    prepared.enumerate_outputs()
}

/// Exact Max#Count of a standalone program.
pub fn max_count(p: &Program, cfg: &EngineConfig) -> Result<BigUint> {
    let pl = Pipeline::new(vec![p.clone()])?;
    let mut seq = SeqAnalyzer::new(&pl, cfg)?;
    seq.max_count(0)
}

#[derive(Debug, Clone)]
pub struct DecomposeReport {
    pub part_counts: Vec<BigUint>,
    pub part_ms: Vec<f64>,
    pub total: BigUint,
    pub output_part: usize,
    pub workers: usize,
}

impl DecomposeReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "parts": self
                .part_counts
                .iter()
                .zip(&self.part_ms)
                .enumerate()
                .map(|(i, (c, ms))| serde_json::json!({"index": i, "count": c.to_string(), "ms": ms}))
                .collect::<Vec<_>>(),
            "total": self.total.to_string(),
            "output_part": self.output_part,
            "workers": self.workers,
        })
    }
}

/// Count |Pre(o)| by restricting to each input part crossed with the
/// observed output's part, counting each restriction on its own engine
/// instance, and summing in part order.
pub fn domain_decompose_count(
    p: &Program,
    part: &Partition,
    o: &Valuation,
    workers: usize,
    cfg: &EngineConfig,
) -> Result<DecomposeReport> {
    part.validate(&p.in_decls(), &p.out_decls())?;
    let j = part.output_part_of(o)?;
    let workers = workers.max(1);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Semantic(format!("worker pool: {e}")))?;

    let jobs: Vec<Program> = part
        .input_parts
        .iter()
        .map(|si| restrict_program(p, si, &part.output_parts[j]))
        .collect::<Result<_>>()?;

    use rayon::prelude::*;
    let results: Vec<(BigUint, f64)> = pool.install(|| {
        jobs.par_iter()
            .map(|pij| -> Result<(BigUint, f64)> {
                let t = Instant::now();
                let mut prepared = Prepared::new(pij, cfg)?;
                let c = prepared.count_preimage(o)?;
                Ok((c, t.elapsed().as_secs_f64() * 1e3))
            })
            .collect::<Result<Vec<_>>>()
    })?;

    let mut total = BigUint::zero();
    let mut part_counts = Vec::with_capacity(results.len());
    let mut part_ms = Vec::with_capacity(results.len());
    for (c, ms) in results {
        total += &c;
        part_counts.push(c);
        part_ms.push(ms);
    }
    Ok(DecomposeReport {
        part_counts,
        part_ms,
        total,
        output_part: j,
        workers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::valuation;
    use crate::lang::{parse_pipeline, parse_program};
    use crate::leakage::Engine;

    fn cod() -> EngineConfig {
        EngineConfig::with_engine(Engine::Cod)
    }

    #[test]
    fn two_stage_identity_preimage() {
        let a = "program a; in s:4; out t:4; t <- s";
        let b = "program b; in u:4; out o:4; o <- u";
        let pl = parse_pipeline(&[a, b]).unwrap();
        let mut seq = SeqAnalyzer::new(&pl, &cod()).unwrap();
        assert_eq!(
            seq.exact_preimage(&valuation(&[("o", 5)])).unwrap(),
            1u32.into()
        );
    }

    #[test]
    fn output_prob_identity_chain() {
        let a = "program a; in s:4; out t:4; t <- s";
        let b = "program b; in u:4; out o:4; o <- u";
        let pl = parse_pipeline(&[a, b]).unwrap();
        let mut seq = SeqAnalyzer::new(&pl, &cod()).unwrap();
        let pr = seq
            .output_prob(&Prior::Uniform, &valuation(&[("o", 5)]))
            .unwrap();
        assert_eq!(pr, BigRational::new(1.into(), 16.into()));
    }

    #[test]
    fn probabilistic_two_stage_matches_flattened_oracle() {
        let a = "program a; in s:4; out t:4; choice 1/2 { t <- s } { t <- s + 1 }";
        let b = "program b; in u:4; out o:4; o <- u & 7";
        let pl = parse_pipeline(&[a, b]).unwrap();
        let o = valuation(&[("o", 3)]);
        let mut seq = SeqAnalyzer::new(&pl, &cod()).unwrap();
        let got = seq.output_prob(&Prior::Uniform, &o).unwrap();
        let flat = pl.flatten();
        let want = interp::oracle_output_prob(&flat, &Prior::Uniform, &o).unwrap();
        assert_eq!(got, want);
        // and the exact preimage matches the flattened program's
        let got_pre = seq.exact_preimage(&o).unwrap();
        let want_pre = interp::oracle_preimage(&flat, &o).unwrap().len();
        assert_eq!(got_pre, BigUint::from(want_pre));
    }

    #[test]
    fn lower_bound_budgets() {
        let a = "program a; in s:6; out t:6; t <- s >> 1";
        let b = "program b; in u:6; out o:6; o <- u >> 1";
        let pl = parse_pipeline(&[a, b]).unwrap();
        let o = valuation(&[("o", 3)]);
        let mut seq = SeqAnalyzer::new(&pl, &cod()).unwrap();
        let exact = seq.exact_preimage(&o).unwrap();
        assert_eq!(exact, 4u32.into()); // u in {6,7}, two s-values each

        let zero = seq.lower_bound(&o, Budget::Steps(0)).unwrap();
        assert_eq!(zero.lower, Some(BigUint::zero()));
        assert!(!zero.completed);

        let full = seq.lower_bound(&o, Budget::Unlimited).unwrap();
        assert_eq!(full.lower, Some(exact.clone()));
        assert!(full.completed);
        assert_eq!(full.exact, Some(exact.clone()));

        // monotone, sandwiched by the exact value
        let mut prev = BigUint::zero();
        for steps in 0..8 {
            let r = seq.lower_bound(&o, Budget::Steps(steps)).unwrap();
            let lower = r.lower.unwrap();
            assert!(lower >= prev, "non-decreasing");
            assert!(lower <= exact);
            prev = lower;
        }
    }

    #[test]
    fn lower_bound_rejects_probabilistic_prefix() {
        let a = "program a; in s:2; out t:2; choice 1/2 { t <- s } { t <- 0 }";
        let b = "program b; in u:2; out o:2; o <- u";
        let pl = parse_pipeline(&[a, b]).unwrap();
        let mut seq = SeqAnalyzer::new(&pl, &cod()).unwrap();
        assert!(seq
            .lower_bound(&valuation(&[("o", 1)]), Budget::Unlimited)
            .is_err());
    }

    #[test]
    fn max_count_basics() {
        let identity = parse_program("in s:4; out o:4; o <- s").unwrap();
        assert_eq!(max_count(&identity, &cod()).unwrap(), 1u32.into());
        let constant = parse_program("in s:4; out o:4; o <- 9").unwrap();
        assert_eq!(max_count(&constant, &cod()).unwrap(), 16u32.into());
    }

    #[test]
    fn upper_bound_single_stage_is_exact() {
        let p = "program p; in s:6; out o:6; o <- s >> 2";
        let pl = parse_pipeline(&[p]).unwrap();
        let o = valuation(&[("o", 3)]);
        let mut seq = SeqAnalyzer::new(&pl, &cod()).unwrap();
        let r = seq.upper_bound(&o, false).unwrap();
        assert_eq!(r.upper, Some(4u32.into()));
        let exact = seq.exact_preimage(&o).unwrap();
        assert_eq!(r.upper, Some(exact));
        // the literal reading multiplies the stage's own max count in
        let r = seq.upper_bound(&o, true).unwrap();
        assert_eq!(r.upper, Some(16u32.into()));
    }

    #[test]
    fn sandwich_on_a_small_pipeline() {
        let a = "program a; in s:6; out t:6; t <- (s & 21) + 1";
        let b = "program b; in u:6; out o:6; o <- u % 5";
        let pl = parse_pipeline(&[a, b]).unwrap();
        let o = valuation(&[("o", 2)]);
        let mut seq = SeqAnalyzer::new(&pl, &cod()).unwrap();
        let exact = seq.exact_preimage(&o).unwrap();
        // oracle cross-check on the flattened program
        let flat = pl.flatten();
        let want = interp::oracle_preimage(&flat, &o).unwrap().len();
        assert_eq!(exact, BigUint::from(want));
        let lower = seq.lower_bound(&o, Budget::Steps(3)).unwrap().lower.unwrap();
        let upper = seq.upper_bound(&o, false).unwrap().upper.unwrap();
        assert!(lower <= exact && exact <= upper);
    }

    #[test]
    fn chained_cnf_matches_flattened_program() {
        let a = "program a; in s:5; out t:5; t <- s + 3";
        let b = "program b; in u:5; out o:5; o <- u & 14";
        let pl = parse_pipeline(&[a, b]).unwrap();
        let o = valuation(&[("o", 10)]);
        let mut seq = SeqAnalyzer::new(&pl, &cod()).unwrap();
        let via_seq = seq.exact_preimage(&o).unwrap();

        let chained = seq.chain_prefix(2).unwrap().clone();
        let observed = crate::bitblast::observe(&chained, &o).unwrap();
        let via_chain = count::dpll_count(&observed, ClassSet::INPUT).unwrap();

        let flat = pl.flatten();
        let f = crate::bitblast::bitblast(&flat, &crate::bitblast::UnrollConfig::default()).unwrap();
        let observed_flat = crate::bitblast::observe(&f, &o).unwrap();
        let via_flat = count::dpll_count(&observed_flat, ClassSet::INPUT).unwrap();

        assert_eq!(via_seq, via_chain);
        assert_eq!(via_seq, via_flat);
    }

    #[test]
    fn trivial_partition_equals_monolithic() {
        let p = parse_program("in s:6; out o:6; o <- s % 5").unwrap();
        let o = valuation(&[("o", 2)]);
        let report =
            domain_decompose_count(&p, &Partition::trivial(), &o, 1, &cod()).unwrap();
        let mut prepared = Prepared::new(&p, &cod()).unwrap();
        assert_eq!(report.total, prepared.count_preimage(&o).unwrap());
    }

    #[test]
    fn partition_identity_and_worker_independence() {
        let p = parse_program("in a:3, b:3; out o:3; o <- (a + b) & 7").unwrap();
        let o = valuation(&[("o", 4)]);
        let iv = |lo, hi| IntervalSet::new(vec![(lo, hi)]).unwrap();
        let part = Partition {
            input_parts: vec![
                ValueSet::full().with("a", iv(0, 3)),
                ValueSet::full().with("a", iv(4, 7)),
            ],
            output_parts: vec![
                ValueSet::full().with("o", iv(0, 4)),
                ValueSet::full().with("o", iv(5, 7)),
            ],
        };
        let mut baseline = Prepared::new(&p, &cod()).unwrap();
        let want = baseline.count_preimage(&o).unwrap();
        let mut totals = Vec::new();
        for workers in [1, 2, 8] {
            let r = domain_decompose_count(&p, &part, &o, workers, &cod()).unwrap();
            assert_eq!(r.total, want);
            totals.push(r.part_counts.clone());
        }
        assert_eq!(totals[0], totals[1]);
        assert_eq!(totals[0], totals[2]);
    }

    #[test]
    fn uncovered_observation_is_reported() {
        let p = parse_program("in s:4; out o:4; o <- s").unwrap();
        let iv = |lo, hi| IntervalSet::new(vec![(lo, hi)]).unwrap();
        let part = Partition {
            input_parts: vec![ValueSet::full()],
            output_parts: vec![
                ValueSet::full().with("o", iv(0, 7)),
                ValueSet::full().with("o", iv(8, 15)),
            ],
        };
        // make the output parts fail to cover by observing outside both
        let bad = Partition {
            input_parts: part.input_parts.clone(),
            output_parts: vec![part.output_parts[0].clone()],
        };
        let err = domain_decompose_count(&p, &bad, &valuation(&[("o", 9)]), 1, &cod());
        assert!(err.is_err());
    }

    #[test]
    fn post_set_examples() {
        let identity = parse_program("in s:4; out o:4; o <- s").unwrap();
        let image = post_set(&identity, &ValueSet::full(), &cod()).unwrap();
        assert_eq!(image.len(), 16);

        let ex11 = parse_program(
            "in s:8; out o:8; local ;\nif s < 16 then o <- 8 + s else o <- 8 end",
        )
        .unwrap();
        let image = post_set(&ex11, &ValueSet::full(), &cod()).unwrap();
        let values: Vec<u64> = image.iter().map(|v| v["o"]).collect();
        assert_eq!(values, (8..=23).collect::<Vec<u64>>());
    }

    #[test]
    fn random_programs_partition_identity() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for round in 0..50 {
            let p = crate::corpus::gen_random_program(round as u64, 8, 3);
            let part = crate::corpus::gen_random_partition(&mut rng, &p);
            // pick a feasible observation via the oracle
            let image = interp::oracle_image(&p).unwrap();
            if image.is_empty() {
                continue;
            }
            let o = image[rng.gen_range(0..image.len())].clone();
            let want = interp::oracle_preimage(&p, &o).unwrap().len();
            let r = domain_decompose_count(&p, &part, &o, 2, &cod()).unwrap();
            assert_eq!(r.total, BigUint::from(want), "round {round}");
        }
    }
}
