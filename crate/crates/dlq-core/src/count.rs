//! Compute-on-Demand engine: projected exact model counting by DPLL search
//! with component caching, straight off the CNF — nothing is compiled or
//! kept between queries.

use std::time::Instant;

use num_bigint::BigUint;
use num_traits::{One, Zero};

use crate::cnf::{ClassSet, CnfFormula, VarClass};
use crate::error::{Error, Result};
use crate::search::{self, SearchConfig, Searcher, Sink};

struct CountSink {
    classes: Vec<VarClass>,
    keep: ClassSet,
}

impl Sink for CountSink {
    type V = BigUint;
    const SAT_SHORTCUT: bool = true;

    fn false_(&mut self) -> BigUint {
        BigUint::zero()
    }
    fn true_(&mut self) -> BigUint {
        BigUint::one()
    }
    fn lit(&mut self, _lit: i32) -> BigUint {
        BigUint::one()
    }
    fn free(&mut self, var: u32) -> BigUint {
        if self.keep.contains(self.classes[(var - 1) as usize]) {
            BigUint::from(2u32)
        } else {
            BigUint::one()
        }
    }
    fn conj(&mut self, parts: Vec<BigUint>) -> BigUint {
        parts.into_iter().product()
    }
    fn decide(&mut self, var: u32, lo: BigUint, hi: BigUint) -> BigUint {
        debug_assert!(
            self.keep.contains(self.classes[(var - 1) as usize]),
            "projected counting decided a non-projection variable"
        );
        lo + hi
    }
    fn is_false(v: &BigUint) -> bool {
        v.is_zero()
    }
}

/// Number of assignments to the variables of the `keep` classes extendable
/// to a full model.
pub fn dpll_count(f: &CnfFormula, keep: ClassSet) -> Result<BigUint> {
    dpll_count_with(f, keep, None)
}

pub fn dpll_count_with(
    f: &CnfFormula,
    keep: ClassSet,
    deadline: Option<Instant>,
) -> Result<BigUint> {
    let sink = CountSink {
        classes: f.classes.clone(),
        keep,
    };
    let mut cfg = SearchConfig::counting(keep);
    cfg.deadline = deadline;
    let (v, _) = Searcher::new(f, sink, cfg).run()?;
    Ok(v)
}

/// Satisfiability. A projected count onto zero variables is one exactly when
/// the formula has a model, so this shares the counting core.
pub fn dpll_sat(f: &CnfFormula) -> Result<bool> {
    Ok(!dpll_count(f, ClassSet::EMPTY)?.is_zero())
}

/// One full satisfying assignment (indexed by var-1), or None.
pub fn dpll_model(f: &CnfFormula, extra_clauses: &[Vec<i32>]) -> Option<Vec<bool>> {
    search::sat_model(f, extra_clauses)
}

/// Check that no loop can still be entered at its unroll bound; called by
/// counting entry points when the formula carries check literals.
pub fn verify_unroll(f: &CnfFormula) -> Result<()> {
    for &(loop_index, lit) in &f.unroll_checks {
        let mut g = f.clone();
        g.add_clause(vec![lit]);
        if dpll_sat(&g)? {
            return Err(Error::UnrollInsufficient {
                loop_index: loop_index as usize,
                bound: 0,
            });
        }
    }
    Ok(())
}

/// Enumerate the distinct values of the origin-tagged variables of `class`
/// over all models, via blocking clauses. Values are maps name -> u64,
/// returned in ascending order.
pub fn enumerate_values(
    f: &CnfFormula,
    class: VarClass,
    cap: usize,
) -> Result<Vec<std::collections::BTreeMap<String, u64>>> {
    let mut blocking: Vec<Vec<i32>> = Vec::new();
    let mut out = Vec::new();
    let named = f.named_vars(class);
    loop {
        let Some(model) = dpll_model(f, &blocking) else {
            break;
        };
        let assignment = |v: u32| model[(v - 1) as usize];
        let value = f.decode_assignment(class, &assignment);
        // block this projected value
        let mut clause = Vec::new();
        for (name, _) in &named {
            for (i, var) in f.bits_of(class, name).iter().enumerate() {
                let bit = (value[name] >> i) & 1 == 1;
                clause.push(if bit { -(*var as i32) } else { *var as i32 });
            }
        }
        out.push(value);
        if out.len() > cap {
            return Err(Error::Guard(format!(
                "enumeration exceeded the cap of {cap} values"
            )));
        }
        if clause.is_empty() {
            break; // no variables of this class: a single empty value
        }
        blocking.push(clause);
    }
    out.sort();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bitblast::{bitblast, observe, UnrollConfig};
    use crate::interp::valuation;
    use crate::lang::parse_program;

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
    fn unsat_counts_zero() {
        let f = cnf(&[&[1], &[-1]], 1);
        assert_eq!(dpll_count(&f, ClassSet::INPUT).unwrap(), 0u32.into());
        assert!(!dpll_sat(&f).unwrap());
    }

    #[test]
    fn simple_counts() {
        let f = cnf(&[&[1, 2]], 2);
        assert_eq!(dpll_count(&f, ClassSet::INPUT).unwrap(), 3u32.into());
        let f = cnf(&[], 3);
        assert_eq!(dpll_count(&f, ClassSet::INPUT).unwrap(), 8u32.into());
    }

    /// Brute-force projected counting oracle for small formulas.
    pub(crate) fn brute_force(f: &CnfFormula, keep: ClassSet) -> BigUint {
        let n = f.num_vars;
        let mut seen = std::collections::HashSet::new();
        'outer: for m in 0u64..(1u64 << n) {
            for clause in &f.clauses {
                let ok = clause.iter().any(|&l| {
                    let v = l.unsigned_abs() - 1;
                    let bit = (m >> v) & 1 == 1;
                    (l > 0) == bit
                });
                if !ok {
                    continue 'outer;
                }
            }
            let mut proj = 0u64;
            for v in 0..n {
                if keep.contains(f.class_of(v + 1)) && (m >> v) & 1 == 1 {
                    proj |= 1 << v;
                }
            }
            let mask: u64 = (0..n)
                .filter(|&v| keep.contains(f.class_of(v + 1)))
                .map(|v| 1u64 << v)
                .sum();
            seen.insert(proj & mask);
        }
        BigUint::from(seen.len())
    }

    #[test]
    fn random_formulas_match_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for round in 0..200 {
            let nvars = rng.gen_range(1..=14u32);
            let nclauses = rng.gen_range(0..=(nvars * 3));
            let mut f = CnfFormula::new();
            for _ in 0..nvars {
                let class = match rng.gen_range(0..4) {
                    0 => VarClass::Input,
                    1 => VarClass::Output,
                    2 => VarClass::Coin,
                    _ => VarClass::Aux,
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
            let keep = match rng.gen_range(0..3) {
                0 => ClassSet::INPUT,
                1 => ClassSet::INPUT_COIN,
                _ => ClassSet::ALL,
            };
            let got = dpll_count(&f, keep).unwrap();
            let want = brute_force(&f, keep);
            assert_eq!(got, want, "round {round}");
        }
    }

    #[test]
    fn counting_is_deterministic() {
        let p = parse_program("in s:8; out o:8; local ;\nif s < 16 then o <- 8 + s else o <- 8 end")
            .unwrap();
        let f = bitblast(&p, &UnrollConfig::default()).unwrap();
        let g = observe(&f, &valuation(&[("o", 8)])).unwrap();
        let a = dpll_count(&g, ClassSet::INPUT).unwrap();
        let b = dpll_count(&g, ClassSet::INPUT).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, 241u32.into());
    }

    #[test]
    fn observed_identity_counts_one() {
        let p = parse_program("in s:4; out o:4; o <- s").unwrap();
        let f = bitblast(&p, &UnrollConfig::default()).unwrap();
        assert!(dpll_sat(&observe(&f, &valuation(&[("o", 3)])).unwrap()).unwrap());
        assert_eq!(
            dpll_count(&observe(&f, &valuation(&[("o", 3)])).unwrap(), ClassSet::INPUT).unwrap(),
            1u32.into()
        );
    }

    #[test]
    fn infeasible_observation_is_unsat_not_error() {
        let p = parse_program("in s:8; out o:8; local ;\nif s < 16 then o <- 8 + s else o <- 8 end")
            .unwrap();
        let f = bitblast(&p, &UnrollConfig::default()).unwrap();
        let g = observe(&f, &valuation(&[("o", 200)])).unwrap();
        assert!(!dpll_sat(&g).unwrap());
        assert_eq!(dpll_count(&g, ClassSet::INPUT).unwrap(), 0u32.into());
    }

    #[test]
    fn enumerate_values_lists_preimage() {
        let p = parse_program("in s:8; out o:8; local ;\nif s < 16 then o <- 8 + s else o <- 8 end")
            .unwrap();
        let f = bitblast(&p, &UnrollConfig::default()).unwrap();
        let g = observe(&f, &valuation(&[("o", 9)])).unwrap();
        let values = enumerate_values(&g, VarClass::Input, 1 << 20).unwrap();
        assert_eq!(values.len(), 1);
        assert_eq!(values[0]["s"], 1);
    }
}
