//! Per-observation leakage: the preimage-mass measure and the
//! self-information measure, computed over any counting engine.
//!
//! For a uniform prior both reduce to projected counts: the preimage measure
//! is log2(|S| / |pre(o)|) and the self-information measure is
//! -log2(p(o)) with p(o) = (models over Input ∪ Coin with o fixed) /
//! (models over Input ∪ Coin). Counts are exact big integers; only the final
//! logarithm is floating point.

use std::collections::HashMap;
use std::time::Instant;

use num_bigint::BigUint;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};

use crate::bdd::{self, BddManager, VarOrder};
use crate::bitblast::{bitblast, observe, UnrollConfig};
use crate::cnf::{ClassSet, CnfFormula, VarClass};
use crate::count;
use crate::dnnf::{self, DnnfGraph};
use crate::error::{Error, Result};
use crate::interp::{self, Prior, Valuation};
use crate::lang::Program;

/// The counting engine behind a query.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    /// Projected DPLL count per observation.
    Cod,
    /// Relation BDD built once, restricted and counted per observation.
    CiaBdd,
    /// Decision-DNNF compiled once (or per observation for large formulas),
    /// conditioned and counted per observation.
    CiaDnnf,
    /// Brute-force interpreter enumeration (guarded).
    Oracle,
}

impl Engine {
    pub fn label(&self) -> &'static str {
        match self {
            Engine::Cod => "CoD",
            Engine::CiaBdd => "CiA-BDD",
            Engine::CiaDnnf => "CiA-dNNF",
            Engine::Oracle => "Oracle",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ordering {
    Identity,
    Force { iterations: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DnnfSharing {
    /// Shared compilation for small formulas, per-observation otherwise.
    Auto,
    Shared,
    PerObservation,
}

#[derive(Debug, Clone)]
pub struct EngineConfig {
    pub engine: Engine,
    pub unroll: UnrollConfig,
    pub ordering: Ordering,
    pub node_budget: usize,
    pub enumeration_cap: usize,
    pub dnnf_sharing: DnnfSharing,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            engine: Engine::Cod,
            unroll: UnrollConfig::default(),
            ordering: Ordering::Force { iterations: 10 },
            node_budget: bdd::DEFAULT_NODE_BUDGET,
            enumeration_cap: 1 << 22,
            dnnf_sharing: DnnfSharing::Auto,
        }
    }
}

impl EngineConfig {
    pub fn with_engine(engine: Engine) -> EngineConfig {
        EngineConfig {
            engine,
            ..Default::default()
        }
    }
}

/// Shared-compilation size threshold for `DnnfSharing::Auto`.
const DNNF_SHARED_MAX_VARS: u32 = 2048;

struct BddState {
    mgr: BddManager,
    /// Relation over Input and Output bits (coins and aux quantified away):
    /// serves preimage counts and enumeration.
    io: Option<u32>,
    /// Relation over Input, Coin and Output bits (aux quantified away):
    /// serves joint input-coin counts.
    ico: Option<u32>,
}

enum DnnfState {
    Untried,
    Shared(Box<DnnfGraph>),
    PerObservation,
}

/// A program prepared for repeated queries on one engine: the CNF is built
/// once, and Construct-in-Advance engines keep their compiled structure.
pub struct Prepared {
    pub program: Program,
    cfg: EngineConfig,
    f: CnfFormula,
    bdd: Option<BddState>,
    dnnf: DnnfState,
    construct_ms: f64,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

impl Prepared {
    pub fn new(p: &Program, cfg: &EngineConfig) -> Result<Prepared> {
        let t = Instant::now();
        let f = bitblast(p, &cfg.unroll)?;
        if !f.unroll_checks.is_empty() {
            count::verify_unroll(&f)?;
        }
        Ok(Prepared {
            program: p.clone(),
            cfg: cfg.clone(),
            f,
            bdd: None,
            dnnf: DnnfState::Untried,
            construct_ms: ms_since(t),
        })
    }

    pub fn formula(&self) -> &CnfFormula {
        &self.f
    }

    pub fn engine(&self) -> Engine {
        self.cfg.engine
    }

    pub fn assume_exit_applied(&self) -> bool {
        self.f.assume_exit_applied
    }

    /// Construction time so far (bit-blasting plus any compiled structure).
    pub fn construct_ms(&self) -> f64 {
        self.construct_ms
    }

    fn order(&self) -> VarOrder {
        match self.cfg.ordering {
            Ordering::Identity => VarOrder::identity(&self.f),
            Ordering::Force { iterations } => bdd::force_order(&self.f, iterations),
        }
    }

    /// Build (lazily) the relation BDD that keeps exactly the classes in
    /// `keep` plus Output; everything else is quantified during
    /// construction.
    fn ensure_bdd(&mut self, with_coins: bool) -> Result<()> {
        let t = Instant::now();
        if self.bdd.is_none() {
            let order = self.order();
            let budget = self.cfg.node_budget;
            self.bdd = Some(BddState {
                mgr: BddManager::with_budget(order, budget),
                io: None,
                ico: None,
            });
        }
        let f = &self.f;
        let state = self.bdd.as_mut().unwrap();
        let slot_filled = if with_coins {
            state.ico.is_some()
        } else {
            state.io.is_some()
        };
        if !slot_filled {
            let keep = if with_coins {
                ClassSet::of(&[VarClass::Input, VarClass::Coin, VarClass::Output])
            } else {
                ClassSet::of(&[VarClass::Input, VarClass::Output])
            };
            let root = bdd::with_big_stack(|| state.mgr.build_projected(f, keep))?;
            if with_coins {
                state.ico = Some(root);
            } else {
                state.io = Some(root);
            }
            self.construct_ms += ms_since(t);
        }
        Ok(())
    }

    fn ensure_dnnf(&mut self) -> Result<()> {
        if matches!(self.dnnf, DnnfState::Untried) {
            let shared = match self.cfg.dnnf_sharing {
                DnnfSharing::Shared => true,
                DnnfSharing::PerObservation => false,
                DnnfSharing::Auto => self.f.num_vars <= DNNF_SHARED_MAX_VARS,
            };
            if shared {
                let t = Instant::now();
                let g = bdd::with_big_stack(|| {
                    dnnf::compile_dnnf(&self.f, &dnnf::DEFAULT_PRIORITY)
                })?;
                self.construct_ms += ms_since(t);
                self.dnnf = DnnfState::Shared(Box::new(g));
            } else {
                self.dnnf = DnnfState::PerObservation;
            }
        }
        Ok(())
    }

    fn output_bit_assignment(&self, o: &Valuation) -> Result<Vec<(u32, bool)>> {
        let outs = self.f.named_vars(VarClass::Output);
        let mut bits = Vec::new();
        for (name, width) in &outs {
            let v = *o.get(name).ok_or_else(|| {
                Error::semantic(format!("observation is missing output `{name}`"))
            })?;
            if v > crate::domain::max_value(*width) {
                return Err(Error::semantic(format!(
                    "observed value {v} does not fit the {width}-bit output `{name}` (width mismatch)"
                )));
            }
            for (i, var) in self.f.bits_of(VarClass::Output, name).iter().enumerate() {
                bits.push((*var, (v >> i) & 1 == 1));
            }
        }
        Ok(bits)
    }

    /// Projected count over `keep` with an optional observation fixed.
    pub fn count(&mut self, keep: ClassSet, o: Option<&Valuation>) -> Result<BigUint> {
        match self.cfg.engine {
            Engine::Cod => {
                let f = match o {
                    Some(o) => observe(&self.f, o)?,
                    None => self.f.clone(),
                };
                count::dpll_count(&f, keep)
            }
            Engine::CiaBdd => {
                let with_coins = keep.contains(VarClass::Coin);
                self.ensure_bdd(with_coins)?;
                let cube = match o {
                    Some(o) => self.output_bit_assignment(o)?,
                    None => Vec::new(),
                };
                let f = &self.f;
                let state = self.bdd.as_mut().unwrap();
                let relation = if with_coins {
                    state.ico.unwrap()
                } else {
                    state.io.unwrap()
                };
                bdd::with_big_stack(|| -> Result<BigUint> {
                    let mut node = state.mgr.restrict(relation, &cube)?;
                    // observed output bits are gone via restrict; quantify
                    // the rest of the outputs when unobserved
                    if !keep.contains(VarClass::Output) {
                        node = state.mgr.exists(node, &f.vars_of_class(VarClass::Output))?;
                    }
                    let proj = f.vars_in(keep);
                    Ok(state.mgr.count(node, &proj))
                })
            }
            Engine::CiaDnnf => {
                self.ensure_dnnf()?;
                match &self.dnnf {
                    DnnfState::Shared(g) => {
                        let units: HashMap<u32, bool> = match o {
                            Some(o) => self.output_bit_assignment(o)?.into_iter().collect(),
                            None => HashMap::new(),
                        };
                        g.project_count_conditioned(keep, &units)
                    }
                    DnnfState::PerObservation => {
                        let f = match o {
                            Some(o) => observe(&self.f, o)?,
                            None => self.f.clone(),
                        };
                        let g = bdd::with_big_stack(|| {
                            dnnf::compile_dnnf(&f, &dnnf::DEFAULT_PRIORITY)
                        })?;
                        g.project_count(keep)
                    }
                    DnnfState::Untried => unreachable!(),
                }
            }
            Engine::Oracle => self.oracle_count(keep, o),
        }
    }

    fn oracle_count(&self, keep: ClassSet, o: Option<&Valuation>) -> Result<BigUint> {
        let p = &self.program;
        if keep == ClassSet::INPUT {
            match o {
                Some(o) => Ok(BigUint::from(interp::oracle_preimage(p, o)?.len())),
                None => {
                    let mut n = 0usize;
                    for s in interp::input_space(p)? {
                        if !interp::output_distribution(p, &s)?.defined_mass.is_zero() {
                            n += 1;
                        }
                    }
                    Ok(BigUint::from(n))
                }
            }
        } else {
            Err(Error::Guard(
                "the oracle engine only counts Input projections; probabilities go through \
                 oracle_output_prob"
                    .to_string(),
            ))
        }
    }

    pub fn count_preimage(&mut self, o: &Valuation) -> Result<BigUint> {
        self.count(ClassSet::INPUT, Some(o))
    }

    pub fn input_domain_size(&mut self) -> Result<BigUint> {
        self.count(ClassSet::INPUT, None)
    }

    pub fn is_feasible(&mut self, o: &Valuation) -> Result<bool> {
        match self.cfg.engine {
            Engine::Cod => count::dpll_sat(&observe(&self.f, o)?),
            _ => Ok(!self.count_preimage(o)?.is_zero()),
        }
    }

    /// The distinct input values of the preimage of `o`, as valuations.
    pub fn enumerate_preimage(&mut self, o: &Valuation) -> Result<Vec<Valuation>> {
        let cap = self.cfg.enumeration_cap;
        match self.cfg.engine {
            Engine::Cod => {
                let f = observe(&self.f, o)?;
                count::enumerate_values(&f, VarClass::Input, cap)
            }
            Engine::CiaBdd => {
                self.ensure_bdd(false)?;
                let cube = self.output_bit_assignment(o)?;
                let f = &self.f;
                let state = self.bdd.as_mut().unwrap();
                let relation = state.io.unwrap();
                bdd::with_big_stack(|| -> Result<Vec<Valuation>> {
                    let node = state.mgr.restrict(relation, &cube)?;
                    let proj = f.vars_of_class(VarClass::Input);
                    let mut out = Vec::new();
                    for row in state.mgr.models(node, &proj)? {
                        out.push(decode_bits(f, VarClass::Input, &row));
                        if out.len() > cap {
                            return Err(Error::Guard(format!(
                                "enumeration exceeded the cap of {cap} values"
                            )));
                        }
                    }
                    out.sort();
                    out.dedup();
                    Ok(out)
                })
            }
            Engine::CiaDnnf => {
                self.ensure_dnnf()?;
                let f = observe(&self.f, o)?;
                let g = bdd::with_big_stack(|| {
                    dnnf::compile_dnnf(&f, &dnnf::DEFAULT_PRIORITY)
                })?;
                let rows = g.enumerate(ClassSet::INPUT, cap)?;
                let mut out: Vec<Valuation> = Vec::new();
                for row in rows {
                    out.push(decode_bits(&self.f, VarClass::Input, &row));
                }
                out.sort();
                out.dedup();
                Ok(out)
            }
            Engine::Oracle => interp::oracle_preimage(&self.program, o),
        }
    }

    /// Distinct reachable output values (the program image).
    pub fn enumerate_outputs(&mut self) -> Result<Vec<Valuation>> {
        let cap = self.cfg.enumeration_cap;
        match self.cfg.engine {
            Engine::CiaBdd => {
                self.ensure_bdd(false)?;
                let f = &self.f;
                let state = self.bdd.as_mut().unwrap();
                let relation = state.io.unwrap();
                bdd::with_big_stack(|| -> Result<Vec<Valuation>> {
                    let drop = f.vars_of_class(VarClass::Input);
                    let node = state.mgr.exists(relation, &drop)?;
                    let proj = f.vars_of_class(VarClass::Output);
                    let mut out = Vec::new();
                    for row in state.mgr.models(node, &proj)? {
                        out.push(decode_bits(f, VarClass::Output, &row));
                        if out.len() > cap {
                            return Err(Error::Guard(format!(
                                "enumeration exceeded the cap of {cap} values"
                            )));
                        }
                    }
                    out.sort();
                    Ok(out)
                })
            }
            Engine::Oracle => interp::oracle_image(&self.program),
            _ => count::enumerate_values(&self.f, VarClass::Output, cap),
        }
    }
}

/// Decode `(var, value)` bit rows into a named valuation.
pub(crate) fn decode_bits(f: &CnfFormula, class: VarClass, row: &[(u32, bool)]) -> Valuation {
    let lookup: HashMap<u32, bool> = row.iter().copied().collect();
    f.decode_assignment(class, &|v| lookup.get(&v).copied().unwrap_or(false))
        .into_iter()
        .collect()
}

/// Base-2 logarithm of a big integer, accurate to the last few ulps.
pub fn log2_biguint(n: &BigUint) -> f64 {
    let bits = n.bits();
    if bits <= 53 {
        return n.to_f64().unwrap_or(0.0).log2();
    }
    let shift = bits - 53;
    let head = (n >> shift).to_f64().unwrap_or(0.0);
    head.log2() + shift as f64
}

fn log2_ratio_nonneg(num: &BigUint, den: &BigUint) -> f64 {
    // log2(den / num) for num ≤ den, clamped to zero
    if num == den {
        return 0.0;
    }
    (log2_biguint(den) - log2_biguint(num)).max(0.0)
}

#[derive(Debug, Clone)]
pub struct LeakageReport {
    pub program: String,
    pub observed: Valuation,
    pub engine: Engine,
    pub preimage_size: BigUint,
    pub domain_size: BigUint,
    /// p(o) as an exact reduced fraction.
    pub p_o: (BigUint, BigUint),
    pub qif1_bits: f64,
    pub qif2_bits: f64,
    pub assume_exit: bool,
    pub construct_ms: f64,
    pub count_ms: f64,
}

impl LeakageReport {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "program": self.program,
            "o": self.observed,
            "engine": self.engine.label(),
            "preimage_size": self.preimage_size.to_string(),
            "domain_size": self.domain_size.to_string(),
            "p_o": { "num": self.p_o.0.to_string(), "den": self.p_o.1.to_string() },
            "qif1_bits": self.qif1_bits,
            "qif2_bits": self.qif2_bits,
            "flags": { "assume_exit": self.assume_exit },
            "timings_ms": { "construct": self.construct_ms, "count": self.count_ms },
        })
    }
}

fn reduce(num: BigUint, den: BigUint) -> (BigUint, BigUint) {
    if num.is_zero() {
        return (BigUint::zero(), BigUint::from(1u32));
    }
    let g = num.gcd(&den);
    (num / &g, den / g)
}

fn rational_to_parts(r: &BigRational) -> (BigUint, BigUint) {
    let num = r.numer().abs().to_biguint().unwrap_or_default();
    let den = r.denom().abs().to_biguint().unwrap_or_default();
    reduce(num, den)
}

/// Compute both leakage measures for one observation. Also the body behind
/// [`qif1`] and [`qif2`].
pub fn analyze(
    p: &Program,
    prior: &Prior,
    o: &Valuation,
    cfg: &EngineConfig,
) -> Result<LeakageReport> {
    let mut prepared = Prepared::new(p, cfg)?;
    analyze_prepared(&mut prepared, prior, o)
}

pub fn analyze_prepared(
    prepared: &mut Prepared,
    prior: &Prior,
    o: &Valuation,
) -> Result<LeakageReport> {
    prior.validate()?;
    let p = prepared.program.clone();
    let t = Instant::now();

    let preimage_size = prepared.count_preimage(o)?;
    if preimage_size.is_zero() {
        return Err(Error::ImpossibleObservation);
    }
    let domain_size = prepared.input_domain_size()?;

    let (p_o, qif1_bits, qif2_bits) = match prior {
        Prior::Uniform => {
            let qif1 = log2_ratio_nonneg(&preimage_size, &domain_size);
            if p.is_deterministic() {
                // the two measures coincide exactly; reuse the same counts
                let p_o = reduce(preimage_size.clone(), domain_size.clone());
                (p_o, qif1, qif1)
            } else {
                let joint = prepared.count(ClassSet::INPUT_COIN, Some(o))?;
                let total = prepared.count(ClassSet::INPUT_COIN, None)?;
                let p_o = reduce(joint.clone(), total.clone());
                let qif2 = log2_ratio_nonneg(&joint, &total);
                (p_o, qif1, qif2)
            }
        }
        Prior::Explicit(entries) => {
            // preimage mass by explicit enumeration; p(o) via the oracle
            let pre = prepared.enumerate_preimage(o)?;
            let mut mass = BigRational::zero();
            for (s, ps) in entries {
                if pre.binary_search(s).is_ok() {
                    mass += ps;
                }
            }
            if mass.is_zero() {
                return Err(Error::ImpossibleObservation);
            }
            let (mn, md) = rational_to_parts(&mass);
            let qif1 = log2_ratio_nonneg(&mn, &md);
            let po = interp::oracle_output_prob(&p, prior, o)?;
            let (num, den) = rational_to_parts(&po);
            let qif2 = log2_ratio_nonneg(&num, &den);
            ((num, den), qif1, qif2)
        }
    };

    Ok(LeakageReport {
        program: p.name.clone(),
        observed: o.clone(),
        engine: prepared.engine(),
        preimage_size,
        domain_size,
        p_o,
        qif1_bits,
        qif2_bits,
        assume_exit: prepared.assume_exit_applied(),
        construct_ms: prepared.construct_ms(),
        count_ms: ms_since(t),
    })
}

/// Preimage-mass leakage of observing `o` (the report carries both measures).
pub fn qif1(p: &Program, prior: &Prior, o: &Valuation, cfg: &EngineConfig) -> Result<LeakageReport> {
    analyze(p, prior, o, cfg)
}

/// Self-information of observing `o` (the report carries both measures).
pub fn qif2(p: &Program, prior: &Prior, o: &Valuation, cfg: &EngineConfig) -> Result<LeakageReport> {
    analyze(p, prior, o, cfg)
}

/// Average of both measures over all feasible outputs, weighted by p(o);
/// a helper for comparing against expected-value leakage notions on small
/// programs. Makes no claim beyond the programs it can enumerate.
pub fn expected_leakage(p: &Program, cfg: &EngineConfig) -> Result<(f64, f64)> {
    let mut prepared = Prepared::new(p, cfg)?;
    let outputs = prepared.enumerate_outputs()?;
    let total = prepared.count(ClassSet::INPUT_COIN, None)?;
    let mut e1 = 0.0;
    let mut e2 = 0.0;
    for o in outputs {
        let joint = prepared.count(ClassSet::INPUT_COIN, Some(&o))?;
        if joint.is_zero() {
            continue;
        }
        let weight = log2_exp(&joint, &total);
        let report = analyze_prepared(&mut prepared, &Prior::Uniform, &o)?;
        e1 += weight * report.qif1_bits;
        e2 += weight * report.qif2_bits;
    }
    Ok((e1, e2))
}

fn log2_exp(num: &BigUint, den: &BigUint) -> f64 {
    // num / den as f64 via logs (safe for big values)
    2f64.powf(log2_biguint(num) - log2_biguint(den))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::valuation;
    use crate::lang::parse_program;

    const EXAMPLE_1_1: &str =
        "in s:8; out o:8; local ;\nif s < 16 then o <- 8 + s else o <- 8 end";

    fn engines() -> Vec<EngineConfig> {
        vec![
            EngineConfig::with_engine(Engine::Cod),
            EngineConfig::with_engine(Engine::CiaBdd),
            EngineConfig::with_engine(Engine::CiaDnnf),
            EngineConfig::with_engine(Engine::Oracle),
        ]
    }

    #[test]
    fn identity_leaks_everything() {
        let p = parse_program("in s:8; out o:8; o <- s").unwrap();
        for cfg in engines() {
            let r = analyze(&p, &Prior::Uniform, &valuation(&[("o", 77)]), &cfg).unwrap();
            assert_eq!(r.qif1_bits, 8.0, "{:?}", cfg.engine);
            assert_eq!(r.qif2_bits, 8.0);
            assert_eq!(r.preimage_size, 1u32.into());
        }
    }

    #[test]
    fn example_1_1_values() {
        let p = parse_program(EXAMPLE_1_1).unwrap();
        for cfg in engines() {
            let r9 = analyze(&p, &Prior::Uniform, &valuation(&[("o", 9)]), &cfg).unwrap();
            assert_eq!(r9.qif1_bits, 8.0, "{:?}", cfg.engine);
            let r8 = analyze(&p, &Prior::Uniform, &valuation(&[("o", 8)]), &cfg).unwrap();
            assert_eq!(r8.preimage_size, 241u32.into());
            let want = (256f64 / 241f64).log2();
            assert!((r8.qif1_bits - want).abs() < 1e-12);
            assert_eq!(r8.qif1_bits, r8.qif2_bits, "deterministic equality");
        }
    }

    #[test]
    fn impossible_observation_is_an_error() {
        let p = parse_program(EXAMPLE_1_1).unwrap();
        let err = analyze(
            &p,
            &Prior::Uniform,
            &valuation(&[("o", 200)]),
            &EngineConfig::default(),
        )
        .unwrap_err();
        assert!(matches!(err, Error::ImpossibleObservation));
    }

    #[test]
    fn fair_coin_splits_the_measures() {
        let p = parse_program("in s:4; out o:1; choice 1/2 { o <- 0 } { o <- 1 }").unwrap();
        for cfg in engines() {
            if cfg.engine == Engine::Oracle {
                continue;
            }
            let r = analyze(&p, &Prior::Uniform, &valuation(&[("o", 0)]), &cfg).unwrap();
            assert_eq!(r.qif1_bits, 0.0, "{:?}", cfg.engine);
            assert_eq!(r.qif2_bits, 1.0, "{:?}", cfg.engine);
            assert_eq!(r.preimage_size, 16u32.into());
        }
    }

    #[test]
    fn engines_agree_on_probabilistic_programs() {
        let p = parse_program(
            "in s:3; out o:3; coin c:2;\nif s < 4 then o <- s + c else choice 1/2 { o <- 0 } { o <- 7 } end",
        )
        .unwrap();
        let mut reports = Vec::new();
        for cfg in engines() {
            if cfg.engine == Engine::Oracle {
                continue;
            }
            reports.push(analyze(&p, &Prior::Uniform, &valuation(&[("o", 3)]), &cfg).unwrap());
        }
        for r in &reports[1..] {
            assert_eq!(r.preimage_size, reports[0].preimage_size);
            assert_eq!(r.p_o, reports[0].p_o);
        }
        // oracle agreement on the preimage
        let pre = interp::oracle_preimage(&p, &valuation(&[("o", 3)])).unwrap();
        assert_eq!(BigUint::from(pre.len()), reports[0].preimage_size);
        let want_po =
            interp::oracle_output_prob(&p, &Prior::Uniform, &valuation(&[("o", 3)])).unwrap();
        let (n, d) = rational_to_parts(&want_po);
        assert_eq!((n, d), reports[0].p_o);
    }

    #[test]
    fn explicit_prior_changes_qif1() {
        let p = parse_program("in s:2; out o:2; o <- s & 1").unwrap();
        // prior concentrated on s = 0 with mass 1/2, rest uniform
        let q = |n: u32, d: u32| BigRational::new(n.into(), d.into());
        let entries = vec![
            (valuation(&[("s", 0)]), q(1, 2)),
            (valuation(&[("s", 1)]), q(1, 6)),
            (valuation(&[("s", 2)]), q(1, 6)),
            (valuation(&[("s", 3)]), q(1, 6)),
        ];
        let prior = Prior::Explicit(entries);
        let r = analyze(
            &p,
            &prior,
            &valuation(&[("o", 0)]),
            &EngineConfig::default(),
        )
        .unwrap();
        // preimage of o=0 is {0, 2}: mass 1/2 + 1/6 = 2/3 -> qif1 = log2(3/2)
        let want = (3f64 / 2f64).log2();
        assert!((r.qif1_bits - want).abs() < 1e-12);
    }

    #[test]
    fn report_json_schema() {
        let p = parse_program("in s:2; out o:2; o <- s").unwrap();
        let r = analyze(
            &p,
            &Prior::Uniform,
            &valuation(&[("o", 1)]),
            &EngineConfig::default(),
        )
        .unwrap();
        let v = r.to_json();
        for key in ["program", "o", "engine", "preimage_size", "p_o", "qif1_bits", "qif2_bits", "flags", "timings_ms"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        assert_eq!(v["preimage_size"], "1");
        assert_eq!(v["p_o"]["den"], "4");
    }
}
