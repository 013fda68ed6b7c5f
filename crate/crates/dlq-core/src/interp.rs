//! Reference interpreter and exhaustive brute-force oracle.
//!
//! Everything else in the crate is checked against this module: the counting
//! engines must agree with [`oracle_preimage`] and [`oracle_output_prob`] on
//! every program small enough to enumerate.
//!
//! Probabilistic semantics: declared coin variables draw their bits up front,
//! and each `choice m/2^k` consumes k fresh fair coin bits and takes the
//! first branch when their value (MSB drawn first) is below m. A failed
//! `assume` makes the run undefined; output distributions condition on the
//! run being defined.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::lang::ast::*;
use crate::lang::{cmp_width, eval_width};

pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000;

/// Guard for the exhaustive oracles: total input bits plus total choice/coin
/// bits explored.
pub const ORACLE_INPUT_BITS: u32 = 26;
pub const ORACLE_COIN_BITS: u32 = 24;

/// A total map from variable names to values.
pub type Valuation = BTreeMap<String, u64>;

pub fn valuation(pairs: &[(&str, u64)]) -> Valuation {
    pairs.iter().map(|(n, v)| (n.to_string(), *v)).collect()
}

/// Outcome of a run: an output valuation, or undefined (an assume failed).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Out(Valuation),
    Undefined,
}

/// A finite stream of fair coin flips.
pub struct CoinStream<'a> {
    bits: &'a [bool],
    pos: usize,
}

impl<'a> CoinStream<'a> {
    pub fn new(bits: &'a [bool]) -> CoinStream<'a> {
        CoinStream { bits, pos: 0 }
    }

    pub fn consumed(&self) -> usize {
        self.pos
    }

    fn draw(&mut self, width: u32) -> Result<u64> {
        let mut v = 0u64;
        for _ in 0..width {
            let b = *self.bits.get(self.pos).ok_or(Error::CoinExhausted)?;
            self.pos += 1;
            v = (v << 1) | b as u64;
        }
        Ok(v)
    }
}

struct Env<'p> {
    prog: &'p Program,
    widths: HashMap<String, u32>,
    values: HashMap<String, u64>,
}

impl<'p> Env<'p> {
    fn new(prog: &'p Program, input: &Valuation) -> Result<Env<'p>> {
        let widths: HashMap<String, u32> = prog
            .all_decls()
            .map(|d| (d.name.clone(), d.width))
            .collect();
        let mut values: HashMap<String, u64> = HashMap::new();
        for d in &prog.in_vars {
            let v = *input.get(&d.name).ok_or_else(|| {
                Error::semantic(format!("input valuation is missing `{}`", d.name))
            })?;
            if const_width_ok(v, d.width) {
                values.insert(d.name.clone(), v);
            } else {
                return Err(Error::semantic(format!(
                    "input `{}`={v} does not fit {} bits",
                    d.name, d.width
                )));
            }
        }
        for d in prog.out_vars.iter().chain(&prog.local_vars) {
            values.insert(d.name.clone(), 0);
        }
        Ok(Env {
            prog,
            widths,
            values,
        })
    }

    fn eval_at(&self, e: &Expr, w: u32) -> u64 {
        let mask = crate::domain::max_value(w);
        match e {
            Expr::Var(n) => self.values[n] & mask,
            Expr::Const(v) => *v & mask,
            Expr::Add(a, b) => self.eval_at(a, w).wrapping_add(self.eval_at(b, w)) & mask,
            Expr::Sub(a, b) => self.eval_at(a, w).wrapping_sub(self.eval_at(b, w)) & mask,
            Expr::BitAnd(a, b) => self.eval_at(a, w) & self.eval_at(b, w),
            Expr::BitOr(a, b) => self.eval_at(a, w) | self.eval_at(b, w),
            Expr::BitXor(a, b) => self.eval_at(a, w) ^ self.eval_at(b, w),
            Expr::Shl(a, k) => (self.eval_at(a, w) << k) & mask,
            Expr::Shr(a, k) => self.eval_at(a, w) >> k,
            Expr::Mod(a, n) => self.eval_at(a, w) % n,
        }
    }

    fn cond(&self, c: &Cond) -> bool {
        match c {
            Cond::False => false,
            Cond::True => true,
            Cond::Not(x) => !self.cond(x),
            Cond::Or(a, b) => self.cond(a) || self.cond(b),
            Cond::Lt(a, b) => {
                let w = cmp_width(a, b, &self.widths);
                self.eval_at(a, w) < self.eval_at(b, w)
            }
        }
    }

    fn assign(&mut self, x: &str, e: &Expr) {
        let tw = self.widths[x];
        let w = eval_width(tw, e, &self.widths);
        let v = self.eval_at(e, w) & crate::domain::max_value(tw);
        self.values.insert(x.to_string(), v);
    }

    fn outputs(&self) -> Valuation {
        self.prog
            .out_vars
            .iter()
            .map(|d| (d.name.clone(), self.values[&d.name]))
            .collect()
    }
}

fn const_width_ok(v: u64, width: u32) -> bool {
    v <= crate::domain::max_value(width)
}

/// Execute a program on one input with an explicit coin stream.
pub fn run(
    p: &Program,
    input: &Valuation,
    coins: &mut CoinStream<'_>,
    step_budget: u64,
) -> Result<Outcome> {
    let mut env = Env::new(p, input)?;
    for d in &p.coin_vars {
        let v = coins.draw(d.width)?;
        env.values.insert(d.name.clone(), v);
    }
    let mut steps = 0u64;
    match exec(&p.body, &mut env, coins, &mut steps, step_budget)? {
        true => Ok(Outcome::Out(env.outputs())),
        false => Ok(Outcome::Undefined),
    }
}

/// Convenience wrapper for deterministic programs.
pub fn run_deterministic(p: &Program, input: &Valuation) -> Result<Outcome> {
    run(p, input, &mut CoinStream::new(&[]), DEFAULT_STEP_BUDGET)
}

fn exec(
    c: &Command,
    env: &mut Env<'_>,
    coins: &mut CoinStream<'_>,
    steps: &mut u64,
    budget: u64,
) -> Result<bool> {
    *steps += 1;
    if *steps > budget {
        return Err(Error::StepBudget(budget));
    }
    match c {
        Command::Skip => Ok(true),
        Command::Assign(x, e) => {
            env.assign(x, e);
            Ok(true)
        }
        Command::Assume(b) => Ok(env.cond(b)),
        Command::If(b, t, e) => {
            if env.cond(b) {
                exec(t, env, coins, steps, budget)
            } else {
                exec(e, env, coins, steps, budget)
            }
        }
        Command::Choice(r, a, b) => {
            let v = coins.draw(r.log2_den)?;
            if v < r.num {
                exec(a, env, coins, steps, budget)
            } else {
                exec(b, env, coins, steps, budget)
            }
        }
        Command::While(b, body) => {
            while env.cond(b) {
                if !exec(body, env, coins, steps, budget)? {
                    return Ok(false);
                }
                *steps += 1;
                if *steps > budget {
                    return Err(Error::StepBudget(budget));
                }
            }
            Ok(true)
        }
        Command::Seq(a, b) => {
            if !exec(a, env, coins, steps, budget)? {
                return Ok(false);
            }
            exec(b, env, coins, steps, budget)
        }
    }
}

/// Exact output distribution for one input, conditioned on the run being
/// defined. `defined_mass` is the probability that no assume fails.
#[derive(Debug, Clone)]
pub struct Dist {
    pub weights: BTreeMap<Valuation, BigRational>,
    pub defined_mass: BigRational,
}

impl Dist {
    /// Conditional probability of `o` given a defined run.
    pub fn prob(&self, o: &Valuation) -> BigRational {
        if self.defined_mass.is_zero() {
            return BigRational::zero();
        }
        match self.weights.get(o) {
            Some(w) => w / &self.defined_mass,
            None => BigRational::zero(),
        }
    }

    pub fn support(&self) -> impl Iterator<Item = &Valuation> {
        self.weights.keys()
    }
}

fn ratio(num: u64, den_log2: u32) -> BigRational {
    BigRational::new(
        BigUint::from(num).into(),
        (BigUint::one() << den_log2).into(),
    )
}

/// Exhaustively branch over every probabilistic choice and coin variable.
pub fn output_distribution(p: &Program, input: &Valuation) -> Result<Dist> {
    let coin_bits = p.total_coin_decl_bits();
    if coin_bits > ORACLE_COIN_BITS {
        return Err(Error::Guard(format!(
            "{coin_bits} declared coin bits exceed the {ORACLE_COIN_BITS}-bit enumeration guard"
        )));
    }
    let mut dist = Dist {
        weights: BTreeMap::new(),
        defined_mass: BigRational::zero(),
    };
    let env = Env::new(p, input)?;
    branch_coin_decls(p, env, 0, BigRational::one(), &mut dist)?;
    Ok(dist)
}

fn branch_coin_decls(
    p: &Program,
    env: Env<'_>,
    idx: usize,
    weight: BigRational,
    dist: &mut Dist,
) -> Result<()> {
    if idx == p.coin_vars.len() {
        let mut steps = 0u64;
        return branch_exec(&p.body, env, weight, &mut steps, dist, &|env, w, dist| {
            let o = env.outputs();
            *dist.weights.entry(o).or_insert_with(BigRational::zero) += w.clone();
            dist.defined_mass += w;
        });
    }
    let d = &p.coin_vars[idx];
    let per = ratio(1, d.width);
    for v in 0..=crate::domain::max_value(d.width) {
        let mut env2 = Env {
            prog: env.prog,
            widths: env.widths.clone(),
            values: env.values.clone(),
        };
        env2.values.insert(d.name.clone(), v);
        branch_coin_decls(p, env2, idx + 1, &weight * &per, dist)?;
    }
    Ok(())
}

fn branch_exec(
    c: &Command,
    mut env: Env<'_>,
    weight: BigRational,
    steps: &mut u64,
    dist: &mut Dist,
    done: &dyn Fn(Env<'_>, BigRational, &mut Dist),
) -> Result<()> {
    // small driver: a continuation list of commands to execute in order
    exec_weighted(&mut vec![c], &mut env, weight, steps, dist, done)
}

fn exec_weighted<'c>(
    stack: &mut Vec<&'c Command>,
    env: &mut Env<'_>,
    weight: BigRational,
    steps: &mut u64,
    dist: &mut Dist,
    done: &dyn Fn(Env<'_>, BigRational, &mut Dist),
) -> Result<()> {
    loop {
        *steps += 1;
        if *steps > DEFAULT_STEP_BUDGET {
            return Err(Error::StepBudget(DEFAULT_STEP_BUDGET));
        }
        let Some(c) = stack.pop() else {
            let out = Env {
                prog: env.prog,
                widths: env.widths.clone(),
                values: env.values.clone(),
            };
            done(out, weight, dist);
            return Ok(());
        };
        match c {
            Command::Skip => {}
            Command::Assign(x, e) => env.assign(x, e),
            Command::Assume(b) => {
                if !env.cond(b) {
                    return Ok(()); // undefined path: weight goes nowhere
                }
            }
            Command::If(b, t, e) => stack.push(if env.cond(b) { t } else { e }),
            Command::While(b, body) => {
                if env.cond(b) {
                    stack.push(c);
                    stack.push(body);
                }
            }
            Command::Seq(a, b) => {
                stack.push(b);
                stack.push(a);
            }
            Command::Choice(r, a, b) => {
                let p_take = ratio(r.num, r.log2_den);
                let p_skip = BigRational::one() - &p_take;
                if !p_take.is_zero() {
                    let mut env_a = Env {
                        prog: env.prog,
                        widths: env.widths.clone(),
                        values: env.values.clone(),
                    };
                    let mut stack_a: Vec<&Command> = stack.clone();
                    stack_a.push(a);
                    exec_weighted(&mut stack_a, &mut env_a, &weight * p_take, steps, dist, done)?;
                }
                if !p_skip.is_zero() {
                    stack.push(b);
                    return exec_weighted(stack, env, weight * p_skip, steps, dist, done);
                }
                return Ok(());
            }
        }
    }
}

/// True when `p` can produce `o` from `input` with nonzero probability
/// (early-exits on the first witness path).
pub fn can_output(p: &Program, input: &Valuation, o: &Valuation) -> Result<bool> {
    let env = Env::new(p, input)?;
    search_coin_decls(p, env, 0, o)
}

fn search_coin_decls(p: &Program, env: Env<'_>, idx: usize, o: &Valuation) -> Result<bool> {
    if idx == p.coin_vars.len() {
        let mut steps = 0u64;
        return search_exec(&mut vec![&p.body], env, o, &mut steps);
    }
    let d = &p.coin_vars[idx];
    for v in 0..=crate::domain::max_value(d.width) {
        let mut env2 = Env {
            prog: env.prog,
            widths: env.widths.clone(),
            values: env.values.clone(),
        };
        env2.values.insert(d.name.clone(), v);
        if search_coin_decls(p, env2, idx + 1, o)? {
            return Ok(true);
        }
    }
    Ok(false)
}

fn search_exec<'c>(
    stack: &mut Vec<&'c Command>,
    mut env: Env<'_>,
    o: &Valuation,
    steps: &mut u64,
) -> Result<bool> {
    loop {
        *steps += 1;
        if *steps > DEFAULT_STEP_BUDGET {
            return Err(Error::StepBudget(DEFAULT_STEP_BUDGET));
        }
        let Some(c) = stack.pop() else {
            return Ok(&env.outputs() == o);
        };
        match c {
            Command::Skip => {}
            Command::Assign(x, e) => env.assign(x, e),
            Command::Assume(b) => {
                if !env.cond(b) {
                    return Ok(false);
                }
            }
            Command::If(b, t, e) => stack.push(if env.cond(b) { t } else { e }),
            Command::While(b, body) => {
                if env.cond(b) {
                    stack.push(c);
                    stack.push(body);
                }
            }
            Command::Seq(a, b) => {
                stack.push(b);
                stack.push(a);
            }
            Command::Choice(r, a, b) => {
                if r.num > 0 {
                    let mut stack_a = stack.clone();
                    stack_a.push(a);
                    let env_a = Env {
                        prog: env.prog,
                        widths: env.widths.clone(),
                        values: env.values.clone(),
                    };
                    if search_exec(&mut stack_a, env_a, o, steps)? {
                        return Ok(true);
                    }
                }
                if r.num < r.den() {
                    stack.push(b);
                    continue;
                }
                return Ok(false);
            }
        }
    }
}

/// Iterate every input valuation of `p` in ascending mixed-radix order.
pub fn input_space(p: &Program) -> Result<Vec<Valuation>> {
    let bits = p.total_input_bits();
    if bits > ORACLE_INPUT_BITS {
        return Err(Error::Guard(format!(
            "{bits} input bits exceed the {ORACLE_INPUT_BITS}-bit enumeration guard"
        )));
    }
    let mut out = Vec::new();
    let mut current: Vec<u64> = vec![0; p.in_vars.len()];
    loop {
        out.push(
            p.in_vars
                .iter()
                .zip(&current)
                .map(|(d, &v)| (d.name.clone(), v))
                .collect(),
        );
        // increment, last variable fastest
        let mut i = p.in_vars.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if current[i] < crate::domain::max_value(p.in_vars[i].width) {
                current[i] += 1;
                break;
            }
            current[i] = 0;
        }
    }
}

fn check_coin_guard(p: &Program) -> Result<()> {
    let coin_bits = p.total_coin_decl_bits();
    if coin_bits > ORACLE_COIN_BITS {
        return Err(Error::Guard(format!(
            "{coin_bits} declared coin bits exceed the {ORACLE_COIN_BITS}-bit enumeration guard"
        )));
    }
    Ok(())
}

/// Exact preimage of `o`: every input that can produce it.
pub fn oracle_preimage(p: &Program, o: &Valuation) -> Result<Vec<Valuation>> {
    check_coin_guard(p)?;
    let mut pre = Vec::new();
    for input in input_space(p)? {
        if can_output(p, &input, o)? {
            pre.push(input);
        }
    }
    Ok(pre)
}

/// A prior over input valuations. `Uniform` conditions on inputs that have at
/// least one defined run.
#[derive(Debug, Clone, Default)]
pub enum Prior {
    #[default]
    Uniform,
    Explicit(Vec<(Valuation, BigRational)>),
}

impl Prior {
    pub fn validate(&self) -> Result<()> {
        if let Prior::Explicit(entries) = self {
            let mut total = BigRational::zero();
            for (_, p) in entries {
                if p < &BigRational::zero() {
                    return Err(Error::semantic("negative prior probability"));
                }
                total += p;
            }
            if total != BigRational::one() {
                return Err(Error::semantic(format!(
                    "prior probabilities sum to {total}, expected 1"
                )));
            }
        }
        Ok(())
    }
}

/// Exact p(o) = Σ_s p(s) · p(o | s), conditioning each input on definedness
/// and restricting a uniform prior to inputs with defined runs.
pub fn oracle_output_prob(p: &Program, prior: &Prior, o: &Valuation) -> Result<BigRational> {
    check_coin_guard(p)?;
    let weighted: Vec<(Valuation, BigRational)> = match prior {
        Prior::Uniform => {
            let mut feasible = Vec::new();
            for s in input_space(p)? {
                let d = output_distribution(p, &s)?;
                if !d.defined_mass.is_zero() {
                    feasible.push((s, d));
                }
            }
            let n = BigRational::new((feasible.len() as u64).into(), 1.into());
            feasible
                .into_iter()
                .map(|(s, d)| {
                    let pr = d.prob(o) / &n;
                    (s, pr)
                })
                .collect()
        }
        Prior::Explicit(entries) => entries
            .iter()
            .map(|(s, ps)| {
                let d = output_distribution(p, s)?;
                Ok((s.clone(), ps * d.prob(o)))
            })
            .collect::<Result<_>>()?,
    };
    Ok(weighted
        .into_iter()
        .fold(BigRational::zero(), |acc, (_, pr)| acc + pr))
}

/// All outputs reachable from any input (the image of the program).
pub fn oracle_image(p: &Program) -> Result<Vec<Valuation>> {
    check_coin_guard(p)?;
    let mut out = std::collections::BTreeSet::new();
    for s in input_space(p)? {
        let d = output_distribution(p, &s)?;
        for o in d.support() {
            out.insert(o.clone());
        }
    }
    Ok(out.into_iter().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse_program;

    const EXAMPLE_1_1: &str =
        "in s:8; out o:8; local ;\nif s < 16 then o <- 8 + s else o <- 8 end";

    #[test]
    fn identity_runs() {
        let p = parse_program("in s:8; out o:8; o <- s").unwrap();
        let out = run_deterministic(&p, &valuation(&[("s", 5)])).unwrap();
        assert_eq!(out, Outcome::Out(valuation(&[("o", 5)])));
    }

    #[test]
    fn example_1_1_runs() {
        let p = parse_program(EXAMPLE_1_1).unwrap();
        let out = run_deterministic(&p, &valuation(&[("s", 3)])).unwrap();
        assert_eq!(out, Outcome::Out(valuation(&[("o", 11)])));
        let out = run_deterministic(&p, &valuation(&[("s", 200)])).unwrap();
        assert_eq!(out, Outcome::Out(valuation(&[("o", 8)])));
    }

    #[test]
    fn deterministic_distribution_is_point_mass() {
        let p = parse_program(EXAMPLE_1_1).unwrap();
        let d = output_distribution(&p, &valuation(&[("s", 3)])).unwrap();
        assert_eq!(d.weights.len(), 1);
        assert!(d.prob(&valuation(&[("o", 11)])).is_one());
    }

    #[test]
    fn fair_coin_distribution() {
        let p = parse_program("in s:1; out o:1; choice 1/2 { o <- 0 } { o <- 1 }").unwrap();
        let d = output_distribution(&p, &valuation(&[("s", 0)])).unwrap();
        assert_eq!(d.prob(&valuation(&[("o", 0)])), ratio(1, 1));
        assert_eq!(d.prob(&valuation(&[("o", 1)])), ratio(1, 1));
    }

    #[test]
    fn distribution_sums_to_one() {
        let srcs = [
            EXAMPLE_1_1,
            "in s:2; out o:2; choice 1/4 { o <- s } { choice 1/2 { o <- 0 } { o <- 3 } }",
            "in s:2; out o:2; coin c:2; o <- s + c",
        ];
        for src in srcs {
            let p = parse_program(src).unwrap();
            let d = output_distribution(&p, &valuation(&[("s", 1)])).unwrap();
            let total: BigRational = d.weights.values().cloned().sum();
            assert!(total.is_one(), "weights of {src} sum to {total}");
            assert!(d.defined_mass.is_one());
        }
    }

    #[test]
    fn coin_stream_agrees_with_branch_enumeration() {
        // every coin prefix of length k reproduces the distribution exactly
        let p = parse_program(
            "in s:1; out o:2; coin c:1; choice 1/2 { o <- c } { choice 1/2 { o <- 2 } { o <- 3 } }",
        )
        .unwrap();
        let input = valuation(&[("s", 0)]);
        let dist = output_distribution(&p, &input).unwrap();
        let k = 3; // 1 coin var bit + up to 2 choice bits
        let mut counts: BTreeMap<Valuation, u64> = BTreeMap::new();
        let mut consumed_total = 0u64;
        for bits in 0..(1u64 << k) {
            let coin_bits: Vec<bool> = (0..k).map(|i| (bits >> (k - 1 - i)) & 1 == 1).collect();
            let mut stream = CoinStream::new(&coin_bits);
            match run(&p, &input, &mut stream, DEFAULT_STEP_BUDGET).unwrap() {
                Outcome::Out(o) => {
                    *counts.entry(o).or_insert(0) += 1;
                    consumed_total += stream.consumed() as u64;
                }
                Outcome::Undefined => panic!("no assumes here"),
            }
        }
        let _ = consumed_total;
        for (o, n) in counts {
            let got = BigRational::new((n).into(), BigUint::from(1u64 << k).into());
            assert_eq!(got, dist.prob(&o), "output {o:?}");
        }
    }

    #[test]
    fn example_1_1_preimages() {
        let p = parse_program(EXAMPLE_1_1).unwrap();
        let pre9 = oracle_preimage(&p, &valuation(&[("o", 9)])).unwrap();
        assert_eq!(pre9, vec![valuation(&[("s", 1)])]);
        let pre8 = oracle_preimage(&p, &valuation(&[("o", 8)])).unwrap();
        assert_eq!(pre8.len(), 241);
        let pre200 = oracle_preimage(&p, &valuation(&[("o", 200)])).unwrap();
        assert!(pre200.is_empty());
    }

    #[test]
    fn output_probabilities() {
        let p = parse_program("in s:4; out o:4; o <- s").unwrap();
        let pr = oracle_output_prob(&p, &Prior::Uniform, &valuation(&[("o", 3)])).unwrap();
        assert_eq!(pr, BigRational::new(1.into(), 16.into()));

        let p = parse_program(EXAMPLE_1_1).unwrap();
        let pr = oracle_output_prob(&p, &Prior::Uniform, &valuation(&[("o", 8)])).unwrap();
        assert_eq!(pr, BigRational::new(241.into(), 256.into()));

        let p = parse_program("in s:1; out o:1; choice 1/2 { o <- 0 } { o <- 1 }").unwrap();
        let pr = oracle_output_prob(&p, &Prior::Uniform, &valuation(&[("o", 0)])).unwrap();
        assert_eq!(pr, BigRational::new(1.into(), 2.into()));
    }

    #[test]
    fn output_prob_sums_to_one_over_image() {
        let p = parse_program(
            "in s:2; out o:2; choice 1/4 { o <- s } { o <- 3 }",
        )
        .unwrap();
        let mut total = BigRational::zero();
        for o in oracle_image(&p).unwrap() {
            total += oracle_output_prob(&p, &Prior::Uniform, &o).unwrap();
        }
        assert!(total.is_one(), "total {total}");
    }

    #[test]
    fn step_budget_catches_divergence() {
        let p = parse_program("in s:1; out o:1; while true do o <- 0 end").unwrap();
        let err = run_deterministic(&p, &valuation(&[("s", 0)])).unwrap_err();
        assert!(matches!(err, Error::StepBudget(_)));
    }

    #[test]
    fn assume_makes_runs_undefined() {
        let p = parse_program("in s:4; out o:4; assume(s < 5); o <- s").unwrap();
        assert_eq!(
            run_deterministic(&p, &valuation(&[("s", 9)])).unwrap(),
            Outcome::Undefined
        );
        let pre = oracle_preimage(&p, &valuation(&[("o", 3)])).unwrap();
        assert_eq!(pre.len(), 1);
    }
}
