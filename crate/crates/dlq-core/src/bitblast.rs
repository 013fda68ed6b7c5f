//! Compile a program into a CNF formula over classified variables.
//!
//! The encoding is a guarded Tseitin translation: every assignment under a
//! guard `g` multiplexes the new value against the old one, so both branches
//! of a conditional thread through a single environment. Gates are fully
//! biconditional (the circuit output is functionally determined by its
//! inputs) and hash-consed for structure sharing; constant bits fold away at
//! construction. While loops unroll to a configured bound with one guard per
//! iteration; probabilistic choices draw fresh Coin variables
//! unconditionally, so the coin space has a path-independent size and the
//! probability of an outcome is (models over Input ∪ Coin) / 2^(#In + #Coin).
//!
//! Models of the result, projected on Input ∪ Coin bits, are in bijection
//! with the (input, coin) pairs that drive the program to a defined
//! terminating run within the unroll bound; Output bits carry a dedicated
//! variable constrained equal to the final value of each output.

use std::collections::HashMap;

use crate::cnf::{CnfFormula, VarClass};
use crate::error::{Error, Result};
use crate::interp::Valuation;
use crate::lang::ast::*;
use crate::lang::{cmp_width, eval_width};

/// Loop unrolling policy.
#[derive(Debug, Clone)]
pub struct UnrollConfig {
    /// Bound applied to every while loop without a specific entry.
    pub default_bound: usize,
    /// Per-loop overrides, keyed by loop occurrence index (textual order).
    pub bounds: HashMap<usize, usize>,
    pub on_exceed: OnExceed,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OnExceed {
    /// Leave a check literal in the formula; counting entry points verify it
    /// is unsatisfiable and report an error otherwise.
    Error,
    /// Assume the loop exits at the bound (changes semantics; flagged in the
    /// formula and every downstream report).
    AssumeExit,
}

impl Default for UnrollConfig {
    fn default() -> Self {
        UnrollConfig {
            default_bound: 64,
            bounds: HashMap::new(),
            on_exceed: OnExceed::Error,
        }
    }
}

impl UnrollConfig {
    pub fn with_bound(bound: usize) -> UnrollConfig {
        UnrollConfig {
            default_bound: bound,
            ..Default::default()
        }
    }

    fn bound_for(&self, loop_index: usize) -> usize {
        self.bounds
            .get(&loop_index)
            .copied()
            .unwrap_or(self.default_bound)
            .max(1)
    }
}

/// A wire: constant or a CNF literal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Bit {
    F,
    T,
    L(i32),
}

impl Bit {
    fn not(self) -> Bit {
        match self {
            Bit::F => Bit::T,
            Bit::T => Bit::F,
            Bit::L(l) => Bit::L(-l),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Gate {
    And(i32, i32),
    Xor(i32, i32),
}

struct Blaster {
    f: CnfFormula,
    widths: HashMap<String, u32>,
    env: HashMap<String, Vec<Bit>>,
    gates: HashMap<Gate, i32>,
    loop_counter: usize,
    choice_counter: usize,
    cfg: UnrollConfig,
}

impl Blaster {
    fn fresh(&mut self, class: VarClass, origin: Option<(String, u32)>) -> i32 {
        self.f.fresh_var(class, origin) as i32
    }

    // ---- gates -----------------------------------------------------------

    fn and(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::F, _) | (_, Bit::F) => Bit::F,
            (Bit::T, x) | (x, Bit::T) => x,
            (Bit::L(x), Bit::L(y)) if x == y => a,
            (Bit::L(x), Bit::L(y)) if x == -y => Bit::F,
            (Bit::L(x), Bit::L(y)) => {
                let (x, y) = if x <= y { (x, y) } else { (y, x) };
                if let Some(&v) = self.gates.get(&Gate::And(x, y)) {
                    return Bit::L(v);
                }
                let v = self.fresh(VarClass::Aux, None);
                self.f.add_clause(vec![-v, x]);
                self.f.add_clause(vec![-v, y]);
                self.f.add_clause(vec![v, -x, -y]);
                self.gates.insert(Gate::And(x, y), v);
                Bit::L(v)
            }
        }
    }

    fn or(&mut self, a: Bit, b: Bit) -> Bit {
        self.and(a.not(), b.not()).not()
    }

    fn xor(&mut self, a: Bit, b: Bit) -> Bit {
        match (a, b) {
            (Bit::F, x) | (x, Bit::F) => x,
            (Bit::T, x) | (x, Bit::T) => x.not(),
            (Bit::L(x), Bit::L(y)) if x == y => Bit::F,
            (Bit::L(x), Bit::L(y)) if x == -y => Bit::T,
            (Bit::L(x), Bit::L(y)) => {
                // normalize to positive literals: ¬a ⊕ b == ¬(a ⊕ b)
                let mut flip = false;
                let (mut x, mut y) = (x, y);
                if x < 0 {
                    x = -x;
                    flip = !flip;
                }
                if y < 0 {
                    y = -y;
                    flip = !flip;
                }
                let (x, y) = if x <= y { (x, y) } else { (y, x) };
                let v = if let Some(&v) = self.gates.get(&Gate::Xor(x, y)) {
                    v
                } else {
                    let v = self.fresh(VarClass::Aux, None);
                    self.f.add_clause(vec![-v, x, y]);
                    self.f.add_clause(vec![-v, -x, -y]);
                    self.f.add_clause(vec![v, -x, y]);
                    self.f.add_clause(vec![v, x, -y]);
                    self.gates.insert(Gate::Xor(x, y), v);
                    v
                };
                if flip {
                    Bit::L(-v)
                } else {
                    Bit::L(v)
                }
            }
        }
    }

    fn ite(&mut self, c: Bit, t: Bit, e: Bit) -> Bit {
        match c {
            Bit::T => t,
            Bit::F => e,
            _ if t == e => t,
            _ => {
                let a = self.and(c, t);
                let b = self.and(c.not(), e);
                self.or(a, b)
            }
        }
    }

    // ---- word-level circuits ----------------------------------------------

    fn const_vec(v: u64, width: u32) -> Vec<Bit> {
        (0..width)
            .map(|i| if (v >> i) & 1 == 1 { Bit::T } else { Bit::F })
            .collect()
    }

    fn resize(bits: &[Bit], width: u32) -> Vec<Bit> {
        let mut out: Vec<Bit> = bits.iter().copied().take(width as usize).collect();
        while out.len() < width as usize {
            out.push(Bit::F);
        }
        out
    }

    fn add_vec(&mut self, a: &[Bit], b: &[Bit], carry_in: Bit) -> Vec<Bit> {
        let mut out = Vec::with_capacity(a.len());
        let mut carry = carry_in;
        for (&x, &y) in a.iter().zip(b) {
            let xy = self.xor(x, y);
            out.push(self.xor(xy, carry));
            let c1 = self.and(x, y);
            let c2 = self.and(xy, carry);
            carry = self.or(c1, c2);
        }
        out
    }

    fn sub_vec(&mut self, a: &[Bit], b: &[Bit]) -> Vec<Bit> {
        let nb: Vec<Bit> = b.iter().map(|x| x.not()).collect();
        self.add_vec(a, &nb, Bit::T)
    }

    /// Unsigned a < b.
    fn lt_vec(&mut self, a: &[Bit], b: &[Bit]) -> Bit {
        let mut lt = Bit::F;
        for (&x, &y) in a.iter().zip(b) {
            // lt' = (¬x ∧ y) ∨ ((x ↔ y) ∧ lt)
            let ylt = self.and(x.not(), y);
            let eq = self.xor(x, y).not();
            let keep = self.and(eq, lt);
            lt = self.or(ylt, keep);
        }
        lt
    }

    /// Remainder modulo a constant. Leading constant-zero bits of the
    /// operand are skipped; for operands provably a few multiples of `n`
    /// wide, a chain of conditional subtractions beats the general
    /// restoring shift-subtract ladder.
    fn mod_const(&mut self, a: &[Bit], n: u64, width: u32) -> Vec<Bit> {
        if n.is_power_of_two() {
            let k = n.trailing_zeros();
            return Self::resize(&a[..(k.min(a.len() as u32)) as usize], width);
        }
        let eff = a.iter().rposition(|&b| b != Bit::F).map_or(0, |i| i + 1);
        if eff == 0 {
            return Self::resize(&[], width);
        }
        let max_val = if eff >= 64 { u64::MAX } else { (1u64 << eff) - 1 };
        if max_val < n {
            return Self::resize(&a[..eff], width);
        }
        let quotient_bound = max_val / n;
        let m = const_width(n);
        if quotient_bound <= 4 {
            let nvec = Self::const_vec(n, eff as u32);
            let mut r: Vec<Bit> = a[..eff].to_vec();
            for _ in 0..quotient_bound {
                let ge = self.lt_vec(&r, &nvec).not();
                let diff = self.sub_vec(&r, &nvec);
                r = r
                    .iter()
                    .zip(&diff)
                    .map(|(&keep, &sub)| self.ite(ge, sub, keep))
                    .collect();
            }
            // r < n now
            return Self::resize(&r[..(m as usize).min(eff)], width);
        }
        // remainder fits m bits; r' = 2r + bit < 2n fits m + 1
        let nvec = Self::const_vec(n, m + 1);
        let mut r: Vec<Bit> = vec![Bit::F; m as usize];
        for i in (0..eff).rev() {
            let mut shifted = Vec::with_capacity((m + 1) as usize);
            shifted.push(a[i]);
            shifted.extend_from_slice(&r);
            let ge = self.lt_vec(&shifted, &nvec).not();
            let diff = self.sub_vec(&shifted, &nvec);
            let mut next = Vec::with_capacity(m as usize);
            for j in 0..m as usize {
                let v = self.ite(ge, diff[j], shifted[j]);
                next.push(v);
            }
            r = next;
        }
        Self::resize(&r, width)
    }

    fn ite_vec(&mut self, c: Bit, t: &[Bit], e: &[Bit]) -> Vec<Bit> {
        t.iter()
            .zip(e)
            .map(|(&x, &y)| self.ite(c, x, y))
            .collect()
    }

    // ---- expressions -------------------------------------------------------

    fn blast_expr(&mut self, e: &Expr, w: u32) -> Vec<Bit> {
        match e {
            Expr::Var(n) => Self::resize(&self.env[n].clone(), w),
            Expr::Const(v) => Self::const_vec(*v, w),
            Expr::Add(a, b) => {
                let va = self.blast_expr(a, w);
                let vb = self.blast_expr(b, w);
                self.add_vec(&va, &vb, Bit::F)
            }
            Expr::Sub(a, b) => {
                let va = self.blast_expr(a, w);
                let vb = self.blast_expr(b, w);
                self.sub_vec(&va, &vb)
            }
            Expr::BitAnd(a, b) => {
                let va = self.blast_expr(a, w);
                let vb = self.blast_expr(b, w);
                va.iter().zip(&vb).map(|(&x, &y)| self.and(x, y)).collect()
            }
            Expr::BitOr(a, b) => {
                let va = self.blast_expr(a, w);
                let vb = self.blast_expr(b, w);
                va.iter().zip(&vb).map(|(&x, &y)| self.or(x, y)).collect()
            }
            Expr::BitXor(a, b) => {
                let va = self.blast_expr(a, w);
                let vb = self.blast_expr(b, w);
                va.iter().zip(&vb).map(|(&x, &y)| self.xor(x, y)).collect()
            }
            Expr::Shl(a, k) => {
                let va = self.blast_expr(a, w);
                let mut out = vec![Bit::F; (*k).min(w) as usize];
                out.extend(va.iter().copied().take((w - (*k).min(w)) as usize));
                out
            }
            Expr::Shr(a, k) => {
                let va = self.blast_expr(a, w);
                let mut out: Vec<Bit> = va.iter().copied().skip(*k as usize).collect();
                while out.len() < w as usize {
                    out.push(Bit::F);
                }
                out
            }
            Expr::Mod(a, n) => {
                let va = self.blast_expr(a, w);
                self.mod_const(&va, *n, w)
            }
        }
    }

    fn blast_cond(&mut self, c: &Cond) -> Bit {
        match c {
            Cond::False => Bit::F,
            Cond::True => Bit::T,
            Cond::Not(x) => self.blast_cond(x).not(),
            Cond::Or(a, b) => {
                let va = self.blast_cond(a);
                let vb = self.blast_cond(b);
                self.or(va, vb)
            }
            Cond::Lt(a, b) => {
                let w = cmp_width(a, b, &self.widths);
                let va = self.blast_expr(a, w);
                let vb = self.blast_expr(b, w);
                self.lt_vec(&va, &vb)
            }
        }
    }

    // ---- commands ----------------------------------------------------------

    /// Emit the clause `g → b` (under the guard, b must hold).
    fn assume_under(&mut self, g: Bit, b: Bit) {
        match (g, b) {
            (Bit::F, _) | (_, Bit::T) => {}
            (g, Bit::F) => match g {
                Bit::T => self.f.add_clause(vec![]), // infeasible program
                Bit::L(l) => self.f.add_clause(vec![-l]),
                Bit::F => unreachable!(),
            },
            (Bit::T, Bit::L(l)) => self.f.add_clause(vec![l]),
            (Bit::L(gl), Bit::L(l)) => self.f.add_clause(vec![-gl, l]),
        }
    }

    fn blast_command(&mut self, c: &Command, g: Bit) -> Result<()> {
        match c {
            Command::Skip => Ok(()),
            Command::Assign(x, e) => {
                let tw = self.widths[x];
                let w = eval_width(tw, e, &self.widths);
                let bits = self.blast_expr(e, w);
                let bits = Self::resize(&bits, tw);
                let old = self.env[x].clone();
                let merged = match g {
                    Bit::T => bits,
                    _ => self.ite_vec(g, &bits, &old),
                };
                self.env.insert(x.clone(), merged);
                Ok(())
            }
            Command::Assume(b) => {
                let vb = self.blast_cond(b);
                self.assume_under(g, vb);
                Ok(())
            }
            Command::If(b, t, e) => {
                let vb = self.blast_cond(b);
                let gt = self.and(g, vb);
                self.blast_command(t, gt)?;
                let ge = self.and(g, vb.not());
                self.blast_command(e, ge)
            }
            Command::Choice(r, a, b) => {
                // coins are drawn unconditionally so the coin space has a
                // path-independent size
                let idx = self.choice_counter;
                self.choice_counter += 1;
                let k = r.log2_den;
                let coins: Vec<Bit> = (0..k)
                    .map(|i| {
                        // interp draws MSB first; bit index here is LSB-based
                        let l =
                            self.fresh(VarClass::Coin, Some((format!("__choice{idx}"), k - 1 - i)));
                        Bit::L(l)
                    })
                    .collect();
                let take = if k == 0 {
                    if r.num >= 1 {
                        Bit::T
                    } else {
                        Bit::F
                    }
                } else {
                    // `coins` was allocated MSB-first; compare LSB-first
                    let coins_lsb: Vec<Bit> = coins.into_iter().rev().collect();
                    let nvec = Self::const_vec(r.num, k + 1);
                    let padded = Self::resize(&coins_lsb, k + 1);
                    self.lt_vec(&padded, &nvec)
                };
                let ga = self.and(g, take);
                self.blast_command(a, ga)?;
                let gb = self.and(g, take.not());
                self.blast_command(b, gb)
            }
            Command::While(b, body) => {
                let idx = self.loop_counter;
                self.loop_counter += 1;
                let bound = self.cfg.bound_for(idx);
                for _ in 0..bound {
                    let vb = self.blast_cond(b);
                    let gi = self.and(g, vb);
                    self.blast_command(body, gi)?;
                }
                let vb = self.blast_cond(b);
                let exceed = self.and(g, vb);
                match (self.cfg.on_exceed, exceed) {
                    (_, Bit::F) => {}
                    (OnExceed::Error, Bit::T) => {
                        return Err(Error::UnrollInsufficient {
                            loop_index: idx,
                            bound,
                        });
                    }
                    (OnExceed::Error, Bit::L(l)) => {
                        self.f.unroll_checks.push((idx as u32, l));
                    }
                    (OnExceed::AssumeExit, e) => {
                        self.assume_under(Bit::T, e.not());
                        self.f.assume_exit_applied = true;
                    }
                }
                Ok(())
            }
            Command::Seq(a, b) => {
                self.blast_command(a, g)?;
                self.blast_command(b, g)
            }
        }
    }
}

/// Compile `p` to CNF under the given unroll configuration.
pub fn bitblast(p: &Program, cfg: &UnrollConfig) -> Result<CnfFormula> {
    crate::lang::check_program(p)?;
    let mut b = Blaster {
        f: CnfFormula::new(),
        widths: p
            .all_decls()
            .map(|d| (d.name.clone(), d.width))
            .collect(),
        env: HashMap::new(),
        gates: HashMap::new(),
        loop_counter: 0,
        choice_counter: 0,
        cfg: cfg.clone(),
    };
    for d in &p.in_vars {
        let bits: Vec<Bit> = (0..d.width)
            .map(|i| Bit::L(b.fresh(VarClass::Input, Some((d.name.clone(), i)))))
            .collect();
        b.env.insert(d.name.clone(), bits);
    }
    for d in &p.coin_vars {
        let bits: Vec<Bit> = (0..d.width)
            .map(|i| Bit::L(b.fresh(VarClass::Coin, Some((d.name.clone(), i)))))
            .collect();
        b.env.insert(d.name.clone(), bits);
    }
    for d in p.out_vars.iter().chain(&p.local_vars) {
        b.env.insert(d.name.clone(), vec![Bit::F; d.width as usize]);
    }

    b.blast_command(&p.body.clone(), Bit::T)?;

    // dedicated Output variables, constrained equal to the final values
    for d in &p.out_vars {
        let finals = b.env[&d.name].clone();
        for (i, bit) in finals.into_iter().enumerate() {
            let y = b.fresh(VarClass::Output, Some((d.name.clone(), i as u32)));
            match bit {
                Bit::T => b.f.add_clause(vec![y]),
                Bit::F => b.f.add_clause(vec![-y]),
                Bit::L(l) => {
                    b.f.add_clause(vec![-y, l]);
                    b.f.add_clause(vec![y, -l]);
                }
            }
        }
    }
    Ok(b.f)
}

/// Fix each Output bit to the observed value via unit clauses.
pub fn observe(f: &CnfFormula, out_value: &Valuation) -> Result<CnfFormula> {
    let mut g = f.clone();
    let outs = f.named_vars(VarClass::Output);
    if outs.is_empty() {
        return Err(Error::semantic("formula has no output variables"));
    }
    for (name, width) in &outs {
        let v = *out_value.get(name).ok_or_else(|| {
            Error::semantic(format!("observation is missing output `{name}`"))
        })?;
        if v > crate::domain::max_value(*width) {
            return Err(Error::semantic(format!(
                "observed value {v} does not fit the {width}-bit output `{name}` (width mismatch)"
            )));
        }
        for (i, var) in f.bits_of(VarClass::Output, name).iter().enumerate() {
            let lit = *var as i32;
            if (v >> i) & 1 == 1 {
                g.add_clause(vec![lit]);
            } else {
                g.add_clause(vec![-lit]);
            }
        }
    }
    for name in out_value.keys() {
        if !outs.iter().any(|(n, _)| n == name) {
            return Err(Error::semantic(format!(
                "observation mentions unknown output `{name}`"
            )));
        }
    }
    Ok(g)
}

pub use crate::cnf::CnfFormula as Formula;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cnf::VarClass;
    use crate::lang::parse_program;

    #[test]
    fn identity_four_bit_shape() {
        let p = parse_program("in s:4; out o:4; o <- s").unwrap();
        let f = bitblast(&p, &UnrollConfig::default()).unwrap();
        assert_eq!(f.vars_of_class(VarClass::Input).len(), 4);
        assert_eq!(f.vars_of_class(VarClass::Output).len(), 4);
        assert_eq!(f.vars_of_class(VarClass::Aux).len(), 0);
        // four biconstraints, two clauses each
        assert_eq!(f.clauses.len(), 8);
    }

    #[test]
    fn one_bit_identity_dimacs() {
        let p = parse_program("in s:1; out o:1; o <- s").unwrap();
        let f = bitblast(&p, &UnrollConfig::default()).unwrap();
        let text = f.to_dimacs();
        assert!(text.starts_with("p cnf 2 2"), "{text}");
        assert!(text.contains("c ind 1 0"), "{text}");
    }

    #[test]
    fn choice_allocates_coins() {
        let p = parse_program("in s:1; out o:1; choice 1/2 { o <- 0 } { o <- 1 }").unwrap();
        let f = bitblast(&p, &UnrollConfig::default()).unwrap();
        assert_eq!(f.vars_of_class(VarClass::Coin).len(), 1);
    }

    #[test]
    fn observe_fixes_output_bits() {
        let p = parse_program("in s:4; out o:4; o <- s").unwrap();
        let f = bitblast(&p, &UnrollConfig::default()).unwrap();
        let g = observe(&f, &crate::interp::valuation(&[("o", 3)])).unwrap();
        assert_eq!(g.clauses.len(), f.clauses.len() + 4);
        let err = observe(&f, &crate::interp::valuation(&[("o", 300)])).unwrap_err();
        assert!(err.to_string().contains("width mismatch"), "{err}");
    }

    #[test]
    fn insufficient_bound_is_detected_statically() {
        let p = parse_program("in s:1; out o:1; while true do o <- 0 end").unwrap();
        let err = bitblast(&p, &UnrollConfig::with_bound(4)).unwrap_err();
        assert!(matches!(err, Error::UnrollInsufficient { .. }));
        let f = bitblast(
            &p,
            &UnrollConfig {
                on_exceed: OnExceed::AssumeExit,
                ..UnrollConfig::with_bound(4)
            },
        )
        .unwrap();
        assert!(f.assume_exit_applied);
    }

    #[test]
    fn sufficient_bound_leaves_no_checks() {
        let p = parse_program(
            "in s:2; out o:2; local i:2; while i < 2 do o <- o + s; i <- i + 1 end",
        )
        .unwrap();
        let f = bitblast(&p, &UnrollConfig::with_bound(2)).unwrap();
        assert!(f.unroll_checks.is_empty());
    }
}
