//! Abstract syntax of the analyzed language.
//!
//! The core is deliberately small: naturals with `+` and `<`, conditionals,
//! a dyadic probabilistic choice, while loops and sequencing. The extended
//! operators (`-`, `&`, `|`, `^`, shifts by constants, `%` by a constant)
//! exist because the benchmark programs need them; they evaluate with the
//! same fixed-width wraparound semantics and bit-blast directly. Comparison
//! sugar (`==`, `<=`, …) and bounded `for` loops are desugared by the parser
//! and never reach this AST.

use std::fmt;

pub const MAX_WIDTH: u32 = 32;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Var(String),
    Const(u64),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    BitAnd(Box<Expr>, Box<Expr>),
    BitOr(Box<Expr>, Box<Expr>),
    BitXor(Box<Expr>, Box<Expr>),
    /// Left shift by a constant amount.
    Shl(Box<Expr>, u32),
    /// Logical right shift by a constant amount.
    Shr(Box<Expr>, u32),
    /// Remainder modulo a constant (n ≥ 1).
    Mod(Box<Expr>, u64),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Cond {
    False,
    True,
    Not(Box<Cond>),
    Or(Box<Cond>, Box<Cond>),
    Lt(Expr, Expr),
}

/// A dyadic rational m / 2^k in [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Dyadic {
    pub num: u64,
    pub log2_den: u32,
}

impl Dyadic {
    /// Normalize an m/d rational; `d` must be a power of two and m ≤ d.
    pub fn new(num: u64, den: u64) -> Option<Dyadic> {
        if den == 0 || !den.is_power_of_two() || num > den {
            return None;
        }
        let mut num = num;
        let mut k = den.trailing_zeros();
        while k > 0 && num % 2 == 0 {
            num /= 2;
            k -= 1;
        }
        Some(Dyadic { num, log2_den: k })
    }

    pub fn den(&self) -> u64 {
        1u64 << self.log2_den
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.num, self.den())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Command {
    Skip,
    Assign(String, Expr),
    If(Cond, Box<Command>, Box<Command>),
    Choice(Dyadic, Box<Command>, Box<Command>),
    While(Cond, Box<Command>),
    Seq(Box<Command>, Box<Command>),
    /// Restriction construct: a failing assumption makes the run undefined.
    Assume(Cond),
}

impl Command {
    pub fn seq(cmds: Vec<Command>) -> Command {
        let mut it = cmds.into_iter().rev();
        match it.next() {
            None => Command::Skip,
            Some(last) => it.fold(last, |acc, c| Command::Seq(Box::new(c), Box::new(acc))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarDecl {
    pub name: String,
    pub width: u32,
}

impl VarDecl {
    pub fn new(name: impl Into<String>, width: u32) -> VarDecl {
        VarDecl {
            name: name.into(),
            width,
        }
    }
}

/// A single program: declared inputs, outputs, locals, coins, and a body.
/// Input variables are never assigned; coin variables hold fresh uniform
/// random bits drawn before the body runs and are never assigned either.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Program {
    pub name: String,
    pub in_vars: Vec<VarDecl>,
    pub out_vars: Vec<VarDecl>,
    pub local_vars: Vec<VarDecl>,
    pub coin_vars: Vec<VarDecl>,
    pub body: Command,
}

impl Program {
    pub fn width_of(&self, name: &str) -> Option<u32> {
        self.all_decls().find(|d| d.name == name).map(|d| d.width)
    }

    pub fn all_decls(&self) -> impl Iterator<Item = &VarDecl> {
        self.in_vars
            .iter()
            .chain(&self.out_vars)
            .chain(&self.local_vars)
            .chain(&self.coin_vars)
    }

    pub fn in_decls(&self) -> Vec<(String, u32)> {
        self.in_vars.iter().map(|d| (d.name.clone(), d.width)).collect()
    }

    pub fn out_decls(&self) -> Vec<(String, u32)> {
        self.out_vars.iter().map(|d| (d.name.clone(), d.width)).collect()
    }

    pub fn total_input_bits(&self) -> u32 {
        self.in_vars.iter().map(|d| d.width).sum()
    }

    pub fn total_coin_decl_bits(&self) -> u32 {
        self.coin_vars.iter().map(|d| d.width).sum()
    }

    /// True when the program has no probabilistic construct at all.
    pub fn is_deterministic(&self) -> bool {
        fn cmd_det(c: &Command) -> bool {
            match c {
                Command::Skip | Command::Assign(..) | Command::Assume(..) => true,
                Command::If(_, t, e) => cmd_det(t) && cmd_det(e),
                Command::Choice(..) => false,
                Command::While(_, b) => cmd_det(b),
                Command::Seq(a, b) => cmd_det(a) && cmd_det(b),
            }
        }
        self.coin_vars.is_empty() && cmd_det(&self.body)
    }
}

/// A sequential composition of programs; consecutive interfaces must agree
/// positionally in arity and widths.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pipeline {
    pub stages: Vec<Program>,
}

pub(crate) fn expr_vars<'a>(e: &'a Expr, out: &mut Vec<&'a str>) {
    match e {
        Expr::Var(n) => out.push(n),
        Expr::Const(_) => {}
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::BitAnd(a, b) | Expr::BitOr(a, b)
        | Expr::BitXor(a, b) => {
            expr_vars(a, out);
            expr_vars(b, out);
        }
        Expr::Shl(a, _) | Expr::Shr(a, _) | Expr::Mod(a, _) => expr_vars(a, out),
    }
}

pub(crate) fn cond_vars<'a>(c: &'a Cond, out: &mut Vec<&'a str>) {
    match c {
        Cond::False | Cond::True => {}
        Cond::Not(x) => cond_vars(x, out),
        Cond::Or(a, b) => {
            cond_vars(a, out);
            cond_vars(b, out);
        }
        Cond::Lt(a, b) => {
            expr_vars(a, out);
            expr_vars(b, out);
        }
    }
}

/// Smallest number of bits able to hold `v` (at least 1).
pub(crate) fn const_width(v: u64) -> u32 {
    (64 - v.leading_zeros()).max(1)
}
