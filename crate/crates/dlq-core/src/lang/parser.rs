//! Parser and lowering for the `.dlp` program format.
//!
//! The surface syntax supports a few conveniences beyond the core language:
//! comparison operators other than `<`, `&&`, fixed-size arrays of scalars,
//! bounded `for` loops with constant bounds, and constant multiplication.
//! All of them are desugared here: `for` loops unroll, constant-index array
//! accesses become scalars, dynamic-index accesses become selection chains
//! over fresh temporaries, and comparisons reduce to `<`, `!`, `||`.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::lang::ast::*;

// ---------------------------------------------------------------------------
// Lexer

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(u64),
    // punctuation / operators
    Semi,
    Comma,
    Colon,
    Arrow, // <-
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    DotDot,
    Lt,
    Le,
    Gt,
    Ge,
    EqEq,
    Ne,
    Bang,
    AndAnd,
    OrOr,
    Plus,
    Minus,
    Amp,
    Pipe,
    Caret,
    Shl,
    Shr,
    Percent,
    Star,
    Slash,
}

#[derive(Debug, Clone)]
struct SpannedTok {
    tok: Tok,
    line: u32,
    col: u32,
}

fn lex(src: &str) -> Result<Vec<SpannedTok>> {
    let mut toks = Vec::new();
    let mut line = 1u32;
    let mut col = 1u32;
    let bytes: Vec<char> = src.chars().collect();
    let mut i = 0usize;
    macro_rules! push {
        ($t:expr, $len:expr) => {{
            toks.push(SpannedTok { tok: $t, line, col });
            i += $len;
            col += $len as u32;
        }};
    }
    while i < bytes.len() {
        let c = bytes[i];
        let next = bytes.get(i + 1).copied();
        match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            ' ' | '\t' | '\r' => {
                i += 1;
                col += 1;
            }
            '#' => {
                while i < bytes.len() && bytes[i] != '\n' {
                    i += 1;
                }
            }
            ';' => push!(Tok::Semi, 1),
            ',' => push!(Tok::Comma, 1),
            ':' => push!(Tok::Colon, 1),
            '(' => push!(Tok::LParen, 1),
            ')' => push!(Tok::RParen, 1),
            '{' => push!(Tok::LBrace, 1),
            '}' => push!(Tok::RBrace, 1),
            '[' => push!(Tok::LBracket, 1),
            ']' => push!(Tok::RBracket, 1),
            '+' => push!(Tok::Plus, 1),
            '-' => push!(Tok::Minus, 1),
            '^' => push!(Tok::Caret, 1),
            '%' => push!(Tok::Percent, 1),
            '*' => push!(Tok::Star, 1),
            '/' => push!(Tok::Slash, 1),
            '.' if next == Some('.') => push!(Tok::DotDot, 2),
            '<' if next == Some('-') => push!(Tok::Arrow, 2),
            '<' if next == Some('<') => push!(Tok::Shl, 2),
            '<' if next == Some('=') => push!(Tok::Le, 2),
            '<' => push!(Tok::Lt, 1),
            '>' if next == Some('>') => push!(Tok::Shr, 2),
            '>' if next == Some('=') => push!(Tok::Ge, 2),
            '>' => push!(Tok::Gt, 1),
            '=' if next == Some('=') => push!(Tok::EqEq, 2),
            '!' if next == Some('=') => push!(Tok::Ne, 2),
            '!' => push!(Tok::Bang, 1),
            '&' if next == Some('&') => push!(Tok::AndAnd, 2),
            '&' => push!(Tok::Amp, 1),
            '|' if next == Some('|') => push!(Tok::OrOr, 2),
            '|' => push!(Tok::Pipe, 1),
            '0' if matches!(next, Some('x') | Some('X')) => {
                let start = i;
                i += 2;
                let hex_start = i;
                while i < bytes.len() && bytes[i].is_ascii_hexdigit() {
                    i += 1;
                }
                if i == hex_start {
                    return Err(Error::Syntax {
                        line,
                        col,
                        msg: "expected hex digits after 0x".into(),
                    });
                }
                let text: String = bytes[hex_start..i].iter().collect();
                let v = u64::from_str_radix(&text, 16).map_err(|_| Error::Syntax {
                    line,
                    col,
                    msg: format!("hex literal 0x{text} out of range"),
                })?;
                toks.push(SpannedTok { tok: Tok::Num(v), line, col });
                col += (i - start) as u32;
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                let v: u64 = text.parse().map_err(|_| Error::Syntax {
                    line,
                    col,
                    msg: format!("literal {text} out of range"),
                })?;
                toks.push(SpannedTok { tok: Tok::Num(v), line, col });
                col += (i - start) as u32;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                let text: String = bytes[start..i].iter().collect();
                toks.push(SpannedTok { tok: Tok::Ident(text), line, col });
                col += (i - start) as u32;
            }
            other => {
                return Err(Error::Syntax {
                    line,
                    col,
                    msg: format!("unexpected character `{other}`"),
                })
            }
        }
    }
    Ok(toks)
}

// ---------------------------------------------------------------------------
// Surface syntax

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BinOp {
    Add,
    Sub,
    And,
    Or,
    Xor,
    Shl,
    Shr,
    Mod,
    Mul,
}

#[derive(Debug, Clone)]
enum SExpr {
    Var(String),
    Const(u64),
    Idx(String, Box<SExpr>),
    Bin(BinOp, Box<SExpr>, Box<SExpr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone)]
enum SCond {
    True,
    False,
    Not(Box<SCond>),
    Or(Box<SCond>, Box<SCond>),
    And(Box<SCond>, Box<SCond>),
    Cmp(CmpOp, SExpr, SExpr),
}

#[derive(Debug, Clone)]
enum SStmt {
    Skip,
    Assign(String, Option<SExpr>, SExpr),
    If(SCond, Vec<SStmt>, Vec<SStmt>),
    Choice(u64, u64, Vec<SStmt>, Vec<SStmt>),
    While(SCond, Vec<SStmt>),
    For(String, u64, u64, Vec<SStmt>),
    Assume(SCond),
}

const KEYWORDS: &[&str] = &[
    "program", "in", "out", "local", "coin", "skip", "if", "then", "else", "end", "choice",
    "while", "do", "for", "assume", "true", "false",
];

struct Parser {
    toks: Vec<SpannedTok>,
    pos: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.tok)
    }

    fn here(&self) -> (u32, u32) {
        self.toks
            .get(self.pos.min(self.toks.len().saturating_sub(1)))
            .map(|t| (t.line, t.col))
            .unwrap_or((1, 1))
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        let (line, col) = self.here();
        Error::Syntax {
            line,
            col,
            msg: msg.into(),
        }
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|t| t.tok.clone());
        self.pos += 1;
        t
    }

    fn eat(&mut self, t: &Tok) -> Result<()> {
        if self.peek() == Some(t) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.err(format!("expected {t:?}, found {:?}", self.peek())))
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> Result<()> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == kw => {
                self.pos += 1;
                Ok(())
            }
            other => Err(self.err(format!("expected `{kw}`, found {other:?}"))),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(s)) if s == kw)
    }

    fn ident(&mut self) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) if !KEYWORDS.contains(&s.as_str()) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            Some(Tok::Ident(s)) => Err(self.err(format!("`{s}` is a keyword"))),
            other => Err(self.err(format!("expected identifier, found {other:?}"))),
        }
    }

    fn num(&mut self) -> Result<u64> {
        match self.peek() {
            Some(Tok::Num(v)) => {
                let v = *v;
                self.pos += 1;
                Ok(v)
            }
            other => Err(self.err(format!("expected number, found {other:?}"))),
        }
    }

    // decl := IDENT [ "[" NUM "]" ] ":" NUM
    fn decl_list(&mut self) -> Result<Vec<(String, Option<u64>, u32)>> {
        let mut out = Vec::new();
        if self.peek() == Some(&Tok::Semi) {
            return Ok(out); // empty section, e.g. `local ;`
        }
        loop {
            let name = self.ident()?;
            let count = if self.peek() == Some(&Tok::LBracket) {
                self.bump();
                let n = self.num()?;
                self.eat(&Tok::RBracket)?;
                Some(n)
            } else {
                None
            };
            self.eat(&Tok::Colon)?;
            let width = self.num()?;
            if width == 0 || width > MAX_WIDTH as u64 {
                return Err(self.err(format!("width must be in 1..={MAX_WIDTH}, got {width}")));
            }
            out.push((name, count, width as u32));
            if self.peek() == Some(&Tok::Comma) {
                self.bump();
            } else {
                break;
            }
        }
        Ok(out)
    }

    fn stmt_list(&mut self, stop: &[&str]) -> Result<Vec<SStmt>> {
        let mut stmts = Vec::new();
        loop {
            while self.peek() == Some(&Tok::Semi) {
                self.bump();
            }
            let done = match self.peek() {
                None => true,
                Some(Tok::RBrace) => true,
                Some(Tok::Ident(s)) => stop.contains(&s.as_str()),
                _ => false,
            };
            if done {
                break;
            }
            stmts.push(self.stmt(stop)?);
            match self.peek() {
                Some(Tok::Semi) => {
                    self.bump();
                }
                None | Some(Tok::RBrace) => break,
                Some(Tok::Ident(s)) if stop.contains(&s.as_str()) => break,
                other => return Err(self.err(format!("expected `;`, found {other:?}"))),
            }
        }
        Ok(stmts)
    }

    fn block_braced(&mut self) -> Result<Vec<SStmt>> {
        self.eat(&Tok::LBrace)?;
        let body = self.stmt_list(&[])?;
        self.eat(&Tok::RBrace)?;
        Ok(body)
    }

    fn stmt(&mut self, _stop: &[&str]) -> Result<SStmt> {
        if self.at_keyword("skip") {
            self.bump();
            return Ok(SStmt::Skip);
        }
        if self.at_keyword("assume") {
            self.bump();
            self.eat(&Tok::LParen)?;
            let c = self.cond()?;
            self.eat(&Tok::RParen)?;
            return Ok(SStmt::Assume(c));
        }
        if self.at_keyword("if") {
            self.bump();
            let c = self.cond()?;
            self.eat_keyword("then")?;
            let t = self.stmt_list(&["else", "end"])?;
            let e = if self.at_keyword("else") {
                self.bump();
                self.stmt_list(&["end"])?
            } else {
                Vec::new()
            };
            self.eat_keyword("end")?;
            return Ok(SStmt::If(c, t, e));
        }
        if self.at_keyword("while") {
            self.bump();
            let c = self.cond()?;
            self.eat_keyword("do")?;
            let body = self.stmt_list(&["end"])?;
            self.eat_keyword("end")?;
            return Ok(SStmt::While(c, body));
        }
        if self.at_keyword("choice") {
            self.bump();
            let num = self.num()?;
            self.eat(&Tok::Slash)?;
            let den = self.num()?;
            let c1 = self.block_braced()?;
            let c2 = self.block_braced()?;
            return Ok(SStmt::Choice(num, den, c1, c2));
        }
        if self.at_keyword("for") {
            self.bump();
            let var = self.ident()?;
            self.eat_keyword("in")?;
            let lo = self.num()?;
            self.eat(&Tok::DotDot)?;
            let hi = self.num()?;
            let body = self.block_braced()?;
            return Ok(SStmt::For(var, lo, hi, body));
        }
        // assignment
        let name = self.ident()?;
        let index = if self.peek() == Some(&Tok::LBracket) {
            self.bump();
            let e = self.expr()?;
            self.eat(&Tok::RBracket)?;
            Some(e)
        } else {
            None
        };
        self.eat(&Tok::Arrow)?;
        let rhs = self.expr()?;
        Ok(SStmt::Assign(name, index, rhs))
    }

    // cond := or-level; `||` binds loosest, then `&&`, then `!`.
    fn cond(&mut self) -> Result<SCond> {
        let mut lhs = self.cond_and()?;
        while self.peek() == Some(&Tok::OrOr) {
            self.bump();
            let rhs = self.cond_and()?;
            lhs = SCond::Or(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cond_and(&mut self) -> Result<SCond> {
        let mut lhs = self.cond_not()?;
        while self.peek() == Some(&Tok::AndAnd) {
            self.bump();
            let rhs = self.cond_not()?;
            lhs = SCond::And(Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    fn cond_not(&mut self) -> Result<SCond> {
        if self.peek() == Some(&Tok::Bang) {
            self.bump();
            return Ok(SCond::Not(Box::new(self.cond_not()?)));
        }
        self.cond_atom()
    }

    fn cond_atom(&mut self) -> Result<SCond> {
        if self.at_keyword("true") {
            self.bump();
            return Ok(SCond::True);
        }
        if self.at_keyword("false") {
            self.bump();
            return Ok(SCond::False);
        }
        // `(` is ambiguous between a parenthesized condition and the left
        // operand of a comparison; try the comparison first and backtrack.
        let mark = self.pos;
        if let Ok(cmp) = self.try_comparison() {
            return Ok(cmp);
        }
        self.pos = mark;
        if self.peek() == Some(&Tok::LParen) {
            self.bump();
            let c = self.cond()?;
            self.eat(&Tok::RParen)?;
            return Ok(c);
        }
        Err(self.err("expected condition"))
    }

    fn try_comparison(&mut self) -> Result<SCond> {
        let lhs = self.expr()?;
        let op = match self.peek() {
            Some(Tok::Lt) => CmpOp::Lt,
            Some(Tok::Le) => CmpOp::Le,
            Some(Tok::Gt) => CmpOp::Gt,
            Some(Tok::Ge) => CmpOp::Ge,
            Some(Tok::EqEq) => CmpOp::Eq,
            Some(Tok::Ne) => CmpOp::Ne,
            other => return Err(self.err(format!("expected comparison operator, found {other:?}"))),
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(SCond::Cmp(op, lhs, rhs))
    }

    // Precedence, loosest to tightest: | ^ & (<< >>) (+ -) (% *)
    fn expr(&mut self) -> Result<SExpr> {
        self.bin_level(0)
    }

    fn bin_level(&mut self, level: usize) -> Result<SExpr> {
        const LEVELS: [&[(Tok, BinOp)]; 6] = [
            &[(Tok::Pipe, BinOp::Or)],
            &[(Tok::Caret, BinOp::Xor)],
            &[(Tok::Amp, BinOp::And)],
            &[(Tok::Shl, BinOp::Shl), (Tok::Shr, BinOp::Shr)],
            &[(Tok::Plus, BinOp::Add), (Tok::Minus, BinOp::Sub)],
            &[(Tok::Percent, BinOp::Mod), (Tok::Star, BinOp::Mul)],
        ];
        if level == LEVELS.len() {
            return self.expr_atom();
        }
        let mut lhs = self.bin_level(level + 1)?;
        'outer: loop {
            for (tok, op) in LEVELS[level] {
                if self.peek() == Some(tok) {
                    self.bump();
                    let rhs = self.bin_level(level + 1)?;
                    lhs = SExpr::Bin(*op, Box::new(lhs), Box::new(rhs));
                    continue 'outer;
                }
            }
            break;
        }
        Ok(lhs)
    }

    fn expr_atom(&mut self) -> Result<SExpr> {
        match self.peek() {
            Some(Tok::Num(_)) => Ok(SExpr::Const(self.num()?)),
            Some(Tok::LParen) => {
                self.bump();
                let e = self.expr()?;
                self.eat(&Tok::RParen)?;
                Ok(e)
            }
            Some(Tok::Ident(_)) => {
                let name = self.ident()?;
                if self.peek() == Some(&Tok::LBracket) {
                    self.bump();
                    let idx = self.expr()?;
                    self.eat(&Tok::RBracket)?;
                    Ok(SExpr::Idx(name, Box::new(idx)))
                } else {
                    Ok(SExpr::Var(name))
                }
            }
            other => Err(self.err(format!("expected expression, found {other:?}"))),
        }
    }
}

// ---------------------------------------------------------------------------
// Lowering

#[derive(Clone, Copy, PartialEq, Eq)]
enum VarKind {
    Input,
    Output,
    Local,
    Coin,
}

struct Lowerer {
    widths: HashMap<String, u32>,
    kinds: HashMap<String, VarKind>,
    arrays: HashMap<String, (u64, u32)>,
    loop_env: Vec<(String, u64)>,
    temps: Vec<VarDecl>,
    temp_counter: usize,
}

fn elem_name(array: &str, idx: u64) -> String {
    format!("{array}__{idx}")
}

impl Lowerer {
    fn loop_value(&self, name: &str) -> Option<u64> {
        self.loop_env
            .iter()
            .rev()
            .find(|(n, _)| n == name)
            .map(|&(_, v)| v)
    }

    fn fresh_temp(&mut self, width: u32) -> String {
        loop {
            let name = format!("__t{}", self.temp_counter);
            self.temp_counter += 1;
            if !self.widths.contains_key(&name) {
                self.widths.insert(name.clone(), width);
                self.kinds.insert(name.clone(), VarKind::Local);
                self.temps.push(VarDecl::new(name.clone(), width));
                return name;
            }
        }
    }

    fn fold(e: Expr) -> Expr {
        use Expr::*;
        match e {
            Add(a, b) => match (Self::fold(*a), Self::fold(*b)) {
                (Const(x), Const(y)) if x.checked_add(y).is_some() => Const(x + y),
                (a, b) => Add(Box::new(a), Box::new(b)),
            },
            Sub(a, b) => match (Self::fold(*a), Self::fold(*b)) {
                (Const(x), Const(y)) if x >= y => Const(x - y),
                (a, b) => Sub(Box::new(a), Box::new(b)),
            },
            BitAnd(a, b) => match (Self::fold(*a), Self::fold(*b)) {
                (Const(x), Const(y)) => Const(x & y),
                (a, b) => BitAnd(Box::new(a), Box::new(b)),
            },
            BitOr(a, b) => match (Self::fold(*a), Self::fold(*b)) {
                (Const(x), Const(y)) => Const(x | y),
                (a, b) => BitOr(Box::new(a), Box::new(b)),
            },
            BitXor(a, b) => match (Self::fold(*a), Self::fold(*b)) {
                (Const(x), Const(y)) => Const(x ^ y),
                (a, b) => BitXor(Box::new(a), Box::new(b)),
            },
            Shl(a, k) => match Self::fold(*a) {
                Const(x) if k < 64 && (x << k) >> k == x => Const(x << k),
                a => Shl(Box::new(a), k),
            },
            Shr(a, k) => match Self::fold(*a) {
                Const(x) if k < 64 => Const(x >> k),
                a => Shr(Box::new(a), k),
            },
            Mod(a, n) => match Self::fold(*a) {
                Const(x) => Const(x % n),
                a => Mod(Box::new(a), n),
            },
            other => other,
        }
    }

    /// Lower a surface expression to a core expression plus hoisted commands
    /// (array-selection preludes). Dynamic array reads become fresh
    /// temporaries assigned by a constant-index selection chain.
    fn lower_expr(&mut self, e: &SExpr, pre: &mut Vec<Command>) -> Result<Expr> {
        let lowered = match e {
            SExpr::Const(v) => Expr::Const(*v),
            SExpr::Var(name) => {
                if let Some(v) = self.loop_value(name) {
                    Expr::Const(v)
                } else if self.arrays.contains_key(name) {
                    return Err(Error::semantic(format!(
                        "array `{name}` used without an index"
                    )));
                } else if self.widths.contains_key(name) {
                    Expr::Var(name.clone())
                } else {
                    return Err(Error::semantic(format!("undeclared variable `{name}`")));
                }
            }
            SExpr::Idx(name, idx) => {
                let &(len, width) = self.arrays.get(name).ok_or_else(|| {
                    Error::semantic(format!("`{name}` is not a declared array"))
                })?;
                let idx = Self::fold(self.lower_expr(idx, pre)?);
                match idx {
                    Expr::Const(k) => {
                        if k >= len {
                            return Err(Error::semantic(format!(
                                "index {k} out of bounds for `{name}[{len}]`"
                            )));
                        }
                        Expr::Var(elem_name(name, k))
                    }
                    idx => {
                        let t = self.fresh_temp(width);
                        pre.push(Command::Assume(Cond::Lt(
                            idx.clone(),
                            Expr::Const(len),
                        )));
                        pre.push(self.select_chain(name, len, &idx, &t));
                        Expr::Var(t)
                    }
                }
            }
            SExpr::Bin(op, a, b) => {
                let la = self.lower_expr(a, pre)?;
                let lb = self.lower_expr(b, pre)?;
                match op {
                    BinOp::Add => Expr::Add(Box::new(la), Box::new(lb)),
                    BinOp::Sub => Expr::Sub(Box::new(la), Box::new(lb)),
                    BinOp::And => Expr::BitAnd(Box::new(la), Box::new(lb)),
                    BinOp::Or => Expr::BitOr(Box::new(la), Box::new(lb)),
                    BinOp::Xor => Expr::BitXor(Box::new(la), Box::new(lb)),
                    BinOp::Shl | BinOp::Shr => {
                        let amount = match Self::fold(lb.clone()) {
                            Expr::Const(k) if k < MAX_WIDTH as u64 => k as u32,
                            Expr::Const(k) => {
                                return Err(Error::semantic(format!(
                                    "shift amount {k} is too large"
                                )))
                            }
                            _ => {
                                return Err(Error::semantic(
                                    "shift amount must be a constant".to_string(),
                                ))
                            }
                        };
                        if *op == BinOp::Shl {
                            Expr::Shl(Box::new(la), amount)
                        } else {
                            Expr::Shr(Box::new(la), amount)
                        }
                    }
                    BinOp::Mod => match Self::fold(lb.clone()) {
                        Expr::Const(0) => {
                            return Err(Error::semantic("modulo by zero".to_string()))
                        }
                        Expr::Const(n) => Expr::Mod(Box::new(la), n),
                        _ => {
                            return Err(Error::semantic(
                                "modulo divisor must be a constant".to_string(),
                            ))
                        }
                    },
                    BinOp::Mul => {
                        match (Self::fold(la), Self::fold(lb)) {
                            (Expr::Const(x), Expr::Const(y)) => {
                                let v = x.checked_mul(y).ok_or_else(|| {
                                    Error::semantic("constant multiplication overflows".to_string())
                                })?;
                                Expr::Const(v)
                            }
                            _ => {
                                return Err(Error::semantic(
                                    "multiplication is only supported between constants"
                                        .to_string(),
                                ))
                            }
                        }
                    }
                }
            }
        };
        Ok(Self::fold(lowered))
    }

    /// `if idx == 0 then t <- a__0 else if … else t <- a__{len-1} end`
    fn select_chain(&self, array: &str, len: u64, idx: &Expr, target: &str) -> Command {
        let mut chain = Command::Assign(target.to_string(), Expr::Var(elem_name(array, len - 1)));
        for k in (0..len - 1).rev() {
            chain = Command::If(
                eq_cond(idx.clone(), Expr::Const(k)),
                Box::new(Command::Assign(
                    target.to_string(),
                    Expr::Var(elem_name(array, k)),
                )),
                Box::new(chain),
            );
        }
        chain
    }

    fn store_chain(&self, array: &str, len: u64, idx: &Expr, value: &Expr) -> Command {
        let mut chain = Command::Assign(elem_name(array, len - 1), value.clone());
        for k in (0..len - 1).rev() {
            chain = Command::If(
                eq_cond(idx.clone(), Expr::Const(k)),
                Box::new(Command::Assign(elem_name(array, k), value.clone())),
                Box::new(chain),
            );
        }
        chain
    }

    fn lower_cond(&mut self, c: &SCond, pre: &mut Vec<Command>) -> Result<Cond> {
        Ok(match c {
            SCond::True => Cond::True,
            SCond::False => Cond::False,
            SCond::Not(x) => Cond::Not(Box::new(self.lower_cond(x, pre)?)),
            SCond::Or(a, b) => Cond::Or(
                Box::new(self.lower_cond(a, pre)?),
                Box::new(self.lower_cond(b, pre)?),
            ),
            SCond::And(a, b) => {
                // a && b  ≡  !(!a || !b)
                let la = self.lower_cond(a, pre)?;
                let lb = self.lower_cond(b, pre)?;
                Cond::Not(Box::new(Cond::Or(
                    Box::new(Cond::Not(Box::new(la))),
                    Box::new(Cond::Not(Box::new(lb))),
                )))
            }
            SCond::Cmp(op, a, b) => {
                let la = self.lower_expr(a, pre)?;
                let lb = self.lower_expr(b, pre)?;
                match op {
                    CmpOp::Lt => Cond::Lt(la, lb),
                    CmpOp::Gt => Cond::Lt(lb, la),
                    CmpOp::Le => Cond::Not(Box::new(Cond::Lt(lb, la))),
                    CmpOp::Ge => Cond::Not(Box::new(Cond::Lt(la, lb))),
                    CmpOp::Eq => eq_cond(la, lb),
                    CmpOp::Ne => Cond::Or(
                        Box::new(Cond::Lt(la.clone(), lb.clone())),
                        Box::new(Cond::Lt(lb, la)),
                    ),
                }
            }
        })
    }

    fn assignable(&self, name: &str) -> bool {
        matches!(
            self.kinds.get(name),
            Some(VarKind::Output) | Some(VarKind::Local)
        )
    }

    fn lower_stmts(&mut self, stmts: &[SStmt]) -> Result<Vec<Command>> {
        let mut out = Vec::new();
        for s in stmts {
            self.lower_stmt(s, &mut out)?;
        }
        Ok(out)
    }

    fn lower_stmt(&mut self, s: &SStmt, out: &mut Vec<Command>) -> Result<()> {
        match s {
            SStmt::Skip => out.push(Command::Skip),
            SStmt::Assume(c) => {
                let mut pre = Vec::new();
                let lc = self.lower_cond(c, &mut pre)?;
                out.extend(pre);
                out.push(Command::Assume(lc));
            }
            SStmt::Assign(name, None, rhs) => {
                if self.loop_value(name).is_some() {
                    return Err(Error::semantic(format!(
                        "loop variable `{name}` cannot be assigned"
                    )));
                }
                if self.arrays.contains_key(name) {
                    return Err(Error::semantic(format!(
                        "array `{name}` must be assigned through an index"
                    )));
                }
                if !self.widths.contains_key(name) {
                    return Err(Error::semantic(format!("undeclared variable `{name}`")));
                }
                if !self.assignable(name) {
                    return Err(Error::semantic(format!(
                        "variable `{name}` is not assignable (inputs and coins are read-only)"
                    )));
                }
                let mut pre = Vec::new();
                let e = self.lower_expr(rhs, &mut pre)?;
                out.extend(pre);
                out.push(Command::Assign(name.clone(), e));
            }
            SStmt::Assign(name, Some(idx), rhs) => {
                let &(len, _) = self
                    .arrays
                    .get(name)
                    .ok_or_else(|| Error::semantic(format!("`{name}` is not a declared array")))?;
                let mut pre = Vec::new();
                let idx = Self::fold(self.lower_expr(idx, &mut pre)?);
                let rhs = self.lower_expr(rhs, &mut pre)?;
                out.extend(pre);
                match idx {
                    Expr::Const(k) => {
                        if k >= len {
                            return Err(Error::semantic(format!(
                                "index {k} out of bounds for `{name}[{len}]`"
                            )));
                        }
                        let target = elem_name(name, k);
                        if !self.assignable(&target) {
                            return Err(Error::semantic(format!(
                                "variable `{target}` is not assignable (inputs and coins are read-only)"
                            )));
                        }
                        out.push(Command::Assign(target, rhs));
                    }
                    idx => {
                        if !self.assignable(&elem_name(name, 0)) {
                            return Err(Error::semantic(format!(
                                "array `{name}` is not assignable (inputs and coins are read-only)"
                            )));
                        }
                        out.push(Command::Assume(Cond::Lt(idx.clone(), Expr::Const(len))));
                        // hoist the value so each chain branch stores the same thing
                        let w = self.arrays[name].1;
                        let t = self.fresh_temp(w);
                        out.push(Command::Assign(t.clone(), rhs));
                        out.push(self.store_chain(name, len, &idx, &Expr::Var(t)));
                    }
                }
            }
            SStmt::If(c, t, e) => {
                let mut pre = Vec::new();
                let lc = self.lower_cond(c, &mut pre)?;
                out.extend(pre);
                let lt = self.lower_stmts(t)?;
                let le = self.lower_stmts(e)?;
                out.push(Command::If(
                    lc,
                    Box::new(Command::seq(lt)),
                    Box::new(Command::seq(le)),
                ));
            }
            SStmt::Choice(num, den, c1, c2) => {
                let r = Dyadic::new(*num, *den).ok_or_else(|| {
                    Error::semantic(format!(
                        "non-dyadic probability {num}/{den}: the denominator must be a power of two and num <= den"
                    ))
                })?;
                let l1 = self.lower_stmts(c1)?;
                let l2 = self.lower_stmts(c2)?;
                out.push(Command::Choice(
                    r,
                    Box::new(Command::seq(l1)),
                    Box::new(Command::seq(l2)),
                ));
            }
            SStmt::While(c, body) => {
                let mut pre = Vec::new();
                let lc = self.lower_cond(c, &mut pre)?;
                if !pre.is_empty() {
                    return Err(Error::semantic(
                        "dynamic array access in a while condition is not supported".to_string(),
                    ));
                }
                let lb = self.lower_stmts(body)?;
                out.push(Command::While(lc, Box::new(Command::seq(lb))));
            }
            SStmt::For(var, lo, hi, body) => {
                if self.widths.contains_key(var) || self.arrays.contains_key(var) {
                    return Err(Error::semantic(format!(
                        "for-loop variable `{var}` shadows a declared name"
                    )));
                }
                if self.loop_value(var).is_some() {
                    return Err(Error::semantic(format!(
                        "for-loop variable `{var}` is already in use"
                    )));
                }
                if hi < lo {
                    return Err(Error::semantic(format!("bad for range {lo}..{hi}")));
                }
                if hi - lo > 4096 {
                    return Err(Error::semantic(format!(
                        "for range {lo}..{hi} is too large to unroll"
                    )));
                }
                for k in *lo..*hi {
                    self.loop_env.push((var.clone(), k));
                    let lowered = self.lower_stmts(body)?;
                    self.loop_env.pop();
                    out.extend(lowered);
                }
            }
        }
        Ok(())
    }
}

/// Bottom-up constant folding as applied during lowering (shared with the
/// random-program generator so generated ASTs match their own reparse).
pub(crate) fn fold_expr(e: Expr) -> Expr {
    Lowerer::fold(e)
}

fn eq_cond(a: Expr, b: Expr) -> Cond {
    Cond::Not(Box::new(Cond::Or(
        Box::new(Cond::Lt(a.clone(), b.clone())),
        Box::new(Cond::Lt(b, a)),
    )))
}

// ---------------------------------------------------------------------------
// Entry points

/// Parse one program. The optional `program NAME;` header names it; otherwise
/// `default_name` is used.
pub fn parse_program_named(source: &str, default_name: &str) -> Result<Program> {
    let toks = lex(source)?;
    let mut p = Parser { toks, pos: 0 };

    let name = if p.at_keyword("program") {
        p.bump();
        let n = p.ident()?;
        p.eat(&Tok::Semi)?;
        n
    } else {
        default_name.to_string()
    };

    let mut sections: Vec<(VarKind, Vec<(String, Option<u64>, u32)>)> = Vec::new();
    let mut seen = HashSet::new();
    loop {
        let kind = if p.at_keyword("in") {
            VarKind::Input
        } else if p.at_keyword("out") {
            VarKind::Output
        } else if p.at_keyword("local") {
            VarKind::Local
        } else if p.at_keyword("coin") {
            VarKind::Coin
        } else {
            break;
        };
        let kw = match kind {
            VarKind::Input => "in",
            VarKind::Output => "out",
            VarKind::Local => "local",
            VarKind::Coin => "coin",
        };
        if !seen.insert(kw) {
            return Err(p.err(format!("duplicate `{kw}` section")));
        }
        p.bump();
        let decls = p.decl_list()?;
        p.eat(&Tok::Semi)?;
        sections.push((kind, decls));
    }
    if !seen.contains("in") || !seen.contains("out") {
        return Err(p.err("a program needs `in` and `out` declarations"));
    }

    let mut lowerer = Lowerer {
        widths: HashMap::new(),
        kinds: HashMap::new(),
        arrays: HashMap::new(),
        loop_env: Vec::new(),
        temps: Vec::new(),
        temp_counter: 0,
    };
    let mut in_vars = Vec::new();
    let mut out_vars = Vec::new();
    let mut local_vars = Vec::new();
    let mut coin_vars = Vec::new();
    for (kind, decls) in &sections {
        for (name, count, width) in decls {
            let scalar_names: Vec<String> = match count {
                None => vec![name.clone()],
                Some(len) => {
                    if *len == 0 || *len > 256 {
                        return Err(Error::semantic(format!(
                            "array `{name}` length must be in 1..=256"
                        )));
                    }
                    if lowerer.arrays.contains_key(name) || lowerer.widths.contains_key(name) {
                        return Err(Error::semantic(format!("duplicate declaration of `{name}`")));
                    }
                    lowerer.arrays.insert(name.clone(), (*len, *width));
                    (0..*len).map(|k| elem_name(name, k)).collect()
                }
            };
            for scalar in scalar_names {
                if lowerer.widths.contains_key(&scalar) || lowerer.arrays.contains_key(&scalar) {
                    return Err(Error::semantic(format!(
                        "duplicate declaration of `{scalar}`"
                    )));
                }
                lowerer.widths.insert(scalar.clone(), *width);
                lowerer.kinds.insert(scalar.clone(), *kind);
                let decl = VarDecl::new(scalar, *width);
                match kind {
                    VarKind::Input => in_vars.push(decl),
                    VarKind::Output => out_vars.push(decl),
                    VarKind::Local => local_vars.push(decl),
                    VarKind::Coin => coin_vars.push(decl),
                }
            }
        }
    }
    if out_vars.is_empty() {
        return Err(Error::semantic("a program needs at least one output"));
    }

    let stmts = p.stmt_list(&[])?;
    if p.peek().is_some() {
        return Err(p.err("trailing tokens after program body"));
    }
    let body = Command::seq(lowerer.lower_stmts(&stmts)?);
    local_vars.extend(lowerer.temps.clone());

    let prog = Program {
        name,
        in_vars,
        out_vars,
        local_vars,
        coin_vars,
        body,
    };
    super::validate::check_program(&prog)?;
    Ok(prog)
}

pub fn parse_program(source: &str) -> Result<Program> {
    parse_program_named(source, "main")
}
