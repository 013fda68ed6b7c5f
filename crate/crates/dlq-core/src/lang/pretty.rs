//! Canonical textual form of a (desugared) program. Re-parsing the output of
//! [`pretty`] yields a structurally identical AST.

use std::fmt::Write;

use crate::lang::ast::*;

fn expr(e: &Expr, out: &mut String) {
    match e {
        Expr::Var(n) => out.push_str(n),
        Expr::Const(v) => {
            let _ = write!(out, "{v}");
        }
        Expr::Add(a, b) => bin(out, a, "+", b),
        Expr::Sub(a, b) => bin(out, a, "-", b),
        Expr::BitAnd(a, b) => bin(out, a, "&", b),
        Expr::BitOr(a, b) => bin(out, a, "|", b),
        Expr::BitXor(a, b) => bin(out, a, "^", b),
        Expr::Shl(a, k) => {
            out.push('(');
            expr(a, out);
            let _ = write!(out, " << {k})");
        }
        Expr::Shr(a, k) => {
            out.push('(');
            expr(a, out);
            let _ = write!(out, " >> {k})");
        }
        Expr::Mod(a, n) => {
            out.push('(');
            expr(a, out);
            let _ = write!(out, " % {n})");
        }
    }
}

fn bin(out: &mut String, a: &Expr, op: &str, b: &Expr) {
    out.push('(');
    expr(a, out);
    let _ = write!(out, " {op} ");
    expr(b, out);
    out.push(')');
}

fn cond(c: &Cond, out: &mut String) {
    match c {
        Cond::False => out.push_str("false"),
        Cond::True => out.push_str("true"),
        Cond::Not(x) => {
            out.push_str("!(");
            cond(x, out);
            out.push(')');
        }
        Cond::Or(a, b) => {
            out.push('(');
            cond(a, out);
            out.push_str(" || ");
            cond(b, out);
            out.push(')');
        }
        Cond::Lt(a, b) => {
            expr(a, out);
            out.push_str(" < ");
            expr(b, out);
        }
    }
}

fn command(c: &Command, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match c {
        Command::Seq(a, b) => {
            command(a, indent, out);
            out.push_str(";\n");
            command(b, indent, out);
        }
        Command::Skip => {
            let _ = write!(out, "{pad}skip");
        }
        Command::Assign(x, e) => {
            let _ = write!(out, "{pad}{x} <- ");
            expr(e, out);
        }
        Command::Assume(b) => {
            let _ = write!(out, "{pad}assume(");
            cond(b, out);
            out.push(')');
        }
        Command::If(b, t, e) => {
            let _ = write!(out, "{pad}if ");
            cond(b, out);
            out.push_str(" then\n");
            command(t, indent + 1, out);
            // always print the else branch so a Skip arm re-parses identically
            let _ = write!(out, "\n{pad}else\n");
            command(e, indent + 1, out);
            let _ = write!(out, "\n{pad}end");
        }
        Command::Choice(r, a, b) => {
            let _ = write!(out, "{pad}choice {} {{\n", r);
            command(a, indent + 1, out);
            let _ = write!(out, "\n{pad}}} {{\n");
            command(b, indent + 1, out);
            let _ = write!(out, "\n{pad}}}");
        }
        Command::While(b, body) => {
            let _ = write!(out, "{pad}while ");
            cond(b, out);
            out.push_str(" do\n");
            command(body, indent + 1, out);
            let _ = write!(out, "\n{pad}end");
        }
    }
}

fn decls(kw: &str, vars: &[VarDecl], out: &mut String) {
    let _ = write!(out, "{kw} ");
    for (i, d) in vars.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        let _ = write!(out, "{}:{}", d.name, d.width);
    }
    out.push_str(";\n");
}

/// Render a program as parseable source text.
pub fn pretty(p: &Program) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "program {};", p.name);
    decls("in", &p.in_vars, &mut out);
    decls("out", &p.out_vars, &mut out);
    if !p.local_vars.is_empty() {
        decls("local", &p.local_vars, &mut out);
    }
    if !p.coin_vars.is_empty() {
        decls("coin", &p.coin_vars, &mut out);
    }
    command(&p.body, 0, &mut out);
    out.push('\n');
    out
}
