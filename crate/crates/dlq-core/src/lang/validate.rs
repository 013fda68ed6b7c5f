//! Semantic checks shared by the parser and programmatically built ASTs.
//!
//! Width rule: an expression evaluates at W = max(width of the assignment
//! target, widths of all variables it mentions); every constant must fit W;
//! operations wrap modulo 2^W and assignment truncates to the target width.
//! Comparisons evaluate both sides at the max width over the comparison.

use std::collections::{HashMap, HashSet};

use crate::error::{Error, Result};
use crate::lang::ast::*;

pub fn check_program(p: &Program) -> Result<()> {
    let mut widths: HashMap<&str, u32> = HashMap::new();
    for d in p.all_decls() {
        if d.width == 0 || d.width > MAX_WIDTH {
            return Err(Error::semantic(format!(
                "variable `{}` has width {}, allowed range is 1..={MAX_WIDTH}",
                d.name, d.width
            )));
        }
        if widths.insert(&d.name, d.width).is_some() {
            return Err(Error::semantic(format!(
                "duplicate declaration of `{}`",
                d.name
            )));
        }
    }
    if p.out_vars.is_empty() {
        return Err(Error::semantic("a program needs at least one output"));
    }
    let read_only: HashSet<&str> = p
        .in_vars
        .iter()
        .chain(&p.coin_vars)
        .map(|d| d.name.as_str())
        .collect();
    check_command(&p.body, &widths, &read_only)
}

fn width_of_expr(e: &Expr, widths: &HashMap<&str, u32>) -> Result<u32> {
    let mut vars = Vec::new();
    expr_vars(e, &mut vars);
    let mut w = 1;
    for v in vars {
        match widths.get(v) {
            Some(&vw) => w = w.max(vw),
            None => return Err(Error::semantic(format!("undeclared variable `{v}`"))),
        }
    }
    Ok(w)
}

fn check_expr_consts(e: &Expr, w: u32) -> Result<()> {
    match e {
        Expr::Var(_) => Ok(()),
        Expr::Const(v) => {
            if const_width(*v) > w {
                Err(Error::semantic(format!(
                    "constant {v} does not fit the {w}-bit evaluation width"
                )))
            } else {
                Ok(())
            }
        }
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::BitAnd(a, b) | Expr::BitOr(a, b)
        | Expr::BitXor(a, b) => {
            check_expr_consts(a, w)?;
            check_expr_consts(b, w)
        }
        Expr::Shl(a, k) | Expr::Shr(a, k) => {
            if *k >= w {
                return Err(Error::semantic(format!(
                    "shift amount {k} is not below the {w}-bit evaluation width"
                )));
            }
            check_expr_consts(a, w)
        }
        Expr::Mod(a, n) => {
            if *n == 0 {
                return Err(Error::semantic("modulo by zero"));
            }
            if const_width(*n) > w {
                return Err(Error::semantic(format!(
                    "modulo divisor {n} does not fit the {w}-bit evaluation width"
                )));
            }
            check_expr_consts(a, w)
        }
    }
}

fn check_cond(c: &Cond, widths: &HashMap<&str, u32>) -> Result<()> {
    match c {
        Cond::False | Cond::True => Ok(()),
        Cond::Not(x) => check_cond(x, widths),
        Cond::Or(a, b) => {
            check_cond(a, widths)?;
            check_cond(b, widths)
        }
        Cond::Lt(a, b) => {
            let w = width_of_expr(a, widths)?.max(width_of_expr(b, widths)?);
            // constants on either side may need more bits than any variable
            let w = w
                .max(max_const_width(a))
                .max(max_const_width(b))
                .min(MAX_WIDTH);
            check_expr_consts(a, w)?;
            check_expr_consts(b, w)
        }
    }
}

fn max_const_width(e: &Expr) -> u32 {
    match e {
        Expr::Var(_) => 1,
        Expr::Const(v) => const_width(*v),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::BitAnd(a, b) | Expr::BitOr(a, b)
        | Expr::BitXor(a, b) => max_const_width(a).max(max_const_width(b)),
        Expr::Shl(a, _) | Expr::Shr(a, _) => max_const_width(a),
        Expr::Mod(a, n) => max_const_width(a).max(const_width(*n)),
    }
}

fn check_command(
    c: &Command,
    widths: &HashMap<&str, u32>,
    read_only: &HashSet<&str>,
) -> Result<()> {
    match c {
        Command::Skip => Ok(()),
        Command::Assign(x, e) => {
            let Some(&tw) = widths.get(x.as_str()) else {
                return Err(Error::semantic(format!("undeclared variable `{x}`")));
            };
            if read_only.contains(x.as_str()) {
                return Err(Error::semantic(format!(
                    "variable `{x}` is not assignable (inputs and coins are read-only)"
                )));
            }
            let w = tw.max(width_of_expr(e, widths)?);
            check_expr_consts(e, w)
        }
        Command::Assume(cond) => check_cond(cond, widths),
        Command::If(cond, t, e) => {
            check_cond(cond, widths)?;
            check_command(t, widths, read_only)?;
            check_command(e, widths, read_only)
        }
        Command::Choice(r, a, b) => {
            if r.num > r.den() {
                return Err(Error::semantic(format!("choice probability {r} exceeds 1")));
            }
            check_command(a, widths, read_only)?;
            check_command(b, widths, read_only)
        }
        Command::While(cond, body) => {
            check_cond(cond, widths)?;
            check_command(body, widths, read_only)
        }
        Command::Seq(a, b) => {
            check_command(a, widths, read_only)?;
            check_command(b, widths, read_only)
        }
    }
}

/// Evaluation width for an assignment `x <- e` (also used by the evaluator
/// and the bit-blaster, which must agree with the checker).
pub(crate) fn eval_width(target_width: u32, e: &Expr, widths: &HashMap<String, u32>) -> u32 {
    let mut vars = Vec::new();
    expr_vars(e, &mut vars);
    vars.iter()
        .filter_map(|v| widths.get(*v).copied())
        .fold(target_width, |a, b| a.max(b))
}

/// Evaluation width for a comparison.
pub(crate) fn cmp_width(a: &Expr, b: &Expr, widths: &HashMap<String, u32>) -> u32 {
    let mut vars = Vec::new();
    expr_vars(a, &mut vars);
    expr_vars(b, &mut vars);
    let var_w = vars
        .iter()
        .filter_map(|v| widths.get(*v).copied())
        .fold(1, |x: u32, y| x.max(y));
    var_w
        .max(max_const_width(a))
        .max(max_const_width(b))
        .min(MAX_WIDTH)
}
