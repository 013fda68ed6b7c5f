//! The analyzed language: AST, parser, pretty printer, restriction, and
//! pipeline composition.

pub mod ast;
mod parser;
mod pretty;
mod validate;

use std::collections::HashMap;

pub use ast::{Command, Cond, Dyadic, Expr, Pipeline, Program, VarDecl, MAX_WIDTH};
pub use parser::{parse_program, parse_program_named};
pub(crate) use parser::fold_expr;
pub use pretty::pretty;
pub(crate) use validate::{cmp_width, eval_width};

use crate::domain::ValueSet;
use crate::error::{Error, Result};

pub fn check_program(p: &Program) -> Result<()> {
    validate::check_program(p)
}

/// Parse a sequential composition; consecutive stage interfaces must agree
/// positionally in arity and bit widths.
pub fn parse_pipeline(sources: &[&str]) -> Result<Pipeline> {
    let stages: Vec<Program> = sources
        .iter()
        .enumerate()
        .map(|(i, src)| parse_program_named(src, &format!("stage{}", i + 1)))
        .collect::<Result<_>>()?;
    Pipeline::new(stages)
}

impl Pipeline {
    pub fn new(stages: Vec<Program>) -> Result<Pipeline> {
        if stages.is_empty() {
            return Err(Error::semantic("a pipeline needs at least one stage"));
        }
        for pair in stages.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            if a.out_vars.len() != b.in_vars.len() {
                return Err(Error::InterfaceMismatch {
                    first: a.name.clone(),
                    second: b.name.clone(),
                    detail: format!(
                        "{} outputs feed {} inputs",
                        a.out_vars.len(),
                        b.in_vars.len()
                    ),
                });
            }
            for (o, i) in a.out_vars.iter().zip(&b.in_vars) {
                if o.width != i.width {
                    return Err(Error::InterfaceMismatch {
                        first: a.name.clone(),
                        second: b.name.clone(),
                        detail: format!(
                            "output `{}` is {} bits but input `{}` is {} bits",
                            o.name, o.width, i.name, i.width
                        ),
                    });
                }
            }
        }
        Ok(Pipeline { stages })
    }

    pub fn is_deterministic(&self) -> bool {
        self.stages.iter().all(|s| s.is_deterministic())
    }

    /// Collapse into a single program: stage-local names get a `s{i}__`
    /// prefix, each stage's inputs are renamed to the previous stage's
    /// outputs, and intermediate outputs become locals.
    pub fn flatten(&self) -> Program {
        let last = self.stages.len() - 1;
        let in_vars = self.stages[0].in_vars.clone();
        let mut out_vars = Vec::new();
        let mut local_vars = Vec::new();
        let mut coin_vars = Vec::new();
        let mut body = Vec::new();

        // final output names stay unprefixed unless they collide with the
        // pipeline inputs
        let final_outs_collide = self.stages[last]
            .out_vars
            .iter()
            .any(|o| self.stages[0].in_vars.iter().any(|i| i.name == o.name));

        let mut prev_out_names: Vec<String> = Vec::new();
        for (i, stage) in self.stages.iter().enumerate() {
            let prefix = format!("s{}__", i + 1);
            let mut rename: HashMap<String, String> = HashMap::new();
            if i == 0 {
                for d in &stage.in_vars {
                    rename.insert(d.name.clone(), d.name.clone());
                }
            } else {
                for (d, prev) in stage.in_vars.iter().zip(&prev_out_names) {
                    rename.insert(d.name.clone(), prev.clone());
                }
            }
            let keep_out_names = i == last && !final_outs_collide;
            for d in &stage.out_vars {
                let new = if keep_out_names {
                    d.name.clone()
                } else {
                    format!("{prefix}{}", d.name)
                };
                rename.insert(d.name.clone(), new.clone());
                if i == last {
                    out_vars.push(VarDecl::new(new, d.width));
                } else {
                    local_vars.push(VarDecl::new(new, d.width));
                }
            }
            for d in &stage.local_vars {
                let new = format!("{prefix}{}", d.name);
                rename.insert(d.name.clone(), new.clone());
                local_vars.push(VarDecl::new(new, d.width));
            }
            for d in &stage.coin_vars {
                let new = format!("{prefix}{}", d.name);
                rename.insert(d.name.clone(), new.clone());
                coin_vars.push(VarDecl::new(new, d.width));
            }
            body.push(rename_command(&stage.body, &rename));
            prev_out_names = stage
                .out_vars
                .iter()
                .map(|d| rename[&d.name].clone())
                .collect();
        }
        // later-stage inputs alias previous-stage outputs, so they add no decls
        Program {
            name: format!("{}_flat", self.stages.iter().map(|s| s.name.as_str()).collect::<Vec<_>>().join("_")),
            in_vars,
            out_vars,
            local_vars,
            coin_vars,
            body: Command::seq(body),
        }
    }
}

fn rename_expr(e: &Expr, map: &HashMap<String, String>) -> Expr {
    match e {
        Expr::Var(n) => Expr::Var(map.get(n).cloned().unwrap_or_else(|| n.clone())),
        Expr::Const(v) => Expr::Const(*v),
        Expr::Add(a, b) => Expr::Add(
            Box::new(rename_expr(a, map)),
            Box::new(rename_expr(b, map)),
        ),
        Expr::Sub(a, b) => Expr::Sub(
            Box::new(rename_expr(a, map)),
            Box::new(rename_expr(b, map)),
        ),
        Expr::BitAnd(a, b) => Expr::BitAnd(
            Box::new(rename_expr(a, map)),
            Box::new(rename_expr(b, map)),
        ),
        Expr::BitOr(a, b) => Expr::BitOr(
            Box::new(rename_expr(a, map)),
            Box::new(rename_expr(b, map)),
        ),
        Expr::BitXor(a, b) => Expr::BitXor(
            Box::new(rename_expr(a, map)),
            Box::new(rename_expr(b, map)),
        ),
        Expr::Shl(a, k) => Expr::Shl(Box::new(rename_expr(a, map)), *k),
        Expr::Shr(a, k) => Expr::Shr(Box::new(rename_expr(a, map)), *k),
        Expr::Mod(a, n) => Expr::Mod(Box::new(rename_expr(a, map)), *n),
    }
}

fn rename_cond(c: &Cond, map: &HashMap<String, String>) -> Cond {
    match c {
        Cond::False => Cond::False,
        Cond::True => Cond::True,
        Cond::Not(x) => Cond::Not(Box::new(rename_cond(x, map))),
        Cond::Or(a, b) => Cond::Or(
            Box::new(rename_cond(a, map)),
            Box::new(rename_cond(b, map)),
        ),
        Cond::Lt(a, b) => Cond::Lt(rename_expr(a, map), rename_expr(b, map)),
    }
}

fn rename_command(c: &Command, map: &HashMap<String, String>) -> Command {
    match c {
        Command::Skip => Command::Skip,
        Command::Assign(x, e) => Command::Assign(
            map.get(x).cloned().unwrap_or_else(|| x.clone()),
            rename_expr(e, map),
        ),
        Command::Assume(b) => Command::Assume(rename_cond(b, map)),
        Command::If(b, t, e) => Command::If(
            rename_cond(b, map),
            Box::new(rename_command(t, map)),
            Box::new(rename_command(e, map)),
        ),
        Command::Choice(r, a, b) => Command::Choice(
            *r,
            Box::new(rename_command(a, map)),
            Box::new(rename_command(b, map)),
        ),
        Command::While(b, body) => Command::While(
            rename_cond(b, map),
            Box::new(rename_command(body, map)),
        ),
        Command::Seq(a, b) => Command::Seq(
            Box::new(rename_command(a, map)),
            Box::new(rename_command(b, map)),
        ),
    }
}

/// Build the membership condition `v ∈ set` for one variable.
fn membership_cond(var: &str, set: &crate::domain::IntervalSet) -> Cond {
    let ge = |lo: u64| {
        if lo == 0 {
            Cond::True
        } else {
            Cond::Not(Box::new(Cond::Lt(Expr::Var(var.into()), Expr::Const(lo))))
        }
    };
    let le = |hi: u64| Cond::Not(Box::new(Cond::Lt(Expr::Const(hi), Expr::Var(var.into()))));
    let mut acc: Option<Cond> = None;
    for &(lo, hi) in set.intervals() {
        let within = match ge(lo) {
            Cond::True => le(hi),
            g => Cond::Not(Box::new(Cond::Or(
                Box::new(Cond::Not(Box::new(g))),
                Box::new(Cond::Not(Box::new(le(hi)))),
            ))),
        };
        acc = Some(match acc {
            None => within,
            Some(prev) => Cond::Or(Box::new(prev), Box::new(within)),
        });
    }
    acc.unwrap_or(Cond::True)
}

/// Restrict a program to input values in `in_set` and output values in
/// `out_set`, realized as assume-constraints before and after the body; runs
/// outside the sets are undefined.
pub fn restrict_program(p: &Program, in_set: &ValueSet, out_set: &ValueSet) -> Result<Program> {
    let in_resolved = in_set.resolve(&p.in_decls())?;
    let out_resolved = out_set.resolve(&p.out_decls())?;

    let mut cmds = Vec::new();
    for (name, width, set) in &in_resolved {
        if !set.is_full(*width) {
            cmds.push(Command::Assume(membership_cond(name, set)));
        }
    }
    cmds.push(p.body.clone());
    for (name, width, set) in &out_resolved {
        if !set.is_full(*width) {
            cmds.push(Command::Assume(membership_cond(name, set)));
        }
    }
    Ok(Program {
        name: p.name.clone(),
        body: Command::seq(cmds),
        ..p.clone()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::IntervalSet;

    pub(crate) const IDENTITY8: &str = "in s:8; out o:8; local ; o <- s";

    #[test]
    fn parses_identity() {
        let p = parse_program(IDENTITY8).unwrap();
        assert_eq!(p.in_vars.len(), 1);
        assert_eq!(p.out_vars.len(), 1);
        assert_eq!(p.body, Command::Assign("o".into(), Expr::Var("s".into())));
    }

    #[test]
    fn parses_example_1_1_shape() {
        let src = "in s:8; out o:8; local ;\nif s < 16 then o <- 8 + s else o <- 8 end";
        let p = parse_program(src).unwrap();
        assert!(matches!(p.body, Command::If(..)));
    }

    #[test]
    fn output_reassignment_is_allowed() {
        let p = parse_program("in s:4; out o:4; local ; o <- s ; o <- s").unwrap();
        assert!(matches!(p.body, Command::Seq(..)));
    }

    #[test]
    fn rejects_input_assignment() {
        let err = parse_program("in s:4; out o:4; s <- 1").unwrap_err();
        assert!(err.to_string().contains("s"), "{err}");
    }

    #[test]
    fn rejects_undeclared_variable() {
        let err = parse_program("in s:4; out o:4; o <- t").unwrap_err();
        assert!(err.to_string().contains("t"), "{err}");
    }

    #[test]
    fn rejects_non_dyadic_probability() {
        let err = parse_program("in s:1; out o:1; choice 1/3 { o <- 0 } { o <- 1 }").unwrap_err();
        assert!(err.to_string().contains("non-dyadic"), "{err}");
    }

    #[test]
    fn rejects_oversized_constant() {
        let err = parse_program("in s:4; out o:4; o <- 300").unwrap_err();
        assert!(err.to_string().contains("fit"), "{err}");
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_program("in s:4; out o:4;\no <-").unwrap_err();
        assert!(err.to_string().contains("2:"), "{err}");
    }

    #[test]
    fn for_loops_unroll_and_arrays_lower() {
        let src = "in s:4; out o:4; local a[3]:4;\nfor i in 0..3 { a[i] <- i };\no <- a[2]";
        let p = parse_program(src).unwrap();
        assert!(p.local_vars.iter().any(|d| d.name == "a__2"));
        let text = pretty(&p);
        assert!(text.contains("a__0 <- 0"));
    }

    #[test]
    fn dynamic_index_becomes_selection_chain() {
        let src = "in s:2; out o:4; local a[4]:4;\nfor i in 0..4 { a[i] <- i };\no <- a[s]";
        let p = parse_program(src).unwrap();
        // a fresh temp carries the selected element
        assert!(p.local_vars.iter().any(|d| d.name.starts_with("__t")));
        let text = pretty(&p);
        assert!(text.contains("assume"));
    }

    #[test]
    fn pretty_roundtrip_is_structural_identity() {
        let srcs = [
            IDENTITY8,
            "in s:8; out o:8; local ;\nif s < 16 then o <- 8 + s else o <- 8 end",
            "in s:1; out o:1; choice 3/8 { o <- 0 } { o <- 1 }",
            "in s:4; out o:4; local i:4;\nwhile i < 3 do o <- o + s; i <- i + 1 end",
            "in s:4; out o:4; assume(s < 5); o <- (s & 3) ^ (s >> 1)",
        ];
        for src in srcs {
            let p = parse_program(src).unwrap();
            let again = parse_program(&pretty(&p)).unwrap();
            assert_eq!(p, again, "roundtrip failed for {src}");
        }
    }

    #[test]
    fn pipeline_interface_checking() {
        let a = "program a; in s:4; out t:4; t <- s";
        let b = "program b; in u:4; out o:4; o <- u";
        let pl = parse_pipeline(&[a, b]).unwrap();
        assert_eq!(pl.stages.len(), 2);

        let c = "program c; in u:8; out o:8; o <- u";
        let err = parse_pipeline(&[a, c]).unwrap_err();
        match err {
            Error::InterfaceMismatch { first, second, .. } => {
                assert_eq!(first, "a");
                assert_eq!(second, "c");
            }
            other => panic!("unexpected error {other}"),
        }

        let single = parse_pipeline(&[a]).unwrap();
        assert_eq!(single.stages.len(), 1);
    }

    #[test]
    fn flatten_renames_and_wires_stages() {
        let a = "program a; in s:4; out t:4; t <- s + 1";
        let b = "program b; in u:4; out o:4; o <- u + 1";
        let pl = parse_pipeline(&[a, b]).unwrap();
        let flat = pl.flatten();
        check_program(&flat).unwrap();
        assert_eq!(flat.in_vars[0].name, "s");
        assert_eq!(flat.out_vars[0].name, "o");
        assert!(flat.local_vars.iter().any(|d| d.name == "s1__t"));
    }

    #[test]
    fn restrict_rejects_out_of_range_sets() {
        let p = parse_program(IDENTITY8).unwrap();
        let too_big = ValueSet::full().with("s", IntervalSet::single(0, 300).unwrap());
        assert!(restrict_program(&p, &too_big, &ValueSet::full()).is_err());
    }

    #[test]
    fn restrict_full_domain_adds_nothing() {
        let p = parse_program(IDENTITY8).unwrap();
        let r = restrict_program(&p, &ValueSet::full(), &ValueSet::full()).unwrap();
        // body is wrapped in a Seq but contains no assumes
        assert!(!pretty(&r).contains("assume"));
    }
}
