//! CNF formulas over classified Boolean variables, plus DIMACS interchange.
//!
//! Every variable carries a [`VarClass`] so counting engines can project onto
//! the secret inputs (or inputs plus coins) without re-deriving program
//! structure, and an optional origin `(program variable, bit index)` so
//! observations and enumerated models can be mapped back to program values.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Classification of a CNF variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
pub enum VarClass {
    /// A bit of a declared secret input variable.
    Input,
    /// A bit of a declared output variable (the dedicated final copy).
    Output,
    /// A bit of program randomness: declared coin variables and `choice` draws.
    Coin,
    /// Everything else introduced by the encoding.
    Aux,
}

impl VarClass {
    pub const ALL: [VarClass; 4] = [
        VarClass::Input,
        VarClass::Output,
        VarClass::Coin,
        VarClass::Aux,
    ];

    fn keyword(self) -> &'static str {
        match self {
            VarClass::Input => "input",
            VarClass::Output => "output",
            VarClass::Coin => "coin",
            VarClass::Aux => "aux",
        }
    }

    fn from_keyword(s: &str) -> Option<VarClass> {
        Some(match s {
            "input" => VarClass::Input,
            "output" => VarClass::Output,
            "coin" => VarClass::Coin,
            "aux" => VarClass::Aux,
            _ => None?,
        })
    }
}

/// A small set of variable classes (projection scopes).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassSet(u8);

impl ClassSet {
    pub const EMPTY: ClassSet = ClassSet(0);
    pub const INPUT: ClassSet = ClassSet(1);
    pub const INPUT_COIN: ClassSet = ClassSet(1 | 4);
    pub const ALL: ClassSet = ClassSet(0b1111);

    fn bit(class: VarClass) -> u8 {
        match class {
            VarClass::Input => 1,
            VarClass::Output => 2,
            VarClass::Coin => 4,
            VarClass::Aux => 8,
        }
    }

    pub fn of(classes: &[VarClass]) -> ClassSet {
        ClassSet(classes.iter().fold(0, |acc, &c| acc | Self::bit(c)))
    }

    pub fn contains(&self, class: VarClass) -> bool {
        self.0 & Self::bit(class) != 0
    }

    pub fn classes(&self) -> Vec<VarClass> {
        VarClass::ALL
            .iter()
            .copied()
            .filter(|&c| self.contains(c))
            .collect()
    }
}

/// A CNF formula: clauses of DIMACS-style literals (`±var`, vars start at 1),
/// one class per variable, and origins for bits of program variables.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CnfFormula {
    pub num_vars: u32,
    pub clauses: Vec<Vec<i32>>,
    /// Class of variable `v` at index `v - 1`.
    pub classes: Vec<VarClass>,
    /// `(program variable name, bit index)`, LSB = bit 0.
    pub origins: Vec<Option<(String, u32)>>,
    /// `(loop index, literal)` pairs; the literal is satisfiable exactly when
    /// that loop can still be entered after its unroll bound. See `bitblast`.
    pub unroll_checks: Vec<(u32, i32)>,
    /// True when an insufficient bound was closed off with an assumed exit.
    pub assume_exit_applied: bool,
}

impl CnfFormula {
    pub fn new() -> CnfFormula {
        CnfFormula::default()
    }

    pub fn fresh_var(&mut self, class: VarClass, origin: Option<(String, u32)>) -> u32 {
        self.num_vars += 1;
        self.classes.push(class);
        self.origins.push(origin);
        self.num_vars
    }

    pub fn add_clause(&mut self, lits: Vec<i32>) {
        debug_assert!(lits.iter().all(|&l| l != 0 && l.unsigned_abs() <= self.num_vars));
        self.clauses.push(lits);
    }

    pub fn class_of(&self, var: u32) -> VarClass {
        self.classes[(var - 1) as usize]
    }

    pub fn origin_of(&self, var: u32) -> Option<&(String, u32)> {
        self.origins[(var - 1) as usize].as_ref()
    }

    /// Variables of a class, ascending.
    pub fn vars_of_class(&self, class: VarClass) -> Vec<u32> {
        (1..=self.num_vars)
            .filter(|&v| self.class_of(v) == class)
            .collect()
    }

    pub fn vars_in(&self, set: ClassSet) -> Vec<u32> {
        (1..=self.num_vars)
            .filter(|&v| set.contains(self.class_of(v)))
            .collect()
    }

    /// Bits of one named program variable, ordered LSB first.
    pub fn bits_of(&self, class: VarClass, name: &str) -> Vec<u32> {
        let mut bits: Vec<(u32, u32)> = (1..=self.num_vars)
            .filter(|&v| self.class_of(v) == class)
            .filter_map(|v| {
                self.origin_of(v)
                    .filter(|(n, _)| n == name)
                    .map(|&(_, bit)| (bit, v))
            })
            .collect();
        bits.sort_unstable();
        bits.into_iter().map(|(_, v)| v).collect()
    }

    /// Names of program variables present in a class, with widths.
    pub fn named_vars(&self, class: VarClass) -> Vec<(String, u32)> {
        let mut widths: BTreeMap<String, u32> = BTreeMap::new();
        for v in 1..=self.num_vars {
            if self.class_of(v) == class {
                if let Some((name, bit)) = self.origin_of(v) {
                    let w = widths.entry(name.clone()).or_insert(0);
                    *w = (*w).max(bit + 1);
                }
            }
        }
        widths.into_iter().collect()
    }

    /// Decode an assignment over origin-tagged variables of `class` into
    /// `(name, value)` pairs. Missing bits default to 0.
    pub fn decode_assignment(
        &self,
        class: VarClass,
        assignment: &impl Fn(u32) -> bool,
    ) -> BTreeMap<String, u64> {
        let mut out: BTreeMap<String, u64> = BTreeMap::new();
        for (name, width) in self.named_vars(class) {
            let mut value = 0u64;
            for (i, v) in self.bits_of(class, &name).iter().enumerate() {
                if assignment(*v) {
                    value |= 1 << i;
                }
            }
            let _ = width;
            out.insert(name, value);
        }
        out
    }

    /// Serialize to DIMACS with `c ind` projection headers (the Input-class
    /// variables) and `c var` class/origin comments.
    pub fn to_dimacs(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "p cnf {} {}", self.num_vars, self.clauses.len());
        let ind = self.vars_of_class(VarClass::Input);
        for chunk in ind.chunks(10) {
            let _ = write!(s, "c ind");
            for v in chunk {
                let _ = write!(s, " {}", v);
            }
            let _ = writeln!(s, " 0");
        }
        if ind.is_empty() {
            let _ = writeln!(s, "c ind 0");
        }
        for v in 1..=self.num_vars {
            let class = self.class_of(v);
            match self.origin_of(v) {
                Some((name, bit)) => {
                    let _ = writeln!(s, "c var {} {} {}[{}]", v, class.keyword(), name, bit);
                }
                None => {
                    let _ = writeln!(s, "c var {} {}", v, class.keyword());
                }
            }
        }
        for (idx, lit) in &self.unroll_checks {
            let _ = writeln!(s, "c meta unroll-check {} {}", idx, lit);
        }
        if self.assume_exit_applied {
            let _ = writeln!(s, "c meta assume-exit");
        }
        for clause in &self.clauses {
            for lit in clause {
                let _ = write!(s, "{} ", lit);
            }
            let _ = writeln!(s, "0");
        }
        s
    }

    /// Parse DIMACS. `c ind` lines mark Input-class variables; `c var` lines
    /// override classes and attach origins. Variables mentioned nowhere
    /// default to Aux.
    pub fn from_dimacs(text: &str) -> Result<CnfFormula> {
        let mut num_vars: Option<u32> = None;
        let mut declared_clauses = 0usize;
        let mut clauses: Vec<Vec<i32>> = Vec::new();
        let mut ind_vars: Vec<u32> = Vec::new();
        let mut var_lines: Vec<(u32, VarClass, Option<(String, u32)>)> = Vec::new();
        let mut unroll_checks = Vec::new();
        let mut assume_exit_applied = false;

        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("c ind") {
                for tok in rest.split_whitespace() {
                    let v: i64 = tok
                        .parse()
                        .map_err(|_| Error::Dimacs(format!("bad c ind token `{tok}`")))?;
                    if v == 0 {
                        break;
                    }
                    ind_vars.push(v as u32);
                }
            } else if let Some(rest) = line.strip_prefix("c var ") {
                let mut it = rest.split_whitespace();
                let v: u32 = it
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Dimacs(format!("bad c var line `{line}`")))?;
                let class = it
                    .next()
                    .and_then(VarClass::from_keyword)
                    .ok_or_else(|| Error::Dimacs(format!("bad class in `{line}`")))?;
                let origin = match it.next() {
                    Some(tag) => {
                        let (name, bit) = tag
                            .split_once('[')
                            .and_then(|(n, b)| Some((n, b.strip_suffix(']')?)))
                            .ok_or_else(|| Error::Dimacs(format!("bad origin in `{line}`")))?;
                        let bit: u32 = bit
                            .parse()
                            .map_err(|_| Error::Dimacs(format!("bad bit index in `{line}`")))?;
                        Some((name.to_string(), bit))
                    }
                    None => None,
                };
                var_lines.push((v, class, origin));
            } else if let Some(rest) = line.strip_prefix("c meta ") {
                let mut it = rest.split_whitespace();
                match it.next() {
                    Some("unroll-check") => {
                        let idx: u32 = it
                            .next()
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| Error::Dimacs("bad unroll-check".into()))?;
                        let lit: i32 = it
                            .next()
                            .and_then(|t| t.parse().ok())
                            .ok_or_else(|| Error::Dimacs("bad unroll-check".into()))?;
                        unroll_checks.push((idx, lit));
                    }
                    Some("assume-exit") => assume_exit_applied = true,
                    _ => {}
                }
            } else if line.starts_with('c') {
                continue;
            } else if let Some(rest) = line.strip_prefix("p cnf") {
                let mut it = rest.split_whitespace();
                let nv: u32 = it
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Dimacs("bad p line".into()))?;
                let nc: usize = it
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| Error::Dimacs("bad p line".into()))?;
                num_vars = Some(nv);
                declared_clauses = nc;
            } else {
                let mut clause = Vec::new();
                for tok in line.split_whitespace() {
                    let lit: i32 = tok
                        .parse()
                        .map_err(|_| Error::Dimacs(format!("bad literal `{tok}`")))?;
                    if lit == 0 {
                        break;
                    }
                    clause.push(lit);
                }
                clauses.push(clause);
            }
        }

        let num_vars = num_vars.ok_or_else(|| Error::Dimacs("missing p cnf header".into()))?;
        if clauses.len() != declared_clauses {
            return Err(Error::Dimacs(format!(
                "clause count mismatch: header says {declared_clauses}, found {}",
                clauses.len()
            )));
        }
        let mut classes = vec![VarClass::Aux; num_vars as usize];
        let mut origins = vec![None; num_vars as usize];
        for v in ind_vars {
            if v == 0 || v > num_vars {
                return Err(Error::Dimacs(format!("c ind variable {v} out of range")));
            }
            classes[(v - 1) as usize] = VarClass::Input;
        }
        for (v, class, origin) in var_lines {
            if v == 0 || v > num_vars {
                return Err(Error::Dimacs(format!("c var variable {v} out of range")));
            }
            classes[(v - 1) as usize] = class;
            origins[(v - 1) as usize] = origin;
        }
        for clause in &clauses {
            for &lit in clause {
                if lit.unsigned_abs() > num_vars {
                    return Err(Error::Dimacs(format!("literal {lit} out of range")));
                }
            }
        }
        Ok(CnfFormula {
            num_vars,
            clauses,
            classes,
            origins,
            unroll_checks,
            assume_exit_applied,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_formula_exports_p_line() {
        let f = CnfFormula::new();
        let text = f.to_dimacs();
        assert!(text.starts_with("p cnf 0 0"));
    }

    #[test]
    fn roundtrip_preserves_everything() {
        let mut f = CnfFormula::new();
        let x = f.fresh_var(VarClass::Input, Some(("s".into(), 0)));
        let y = f.fresh_var(VarClass::Output, Some(("o".into(), 0)));
        let z = f.fresh_var(VarClass::Aux, None);
        let c = f.fresh_var(VarClass::Coin, Some(("$choice0".into(), 0)));
        f.add_clause(vec![-(x as i32), y as i32]);
        f.add_clause(vec![x as i32, -(y as i32)]);
        f.add_clause(vec![z as i32, c as i32]);
        f.unroll_checks.push((0, z as i32));
        let again = CnfFormula::from_dimacs(&f.to_dimacs()).unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn bits_are_lsb_first() {
        let mut f = CnfFormula::new();
        let b1 = f.fresh_var(VarClass::Input, Some(("s".into(), 1)));
        let b0 = f.fresh_var(VarClass::Input, Some(("s".into(), 0)));
        assert_eq!(f.bits_of(VarClass::Input, "s"), vec![b0, b1]);
    }

    #[test]
    fn rejects_clause_header_mismatch() {
        let text = "p cnf 2 2\n1 0\n";
        assert!(CnfFormula::from_dimacs(text).is_err());
    }
}
