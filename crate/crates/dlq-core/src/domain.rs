//! Value domains: interval sets over program variables, and partitions of
//! input/output domains used by the decomposed counting mode.

use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A normalized union of closed integer intervals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalSet(Vec<(u64, u64)>);

impl IntervalSet {
    /// Build from arbitrary closed intervals; sorts, merges overlaps and
    /// adjacency, rejects empty input.
    pub fn new(mut intervals: Vec<(u64, u64)>) -> Result<IntervalSet> {
        intervals.retain(|(lo, hi)| lo <= hi);
        if intervals.is_empty() {
            return Err(Error::Partition("empty interval set".into()));
        }
        intervals.sort_unstable();
        let mut merged: Vec<(u64, u64)> = Vec::with_capacity(intervals.len());
        for (lo, hi) in intervals {
            match merged.last_mut() {
                Some((_, phi)) if lo <= phi.saturating_add(1) => *phi = (*phi).max(hi),
                _ => merged.push((lo, hi)),
            }
        }
        Ok(IntervalSet(merged))
    }

    pub fn single(lo: u64, hi: u64) -> Result<IntervalSet> {
        IntervalSet::new(vec![(lo, hi)])
    }

    pub fn full(width: u32) -> IntervalSet {
        IntervalSet(vec![(0, max_value(width))])
    }

    pub fn intervals(&self) -> &[(u64, u64)] {
        &self.0
    }

    pub fn contains(&self, v: u64) -> bool {
        self.0.iter().any(|&(lo, hi)| lo <= v && v <= hi)
    }

    pub fn max(&self) -> u64 {
        self.0.last().map(|&(_, hi)| hi).unwrap_or(0)
    }

    pub fn size(&self) -> BigUint {
        self.0
            .iter()
            .map(|&(lo, hi)| BigUint::from(hi - lo + 1))
            .fold(BigUint::zero(), |a, b| a + b)
    }

    pub fn intersects(&self, other: &IntervalSet) -> bool {
        // Both are sorted; a simple merge sweep suffices.
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < other.0.len() {
            let (alo, ahi) = self.0[i];
            let (blo, bhi) = other.0[j];
            if alo.max(blo) <= ahi.min(bhi) {
                return true;
            }
            if ahi < bhi {
                i += 1;
            } else {
                j += 1;
            }
        }
        false
    }

    pub fn is_full(&self, width: u32) -> bool {
        self.0.len() == 1 && self.0[0] == (0, max_value(width))
    }
}

pub fn max_value(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// A box in a tupled value domain: per-variable interval sets. Variables not
/// mentioned are unconstrained. The box denotes the product of its per-variable
/// sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ValueSet {
    pub vars: BTreeMap<String, IntervalSet>,
}

impl ValueSet {
    pub fn full() -> ValueSet {
        ValueSet::default()
    }

    pub fn with(mut self, var: &str, set: IntervalSet) -> ValueSet {
        self.vars.insert(var.to_string(), set);
        self
    }

    pub fn interval(var: &str, lo: u64, hi: u64) -> Result<ValueSet> {
        Ok(ValueSet::full().with(var, IntervalSet::single(lo, hi)?))
    }

    pub fn contains(&self, valuation: &BTreeMap<String, u64>) -> bool {
        self.vars.iter().all(|(name, set)| {
            valuation.get(name).map(|&v| set.contains(v)).unwrap_or(true)
        })
    }

    /// Resolve against a declared variable list: every variable gets an
    /// explicit interval set, bounds checked against widths.
    pub fn resolve(&self, decls: &[(String, u32)]) -> Result<Vec<(String, u32, IntervalSet)>> {
        for name in self.vars.keys() {
            if !decls.iter().any(|(n, _)| n == name) {
                return Err(Error::Partition(format!(
                    "value set mentions undeclared variable `{name}`"
                )));
            }
        }
        decls
            .iter()
            .map(|(name, width)| {
                let set = match self.vars.get(name) {
                    Some(s) => {
                        if s.max() > max_value(*width) {
                            return Err(Error::Partition(format!(
                                "interval bound {} exceeds the {width}-bit domain of `{name}`",
                                s.max()
                            )));
                        }
                        s.clone()
                    }
                    None => IntervalSet::full(*width),
                };
                Ok((name.clone(), *width, set))
            })
            .collect()
    }

    fn volume(&self, decls: &[(String, u32)]) -> Result<BigUint> {
        let mut vol = BigUint::one();
        for (_, _, set) in self.resolve(decls)? {
            vol *= set.size();
        }
        Ok(vol)
    }

    /// Two boxes are disjoint iff some variable has disjoint interval sets.
    fn disjoint(&self, other: &ValueSet, decls: &[(String, u32)]) -> Result<bool> {
        let a = self.resolve(decls)?;
        let b = other.resolve(decls)?;
        Ok(a.iter()
            .zip(b.iter())
            .any(|((_, _, sa), (_, _, sb))| !sa.intersects(sb)))
    }
}

/// A decomposition of the input and output domains into disjoint covering
/// parts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub input_parts: Vec<ValueSet>,
    pub output_parts: Vec<ValueSet>,
}

impl Partition {
    pub fn trivial() -> Partition {
        Partition {
            input_parts: vec![ValueSet::full()],
            output_parts: vec![ValueSet::full()],
        }
    }

    /// Check that parts are pairwise disjoint and jointly cover the declared
    /// domain, exactly. Disjoint boxes whose volumes sum to the domain volume
    /// form an exact cover.
    pub fn validate(
        &self,
        in_decls: &[(String, u32)],
        out_decls: &[(String, u32)],
    ) -> Result<()> {
        Self::validate_side("input", &self.input_parts, in_decls)?;
        Self::validate_side("output", &self.output_parts, out_decls)
    }

    fn validate_side(
        side: &str,
        parts: &[ValueSet],
        decls: &[(String, u32)],
    ) -> Result<()> {
        if parts.is_empty() {
            return Err(Error::Partition(format!("no {side} parts")));
        }
        let mut total = BigUint::zero();
        for (i, part) in parts.iter().enumerate() {
            total += part.volume(decls)?;
            for (j, other) in parts.iter().enumerate().skip(i + 1) {
                if !part.disjoint(other, decls)? {
                    return Err(Error::Partition(format!(
                        "{side} parts {i} and {j} overlap"
                    )));
                }
            }
        }
        let domain: BigUint = decls
            .iter()
            .map(|(_, w)| BigUint::from(max_value(*w)) + 1u32)
            .product();
        if total != domain {
            return Err(Error::Partition(format!(
                "{side} parts cover {total} of {domain} values"
            )));
        }
        Ok(())
    }

    /// Index of the unique output part containing `o`.
    pub fn output_part_of(&self, o: &BTreeMap<String, u64>) -> Result<usize> {
        self.output_parts
            .iter()
            .position(|p| p.contains(o))
            .ok_or_else(|| {
                Error::Partition("observed output is not covered by any output part".into())
            })
    }

    /// Partition file format: `{"input_parts": [[{"var","lo","hi"},…],…], "output_parts": […]}`.
    pub fn from_json(text: &str) -> Result<Partition> {
        #[derive(Deserialize)]
        struct Entry {
            var: String,
            lo: u64,
            hi: u64,
        }
        #[derive(Deserialize)]
        struct File {
            input_parts: Vec<Vec<Entry>>,
            output_parts: Vec<Vec<Entry>>,
        }
        let file: File = serde_json::from_str(text)?;
        let build = |parts: Vec<Vec<Entry>>| -> Result<Vec<ValueSet>> {
            parts
                .into_iter()
                .map(|entries| {
                    let mut grouped: BTreeMap<String, Vec<(u64, u64)>> = BTreeMap::new();
                    for e in entries {
                        grouped.entry(e.var).or_default().push((e.lo, e.hi));
                    }
                    let mut vs = ValueSet::full();
                    for (var, ivs) in grouped {
                        vs.vars.insert(var, IntervalSet::new(ivs)?);
                    }
                    Ok(vs)
                })
                .collect()
        };
        Ok(Partition {
            input_parts: build(file.input_parts)?,
            output_parts: build(file.output_parts)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decls() -> Vec<(String, u32)> {
        vec![("a".into(), 2), ("b".into(), 2)]
    }

    #[test]
    fn interval_set_normalizes() {
        let s = IntervalSet::new(vec![(3, 4), (0, 1), (2, 2)]).unwrap();
        assert_eq!(s.intervals(), &[(0, 4)]);
        assert!(IntervalSet::new(vec![(3, 1)]).is_err());
    }

    #[test]
    fn quadrant_partition_validates() {
        let half = |lo, hi| IntervalSet::new(vec![(lo, hi)]).unwrap();
        let parts = vec![
            ValueSet::full().with("a", half(0, 1)),
            ValueSet::full().with("a", half(2, 3)),
        ];
        let p = Partition {
            input_parts: parts,
            output_parts: vec![ValueSet::full()],
        };
        p.validate(&decls(), &decls()).unwrap();
    }

    #[test]
    fn overlap_and_gap_are_rejected() {
        let iv = |lo, hi| IntervalSet::new(vec![(lo, hi)]).unwrap();
        let overlap = Partition {
            input_parts: vec![
                ValueSet::full().with("a", iv(0, 2)),
                ValueSet::full().with("a", iv(2, 3)),
            ],
            output_parts: vec![ValueSet::full()],
        };
        assert!(overlap.validate(&decls(), &decls()).is_err());
        let gap = Partition {
            input_parts: vec![
                ValueSet::full().with("a", iv(0, 0)),
                ValueSet::full().with("a", iv(2, 3)),
            ],
            output_parts: vec![ValueSet::full()],
        };
        assert!(gap.validate(&decls(), &decls()).is_err());
    }

    #[test]
    fn partition_json_roundtrip() {
        let text = r#"{
            "input_parts": [
                [{"var": "a", "lo": 0, "hi": 1}],
                [{"var": "a", "lo": 2, "hi": 3}]
            ],
            "output_parts": [[]]
        }"#;
        let p = Partition::from_json(text).unwrap();
        assert_eq!(p.input_parts.len(), 2);
        p.validate(&decls(), &decls()).unwrap();
    }
}
