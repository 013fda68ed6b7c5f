//! Dynamic information-leakage analysis for a small imperative language.
//!
//! Programs are parsed from `.dlp` text, bit-blasted to CNF over classified
//! Boolean variables, and counted with one of three interchangeable engines:
//! a projected DPLL counter (compute on demand), a reduced ordered BDD, or a
//! Decision-DNNF compiler (both construct in advance). On top of the counts
//! sit the two per-observation leakage measures and two compositional
//! methods: sequential composition (exact, lower bound, upper bound) and
//! value-domain decomposition with parallel counting.

pub mod bdd;
pub mod bitblast;
pub mod cnf;
pub mod compose;
pub mod corpus;
pub mod count;
pub mod dnnf;
pub mod domain;
pub mod error;
pub mod leakage;
pub mod interp;
pub mod lang;
mod search;

pub use error::{Error, Result};
