//! Co-safe LTL requests: parsing, reference semantics on finite words, and
//! compilation to minimal total DFAs with absorbing accepting states.
//!
//! Concrete syntax: atoms are identifiers, operators are `!` (on atoms
//! only), `&`, `|`, `X` (next), `U` (until), `F` (eventually), with
//! parentheses. `X`, `U`, and `F` are reserved words, so they cannot be
//! used as atom names.

mod dfa;
mod oracle;
mod parser;

pub use dfa::{to_dfa, Dfa};
pub use oracle::semantic_oracle;
pub use parser::parse;

use std::fmt;

use thiserror::Error;

/// Largest atom count for which DFA construction is supported; the
/// transition table is explicit over `2^atoms` input symbols.
pub const MAX_ATOMS: usize = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormulaError {
    #[error("syntax error at offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("negation at offset {pos} applies to a compound formula; `!` is only allowed on atoms")]
    Negation { pos: usize },
    #[error("formula uses {0} atoms, more than the supported {MAX_ATOMS}")]
    TooManyAtoms(usize),
    #[error("formula is too large for automaton construction")]
    TooComplex,
}

/// Abstract syntax of a co-safe LTL formula. Negation appears only on
/// atoms, which is what keeps every satisfying behavior witnessed by a
/// finite prefix.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Formula {
    Atom(String),
    NotAtom(String),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Formula {
        Formula::Atom(name.into())
    }

    pub fn not_atom(name: impl Into<String>) -> Formula {
        Formula::NotAtom(name.into())
    }

    pub fn and(l: Formula, r: Formula) -> Formula {
        Formula::And(Box::new(l), Box::new(r))
    }

    pub fn or(l: Formula, r: Formula) -> Formula {
        Formula::Or(Box::new(l), Box::new(r))
    }

    pub fn next(f: Formula) -> Formula {
        Formula::Next(Box::new(f))
    }

    pub fn until(l: Formula, r: Formula) -> Formula {
        Formula::Until(Box::new(l), Box::new(r))
    }

    pub fn eventually(f: Formula) -> Formula {
        Formula::Eventually(Box::new(f))
    }

    /// Sorted, deduplicated atom names.
    pub fn atoms(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.collect_atoms(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_atoms(&self, out: &mut Vec<String>) {
        match self {
            Formula::Atom(a) | Formula::NotAtom(a) => out.push(a.clone()),
            Formula::And(l, r) | Formula::Or(l, r) | Formula::Until(l, r) => {
                l.collect_atoms(out);
                r.collect_atoms(out);
            }
            Formula::Next(f) | Formula::Eventually(f) => f.collect_atoms(out),
        }
    }
}

// Binding strength, loosest first: U < | < & < unary. `U` associates to
// the right.
fn fmt_prec(f: &Formula, min: u8, out: &mut fmt::Formatter<'_>) -> fmt::Result {
    let own = match f {
        Formula::Until(..) => 1,
        Formula::Or(..) => 2,
        Formula::And(..) => 3,
        _ => 4,
    };
    if own < min {
        write!(out, "(")?;
    }
    match f {
        Formula::Atom(a) => write!(out, "{a}")?,
        Formula::NotAtom(a) => write!(out, "!{a}")?,
        Formula::And(l, r) => {
            fmt_prec(l, 3, out)?;
            write!(out, " & ")?;
            fmt_prec(r, 4, out)?;
        }
        Formula::Or(l, r) => {
            fmt_prec(l, 2, out)?;
            write!(out, " | ")?;
            fmt_prec(r, 3, out)?;
        }
        Formula::Until(l, r) => {
            fmt_prec(l, 2, out)?;
            write!(out, " U ")?;
            fmt_prec(r, 1, out)?;
        }
        Formula::Next(g) => {
            write!(out, "X ")?;
            fmt_prec(g, 4, out)?;
        }
        Formula::Eventually(g) => {
            write!(out, "F ")?;
            fmt_prec(g, 4, out)?;
        }
    }
    if own < min {
        write!(out, ")")?;
    }
    Ok(())
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_prec(self, 0, f)
    }
}
