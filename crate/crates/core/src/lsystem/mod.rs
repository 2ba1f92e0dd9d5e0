//! Context-free parallel rewriting grammars and the robot genotype built on them.

mod genotype;
mod text;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Debug;

use thiserror::Error;

pub use genotype::{
    crossover, mutate, random_genotype, Genotype, GenotypeError, MutationConfig, Symbol,
    WeightGene, NON_CORE_SYMBOLS,
};
pub use text::ParseError;

/// Number of rewriting passes used to grow a robot from its axiom.
pub const DEFAULT_ITERATIONS: usize = 3;
/// Rewritten strings are cut to this many symbols.
pub const DEFAULT_MAX_SYMBOLS: usize = 30;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GrammarError {
    #[error("axiom {0} is not in the alphabet")]
    AxiomNotInAlphabet(String),
    #[error("rule head {0} is not in the alphabet")]
    HeadNotInAlphabet(String),
    #[error("rule for {head} uses {symbol}, which is not in the alphabet")]
    BodySymbolNotInAlphabet { head: String, symbol: String },
}

/// Where a rewritten symbol came from: rule head and position in that rule's body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Occurrence<S> {
    pub rule: S,
    pub position: usize,
}

/// A symbol in a rewritten string, tagged with the rule-body slot that produced it.
/// Symbols that were never replaced (the axiom, or non-replaceable symbols
/// carried over from the axiom) have no origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Traced<S> {
    pub symbol: S,
    pub origin: Option<Occurrence<S>>,
}

/// `G = (V, w, P)`: alphabet, axiom and one production per replaceable symbol.
///
/// A symbol is replaceable iff it has a rule; everything else in the
/// alphabet is copied through unchanged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grammar<S: Ord> {
    alphabet: BTreeSet<S>,
    axiom: S,
    rules: BTreeMap<S, Vec<S>>,
}

impl<S: Ord + Clone + Debug> Grammar<S> {
    pub fn new(
        alphabet: impl IntoIterator<Item = S>,
        axiom: S,
        rules: BTreeMap<S, Vec<S>>,
    ) -> Result<Self, GrammarError> {
        let alphabet: BTreeSet<S> = alphabet.into_iter().collect();
        if !alphabet.contains(&axiom) {
            return Err(GrammarError::AxiomNotInAlphabet(format!("{axiom:?}")));
        }
        for (head, body) in &rules {
            if !alphabet.contains(head) {
                return Err(GrammarError::HeadNotInAlphabet(format!("{head:?}")));
            }
            if let Some(bad) = body.iter().find(|s| !alphabet.contains(*s)) {
                return Err(GrammarError::BodySymbolNotInAlphabet {
                    head: format!("{head:?}"),
                    symbol: format!("{bad:?}"),
                });
            }
        }
        Ok(Self {
            alphabet,
            axiom,
            rules,
        })
    }

    pub fn alphabet(&self) -> &BTreeSet<S> {
        &self.alphabet
    }

    pub fn axiom(&self) -> &S {
        &self.axiom
    }

    pub fn rules(&self) -> &BTreeMap<S, Vec<S>> {
        &self.rules
    }

    pub fn rule(&self, head: &S) -> Option<&[S]> {
        self.rules.get(head).map(Vec::as_slice)
    }

    pub(crate) fn rules_mut(&mut self) -> &mut BTreeMap<S, Vec<S>> {
        &mut self.rules
    }

    /// Runs `iterations` parallel rewriting passes from the axiom, keeping at
    /// most `max_symbols` symbols (excess is dropped from the right).
    pub fn rewrite(&self, iterations: usize, max_symbols: usize) -> Vec<S> {
        self.rewrite_traced(iterations, max_symbols)
            .into_iter()
            .map(|t| t.symbol)
            .collect()
    }

    /// Same as [`Grammar::rewrite`], but remembers which rule-body slot
    /// produced each symbol.
    ///
    /// Rewriting is a string homomorphism, so cutting the string after every
    /// pass yields the same prefix as cutting once at the end.
    pub fn rewrite_traced(&self, iterations: usize, max_symbols: usize) -> Vec<Traced<S>> {
        let mut current = vec![Traced {
            symbol: self.axiom.clone(),
            origin: None,
        }];
        let mut truncated = false;
        for _ in 0..iterations {
            let mut next = Vec::with_capacity(current.len() * 2);
            for t in &current {
                if next.len() >= max_symbols {
                    truncated = true;
                    break;
                }
                match self.rules.get(&t.symbol) {
                    Some(body) => {
                        next.extend(body.iter().enumerate().map(|(position, s)| Traced {
                            symbol: s.clone(),
                            origin: Some(Occurrence {
                                rule: t.symbol.clone(),
                                position,
                            }),
                        }))
                    }
                    None => next.push(t.clone()),
                }
            }
            if next.len() > max_symbols {
                truncated = true;
                next.truncate(max_symbols);
            }
            current = next;
        }
        if current.len() > max_symbols {
            truncated = true;
            current.truncate(max_symbols);
        }
        if truncated {
            log::debug!("rewritten string truncated to {max_symbols} symbols");
        }
        current
    }
}
