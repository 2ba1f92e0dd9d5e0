//! Line-oriented genotype format:
//!
//! ```text
//! axiom: C
//! rule C: C F A
//! rule B: L B
//! rule A: A
//! weights 0: 0.125000 -0.500000 0.999999
//! ```
//!
//! Weight lines are keyed by occurrence index, the position of a module slot
//! in [`Genotype::weight_genes`] order. Values are written with six decimals.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::genotype::{Genotype, GenotypeError, Symbol, WeightGene};

#[derive(Debug, Error, PartialEq)]
pub enum ParseError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("missing axiom line")]
    MissingAxiom,
    #[error("no weights for occurrence {0}")]
    MissingWeights(usize),
    #[error("weights given for occurrence {0}, which does not exist")]
    ExtraWeights(usize),
    #[error(transparent)]
    Invalid(#[from] GenotypeError),
}

fn syntax(line: usize, message: impl Into<String>) -> ParseError {
    ParseError::Syntax {
        line,
        message: message.into(),
    }
}

impl fmt::Display for Genotype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "axiom: {}", self.grammar().axiom())?;
        for (head, body) in self.grammar().rules() {
            write!(f, "rule {head}:")?;
            for s in body {
                write!(f, " {s}")?;
            }
            writeln!(f)?;
        }
        for (i, (_, w)) in self.weight_genes().enumerate() {
            writeln!(f, "weights {i}: {:.6} {:.6} {:.6}", w[0], w[1], w[2])?;
        }
        Ok(())
    }
}

fn parse_symbol(tok: &str, line: usize) -> Result<Symbol, ParseError> {
    let mut chars = tok.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) => {
            Symbol::from_token(c).ok_or_else(|| syntax(line, format!("unknown symbol {tok:?}")))
        }
        _ => Err(syntax(line, format!("unknown symbol {tok:?}"))),
    }
}

impl FromStr for Genotype {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut axiom = None;
        let mut bodies: BTreeMap<Symbol, Vec<Symbol>> = BTreeMap::new();
        let mut weights: BTreeMap<usize, WeightGene> = BTreeMap::new();

        for (i, raw) in s.lines().enumerate() {
            let n = i + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            let (key, rest) = line
                .split_once(':')
                .ok_or_else(|| syntax(n, "expected `key: value`"))?;
            let mut key = key.split_whitespace();
            match (key.next(), key.next(), key.next()) {
                (Some("axiom"), None, _) => {
                    axiom = Some(parse_symbol(rest.trim(), n)?);
                }
                (Some("rule"), Some(head), None) => {
                    let head = parse_symbol(head, n)?;
                    let body = rest
                        .split_whitespace()
                        .map(|t| parse_symbol(t, n))
                        .collect::<Result<Vec<_>, _>>()?;
                    if bodies.insert(head, body).is_some() {
                        return Err(syntax(n, format!("duplicate rule for {head}")));
                    }
                }
                (Some("weights"), Some(idx), None) => {
                    let idx: usize = idx
                        .parse()
                        .map_err(|_| syntax(n, format!("bad occurrence index {idx:?}")))?;
                    let vals = rest
                        .split_whitespace()
                        .map(|t| t.parse::<f64>())
                        .collect::<Result<Vec<_>, _>>()
                        .map_err(|e| syntax(n, e.to_string()))?;
                    let gene: WeightGene = vals
                        .try_into()
                        .map_err(|_| syntax(n, "expected exactly three weights"))?;
                    if weights.insert(idx, gene).is_some() {
                        return Err(syntax(n, format!("duplicate weights {idx}")));
                    }
                }
                _ => return Err(syntax(n, format!("unrecognised line {line:?}"))),
            }
        }

        match axiom {
            None => return Err(ParseError::MissingAxiom),
            Some(Symbol::Core) => {}
            Some(_) => return Err(GenotypeError::AxiomNotCore.into()),
        }

        let mut next = 0usize;
        let mut rules = BTreeMap::new();
        for (head, body) in bodies {
            let mut slots = Vec::with_capacity(body.len());
            for sym in body {
                let gene = if sym.is_module() {
                    let w = weights
                        .remove(&next)
                        .ok_or(ParseError::MissingWeights(next))?;
                    next += 1;
                    Some(w)
                } else {
                    None
                };
                slots.push((sym, gene));
            }
            rules.insert(head, slots);
        }
        if let Some((&extra, _)) = weights.iter().next() {
            return Err(ParseError::ExtraWeights(extra));
        }
        Ok(Genotype::new(rules)?)
    }
}
