use std::collections::BTreeMap;
use std::fmt;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Grammar, Occurrence, Traced};

/// Robot alphabet: three module symbols and four cursor commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Core,
    Brick,
    Hinge,
    MountFront,
    MountLeft,
    MountRight,
    Back,
}

impl Symbol {
    pub const ALL: [Symbol; 7] = [
        Symbol::Core,
        Symbol::Brick,
        Symbol::Hinge,
        Symbol::MountFront,
        Symbol::MountLeft,
        Symbol::MountRight,
        Symbol::Back,
    ];

    pub const MODULES: [Symbol; 3] = [Symbol::Core, Symbol::Brick, Symbol::Hinge];

    pub fn is_module(self) -> bool {
        matches!(self, Symbol::Core | Symbol::Brick | Symbol::Hinge)
    }

    pub fn token(self) -> char {
        match self {
            Symbol::Core => 'C',
            Symbol::Brick => 'B',
            Symbol::Hinge => 'A',
            Symbol::MountFront => 'F',
            Symbol::MountLeft => 'L',
            Symbol::MountRight => 'R',
            Symbol::Back => '<',
        }
    }

    pub fn from_token(c: char) -> Option<Symbol> {
        Symbol::ALL.into_iter().find(|s| s.token() == c)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.token())
    }
}

/// Symbols that may appear anywhere in a rule body. The core only ever
/// appears as the first symbol of its own rule.
pub const NON_CORE_SYMBOLS: [Symbol; 6] = [
    Symbol::Brick,
    Symbol::Hinge,
    Symbol::MountFront,
    Symbol::MountLeft,
    Symbol::MountRight,
    Symbol::Back,
];

/// Oscillator weights `(w_xy, w_yx, w_out)` attached to one module slot.
pub type WeightGene = [f64; 3];

#[derive(Debug, Error, PartialEq)]
pub enum GenotypeError {
    #[error("axiom must be the core symbol")]
    AxiomNotCore,
    #[error("missing rule for module symbol {0}")]
    MissingRule(Symbol),
    #[error("rule for {0} is not a module symbol")]
    UnexpectedRule(Symbol),
    #[error("rule for {0} has an empty body")]
    EmptyRule(Symbol),
    #[error("core rule must start with the core symbol, and no other rule may contain it")]
    MisplacedCore,
    #[error("weight genes for rule {0} do not line up with its module symbols")]
    GeneLayout(Symbol),
    #[error("weight gene {0:?} is outside [-1, 1]")]
    WeightOutOfRange(WeightGene),
}

/// Heritable unit: an L-system over the robot alphabet plus one weight gene
/// per module-producing slot in the rule bodies.
#[derive(Debug, Clone, PartialEq)]
pub struct Genotype {
    grammar: Grammar<Symbol>,
    genes: BTreeMap<Symbol, Vec<Option<WeightGene>>>,
}

impl Genotype {
    /// `rules` carries each body as `(symbol, gene)` pairs; module symbols
    /// need a gene and command symbols must not have one.
    pub fn new(
        rules: BTreeMap<Symbol, Vec<(Symbol, Option<WeightGene>)>>,
    ) -> Result<Self, GenotypeError> {
        let mut bodies = BTreeMap::new();
        let mut genes = BTreeMap::new();
        for (head, body) in rules {
            let (syms, gs): (Vec<_>, Vec<_>) = body.into_iter().unzip();
            bodies.insert(head, syms);
            genes.insert(head, gs);
        }
        let grammar = Grammar::new(Symbol::ALL, Symbol::Core, bodies)
            .expect("robot alphabet is closed under rules");
        let g = Self { grammar, genes };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GenotypeError> {
        if *self.grammar.axiom() != Symbol::Core {
            return Err(GenotypeError::AxiomNotCore);
        }
        for head in self.grammar.rules().keys() {
            if !head.is_module() {
                return Err(GenotypeError::UnexpectedRule(*head));
            }
        }
        for head in Symbol::MODULES {
            let body = self
                .grammar
                .rule(&head)
                .ok_or(GenotypeError::MissingRule(head))?;
            if body.is_empty() {
                return Err(GenotypeError::EmptyRule(head));
            }
            let core_ok = body
                .iter()
                .enumerate()
                .all(|(i, s)| (*s == Symbol::Core) == (head == Symbol::Core && i == 0));
            if !core_ok {
                return Err(GenotypeError::MisplacedCore);
            }
            let genes = self
                .genes
                .get(&head)
                .ok_or(GenotypeError::GeneLayout(head))?;
            if genes.len() != body.len() {
                return Err(GenotypeError::GeneLayout(head));
            }
            for (s, g) in body.iter().zip(genes) {
                match g {
                    Some(w) if s.is_module() => {
                        if !w.iter().all(|v| v.is_finite() && (-1.0..=1.0).contains(v)) {
                            return Err(GenotypeError::WeightOutOfRange(*w));
                        }
                    }
                    None if !s.is_module() => {}
                    _ => return Err(GenotypeError::GeneLayout(head)),
                }
            }
        }
        if self.genes.len() != Symbol::MODULES.len() {
            return Err(GenotypeError::GeneLayout(Symbol::Core));
        }
        Ok(())
    }

    pub fn grammar(&self) -> &Grammar<Symbol> {
        &self.grammar
    }

    pub fn rule(&self, head: Symbol) -> &[Symbol] {
        self.grammar.rule(&head).unwrap_or(&[])
    }

    pub fn rule_genes(&self, head: Symbol) -> &[Option<WeightGene>] {
        self.genes.get(&head).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn weight_gene(&self, at: Occurrence<Symbol>) -> Option<&WeightGene> {
        self.genes.get(&at.rule)?.get(at.position)?.as_ref()
    }

    /// All weight genes in occurrence order: rules by symbol, then by
    /// position within the body.
    pub fn weight_genes(&self) -> impl Iterator<Item = (Occurrence<Symbol>, &WeightGene)> {
        self.genes.iter().flat_map(|(rule, gs)| {
            gs.iter().enumerate().filter_map(move |(position, g)| {
                g.as_ref().map(|w| {
                    (
                        Occurrence {
                            rule: *rule,
                            position,
                        },
                        w,
                    )
                })
            })
        })
    }

    /// Rewrites the axiom into the module/command string that the body
    /// decoder walks.
    pub fn express(&self, iterations: usize, max_symbols: usize) -> Vec<Traced<Symbol>> {
        self.grammar.rewrite_traced(iterations, max_symbols)
    }

    pub(crate) fn map_weights(&mut self, mut f: impl FnMut(f64) -> f64) {
        for w in self.genes.values_mut().flatten().flatten() {
            for v in w.iter_mut() {
                *v = f(*v);
            }
        }
    }

    fn insert(&mut self, head: Symbol, at: usize, sym: Symbol, gene: Option<WeightGene>) {
        self.grammar
            .rules_mut()
            .get_mut(&head)
            .unwrap()
            .insert(at, sym);
        self.genes.get_mut(&head).unwrap().insert(at, gene);
    }

    fn remove(&mut self, head: Symbol, at: usize) {
        self.grammar.rules_mut().get_mut(&head).unwrap().remove(at);
        self.genes.get_mut(&head).unwrap().remove(at);
    }

    fn replace(&mut self, head: Symbol, at: usize, sym: Symbol, gene: Option<WeightGene>) {
        self.grammar.rules_mut().get_mut(&head).unwrap()[at] = sym;
        self.genes.get_mut(&head).unwrap()[at] = gene;
    }
}

fn random_gene<R: Rng + ?Sized>(rng: &mut R) -> WeightGene {
    [
        rng.random_range(-1.0..=1.0),
        rng.random_range(-1.0..=1.0),
        rng.random_range(-1.0..=1.0),
    ]
}

fn random_slot<R: Rng + ?Sized>(rng: &mut R) -> (Symbol, Option<WeightGene>) {
    let sym = *NON_CORE_SYMBOLS.choose(rng).unwrap();
    let gene = sym.is_module().then(|| random_gene(rng));
    (sym, gene)
}

impl Genotype {
    /// Axiom `C`; every module symbol gets a body of 1–4 symbols drawn
    /// uniformly (the core's body keeps `C` in front).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Genotype {
        let mut rules = BTreeMap::new();
        for head in Symbol::MODULES {
            let len = rng.random_range(1..=4usize);
            let mut body = Vec::with_capacity(len);
            if head == Symbol::Core {
                body.push((Symbol::Core, Some(random_gene(rng))));
            }
            while body.len() < len {
                body.push(random_slot(rng));
            }
            rules.insert(head, body);
        }
        Genotype::new(rules).expect("random genotype is valid by construction")
    }
}

pub fn random_genotype(seed: u64) -> Genotype {
    Genotype::random(&mut ChaCha8Rng::seed_from_u64(seed))
}

/// Per symbol, the child takes the whole rule body (and its genes) from
/// one parent or the other with equal probability.
pub fn crossover<R: Rng + ?Sized>(a: &Genotype, b: &Genotype, rng: &mut R) -> Genotype {
    let mut child = a.clone();
    for head in Symbol::MODULES {
        if rng.random_bool(0.5) {
            child
                .grammar
                .rules_mut()
                .insert(head, b.rule(head).to_vec());
            child.genes.insert(head, b.rule_genes(head).to_vec());
        }
    }
    child
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MutationConfig {
    /// Chance that a rule body receives one structural edit.
    pub rule_p: f64,
    /// Standard deviation of the Gaussian noise added to every weight.
    pub sigma: f64,
    /// Insertions are skipped once a body reaches this length.
    pub max_rule_len: usize,
}

impl Default for MutationConfig {
    fn default() -> Self {
        Self {
            rule_p: 0.2,
            sigma: 0.1,
            max_rule_len: 10,
        }
    }
}

#[derive(Clone, Copy)]
enum Edit {
    Insert,
    Delete,
    Replace,
}

pub fn mutate<R: Rng + ?Sized>(g: &Genotype, cfg: &MutationConfig, rng: &mut R) -> Genotype {
    let mut out = g.clone();
    for head in Symbol::MODULES {
        if !rng.random_bool(cfg.rule_p) {
            continue;
        }
        // the leading core symbol is never edited
        let lo = usize::from(head == Symbol::Core);
        let len = out.rule(head).len();
        match [Edit::Insert, Edit::Delete, Edit::Replace][rng.random_range(0..3)] {
            Edit::Insert if len < cfg.max_rule_len => {
                let at = rng.random_range(lo..=len);
                let (sym, gene) = random_slot(rng);
                out.insert(head, at, sym, gene);
            }
            Edit::Delete if len > 1 && len > lo => {
                let at = rng.random_range(lo..len);
                out.remove(head, at);
            }
            Edit::Replace if len > lo => {
                let at = rng.random_range(lo..len);
                let (sym, gene) = random_slot(rng);
                out.replace(head, at, sym, gene);
            }
            _ => {}
        }
    }
    let noise = Normal::new(0.0, cfg.sigma).expect("sigma must be finite and >= 0");
    out.map_weights(|w| (w + noise.sample(rng)).clamp(-1.0, 1.0));
    debug_assert!(out.validate().is_ok());
    out
}
