//! The outer loop: a population of body/brain genotypes under tournament
//! selection, with or without a learning phase for every new robot.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;
use crate::learner::{learn, LearnLogRow, LearnerConfig, LearnerError};
use crate::locomotion::{evaluate, SimConfig, SimError};
use crate::lsystem::{
    crossover, mutate, Genotype, MutationConfig, DEFAULT_ITERATIONS, DEFAULT_MAX_SYMBOLS,
};
use crate::morphology::{decode_traced, BodyPlan, DescriptorVector, MAX_MODULES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "evo")]
    EvolutionOnly,
    #[serde(rename = "evo+learn")]
    EvolutionPlusLearning,
}

impl Mode {
    pub fn tag(self) -> &'static str {
        match self {
            Mode::EvolutionOnly => "evo",
            Mode::EvolutionPlusLearning => "evo+learn",
        }
    }

    pub fn from_tag(s: &str) -> Option<Mode> {
        [Mode::EvolutionOnly, Mode::EvolutionPlusLearning]
            .into_iter()
            .find(|m| m.tag() == s)
    }

    pub fn learns(self) -> bool {
        self == Mode::EvolutionPlusLearning
    }
}

/// Who survives a generation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SurvivorPolicy {
    /// Best `population` of parents and offspring together.
    Pool,
    /// Best `population - offspring` parents plus every offspring.
    ParentsPlusOffspring,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvoConfig {
    pub population: usize,
    pub offspring: usize,
    pub generations: usize,
    pub mutation_p: f64,
    pub crossover_p: f64,
    pub tournament: usize,
    pub mode: Mode,
    pub survivors: SurvivorPolicy,
    pub mutation: MutationConfig,
    pub rewrite_iterations: usize,
    pub max_symbols: usize,
    pub max_modules: usize,
}

impl Default for EvoConfig {
    fn default() -> Self {
        Self {
            population: 50,
            offspring: 25,
            generations: 30,
            mutation_p: 0.8,
            crossover_p: 0.8,
            tournament: 2,
            mode: Mode::EvolutionOnly,
            survivors: SurvivorPolicy::Pool,
            mutation: MutationConfig::default(),
            rewrite_iterations: DEFAULT_ITERATIONS,
            max_symbols: DEFAULT_MAX_SYMBOLS,
            max_modules: MAX_MODULES,
        }
    }
}

impl EvoConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if self.population == 0 || self.offspring == 0 || self.tournament == 0 {
            return Err("population, offspring and tournament must be positive");
        }
        if self.tournament > self.population {
            return Err("tournament cannot exceed the population");
        }
        if self.survivors == SurvivorPolicy::ParentsPlusOffspring
            && self.offspring > self.population
        {
            return Err("offspring cannot exceed the population under parents-plus-offspring");
        }
        if !(0.0..=1.0).contains(&self.mutation_p) || !(0.0..=1.0).contains(&self.crossover_p) {
            return Err("probabilities must be in [0, 1]");
        }
        if self.max_modules == 0 {
            return Err("max_modules must be positive");
        }
        Ok(())
    }

    /// Simulator calls per robot: one, or a probe plus a learning run.
    pub fn evaluations_per_robot(&self, learner: &LearnerConfig) -> usize {
        match self.mode {
            Mode::EvolutionOnly => 1,
            Mode::EvolutionPlusLearning => 1 + learner.truly_evaluated(),
        }
    }

    /// Simulator calls of a whole run.
    pub fn total_evaluations(&self, learner: &LearnerConfig) -> usize {
        (self.population + self.offspring * self.generations) * self.evaluations_per_robot(learner)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Individual {
    pub id: u64,
    pub genotype: Genotype,
    pub body: BodyPlan,
    /// The genotype placed nothing but the core.
    pub degenerate: bool,
    /// Brain after learning, or the inherited one.
    pub weights: Vec<f64>,
    pub fitness: f64,
    pub pre_learning_fitness: Option<f64>,
    pub descriptors: DescriptorVector,
    pub parents: Option<(u64, u64)>,
    pub born: usize,
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("individual {0} has no pre-learning fitness")]
pub struct MissingBaseline(pub u64);

pub fn learning_delta(ind: &Individual) -> Result<f64, MissingBaseline> {
    ind.pre_learning_fitness
        .map(|pre| ind.fitness - pre)
        .ok_or(MissingBaseline(ind.id))
}

/// Best of `size` draws with replacement; ties go to the earliest draw.
pub fn tournament<'a, R: Rng + ?Sized>(
    population: &'a [Individual],
    size: usize,
    rng: &mut R,
) -> &'a Individual {
    assert!(!population.is_empty() && size > 0);
    let mut best = &population[rng.random_range(0..population.len())];
    for _ in 1..size {
        let c = &population[rng.random_range(0..population.len())];
        if c.fitness > best.fitness {
            best = c;
        }
    }
    best
}

pub fn binary_tournament<'a, R: Rng + ?Sized>(
    population: &'a [Individual],
    rng: &mut R,
) -> &'a Individual {
    tournament(population, 2, rng)
}

/// One CPG weight triple per joint, taken from the gene of the rule slot
/// that produced the hinge; zeros where there is none.
pub fn inherited_weights(genotype: &Genotype, body: &BodyPlan) -> Vec<f64> {
    let mut w = Vec::with_capacity(3 * body.n_joints());
    for id in body.joints() {
        let gene = body.modules()[id]
            .origin
            .and_then(|o| genotype.weight_gene(o))
            .copied()
            .unwrap_or([0.0; 3]);
        w.extend_from_slice(&gene);
    }
    w
}

/// Grows a body from the genotype; an unplaceable string becomes a bare,
/// degenerate core.
pub fn develop(genotype: &Genotype, cfg: &EvoConfig) -> (BodyPlan, bool) {
    let expressed = genotype.express(cfg.rewrite_iterations, cfg.max_symbols);
    match decode_traced(&expressed, cfg.max_modules) {
        Ok(b) => (b, false),
        Err(_) => (BodyPlan::core_only(), true),
    }
}

/// Unevaluated child of `a` and `b`.
pub fn reproduce<R: Rng + ?Sized>(
    a: &Individual,
    b: &Individual,
    cfg: &EvoConfig,
    rng: &mut R,
    id: u64,
    born: usize,
) -> Individual {
    let mut g = if rng.random_bool(cfg.crossover_p) {
        crossover(&a.genotype, &b.genotype, rng)
    } else {
        a.genotype.clone()
    };
    if rng.random_bool(cfg.mutation_p) {
        g = mutate(&g, &cfg.mutation, rng);
    }
    let mut child = newborn(g, cfg, id, born);
    child.parents = Some((a.id, b.id));
    child
}

fn newborn(genotype: Genotype, cfg: &EvoConfig, id: u64, born: usize) -> Individual {
    let (body, degenerate) = develop(&genotype, cfg);
    Individual {
        id,
        weights: inherited_weights(&genotype, &body),
        descriptors: body.descriptors(),
        genotype,
        body,
        degenerate,
        fitness: 0.0,
        pre_learning_fitness: None,
        parents: None,
        born,
    }
}

/// Everything a run needs besides its seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Setup {
    pub evo: EvoConfig,
    pub learner: LearnerConfig,
    pub sim: SimConfig,
    pub exec: Execution,
}

#[derive(Debug, Error)]
pub enum EvolutionError {
    #[error("invalid config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl From<LearnerError<SimError>> for EvolutionError {
    fn from(e: LearnerError<SimError>) -> Self {
        match e {
            LearnerError::Config(m) => EvolutionError::Config(m),
            LearnerError::Evaluator(s) => EvolutionError::Sim(s),
        }
    }
}

impl Setup {
    pub fn validate(&self) -> Result<(), EvolutionError> {
        self.evo.validate().map_err(EvolutionError::Config)?;
        if self.evo.mode.learns() {
            self.learner.validate().map_err(EvolutionError::Config)?;
        }
        self.sim.validate()?;
        Ok(())
    }
}

/// Learner progress of one robot.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningTrace {
    pub individual: u64,
    /// Generation the robot was born in; 0 for the initial population.
    pub generation: usize,
    pub rows: Vec<LearnLogRow>,
}

struct Assessed {
    evaluations: usize,
    trace: Option<LearningTrace>,
}

/// Scores a newborn in place, learning first when the mode asks for it.
fn assess(ind: &mut Individual, setup: &Setup, seed: u64) -> Result<Assessed, EvolutionError> {
    let learns = setup.evo.mode.learns();
    if ind.degenerate {
        ind.fitness = 0.0;
        ind.pre_learning_fitness = learns.then_some(0.0);
        return Ok(Assessed {
            evaluations: 0,
            trace: None,
        });
    }
    let inherited = evaluate(&ind.body, &ind.weights, &setup.sim)?;
    if !learns {
        ind.fitness = inherited;
        return Ok(Assessed {
            evaluations: 1,
            trace: None,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let body = &ind.body;
    let sim = &setup.sim;
    let out = learn(&ind.weights, &setup.learner, setup.exec, &mut rng, |w| {
        evaluate(body, w, sim)
    })?;
    ind.pre_learning_fitness = Some(inherited);
    ind.fitness = out.best_fitness;
    ind.weights = out.best_weights;
    Ok(Assessed {
        evaluations: 1 + out.budget.truly_evaluated,
        trace: Some(LearningTrace {
            individual: ind.id,
            generation: ind.born,
            rows: out.log,
        }),
    })
}

fn assess_all(
    batch: Vec<(Individual, u64)>,
    setup: &Setup,
) -> Result<(Vec<Individual>, usize, Vec<LearningTrace>), EvolutionError> {
    let done = setup.exec.map_owned(batch, |(mut ind, seed)| {
        assess(&mut ind, setup, seed).map(|a| (ind, a))
    });
    let mut inds = Vec::with_capacity(done.len());
    let mut evaluations = 0;
    let mut traces = Vec::new();
    for r in done {
        let (ind, a) = r?;
        evaluations += a.evaluations;
        traces.extend(a.trace);
        inds.push(ind);
    }
    Ok((inds, evaluations, traces))
}

/// Population statistics after a generation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerationStats {
    pub generation: usize,
    pub mean_fitness: f64,
    pub max_fitness: f64,
    pub min_fitness: f64,
    /// Mean over this generation's offspring; `None` without learning.
    pub mean_learning_delta: Option<f64>,
    pub descriptor_means: [f64; 6],
    pub cumulative_evaluations: usize,
}

#[derive(Debug, Clone)]
pub struct GenerationReport {
    pub stats: GenerationStats,
    pub offspring: Vec<Individual>,
    pub learning: Vec<LearningTrace>,
}

#[derive(Debug, Clone)]
pub struct EvolutionState {
    pub generation: usize,
    pub population: Vec<Individual>,
    pub next_id: u64,
    pub evaluations: usize,
}

impl EvolutionState {
    /// A random, scored starting population.
    pub fn initialize<R: Rng + ?Sized>(
        setup: &Setup,
        rng: &mut R,
    ) -> Result<(Self, Vec<LearningTrace>), EvolutionError> {
        setup.validate()?;
        let batch: Vec<_> = (0..setup.evo.population as u64)
            .map(|id| {
                let g = Genotype::random(rng);
                (newborn(g, &setup.evo, id, 0), rng.random::<u64>())
            })
            .collect();
        let (population, evaluations, traces) = assess_all(batch, setup)?;
        Ok((
            Self {
                generation: 0,
                next_id: setup.evo.population as u64,
                population,
                evaluations,
            },
            traces,
        ))
    }

    pub fn best(&self) -> &Individual {
        self.population
            .iter()
            .reduce(|a, b| if b.fitness > a.fitness { b } else { a })
            .expect("population is never empty")
    }
}

/// Fitter first; among equals the younger (later born, then later id).
fn survivor_order(a: &Individual, b: &Individual) -> std::cmp::Ordering {
    b.fitness
        .total_cmp(&a.fitness)
        .then(b.born.cmp(&a.born))
        .then(b.id.cmp(&a.id))
}

pub fn select_survivors(
    mut parents: Vec<Individual>,
    mut offspring: Vec<Individual>,
    population: usize,
    policy: SurvivorPolicy,
) -> Vec<Individual> {
    match policy {
        SurvivorPolicy::Pool => {
            parents.append(&mut offspring);
            parents.sort_by(survivor_order);
            parents.truncate(population);
            parents
        }
        SurvivorPolicy::ParentsPlusOffspring => {
            parents.sort_by(survivor_order);
            parents.truncate(population.saturating_sub(offspring.len()));
            parents.append(&mut offspring);
            parents.sort_by(survivor_order);
            parents
        }
    }
}

fn stats(state: &EvolutionState, offspring: &[Individual], learns: bool) -> GenerationStats {
    let pop = &state.population;
    let n = pop.len() as f64;
    let fit = pop.iter().map(|i| i.fitness);
    let mut descriptor_means = [0.0; 6];
    for ind in pop {
        for (m, d) in descriptor_means.iter_mut().zip(ind.descriptors.to_array()) {
            *m += d / n;
        }
    }
    let mean_learning_delta = learns.then(|| {
        offspring
            .iter()
            .map(|i| learning_delta(i).expect("learning mode records a baseline"))
            .sum::<f64>()
            / offspring.len() as f64
    });
    GenerationStats {
        generation: state.generation,
        mean_fitness: fit.clone().sum::<f64>() / n,
        max_fitness: fit.clone().fold(f64::NEG_INFINITY, f64::max),
        min_fitness: fit.fold(f64::INFINITY, f64::min),
        mean_learning_delta,
        descriptor_means,
        cumulative_evaluations: state.evaluations,
    }
}

/// Breeds, scores and selects one generation.
pub fn run_generation<R: Rng + ?Sized>(
    state: &mut EvolutionState,
    setup: &Setup,
    rng: &mut R,
) -> Result<GenerationReport, EvolutionError> {
    let cfg = &setup.evo;
    let born = state.generation + 1;
    // parents and per-child seeds are drawn up front so children can be
    // built in any order
    let mut plans = Vec::with_capacity(cfg.offspring);
    for k in 0..cfg.offspring {
        let a = tournament(&state.population, cfg.tournament, rng);
        let b = tournament(&state.population, cfg.tournament, rng);
        plans.push((
            a,
            b,
            state.next_id + k as u64,
            rng.random::<u64>(),
            rng.random::<u64>(),
        ));
    }
    let batch: Vec<(Individual, u64)> = plans
        .into_iter()
        .map(|(a, b, id, breed_seed, learn_seed)| {
            let mut child_rng = ChaCha8Rng::seed_from_u64(breed_seed);
            (reproduce(a, b, cfg, &mut child_rng, id, born), learn_seed)
        })
        .collect();
    let (offspring, evaluations, learning) = assess_all(batch, setup)?;

    state.next_id += cfg.offspring as u64;
    state.evaluations += evaluations;
    state.generation = born;
    let parents = std::mem::take(&mut state.population);
    state.population = select_survivors(parents, offspring.clone(), cfg.population, cfg.survivors);
    Ok(GenerationReport {
        stats: stats(state, &offspring, cfg.mode.learns()),
        offspring,
        learning,
    })
}

/// A complete seeded run; `on_generation` sees every report as it is made.
/// The first report also carries the learning traces of the initial
/// population.
pub fn run_evolution(
    setup: &Setup,
    seed: u64,
    mut on_generation: impl FnMut(&GenerationReport),
) -> Result<EvolutionState, EvolutionError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut state, mut initial) = EvolutionState::initialize(setup, &mut rng)?;
    for _ in 0..setup.evo.generations {
        let mut report = run_generation(&mut state, setup, &mut rng)?;
        if !initial.is_empty() {
            initial.append(&mut report.learning);
            report.learning = initial;
            initial = Vec::new();
        }
        log::info!(
            "generation {} mean {:.5} max {:.5} evals {}",
            report.stats.generation,
            report.stats.mean_fitness,
            report.stats.max_fitness,
            report.stats.cumulative_evaluations
        );
        on_generation(&report);
    }
    Ok(state)
}
