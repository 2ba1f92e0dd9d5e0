//! Reversible differential evolution over CPG weights, with candidates
//! screened by a K-nearest-neighbour surrogate before the simulator sees them.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exec::Execution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearnerConfig {
    /// Population size, also the number of true evaluations per generation.
    pub population: usize,
    /// Scaling factor of the difference vectors.
    pub f: f64,
    /// Probability of taking a coordinate from the candidate in crossover.
    pub crossover_p: f64,
    /// Neighbours averaged by the surrogate.
    pub k: usize,
    pub generations: usize,
    /// True evaluations allowed per learning run, initial population included.
    pub budget: usize,
    /// Spread of the initial population around the inherited brain.
    pub init_sigma: f64,
    pub bounds: (f64, f64),
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            population: 25,
            f: 0.5,
            crossover_p: 0.9,
            k: 3,
            generations: 10,
            budget: 250,
            init_sigma: 0.2,
            bounds: (-1.0, 1.0),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum LearnerError<E> {
    #[error("invalid learner config: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Evaluator(E),
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), &'static str> {
        if !(self.f > 0.0) {
            return Err("f must be positive");
        }
        if !(0.0..=1.0).contains(&self.crossover_p) {
            return Err("crossover_p must be in [0, 1]");
        }
        if self.k < 1 {
            return Err("k must be at least 1");
        }
        if self.population < 4 {
            return Err("population must be at least 4");
        }
        if self.budget < self.population {
            return Err("budget must cover the initial population");
        }
        if !(self.init_sigma >= 0.0) {
            return Err("init_sigma must be non-negative");
        }
        if !(self.bounds.0 < self.bounds.1) {
            return Err("bounds must be increasing");
        }
        Ok(())
    }

    /// Candidates generated by one full run: three per member per generation.
    pub fn generated(&self) -> usize {
        3 * self.population * self.generations
    }

    /// True evaluations of one full run: the initial population, then up to
    /// one population's worth per generation until the budget runs out.
    pub fn truly_evaluated(&self) -> usize {
        self.budget.min(self.population * (self.generations + 1))
    }
}

pub fn de_mutation(xi: &[f64], xj: &[f64], xk: &[f64], f: f64) -> Vec<f64> {
    assert!(xi.len() == xj.len() && xj.len() == xk.len());
    xi.iter()
        .zip(xj)
        .zip(xk)
        .map(|((a, b), c)| a + f * (b - c))
        .collect()
}

pub fn uniform_crossover<R: Rng + ?Sized>(y: &[f64], x: &[f64], p: f64, rng: &mut R) -> Vec<f64> {
    assert_eq!(y.len(), x.len());
    y.iter()
        .zip(x)
        .map(|(&yd, &xd)| if rng.random_bool(p) { yd } else { xd })
        .collect()
}

/// Three new points from three old ones, each built from the previous results.
pub fn revde_triple(x1: &[f64], x2: &[f64], x3: &[f64], f: f64) -> [Vec<f64>; 3] {
    let y1 = de_mutation(x1, x2, x3, f);
    let y2 = de_mutation(x2, x3, &y1, f);
    let y3 = de_mutation(x3, &y1, &y2, f);
    [y1, y2, y3]
}

/// Undoes [`revde_triple`] by running the three updates backwards.
pub fn revde_invert(y1: &[f64], y2: &[f64], y3: &[f64], f: f64) -> [Vec<f64>; 3] {
    let x3 = de_mutation(y3, y2, y1, f);
    let x2 = de_mutation(y2, y1, &x3, f);
    let x1 = de_mutation(y1, &x3, &x2, f);
    [x1, x2, x3]
}

pub type Mat3 = [[f64; 3]; 3];

/// `(y1, y2, y3) = R (x1, x2, x3)` coordinate by coordinate.
pub fn revde_matrix(f: f64) -> Mat3 {
    let f2 = f * f;
    let f3 = f2 * f;
    [
        [1.0, f, -f],
        [-f, 1.0 - f2, f + f2],
        [f + f2, f3 + f2 - f, 1.0 - 2.0 * f2 - f3],
    ]
}

/// `R⁻¹`, built column by column with [`revde_invert`].
pub fn revde_inverse(f: f64) -> Mat3 {
    let mut m = [[0.0; 3]; 3];
    for c in 0..3 {
        let mut e = [[0.0], [0.0], [0.0]];
        e[c][0] = 1.0;
        let x = revde_invert(&e[0], &e[1], &e[2], f);
        for r in 0..3 {
            m[r][c] = x[r][0];
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationRecord {
    pub weights: Vec<f64>,
    pub fitness: f64,
    /// Simulator value rather than a surrogate prediction.
    pub is_true: bool,
}

/// Every distinct weight vector the simulator has scored, in evaluation order.
#[derive(Debug, Clone, Default)]
pub struct Archive {
    records: Vec<EvaluationRecord>,
    seen: HashSet<Vec<u64>>,
}

fn bits(w: &[f64]) -> Vec<u64> {
    w.iter().map(|x| x.to_bits()).collect()
}

impl Archive {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a true evaluation; returns false (and keeps nothing) for a
    /// weight vector already present.
    pub fn insert(&mut self, weights: Vec<f64>, fitness: f64) -> bool {
        if !self.seen.insert(bits(&weights)) {
            return false;
        }
        self.records.push(EvaluationRecord {
            weights,
            fitness,
            is_true: true,
        });
        true
    }

    pub fn records(&self) -> &[EvaluationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
#[error("archive holds {size} records, fewer than k = {k}")]
pub struct ArchiveTooSmall {
    pub size: usize,
    pub k: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Mean fitness of the `k` archive records nearest to `query`. Equal
/// distances go to the earlier record.
pub fn knn_predict(archive: &Archive, query: &[f64], k: usize) -> Result<f64, ArchiveTooSmall> {
    let size = archive.len();
    if size < k || k == 0 {
        return Err(ArchiveTooSmall { size, k });
    }
    let mut ranked: Vec<(f64, usize)> = archive
        .records
        .iter()
        .enumerate()
        .map(|(i, r)| (sq_dist(&r.weights, query), i))
        .collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < size {
        ranked.select_nth_unstable_by(k - 1, order);
        ranked.truncate(k);
    }
    ranked.sort_unstable_by(order);
    let sum: f64 = ranked
        .iter()
        .map(|&(_, i)| archive.records[i].fitness)
        .sum();
    Ok(sum / k as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BudgetReport {
    pub generated: usize,
    pub truly_evaluated: usize,
}

/// One row per learner generation; generation 0 is the initial population.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnLogRow {
    pub generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub archive_size: usize,
    pub true_evals: usize,
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub best_weights: Vec<f64>,
    pub best_fitness: f64,
    /// Fitness of the inherited brain, the first true evaluation.
    pub inherited_fitness: f64,
    pub budget: BudgetReport,
    pub log: Vec<LearnLogRow>,
    pub archive: Archive,
}

struct Tracker {
    archive: Archive,
    best: Option<(Vec<f64>, f64)>,
    evaluated: usize,
}

impl Tracker {
    fn record(&mut self, w: &[f64], fitness: f64) {
        self.evaluated += 1;
        if self.best.as_ref().is_none_or(|(_, b)| fitness > *b) {
            self.best = Some((w.to_vec(), fitness));
        }
        self.archive.insert(w.to_vec(), fitness);
    }
}

fn evaluate_batch<E, F>(
    exec: Execution,
    batch: &[Vec<f64>],
    eval: &F,
) -> Result<Vec<f64>, LearnerError<E>>
where
    E: Send,
    F: Fn(&[f64]) -> Result<f64, E> + Sync + Send,
{
    exec.map(batch, |w| eval(w))
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(LearnerError::Evaluator)
}

fn by_fitness_desc(a: &f64, b: &f64) -> std::cmp::Ordering {
    b.total_cmp(a)
}

fn log_row(generation: usize, pop: &[(Vec<f64>, f64)], t: &Tracker) -> LearnLogRow {
    LearnLogRow {
        generation,
        best_fitness: t.best.as_ref().map_or(f64::NAN, |b| b.1),
        mean_fitness: pop.iter().map(|p| p.1).sum::<f64>() / pop.len() as f64,
        archive_size: t.archive.len(),
        true_evals: t.evaluated,
    }
}

/// Improves `initial` under the true fitness `eval`, spending at most
/// `cfg.budget` calls to it.
pub fn learn<R, E, F>(
    initial: &[f64],
    cfg: &LearnerConfig,
    exec: Execution,
    rng: &mut R,
    eval: F,
) -> Result<LearnOutcome, LearnerError<E>>
where
    R: Rng + ?Sized,
    E: Send,
    F: Fn(&[f64]) -> Result<f64, E> + Sync + Send,
{
    cfg.validate().map_err(LearnerError::Config)?;
    let (lo, hi) = cfg.bounds;
    let x = cfg.population;
    let clip = |v: &mut Vec<f64>| v.iter_mut().for_each(|c| *c = c.clamp(lo, hi));

    let noise =
        Normal::new(0.0, cfg.init_sigma).map_err(|_| LearnerError::Config("bad init_sigma"))?;
    let mut start = Vec::with_capacity(x);
    let mut inherited = initial.to_vec();
    clip(&mut inherited);
    start.push(inherited);
    while start.len() < x {
        let mut w: Vec<f64> = initial.iter().map(|c| c + noise.sample(rng)).collect();
        clip(&mut w);
        start.push(w);
    }

    let mut t = Tracker {
        archive: Archive::new(),
        best: None,
        evaluated: 0,
    };
    let fit = evaluate_batch(exec, &start, &eval)?;
    for (w, &f) in start.iter().zip(&fit) {
        t.record(w, f);
    }
    let inherited_fitness = fit[0];
    let mut pop: Vec<(Vec<f64>, f64)> = start.into_iter().zip(fit).collect();
    let mut log = vec![log_row(0, &pop, &t)];
    let mut generated = 0;

    for generation in 1..=cfg.generations {
        let mut s1: Vec<usize> = (0..x).collect();
        let mut s2 = s1.clone();
        s1.shuffle(rng);
        s2.shuffle(rng);
        let mut candidates = Vec::with_capacity(3 * x);
        for i in 0..x {
            let base = [&pop[i].0, &pop[s1[i]].0, &pop[s2[i]].0];
            let ys = revde_triple(base[0], base[1], base[2], cfg.f);
            for (y, b) in ys.iter().zip(base) {
                let mut c = uniform_crossover(y, b, cfg.crossover_p, rng);
                clip(&mut c);
                candidates.push(c);
            }
        }
        generated += candidates.len();

        let take = x.min(cfg.budget - t.evaluated);
        if take > 0 {
            let k = cfg.k.min(t.archive.len());
            let predicted: Vec<f64> = candidates
                .iter()
                .map(|c| knn_predict(&t.archive, c, k).expect("k is capped by the archive size"))
                .collect();
            let mut order: Vec<usize> = (0..candidates.len()).collect();
            order.sort_by(|&a, &b| by_fitness_desc(&predicted[a], &predicted[b]));
            let chosen: Vec<Vec<f64>> = order[..take]
                .iter()
                .map(|&i| std::mem::take(&mut candidates[i]))
                .collect();
            let fit = evaluate_batch(exec, &chosen, &eval)?;
            for (w, &f) in chosen.iter().zip(&fit) {
                t.record(w, f);
            }
            pop.extend(chosen.into_iter().zip(fit));
            pop.sort_by(|a, b| by_fitness_desc(&a.1, &b.1));
            pop.truncate(x);
        }
        log.push(log_row(generation, &pop, &t));
    }

    let (best_weights, best_fitness) = t.best.expect("initial population is evaluated");
    Ok(LearnOutcome {
        best_weights,
        best_fitness,
        inherited_fitness,
        budget: BudgetReport {
            generated,
            truly_evaluated: t.evaluated,
        },
        log,
        archive: t.archive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::{prop_assert, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::convert::Infallible;

    #[test]
    fn de_mutation_examples() {
        assert_eq!(de_mutation(&[1.0], &[0.0], &[0.0], 0.5), vec![1.0]);
        assert_eq!(
            de_mutation(&[0.3, 2.0], &[5.0, 1.0], &[5.0, 1.0], 0.7),
            vec![0.3, 2.0]
        );
        assert_eq!(de_mutation(&[0.3], &[5.0], &[1.0], 0.0), vec![0.3]);
        assert_eq!(de_mutation(&[1.0], &[3.0], &[1.0], 0.5), vec![2.0]);
    }

    #[test]
    fn crossover_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = [1.0, 2.0, 3.0];
        let x = [-1.0, -2.0, -3.0];
        assert_eq!(uniform_crossover(&y, &x, 1.0, &mut rng), y.to_vec());
        assert_eq!(uniform_crossover(&y, &x, 0.0, &mut rng), x.to_vec());
        for _ in 0..100 {
            let c = uniform_crossover(&y, &x, 0.5, &mut rng);
            assert!(c.iter().enumerate().all(|(d, v)| *v == y[d] || *v == x[d]));
        }
    }

    #[test]
    fn revde_triple_examples() {
        let [y1, y2, y3] = revde_triple(&[1.0], &[0.0], &[0.0], 0.5);
        assert_eq!((y1[0], y2[0], y3[0]), (1.0, -0.5, 0.75));
        let [y1, y2, y3] = revde_triple(&[1.0, 0.0], &[0.0, 1.0], &[0.0, 0.0], 0.5);
        assert_eq!(y1, vec![1.0, 0.5]);
        assert_eq!(y2, vec![-0.5, 0.75]);
        assert_eq!(y3, vec![0.75, -0.125]);
        let p = [0.2, -0.4];
        let ys = revde_triple(&p, &p, &p, 0.9);
        assert!(ys.iter().all(|y| y == &p.to_vec()));
    }

    fn mat_vec(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for r in 0..3 {
            out[r] = (0..3).map(|c| m[r][c] * v[c]).sum();
        }
        out
    }

    fn det(m: &Mat3) -> f64 {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse via cofactors, independent of the shear construction.
    fn adjugate_inverse(m: &Mat3) -> Mat3 {
        let d = det(m);
        let mut inv = [[0.0; 3]; 3];
        for r in 0..3 {
            for c in 0..3 {
                let (r1, r2) = ((c + 1) % 3, (c + 2) % 3);
                let (c1, c2) = ((r + 1) % 3, (r + 2) % 3);
                inv[r][c] = (m[r1][c1] * m[r2][c2] - m[r1][c2] * m[r2][c1]) / d;
            }
        }
        inv
    }

    #[test]
    fn matrix_matches_unit_example_and_limit() {
        assert_eq!(
            mat_vec(&revde_matrix(0.5), [1.0, 0.0, 0.0]),
            [1.0, -0.5, 0.75]
        );
        assert_eq!(
            revde_matrix(0.0),
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
        );
        // a product of three shears
        for f in [0.1, 0.5, 0.9, 2.0] {
            assert!((det(&revde_matrix(f)) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_agrees_with_cofactors() {
        for f in [0.1, 0.5, 1.3] {
            let a = revde_inverse(f);
            let b = adjugate_inverse(&revde_matrix(f));
            for r in 0..3 {
                for c in 0..3 {
                    assert!((a[r][c] - b[r][c]).abs() < 1e-12);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn matrix_reproduces_triple(
            v in proptest::collection::vec(-10.0f64..10.0, 3),
            f in 0.01f64..2.0,
        ) {
            let [y1, y2, y3] = revde_triple(&[v[0]], &[v[1]], &[v[2]], f);
            let m = mat_vec(&revde_matrix(f), [v[0], v[1], v[2]]);
            for (a, b) in [y1[0], y2[0], y3[0]].iter().zip(m) {
                prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
            }
        }

        #[test]
        fn invert_round_trips(
            xs in proptest::collection::vec(proptest::collection::vec(-1.0f64..1.0, 4), 3),
            f in 0.01f64..1.0,
        ) {
            let ys = revde_triple(&xs[0], &xs[1], &xs[2], f);
            let back = revde_invert(&ys[0], &ys[1], &ys[2], f);
            for (b, x) in back.iter().zip(&xs) {
                for (p, q) in b.iter().zip(x) {
                    prop_assert!((p - q).abs() < 1e-12);
                }
            }
        }
    }

    fn archive_of(points: &[(f64, f64)]) -> Archive {
        let mut a = Archive::new();
        for &(w, f) in points {
            a.insert(vec![w], f);
        }
        a
    }

    #[test]
    fn knn_examples() {
        let a = archive_of(&[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0), (10.0, 10.0)]);
        assert_eq!(knn_predict(&a, &[1.5], 3), Ok(2.0));
        assert_eq!(knn_predict(&a, &[10.0], 1), Ok(10.0));
        assert_eq!(
            knn_predict(&a, &[0.0], 5),
            Err(ArchiveTooSmall { size: 4, k: 5 })
        );
        // equidistant from 1 and 2: the earlier record wins
        assert_eq!(knn_predict(&a, &[1.5], 1), Ok(2.0));
        let flat = archive_of(&[(0.1, 4.0), (0.7, 4.0), (-0.3, 4.0)]);
        assert_eq!(knn_predict(&flat, &[55.0], 2), Ok(4.0));
    }

    #[test]
    fn archive_rejects_duplicates() {
        let mut a = Archive::new();
        assert!(a.insert(vec![0.5, 0.25], 1.0));
        assert!(!a.insert(vec![0.5, 0.25], 7.0));
        assert!(a.insert(vec![0.5, -0.25], 1.0));
        assert_eq!(a.len(), 2);
        assert!(a.records().iter().all(|r| r.is_true));
    }

    /// Stable full sort by distance, then the mean of the first k.
    fn brute_force(a: &Archive, q: &[f64], k: usize) -> f64 {
        let mut all: Vec<(f64, f64)> = a
            .records()
            .iter()
            .map(|r| {
                let d: f64 = r.weights.iter().zip(q).map(|(x, y)| (x - y).powi(2)).sum();
                (d, r.fitness)
            })
            .collect();
        all.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
        all[..k].iter().map(|p| p.1).sum::<f64>() / k as f64
    }

    #[test]
    fn knn_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for trial in 0..20 {
            let dim = 1 + trial % 6;
            let mut a = Archive::new();
            for _ in 0..rng.random_range(5..=200) {
                // a coarse grid makes equal distances common
                let w = (0..dim)
                    .map(|_| rng.random_range(-4..=4) as f64 / 4.0)
                    .collect();
                a.insert(w, rng.random_range(0.0..10.0));
            }
            for _ in 0..100 {
                let q: Vec<f64> = (0..dim)
                    .map(|_| rng.random_range(-4..=4) as f64 / 4.0)
                    .collect();
                let k = rng.random_range(1..=a.len().min(7));
                assert_eq!(knn_predict(&a, &q, k).unwrap(), brute_force(&a, &q, k));
            }
        }
    }

    fn sphere(w: &[f64]) -> Result<f64, Infallible> {
        Ok(-w.iter().map(|x| x * x).sum::<f64>())
    }

    #[test]
    fn budget_is_exact() {
        let cfg = LearnerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = learn(&[0.5; 9], &cfg, Execution::Sequential, &mut rng, sphere).unwrap();
        assert_eq!(
            out.budget,
            BudgetReport {
                generated: 750,
                truly_evaluated: 250
            }
        );
        assert_eq!(cfg.generated(), 750);
        assert_eq!(cfg.truly_evaluated(), 250);
        assert_eq!(out.log.len(), 11);
        assert_eq!(out.log.last().unwrap().true_evals, 250);
        assert!(out.archive.len() <= 250);
        assert!(out
            .log
            .windows(2)
            .all(|w| w[1].best_fitness >= w[0].best_fitness));
        assert!(out
            .log
            .windows(2)
            .all(|w| w[1].archive_size >= w[0].archive_size));
        assert!(out.best_fitness >= out.inherited_fitness);
        assert_eq!(out.inherited_fitness, sphere(&[0.5; 9]).unwrap());
    }

    #[test]
    fn counts_every_evaluator_call() {
        use std::sync::atomic::{AtomicUsize, Ordering};
        let calls = AtomicUsize::new(0);
        let cfg = LearnerConfig {
            population: 10,
            generations: 5,
            budget: 50,
            ..LearnerConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let out = learn(&[0.1; 6], &cfg, Execution::default(), &mut rng, |w| {
            calls.fetch_add(1, Ordering::Relaxed);
            sphere(w)
        })
        .unwrap();
        assert_eq!(calls.load(Ordering::Relaxed), 50);
        assert_eq!(out.budget.generated, 150);
        assert_eq!(out.budget.truly_evaluated, 50);
    }

    #[test]
    fn empty_brain_still_spends_its_budget() {
        let cfg = LearnerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = learn(&[], &cfg, Execution::Sequential, &mut rng, |_| {
            Ok::<_, Infallible>(0.0)
        })
        .unwrap();
        assert_eq!(out.budget.truly_evaluated, 250);
        assert_eq!(out.archive.len(), 1);
        assert_eq!(out.best_fitness, 0.0);
    }

    #[test]
    fn candidates_stay_in_bounds() {
        let cfg = LearnerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        // rewards pushing every weight outwards
        let out = learn(&[0.9; 6], &cfg, Execution::Sequential, &mut rng, |w| {
            Ok::<_, Infallible>(w.iter().map(|x| x.abs()).sum())
        })
        .unwrap();
        for r in out.archive.records() {
            assert!(r.weights.iter().all(|x| (-1.0..=1.0).contains(x)));
        }
        assert!(out.best_fitness > 5.9);
    }

    #[test]
    fn evaluator_errors_propagate() {
        let cfg = LearnerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = learn(&[0.0; 3], &cfg, Execution::Sequential, &mut rng, |_| {
            Err("boom")
        });
        assert!(matches!(r, Err(LearnerError::Evaluator("boom"))));
        let bad = LearnerConfig {
            population: 3,
            ..cfg
        };
        let r = learn(&[0.0; 3], &bad, Execution::Sequential, &mut rng, sphere);
        assert!(matches!(r, Err(LearnerError::Config(_))));
    }

    #[test]
    fn sphere_improves_in_most_runs() {
        let cfg = LearnerConfig::default();
        let mut wins = 0;
        for seed in 0..10u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let init: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let out = learn(&init, &cfg, Execution::Sequential, &mut rng, sphere).unwrap();
            let first_best = out.log[0].best_fitness;
            let norm = |w: &[f64]| w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if out.best_fitness >= first_best && norm(&out.best_weights) < norm(&init) {
                wins += 1;
            }
        }
        assert!(wins >= 9, "{wins}/10");
    }

    #[test]
    fn seeded_runs_repeat() {
        let cfg = LearnerConfig::default();
        let run = |exec| {
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            learn(&[0.3; 6], &cfg, exec, &mut rng, sphere).unwrap()
        };
        let a = run(Execution::Sequential);
        let b = run(Execution::default());
        assert_eq!(a.best_weights, b.best_weights);
        assert_eq!(a.log, b.log);
    }
}
