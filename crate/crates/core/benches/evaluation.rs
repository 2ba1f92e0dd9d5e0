use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use evoro::evolution::{develop, run_evolution, EvoConfig, Mode};
use evoro::exec::Execution;
use evoro::experiment::{ExperimentSpec, Preset};
use evoro::locomotion::{evaluate, SimConfig};
use evoro::lsystem::Genotype;
use evoro::morphology::BodyPlan;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn strategies() -> Vec<(&'static str, Execution)> {
    #[cfg_attr(not(feature = "parallel"), allow(unused_mut))]
    let mut s = vec![("sequential", Execution::Sequential)];
    #[cfg(feature = "parallel")]
    s.push(("parallel", Execution::Parallel));
    s
}

fn robots(n: usize) -> Vec<(BodyPlan, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = EvoConfig::default();
    (0..n)
        .map(|_| {
            let (body, _) = develop(&Genotype::random(&mut rng), &cfg);
            let w = (0..3 * body.n_joints())
                .map(|_| rng.random_range(-1.0..=1.0))
                .collect();
            (body, w)
        })
        .collect()
}

fn batch_evaluation(c: &mut Criterion) {
    let batch = robots(32);
    let sim = SimConfig::default();
    let mut group = c.benchmark_group("evaluate 32 robots");
    group.sample_size(10);
    for (name, exec) in strategies() {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| exec.map(&batch, |(body, w)| evaluate(body, w, &sim).unwrap()))
        });
    }
    group.finish();
}

fn learning_generation(c: &mut Criterion) {
    let mut spec = ExperimentSpec::new(Preset::Desk, Mode::EvolutionPlusLearning);
    spec.evo.population = 4;
    spec.evo.offspring = 4;
    spec.evo.generations = 1;
    let mut group = c.benchmark_group("evolution+learning generation");
    group.sample_size(10);
    for (name, exec) in strategies() {
        spec.execution = exec;
        let setup = spec.setup();
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_evolution(&setup, 5, |_| {}).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, batch_evaluation, learning_generation);
criterion_main!(benches);
