//! Repeated seeded runs, versioned CSV output and the summary tables read
//! by the plotting scripts.
//!
//! Every CSV starts with a `# evoro <kind> v1` line, then a header row.

pub mod stats;

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::{
    run_evolution, EvoConfig, EvolutionError, EvolutionState, GenerationReport, Mode, Setup,
};
use crate::exec::Execution;
use crate::learner::LearnerConfig;
use crate::locomotion::{simulate, Se2, SimConfig};

pub use stats::{bootstrap_ci, rank_sum, RankSum};

pub const SCHEMA_VERSION: u32 = 1;
pub const BOOTSTRAP_RESAMPLES: usize = 1000;
pub const BOOTSTRAP_SEED: u64 = 0;

pub fn schema_line(kind: &str) -> String {
    format!("# evoro {kind} v{SCHEMA_VERSION}")
}

const PARTIAL_MARKER: &str = "# partial log:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Paper,
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub preset: Preset,
    pub master_seed: u64,
    pub repetitions: usize,
    pub evo: EvoConfig,
    pub learner: LearnerConfig,
    pub sim: SimConfig,
    pub execution: Execution,
    /// Also dump the best robot of every run.
    pub trajectories: bool,
    pub out_dir: PathBuf,
}

impl ExperimentSpec {
    pub fn new(preset: Preset, mode: Mode) -> Self {
        let mut spec = Self {
            preset,
            master_seed: 0,
            repetitions: 10,
            evo: EvoConfig {
                mode,
                ..EvoConfig::default()
            },
            learner: LearnerConfig::default(),
            sim: SimConfig::default(),
            execution: Execution::default(),
            trajectories: false,
            out_dir: PathBuf::from("results"),
        };
        if preset == Preset::Desk {
            spec.repetitions = 3;
            spec.evo.population = 10;
            spec.evo.offspring = 10;
            spec.evo.generations = 10;
            spec.learner.population = 10;
            spec.learner.generations = 5;
            spec.learner.budget = 50;
        }
        spec
    }

    pub fn mode(&self) -> Mode {
        self.evo.mode
    }

    pub fn setup(&self) -> Setup {
        Setup {
            evo: self.evo,
            learner: self.learner,
            sim: self.sim,
            exec: self.execution,
        }
    }

    pub fn run_seed(&self, run: usize) -> u64 {
        self.master_seed.wrapping_add(run as u64)
    }

    pub fn evaluations_per_run(&self) -> usize {
        self.evo.total_evaluations(&self.learner)
    }

    pub fn generations_file(&self) -> PathBuf {
        self.out_dir
            .join(format!("generations-{}.csv", file_tag(self.mode())))
    }

    pub fn learning_file(&self) -> PathBuf {
        self.out_dir
            .join(format!("learning-{}.csv", file_tag(self.mode())))
    }

    pub fn runs_file(&self) -> PathBuf {
        self.out_dir
            .join(format!("runs-{}.csv", file_tag(self.mode())))
    }
}

pub fn file_tag(mode: Mode) -> &'static str {
    match mode {
        Mode::EvolutionOnly => "evo",
        Mode::EvolutionPlusLearning => "evo-learn",
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRow {
    pub run: usize,
    pub generation: usize,
    pub mode: String,
    pub mean_fitness: f64,
    pub max_fitness: f64,
    pub min_fitness: f64,
    pub mean_learning_delta: Option<f64>,
    pub absolute_size: f64,
    pub width: f64,
    pub proportion: f64,
    pub n_bricks: f64,
    pub rel_limbs: f64,
    pub n_active_hinges: f64,
    pub cumulative_evaluations: usize,
}

impl GenerationRow {
    fn new(run: usize, mode: Mode, r: &GenerationReport) -> Self {
        let s = &r.stats;
        let [absolute_size, width, proportion, n_bricks, rel_limbs, n_active_hinges] =
            s.descriptor_means;
        Self {
            run,
            generation: s.generation,
            mode: mode.tag().to_string(),
            mean_fitness: s.mean_fitness,
            max_fitness: s.max_fitness,
            min_fitness: s.min_fitness,
            mean_learning_delta: s.mean_learning_delta,
            absolute_size,
            width,
            proportion,
            n_bricks,
            rel_limbs,
            n_active_hinges,
            cumulative_evaluations: s.cumulative_evaluations,
        }
    }

    pub fn descriptors(&self) -> [f64; 6] {
        [
            self.absolute_size,
            self.width,
            self.proportion,
            self.n_bricks,
            self.rel_limbs,
            self.n_active_hinges,
        ]
    }
}

/// One learner generation of one robot; `generation` is when it was born.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningRow {
    pub run: usize,
    pub generation: usize,
    pub individual: u64,
    pub learner_generation: usize,
    pub best_fitness: f64,
    pub mean_fitness: f64,
    pub archive_size: usize,
    pub true_evals: usize,
}

fn learning_rows(run: usize, r: &GenerationReport) -> Vec<LearningRow> {
    r.learning
        .iter()
        .flat_map(|t| {
            t.rows.iter().map(move |l| LearningRow {
                run,
                generation: t.generation,
                individual: t.individual,
                learner_generation: l.generation,
                best_fitness: l.best_fitness,
                mean_fitness: l.mean_fitness,
                archive_size: l.archive_size,
                true_evals: l.true_evals,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub final_mean_fitness: f64,
    pub final_max_fitness: f64,
    pub total_evaluations: usize,
    /// Kept out of the CSV so that seeded output stays byte-identical.
    #[serde(skip)]
    pub wall_time_secs: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentLog {
    pub rows: Vec<GenerationRow>,
    pub learning: Vec<LearningRow>,
    pub runs: Vec<RunSummary>,
}

impl ExperimentLog {
    /// Best final fitness averaged over runs.
    pub fn mean_best_fitness(&self) -> f64 {
        self.runs.iter().map(|r| r.final_max_fitness).sum::<f64>() / self.runs.len() as f64
    }

    pub fn final_mean_fitness(&self) -> f64 {
        self.runs.iter().map(|r| r.final_mean_fitness).sum::<f64>() / self.runs.len() as f64
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Spec(String),
    #[error("run {run}: {source}")]
    Run {
        run: usize,
        #[source]
        source: EvolutionError,
    },
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("{path}: expected schema `{expected}`, found `{found}`")]
    Schema {
        path: PathBuf,
        expected: String,
        found: String,
    },
}

enum Msg {
    Generation(usize, GenerationRow, Vec<LearningRow>),
    Finished(usize, Result<RunSummary, String>),
}

/// One serialized CSV record, preceded by the header row when `header`.
fn csv_record<T: Serialize>(row: &T, header: bool) -> Result<Vec<u8>, String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(header)
        .from_writer(Vec::new());
    w.serialize(row).map_err(|e| e.to_string())?;
    w.into_inner().map_err(|e| e.to_string())
}

struct Sink<W: Write> {
    out: W,
    header_done: bool,
}

impl<W: Write> Sink<W> {
    fn new(mut out: W, kind: &str) -> io::Result<Self> {
        writeln!(out, "{}", schema_line(kind))?;
        Ok(Self {
            out,
            header_done: false,
        })
    }

    fn record<T: Serialize>(&mut self, row: &T) -> Result<(), String> {
        let bytes = csv_record(row, !self.header_done)?;
        self.header_done = true;
        self.out.write_all(&bytes).map_err(|e| e.to_string())
    }

    fn flush(&mut self) -> Result<(), String> {
        self.out.flush().map_err(|e| e.to_string())
    }
}

/// Writes rows run by run in run order, whatever order they arrive in.
struct OrderedWriter<G: Write, L: Write> {
    generations: Sink<G>,
    learning: Option<Sink<L>>,
    next: usize,
    pending: BTreeMap<usize, Vec<Msg>>,
    log: ExperimentLog,
    failure: Option<String>,
}

impl<G: Write, L: Write> OrderedWriter<G, L> {
    fn new(gen_out: G, learn_out: Option<L>) -> io::Result<Self> {
        Ok(Self {
            generations: Sink::new(gen_out, "generations")?,
            learning: learn_out.map(|l| Sink::new(l, "learning")).transpose()?,
            next: 0,
            pending: BTreeMap::new(),
            log: ExperimentLog::default(),
            failure: None,
        })
    }

    fn accept(&mut self, run: usize, msg: Msg) {
        if self.failure.is_some() {
            return;
        }
        self.pending.entry(run).or_default().push(msg);
        while let Some(queue) = self.pending.remove(&self.next) {
            let mut finished = false;
            for m in queue {
                if let Err(e) = self.write(m, &mut finished) {
                    self.fail(e);
                    return;
                }
            }
            if !finished {
                break;
            }
            self.next += 1;
        }
    }

    fn write(&mut self, msg: Msg, finished: &mut bool) -> Result<(), String> {
        match msg {
            Msg::Generation(_, row, learning) => {
                self.generations.record(&row)?;
                if let Some(w) = self.learning.as_mut() {
                    for l in &learning {
                        w.record(l)?;
                    }
                    w.flush()?;
                }
                self.generations.flush()?;
                self.log.rows.push(row);
                self.log.learning.extend(learning);
            }
            Msg::Finished(run, result) => {
                *finished = true;
                match result {
                    Ok(summary) => self.log.runs.push(summary),
                    Err(e) => return Err(format!("run {run}: {e}")),
                }
            }
        }
        Ok(())
    }

    fn fail(&mut self, reason: String) {
        let marker = format!("{PARTIAL_MARKER} {}\n", reason.replace('\n', " "));
        // best effort: the sink may be the thing that failed
        let out = &mut self.generations.out;
        let _ = out.write_all(marker.as_bytes()).and_then(|_| out.flush());
        self.failure = Some(reason);
    }

    fn finish(mut self) -> Result<ExperimentLog, String> {
        if let Some(f) = self.failure {
            return Err(f);
        }
        self.generations.flush()?;
        if let Some(w) = self.learning.as_mut() {
            w.flush()?;
        }
        Ok(self.log)
    }
}

fn write_best(
    spec: &ExperimentSpec,
    run: usize,
    state: &EvolutionState,
) -> Result<(), ExperimentError> {
    let dir = spec.out_dir.join("best");
    fs::create_dir_all(&dir)?;
    let best = state.best();
    let stem = format!("{}-run{run}", file_tag(spec.mode()));
    fs::write(dir.join(format!("{stem}.body.txt")), best.body.export())?;
    fs::write(
        dir.join(format!("{stem}.genotype.txt")),
        best.genotype.to_string(),
    )?;
    let traj = simulate(&best.body, &best.weights, &spec.sim, Se2::IDENTITY).map_err(|e| {
        ExperimentError::Run {
            run,
            source: e.into(),
        }
    })?;
    let mut text = schema_line("trajectory");
    text.push('\n');
    text.push_str(&traj.to_rows());
    fs::write(dir.join(format!("{stem}.trajectory.csv")), text)?;
    Ok(())
}

fn write_runs(path: &Path, runs: &[RunSummary]) -> Result<(), ExperimentError> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "{}", schema_line("runs"))?;
    let mut w = csv::Writer::from_writer(f);
    for r in runs {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs every repetition and writes the CSVs under `spec.out_dir`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentLog, ExperimentError> {
    if spec.repetitions == 0 {
        return Err(ExperimentError::Spec("repetitions must be positive".into()));
    }
    spec.setup()
        .validate()
        .map_err(|e| ExperimentError::Spec(e.to_string()))?;
    fs::create_dir_all(&spec.out_dir)?;
    let gen_out = BufWriter::new(File::create(spec.generations_file())?);
    let learn_out = match spec.mode() {
        Mode::EvolutionPlusLearning => Some(BufWriter::new(File::create(spec.learning_file())?)),
        Mode::EvolutionOnly => None,
    };
    let writer = OrderedWriter::new(gen_out, learn_out)?;
    let log = execute(spec, writer)?;
    write_runs(&spec.runs_file(), &log.runs)?;
    log::info!(
        "{} runs of {}: mean best fitness {:.5} cm/s, {} evaluations per run",
        log.runs.len(),
        spec.mode().tag(),
        log.mean_best_fitness(),
        spec.evaluations_per_run()
    );
    Ok(log)
}

fn execute<G: Write + Send, L: Write + Send>(
    spec: &ExperimentSpec,
    mut writer: OrderedWriter<G, L>,
) -> Result<ExperimentLog, ExperimentError> {
    let setup = spec.setup();
    let mode = spec.mode();
    let (tx, rx) = mpsc::channel::<Msg>();
    let runs: Vec<usize> = (0..spec.repetitions).collect();

    let result = std::thread::scope(|scope| {
        let handle = scope.spawn(move || {
            for msg in rx {
                let run = match &msg {
                    Msg::Generation(r, ..) | Msg::Finished(r, _) => *r,
                };
                writer.accept(run, msg);
            }
            writer.finish()
        });
        let outcomes = spec.execution.map(&runs, |&run| {
            let tx = tx.clone();
            let seed = spec.run_seed(run);
            let start = Instant::now();
            let outcome = run_evolution(&setup, seed, |report| {
                let _ = tx.send(Msg::Generation(
                    run,
                    GenerationRow::new(run, mode, report),
                    learning_rows(run, report),
                ));
            })
            .map_err(|source| ExperimentError::Run { run, source })
            .and_then(|state| {
                if spec.trajectories {
                    write_best(spec, run, &state)?;
                }
                Ok(state)
            });
            let summary = outcome.as_ref().map(|state| {
                let wall = start.elapsed().as_secs_f64();
                eprintln!(
                    "{} run {run} (seed {seed}) finished in {wall:.1} s",
                    mode.tag()
                );
                let pop = &state.population;
                RunSummary {
                    run,
                    seed,
                    final_mean_fitness: pop.iter().map(|i| i.fitness).sum::<f64>()
                        / pop.len() as f64,
                    final_max_fitness: state.best().fitness,
                    total_evaluations: state.evaluations,
                    wall_time_secs: wall,
                }
            });
            let _ = tx.send(Msg::Finished(
                run,
                summary.clone().map_err(|e| e.to_string()),
            ));
            outcome.map(|_| ())
        });
        drop(tx);
        let written = handle.join().expect("writer thread panicked");
        (outcomes, written)
    });

    let (outcomes, written) = result;
    for o in outcomes {
        o?;
    }
    written.map_err(|e| ExperimentError::Io(io::Error::other(e)))
}

/// Per-mode, per-generation aggregate over runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub mode: String,
    pub generation: usize,
    pub runs: usize,
    pub mean_fitness: f64,
    pub mean_fitness_lo: f64,
    pub mean_fitness_hi: f64,
    pub max_fitness: f64,
    pub max_fitness_lo: f64,
    pub max_fitness_hi: f64,
    pub mean_learning_delta: Option<f64>,
    pub learning_delta_lo: Option<f64>,
    pub learning_delta_hi: Option<f64>,
    pub absolute_size: f64,
    pub width: f64,
    pub proportion: f64,
    pub n_bricks: f64,
    pub rel_limbs: f64,
    pub n_active_hinges: f64,
    pub cumulative_evaluations: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalRow {
    pub mode: String,
    pub run: usize,
    pub mean_fitness: f64,
    pub max_fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub generations: Vec<SummaryRow>,
    pub finals: Vec<FinalRow>,
    /// Final mean fitness, learning runs against evolution-only runs.
    pub comparison: Option<RankSum>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

pub fn summarize(rows: &[GenerationRow]) -> Summary {
    let mut rng = ChaCha8Rng::seed_from_u64(BOOTSTRAP_SEED);
    let mut groups: BTreeMap<(String, usize), Vec<&GenerationRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.mode.clone(), r.generation))
            .or_default()
            .push(r);
    }
    let mut generations = Vec::with_capacity(groups.len());
    for ((mode, generation), g) in &groups {
        let col = |f: fn(&GenerationRow) -> f64| g.iter().map(|r| f(r)).collect::<Vec<_>>();
        let (mean_fitness, mean_fitness_lo, mean_fitness_hi) = bootstrap_ci(
            &col(|r| r.mean_fitness),
            BOOTSTRAP_RESAMPLES,
            0.95,
            &mut rng,
        );
        let (max_fitness, max_fitness_lo, max_fitness_hi) =
            bootstrap_ci(&col(|r| r.max_fitness), BOOTSTRAP_RESAMPLES, 0.95, &mut rng);
        let deltas: Vec<f64> = g.iter().filter_map(|r| r.mean_learning_delta).collect();
        let delta = (!deltas.is_empty())
            .then(|| bootstrap_ci(&deltas, BOOTSTRAP_RESAMPLES, 0.95, &mut rng));
        let mut desc = [0.0; 6];
        for r in g {
            for (d, v) in desc.iter_mut().zip(r.descriptors()) {
                *d += v / g.len() as f64;
            }
        }
        generations.push(SummaryRow {
            mode: mode.clone(),
            generation: *generation,
            runs: g.len(),
            mean_fitness,
            mean_fitness_lo,
            mean_fitness_hi,
            max_fitness,
            max_fitness_lo,
            max_fitness_hi,
            mean_learning_delta: delta.map(|d| d.0),
            learning_delta_lo: delta.map(|d| d.1),
            learning_delta_hi: delta.map(|d| d.2),
            absolute_size: desc[0],
            width: desc[1],
            proportion: desc[2],
            n_bricks: desc[3],
            rel_limbs: desc[4],
            n_active_hinges: desc[5],
            cumulative_evaluations: mean(&col(|r| r.cumulative_evaluations as f64)),
        });
    }

    let mut last: BTreeMap<(String, usize), &GenerationRow> = BTreeMap::new();
    for r in rows {
        let e = last.entry((r.mode.clone(), r.run)).or_insert(r);
        if r.generation > e.generation {
            *e = r;
        }
    }
    let finals: Vec<FinalRow> = last
        .values()
        .map(|r| FinalRow {
            mode: r.mode.clone(),
            run: r.run,
            mean_fitness: r.mean_fitness,
            max_fitness: r.max_fitness,
        })
        .collect();
    let of = |m: Mode| {
        finals
            .iter()
            .filter(|f| f.mode == m.tag())
            .map(|f| f.mean_fitness)
            .collect::<Vec<_>>()
    };
    let comparison = rank_sum(&of(Mode::EvolutionPlusLearning), &of(Mode::EvolutionOnly));
    Summary {
        generations,
        finals,
        comparison,
    }
}

/// Reads a generations CSV, checking its schema line.
pub fn read_generations(path: &Path) -> Result<Vec<GenerationRow>, ExperimentError> {
    let mut reader = BufReader::new(File::open(path)?);
    let mut first = String::new();
    reader.read_line(&mut first)?;
    let expected = schema_line("generations");
    if first.trim_end() != expected {
        return Err(ExperimentError::Schema {
            path: path.to_path_buf(),
            expected,
            found: first.trim_end().to_string(),
        });
    }
    let mut csv = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(reader);
    Ok(csv.deserialize().collect::<Result<_, _>>()?)
}

fn write_table<T: Serialize>(path: &Path, kind: &str, rows: &[T]) -> Result<(), ExperimentError> {
    let mut f = BufWriter::new(File::create(path)?);
    writeln!(f, "{}", schema_line(kind))?;
    let mut w = csv::Writer::from_writer(f);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Summarizes every `generations-*.csv` in `dir` and writes `summary.csv`,
/// `final.csv` and, when both modes are present, `ranksum.csv`.
pub fn summarize_dir(dir: &Path) -> Result<Summary, ExperimentError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("generations-") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(ExperimentError::Spec(format!(
            "no generations-*.csv files in {}",
            dir.display()
        )));
    }
    let mut rows = Vec::new();
    for f in &files {
        rows.extend(read_generations(f)?);
    }
    let summary = summarize(&rows);
    write_table(&dir.join("summary.csv"), "summary", &summary.generations)?;
    write_table(&dir.join("final.csv"), "final", &summary.finals)?;
    if let Some(c) = summary.comparison {
        #[derive(Serialize)]
        struct Row {
            n_learning: usize,
            n_evolution: usize,
            rank_sum: f64,
            p_value: f64,
            exact: bool,
        }
        write_table(
            &dir.join("ranksum.csv"),
            "ranksum",
            &[Row {
                n_learning: c.n1,
                n_evolution: c.n2,
                rank_sum: c.statistic,
                p_value: c.p_value,
                exact: c.exact,
            }],
        )?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(run: usize, generation: usize, mode: Mode, mean: f64) -> GenerationRow {
        GenerationRow {
            run,
            generation,
            mode: mode.tag().into(),
            mean_fitness: mean,
            max_fitness: 2.0 * mean,
            min_fitness: 0.0,
            mean_learning_delta: mode.learns().then_some(0.5),
            absolute_size: 4.0,
            width: 2.0,
            proportion: 0.5,
            n_bricks: 1.0,
            rel_limbs: 0.25,
            n_active_hinges: 2.0,
            cumulative_evaluations: 10 * generation,
        }
    }

    #[test]
    fn ordered_writer_reorders_runs() {
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        for (buf, order) in [(&mut buf_a, [0usize, 1]), (&mut buf_b, [1, 0])] {
            let mut w = OrderedWriter::<_, Vec<u8>>::new(Vec::new(), None).unwrap();
            for &run in &order {
                for g in 1..=2 {
                    w.accept(
                        run,
                        Msg::Generation(run, row(run, g, Mode::EvolutionOnly, 1.0), vec![]),
                    );
                }
                w.accept(
                    run,
                    Msg::Finished(
                        run,
                        Ok(RunSummary {
                            run,
                            seed: run as u64,
                            final_mean_fitness: 1.0,
                            final_max_fitness: 2.0,
                            total_evaluations: 20,
                            wall_time_secs: 0.0,
                        }),
                    ),
                );
            }
            let gens = std::mem::take(&mut w.generations.out);
            let log = w.finish().unwrap();
            assert_eq!(
                log.rows.iter().map(|r| r.run).collect::<Vec<_>>(),
                vec![0, 0, 1, 1]
            );
            *buf = gens;
        }
        assert_eq!(buf_a, buf_b);
        let text = String::from_utf8(buf_a).unwrap();
        assert!(text.starts_with("# evoro generations v1\nrun,generation,mode,"));
    }

    /// Accepts `limit` bytes, then fails.
    struct Flaky {
        data: Vec<u8>,
        limit: usize,
    }

    impl Write for Flaky {
        fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
            if self.data.len() + buf.len() > self.limit {
                return Err(io::Error::other("disk full"));
            }
            self.data.extend_from_slice(buf);
            Ok(buf.len())
        }
        fn flush(&mut self) -> io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn failed_run_leaves_a_marker() {
        let mut w = OrderedWriter::<_, Vec<u8>>::new(Vec::new(), None).unwrap();
        w.accept(
            0,
            Msg::Generation(0, row(0, 1, Mode::EvolutionOnly, 1.0), vec![]),
        );
        w.accept(0, Msg::Finished(0, Err("simulator exploded".into())));
        let text = String::from_utf8(w.generations.out.clone()).unwrap();
        assert!(
            text.ends_with("# partial log: run 0: simulator exploded\n"),
            "{text}"
        );
        assert!(w.finish().is_err());
    }

    #[test]
    fn io_failure_stops_the_log() {
        let sink = Flaky {
            data: Vec::new(),
            limit: 400,
        };
        let mut w = OrderedWriter::<_, Vec<u8>>::new(sink, None).unwrap();
        for g in 1..=20 {
            w.accept(
                0,
                Msg::Generation(0, row(0, g, Mode::EvolutionOnly, 1.0), vec![]),
            );
        }
        assert!(w.failure.is_some());
        let written = w.generations.out.data.len();
        assert!(written <= 400);
        assert!(w.finish().is_err());
    }

    #[test]
    fn summary_of_constant_runs() {
        let rows: Vec<_> = (0..3)
            .flat_map(|run| (1..=2).map(move |g| row(run, g, Mode::EvolutionPlusLearning, 2.0)))
            .collect();
        let s = summarize(&rows);
        assert_eq!(s.generations.len(), 2);
        let g = &s.generations[0];
        assert_eq!(
            (g.mean_fitness, g.mean_fitness_lo, g.mean_fitness_hi),
            (2.0, 2.0, 2.0)
        );
        assert_eq!(g.mean_learning_delta, Some(0.5));
        assert_eq!(g.runs, 3);
        assert_eq!(s.finals.len(), 3);
        assert!(s.finals.iter().all(|f| f.mean_fitness == 2.0));
        assert!(s.comparison.is_none());
    }

    #[test]
    fn summary_compares_modes() {
        let mut rows = Vec::new();
        for run in 0..4 {
            rows.push(row(run, 1, Mode::EvolutionOnly, run as f64));
            rows.push(row(run, 1, Mode::EvolutionPlusLearning, 10.0 + run as f64));
        }
        let s = summarize(&rows);
        let c = s.comparison.unwrap();
        assert!(c.exact);
        // learning runs hold ranks 5..=8
        assert_eq!(c.statistic, 26.0);
        assert!((c.p_value - 2.0 / 70.0).abs() < 1e-12);
        let single = summarize(&rows[..1]);
        let g = &single.generations[0];
        assert_eq!(g.mean_fitness_lo, g.mean_fitness_hi);
    }

    #[test]
    fn presets() {
        let desk = ExperimentSpec::new(Preset::Desk, Mode::EvolutionOnly);
        assert_eq!(desk.evaluations_per_run(), 110);
        assert_eq!(desk.repetitions, 3);
        let desk_learn = ExperimentSpec::new(Preset::Desk, Mode::EvolutionPlusLearning);
        assert_eq!(desk_learn.evaluations_per_run(), 110 * 51);
        let paper = ExperimentSpec::new(Preset::Paper, Mode::EvolutionOnly);
        assert_eq!(paper.evaluations_per_run(), 800);
        let paper_learn = ExperimentSpec::new(Preset::Paper, Mode::EvolutionPlusLearning);
        assert_eq!(paper_learn.evaluations_per_run(), 800 * 251);
        assert_eq!(paper.learner.generated(), 750);
        assert_eq!(paper.run_seed(3), 3);
    }
}
