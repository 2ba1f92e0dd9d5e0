use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use evoro::evolution::Mode;
use evoro::exec::Execution;
use evoro::experiment::{run_experiment, summarize_dir, ExperimentSpec, Preset};

#[derive(Parser)]
#[command(
    name = "evoro",
    version,
    about = "Evolve modular robots with and without lifetime learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run repeated seeded experiments and write CSVs.
    Run(RunArgs),
    /// Aggregate the CSVs in a results directory.
    Summarize {
        #[arg(long = "in", value_name = "DIR")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    #[value(name = "evo")]
    Evo,
    #[value(name = "evo+learn")]
    EvoLearn,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    Paper,
    Desk,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "desk")]
    preset: PresetArg,
    /// Master seed; run i uses seed + i.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Repetitions (defaults to the preset's).
    #[arg(long)]
    reps: Option<usize>,
    /// TOML file overriding any preset field.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Dump body, genotype and trajectory of each run's best robot.
    #[arg(long)]
    trajectories: bool,
    /// Disable the thread pool.
    #[arg(long)]
    sequential: bool,
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

fn with_config(spec: &ExperimentSpec, path: &Path) -> Result<ExperimentSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let over: toml::Table =
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut base = toml::Table::try_from(spec).context("encoding preset")?;
    merge(&mut base, over);
    base.try_into()
        .with_context(|| format!("applying {}", path.display()))
}

fn build_spec(args: &RunArgs) -> Result<ExperimentSpec> {
    let mode = match args.mode {
        ModeArg::Evo => Mode::EvolutionOnly,
        ModeArg::EvoLearn => Mode::EvolutionPlusLearning,
    };
    let preset = match args.preset {
        PresetArg::Paper => Preset::Paper,
        PresetArg::Desk => Preset::Desk,
    };
    let mut spec = ExperimentSpec::new(preset, mode);
    if let Some(path) = &args.config {
        spec = with_config(&spec, path)?;
        if spec.mode() != mode {
            bail!(
                "config sets mode {} but --mode is {}",
                spec.mode().tag(),
                mode.tag()
            );
        }
    }
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    if let Some(out) = &args.out {
        spec.out_dir = out.clone();
    }
    if let Some(reps) = args.reps {
        spec.repetitions = reps;
    }
    spec.trajectories |= args.trajectories;
    if args.sequential {
        spec.execution = Execution::Sequential;
    }
    Ok(spec)
}

fn run(args: RunArgs) -> Result<()> {
    let spec = build_spec(&args)?;
    let log = run_experiment(&spec)?;
    println!("mode            {}", spec.mode().tag());
    println!("runs            {}", log.runs.len());
    println!("evaluations/run {}", spec.evaluations_per_run());
    for r in &log.runs {
        println!(
            "run {:>3}  seed {:>6}  final mean {:.6}  final max {:.6}  evals {}  {:.1} s",
            r.run,
            r.seed,
            r.final_mean_fitness,
            r.final_max_fitness,
            r.total_evaluations,
            r.wall_time_secs
        );
    }
    println!("mean best fitness {:.6} cm/s", log.mean_best_fitness());
    println!("output          {}", spec.out_dir.display());
    Ok(())
}

fn summarize(dir: &Path) -> Result<()> {
    let s = summarize_dir(dir)?;
    println!("mode       gen  runs  mean fitness [95% CI]            max fitness");
    for g in &s.generations {
        println!(
            "{:<9} {:>4} {:>5}  {:.6} [{:.6}, {:.6}]  {:.6}",
            g.mode,
            g.generation,
            g.runs,
            g.mean_fitness,
            g.mean_fitness_lo,
            g.mean_fitness_hi,
            g.max_fitness
        );
    }
    if let Some(c) = s.comparison {
        println!(
            "rank-sum (learning vs evolution, final mean fitness): W = {}, p = {:.4}{}",
            c.statistic,
            c.p_value,
            if c.exact {
                " (exact)"
            } else {
                " (normal approx.)"
            }
        );
    }
    println!("wrote summary.csv and final.csv in {}", dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args),
        Command::Summarize { input } => summarize(&input),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
