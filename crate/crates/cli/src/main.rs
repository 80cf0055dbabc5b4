use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;

use sle::aggregate::MethodVariant;
use sle::experiments::dataset::{read_dataset, write_dataset, Dataset};
use sle::experiments::training::{evaluate_dataset, train_on_dataset};
use sle::experiments::{execute_sweep, write_loss_trace, write_reports, ExperimentSpec, Scenario, SweepOptions, SweepOutcome};
use sle::model::{read_model, write_model, LossKind, TrainConfig};
use sle::synth::{generate, SyntheticConfig};
use sle::{ErrorKind, Result, SleError};

#[derive(Parser)]
#[command(name = "sle", version, about = "Subjective-logic label encodings: synthetic data, aggregation sweeps and model training")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic annotation dataset from a TOML config.
    Generate(GenerateArgs),
    /// Compare MV, Soft and SLE aggregation across uncertainty sweeps.
    Sweep(SweepArgs),
    /// Train a Dirichlet-output model on a dataset.
    Train(TrainArgs),
    /// Score a trained model against a dataset's true labels.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Generator config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Dataset path; the manifest is written next to it.
    #[arg(long)]
    out: PathBuf,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SweepArgs {
    /// Experiment spec (TOML); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    /// Comma-separated list, e.g. `mv,soft,sle`.
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<MethodVariant>>,
    /// Comma-separated scenario names.
    #[arg(long, value_delimiter = ',')]
    scenarios: Option<Vec<Scenario>>,
    #[arg(long)]
    filter_threshold: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Worker threads; defaults to the number of CPUs.
    #[arg(long)]
    jobs: Option<usize>,
    /// Stop after this many tasks, leaving a resumable partial result.
    #[arg(long, hide = true)]
    stop_after: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset (JSONL with manifest).
    dataset: PathBuf,
    /// Training config (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for model.txt, loss.csv and report.csv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    loss: Option<LossKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// Smoothing applied to dogmatic targets.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Model file written by `train`.
    model: PathBuf,
    /// Dataset (JSONL with manifest).
    dataset: PathBuf,
    /// Report CSV; printed to stdout only when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| SleError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn with_path(path: &Path, err: SleError) -> SleError {
    match err {
        SleError::Config(msg) => SleError::Config(format!("{}: {msg}", path.display())),
        other => other,
    }
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|source| SleError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let mut config = SyntheticConfig::from_toml(&read_text(&args.config)?).map_err(|e| with_path(&args.config, e))?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let dataset = Dataset::from_synthetic(generate(&config)?, &config);
    write_dataset(&args.out, &dataset)?;
    let man = &dataset.manifest;
    println!("wrote {}", args.out.display());
    println!("items {}  annotators {}  classes {}  annotations {}", man.n_items, man.m, man.k, dataset.records.len());
    println!("mean annotation-vs-truth JSD {:.4}", dataset.mean_annotation_jsd()?);
    for (i, p) in man.annotator_profiles.iter().enumerate() {
        println!("  annotator {i}: confidence {:.3}  reliability {:.3}", p.confidence, p.reliability);
    }
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let mut spec = match &args.config {
        Some(path) => ExperimentSpec::from_toml(&read_text(path)?).map_err(|e| with_path(path, e))?,
        None => ExperimentSpec::default(),
    };
    if let Some(out) = args.out {
        spec.output_dir = out;
    }
    if let Some(seed) = args.seed {
        spec.master_seed = seed;
    }
    if let Some(runs) = args.runs {
        spec.runs = runs;
    }
    if let Some(methods) = args.methods {
        spec.methods = methods;
    }
    if let Some(scenarios) = args.scenarios {
        spec.scenarios = scenarios;
    }
    if let Some(t) = args.filter_threshold {
        spec.filter_threshold = t;
    }
    if let Some(e) = args.epsilon {
        spec.epsilon = e;
    }
    spec.validate()?;
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if jobs == 0 {
        return Err(SleError::Config("--jobs must be >= 1".into()));
    }
    let options = SweepOptions {
        jobs,
        stop_after: args.stop_after,
    };
    let out = spec.output_dir.clone();
    info!("sweep: {} tasks on {jobs} threads into {}", spec.tasks().len(), out.display());
    match execute_sweep(&spec, &out, &options)? {
        SweepOutcome::Complete(result) => {
            println!("wrote {} rows to {}", result.rows.len(), out.join("rows.csv").display());
            println!("{:<22} {:<6} {:<9} {:>7} {:>7} {:>7}", "scenario", "method", "variant", "f1", "jsd", "nes");
            for &scenario in &spec.scenarios {
                for &method in &spec.methods {
                    for filtered in [false, true] {
                        if let Some((f1, jsd, nes)) = result.scenario_mean(scenario, method, filtered) {
                            let variant = if filtered { "filtered" } else { "all" };
                            println!("{:<22} {:<6} {variant:<9} {f1:>7.3} {jsd:>7.3} {nes:>7.3}", scenario.name(), method.name());
                        }
                    }
                }
            }
        }
        SweepOutcome::Interrupted { completed, remaining } => {
            println!("stopped after {completed} tasks; {remaining} remain. Rerun the same command to resume.");
        }
    }
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => TrainConfig::from_toml(&read_text(path)?).map_err(|e| with_path(path, e))?,
        None => TrainConfig::default(),
    };
    if let Some(loss) = args.loss {
        config.loss = loss;
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(e) = args.epsilon {
        config.epsilon_smooth = e;
    }
    config.validate()?;
    let dataset = read_dataset(&args.dataset)?;
    let run = train_on_dataset(&dataset, &config)?;
    create_dir(&args.out)?;
    write_model(&args.out.join("model.txt"), &run.params)?;
    write_loss_trace(&args.out.join("loss.csv"), &run.loss_trace)?;
    write_reports(&args.out.join("report.csv"), std::slice::from_ref(&run.report))?;
    let first = run.loss_trace.first().copied().unwrap_or(f64::NAN);
    let last = run.loss_trace.last().copied().unwrap_or(f64::NAN);
    println!(
        "{} loss {first:.6} -> {last:.6} over {} epochs ({} train / {} held-out items)",
        config.loss.name(),
        config.epochs,
        run.train_items.len(),
        run.held_out_items.len()
    );
    let r = &run.report;
    println!("{} f1 {:.4}  jsd {:.4}  nes {:.4}", r.sweep_point, r.f1, r.jsd, r.nes);
    println!("wrote {}", args.out.display());
    Ok(())
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let params = read_model(&args.model)?;
    let dataset = read_dataset(&args.dataset)?;
    let name = args.model.file_stem().and_then(|s| s.to_str()).unwrap_or("model");
    let report = evaluate_dataset(&params, &dataset, name)?;
    println!("f1 {:.4}  jsd {:.4}  nes {:.4}  items {}", report.f1, report.jsd, report.nes, report.n_items);
    if let Some(out) = &args.out {
        write_reports(out, std::slice::from_ref(&report))?;
        println!("wrote {}", out.display());
    }
    Ok(())
}

fn exit_code(kind: ErrorKind) -> u8 {
    match kind {
        ErrorKind::Validation => 2,
        ErrorKind::Io => 3,
        ErrorKind::Numerical => 4,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SLE_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate(a) => cmd_generate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Train(a) => cmd_train(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.kind()))
        }
    }
}
