use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use brewrate::experiment::pipeline::TrainingStats;
use brewrate::experiment::report::{read_predictions, unix_now};
use brewrate::experiment::run::{load_documents, run_experiment_with_progress, run_sweep, split_documents};
use brewrate::experiment::synthetic::{generate, write_csv, SyntheticDesign};
use brewrate::experiment::{emit_reports, ExperimentConfig, Manifest};
use brewrate::learners::Family;
use brewrate::metrics::MetricBlock;

#[derive(Parser)]
#[command(name = "brewrate", version, about = "Rating classification experiments on review text")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full experiment and write reports.
    Run(RunArgs),
    /// Write a seeded synthetic review corpus as CSV.
    Gen(GenArgs),
    /// Run only the attribute-count sweep.
    Sweep(RunArgs),
    /// Compute metrics for a predictions CSV (truth, pred, score columns).
    Score(ScoreArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Input CSV, for running without a config file.
    #[arg(long, conflicts_with = "config")]
    input: Option<PathBuf>,
    /// Rating cutoff for class 1; required with --input.
    #[arg(long, conflicts_with = "config")]
    threshold: Option<f64>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated families to run.
    #[arg(long, value_delimiter = ',')]
    families: Option<Vec<String>>,
    /// Comma-separated k values.
    #[arg(long, value_delimiter = ',')]
    k: Option<Vec<usize>>,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    seed: u64,
    #[arg(long, default_value_t = 400)]
    n: usize,
    #[arg(long, default_value_t = 93.0)]
    threshold: f64,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ScoreArgs {
    predictions: PathBuf,
}

enum Failure {
    Setup(anyhow::Error),
    Partial,
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Setup(e)
    }
}

fn resolve_config(args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match (&args.config, &args.input) {
        (Some(path), _) => ExperimentConfig::from_file(path)?,
        (None, Some(input)) => {
            let Some(threshold) = args.threshold else {
                bail!("--threshold is required with --input");
            };
            let Some(seed) = args.seed else {
                bail!("--seed is required with --input");
            };
            ExperimentConfig::with_defaults(input, threshold, seed)
        }
        (None, None) => bail!("either --config or --input is required"),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(names) = &args.families {
        cfg.families = names
            .iter()
            .map(|n| Family::parse(n.trim()).with_context(|| format!("unknown family `{n}`")))
            .collect::<Result<_>>()?;
    }
    if let Some(k) = &args.k {
        cfg.k_values = k.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(args: &RunArgs) -> Result<(), Failure> {
    let cfg = resolve_config(args)?;
    let started = unix_now();
    let bundle = run_experiment_with_progress(&cfg, &mut |msg| eprintln!("{msg}")).map_err(anyhow::Error::from)?;
    let manifest = Manifest::new(&cfg, started, unix_now()).context("hashing input")?;
    let written = emit_reports(&bundle, &manifest, &cfg.output_dir)
        .with_context(|| format!("writing reports to {}", cfg.output_dir.display()))?;
    eprintln!("wrote {} files to {}", written.len(), cfg.output_dir.display());
    if bundle.has_failures() {
        return Err(Failure::Partial);
    }
    Ok(())
}

fn sweep(args: &RunArgs) -> Result<(), Failure> {
    let cfg = resolve_config(args)?;
    let (docs, _) = load_documents(&cfg).map_err(anyhow::Error::from)?;
    let (train, val) = split_documents(&cfg, &docs).map_err(anyhow::Error::from)?;
    let stats =
        TrainingStats::fit(&train, cfg.min_df, cfg.variance_threshold).map_err(anyhow::Error::from)?;
    let report = match run_sweep(&cfg, &stats, &train, &val) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("sweep failed: {e}");
            return Err(Failure::Partial);
        }
    };
    std::fs::create_dir_all(&cfg.output_dir).context("creating output directory")?;
    let path = cfg.output_dir.join("sweep.csv");
    let file = std::fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    report.write_csv(file).context("writing sweep.csv")?;
    println!(
        "chosen attribute count: {}{}",
        report.chosen_count,
        if report.within_limit { "" } else { " (no candidate met the gap limit)" }
    );
    Ok(())
}

fn gen(args: &GenArgs) -> Result<(), Failure> {
    if args.n < 20 {
        return Err(anyhow::anyhow!("--n must be at least 20").into());
    }
    let reviews = generate(args.seed, args.n, args.threshold, &SyntheticDesign::default());
    match &args.out {
        Some(path) => {
            let file = std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_csv(&reviews, file).context("writing corpus")?;
        }
        None => write_csv(&reviews, std::io::stdout().lock()).context("writing corpus")?,
    }
    Ok(())
}

fn score(args: &ScoreArgs) -> Result<(), Failure> {
    let (truth, pred, scores) =
        read_predictions(&args.predictions).with_context(|| format!("reading {}", args.predictions.display()))?;
    let block = MetricBlock::compute(&truth, &pred, &scores).map_err(anyhow::Error::from)?;
    println!("{}", serde_json::to_string_pretty(&block).map_err(anyhow::Error::from)?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match &cli.command {
        Command::Run(a) => run(a),
        Command::Gen(a) => gen(a),
        Command::Sweep(a) => sweep(a),
        Command::Score(a) => score(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Setup(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Partial) => {
            eprintln!("finished with failed cells");
            ExitCode::from(2)
        }
    }
}
