use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use wordlearn::elicitation::{ElicitationConfig, Strategy};
use wordlearn::ontology::{NodeKind, Ontology};
use wordlearn::service::{serve, ServiceConfig};
use wordlearn::sim::{
    emit_batch, emit_report, run_batch, run_scenario, BatchConfig, BatchSource, GeneratorSpec, Learner,
    ReportFormat,
};

#[derive(Parser)]
#[command(name = "wordlearn", version, about = "Learn word meanings over a knowledge graph")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay scripted selections for one word and report each posterior.
    Simulate(SimulateArgs),
    /// Compare learners over many simulated teaching sessions.
    Batch(BatchArgs),
    /// Check that an ontology file loads.
    Validate {
        #[arg(long)]
        ontology: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    ontology: PathBuf,
    #[arg(long)]
    word: String,
    /// Comma-separated entity ids or labels.
    #[arg(long, default_value = "")]
    observations: String,
    #[arg(long, default_value_t = 3)]
    k: usize,
    #[arg(long, default_value = "infogain")]
    strategy: Strategy,
    #[arg(long, default_value_t = 0.9)]
    threshold: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "table")]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "bayes")]
    learner: Learner,
    #[arg(long, conflicts_with = "generate", required_unless_present = "generate")]
    ontology: Option<PathBuf>,
    /// Random trees per trial, as `depth:D,branch:B,leaves:E`.
    #[arg(long = "gen", value_name = "SPEC")]
    generate: Option<GeneratorSpec>,
    /// Fixed true concept id (only with --ontology).
    #[arg(long, requires = "ontology")]
    target: Option<String>,
    #[arg(long, default_value_t = 10)]
    max_observations: usize,
    #[arg(long, default_value_t = 0.9)]
    threshold: f64,
    #[arg(long, default_value = "table")]
    format: ReportFormat,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> anyhow::Result<ExitCode> {
    match command {
        Command::Simulate(a) => {
            let ontology = Arc::new(Ontology::load(&a.ontology)?);
            let observations: Vec<&str> = a
                .observations
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .collect();
            let cfg = ElicitationConfig {
                k: a.k,
                strategy: a.strategy,
                threshold: a.threshold,
                seed: a.seed,
            };
            let result = run_scenario(&ontology, &a.word, &observations, &cfg)?;
            emit_report(&result, a.format, a.out.as_deref())?;
            Ok(if result.committed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Command::Batch(a) => {
            let source = match (a.ontology, a.generate) {
                (Some(path), _) => BatchSource::Ontology(Arc::new(Ontology::load(&path)?)),
                (None, Some(spec)) => BatchSource::Generated(spec),
                (None, None) => anyhow::bail!("one of --ontology or --gen is required"),
            };
            let cfg = BatchConfig {
                trials: a.trials,
                seed: a.seed,
                learner: a.learner,
                target: a.target,
                max_observations: a.max_observations,
                threshold: a.threshold,
            };
            let report = run_batch(&source, &cfg)?;
            emit_batch(&report, a.format, a.out.as_deref())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate { ontology } => {
            let o = Ontology::load(&ontology)?;
            let empty = o
                .nodes()
                .filter(|&ix| o.kind(ix) == NodeKind::Concept && o.extension_of(ix) == 0)
                .count();
            println!(
                "ok: root {}, {} concepts ({} without entities), {} entities",
                o.id(o.root()),
                o.concept_count(),
                empty,
                o.entity_count()
            );
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve { config } => {
            let config = ServiceConfig::load(&config)?;
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(config))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
