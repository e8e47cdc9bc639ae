use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use hoprank::pipeline::{Pipeline, PipelineConfig};

#[derive(Parser)]
#[command(name = "hoprank", version, about = "Hop-ranked preference learning for few-shot node classification")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Global seed; overrides the file's `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory shared by all stages.
    #[arg(long, global = true, default_value = "hoprank-out")]
    out: PathBuf,

    /// Worker threads; 0 runs single-threaded.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate the synthetic graph.
    Synth,
    /// Build the preference dataset.
    Sample,
    /// Train the scorer on the preference dataset.
    Train,
    /// Classify the test split by anchor voting.
    Infer,
    /// Score predictions and run the configured sweeps and ablations.
    Eval,
    /// Collect available results into a report directory.
    Report,
    /// Edge homophily and class agreement per hop distance.
    Homophily,
}

fn run(cli: &Cli) -> hoprank::Result<String> {
    let config = PipelineConfig::load(cli.config.as_deref(), cli.seed)?;
    let pipeline = Pipeline::new(config, &cli.out);
    match cli.command {
        Command::Synth => pipeline.synth(),
        Command::Sample => pipeline.sample(),
        Command::Train => pipeline.train(),
        Command::Infer => pipeline.infer(),
        Command::Eval => pipeline.eval(),
        Command::Report => pipeline.report(),
        Command::Homophily => pipeline.homophily(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(&cli) {
        Ok(msg) => {
            if !cli.quiet {
                println!("{msg}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
