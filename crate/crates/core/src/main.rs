use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use biasbeam::config::RunConfig;
use biasbeam::pipeline::{
    stage_ingest, stage_pipeline, stage_report, stage_sample, stage_topics_fit,
    stage_topics_predict, stage_train, stage_weat, StageOutput,
};

/// Corpus analytics: stratified skip-gram embeddings, topic discovery, and
/// SC-WEAT gender-bias tables over song lyrics.
#[derive(Parser)]
#[command(name = "biasbeam", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run configuration file (TOML).
    #[arg(long, global = true, default_value = "run.toml")]
    config: PathBuf,

    /// Override every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Override the training worker count (1 = fully deterministic).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Override the output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Read and validate the corpus files, writing an ingest report.
    Ingest {
        /// Also write the ingest report JSON to this path.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Draw the seeded per-stratum sample used for training and fitting.
    Sample,
    /// Train per-stratum and corpus-wide embeddings on the sample.
    Train,
    /// Fit the topic model (reduce, cluster, c-TF-IDF) on sampled doc vectors.
    TopicsFit,
    /// Predict topic assignments for the entire corpus.
    TopicsPredict,
    /// Compute the SC-WEAT bias table over per-stratum embeddings.
    Weat,
    /// Emit the report bundle (figures data plus run metadata).
    Report,
    /// Run every stage in order.
    Pipeline {
        /// Stop after writing the sample.
        #[arg(long)]
        sample_only: bool,
    },
}

fn emit(outputs: &[StageOutput]) {
    for output in outputs {
        println!("{}", output.to_json_line());
    }
}

fn run(cli: Cli) -> biasbeam::Result<()> {
    let mut config = RunConfig::load(&cli.config)?;
    if let Some(seed) = cli.seed {
        config.override_seed(seed);
    }
    if let Some(workers) = cli.workers {
        config.override_workers(workers);
    }
    if let Some(out) = cli.out {
        config.output.dir = out;
    }
    config.validate()?;
    let seed_used = config.sampling.seed;
    let outputs = match cli.command {
        Command::Ingest { report } => vec![stage_ingest(&config, report.as_deref())?],
        Command::Sample => vec![stage_sample(&config)?],
        Command::Train => vec![stage_train(&config)?],
        Command::TopicsFit => vec![stage_topics_fit(&config)?],
        Command::TopicsPredict => vec![stage_topics_predict(&config)?],
        Command::Weat => vec![stage_weat(&config)?],
        Command::Report => vec![stage_report(&config, seed_used)?],
        Command::Pipeline { sample_only } => stage_pipeline(&config, sample_only)?,
    };
    emit(&outputs);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter("BIASBEAM_LOG")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
