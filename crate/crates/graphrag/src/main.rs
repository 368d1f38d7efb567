use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use graphrag::cli::{cmd_anonymize, cmd_build, cmd_eval, cmd_query};
use graphrag::config::PipelineConfig;
use graphrag::retrieval::Mode;
use graphrag::Error;

#[derive(Parser)]
#[command(
    name = "graphrag",
    about = "Graph-based retrieval-augmented generation pipeline"
)]
struct Cli {
    /// Pipeline configuration file.
    #[arg(long, global = true, default_value = "config.json")]
    config: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Extract the corpus, detect communities, and persist all artifacts.
    Build {
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        chunk_size: Option<usize>,
        /// Schema-expansion confidence threshold.
        #[arg(long)]
        mu: Option<f64>,
    },
    /// Answer one question over the built artifacts.
    Query {
        question: String,
        #[arg(long, default_value = "open")]
        mode: String,
        /// Skip the reason/reflect loop (single-pass).
        #[arg(long)]
        no_agent: bool,
        #[arg(long)]
        top_k: Option<usize>,
        /// Write the full agent trace to this file as JSON.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Run the benchmark harness over a dataset.
    Eval {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value = "open")]
        mode: String,
        #[arg(long)]
        no_agent: bool,
        #[arg(long)]
        top_k: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Anonymize a corpus with a dictionary (or build one first).
    Anonymize {
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Existing dictionary file; mutually exclusive with --build-dict.
        #[arg(long, conflicts_with = "build_dict")]
        dictionary: Option<PathBuf>,
        /// Construct the dictionary by persons/locations extraction.
        #[arg(long)]
        build_dict: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_mode(text: &str) -> Result<Mode, Error> {
    Mode::parse(text)
        .ok_or_else(|| Error::Config(format!("invalid mode '{text}'; use open or reject")))
}

fn run(cli: Cli) -> Result<(), Error> {
    let mut config = PipelineConfig::load(&cli.config)?;
    match cli.command {
        Command::Build {
            workers,
            chunk_size,
            mu,
        } => {
            if let Some(workers) = workers {
                config.extraction.workers = workers;
            }
            if let Some(chunk_size) = chunk_size {
                config.extraction.chunk_size = chunk_size;
            }
            if let Some(mu) = mu {
                config.extraction.mu = mu;
            }
            let cost = cmd_build(&config)?;
            println!(
                "build complete: {} llm calls, {} prompt tokens, {} completion tokens",
                cost.llm_calls, cost.prompt_tokens, cost.completion_tokens
            );
        }
        Command::Query {
            question,
            mode,
            no_agent,
            top_k,
            trace,
        } => {
            let mode = parse_mode(&mode)?;
            if let Some(top_k) = top_k {
                config.retrieval.top_k = top_k;
            }
            let (answer, _) = cmd_query(&config, &question, mode, !no_agent, trace.as_deref())?;
            println!("{answer}");
        }
        Command::Eval {
            dataset,
            mode,
            no_agent,
            top_k,
            out,
        } => {
            let mode = parse_mode(&mode)?;
            if let Some(top_k) = top_k {
                config.retrieval.top_k = top_k;
            }
            let dataset = dataset
                .or_else(|| config.paths.dataset.clone())
                .ok_or_else(|| Error::Config("no dataset given (--dataset or config)".into()))?;
            let report = cmd_eval(&config, &dataset, mode, !no_agent, out.as_deref())?;
            println!("{}", report.summary());
        }
        Command::Anonymize {
            corpus,
            dictionary,
            build_dict,
            out,
        } => {
            if dictionary.is_none() && !build_dict {
                return Err(Error::Config(
                    "pass --dictionary FILE or --build-dict".into(),
                ));
            }
            let corpus = corpus.unwrap_or_else(|| config.paths.corpus.clone());
            let (replacements, entries) =
                cmd_anonymize(&config, &corpus, dictionary.as_deref(), out.as_deref())?;
            println!("anonymized: {replacements} replacements using {entries} dictionary entries");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
