mod commands;
mod config;
mod error;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use error::CliError;

#[derive(Parser, Debug)]
#[command(name = "socgat", version, about = "Socially-aware text classification on retweet graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Flat key=value file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Override one key; repeatable, the last assignment wins.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Args, Debug, Clone)]
pub struct TrainInputs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub task: String,
    #[arg(long)]
    pub variant: String,
    /// Word vectors, `token v1 ... vd` per line.
    #[arg(long)]
    pub words: Option<PathBuf>,
    /// Directory written by build-graph.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// Author embedding table (paragraph or node vectors).
    #[arg(long)]
    pub authors: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the retweet graph and print its statistics.
    BuildGraph {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        task: String,
        #[arg(long)]
        retweets: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Pretrain author embeddings: node2vec, paragraph vectors or random.
    Embed {
        #[arg(long)]
        method: String,
        #[arg(long)]
        graph: Option<PathBuf>,
        #[arg(long)]
        timelines: Option<PathBuf>,
        /// Corpus whose authors receive random vectors.
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        task: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Train one model, or several seeds with --runs.
    Train {
        #[command(flatten)]
        inputs: TrainInputs,
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[command(flatten)]
        common: Common,
    },
    /// Exhaustive hyperparameter search.
    GridSearch {
        #[command(flatten)]
        inputs: TrainInputs,
        #[command(flatten)]
        common: Common,
    },
    /// Score checkpoints and compare run sets with Welch's t test.
    Evaluate {
        #[arg(long)]
        checkpoint: Vec<PathBuf>,
        /// NAME=DIR; every *.ckpt below DIR belongs to the set.
        #[arg(long = "run-set", value_name = "NAME=DIR")]
        run_set: Vec<String>,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        task: String,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Attention weights of a LING_GAT checkpoint for chosen authors.
    InspectAttention {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Replace the graph stored in the checkpoint.
        #[arg(long)]
        graph: Option<PathBuf>,
        /// Comma-separated author ids.
        #[arg(long, value_delimiter = ',')]
        authors: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Copy an embedding table, optionally with a 2-D PCA projection.
    ExportEmbeddings {
        #[arg(long)]
        table: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        pca2d: Option<PathBuf>,
    },
    /// Generate a synthetic dataset.
    Synthesize {
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// The planted-attention fixture instead of the homophily generator.
        #[arg(long)]
        planted: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Re-run the command recorded in a manifest and check that every
    /// output hashes to the recorded value.
    Replay {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Graph statistics.
    Stats {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn require_seed(seed: Option<u64>, command: &str) -> Result<u64, CliError> {
    seed.ok_or_else(|| CliError::usage(format!("{command} requires an explicit --seed")))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::BuildGraph {
            corpus,
            task,
            retweets,
            out,
            common,
        } => commands::build_graph(&corpus, &task, &retweets, &out, &common),
        Command::Embed {
            method,
            graph,
            timelines,
            corpus,
            task,
            out,
            seed,
            common,
        } => {
            let seed = require_seed(seed, "embed")?;
            commands::embed(
                &method,
                commands::EmbedInputs {
                    graph: graph.as_deref(),
                    timelines: timelines.as_deref(),
                    corpus: corpus.as_deref(),
                    task: task.as_deref(),
                },
                &out,
                seed,
                &common,
            )
        }
        Command::Train { inputs, runs, common } => {
            let seed = require_seed(inputs.seed, "train")?;
            commands::train(&inputs, runs, seed, &common)
        }
        Command::GridSearch { inputs, common } => {
            let seed = require_seed(inputs.seed, "grid-search")?;
            commands::grid_search(&inputs, seed, &common)
        }
        Command::Evaluate {
            checkpoint,
            run_set,
            corpus,
            task,
            split,
            out,
            seed,
            common,
        } => commands::evaluate(&checkpoint, &run_set, &corpus, &task, &split, &out, seed.unwrap_or(0), &common),
        Command::InspectAttention {
            checkpoint,
            graph,
            authors,
            out,
        } => commands::inspect_attention(&checkpoint, graph.as_deref(), &authors, &out),
        Command::ExportEmbeddings { table, out, pca2d } => commands::export_embeddings(&table, &out, pca2d.as_deref()),
        Command::Synthesize {
            out,
            seed,
            planted,
            common,
        } => {
            let seed = require_seed(seed, "synthesize")?;
            commands::synthesize(&out, seed, planted, &common)
        }
        Command::Stats { graph, out } => commands::stats(&graph, &out),
        Command::Replay { manifest } => replay(&manifest),
    }
}

fn replay(path: &std::path::Path) -> Result<(), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let recorded: manifest::RunManifest = serde_json::from_str(&text)?;
    if recorded.argv.first().is_some_and(|c| c == "replay") {
        return Err(CliError::usage("cannot replay a replay"));
    }
    std::env::set_current_dir(&recorded.cwd).map_err(|e| CliError::io(std::path::Path::new(&recorded.cwd), e))?;
    for (input, hash) in &recorded.inputs {
        if manifest::input_sha256(std::path::Path::new(input))? != *hash {
            return Err(CliError::new("E_REPLAY", format!("input {input} changed since the recorded run")));
        }
    }
    let cli = Cli::try_parse_from(std::iter::once("socgat".to_string()).chain(recorded.argv.iter().cloned()))
        .map_err(|e| CliError::usage(e.to_string()))?;
    manifest::set_argv(recorded.argv.clone());
    run(cli)?;
    let mut differing = Vec::new();
    for (output, hash) in &recorded.outputs {
        if manifest::input_sha256(std::path::Path::new(output))? != *hash {
            differing.push(output.as_str());
        }
    }
    if !differing.is_empty() {
        return Err(CliError::new("E_REPLAY", format!("outputs differ: {}", differing.join(", "))));
    }
    println!("replayed `{}`: {} outputs identical", recorded.argv.join(" "), recorded.outputs.len());
    Ok(())
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    if argv.first().is_none_or(|c| c != "replay") {
        manifest::set_argv(argv);
    }
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            let first = e.to_string().lines().next().unwrap_or("invalid arguments").trim_start_matches("error: ").to_string();
            eprintln!("{}", CliError::usage(first));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            if e.code == "E_USAGE" {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
