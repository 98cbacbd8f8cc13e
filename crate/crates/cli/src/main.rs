//! Pipeline driver: synthesis, ingestion, graph building, complexity
//! targets, training, export, evaluation, and gradient checking as
//! subcommands over a shared flat config format.
//!
//! Exit codes: 0 success, 1 validation/usage error, 2 numeric failure.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use config::Settings;

#[derive(Parser)]
#[command(name = "mooc-embed", version, about = "MOOC entity embedding pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// Flat key=value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed override (wins over the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for stage results and the manifest.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus with planted prerequisite chains.
    Synth {
        #[command(flatten)]
        common: Common,
    },
    /// Validate a corpus directory and write summary statistics.
    Ingest {
        #[command(flatten)]
        common: Common,
        /// Corpus directory (concepts.jsonl, lectures.jsonl, ...).
        #[arg(long)]
        data: PathBuf,
    },
    /// Build the relation graph and export its edge list.
    BuildGraph {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Compute concept complexity targets.
    Complexity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
    },
    /// Train embeddings; optionally resume from a checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        /// Resume from this checkpoint instead of initializing.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Export embeddings from a checkpoint without further training.
    Export {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Evaluate prerequisite prediction over exported embeddings.
    EvalPrereq {
        #[command(flatten)]
        common: Common,
        /// Embeddings file in the exchange format.
        #[arg(long)]
        embeddings: PathBuf,
        /// Prerequisite labels (prereqs.jsonl).
        #[arg(long)]
        labels: PathBuf,
    },
    /// Evaluate next-lecture recommendation over exported embeddings.
    EvalRec {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        embeddings: PathBuf,
        /// Corpus directory supplying interaction logs and candidates.
        #[arg(long)]
        data: PathBuf,
    },
    /// Verify tape gradients against central differences.
    GradCheck {
        #[command(flatten)]
        common: Common,
    },
    /// Merge stage result files into one report.
    Report {
        #[command(flatten)]
        common: Common,
        /// results.tsv files from eval stages.
        #[arg(required = true)]
        results: Vec<PathBuf>,
    },
}

/// Marker for failures that must map to exit code 2.
#[derive(Debug)]
pub struct NumericFailure(pub String);

impl std::fmt::Display for NumericFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "numeric failure: {}", self.0)
    }
}

impl std::error::Error for NumericFailure {}

fn exit_code_for(err: &anyhow::Error) -> i32 {
    use mooc_embed::numerics::NumericError;
    use mooc_embed::trainer::TrainError;
    for cause in err.chain() {
        if cause.is::<NumericFailure>() || cause.is::<NumericError>() {
            return 2;
        }
        if let Some(train) = cause.downcast_ref::<TrainError>() {
            if matches!(
                train,
                TrainError::NonFinite { .. } | TrainError::Starvation { .. } | TrainError::Numeric(_)
            ) {
                return 2;
            }
        }
    }
    1
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    let result = match cli.command {
        Command::Synth { common } => with_settings(&common, commands::synth),
        Command::Ingest { common, data } => {
            with_settings(&common, |s, out| commands::ingest(s, out, &data))
        }
        Command::BuildGraph { common, data } => {
            with_settings(&common, |s, out| commands::build_graph(s, out, &data))
        }
        Command::Complexity { common, data } => {
            with_settings(&common, |s, out| commands::complexity(s, out, &data))
        }
        Command::Train {
            common,
            data,
            resume,
        } => with_settings(&common, |s, out| {
            commands::train(s, out, &data, resume.as_deref())
        }),
        Command::Export {
            common,
            data,
            checkpoint,
        } => with_settings(&common, |s, out| {
            commands::export(s, out, &data, &checkpoint)
        }),
        Command::EvalPrereq {
            common,
            embeddings,
            labels,
        } => with_settings(&common, |s, out| {
            commands::eval_prereq(s, out, &embeddings, &labels)
        }),
        Command::EvalRec {
            common,
            embeddings,
            data,
        } => with_settings(&common, |s, out| {
            commands::eval_rec(s, out, &embeddings, &data)
        }),
        Command::GradCheck { common } => with_settings(&common, commands::grad_check),
        Command::Report { common, results } => {
            with_settings(&common, |s, out| commands::report(s, out, &results))
        }
    };
    match result {
        Ok(()) => {}
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(exit_code_for(&e));
        }
    }
}

fn with_settings(
    common: &Common,
    run: impl FnOnce(&Settings, &std::path::Path) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    let settings = Settings::load(common.config.as_deref(), common.seed)?;
    run(&settings, &common.out)
}
