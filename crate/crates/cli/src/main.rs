use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use typeguess::commands::{self, CommandError};
use typeguess::corpus::SplitKind;
use typeguess::tokenizer::Trim;

/// Content-based file-type detection.
#[derive(Parser)]
#[command(name = "typeguess", version)]
struct Cli {
    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan a directory tree, filter it, and write a split corpus manifest.
    BuildCorpus {
        root: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// `key = value` corpus configuration.
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
    /// Build the vocabulary and train a model from a corpus manifest.
    Train {
        manifest: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// `key = value` training configuration.
        #[arg(short, long)]
        config: Option<PathBuf>,
    },
    /// Predict the type of each file from its content.
    Predict {
        model: PathBuf,
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(short = 'k', long, default_value_t = 5)]
        top_k: usize,
    },
    /// Evaluate a model on one split of a corpus manifest.
    Eval {
        model: PathBuf,
        manifest: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(short, long, default_value = "test")]
        split: SplitKind,
        /// Also derive confusion groups from the validation split.
        #[arg(long)]
        confusion_groups: bool,
    },
    /// Print the tokens of a file, one per line.
    Tokenize {
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        trim_head: usize,
        #[arg(long, default_value_t = 0)]
        trim_tail: usize,
    },
}

fn run(command: Command, out: &mut dyn Write) -> Result<(), CommandError> {
    match command {
        Command::BuildCorpus {
            root,
            out: manifest,
            config,
        } => commands::cmd_build_corpus(&root, config.as_deref(), &manifest, out),
        Command::Train {
            manifest,
            out: model,
            config,
        } => commands::cmd_train(&manifest, config.as_deref(), &model, out),
        Command::Predict {
            model,
            inputs,
            top_k,
        } => commands::cmd_predict(&model, &inputs, top_k, out),
        Command::Eval {
            model,
            manifest,
            out: report,
            split,
            confusion_groups,
        } => commands::cmd_eval(&model, &manifest, split, &report, confusion_groups, out),
        Command::Tokenize {
            input,
            trim_head,
            trim_tail,
        } => commands::cmd_tokenize(&input, Trim::new(trim_head, trim_tail), out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(cli.command, &mut out).and_then(|()| out.flush().map_err(CommandError::from)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("typeguess: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
