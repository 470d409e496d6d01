//! `ripple` — experiment driver for knowledge-graph preference propagation.
//!
//! Subcommands cover the full workflow: `prepare` ingests raw TSVs and
//! caches artifacts, `train` fits and checkpoints a model, `eval` scores a
//! split, `recommend` ranks items for one user, `explain` exports the scored
//! propagation subgraph behind one prediction, and `analyze` measures how
//! graph proximity tracks co-consumption.
//!
//! Configuration comes from `--config <TOML>` with per-flag overrides; all
//! randomness derives from the single configured seed. Verbosity is
//! controlled by the `RIPPLE_LOG` environment variable (error/warn/info/
//! debug/trace). Exit codes: 2 missing input file, 3 malformed input line,
//! 4 missing checkpoint, 5 unknown user or item, 1 anything else.

mod commands;
mod config;
mod error;
mod io;

use clap::{Parser, Subcommand};

use config::{Overrides, RunConfig, SplitChoice};

#[derive(Parser)]
#[command(name = "ripple", version, about = "Knowledge-graph preference-propagation experiments")]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Ingest raw TSVs; write the interned dataset, splits, and ripple cache.
    Prepare,
    /// Train a model and write checkpoint.bin plus train_log.jsonl.
    Train,
    /// Score a split with the checkpoint and report metrics.
    Eval {
        /// Split to score (default from config: test).
        #[arg(long, value_enum)]
        split: Option<SplitChoice>,
        /// Ranking cutoffs, e.g. 1,5,10; bare `--top-k` disables the table.
        #[arg(long, value_delimiter = ',', value_name = "K,K,...", num_args = 0..)]
        top_k: Option<Vec<usize>>,
    },
    /// Print the top-K unseen items for one user.
    Recommend {
        /// User name as it appears in the ratings file.
        #[arg(long)]
        user: String,
        /// How many items to print.
        #[arg(long, default_value_t = 10)]
        k: usize,
    },
    /// Export why the model scores one (user, item) pair as it does.
    Explain {
        /// User name as it appears in the ratings file.
        #[arg(long)]
        user: Option<String>,
        /// Item name as it appears in the ratings file.
        #[arg(long)]
        item: Option<String>,
        /// Log-scale relevance cutoff for retained edges (negative values
        /// like -1.0 or -inf are fine).
        #[arg(long, allow_hyphen_values = true)]
        threshold: Option<f64>,
    },
    /// Compare k-hop neighborhood overlap of co-rated vs other item pairs.
    Analyze {
        /// Item pairs to sample.
        #[arg(long)]
        pair_count: Option<usize>,
        /// Deepest neighborhood compared.
        #[arg(long)]
        max_hop: Option<usize>,
    },
}

fn main() {
    env_logger::Builder::from_env(
        env_logger::Env::new().filter("RIPPLE_LOG").write_style("RIPPLE_LOG_STYLE"),
    )
    .format_timestamp(None)
    .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version are successes; usage mistakes exit 1, leaving
            // codes 2-5 unambiguous for the documented failure classes.
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}

fn run(cli: Cli) -> Result<(), error::CliError> {
    let mut cfg = RunConfig::resolve(&cli.overrides)?;
    match cli.command {
        Command::Prepare => commands::prepare(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Eval { split, top_k } => {
            if let Some(split) = split {
                cfg.eval.split = split;
            }
            if let Some(top_k) = top_k {
                cfg.eval.top_k = top_k;
            }
            commands::eval(&cfg)
        }
        Command::Recommend { user, k } => commands::recommend(&cfg, &user, k),
        Command::Explain { user, item, threshold } => {
            cfg.explain.user = user.or(cfg.explain.user);
            cfg.explain.item = item.or(cfg.explain.item);
            if let Some(threshold) = threshold {
                cfg.explain.threshold = threshold;
            }
            commands::explain(&cfg)
        }
        Command::Analyze { pair_count, max_hop } => {
            if let Some(pair_count) = pair_count {
                cfg.analyze.pair_count = pair_count;
            }
            if let Some(max_hop) = max_hop {
                cfg.analyze.max_hop = max_hop;
            }
            commands::analyze(&cfg)
        }
    }
}
