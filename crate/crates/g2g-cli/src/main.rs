//! graph2graph: molecular graph-to-graph translation pipeline.
//!
//! Subcommands: vocab, curate, train, translate, evaluate.

mod commands;
mod config;
mod error;
mod io;

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use config::RunConfig;
use error::CliError;

#[derive(Parser)]
#[command(
    name = "graph2graph",
    about = "Junction-tree graph-to-graph molecular translation",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build the cluster vocabulary from a SMILES corpus.
    Vocab {
        /// Corpus file, one SMILES per line.
        corpus: PathBuf,
        /// Output vocabulary path.
        #[arg(long, default_value = "vocab.txt")]
        out: PathBuf,
    },
    /// Curate translation pairs from a scored corpus.
    Curate {
        /// Corpus file, one SMILES per line.
        corpus: PathBuf,
        /// Property oracle: molecular_weight | ring_count | heavy_atom_count
        /// | halogen_count | external:<command>.
        #[arg(long)]
        oracle: String,
        /// Tanimoto similarity floor.
        #[arg(long)]
        delta: f64,
        /// Admission rule: imp>=<theta> or ranges:<slo>:<shi>:<tlo>:<thi>.
        #[arg(long)]
        rule: String,
        /// Molecules to exclude (e.g. the test set).
        #[arg(long)]
        exclude: Option<PathBuf>,
        /// Output pair file.
        #[arg(long, default_value = "pairs.tsv")]
        out: PathBuf,
    },
    /// Train the translation model.
    Train {
        /// Config file of key = value lines; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Override any config key, repeatable: --set epochs=5.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long)]
        checkpoint_dir: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        epochs: Option<u32>,
    },
    /// Translate molecules with a trained checkpoint.
    Translate {
        /// Input file, one SMILES per line.
        input: PathBuf,
        /// Checkpoint path.
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
        #[arg(long)]
        vocab: Option<PathBuf>,
        /// Candidates per molecule.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output report path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compute metrics over a translation report.
    Evaluate {
        /// Report produced by `translate`.
        report: PathBuf,
        #[arg(long)]
        oracle: String,
        /// Similarity constraint applied to candidates.
        #[arg(long)]
        delta: f64,
        /// Target predicate: any | range:<lo>:<hi> | >=<v> | imp>=<v>.
        #[arg(long)]
        predicate: String,
        /// Training pairs for the novelty metric.
        #[arg(long)]
        train_pairs: Option<PathBuf>,
        /// Machine-readable metrics output (default: <report>.metrics.json).
        #[arg(long)]
        json: Option<PathBuf>,
        /// Optional path for the score-annotated report.
        #[arg(long)]
        scored_out: Option<PathBuf>,
    },
}

/// Seed fallback order: flag > config file > GRAPH2GRAPH_SEED > 0.
fn env_seed() -> Option<u64> {
    std::env::var("GRAPH2GRAPH_SEED")
        .ok()
        .and_then(|v| v.parse().ok())
}

fn build_config(
    file: Option<&PathBuf>,
    sets: &[String],
    overrides: &BTreeMap<String, String>,
) -> Result<RunConfig, CliError> {
    let mut cfg = RunConfig::default();
    if let Some(seed) = env_seed() {
        cfg.seed = seed;
    }
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Data(format!("cannot read {}: {}", path.display(), e)))?;
        let env_fallback = cfg.seed;
        cfg = RunConfig::parse(&text).map_err(CliError::usage)?;
        let file_sets_seed = text
            .lines()
            .any(|l| l.split('#').next().unwrap_or("").trim_start().starts_with("seed"));
        if !file_sets_seed {
            cfg.seed = env_fallback;
        }
    }
    for kv in sets {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::usage(format!("--set needs KEY=VALUE, got '{}'", kv)))?;
        cfg.set(k.trim(), v.trim()).map_err(CliError::usage)?;
    }
    cfg.apply_overrides(overrides).map_err(CliError::usage)?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Vocab { corpus, out } => commands::cmd_vocab(&corpus, &out),
        Cmd::Curate {
            corpus,
            oracle,
            delta,
            rule,
            exclude,
            out,
        } => commands::cmd_curate(&corpus, &oracle, delta, &rule, exclude.as_deref(), &out),
        Cmd::Train {
            config,
            sets,
            pairs,
            vocab,
            checkpoint_dir,
            seed,
            epochs,
        } => {
            let mut overrides = BTreeMap::new();
            if let Some(p) = pairs {
                overrides.insert("pairs".into(), p.display().to_string());
            }
            if let Some(v) = vocab {
                overrides.insert("vocab".into(), v.display().to_string());
            }
            if let Some(d) = checkpoint_dir {
                overrides.insert("checkpoint_dir".into(), d.display().to_string());
            }
            if let Some(s) = seed {
                overrides.insert("seed".into(), s.to_string());
            }
            if let Some(e) = epochs {
                overrides.insert("epochs".into(), e.to_string());
            }
            let cfg = build_config(config.as_ref(), &sets, &overrides)?;
            commands::cmd_train(&cfg)
        }
        Cmd::Translate {
            input,
            checkpoint,
            config,
            sets,
            vocab,
            k,
            seed,
            out,
        } => {
            let mut overrides = BTreeMap::new();
            if let Some(v) = vocab {
                overrides.insert("vocab".into(), v.display().to_string());
            }
            if let Some(k) = k {
                overrides.insert("K".into(), k.to_string());
            }
            if let Some(s) = seed {
                overrides.insert("seed".into(), s.to_string());
            }
            if let Some(o) = out {
                overrides.insert("report".into(), o.display().to_string());
            }
            let cfg = build_config(config.as_ref(), &sets, &overrides)?;
            commands::cmd_translate(&input, &checkpoint, &cfg)
        }
        Cmd::Evaluate {
            report,
            oracle,
            delta,
            predicate,
            train_pairs,
            json,
            scored_out,
        } => commands::cmd_evaluate(
            &report,
            &oracle,
            delta,
            &predicate,
            train_pairs.as_deref(),
            json.as_deref(),
            scored_out.as_deref(),
        ),
    }
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
    if let Err(e) = run(cli) {
        eprintln!("error: {}", e);
        std::process::exit(e.code());
    }
}
