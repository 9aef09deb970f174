//! Subcommand implementations.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use g2g_chem::junctree::ClusterVocab;
use g2g_chem::molgraph::{parse_smiles, similarity, write_smiles};
use g2g_eval::curate::{curate_pairs, read_pairs, write_pairs, CurationRule, ScoredMolecule};
use g2g_eval::metrics::{diversity, improvement, novelty, success_rate, EvalSummary, Predicate};
use g2g_eval::oracle::Oracle;
use g2g_eval::report::{Report, ReportCandidate, ReportRow};
use g2g_model::advreg::GanConfig;
use g2g_model::config::ModelConfig;
use g2g_model::prep::{prepare_molecule, prepare_pair, PreparedPair};
use g2g_model::train::{train, TrainConfig, TrainError};
use g2g_model::vjtnn::{translate, TranslationOutcome};
use g2g_tensor::{checkpoint, ParamStore};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{read_smiles_lines, write_atomic};

pub fn cmd_vocab(corpus: &Path, out: &Path) -> Result<(), CliError> {
    let lines = read_smiles_lines(corpus)?;
    if lines.is_empty() {
        return Err(CliError::Data(format!("{} has no molecules", corpus.display())));
    }
    let mut molecules = Vec::with_capacity(lines.len());
    for (i, s) in lines.iter().enumerate() {
        let m = parse_smiles(s)
            .map_err(|e| CliError::Data(format!("{} line {}: {}", corpus.display(), i + 1, e)))?;
        molecules.push(m);
    }
    let vocab = ClusterVocab::build(&molecules);
    let mut buf = Vec::new();
    vocab
        .write_to(&mut buf)
        .map_err(CliError::data)?;
    write_atomic(out, &buf)?;
    println!(
        "vocabulary: {} clusters from {} molecules -> {}",
        vocab.len(),
        molecules.len(),
        out.display()
    );
    Ok(())
}

/// Curation rule grammar: `imp>=<theta>` or `ranges:<slo>:<shi>:<tlo>:<thi>`.
pub fn parse_rule(spec: &str) -> Result<CurationRule, CliError> {
    if let Some(rest) = spec.strip_prefix("imp>=") {
        let theta: f64 = rest
            .parse()
            .map_err(|_| CliError::usage(format!("bad rule '{}'", spec)))?;
        return Ok(CurationRule::MinImprovement(theta));
    }
    if let Some(rest) = spec.strip_prefix("ranges:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() == 4 {
            let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.parse()).collect();
            if let Ok(v) = nums {
                return Ok(CurationRule::Ranges {
                    source: (v[0], v[1]),
                    target: (v[2], v[3]),
                });
            }
        }
    }
    Err(CliError::usage(format!(
        "bad rule '{}': use imp>=<theta> or ranges:<slo>:<shi>:<tlo>:<thi>",
        spec
    )))
}

pub fn cmd_curate(
    corpus: &Path,
    oracle_spec: &str,
    delta: f64,
    rule_spec: &str,
    exclude: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let oracle = Oracle::parse(oracle_spec).map_err(CliError::usage)?;
    let rule = parse_rule(rule_spec)?;
    let lines = read_smiles_lines(corpus)?;
    let scores = oracle.score_all(&lines).map_err(CliError::data)?;
    let mut scored = Vec::new();
    for (s, score) in lines.iter().zip(scores) {
        let Ok(m) = parse_smiles(s) else {
            eprintln!("skipping unparseable molecule '{}'", s);
            continue;
        };
        let Some(v) = score else {
            eprintln!("skipping '{}': oracle returned no score", s);
            continue;
        };
        scored.push(ScoredMolecule {
            smiles: write_smiles(&m),
            molecule: m,
            score: v,
        });
    }
    let excluded: BTreeSet<String> = match exclude {
        Some(path) => read_smiles_lines(path)?
            .iter()
            .filter_map(|s| parse_smiles(s).ok())
            .map(|m| write_smiles(&m))
            .collect(),
        None => BTreeSet::new(),
    };
    let pairs = curate_pairs(&scored, delta, rule, &excluded);
    let mut buf = Vec::new();
    write_pairs(&pairs, &mut buf).map_err(CliError::data)?;
    write_atomic(out, &buf)?;
    println!(
        "curated {} pairs from {} scored molecules -> {}",
        pairs.len(),
        scored.len(),
        out.display()
    );
    Ok(())
}

fn load_vocab(path: &Path) -> Result<ClusterVocab, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {}", path.display(), e)))?;
    ClusterVocab::read_from(std::io::BufReader::new(file)).map_err(CliError::data)
}

fn load_pairs(cfg: &RunConfig, vocab: &ClusterVocab) -> Result<Vec<PreparedPair>, CliError> {
    let file = std::fs::File::open(&cfg.pairs)
        .map_err(|e| CliError::Data(format!("cannot read {}: {}", cfg.pairs.display(), e)))?;
    let raw = read_pairs(std::io::BufReader::new(file)).map_err(CliError::data)?;
    if raw.is_empty() {
        return Err(CliError::Data(format!("{} has no pairs", cfg.pairs.display())));
    }
    let mut prepared = Vec::with_capacity(raw.len());
    for (x, y) in &raw {
        prepared.push(prepare_pair(x, y, vocab).map_err(CliError::data)?);
    }
    Ok(prepared)
}

fn model_config(cfg: &RunConfig, vocab_len: usize) -> ModelConfig {
    let mut mc = ModelConfig::new(vocab_len)
        .with_hidden(cfg.hidden_dim)
        .with_latent(cfg.latent_dim);
    mc.kl_weight = cfg.effective_kl_weight();
    mc
}

pub fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    let vocab = load_vocab(&cfg.vocab)?;
    let pairs = load_pairs(cfg, &vocab)?;
    let mc = model_config(cfg, vocab.len());
    let tc = TrainConfig {
        epochs: cfg.epochs,
        batch_size: cfg.batch_size,
        lr: cfg.lr,
        lr_anneal: 0.9,
        seed: cfg.seed,
        gan: GanConfig {
            gan_weight: cfg.gan_weight,
            disc_iters: cfg.disc_iters,
            gp_weight: cfg.gp_weight,
            gan_start_epoch: cfg.gan_start_epoch,
        },
    };
    write_atomic(
        &cfg.checkpoint_dir.join("effective.conf"),
        cfg.render().as_bytes(),
    )?;
    println!(
        "training on {} pairs, vocab {}, hidden {}, latent {}",
        pairs.len(),
        vocab.len(),
        mc.hidden,
        mc.latent
    );
    let paths = train(&pairs, &mc, &tc, &cfg.checkpoint_dir, |stats| {
        match stats.gan_gap {
            Some(gap) => println!(
                "epoch {:>3}  lr {:.6}  loss {:.4}  disc_gap {:.4}",
                stats.epoch + 1,
                stats.lr,
                stats.mean_loss,
                gap
            ),
            None => println!(
                "epoch {:>3}  lr {:.6}  loss {:.4}  kl {:.4}",
                stats.epoch + 1,
                stats.lr,
                stats.mean_loss,
                stats.mean_kl
            ),
        }
    })
    .map_err(|e| match e {
        TrainError::NonFinite { .. } => CliError::Numeric(e.to_string()),
        other => CliError::Data(other.to_string()),
    })?;
    println!("wrote {} checkpoints to {}", paths.len(), cfg.checkpoint_dir.display());
    Ok(())
}

/// Derives the model dimensions recorded in a checkpoint.
fn config_from_checkpoint(store: &ParamStore, vocab_len: usize) -> Result<ModelConfig, CliError> {
    if !store.contains("decoder.tree.label.U") {
        return Err(CliError::Data("checkpoint lacks decoder parameters".into()));
    }
    let label_u = store.value("decoder.tree.label.U");
    let (v, hidden) = (label_u.rows(), label_u.cols());
    if v != vocab_len {
        return Err(CliError::Data(format!(
            "vocabulary size {} does not match checkpoint ({})",
            vocab_len, v
        )));
    }
    let latent = store.value("vae.posterior.mu.W").rows();
    Ok(ModelConfig::new(v).with_hidden(hidden).with_latent(latent))
}

pub fn cmd_translate(
    input: &Path,
    checkpoint_path: &Path,
    cfg: &RunConfig,
) -> Result<(), CliError> {
    let vocab = load_vocab(&cfg.vocab)?;
    let store = checkpoint::load(checkpoint_path, g2g_tensor::Precision::Single)
        .map_err(CliError::data)?;
    let mc = config_from_checkpoint(&store, vocab.len())?;
    let sources = read_smiles_lines(input)?;
    if sources.is_empty() {
        return Err(CliError::Data(format!("{} has no molecules", input.display())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(sources.len());
    let mut decoded = 0usize;
    for s in &sources {
        let src_mol = parse_smiles(s)
            .map_err(|e| CliError::Data(format!("input '{}': {}", s, e)))?;
        let canonical = write_smiles(&src_mol);
        let prepared = match prepare_molecule(&canonical, &vocab) {
            Ok(p) => p,
            Err(e) => {
                eprintln!("'{}' skipped: {}", s, e);
                rows.push(ReportRow {
                    source: canonical,
                    source_score: None,
                    candidates: vec![None; cfg.k],
                });
                continue;
            }
        };
        let outcomes = translate(&store, &mc, &vocab, &prepared, cfg.k, &mut rng);
        let candidates: Vec<Option<ReportCandidate>> = outcomes
            .iter()
            .map(|o| match o {
                TranslationOutcome::Molecule(m) => {
                    decoded += 1;
                    Some(ReportCandidate {
                        smiles: write_smiles(m),
                        similarity: similarity(&prepared.mol, m),
                        score: None,
                    })
                }
                _ => None,
            })
            .collect();
        rows.push(ReportRow {
            source: canonical,
            source_score: None,
            candidates,
        });
    }
    let report = Report { k: cfg.k, rows };
    let mut buf = Vec::new();
    report.write_to(&mut buf).map_err(CliError::data)?;
    write_atomic(&cfg.report, &buf)?;
    println!(
        "translated {} molecules x {} samples ({} decoded) -> {}",
        sources.len(),
        cfg.k,
        decoded,
        cfg.report.display()
    );
    Ok(())
}

pub fn cmd_evaluate(
    report_path: &Path,
    oracle_spec: &str,
    delta: f64,
    predicate_spec: &str,
    train_pairs: Option<&Path>,
    json_out: Option<&Path>,
    scored_out: Option<&Path>,
) -> Result<(), CliError> {
    let oracle = Oracle::parse(oracle_spec).map_err(CliError::usage)?;
    let predicate = Predicate::parse(predicate_spec).map_err(CliError::usage)?;
    let file = std::fs::File::open(report_path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {}", report_path.display(), e)))?;
    let mut report =
        Report::read_from(std::io::BufReader::new(file)).map_err(CliError::data)?;

    // Score every distinct molecule in one oracle batch.
    let mut all: Vec<String> = Vec::new();
    for row in &report.rows {
        all.push(row.source.clone());
        for c in row.valid() {
            all.push(c.smiles.clone());
        }
    }
    all.sort();
    all.dedup();
    let scores = oracle.score_all(&all).map_err(CliError::data)?;
    let score_of = |s: &str| -> Option<f64> {
        all.binary_search_by(|x| x.as_str().cmp(s))
            .ok()
            .and_then(|i| scores[i])
    };
    for row in &mut report.rows {
        row.source_score = score_of(&row.source);
        for cand in row.candidates.iter_mut().flatten() {
            cand.score = score_of(&cand.smiles);
        }
    }

    let success = success_rate(&report, delta, &predicate);
    let (imp_mean, imp_std) = improvement(&report, delta);
    let div = diversity(&report);
    let (nov, nov_conv) = match train_pairs {
        Some(path) => {
            let file = std::fs::File::open(path)
                .map_err(|e| CliError::Data(format!("cannot read {}: {}", path.display(), e)))?;
            let pairs = read_pairs(std::io::BufReader::new(file)).map_err(CliError::data)?;
            let training: BTreeSet<String> = pairs
                .iter()
                .filter_map(|(_, y)| parse_smiles(y).ok())
                .map(|m| write_smiles(&m))
                .collect();
            let generated: BTreeSet<String> = report
                .rows
                .iter()
                .flat_map(|r| r.valid().map(|c| c.smiles.clone()))
                .collect();
            let (a, b) = novelty(&generated, &training).map_err(CliError::data)?;
            (Some(a), Some(b))
        }
        None => (None, None),
    };

    let n_valid: usize = report.rows.iter().map(|r| r.valid().count()).sum();
    let summary = EvalSummary {
        oracle: oracle.name(),
        delta,
        predicate: predicate_spec.to_string(),
        n_sources: report.rows.len(),
        n_valid_candidates: n_valid,
        success_rate: success,
        improvement_mean: imp_mean,
        improvement_std: imp_std,
        diversity: div,
        novelty: nov,
        novelty_conventional: nov_conv,
    };

    println!("sources            {}", summary.n_sources);
    println!("valid candidates   {}", summary.n_valid_candidates);
    println!("success_rate       {:.4}", summary.success_rate);
    println!(
        "improvement        {:.4} +/- {:.4}",
        summary.improvement_mean, summary.improvement_std
    );
    println!("diversity          {:.4}", summary.diversity);
    match (summary.novelty, summary.novelty_conventional) {
        (Some(n), Some(c)) => println!("novelty            {:.4} (conventional {:.4})", n, c),
        _ => println!("novelty            - (no --train-pairs given)"),
    }

    let json_path: PathBuf = json_out
        .map(Path::to_path_buf)
        .unwrap_or_else(|| report_path.with_extension("metrics.json"));
    let json = serde_json::to_string_pretty(&summary)
        .map_err(|e| CliError::Data(format!("cannot serialize metrics: {}", e)))?;
    write_atomic(&json_path, json.as_bytes())?;
    println!("metrics -> {}", json_path.display());

    if let Some(path) = scored_out {
        let mut buf = Vec::new();
        report.write_to(&mut buf).map_err(CliError::data)?;
        write_atomic(path, &buf)?;
        println!("scored report -> {}", path.display());
    }
    Ok(())
}
