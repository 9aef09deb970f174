//! Training loop: seeded shuffling, mini-batch Adam, per-epoch learning-rate
//! annealing and checkpointing, with optional adversarial rounds after a
//! configured epoch.

use std::path::{Path, PathBuf};

use g2g_tensor::checkpoint::{self, CheckpointError};
use g2g_tensor::{AdamConfig, ParamStore, Tape};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::advreg::{adversarial_round, GanConfig};
use crate::config::ModelConfig;
use crate::prep::PreparedPair;
use crate::vjtnn::{vae_loss, LatentNoise};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite {context}: {value}")]
    NonFinite { context: String, value: f64 },
    #[error("checkpoint error: {0}")]
    Checkpoint(#[from] CheckpointError),
    #[error("empty training set")]
    EmptyDataset,
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: u32,
    pub batch_size: usize,
    pub lr: f64,
    pub lr_anneal: f64,
    pub seed: u64,
    pub gan: GanConfig,
}

impl Default for TrainConfig {
    fn default() -> TrainConfig {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            lr: 0.001,
            lr_anneal: 0.9,
            seed: 0,
            gan: GanConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: u32,
    pub lr: f64,
    pub mean_loss: f64,
    pub mean_kl: f64,
    /// Discriminator gap of the last adversarial round, when active.
    pub gan_gap: Option<f64>,
}

/// Trains from scratch, writing one checkpoint per epoch into `out_dir`.
/// Returns the checkpoint paths in epoch order.
pub fn train(
    pairs: &[PreparedPair],
    cfg: &ModelConfig,
    tc: &TrainConfig,
    out_dir: &Path,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<Vec<PathBuf>, TrainError> {
    if pairs.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    std::fs::create_dir_all(out_dir).map_err(CheckpointError::Io)?;

    let mut rng = ChaCha8Rng::seed_from_u64(tc.seed);
    let mut store = ParamStore::new(g2g_tensor::Precision::Single);
    cfg.register_params(&mut store, &mut rng);

    let mut paths = Vec::with_capacity(tc.epochs as usize);
    for epoch in 0..tc.epochs {
        let lr = tc.lr * tc.lr_anneal.powi(epoch as i32);
        let adam = AdamConfig {
            lr,
            ..AdamConfig::default()
        };
        let stats = if epoch >= tc.gan.gan_start_epoch {
            run_adversarial_epoch(&mut store, cfg, tc, &adam, pairs, &mut rng, epoch)?
        } else {
            run_vae_epoch(&mut store, cfg, tc, &adam, pairs, &mut rng, epoch)?
        };
        on_epoch(&stats);

        store.epoch = epoch + 1;
        let path = out_dir.join(format!("checkpoint_epoch_{:03}.ckpt", epoch + 1));
        checkpoint::save(&store, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

/// One mini-batch gradient step over `batch`; returns (mean loss, mean KL).
pub fn vae_batch_step(
    store: &mut ParamStore,
    cfg: &ModelConfig,
    adam: &AdamConfig,
    batch: &[&PreparedPair],
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64), TrainError> {
    store.zero_grads();
    let scale = 1.0 / batch.len() as f64;
    let mut loss_sum = 0.0;
    let mut kl_sum = 0.0;
    for pair in batch {
        let noise = LatentNoise::standard(rng, cfg.latent);
        let mut tape = Tape::new(store.precision()).with_finite_checks(false);
        let parts = vae_loss(&mut tape, store, cfg, pair, &noise);
        let value = tape.value(parts.total).item();
        if !value.is_finite() {
            return Err(TrainError::NonFinite {
                context: format!("loss for pair '{}' -> '{}'", pair.x.smiles, pair.y.smiles),
                value,
            });
        }
        loss_sum += value;
        kl_sum += parts.kl;
        let grads = tape.backward(parts.total);
        tape.accumulate_param_grads(&grads, store, scale);
    }
    store.adam_step(adam, |n| !n.starts_with("disc."));
    Ok((loss_sum * scale, kl_sum * scale))
}

fn run_vae_epoch(
    store: &mut ParamStore,
    cfg: &ModelConfig,
    tc: &TrainConfig,
    adam: &AdamConfig,
    pairs: &[PreparedPair],
    rng: &mut ChaCha8Rng,
    epoch: u32,
) -> Result<EpochStats, TrainError> {
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    order.shuffle(rng);
    let mut loss_sum = 0.0;
    let mut kl_sum = 0.0;
    let mut batches = 0.0;
    for chunk in order.chunks(tc.batch_size.max(1)) {
        let batch: Vec<&PreparedPair> = chunk.iter().map(|&i| &pairs[i]).collect();
        let (l, k) = vae_batch_step(store, cfg, adam, &batch, rng)?;
        loss_sum += l;
        kl_sum += k;
        batches += 1.0;
    }
    Ok(EpochStats {
        epoch,
        lr: adam.lr,
        mean_loss: loss_sum / batches,
        mean_kl: kl_sum / batches,
        gan_gap: None,
    })
}

fn run_adversarial_epoch(
    store: &mut ParamStore,
    cfg: &ModelConfig,
    tc: &TrainConfig,
    adam: &AdamConfig,
    pairs: &[PreparedPair],
    rng: &mut ChaCha8Rng,
    epoch: u32,
) -> Result<EpochStats, TrainError> {
    // Each round consumes disc_iters + 1 batch equivalents.
    let batches_per_epoch = pairs.len().div_ceil(tc.batch_size.max(1));
    let rounds = batches_per_epoch
        .div_ceil(tc.gan.disc_iters + 1)
        .max(1);
    let mut vae_sum = 0.0;
    let mut last_gap = 0.0;
    for _ in 0..rounds {
        let disc_adam = AdamConfig {
            lr: adam.lr * tc.gan.disc_lr_scale,
            ..*adam
        };
        let stats =
            adversarial_round(store, cfg, &tc.gan, pairs, tc.batch_size, adam, &disc_adam, rng)?;
        vae_sum += stats.vae_total;
        last_gap = stats.gap;
    }
    Ok(EpochStats {
        epoch,
        lr: adam.lr,
        mean_loss: vae_sum / rounds as f64,
        mean_kl: 0.0,
        gan_gap: Some(last_gap),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prep::prepare_pair;
    use g2g_chem::junctree::ClusterVocab;
    use g2g_chem::molgraph::parse_smiles;

    fn toy_pairs() -> (Vec<PreparedPair>, ModelConfig) {
        let corpus: Vec<_> = ["CCO", "CCC", "CCN", "CCCC"]
            .iter()
            .map(|s| parse_smiles(s).unwrap())
            .collect();
        let vocab = ClusterVocab::build(&corpus);
        let pairs = vec![
            prepare_pair("CCO", "CCC", &vocab).unwrap(),
            prepare_pair("CCC", "CCCC", &vocab).unwrap(),
        ];
        let cfg = ModelConfig::new(vocab.len()).with_hidden(8).with_latent(4);
        (pairs, cfg)
    }

    #[test]
    fn steps_per_epoch_matches_ceiling() {
        let n: usize = 100;
        let batch: usize = 32;
        assert_eq!(n.div_ceil(batch), 4);
    }

    #[test]
    fn two_epoch_training_checkpoints_deterministically() {
        let (pairs, cfg) = toy_pairs();
        let dir1 = std::env::temp_dir().join("g2g_train_det_a");
        let dir2 = std::env::temp_dir().join("g2g_train_det_b");
        for d in [&dir1, &dir2] {
            std::fs::remove_dir_all(d).ok();
        }
        let tc = TrainConfig {
            epochs: 2,
            batch_size: 2,
            seed: 7,
            ..TrainConfig::default()
        };
        let p1 = train(&pairs, &cfg, &tc, &dir1, |_| {}).unwrap();
        let p2 = train(&pairs, &cfg, &tc, &dir2, |_| {}).unwrap();
        assert_eq!(p1.len(), 2);
        for (a, b) in p1.iter().zip(&p2) {
            assert_eq!(
                std::fs::read(a).unwrap(),
                std::fs::read(b).unwrap(),
                "checkpoints differ"
            );
        }
        for d in [&dir1, &dir2] {
            std::fs::remove_dir_all(d).ok();
        }
    }

    #[test]
    fn loss_decreases_when_overfitting_a_pair() {
        let (pairs, cfg) = toy_pairs();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut store = ParamStore::new(g2g_tensor::Precision::Single);
        cfg.register_params(&mut store, &mut rng);
        let adam = AdamConfig::default();
        let batch: Vec<&PreparedPair> = pairs.iter().collect();
        let (first, _) = vae_batch_step(&mut store, &cfg, &adam, &batch, &mut rng).unwrap();
        let mut last = first;
        for _ in 0..60 {
            let (l, _) = vae_batch_step(&mut store, &cfg, &adam, &batch, &mut rng).unwrap();
            last = l;
        }
        assert!(
            last < first * 0.8,
            "loss did not improve: {} -> {}",
            first,
            last
        );
    }
}
