//! Probes adversarial-round gap dynamics under different settings.
use std::collections::BTreeSet;
use g2g_chem::junctree::ClusterVocab;
use g2g_chem::molgraph::{parse_smiles, write_smiles};
use g2g_eval::curate::{curate_pairs, CurationRule, ScoredMolecule};
use g2g_eval::toygen::toy_translation_corpus;
use g2g_model::advreg::{adversarial_round, GanConfig};
use g2g_model::config::ModelConfig;
use g2g_model::prep::{prepare_pair, PreparedPair};
use g2g_model::train::vae_batch_step;
use g2g_tensor::{AdamConfig, ParamStore, Precision};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let pretrain_batches: usize = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(200);
    let warmup_rounds: usize = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(100);
    let gan_weight: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let disc_lr_scale: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(1.0);

    let families: usize = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(60);
    let batch_m: usize = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(8);
    let corpus = toy_translation_corpus(42, families);
    let mols: Vec<_> = corpus.iter().map(|s| parse_smiles(s).unwrap()).collect();
    let vocab = ClusterVocab::build(&mols);
    let scored: Vec<ScoredMolecule> = mols.iter().map(|m| ScoredMolecule {
        smiles: write_smiles(m), molecule: m.clone(), score: m.ring_count() as f64,
    }).collect();
    let curated = curate_pairs(&scored, 0.3, CurationRule::MinImprovement(1.0), &BTreeSet::new());
    let pairs: Vec<PreparedPair> = curated.iter().map(|p| prepare_pair(&p.x, &p.y, &vocab).unwrap()).collect();
    eprintln!("{} pairs", pairs.len());
    let cfg = ModelConfig::new(vocab.len()).with_hidden(32).with_latent(8);
    let mut store = ParamStore::new(Precision::Single);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    cfg.register_params(&mut store, &mut rng);
    let adam = AdamConfig::default();
    for i in 0..pretrain_batches {
        let start = (i * 16) % pairs.len();
        let batch: Vec<&PreparedPair> = pairs.iter().cycle().skip(start).take(16).collect();
        let (l, _) = vae_batch_step(&mut store, &cfg, &adam, &batch, &mut rng).unwrap();
        if i % 50 == 0 { eprintln!("pretrain {} loss {:.3}", i, l); }
    }
    // Critic warm-up: adversarial rounds with zero generator weight.
    let warm = GanConfig { gan_start_epoch: 0, gan_weight: 0.0, ..GanConfig::default() };
    for _ in 0..warmup_rounds {
        adversarial_round(&mut store, &cfg, &warm, &pairs, batch_m, &adam, &mut rng).unwrap();
    }
    let gan = GanConfig { gan_start_epoch: 0, gan_weight, ..GanConfig::default() };
    let disc_adam = AdamConfig { lr: adam.lr * disc_lr_scale, ..adam };
    let _ = disc_adam;
    let mut gaps = Vec::new();
    for r in 0..100 {
        let st = adversarial_round(&mut store, &cfg, &gan, &pairs, batch_m, &adam, &mut rng).unwrap();
        gaps.push(st.gap);
        if r % 10 == 0 || r == 99 {
            eprintln!("round {:>3} gap {:+.4} disc {:+.4} gp {:.4} vae {:.3}", r + 1, st.gap, st.disc_loss, st.gradient_penalty, st.vae_total);
        }
    }
    println!("gap[1]={:+.4} gap[100]={:+.4} ratio={:.3}", gaps[0], gaps[99], gaps[99].abs() / gaps[0].abs());
}
