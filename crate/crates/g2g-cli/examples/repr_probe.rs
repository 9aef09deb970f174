//! Inspects real vs fake tree representations after pretraining.
use std::collections::BTreeSet;
use g2g_chem::junctree::ClusterVocab;
use g2g_chem::molgraph::{parse_smiles, write_smiles};
use g2g_eval::curate::{curate_pairs, CurationRule, ScoredMolecule};
use g2g_eval::toygen::toy_translation_corpus;
use g2g_model::advreg::{real_tree_repr, soft_decode};
use g2g_model::config::ModelConfig;
use g2g_model::encoder::encode_source;
use g2g_model::prep::{prepare_pair, PreparedPair};
use g2g_model::train::vae_batch_step;
use g2g_model::vjtnn::{perturb_source, prior_codes, LatentNoise};
use g2g_tensor::{AdamConfig, ParamStore, Precision, Tape};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let pretrain: usize = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(1000);
    let corpus = toy_translation_corpus(42, 20);
    let mols: Vec<_> = corpus.iter().map(|s| parse_smiles(s).unwrap()).collect();
    let vocab = ClusterVocab::build(&mols);
    let scored: Vec<ScoredMolecule> = mols.iter().map(|m| ScoredMolecule {
        smiles: write_smiles(m), molecule: m.clone(), score: m.ring_count() as f64,
    }).collect();
    let curated = curate_pairs(&scored, 0.3, CurationRule::MinImprovement(1.0), &BTreeSet::new());
    let pairs: Vec<PreparedPair> = curated.iter().map(|p| prepare_pair(&p.x, &p.y, &vocab).unwrap()).collect();
    let cfg = ModelConfig::new(vocab.len()).with_hidden(32).with_latent(8);
    let mut store = ParamStore::new(Precision::Single);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    cfg.register_params(&mut store, &mut rng);
    let adam = AdamConfig::default();
    for i in 0..pretrain {
        let start = (i * 16) % pairs.len();
        let batch: Vec<&PreparedPair> = pairs.iter().cycle().skip(start).take(16).collect();
        let (l, _) = vae_batch_step(&mut store, &cfg, &adam, &batch, &mut rng).unwrap();
        if i % 200 == 0 { eprintln!("pretrain {} loss {:.3}", i, l); }
    }
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for pair in pairs.iter().take(8) {
        let noise = LatentNoise::standard(&mut rng, cfg.latent);
        let mut tape = Tape::new(Precision::Single);
        let enc = encode_source(&mut tape, &store, &cfg, &pair.x.mol, &pair.x.tree);
        let (zt, zg) = prior_codes(&mut tape, &noise);
        let (tvecs, gvecs) = perturb_source(&mut tape, &store, &enc, zt, zg);
        let real = real_tree_repr(&mut tape, &store, &cfg, &tvecs, &gvecs, &pair.y.tree);
        let fake = soft_decode(&mut tape, &store, &cfg, &tvecs, &gvecs);
        let rv = tape.value(real).data().to_vec();
        let fv = tape.value(fake.repr).data().to_vec();
        let v = cfg.vocab;
        println!(
            "y_nodes {:>2} fake_nodes {:>2} trunc {} | s_root real {:.3} fake {:.3} | diff {:.3}",
            pair.y.tree.len(),
            fake.nodes,
            fake.truncated,
            norm(&rv[v..]),
            norm(&fv[v..]),
            norm(&rv[v..].iter().zip(&fv[v..]).map(|(a, b)| a - b).collect::<Vec<f64>>()),
        );
    }
}
