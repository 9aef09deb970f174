//! Analytic gradients versus central finite differences, end to end.

use g2g_chem::junctree::ClusterVocab;
use g2g_chem::molgraph::parse_smiles;
use g2g_model::advreg::{disc_forward, disc_input_gradient, gradient_penalty};
use g2g_model::config::ModelConfig;
use g2g_model::prep::{prepare_pair, PreparedPair};
use g2g_model::vjtnn::{vae_loss, LatentNoise};
use g2g_tensor::gradcheck::check_params;
use g2g_tensor::{ParamStore, Precision, Tape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const FD_STEP: f64 = 1e-5;
const FD_FLOOR: f64 = 1e-6;

fn micro_setup() -> (ParamStore, ModelConfig, ClusterVocab, Vec<PreparedPair>) {
    let corpus: Vec<_> = ["CCO", "CCC", "CCN", "CC(C)O", "C=O"]
        .iter()
        .map(|s| parse_smiles(s).unwrap())
        .collect();
    let vocab = ClusterVocab::build(&corpus);
    let cfg = ModelConfig::new(vocab.len()).with_hidden(6).with_latent(3);
    let mut store = ParamStore::new(Precision::Double);
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    cfg.register_params(&mut store, &mut rng);
    // Biases start at zero; nudge them so every parameter participates.
    let names: Vec<String> = store
        .names()
        .filter(|n| n.ends_with(".b") || n.ends_with(".bz") || n.ends_with(".br"))
        .map(String::from)
        .collect();
    let mut bias_rng = ChaCha8Rng::seed_from_u64(555);
    for name in names {
        for x in store.param_mut(&name).value.data_mut() {
            *x = bias_rng.gen_range(-0.05..0.05);
        }
    }
    let pairs = vec![
        prepare_pair("CCO", "CC(C)O", &vocab).unwrap(),
        prepare_pair("CCN", "C=O", &vocab).unwrap(),
    ];
    (store, cfg, vocab, pairs)
}

/// Full objective on a 2-pair micro-batch: every non-discriminator parameter
/// gradient within 1e-3 relative error of central differences (64-bit mode).
#[test]
fn full_vjtnn_loss_gradcheck() {
    let (mut store, cfg, _vocab, pairs) = micro_setup();
    let mut noise_rng = ChaCha8Rng::seed_from_u64(77);
    let noises: Vec<LatentNoise> = (0..pairs.len())
        .map(|_| LatentNoise::standard(&mut noise_rng, cfg.latent))
        .collect();

    let batch_loss = |store: &ParamStore| -> f64 {
        let mut total = 0.0;
        for (pair, noise) in pairs.iter().zip(&noises) {
            let mut tape = Tape::new(Precision::Double);
            let parts = vae_loss(&mut tape, store, &cfg, pair, noise);
            total += tape.value(parts.total).item();
        }
        total / pairs.len() as f64
    };

    store.zero_grads();
    for (pair, noise) in pairs.iter().zip(&noises) {
        let mut tape = Tape::new(Precision::Double);
        let parts = vae_loss(&mut tape, &store, &cfg, pair, noise);
        let grads = tape.backward(parts.total);
        tape.accumulate_param_grads(&grads, &mut store, 1.0 / pairs.len() as f64);
    }

    // Discriminator parameters do not enter this loss; they are covered by
    // the penalty gradcheck below.
    let report = check_params(
        &mut store,
        FD_STEP,
        FD_FLOOR,
        |n| !n.starts_with("disc."),
        batch_loss,
    );
    let mut worst = 0.0_f64;
    for check in &report {
        worst = worst.max(check.worst_rel);
        assert!(
            check.worst_rel < 1e-3,
            "{}[{}]: analytic {} vs numeric {} (rel {})",
            check.name,
            check.worst_index,
            check.analytic,
            check.numeric,
            check.worst_rel
        );
    }
    println!("full-model gradcheck worst relative error: {:.3e}", worst);
}

/// Reparameterization path: gradients of the posterior affine layers match
/// finite differences with frozen noise.
#[test]
fn reparameterization_gradient_with_frozen_noise() {
    let (mut store, cfg, _vocab, pairs) = micro_setup();
    let noise = LatentNoise {
        tree: vec![0.7, -1.1, 0.4],
        graph: vec![-0.2, 0.9, 1.3],
    };
    let pair = &pairs[0];
    let loss_of = |store: &ParamStore| -> f64 {
        let mut tape = Tape::new(Precision::Double);
        let parts = vae_loss(&mut tape, store, &cfg, pair, &noise);
        tape.value(parts.total).item()
    };
    store.zero_grads();
    {
        let mut tape = Tape::new(Precision::Double);
        let parts = vae_loss(&mut tape, &store, &cfg, pair, &noise);
        let grads = tape.backward(parts.total);
        tape.accumulate_param_grads(&grads, &mut store, 1.0);
    }
    let report = check_params(
        &mut store,
        FD_STEP,
        FD_FLOOR,
        |n| n.starts_with("vae.posterior."),
        loss_of,
    );
    for check in &report {
        assert!(
            check.worst_rel < 1e-3,
            "{}: rel {}",
            check.name,
            check.worst_rel
        );
    }
    // The latent codes must not be structurally ignored.
    let mu_grad = &store.param("vae.posterior.mu.W").grad;
    assert!(mu_grad.data().iter().any(|&g| g != 0.0));
}

/// Analytic discriminator input gradient against finite differences of the
/// discriminator output, on a random input.
#[test]
fn disc_input_gradient_matches_fd() {
    let (store, cfg, _vocab, _pairs) = micro_setup();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let x0: Vec<f64> = (0..cfg.tree_repr_dim())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();

    let d_of = |x: &[f64]| -> f64 {
        let mut tape = Tape::new(Precision::Double);
        let xv = tape.constant(Tensor::vector(x.to_vec()));
        let d = disc_forward(&mut tape, &store, xv);
        tape.value(d).item()
    };

    let mut tape = Tape::new(Precision::Double);
    let xv = tape.constant(Tensor::vector(x0.clone()));
    let g = disc_input_gradient(&mut tape, &store, xv);
    let analytic = tape.value(g).data().to_vec();

    for i in 0..x0.len() {
        let mut plus = x0.clone();
        plus[i] += FD_STEP;
        let mut minus = x0.clone();
        minus[i] -= FD_STEP;
        let numeric = (d_of(&plus) - d_of(&minus)) / (2.0 * FD_STEP);
        let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(1e-6);
        assert!(
            rel < 1e-4,
            "component {}: analytic {} vs numeric {}",
            i,
            analytic[i],
            numeric
        );
    }
}

/// Gradient-penalty gradients with respect to discriminator weights match
/// finite differences to 1e-4.
#[test]
fn gradient_penalty_gradcheck() {
    let (mut store, cfg, _vocab, _pairs) = micro_setup();
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let point: Vec<f64> = (0..cfg.tree_repr_dim())
        .map(|_| rng.gen_range(-1.0..1.0))
        .collect();

    let gp_of = |store: &ParamStore| -> f64 {
        let mut tape = Tape::new(Precision::Double);
        let xv = tape.constant(Tensor::vector(point.clone()));
        let gp = gradient_penalty(&mut tape, store, xv);
        tape.value(gp).item()
    };

    store.zero_grads();
    {
        let mut tape = Tape::new(Precision::Double);
        let xv = tape.constant(Tensor::vector(point.clone()));
        let gp = gradient_penalty(&mut tape, &store, xv);
        let grads = tape.backward(gp);
        tape.accumulate_param_grads(&grads, &mut store, 1.0);
    }
    let report = check_params(
        &mut store,
        FD_STEP,
        FD_FLOOR,
        |n| n.starts_with("disc.") && !n.ends_with("l3.b"),
        gp_of,
    );
    for check in &report {
        assert!(
            check.worst_rel < 1e-4,
            "{}[{}]: analytic {} vs numeric {} (rel {})",
            check.name,
            check.worst_index,
            check.analytic,
            check.numeric,
            check.worst_rel
        );
    }
}
