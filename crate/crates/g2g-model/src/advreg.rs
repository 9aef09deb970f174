//! Adversarial scaffold regularization: soft tree decoding with
//! straight-through gates, continuous tree representations, the
//! discriminator, and the WGAN-GP alternating round.

use g2g_chem::junctree::JunctionTree;
use g2g_tensor::layers::tree_gru;
use g2g_tensor::{AdamConfig, ParamStore, Tape, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::ModelConfig;
use crate::encoder::encode_source;
use crate::features::label_onehot;
use crate::prep::PreparedPair;
use crate::train::TrainError;
use crate::treedec::{bind_decoder, predict_label, predict_topology, DecoderParams};
use crate::vjtnn::{perturb_source, prior_codes, vae_forward, LatentNoise};

/// Adversarial training knobs.
#[derive(Debug, Clone, Copy)]
pub struct GanConfig {
    /// Weight of the adversarial term in the generator objective.
    pub gan_weight: f64,
    /// Discriminator steps per round (N).
    pub disc_iters: usize,
    /// Gradient penalty weight (beta).
    pub gp_weight: f64,
    /// First epoch with adversarial rounds; earlier epochs train pure VAE.
    pub gan_start_epoch: u32,
    /// Critic learning-rate multiplier relative to the generator.
    pub disc_lr_scale: f64,
}

impl Default for GanConfig {
    fn default() -> GanConfig {
        GanConfig {
            gan_weight: 1.0,
            disc_iters: 5,
            gp_weight: 10.0,
            gan_start_epoch: u32::MAX,
            disc_lr_scale: 0.1,
        }
    }
}

/// Straight-through gate on a topology score: exact threshold forward,
/// unit-slope surrogate backward.
pub fn straight_through(tape: &mut Tape, p: Var) -> Var {
    tape.hard_gate(p)
}

/// A continuous tree representation [q_root, sum of root inward messages].
pub struct TreeRepr {
    pub repr: Var,
    pub nodes: usize,
    pub truncated: bool,
}

/// Soft free-running decode per the adversarial unroll: label distributions
/// replace one-hot features, and every message is multiplied by its
/// straight-through topology gate.
pub fn soft_decode(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &ModelConfig,
    tree_vecs: &[Var],
    graph_vecs: &[Var],
) -> TreeRepr {
    let params = bind_decoder(tape, store);
    let zero_query = tape.zeros(cfg.hidden);
    let (_, q_root) = predict_label(tape, &params, zero_query, tree_vecs, graph_vecs);

    struct Soft<'a> {
        params: DecoderParams,
        cfg: &'a ModelConfig,
        tree_vecs: &'a [Var],
        graph_vecs: &'a [Var],
        nodes: usize,
        truncated: bool,
    }

    impl Soft<'_> {
        /// Returns the gated backtrack message (None at the root).
        fn visit(
            &mut self,
            tape: &mut Tape,
            q_node: Var,
            is_root: bool,
            parent_msg: Option<Var>,
        ) -> Option<Var> {
            let mut inbound: Vec<Var> = parent_msg.iter().copied().collect();
            let final_gate = loop {
                let (_, _, p) = predict_topology(
                    tape,
                    &self.params,
                    q_node,
                    &inbound,
                    self.tree_vecs,
                    self.graph_vecs,
                );
                let gate = straight_through(tape, p);
                if tape.value(p).item() <= 0.5 {
                    break gate;
                }
                if self.nodes >= self.cfg.max_nodes {
                    self.truncated = true;
                    break gate;
                }
                // Child message, gated by d = 1 in the forward pass.
                let raw = tree_gru(tape, &self.params.gru, q_node, &inbound);
                let msg = tape.scale_by(gate, raw);
                let (_, q_child) =
                    predict_label(tape, &self.params, msg, self.tree_vecs, self.graph_vecs);
                self.nodes += 1;
                let back = self
                    .visit(tape, q_child, false, Some(msg))
                    .expect("child visit yields a message");
                inbound.push(back);
            };
            if is_root {
                return None;
            }
            // Backtrack message, gated by (1 - d) = 1 in the forward pass.
            let children_msgs = &inbound[1..];
            let raw = tree_gru(tape, &self.params.gru, q_node, children_msgs);
            let one = tape.scalar(1.0);
            let inv = tape.sub(one, final_gate);
            Some(tape.scale_by(inv, raw))
        }
    }

    let mut soft = Soft {
        params,
        cfg,
        tree_vecs,
        graph_vecs,
        nodes: 1,
        truncated: false,
    };
    // Run the root and collect the messages its children sent back.
    let mut root_inbound: Vec<Var> = Vec::new();
    {
        // The root has no parent; replicate visit() inline to capture the
        // children messages that form s_root.
        loop {
            let (_, _, p) = predict_topology(
                tape,
                &soft.params,
                q_root,
                &root_inbound,
                tree_vecs,
                graph_vecs,
            );
            let gate = straight_through(tape, p);
            if tape.value(p).item() <= 0.5 {
                break;
            }
            if soft.nodes >= soft.cfg.max_nodes {
                soft.truncated = true;
                break;
            }
            let raw = tree_gru(tape, &soft.params.gru, q_root, &root_inbound);
            let msg = tape.scale_by(gate, raw);
            let (_, q_child) = predict_label(tape, &soft.params, msg, tree_vecs, graph_vecs);
            soft.nodes += 1;
            let back = soft
                .visit(tape, q_child, false, Some(msg))
                .expect("child visit yields a message");
            root_inbound.push(back);
        }
    }
    let s_root = if root_inbound.is_empty() {
        tape.zeros(cfg.hidden)
    } else {
        tape.sum_vars(&root_inbound)
    };
    let repr = tape.concat(&[q_root, s_root]);
    TreeRepr {
        repr,
        nodes: soft.nodes,
        truncated: soft.truncated,
    }
}

/// Teacher-forced continuous representation of a real tree: messages from
/// one-hot ground-truth labels over the ground-truth topology (no gates),
/// with the predicted root label distribution in the first slot.
pub fn real_tree_repr(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &ModelConfig,
    tree_vecs: &[Var],
    graph_vecs: &[Var],
    target: &JunctionTree,
) -> Var {
    let params = bind_decoder(tape, store);
    let zero_query = tape.zeros(cfg.hidden);
    let (_, q_root) = predict_label(tape, &params, zero_query, tree_vecs, graph_vecs);

    let feats: Vec<Var> = (0..target.len())
        .map(|i| {
            let label = target.label(i).expect("real tree must be labeled");
            tape.constant(Tensor::vector(label_onehot(label, cfg.vocab)))
        })
        .collect();

    fn visit(
        tape: &mut Tape,
        params: &DecoderParams,
        feats: &[Var],
        target: &JunctionTree,
        node: usize,
        parent: Option<(usize, Var)>,
    ) -> Option<Var> {
        let mut inbound: Vec<Var> = parent.iter().map(|&(_, m)| m).collect();
        for child in target.children_in_order(node, parent.map(|(p, _)| p)) {
            let msg = tree_gru(tape, &params.gru, feats[node], &inbound);
            let back = visit(tape, params, feats, target, child, Some((node, msg)))
                .expect("child returns a message");
            inbound.push(back);
        }
        parent.map(|_| tree_gru(tape, &params.gru, feats[node], &inbound[1..]))
    }

    // Collect the root's inward messages.
    let mut root_inbound: Vec<Var> = Vec::new();
    for child in target.children_in_order(target.root, None) {
        let msg = tree_gru(tape, &params.gru, feats[target.root], &root_inbound);
        let back = visit(tape, &params, &feats, target, child, Some((target.root, msg)))
            .expect("child returns a message");
        root_inbound.push(back);
    }
    let s_root = if root_inbound.is_empty() {
        tape.zeros(cfg.hidden)
    } else {
        tape.sum_vars(&root_inbound)
    };
    tape.concat(&[q_root, s_root])
}

/// The soft-decoding message pipeline driven by ground-truth-matching
/// decisions: one-hot label inputs and straight-through gates whose forward
/// values are exactly 1. Used to verify that gated soft messages reproduce
/// teacher-forced messages bit for bit.
pub fn gated_teacher_repr(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &ModelConfig,
    tree_vecs: &[Var],
    graph_vecs: &[Var],
    target: &JunctionTree,
) -> Var {
    let params = bind_decoder(tape, store);
    let zero_query = tape.zeros(cfg.hidden);
    let (_, q_root) = predict_label(tape, &params, zero_query, tree_vecs, graph_vecs);

    let feats: Vec<Var> = (0..target.len())
        .map(|i| {
            let label = target.label(i).expect("tree must be labeled");
            tape.constant(Tensor::vector(label_onehot(label, cfg.vocab)))
        })
        .collect();

    // Gates from synthetic topology scores agreeing with the ground truth:
    // expand -> p = 0.9 -> d = 1; backtrack -> p = 0.1 -> 1 - d = 1.
    fn expand_gate(tape: &mut Tape) -> Var {
        let p = tape.constant(Tensor::vector(vec![0.9]));
        straight_through(tape, p)
    }
    fn backtrack_gate(tape: &mut Tape) -> Var {
        let p = tape.constant(Tensor::vector(vec![0.1]));
        let d = straight_through(tape, p);
        let one = tape.scalar(1.0);
        tape.sub(one, d)
    }

    fn visit(
        tape: &mut Tape,
        params: &DecoderParams,
        feats: &[Var],
        target: &JunctionTree,
        node: usize,
        parent: Option<(usize, Var)>,
    ) -> Option<Var> {
        let mut inbound: Vec<Var> = parent.iter().map(|&(_, m)| m).collect();
        for child in target.children_in_order(node, parent.map(|(p, _)| p)) {
            let raw = tree_gru(tape, &params.gru, feats[node], &inbound);
            let d = expand_gate(tape);
            let msg = tape.scale_by(d, raw);
            let back = visit(tape, params, feats, target, child, Some((node, msg)))
                .expect("child returns a message");
            inbound.push(back);
        }
        parent.map(|_| {
            let raw = tree_gru(tape, &params.gru, feats[node], &inbound[1..]);
            let gate = backtrack_gate(tape);
            tape.scale_by(gate, raw)
        })
    }

    let mut root_inbound: Vec<Var> = Vec::new();
    for child in target.children_in_order(target.root, None) {
        let raw = tree_gru(tape, &params.gru, feats[target.root], &root_inbound);
        let d = expand_gate(tape);
        let msg = tape.scale_by(d, raw);
        let back = visit(
            tape,
            &params,
            &feats,
            target,
            child,
            Some((target.root, msg)),
        )
        .expect("child returns a message");
        root_inbound.push(back);
    }
    let s_root = if root_inbound.is_empty() {
        tape.zeros(cfg.hidden)
    } else {
        tape.sum_vars(&root_inbound)
    };
    tape.concat(&[q_root, s_root])
}

const LEAKY_SLOPE: f64 = 0.2;

/// Three-layer discriminator with LeakyReLU activations; scalar output.
pub fn disc_forward(tape: &mut Tape, store: &ParamStore, x: Var) -> Var {
    let w1 = tape.param(store, "disc.l1.W");
    let b1 = tape.param(store, "disc.l1.b");
    let w2 = tape.param(store, "disc.l2.W");
    let b2 = tape.param(store, "disc.l2.b");
    let w3 = tape.param(store, "disc.l3.w");
    let b3 = tape.param(store, "disc.l3.b");
    let a1 = tape.matvec(w1, x);
    let a1 = tape.add(a1, b1);
    let h1 = tape.leaky_relu(a1, LEAKY_SLOPE);
    let a2 = tape.matvec(w2, h1);
    let a2 = tape.add(a2, b2);
    let h2 = tape.leaky_relu(a2, LEAKY_SLOPE);
    let out = tape.dot(w3, h2);
    tape.add(out, b3)
}

/// Closed-form gradient of the discriminator output with respect to its
/// input, built from differentiable ops so it can itself be differentiated
/// with respect to the discriminator weights. The activation masks are
/// piecewise constant and enter as detached constants.
pub fn disc_input_gradient(tape: &mut Tape, store: &ParamStore, x: Var) -> Var {
    let w1 = tape.param(store, "disc.l1.W");
    let b1 = tape.param(store, "disc.l1.b");
    let w2 = tape.param(store, "disc.l2.W");
    let b2 = tape.param(store, "disc.l2.b");
    let w3 = tape.param(store, "disc.l3.w");

    let a1 = tape.matvec(w1, x);
    let a1 = tape.add(a1, b1);
    let m1 = activation_mask(tape, a1);
    let h1 = tape.leaky_relu(a1, LEAKY_SLOPE);
    let a2 = tape.matvec(w2, h1);
    let a2 = tape.add(a2, b2);
    let m2 = activation_mask(tape, a2);

    // dD/dx = W1^T (m1 * (W2^T (m2 * w3))).
    let t1 = tape.mul(m2, w3);
    let t2 = tape.matvec_t(w2, t1);
    let t3 = tape.mul(m1, t2);
    tape.matvec_t(w1, t3)
}

fn activation_mask(tape: &mut Tape, pre: Var) -> Var {
    let mask: Vec<f64> = tape
        .value(pre)
        .data()
        .iter()
        .map(|&x| if x > 0.0 { 1.0 } else { LEAKY_SLOPE })
        .collect();
    tape.constant(Tensor::vector(mask))
}

/// (||grad_x D(point)|| - 1)^2 at one interpolation point.
pub fn gradient_penalty(tape: &mut Tape, store: &ParamStore, point: Var) -> Var {
    let g = disc_input_gradient(tape, store, point);
    let sq = tape.mul(g, g);
    let s = tape.sum(sq);
    let safe = tape.add_const(s, 1e-12);
    let norm = tape.sqrt(safe);
    let diff = tape.add_const(norm, -1.0);
    tape.mul(diff, diff)
}

/// Per-round diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct RoundStats {
    pub disc_loss: f64,
    pub gradient_penalty: f64,
    /// mean D(real) - mean D(fake) on the generator batch, after the
    /// discriminator updates and before the generator update.
    pub gap: f64,
    pub generator_adv: f64,
    pub vae_total: f64,
}

/// One adversarial round: N discriminator updates followed by one generator
/// update whose objective adds the adversarial term to the VAE loss.
pub fn adversarial_round(
    store: &mut ParamStore,
    cfg: &ModelConfig,
    gan: &GanConfig,
    pairs: &[PreparedPair],
    batch_size: usize,
    gen_adam: &AdamConfig,
    disc_adam: &AdamConfig,
    rng: &mut ChaCha8Rng,
) -> Result<RoundStats, TrainError> {
    assert!(!pairs.is_empty());
    let m = batch_size.min(pairs.len()).max(1);
    let mut disc_loss_last = 0.0;
    let mut gp_last = 0.0;

    for _ in 0..gan.disc_iters {
        // Representations computed without generator gradients.
        let mut reals: Vec<Tensor> = Vec::with_capacity(m);
        let mut fakes: Vec<Tensor> = Vec::with_capacity(m);
        for _ in 0..m {
            let pair = &pairs[rng.gen_range(0..pairs.len())];
            let noise = LatentNoise::standard(rng, cfg.latent);
            let mut scratch = Tape::new(store.precision());
            let (real, fake) = unroll_pair(&mut scratch, store, cfg, pair, &noise);
            reals.push(scratch.value(real).clone());
            fakes.push(scratch.value(fake).clone());
        }

        let mut tape = Tape::new(store.precision());
        let mut terms: Vec<Var> = Vec::new();
        let mut gp_terms: Vec<Var> = Vec::new();
        for (real, fake) in reals.iter().zip(&fakes) {
            let h = tape.constant(real.clone());
            let h_hat = tape.constant(fake.clone());
            let d_real = disc_forward(&mut tape, store, h);
            let d_fake = disc_forward(&mut tape, store, h_hat);
            let diff = tape.sub(d_fake, d_real);
            terms.push(diff);
            let eps: f64 = rng.gen_range(0.0..1.0);
            let mixed = Tensor::vector(
                real.data()
                    .iter()
                    .zip(fake.data())
                    .map(|(&a, &b)| eps * a + (1.0 - eps) * b)
                    .collect(),
            );
            let point = tape.constant(mixed);
            gp_terms.push(gradient_penalty(&mut tape, store, point));
        }
        let base = tape.sum_vars(&terms);
        let base = tape.scale(base, 1.0 / m as f64);
        let gp = tape.sum_vars(&gp_terms);
        let gp = tape.scale(gp, gan.gp_weight / m as f64);
        let loss = tape.add(base, gp);
        disc_loss_last = tape.value(loss).item();
        gp_last = tape.value(gp).item();
        if !disc_loss_last.is_finite() {
            return Err(TrainError::NonFinite {
                context: "discriminator loss".into(),
                value: disc_loss_last,
            });
        }
        store.zero_grads();
        let grads = tape.backward(loss);
        tape.accumulate_param_grads(&grads, store, 1.0);
        store.adam_step(disc_adam, |n| n.starts_with("disc."));
    }

    // Generator step on a fresh batch; real representations flow gradients.
    let mut tape = Tape::new(store.precision());
    let mut adv_terms: Vec<Var> = Vec::new();
    let mut vae_terms: Vec<Var> = Vec::new();
    let mut d_real_sum = 0.0;
    let mut d_fake_sum = 0.0;
    for _ in 0..m {
        let pair = &pairs[rng.gen_range(0..pairs.len())];
        let posterior_noise = LatentNoise::standard(rng, cfg.latent);
        let fwd = vae_forward(&mut tape, store, cfg, pair, &posterior_noise);
        vae_terms.push(fwd.loss.total);

        let prior_noise = LatentNoise::standard(rng, cfg.latent);
        let (zt, zg) = prior_codes(&mut tape, &prior_noise);
        let (tvecs, gvecs) = perturb_source(&mut tape, store, &fwd.enc_x, zt, zg);
        let real = real_tree_repr(&mut tape, store, cfg, &tvecs, &gvecs, &pair.y.tree);
        let fake = soft_decode(&mut tape, store, cfg, &tvecs, &gvecs);
        let d_real = disc_forward(&mut tape, store, real);
        let d_fake = disc_forward(&mut tape, store, fake.repr);
        d_real_sum += tape.value(d_real).item();
        d_fake_sum += tape.value(d_fake).item();
        adv_terms.push(tape.sub(d_real, d_fake));
    }
    let vae = tape.sum_vars(&vae_terms);
    let vae = tape.scale(vae, 1.0 / m as f64);
    let adv = tape.sum_vars(&adv_terms);
    let adv = tape.scale(adv, gan.gan_weight / m as f64);
    let total = tape.add(vae, adv);
    let total_v = tape.value(total).item();
    if !total_v.is_finite() {
        return Err(TrainError::NonFinite {
            context: "generator loss".into(),
            value: total_v,
        });
    }
    store.zero_grads();
    let grads = tape.backward(total);
    tape.accumulate_param_grads(&grads, store, 1.0);
    store.adam_step(gen_adam, |n| !n.starts_with("disc."));

    Ok(RoundStats {
        disc_loss: disc_loss_last,
        gradient_penalty: gp_last,
        gap: (d_real_sum - d_fake_sum) / m as f64,
        generator_adv: tape.value(adv).item(),
        vae_total: tape.value(vae).item(),
    })
}

/// Builds (real, fake) tree representations for one pair with prior codes.
fn unroll_pair(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &ModelConfig,
    pair: &PreparedPair,
    noise: &LatentNoise,
) -> (Var, Var) {
    let enc_x = encode_source(tape, store, cfg, &pair.x.mol, &pair.x.tree);
    let (zt, zg) = prior_codes(tape, noise);
    let (tvecs, gvecs) = perturb_source(tape, store, &enc_x, zt, zg);
    let real = real_tree_repr(tape, store, cfg, &tvecs, &gvecs, &pair.y.tree);
    let fake = soft_decode(tape, store, cfg, &tvecs, &gvecs);
    (real, fake.repr)
}
