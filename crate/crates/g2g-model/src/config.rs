//! Model dimensions and parameter registration.

use g2g_tensor::ParamStore;
use rand::Rng;

use crate::features::{ATOM_FEATURES, BOND_FEATURES};

/// Hyper-parameters fixing every tensor shape in the model.
#[derive(Debug, Clone, Copy)]
pub struct ModelConfig {
    /// Hidden state dimension d_h.
    pub hidden: usize,
    /// Latent code dimension per code (z_tree and z_graph each).
    pub latent: usize,
    /// Cluster vocabulary size.
    pub vocab: usize,
    /// Tree encoder message-passing iterations.
    pub tree_iters: usize,
    /// Graph encoder message-passing iterations.
    pub graph_iters: usize,
    /// Free-running decoder node budget.
    pub max_nodes: usize,
    /// KL regularization weight (1/|z| by default).
    pub kl_weight: f64,
}

impl ModelConfig {
    pub fn new(vocab: usize) -> ModelConfig {
        ModelConfig {
            hidden: 300,
            latent: 8,
            vocab,
            tree_iters: 6,
            graph_iters: 3,
            max_nodes: 60,
            kl_weight: 1.0 / 8.0,
        }
    }

    pub fn with_hidden(mut self, hidden: usize) -> ModelConfig {
        self.hidden = hidden;
        self
    }

    pub fn with_latent(mut self, latent: usize) -> ModelConfig {
        self.latent = latent;
        self.kl_weight = 1.0 / latent as f64;
        self
    }

    /// Discriminator input width: root label distribution plus root message.
    pub fn tree_repr_dim(&self) -> usize {
        self.vocab + self.hidden
    }

    /// Registers every learnable tensor. Registration order is fixed by the
    /// call sequence, so a seeded RNG gives reproducible initialization.
    pub fn register_params(&self, store: &mut ParamStore, rng: &mut impl Rng) {
        let d = self.hidden;
        let v = self.vocab;
        let z = self.latent;

        // Graph encoder (single-layer message passing).
        store.register_matrix("encoder.graph.W1", d, ATOM_FEATURES, rng);
        store.register_matrix("encoder.graph.W2", d, BOND_FEATURES, rng);
        store.register_matrix("encoder.graph.W3", d, d, rng);
        store.register_matrix("encoder.graph.U1", d, ATOM_FEATURES, rng);
        store.register_matrix("encoder.graph.U2", d, d, rng);

        // Tree encoder: tree GRU for g1, same g2 form with its own weights.
        register_tree_gru(store, "encoder.tree.gru", d, v, rng);
        store.register_matrix("encoder.tree.U1", d, v, rng);
        store.register_matrix("encoder.tree.U2", d, d, rng);

        // Tree decoder.
        register_tree_gru(store, "decoder.tree.gru", d, v, rng);
        store.register_matrix("decoder.tree.topo.W1", d, v, rng);
        store.register_matrix("decoder.tree.topo.W2", d, d, rng);
        store.register_matrix("decoder.tree.topo.W3", d, d, rng);
        store.register_matrix("decoder.tree.topo.W4", d, 2 * d, rng);
        store.register_vector("decoder.tree.topo.u", d, rng);
        store.register_matrix("decoder.tree.att_d.A_T", d, d, rng);
        store.register_matrix("decoder.tree.att_d.A_G", d, d, rng);
        store.register_matrix("decoder.tree.att_l.A_T", d, d, rng);
        store.register_matrix("decoder.tree.att_l.A_G", d, d, rng);
        store.register_matrix("decoder.tree.label.W1", d, d, rng);
        store.register_matrix("decoder.tree.label.W2", d, 2 * d, rng);
        store.register_matrix("decoder.tree.label.U", v, d, rng);

        // Graph decoder (attachment scoring network).
        store.register_matrix("decoder.graph.W1", d, ATOM_FEATURES, rng);
        store.register_matrix("decoder.graph.W2", d, BOND_FEATURES, rng);
        store.register_matrix("decoder.graph.W3", d, d, rng);
        store.register_matrix("decoder.graph.U1", d, ATOM_FEATURES, rng);
        store.register_matrix("decoder.graph.U2", d, d, rng);

        // Posterior affine layers (shared across the two codes).
        store.register_matrix("vae.posterior.mu.W", z, d, rng);
        store.register_bias("vae.posterior.mu.b", z);
        store.register_matrix("vae.posterior.logvar.W", z, d, rng);
        store.register_bias("vae.posterior.logvar.b", z);

        // Latent-code injection into source vectors.
        store.register_matrix("vae.perturb.W1", d, d, rng);
        store.register_matrix("vae.perturb.W2", d, z, rng);
        store.register_matrix("vae.perturb.W3", d, d, rng);
        store.register_matrix("vae.perturb.W4", d, z, rng);

        // Discriminator: three layers, LeakyReLU(0.2).
        let repr = self.tree_repr_dim();
        store.register_matrix("disc.l1.W", d, repr, rng);
        store.register_bias("disc.l1.b", d);
        store.register_matrix("disc.l2.W", d, d, rng);
        store.register_bias("disc.l2.b", d);
        store.register_vector("disc.l3.w", d, rng);
        store.register_bias("disc.l3.b", 1);
    }
}

fn register_tree_gru(
    store: &mut ParamStore,
    prefix: &str,
    d: usize,
    feat: usize,
    rng: &mut impl Rng,
) {
    store.register_matrix(&format!("{}.Wz", prefix), d, feat, rng);
    store.register_matrix(&format!("{}.Uz", prefix), d, d, rng);
    store.register_bias(&format!("{}.bz", prefix), d);
    store.register_matrix(&format!("{}.Wr", prefix), d, feat, rng);
    store.register_matrix(&format!("{}.Ur", prefix), d, d, rng);
    store.register_bias(&format!("{}.br", prefix), d);
    store.register_matrix(&format!("{}.W", prefix), d, feat, rng);
    store.register_matrix(&format!("{}.U", prefix), d, d, rng);
    store.register_bias(&format!("{}.b", prefix), d);
}
