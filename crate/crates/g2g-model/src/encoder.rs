//! Message-passing encoder shared by junction trees and molecular graphs.
//!
//! Messages start at zero and are updated in synchronous rounds: iteration t
//! reads only iteration t-1, so no node ordering is imposed.

use std::collections::BTreeMap;

use g2g_chem::junctree::JunctionTree;
use g2g_chem::molgraph::Molecule;
use g2g_tensor::layers::{tree_gru, TreeGruParams};
use g2g_tensor::{ParamStore, Tape, Tensor, Var};

use crate::config::ModelConfig;
use crate::features::{atom_features, bond_features, label_onehot};

/// Encoder output consumed by the decoders: one vector per tree node, one
/// per atom, and the final directed tree messages (graph decoder input).
pub struct EncodedSource {
    pub tree_vecs: Vec<Var>,
    pub graph_vecs: Vec<Var>,
    pub tree_messages: BTreeMap<(usize, usize), Var>,
}

pub(crate) fn bind_tree_gru(tape: &mut Tape, store: &ParamStore, prefix: &str) -> TreeGruParams {
    TreeGruParams {
        wz: tape.param(store, &format!("{}.Wz", prefix)),
        uz: tape.param(store, &format!("{}.Uz", prefix)),
        bz: tape.param(store, &format!("{}.bz", prefix)),
        wr: tape.param(store, &format!("{}.Wr", prefix)),
        ur: tape.param(store, &format!("{}.Ur", prefix)),
        br: tape.param(store, &format!("{}.br", prefix)),
        w: tape.param(store, &format!("{}.W", prefix)),
        u: tape.param(store, &format!("{}.U", prefix)),
        b: tape.param(store, &format!("{}.b", prefix)),
    }
}

/// Graph encoder: per-atom vectors after `graph_iters` rounds of single-layer
/// message passing over directed bonds.
pub fn encode_graph(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &ModelConfig,
    mol: &Molecule,
) -> Vec<Var> {
    let w1 = tape.param(store, "encoder.graph.W1");
    let w2 = tape.param(store, "encoder.graph.W2");
    let w3 = tape.param(store, "encoder.graph.W3");
    let u1 = tape.param(store, "encoder.graph.U1");
    let u2 = tape.param(store, "encoder.graph.U2");

    // Directed edges: (source atom, target atom); two per bond.
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(2 * mol.bond_count());
    for b in mol.bonds() {
        edges.push((b.a, b.b));
        edges.push((b.b, b.a));
    }
    let edge_index: BTreeMap<(usize, usize), usize> = edges
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, i))
        .collect();

    // Constant parts computed once per edge: W1 f_u + W2 f_uv.
    let atom_feats: Vec<Var> = (0..mol.atom_count())
        .map(|i| {
            let f = tape.constant(Tensor::vector(atom_features(mol, i)));
            tape.matvec(w1, f)
        })
        .collect();
    let fixed: Vec<Var> = edges
        .iter()
        .map(|&(u, v)| {
            let bi = mol.bond_between(u, v).unwrap();
            let fb = tape.constant(Tensor::vector(bond_features(mol.bond(bi).order)));
            let w2f = tape.matvec(w2, fb);
            tape.add(atom_feats[u], w2f)
        })
        .collect();

    let mut messages: Vec<Var> = (0..edges.len()).map(|_| tape.zeros(cfg.hidden)).collect();
    for _ in 0..cfg.graph_iters {
        let mut next = Vec::with_capacity(edges.len());
        for (ei, &(u, v)) in edges.iter().enumerate() {
            let inbound: Vec<Var> = mol
                .neighbors(u)
                .iter()
                .filter(|&&(w, _)| w != v)
                .map(|&(w, _)| messages[edge_index[&(w, u)]])
                .collect();
            let pre = if inbound.is_empty() {
                fixed[ei]
            } else {
                let s = tape.sum_vars(&inbound);
                let w3s = tape.matvec(w3, s);
                tape.add(fixed[ei], w3s)
            };
            next.push(tape.relu(pre));
        }
        messages = next;
    }

    (0..mol.atom_count())
        .map(|u| {
            let f = tape.constant(Tensor::vector(atom_features(mol, u)));
            let u1f = tape.matvec(u1, f);
            let inbound: Vec<Var> = mol
                .neighbors(u)
                .iter()
                .map(|&(v, _)| messages[edge_index[&(v, u)]])
                .collect();
            let pre = if inbound.is_empty() {
                u1f
            } else {
                let s = tape.sum_vars(&inbound);
                let u2s = tape.matvec(u2, s);
                tape.add(u1f, u2s)
            };
            tape.relu(pre)
        })
        .collect()
}

/// Tree encoder: tree-GRU message passing (edge features are always zero and
/// omitted), returning per-node vectors and the final directed messages.
pub fn encode_tree(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &ModelConfig,
    tree: &JunctionTree,
) -> (Vec<Var>, BTreeMap<(usize, usize), Var>) {
    let gru = bind_tree_gru(tape, store, "encoder.tree.gru");
    let u1 = tape.param(store, "encoder.tree.U1");
    let u2 = tape.param(store, "encoder.tree.U2");

    let feats: Vec<Var> = (0..tree.len())
        .map(|i| {
            let label = tree.label(i).expect("tree must be labeled before encoding");
            tape.constant(Tensor::vector(label_onehot(label, cfg.vocab)))
        })
        .collect();

    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(2 * tree.edges.len());
    for &(a, b) in &tree.edges {
        edges.push((a, b));
        edges.push((b, a));
    }
    let edge_index: BTreeMap<(usize, usize), usize> = edges
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, i))
        .collect();

    let mut messages: Vec<Var> = (0..edges.len()).map(|_| tape.zeros(cfg.hidden)).collect();
    for _ in 0..cfg.tree_iters {
        let mut next = Vec::with_capacity(edges.len());
        for &(u, v) in &edges {
            let inbound: Vec<Var> = tree
                .neighbors(u)
                .iter()
                .filter(|&&w| w != v)
                .map(|&w| messages[edge_index[&(w, u)]])
                .collect();
            next.push(tree_gru(tape, &gru, feats[u], &inbound));
        }
        messages = next;
    }

    let vecs = (0..tree.len())
        .map(|u| {
            let u1f = tape.matvec(u1, feats[u]);
            let inbound: Vec<Var> = tree
                .neighbors(u)
                .iter()
                .map(|&v| messages[edge_index[&(v, u)]])
                .collect();
            let pre = if inbound.is_empty() {
                u1f
            } else {
                let s = tape.sum_vars(&inbound);
                let u2s = tape.matvec(u2, s);
                tape.add(u1f, u2s)
            };
            tape.relu(pre)
        })
        .collect();

    let message_map = edges
        .iter()
        .enumerate()
        .map(|(i, &e)| (e, messages[i]))
        .collect();
    (vecs, message_map)
}

/// Encodes a molecule and its junction tree with the shared encoder.
pub fn encode_source(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &ModelConfig,
    mol: &Molecule,
    tree: &JunctionTree,
) -> EncodedSource {
    let graph_vecs = encode_graph(tape, store, cfg, mol);
    let (tree_vecs, tree_messages) = encode_tree(tape, store, cfg, tree);
    EncodedSource {
        tree_vecs,
        graph_vecs,
        tree_messages,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use g2g_chem::junctree::{decompose, ClusterVocab};
    use g2g_chem::molgraph::parse_smiles;
    use g2g_tensor::Precision;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(vocab_corpus: &[&str], hidden: usize) -> (ParamStore, ModelConfig, ClusterVocab) {
        let mols: Vec<_> = vocab_corpus
            .iter()
            .map(|s| parse_smiles(s).unwrap())
            .collect();
        let vocab = ClusterVocab::build(&mols);
        let cfg = ModelConfig::new(vocab.len()).with_hidden(hidden).with_latent(4);
        let mut store = ParamStore::new(Precision::Double);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        cfg.register_params(&mut store, &mut rng);
        (store, cfg, vocab)
    }

    #[test]
    fn single_atom_uses_only_g2() {
        // No edges: x_u = relu(U1 f_u).
        let (store, cfg, _) = setup(&["C"], 6);
        let mol = parse_smiles("C").unwrap();
        let mut tape = Tape::new(Precision::Double);
        let vecs = encode_graph(&mut tape, &store, &cfg, &mol);
        assert_eq!(vecs.len(), 1);

        let u1 = store.value("encoder.graph.U1");
        let f = atom_features(&mol, 0);
        let expect: Vec<f64> = (0..cfg.hidden)
            .map(|r| {
                let mut acc = 0.0;
                for c in 0..ATOM_FEATURES_LEN {
                    acc += u1.at(r, c) * f[c];
                }
                acc.max(0.0)
            })
            .collect();
        for (got, want) in tape.value(vecs[0]).data().iter().zip(&expect) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    const ATOM_FEATURES_LEN: usize = crate::features::ATOM_FEATURES;

    #[test]
    fn two_atom_single_iteration_matches_hand_computation() {
        // nu_uv = relu(W1 f_u + W2 f_uv) when the message sum is empty.
        let (store, mut cfg, _) = setup(&["CC"], 5);
        cfg.graph_iters = 1;
        let mol = parse_smiles("CC").unwrap();
        let mut tape = Tape::new(Precision::Double);
        let vecs = encode_graph(&mut tape, &store, &cfg, &mol);

        let w1 = store.value("encoder.graph.W1");
        let w2 = store.value("encoder.graph.W2");
        let u1 = store.value("encoder.graph.U1");
        let u2 = store.value("encoder.graph.U2");
        let f0 = atom_features(&mol, 0);
        let fb = bond_features(g2g_chem::molgraph::BondOrder::Single);
        // Message 1 -> 0.
        let f1 = atom_features(&mol, 1);
        let msg10: Vec<f64> = (0..cfg.hidden)
            .map(|r| {
                let mut acc = 0.0;
                for c in 0..ATOM_FEATURES_LEN {
                    acc += w1.at(r, c) * f1[c];
                }
                for c in 0..4 {
                    acc += w2.at(r, c) * fb[c];
                }
                acc.max(0.0)
            })
            .collect();
        let expect0: Vec<f64> = (0..cfg.hidden)
            .map(|r| {
                let mut acc = 0.0;
                for c in 0..ATOM_FEATURES_LEN {
                    acc += u1.at(r, c) * f0[c];
                }
                for c in 0..cfg.hidden {
                    acc += u2.at(r, c) * msg10[c];
                }
                acc.max(0.0)
            })
            .collect();
        for (got, want) in tape.value(vecs[0]).data().iter().zip(&expect0) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn graph_encoding_is_permutation_equivariant() {
        let (store, cfg, _) = setup(&["CCO", "CCC"], 7);
        let mol = parse_smiles("CCO").unwrap();
        let mut tape = Tape::new(Precision::Double);
        let vecs = encode_graph(&mut tape, &store, &cfg, &mol);
        let perm = vec![2usize, 0, 1];
        let permuted = mol.permuted(&perm);
        let mut tape2 = Tape::new(Precision::Double);
        let vecs2 = encode_graph(&mut tape2, &store, &cfg, &permuted);
        for (old, &new_idx) in perm.iter().enumerate() {
            assert_eq!(
                tape.value(vecs[old]).data(),
                tape2.value(vecs2[new_idx]).data()
            );
        }
    }

    #[test]
    fn tree_encoding_ignores_root_choice() {
        let (store, cfg, vocab) = setup(&["CCO", "CCC", "CCN"], 7);
        let mol = parse_smiles("CCO").unwrap();
        let mut tree = decompose(&mol);
        tree.assign_labels(&vocab).unwrap();

        let mut tape = Tape::new(Precision::Double);
        let (vecs, _) = encode_tree(&mut tape, &store, &cfg, &tree);

        let mut rerooted = tree.clone();
        rerooted.root = (tree.root + 1) % tree.len();
        let mut tape2 = Tape::new(Precision::Double);
        let (vecs2, _) = encode_tree(&mut tape2, &store, &cfg, &rerooted);
        for (a, b) in vecs.iter().zip(&vecs2) {
            assert_eq!(tape.value(*a).data(), tape2.value(*b).data());
        }
    }

    #[test]
    fn single_node_tree() {
        let (store, cfg, vocab) = setup(&["C", "CC"], 5);
        let mol = parse_smiles("C").unwrap();
        let mut tree = decompose(&mol);
        tree.assign_labels(&vocab).unwrap();
        let mut tape = Tape::new(Precision::Double);
        let (vecs, msgs) = encode_tree(&mut tape, &store, &cfg, &tree);
        assert_eq!(vecs.len(), 1);
        assert!(msgs.is_empty());
    }
}
