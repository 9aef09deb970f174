//! Graph decoder: scores candidate attachments to realize a decoded junction
//! tree as a molecule.
//!
//! Candidate fragments are scored by a message-passing network whose messages
//! are augmented with tree messages h_(alpha_u, alpha_v) wherever an edge
//! crosses a cluster boundary, which breaks local isomorphism between
//! equal-labeled neighbors.

use std::collections::BTreeMap;

use g2g_chem::junctree::{AssemblyError, Assembler, AttachmentCandidate, JunctionTree};
use g2g_chem::molgraph::Molecule;
use g2g_tensor::{ParamStore, Tape, Tensor, Var};

use crate::config::ModelConfig;
use crate::features::{atom_features, bond_features};
use crate::prep::NodeCandidates;

#[derive(Clone, Copy)]
pub struct GraphDecParams {
    pub w1: Var,
    pub w2: Var,
    pub w3: Var,
    pub u1: Var,
    pub u2: Var,
}

pub fn bind_graph_decoder(tape: &mut Tape, store: &ParamStore) -> GraphDecParams {
    GraphDecParams {
        w1: tape.param(store, "decoder.graph.W1"),
        w2: tape.param(store, "decoder.graph.W2"),
        w3: tape.param(store, "decoder.graph.W3"),
        u1: tape.param(store, "decoder.graph.U1"),
        u2: tape.param(store, "decoder.graph.U2"),
    }
}

/// Scores one attachment candidate: message passing over the fragment with
/// tree messages injected across cluster boundaries, sum-pooled and dotted
/// with the (perturbed) source graph representation.
pub fn score_attachment(
    tape: &mut Tape,
    params: &GraphDecParams,
    cfg: &ModelConfig,
    cand: &AttachmentCandidate,
    tree_messages: &BTreeMap<(usize, usize), Var>,
    source_graph_sum: Var,
) -> Var {
    let mol = &cand.fragment;
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

    let atom_term: Vec<Var> = (0..mol.atom_count())
        .map(|i| {
            let f = tape.constant(Tensor::vector(atom_features(mol, i)));
            tape.matvec(params.w1, f)
        })
        .collect();
    let fixed: Vec<Var> = edges
        .iter()
        .map(|&(u, v)| {
            let bi = mol.bond_between(u, v).unwrap();
            let fb = tape.constant(Tensor::vector(bond_features(mol.bond(bi).order)));
            let w2f = tape.matvec(params.w2, fb);
            tape.add(atom_term[u], w2f)
        })
        .collect();

    // Tree message injected for boundary edges, present at every iteration.
    let injected: Vec<Option<Var>> = edges
        .iter()
        .map(|&(u, v)| {
            let (au, av) = (cand.alpha[u], cand.alpha[v]);
            if au == av {
                None
            } else {
                let m = tree_messages.get(&(au, av)).unwrap_or_else(|| {
                    panic!(
                        "missing tree message ({}, {}): candidate inconsistent with tree",
                        au, av
                    )
                });
                Some(*m)
            }
        })
        .collect();

    let mut messages: Vec<Option<Var>> = vec![None; edges.len()];
    for _ in 0..cfg.graph_iters {
        let mut next = Vec::with_capacity(edges.len());
        for (ei, &(u, v)) in edges.iter().enumerate() {
            let mut inbound: Vec<Var> = mol
                .neighbors(u)
                .iter()
                .filter(|&&(w, _)| w != v)
                .filter_map(|&(w, _)| messages[edge_index[&(w, u)]])
                .collect();
            if let Some(h) = injected[ei] {
                inbound.push(h);
            }
            let pre = if inbound.is_empty() {
                fixed[ei]
            } else {
                let s = tape.sum_vars(&inbound);
                let w3s = tape.matvec(params.w3, s);
                tape.add(fixed[ei], w3s)
            };
            next.push(Some(tape.relu(pre)));
        }
        messages = next;
    }

    let mut pooled: Option<Var> = None;
    for u in 0..mol.atom_count() {
        let f = tape.constant(Tensor::vector(atom_features(mol, u)));
        let u1f = tape.matvec(params.u1, f);
        let inbound: Vec<Var> = mol
            .neighbors(u)
            .iter()
            .filter_map(|&(v, _)| messages[edge_index[&(v, u)]])
            .collect();
        let pre = if inbound.is_empty() {
            u1f
        } else {
            let s = tape.sum_vars(&inbound);
            let u2s = tape.matvec(params.u2, s);
            tape.add(u1f, u2s)
        };
        let mu = tape.relu(pre);
        pooled = Some(match pooled {
            Some(acc) => tape.add(acc, mu),
            None => mu,
        });
    }
    let m = pooled.expect("candidate fragments are non-empty");
    tape.dot(m, source_graph_sum)
}

/// Teacher-forced assembly loss over all multi-candidate nodes:
/// sum_i [logsumexp(scores_i) - score_i(ground truth)].
pub fn assembly_loss(
    tape: &mut Tape,
    params: &GraphDecParams,
    cfg: &ModelConfig,
    nodes: &[NodeCandidates],
    tree_messages: &BTreeMap<(usize, usize), Var>,
    source_graph_sum: Var,
) -> Option<Var> {
    let mut terms = Vec::new();
    for nc in nodes {
        if nc.cands.len() < 2 {
            continue;
        }
        let scores: Vec<Var> = nc
            .cands
            .iter()
            .map(|c| score_attachment(tape, params, cfg, c, tree_messages, source_graph_sum))
            .collect();
        let stacked = tape.stack(&scores);
        let lse = tape.logsumexp(stacked);
        let gt = tape.slice(stacked, nc.gt, nc.gt + 1);
        terms.push(tape.sub(lse, gt));
    }
    if terms.is_empty() {
        None
    } else {
        Some(tape.sum_vars(&terms))
    }
}

/// Greedy assembly of a decoded tree: at each node in decode order pick the
/// highest-scoring candidate (ties keep the lowest canonical form).
pub fn assemble_greedy(
    tape: &mut Tape,
    params: &GraphDecParams,
    cfg: &ModelConfig,
    tree: &JunctionTree,
    tree_messages: &BTreeMap<(usize, usize), Var>,
    source_graph_sum: Var,
) -> Result<Molecule, AssemblyError> {
    let mut asm = Assembler::new(tree);
    for (node, parent) in tree.decode_order() {
        let cands = asm.candidates_at(node, parent);
        if cands.is_empty() {
            return Err(AssemblyError::NoCandidates(node));
        }
        let choice = if cands.len() == 1 {
            0
        } else {
            let mut best = 0;
            let mut best_score = f64::NEG_INFINITY;
            for (i, cand) in cands.iter().enumerate() {
                let s = score_attachment(tape, params, cfg, cand, tree_messages, source_graph_sum);
                let v = tape.value(s).item();
                if v > best_score {
                    best_score = v;
                    best = i;
                }
            }
            best
        };
        asm.apply(&cands[choice]);
    }
    asm.finish()
}
