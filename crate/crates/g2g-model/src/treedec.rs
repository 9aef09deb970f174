//! Attention-augmented recurrent tree decoder.
//!
//! The tree grows top-down, one node at a time. Every visit makes a binary
//! topology decision (expand vs backtrack); every expansion predicts the new
//! child's label. Teacher forcing replays the depth-first traversal of a
//! target tree and records per-step losses; free-running mode follows its
//! own predictions until it backtracks at the root or runs out of budget.

use g2g_chem::junctree::JunctionTree;
use g2g_tensor::layers::{bilinear_attention, tree_gru, AttentionParams, TreeGruParams};
use g2g_tensor::{ParamStore, Tape, Tensor, Var};

use crate::config::ModelConfig;
use crate::encoder::bind_tree_gru;
use crate::features::label_onehot;

/// Tree-decoder weights bound onto a tape.
#[derive(Clone, Copy)]
pub struct DecoderParams {
    pub gru: TreeGruParams,
    pub topo_w1: Var,
    pub topo_w2: Var,
    pub topo_w3: Var,
    pub topo_w4: Var,
    pub topo_u: Var,
    pub att_d: AttentionParams,
    pub att_l: AttentionParams,
    pub label_w1: Var,
    pub label_w2: Var,
    pub label_u: Var,
}

pub fn bind_decoder(tape: &mut Tape, store: &ParamStore) -> DecoderParams {
    DecoderParams {
        gru: bind_tree_gru(tape, store, "decoder.tree.gru"),
        topo_w1: tape.param(store, "decoder.tree.topo.W1"),
        topo_w2: tape.param(store, "decoder.tree.topo.W2"),
        topo_w3: tape.param(store, "decoder.tree.topo.W3"),
        topo_w4: tape.param(store, "decoder.tree.topo.W4"),
        topo_u: tape.param(store, "decoder.tree.topo.u"),
        att_d: AttentionParams {
            a_tree: tape.param(store, "decoder.tree.att_d.A_T"),
            a_graph: tape.param(store, "decoder.tree.att_d.A_G"),
        },
        att_l: AttentionParams {
            a_tree: tape.param(store, "decoder.tree.att_l.A_T"),
            a_graph: tape.param(store, "decoder.tree.att_l.A_G"),
        },
        label_w1: tape.param(store, "decoder.tree.label.W1"),
        label_w2: tape.param(store, "decoder.tree.label.W2"),
        label_u: tape.param(store, "decoder.tree.label.U"),
    }
}

/// One topology decision.
pub struct TopoStep {
    pub node: usize,
    pub hidden: Var,
    pub logit: Var,
    pub p: Var,
    /// 1.0 = expand, 0.0 = backtrack; None in free-running mode.
    pub target: Option<f64>,
}

/// One label prediction (for a newly expanded child, or the root).
pub struct LabelStep {
    pub node: usize,
    pub message: Var,
    pub logits: Var,
    pub q: Var,
    pub target: Option<u32>,
}

/// Ordered record of one decoding unroll.
pub struct DecoderTrace {
    pub root_label: LabelStep,
    pub topo_steps: Vec<TopoStep>,
    pub label_steps: Vec<LabelStep>,
    pub truncated: bool,
}

impl DecoderTrace {
    /// True when every argmax decision reproduces its target.
    pub fn exact_match(&self, tape: &Tape) -> bool {
        let label_ok = |s: &LabelStep| match s.target {
            Some(t) => argmax(tape.value(s.q).data()) == t as usize,
            None => true,
        };
        if !label_ok(&self.root_label) {
            return false;
        }
        for s in &self.topo_steps {
            if let Some(t) = s.target {
                let expand = tape.value(s.p).item() > 0.5;
                if expand != (t > 0.5) {
                    return false;
                }
            }
        }
        self.label_steps.iter().all(label_ok)
    }
}

/// A free-running decode result: labels indexed by node, edges, root 0.
pub struct DecodedTree {
    pub labels: Vec<u32>,
    pub edges: Vec<(usize, usize)>,
    pub truncated: bool,
}

pub fn argmax(data: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in data.iter().enumerate() {
        if x > data[best] {
            best = i;
        }
    }
    best
}

/// Topology score: h_t from node features and inbound messages, bilinear
/// attention over the source, then a one-hidden-layer scorer.
pub fn predict_topology(
    tape: &mut Tape,
    p: &DecoderParams,
    features: Var,
    inbound: &[Var],
    tree_vecs: &[Var],
    graph_vecs: &[Var],
) -> (Var, Var, Var) {
    let hidden = tape.value(p.topo_w2).rows();
    let w1f = tape.matvec(p.topo_w1, features);
    let h_t = if inbound.is_empty() {
        tape.relu(w1f)
    } else {
        let s = tape.sum_vars(inbound);
        let w2s = tape.matvec(p.topo_w2, s);
        let pre = tape.add(w1f, w2s);
        tape.relu(pre)
    };
    debug_assert_eq!(tape.value(h_t).numel(), hidden);
    let (ctx, _, _) = bilinear_attention(tape, &p.att_d, h_t, tree_vecs, graph_vecs);
    let w3h = tape.matvec(p.topo_w3, h_t);
    let w4c = tape.matvec(p.topo_w4, ctx);
    let pre = tape.add(w3h, w4c);
    let inner = tape.relu(pre);
    let logit = tape.dot(p.topo_u, inner);
    let prob = tape.sigmoid(logit);
    (h_t, logit, prob)
}

/// Label distribution over the vocabulary given the expansion message.
pub fn predict_label(
    tape: &mut Tape,
    p: &DecoderParams,
    message: Var,
    tree_vecs: &[Var],
    graph_vecs: &[Var],
) -> (Var, Var) {
    let (ctx, _, _) = bilinear_attention(tape, &p.att_l, message, tree_vecs, graph_vecs);
    let w1h = tape.matvec(p.label_w1, message);
    let w2c = tape.matvec(p.label_w2, ctx);
    let pre = tape.add(w1h, w2c);
    let inner = tape.relu(pre);
    let logits = tape.matvec(p.label_u, inner);
    let q = tape.softmax(logits);
    (logits, q)
}

/// Replays the depth-first traversal of `target`, recording topology and
/// label steps with their ground-truth values.
pub fn decode_teacher_forced(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &ModelConfig,
    tree_vecs: &[Var],
    graph_vecs: &[Var],
    target: &JunctionTree,
) -> DecoderTrace {
    let params = bind_decoder(tape, store);
    let feats: Vec<Var> = (0..target.len())
        .map(|i| {
            let label = target.label(i).expect("target tree must be labeled");
            tape.constant(Tensor::vector(label_onehot(label, cfg.vocab)))
        })
        .collect();

    let zero_query = tape.zeros(cfg.hidden);
    let (logits, q) = predict_label(tape, &params, zero_query, tree_vecs, graph_vecs);
    let root_label = LabelStep {
        node: target.root,
        message: zero_query,
        logits,
        q,
        target: Some(target.label(target.root).unwrap()),
    };

    let mut trace = DecoderTrace {
        root_label,
        topo_steps: Vec::new(),
        label_steps: Vec::new(),
        truncated: false,
    };

    struct Walker<'a> {
        params: DecoderParams,
        feats: &'a [Var],
        tree_vecs: &'a [Var],
        graph_vecs: &'a [Var],
        target: &'a JunctionTree,
    }

    impl Walker<'_> {
        /// Returns the backtrack message toward the parent (None at root).
        fn visit(
            &self,
            tape: &mut Tape,
            trace: &mut DecoderTrace,
            node: usize,
            parent: Option<(usize, Var)>,
        ) -> Option<Var> {
            let mut inbound: Vec<Var> = parent.iter().map(|&(_, m)| m).collect();
            let children = self
                .target
                .children_in_order(node, parent.map(|(p, _)| p));
            for child in children {
                let (h_t, logit, p) = predict_topology(
                    tape,
                    &self.params,
                    self.feats[node],
                    &inbound,
                    self.tree_vecs,
                    self.graph_vecs,
                );
                trace.topo_steps.push(TopoStep {
                    node,
                    hidden: h_t,
                    logit,
                    p,
                    target: Some(1.0),
                });
                let msg = tree_gru(tape, &self.params.gru, self.feats[node], &inbound);
                let (logits, q) =
                    predict_label(tape, &self.params, msg, self.tree_vecs, self.graph_vecs);
                trace.label_steps.push(LabelStep {
                    node: child,
                    message: msg,
                    logits,
                    q,
                    target: Some(self.target.label(child).unwrap()),
                });
                let back = self
                    .visit(tape, trace, child, Some((node, msg)))
                    .expect("non-root visit returns a message");
                inbound.push(back);
            }
            // Stop decision with the full inbound set.
            let (h_t, logit, p) = predict_topology(
                tape,
                &self.params,
                self.feats[node],
                &inbound,
                self.tree_vecs,
                self.graph_vecs,
            );
            trace.topo_steps.push(TopoStep {
                node,
                hidden: h_t,
                logit,
                p,
                target: Some(0.0),
            });
            parent.map(|_| {
                // Children messages only: the parent's message is excluded.
                let children_msgs = &inbound[1..];
                tree_gru(tape, &self.params.gru, self.feats[node], children_msgs)
            })
        }
    }

    let walker = Walker {
        params,
        feats: &feats,
        tree_vecs,
        graph_vecs,
        target,
    };
    walker.visit(tape, &mut trace, target.root, None);
    trace
}

/// Free-running decode: follows its own topology and label predictions.
pub fn decode_free(
    tape: &mut Tape,
    store: &ParamStore,
    cfg: &ModelConfig,
    tree_vecs: &[Var],
    graph_vecs: &[Var],
) -> (DecodedTree, DecoderTrace) {
    let params = bind_decoder(tape, store);
    let zero_query = tape.zeros(cfg.hidden);
    let (logits, q) = predict_label(tape, &params, zero_query, tree_vecs, graph_vecs);
    let root_label_idx = argmax(tape.value(q).data()) as u32;
    let root_label = LabelStep {
        node: 0,
        message: zero_query,
        logits,
        q,
        target: None,
    };
    let mut trace = DecoderTrace {
        root_label,
        topo_steps: Vec::new(),
        label_steps: Vec::new(),
        truncated: false,
    };
    let mut tree = DecodedTree {
        labels: vec![root_label_idx],
        edges: Vec::new(),
        truncated: false,
    };

    struct Runner<'a> {
        params: DecoderParams,
        cfg: &'a ModelConfig,
        tree_vecs: &'a [Var],
        graph_vecs: &'a [Var],
    }

    impl Runner<'_> {
        fn feat(&self, tape: &mut Tape, label: u32) -> Var {
            tape.constant(Tensor::vector(label_onehot(label, self.cfg.vocab)))
        }

        fn visit(
            &self,
            tape: &mut Tape,
            trace: &mut DecoderTrace,
            tree: &mut DecodedTree,
            node: usize,
            parent_msg: Option<Var>,
        ) -> Option<Var> {
            let features = self.feat(tape, tree.labels[node]);
            let mut inbound: Vec<Var> = parent_msg.iter().copied().collect();
            loop {
                let (h_t, logit, p) = predict_topology(
                    tape,
                    &self.params,
                    features,
                    &inbound,
                    self.tree_vecs,
                    self.graph_vecs,
                );
                let expand_wanted = tape.value(p).item() > 0.5;
                trace.topo_steps.push(TopoStep {
                    node,
                    hidden: h_t,
                    logit,
                    p,
                    target: None,
                });
                if !expand_wanted {
                    break;
                }
                if tree.labels.len() >= self.cfg.max_nodes {
                    trace.truncated = true;
                    tree.truncated = true;
                    break;
                }
                let msg = tree_gru(tape, &self.params.gru, features, &inbound);
                let (logits, q) =
                    predict_label(tape, &self.params, msg, self.tree_vecs, self.graph_vecs);
                let child_label = argmax(tape.value(q).data()) as u32;
                let child = tree.labels.len();
                tree.labels.push(child_label);
                tree.edges.push((node, child));
                trace.label_steps.push(LabelStep {
                    node: child,
                    message: msg,
                    logits,
                    q,
                    target: None,
                });
                let back = self
                    .visit(tape, trace, tree, child, Some(msg))
                    .expect("non-root visit returns a message");
                inbound.push(back);
            }
            parent_msg.map(|_| {
                let children_msgs = &inbound[1..];
                tree_gru(tape, &self.params.gru, features, children_msgs)
            })
        }
    }

    let runner = Runner {
        params,
        cfg,
        tree_vecs,
        graph_vecs,
    };
    runner.visit(tape, &mut trace, &mut tree, 0, None);
    (tree, trace)
}

/// Teacher-forced reconstruction loss: topology binary cross-entropy plus
/// label cross-entropy (root included), summed over all steps.
pub fn trace_loss(tape: &mut Tape, trace: &DecoderTrace) -> Var {
    let mut terms: Vec<Var> = Vec::new();
    for step in &trace.topo_steps {
        if let Some(target) = step.target {
            // BCE(sigmoid(logit), target) = softplus(logit) - target * logit.
            let sp = tape.softplus(step.logit);
            terms.push(if target > 0.5 {
                tape.sub(sp, step.logit)
            } else {
                sp
            });
        }
    }
    let mut label_term = |tape: &mut Tape, step: &LabelStep| {
        if let Some(target) = step.target {
            let lse = tape.logsumexp(step.logits);
            let at = tape.slice(step.logits, target as usize, target as usize + 1);
            terms.push(tape.sub(lse, at));
        }
    };
    label_term(tape, &trace.root_label);
    for step in &trace.label_steps {
        label_term(tape, step);
    }
    tape.sum_vars(&terms)
}
