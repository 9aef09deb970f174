//! Layer primitives shared by the encoder and decoders: the tree GRU message
//! update and bilinear attention over source vectors.

use crate::tape::{Tape, Var};

/// Weights of the tree GRU: update gate (wz/uz/bz), reset gate (wr/ur/br)
/// and candidate state (w/u/b).
#[derive(Debug, Clone, Copy)]
pub struct TreeGruParams {
    pub wz: Var,
    pub uz: Var,
    pub bz: Var,
    pub wr: Var,
    pub ur: Var,
    pub br: Var,
    pub w: Var,
    pub u: Var,
    pub b: Var,
}

/// Tree GRU over a feature vector and a set of inbound messages:
///
///   s    = sum_k h_k
///   z    = sigmoid(Wz f + Uz s + bz)
///   r_k  = sigmoid(Wr f + Ur h_k + br)
///   h~   = tanh(W f + U sum_k (r_k * h_k) + b)
///   out  = (1 - z) * s + z * h~
///
/// Sums over the inbound set vanish when it is empty.
pub fn tree_gru(tape: &mut Tape, p: &TreeGruParams, features: Var, inbound: &[Var]) -> Var {
    let hidden = tape.value(p.bz).numel();
    let s = if inbound.is_empty() {
        tape.zeros(hidden)
    } else {
        tape.sum_vars(inbound)
    };

    let wzf = tape.matvec(p.wz, features);
    let uzs = tape.matvec(p.uz, s);
    let z_pre = tape.sum_vars(&[wzf, uzs, p.bz]);
    let z = tape.sigmoid(z_pre);

    let gated = if inbound.is_empty() {
        tape.zeros(hidden)
    } else {
        let wrf = tape.matvec(p.wr, features);
        let mut acc: Option<Var> = None;
        for &h in inbound {
            let urh = tape.matvec(p.ur, h);
            let r_pre = tape.sum_vars(&[wrf, urh, p.br]);
            let r = tape.sigmoid(r_pre);
            let rh = tape.mul(r, h);
            acc = Some(match acc {
                Some(a) => tape.add(a, rh),
                None => rh,
            });
        }
        acc.unwrap()
    };

    let wf = tape.matvec(p.w, features);
    let ug = tape.matvec(p.u, gated);
    let cand_pre = tape.sum_vars(&[wf, ug, p.b]);
    let cand = tape.tanh(cand_pre);

    let one = tape.constant(crate::tensor::Tensor::new(vec![hidden], vec![1.0; hidden]));
    let one_minus_z = tape.sub(one, z);
    let keep = tape.mul(one_minus_z, s);
    let update = tape.mul(z, cand);
    tape.add(keep, update)
}

/// Bilinear attention weights: one matrix for the tree side, one for the
/// graph side.
#[derive(Debug, Clone, Copy)]
pub struct AttentionParams {
    pub a_tree: Var,
    pub a_graph: Var,
}

/// Scores each source vector by `query^T A x`, softmax-normalizes per side,
/// and returns the concatenated [tree context, graph context] together with
/// both attention distributions.
pub fn bilinear_attention(
    tape: &mut Tape,
    p: &AttentionParams,
    query: Var,
    tree_vecs: &[Var],
    graph_vecs: &[Var],
) -> (Var, Var, Var) {
    assert!(
        !tree_vecs.is_empty() && !graph_vecs.is_empty(),
        "attention needs non-empty source sets"
    );
    let (ctx_t, alpha_t) = attend_side(tape, p.a_tree, query, tree_vecs);
    let (ctx_g, alpha_g) = attend_side(tape, p.a_graph, query, graph_vecs);
    let ctx = tape.concat(&[ctx_t, ctx_g]);
    (ctx, alpha_t, alpha_g)
}

fn attend_side(tape: &mut Tape, a: Var, query: Var, vecs: &[Var]) -> (Var, Var) {
    let scores: Vec<Var> = vecs
        .iter()
        .map(|&x| {
            let ax = tape.matvec(a, x);
            tape.dot(query, ax)
        })
        .collect();
    let stacked = tape.stack(&scores);
    let alpha = tape.softmax(stacked);
    let mut ctx: Option<Var> = None;
    for (i, &x) in vecs.iter().enumerate() {
        let ai = tape.slice(alpha, i, i + 1);
        let weighted = tape.scale_by(ai, x);
        ctx = Some(match ctx {
            Some(c) => tape.add(c, weighted),
            None => weighted,
        });
    }
    (ctx.unwrap(), alpha)
}
