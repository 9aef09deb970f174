//! Reverse-mode tape. Operations append nodes; `backward` walks the tape in
//! reverse accumulating vector-Jacobian products.

use crate::store::ParamStore;
use crate::tensor::{Precision, Tensor};

/// Handle to a tape node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Leaf { param: Option<String> },
    MatVec(Var, Var),
    MatVecT(Var, Var),
    HardGate(Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Dot(Var, Var),
    Scale(Var, f64),
    AddConst(Var),
    Concat(Vec<Var>),
    Slice(Var, usize, usize),
    Sum(Var),
    Stack(Vec<Var>),
    ScaleByVar(Var, Var),
    Relu(Var),
    LeakyRelu(Var, f64),
    Tanh(Var),
    Sigmoid(Var),
    Softmax(Var),
    Log(Var),
    Exp(Var),
    Softplus(Var),
    LogSumExp(Var),
    Sqrt(Var),
    Detach,
}

struct Node {
    op: Op,
    value: Tensor,
}

/// Gradients with respect to every tape node, indexed by [`Var`].
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}

pub struct Tape {
    nodes: Vec<Node>,
    precision: Precision,
    check_finite: bool,
}

impl Tape {
    pub fn new(precision: Precision) -> Tape {
        Tape {
            nodes: Vec::new(),
            precision,
            check_finite: cfg!(debug_assertions),
        }
    }

    pub fn with_finite_checks(mut self, on: bool) -> Tape {
        self.check_finite = on;
        self
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op: Op, mut value: Tensor) -> Var {
        value.round_to(self.precision);
        if self.check_finite && !value.is_finite() {
            panic!("non-finite value produced by {:?}", op);
        }
        self.nodes.push(Node { op, value });
        Var(self.nodes.len() - 1)
    }

    // ---- leaves ----

    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(Op::Leaf { param: None }, t)
    }

    pub fn scalar(&mut self, x: f64) -> Var {
        self.constant(Tensor::scalar(x))
    }

    pub fn zeros(&mut self, n: usize) -> Var {
        self.constant(Tensor::zeros(vec![n]))
    }

    /// Binds a named parameter from the store; gradients accumulate back
    /// under this name.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Var {
        let t = store.value(name).clone();
        self.push(
            Op::Leaf {
                param: Some(name.to_string()),
            },
            t,
        )
    }

    // ---- arithmetic ----

    pub fn matvec(&mut self, w: Var, x: Var) -> Var {
        let (wt, xt) = (&self.nodes[w.0].value, &self.nodes[x.0].value);
        assert_eq!(wt.shape().len(), 2, "matvec needs a matrix");
        let (r, c) = (wt.rows(), wt.cols());
        assert_eq!(c, xt.numel(), "matvec shape mismatch: {}x{} * {}", r, c, xt.numel());
        let mut out = vec![0.0; r];
        let wd = wt.data();
        let xd = xt.data();
        for i in 0..r {
            let mut acc = 0.0;
            let row = &wd[i * c..(i + 1) * c];
            for j in 0..c {
                acc += row[j] * xd[j];
            }
            out[i] = acc;
        }
        self.push(Op::MatVec(w, x), Tensor::vector(out))
    }

    /// `W^T x` with gradients flowing to both arguments.
    pub fn matvec_t(&mut self, w: Var, x: Var) -> Var {
        let (wt, xt) = (&self.nodes[w.0].value, &self.nodes[x.0].value);
        assert_eq!(wt.shape().len(), 2, "matvec_t needs a matrix");
        let (r, c) = (wt.rows(), wt.cols());
        assert_eq!(r, xt.numel(), "matvec_t shape mismatch");
        let wd = wt.data();
        let xd = xt.data();
        let mut out = vec![0.0; c];
        for i in 0..r {
            let xi = xd[i];
            for (j, slot) in out.iter_mut().enumerate() {
                *slot += wd[i * c + j] * xi;
            }
        }
        self.push(Op::MatVecT(w, x), Tensor::vector(out))
    }

    /// Straight-through gate: forward `1 if x > 0.5 else 0` exactly, backward
    /// unit slope (hard-sigmoid surrogate on [0, 1]).
    pub fn hard_gate(&mut self, a: Var) -> Var {
        let out = self.map(a, |x| if x > 0.5 { 1.0 } else { 0.0 });
        self.push(Op::HardGate(a), out)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip(a, b, |x, y| x + y);
        self.push(Op::Add(a, b), out)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip(a, b, |x, y| x - y);
        self.push(Op::Sub(a, b), out)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let out = self.zip(a, b, |x, y| x * y);
        self.push(Op::Mul(a, b), out)
    }

    pub fn dot(&mut self, a: Var, b: Var) -> Var {
        let (at, bt) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(at.numel(), bt.numel(), "dot shape mismatch");
        let v = at
            .data()
            .iter()
            .zip(bt.data())
            .map(|(x, y)| x * y)
            .sum();
        self.push(Op::Dot(a, b), Tensor::scalar(v))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Var {
        let out = self.map(a, |x| c * x);
        self.push(Op::Scale(a, c), out)
    }

    pub fn add_const(&mut self, a: Var, c: f64) -> Var {
        let out = self.map(a, |x| x + c);
        self.push(Op::AddConst(a), out)
    }

    pub fn neg(&mut self, a: Var) -> Var {
        self.scale(a, -1.0)
    }

    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let mut data = Vec::new();
        for &p in parts {
            data.extend_from_slice(self.nodes[p.0].value.data());
        }
        self.push(Op::Concat(parts.to_vec()), Tensor::vector(data))
    }

    pub fn slice(&mut self, a: Var, from: usize, to: usize) -> Var {
        let t = &self.nodes[a.0].value;
        assert!(from < to && to <= t.numel(), "slice out of range");
        let data = t.data()[from..to].to_vec();
        self.push(Op::Slice(a, from, to), Tensor::vector(data))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let v = self.nodes[a.0].value.data().iter().sum();
        self.push(Op::Sum(a), Tensor::scalar(v))
    }

    /// Stacks scalar vars into one vector.
    pub fn stack(&mut self, parts: &[Var]) -> Var {
        let data: Vec<f64> = parts
            .iter()
            .map(|&p| self.nodes[p.0].value.item())
            .collect();
        self.push(Op::Stack(parts.to_vec()), Tensor::vector(data))
    }

    /// Scalar `s` times vector `v`.
    pub fn scale_by(&mut self, s: Var, v: Var) -> Var {
        let sv = self.nodes[s.0].value.item();
        let out = self.map(v, |x| sv * x);
        self.push(Op::ScaleByVar(s, v), out)
    }

    /// Sums a non-empty list of same-shaped vars pairwise in order.
    pub fn sum_vars(&mut self, vars: &[Var]) -> Var {
        let mut acc = vars[0];
        for &v in &vars[1..] {
            acc = self.add(acc, v);
        }
        acc
    }

    // ---- nonlinearities ----

    pub fn relu(&mut self, a: Var) -> Var {
        let out = self.map(a, |x| if x > 0.0 { x } else { 0.0 });
        self.push(Op::Relu(a), out)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Var {
        let out = self.map(a, |x| if x > 0.0 { x } else { slope * x });
        self.push(Op::LeakyRelu(a, slope), out)
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let out = self.map(a, f64::tanh);
        self.push(Op::Tanh(a), out)
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let out = self.map(a, |x| 1.0 / (1.0 + (-x).exp()));
        self.push(Op::Sigmoid(a), out)
    }

    pub fn softmax(&mut self, a: Var) -> Var {
        let t = &self.nodes[a.0].value;
        let m = t.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let exps: Vec<f64> = t.data().iter().map(|&x| (x - m).exp()).collect();
        let z: f64 = exps.iter().sum();
        let out = Tensor::vector(exps.into_iter().map(|e| e / z).collect());
        self.push(Op::Softmax(a), out)
    }

    pub fn log(&mut self, a: Var) -> Var {
        let out = self.map(a, f64::ln);
        self.push(Op::Log(a), out)
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let out = self.map(a, f64::exp);
        self.push(Op::Exp(a), out)
    }

    /// Numerically stable log(1 + exp(x)).
    pub fn softplus(&mut self, a: Var) -> Var {
        let out = self.map(a, |x| x.max(0.0) + (-x.abs()).exp().ln_1p());
        self.push(Op::Softplus(a), out)
    }

    /// Numerically stable log-sum-exp over a vector, yielding a scalar.
    pub fn logsumexp(&mut self, a: Var) -> Var {
        let t = &self.nodes[a.0].value;
        let m = t.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let s: f64 = t.data().iter().map(|&x| (x - m).exp()).sum();
        self.push(Op::LogSumExp(a), Tensor::scalar(m + s.ln()))
    }

    pub fn sqrt(&mut self, a: Var) -> Var {
        let out = self.map(a, f64::sqrt);
        self.push(Op::Sqrt(a), out)
    }

    /// Forwards the value, blocks the gradient.
    pub fn detach(&mut self, a: Var) -> Var {
        let t = self.nodes[a.0].value.clone();
        self.push(Op::Detach, t)
    }

    fn map(&self, a: Var, f: impl Fn(f64) -> f64) -> Tensor {
        let t = &self.nodes[a.0].value;
        Tensor::new(t.shape().to_vec(), t.data().iter().map(|&x| f(x)).collect())
    }

    fn zip(&self, a: Var, b: Var, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let (at, bt) = (&self.nodes[a.0].value, &self.nodes[b.0].value);
        assert_eq!(
            at.shape(),
            bt.shape(),
            "elementwise shape mismatch: {:?} vs {:?}",
            at.shape(),
            bt.shape()
        );
        Tensor::new(
            at.shape().to_vec(),
            at.data()
                .iter()
                .zip(bt.data())
                .map(|(&x, &y)| f(x, y))
                .collect(),
        )
    }

    // ---- backward ----

    /// Reverse pass from a scalar loss. Returns gradients for every node.
    pub fn backward(&self, loss: Var) -> Gradients {
        assert_eq!(
            self.nodes[loss.0].value.numel(),
            1,
            "backward needs a scalar loss"
        );
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::scalar(1.0));
        for id in (0..=loss.0).rev() {
            let g = match grads[id].take() {
                Some(g) => g,
                None => continue,
            };
            self.propagate(id, &g, &mut grads);
            grads[id] = Some(g);
        }
        Gradients { grads }
    }

    fn accum(&self, grads: &mut [Option<Tensor>], v: Var, delta: Tensor) {
        match &mut grads[v.0] {
            Some(t) => {
                for (x, d) in t.data_mut().iter_mut().zip(delta.data()) {
                    *x += d;
                }
            }
            None => grads[v.0] = Some(delta),
        }
    }

    fn propagate(&self, id: usize, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let node = &self.nodes[id];
        let y = &node.value;
        match &node.op {
            Op::Leaf { .. } | Op::Detach => {}
            Op::MatVec(w, x) => {
                let wt = &self.nodes[w.0].value;
                let xt = &self.nodes[x.0].value;
                let (r, c) = (wt.rows(), wt.cols());
                let mut dw = vec![0.0; r * c];
                for i in 0..r {
                    let gi = g.data()[i];
                    for j in 0..c {
                        dw[i * c + j] = gi * xt.data()[j];
                    }
                }
                self.accum(grads, *w, Tensor::matrix(r, c, dw));
                let mut dx = vec![0.0; c];
                for (j, slot) in dx.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for i in 0..r {
                        acc += wt.data()[i * c + j] * g.data()[i];
                    }
                    *slot = acc;
                }
                self.accum(grads, *x, Tensor::vector(dx));
            }
            Op::MatVecT(w, x) => {
                let wt = &self.nodes[w.0].value;
                let xt = &self.nodes[x.0].value;
                let (r, c) = (wt.rows(), wt.cols());
                let mut dw = vec![0.0; r * c];
                for i in 0..r {
                    let xi = xt.data()[i];
                    for j in 0..c {
                        dw[i * c + j] = xi * g.data()[j];
                    }
                }
                self.accum(grads, *w, Tensor::matrix(r, c, dw));
                let mut dx = vec![0.0; r];
                for (i, slot) in dx.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for j in 0..c {
                        acc += wt.data()[i * c + j] * g.data()[j];
                    }
                    *slot = acc;
                }
                self.accum(grads, *x, Tensor::vector(dx));
            }
            Op::HardGate(a) => {
                self.accum(grads, *a, g.clone());
            }
            Op::Add(a, b) => {
                self.accum(grads, *a, g.clone());
                self.accum(grads, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accum(grads, *a, g.clone());
                let neg = Tensor::new(
                    g.shape().to_vec(),
                    g.data().iter().map(|x| -x).collect(),
                );
                self.accum(grads, *b, neg);
            }
            Op::Mul(a, b) => {
                let bt = &self.nodes[b.0].value;
                let at = &self.nodes[a.0].value;
                let da = Tensor::new(
                    g.shape().to_vec(),
                    g.data().iter().zip(bt.data()).map(|(x, y)| x * y).collect(),
                );
                let db = Tensor::new(
                    g.shape().to_vec(),
                    g.data().iter().zip(at.data()).map(|(x, y)| x * y).collect(),
                );
                self.accum(grads, *a, da);
                self.accum(grads, *b, db);
            }
            Op::Dot(a, b) => {
                let gs = g.item();
                let at = &self.nodes[a.0].value;
                let bt = &self.nodes[b.0].value;
                let da = Tensor::new(
                    at.shape().to_vec(),
                    bt.data().iter().map(|y| gs * y).collect(),
                );
                let db = Tensor::new(
                    bt.shape().to_vec(),
                    at.data().iter().map(|x| gs * x).collect(),
                );
                self.accum(grads, *a, da);
                self.accum(grads, *b, db);
            }
            Op::Scale(a, c) => {
                let da = Tensor::new(
                    g.shape().to_vec(),
                    g.data().iter().map(|x| c * x).collect(),
                );
                self.accum(grads, *a, da);
            }
            Op::AddConst(a) => self.accum(grads, *a, g.clone()),
            Op::Concat(parts) => {
                let mut off = 0;
                for &p in parts {
                    let n = self.nodes[p.0].value.numel();
                    let shape = self.nodes[p.0].value.shape().to_vec();
                    let part =
                        Tensor::new(shape, g.data()[off..off + n].to_vec());
                    self.accum(grads, p, part);
                    off += n;
                }
            }
            Op::Slice(a, from, to) => {
                let n = self.nodes[a.0].value.numel();
                let mut da = vec![0.0; n];
                da[*from..*to].copy_from_slice(g.data());
                self.accum(grads, *a, Tensor::vector(da));
            }
            Op::Sum(a) => {
                let n = self.nodes[a.0].value.numel();
                let shape = self.nodes[a.0].value.shape().to_vec();
                self.accum(
                    grads,
                    *a,
                    Tensor::new(shape, vec![g.item(); n]),
                );
            }
            Op::Stack(parts) => {
                for (i, &p) in parts.iter().enumerate() {
                    self.accum(grads, p, Tensor::scalar(g.data()[i]));
                }
            }
            Op::ScaleByVar(s, v) => {
                let sv = self.nodes[s.0].value.item();
                let vt = &self.nodes[v.0].value;
                let ds: f64 = g.data().iter().zip(vt.data()).map(|(x, y)| x * y).sum();
                self.accum(grads, *s, Tensor::scalar(ds));
                let dv = Tensor::new(
                    vt.shape().to_vec(),
                    g.data().iter().map(|x| sv * x).collect(),
                );
                self.accum(grads, *v, dv);
            }
            Op::Relu(a) => {
                let xt = &self.nodes[a.0].value;
                let da = Tensor::new(
                    g.shape().to_vec(),
                    g.data()
                        .iter()
                        .zip(xt.data())
                        .map(|(gx, &x)| if x > 0.0 { *gx } else { 0.0 })
                        .collect(),
                );
                self.accum(grads, *a, da);
            }
            Op::LeakyRelu(a, slope) => {
                let xt = &self.nodes[a.0].value;
                let da = Tensor::new(
                    g.shape().to_vec(),
                    g.data()
                        .iter()
                        .zip(xt.data())
                        .map(|(gx, &x)| if x > 0.0 { *gx } else { slope * gx })
                        .collect(),
                );
                self.accum(grads, *a, da);
            }
            Op::Tanh(a) => {
                let da = Tensor::new(
                    g.shape().to_vec(),
                    g.data()
                        .iter()
                        .zip(y.data())
                        .map(|(gx, &t)| gx * (1.0 - t * t))
                        .collect(),
                );
                self.accum(grads, *a, da);
            }
            Op::Sigmoid(a) => {
                let da = Tensor::new(
                    g.shape().to_vec(),
                    g.data()
                        .iter()
                        .zip(y.data())
                        .map(|(gx, &s)| gx * s * (1.0 - s))
                        .collect(),
                );
                self.accum(grads, *a, da);
            }
            Op::Softmax(a) => {
                let dot: f64 = g.data().iter().zip(y.data()).map(|(gx, yx)| gx * yx).sum();
                let da = Tensor::new(
                    g.shape().to_vec(),
                    g.data()
                        .iter()
                        .zip(y.data())
                        .map(|(gx, yx)| yx * (gx - dot))
                        .collect(),
                );
                self.accum(grads, *a, da);
            }
            Op::Log(a) => {
                let xt = &self.nodes[a.0].value;
                let da = Tensor::new(
                    g.shape().to_vec(),
                    g.data()
                        .iter()
                        .zip(xt.data())
                        .map(|(gx, x)| gx / x)
                        .collect(),
                );
                self.accum(grads, *a, da);
            }
            Op::Exp(a) => {
                let da = Tensor::new(
                    g.shape().to_vec(),
                    g.data()
                        .iter()
                        .zip(y.data())
                        .map(|(gx, yx)| gx * yx)
                        .collect(),
                );
                self.accum(grads, *a, da);
            }
            Op::Softplus(a) => {
                let xt = &self.nodes[a.0].value;
                let da = Tensor::new(
                    g.shape().to_vec(),
                    g.data()
                        .iter()
                        .zip(xt.data())
                        .map(|(gx, &x)| gx / (1.0 + (-x).exp()))
                        .collect(),
                );
                self.accum(grads, *a, da);
            }
            Op::LogSumExp(a) => {
                let xt = &self.nodes[a.0].value;
                let m = xt.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let exps: Vec<f64> = xt.data().iter().map(|&x| (x - m).exp()).collect();
                let z: f64 = exps.iter().sum();
                let gs = g.item();
                let da = Tensor::new(
                    xt.shape().to_vec(),
                    exps.into_iter().map(|e| gs * e / z).collect(),
                );
                self.accum(grads, *a, da);
            }
            Op::Sqrt(a) => {
                let da = Tensor::new(
                    g.shape().to_vec(),
                    g.data()
                        .iter()
                        .zip(y.data())
                        .map(|(gx, yx)| gx / (2.0 * yx))
                        .collect(),
                );
                self.accum(grads, *a, da);
            }
        }
    }

    /// Adds `scale * grad` into the store for every bound parameter.
    pub fn accumulate_param_grads(&self, grads: &Gradients, store: &mut ParamStore, scale: f64) {
        for (id, node) in self.nodes.iter().enumerate() {
            if let Op::Leaf { param: Some(name) } = &node.op {
                if let Some(g) = &grads.grads[id] {
                    store.accumulate_grad(name, g, scale);
                }
            }
        }
    }
}
