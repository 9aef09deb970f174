//! Named parameter store with Adam state.

use std::collections::BTreeMap;

use rand::Rng;

use crate::tensor::{Precision, Tensor};

/// One learnable parameter with its gradient slot and Adam moments.
#[derive(Debug, Clone)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    pub m1: Tensor,
    pub m2: Tensor,
    /// Update count for this parameter (Adam bias correction).
    pub steps: u64,
}

impl Param {
    fn new(value: Tensor) -> Param {
        let shape = value.shape().to_vec();
        Param {
            value,
            grad: Tensor::zeros(shape.clone()),
            m1: Tensor::zeros(shape.clone()),
            m2: Tensor::zeros(shape),
            steps: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> AdamConfig {
        AdamConfig {
            lr: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Deterministically-ordered map from parameter path to [`Param`].
#[derive(Debug, Clone)]
pub struct ParamStore {
    params: BTreeMap<String, Param>,
    precision: Precision,
    pub epoch: u32,
}

impl ParamStore {
    pub fn new(precision: Precision) -> ParamStore {
        ParamStore {
            params: BTreeMap::new(),
            precision,
            epoch: 0,
        }
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    /// Glorot-uniform matrix.
    pub fn register_matrix(&mut self, name: &str, rows: usize, cols: usize, rng: &mut impl Rng) {
        let limit = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| self.precision.adjust(rng.gen_range(-limit..limit)))
            .collect();
        self.insert(name, Tensor::matrix(rows, cols, data));
    }

    /// Glorot-uniform vector treated as a 1 x n map (scoring vectors).
    pub fn register_vector(&mut self, name: &str, len: usize, rng: &mut impl Rng) {
        let limit = (6.0 / (len + 1) as f64).sqrt();
        let data = (0..len)
            .map(|_| self.precision.adjust(rng.gen_range(-limit..limit)))
            .collect();
        self.insert(name, Tensor::vector(data));
    }

    /// Zero-initialized bias.
    pub fn register_bias(&mut self, name: &str, len: usize) {
        self.insert(name, Tensor::zeros(vec![len]));
    }

    fn insert(&mut self, name: &str, value: Tensor) {
        let prior = self.params.insert(name.to_string(), Param::new(value));
        assert!(prior.is_none(), "parameter '{}' registered twice", name);
    }

    pub fn insert_raw(&mut self, name: &str, param: Param) {
        self.params.insert(name.to_string(), param);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn value(&self, name: &str) -> &Tensor {
        &self
            .params
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter '{}'", name))
            .value
    }

    pub fn param(&self, name: &str) -> &Param {
        self.params
            .get(name)
            .unwrap_or_else(|| panic!("unknown parameter '{}'", name))
    }

    pub fn param_mut(&mut self, name: &str) -> &mut Param {
        self.params
            .get_mut(name)
            .unwrap_or_else(|| panic!("unknown parameter '{}'", name))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Param)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.params.values().map(|p| p.value.numel()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in self.params.values_mut() {
            for g in p.grad.data_mut() {
                *g = 0.0;
            }
        }
    }

    pub fn accumulate_grad(&mut self, name: &str, grad: &Tensor, scale: f64) {
        let p = self.param_mut(name);
        assert_eq!(
            p.grad.shape(),
            grad.shape(),
            "gradient shape mismatch for '{}'",
            name
        );
        for (slot, g) in p.grad.data_mut().iter_mut().zip(grad.data()) {
            *slot += scale * g;
        }
    }

    /// One Adam update over parameters selected by `filter`. Unselected
    /// parameters and their moments are untouched.
    pub fn adam_step(&mut self, cfg: &AdamConfig, filter: impl Fn(&str) -> bool) {
        let precision = self.precision;
        for (name, p) in self.params.iter_mut() {
            if !filter(name) {
                continue;
            }
            p.steps += 1;
            let t = p.steps as i32;
            let bc1 = 1.0 - cfg.beta1.powi(t);
            let bc2 = 1.0 - cfg.beta2.powi(t);
            for i in 0..p.value.numel() {
                let g = p.grad.data()[i];
                let m = cfg.beta1 * p.m1.data()[i] + (1.0 - cfg.beta1) * g;
                let v = cfg.beta2 * p.m2.data()[i] + (1.0 - cfg.beta2) * g * g;
                p.m1.data_mut()[i] = precision.adjust(m);
                p.m2.data_mut()[i] = precision.adjust(v);
                let update = cfg.lr * (m / bc1) / ((v / bc2).sqrt() + cfg.eps);
                p.value.data_mut()[i] = precision.adjust(p.value.data()[i] - update);
            }
        }
    }

    pub fn adam_step_all(&mut self, cfg: &AdamConfig) {
        self.adam_step(cfg, |_| true);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_gradient_leaves_parameters_unchanged() {
        let mut store = ParamStore::new(Precision::Double);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        store.register_matrix("w", 2, 2, &mut rng);
        let before = store.value("w").clone();
        store.adam_step_all(&AdamConfig::default());
        assert_eq!(store.value("w"), &before);
    }

    #[test]
    fn single_step_matches_closed_form() {
        // One step with g = 1 from zero moments: delta = -lr / (1 + eps).
        let mut store = ParamStore::new(Precision::Double);
        store.register_bias("b", 1);
        store.accumulate_grad("b", &Tensor::vector(vec![1.0]), 1.0);
        let cfg = AdamConfig::default();
        store.adam_step_all(&cfg);
        let expected = -cfg.lr / (1.0 + cfg.eps);
        let got = store.value("b").data()[0];
        assert!((got - expected).abs() < 1e-12, "{} vs {}", got, expected);
    }

    #[test]
    fn lr_anneal_schedule() {
        // 0.001 * 0.9^3 after three epoch boundaries.
        let mut lr: f64 = 0.001;
        for _ in 0..3 {
            lr *= 0.9;
        }
        assert!((lr - 0.000729).abs() < 1e-12);
    }

    #[test]
    fn filtered_step_leaves_others_untouched() {
        let mut store = ParamStore::new(Precision::Double);
        store.register_bias("disc.w", 1);
        store.register_bias("enc.w", 1);
        store.accumulate_grad("disc.w", &Tensor::vector(vec![1.0]), 1.0);
        store.accumulate_grad("enc.w", &Tensor::vector(vec![1.0]), 1.0);
        store.adam_step(&AdamConfig::default(), |n| n.starts_with("disc."));
        assert!(store.value("disc.w").data()[0] != 0.0);
        assert_eq!(store.value("enc.w").data()[0], 0.0);
        assert_eq!(store.param("enc.w").steps, 0);
    }

    #[test]
    fn glorot_matrices_deterministic_given_seed() {
        let mk = || {
            let mut store = ParamStore::new(Precision::Single);
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            store.register_matrix("w", 3, 4, &mut rng);
            store.value("w").clone()
        };
        assert_eq!(mk(), mk());
    }
}
