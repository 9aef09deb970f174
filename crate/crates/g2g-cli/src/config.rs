//! Flat `key = value` run configuration. Every key has a default; unknown
//! keys are rejected; command-line flags override file values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

/// All tunables for training, translation and evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub epochs: u32,
    pub lr: f64,
    pub batch_size: usize,
    pub latent_dim: usize,
    pub hidden_dim: usize,
    /// None means the default 1 / latent_dim.
    pub kl_weight: Option<f64>,
    pub seed: u64,
    pub k: usize,
    pub gan_weight: f64,
    pub disc_iters: usize,
    pub gp_weight: f64,
    /// Epoch index at which adversarial rounds start; at or beyond `epochs`
    /// the adversary is disabled.
    pub gan_start_epoch: u32,
    pub vocab: PathBuf,
    pub pairs: PathBuf,
    pub checkpoint_dir: PathBuf,
    pub report: PathBuf,
}

impl Default for RunConfig {
    fn default() -> RunConfig {
        RunConfig {
            epochs: 20,
            lr: 0.001,
            batch_size: 32,
            latent_dim: 8,
            hidden_dim: 300,
            kl_weight: None,
            seed: 0,
            k: 20,
            gan_weight: 1.0,
            disc_iters: 5,
            gp_weight: 10.0,
            gan_start_epoch: u32::MAX,
            vocab: "vocab.txt".into(),
            pairs: "pairs.tsv".into(),
            checkpoint_dir: "checkpoints".into(),
            report: "report.tsv".into(),
        }
    }
}

impl RunConfig {
    pub fn effective_kl_weight(&self) -> f64 {
        self.kl_weight
            .unwrap_or(1.0 / self.latent_dim as f64)
    }

    /// Parses `key = value` lines; `#` starts a comment and blank lines are
    /// skipped. Unknown keys are errors.
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        let mut cfg = RunConfig::default();
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected key = value", ln + 1))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| format!("line {}: {}", ln + 1, e))?;
        }
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
            v.parse()
                .map_err(|_| format!("bad value '{}' for key '{}'", v, key))
        }
        match key {
            "epochs" => self.epochs = num(key, value)?,
            "lr" => self.lr = num(key, value)?,
            "batch_size" => self.batch_size = num(key, value)?,
            "latent_dim" => self.latent_dim = num(key, value)?,
            "hidden_dim" => self.hidden_dim = num(key, value)?,
            "kl_weight" => self.kl_weight = Some(num(key, value)?),
            "seed" => self.seed = num(key, value)?,
            "K" => self.k = num(key, value)?,
            "gan_weight" => self.gan_weight = num(key, value)?,
            "disc_iters" => self.disc_iters = num(key, value)?,
            "gp_weight" => self.gp_weight = num(key, value)?,
            "gan_start_epoch" => self.gan_start_epoch = num(key, value)?,
            "vocab" => self.vocab = value.into(),
            "pairs" => self.pairs = value.into(),
            "checkpoint_dir" => self.checkpoint_dir = value.into(),
            "report" => self.report = value.into(),
            other => return Err(format!("unknown config key '{}'", other)),
        }
        Ok(())
    }

    /// Serializes the effective configuration; parsing it back reproduces
    /// this config exactly.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "lr = {}", self.lr);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "latent_dim = {}", self.latent_dim);
        let _ = writeln!(s, "hidden_dim = {}", self.hidden_dim);
        let _ = writeln!(s, "kl_weight = {}", self.effective_kl_weight());
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "K = {}", self.k);
        let _ = writeln!(s, "gan_weight = {}", self.gan_weight);
        let _ = writeln!(s, "disc_iters = {}", self.disc_iters);
        let _ = writeln!(s, "gp_weight = {}", self.gp_weight);
        let _ = writeln!(s, "gan_start_epoch = {}", self.gan_start_epoch);
        let _ = writeln!(s, "vocab = {}", self.vocab.display());
        let _ = writeln!(s, "pairs = {}", self.pairs.display());
        let _ = writeln!(s, "checkpoint_dir = {}", self.checkpoint_dir.display());
        let _ = writeln!(s, "report = {}", self.report.display());
        s
    }

    /// Applies `key=value` overrides (from command-line flags).
    pub fn apply_overrides(&mut self, overrides: &BTreeMap<String, String>) -> Result<(), String> {
        for (k, v) in overrides {
            self.set(k, v)?;
        }
        Ok(())
    }
}
