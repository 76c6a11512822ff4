use std::fmt::Write as _;
use std::path::PathBuf;
use std::str::FromStr;

use crate::cipher::{check_divisible, derive_key, PermutationKey, SplitMix64};
use crate::error::{Error, Result};
use crate::imaging::SynthKind;
use crate::net::DEFAULT_NOISE_STDDEV;
use crate::optim::{AdamConfig, LossConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KeyPolicy {
    /// One key for every pair.
    Fixed,
    /// A different key per pair, derived from the base seed and pair index.
    PerPair,
}

impl FromStr for KeyPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fixed" => Ok(Self::Fixed),
            "per_pair" => Ok(Self::PerPair),
            other => Err(Error::invalid("key_policy", format!("`{other}` (expected fixed|per_pair)"))),
        }
    }
}

impl KeyPolicy {
    fn as_str(self) -> &'static str {
        match self {
            Self::Fixed => "fixed",
            Self::PerPair => "per_pair",
        }
    }
}

/// Everything that determines a training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub beta: f64,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    pub image_size: usize,
    pub grid_side: usize,
    pub key_seed: u64,
    pub key_policy: KeyPolicy,
    pub dataset_seed: u64,
    /// Number of (cover, secret) pairs; the last fifth is held out.
    pub dataset_pairs: usize,
    pub dataset_kind: SynthKind,
    /// Directory of PPM files to use instead of synthetic images.
    pub dataset_dir: Option<PathBuf>,
    pub rng_seed: u64,
    pub noise_stddev: f64,
    /// Write a checkpoint every this many epochs (0 = only the final one).
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            beta: 1.0,
            adam: AdamConfig::default(),
            epochs: 300,
            batch_size: 8,
            image_size: 32,
            grid_side: 8,
            key_seed: 42,
            key_policy: KeyPolicy::Fixed,
            dataset_seed: 1,
            dataset_pairs: 80,
            dataset_kind: SynthKind::Mixed,
            dataset_dir: None,
            rng_seed: 7,
            noise_stddev: DEFAULT_NOISE_STDDEV,
            checkpoint_every: 0,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        LossConfig::new(self.beta)?;
        self.adam.validate()?;
        if self.epochs == 0 {
            return Err(Error::invalid("epochs", "must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size", "must be >= 1"));
        }
        if self.dataset_pairs == 0 {
            return Err(Error::invalid("dataset_pairs", "must be >= 1"));
        }
        if self.image_size == 0 {
            return Err(Error::invalid("image_size", "must be >= 1"));
        }
        check_divisible(self.image_size, self.image_size, self.grid_side)?;
        if !self.noise_stddev.is_finite() || self.noise_stddev < 0.0 {
            return Err(Error::invalid("noise_stddev", "must be finite and >= 0"));
        }
        if self.checkpoint_every > 0 && self.checkpoint_dir.is_none() {
            return Err(Error::invalid("checkpoint_dir", "required when checkpoint_every > 0"));
        }
        Ok(())
    }

    /// Pairs used for evaluation: the last fifth, or all pairs when that
    /// would be empty.
    pub fn split(&self) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let held = self.dataset_pairs / 5;
        let train = self.dataset_pairs - held;
        if held == 0 {
            (0..train, 0..train)
        } else {
            (0..train, train..self.dataset_pairs)
        }
    }

    /// Cipher key of pair `index` under the configured policy.
    pub fn key_for_pair(&self, index: usize) -> Result<PermutationKey> {
        let seed = match self.key_policy {
            KeyPolicy::Fixed => self.key_seed,
            KeyPolicy::PerPair => SplitMix64::new(self.key_seed ^ index as u64).next_u64(),
        };
        derive_key(seed, self.grid_side)
    }

    /// Parses `key = value` lines. Blank lines and `#` comments are ignored;
    /// unspecified keys keep their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut offset = 0;
        for line in text.split_inclusive('\n') {
            let at = offset;
            offset += line.len();
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| Error::format("config", at, format!("expected `key = value`, got `{content}`")))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| Error::format("config", at, e.to_string()))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: FromStr>(key: &'static str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::invalid(key, format!("cannot parse `{v}`")))
        }
        match key {
            "beta" => self.beta = num("beta", value)?,
            "learning_rate" => self.adam.learning_rate = num("learning_rate", value)?,
            "beta1" => self.adam.beta1 = num("beta1", value)?,
            "beta2" => self.adam.beta2 = num("beta2", value)?,
            "epsilon" => self.adam.epsilon = num("epsilon", value)?,
            "epochs" => self.epochs = num("epochs", value)?,
            "batch_size" => self.batch_size = num("batch_size", value)?,
            "image_size" => self.image_size = num("image_size", value)?,
            "grid_side" => self.grid_side = num("grid_side", value)?,
            "key_seed" => self.key_seed = num("key_seed", value)?,
            "key_policy" => self.key_policy = value.parse()?,
            "dataset_seed" => self.dataset_seed = num("dataset_seed", value)?,
            "dataset_pairs" => self.dataset_pairs = num("dataset_pairs", value)?,
            "dataset_kind" => self.dataset_kind = value.parse()?,
            "dataset_dir" => self.dataset_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            "rng_seed" => self.rng_seed = num("rng_seed", value)?,
            "noise_stddev" => self.noise_stddev = num("noise_stddev", value)?,
            "checkpoint_every" => self.checkpoint_every = num("checkpoint_every", value)?,
            "checkpoint_dir" => self.checkpoint_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            other => return Err(Error::invalid("config", format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Inverse of [`TrainConfig::parse`].
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.display().to_string()).unwrap_or_default();
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "learning_rate = {}", self.adam.learning_rate);
        let _ = writeln!(s, "beta1 = {}", self.adam.beta1);
        let _ = writeln!(s, "beta2 = {}", self.adam.beta2);
        let _ = writeln!(s, "epsilon = {}", self.adam.epsilon);
        let _ = writeln!(s, "epochs = {}", self.epochs);
        let _ = writeln!(s, "batch_size = {}", self.batch_size);
        let _ = writeln!(s, "image_size = {}", self.image_size);
        let _ = writeln!(s, "grid_side = {}", self.grid_side);
        let _ = writeln!(s, "key_seed = {}", self.key_seed);
        let _ = writeln!(s, "key_policy = {}", self.key_policy.as_str());
        let _ = writeln!(s, "dataset_seed = {}", self.dataset_seed);
        let _ = writeln!(s, "dataset_pairs = {}", self.dataset_pairs);
        let _ = writeln!(s, "dataset_kind = {}", self.dataset_kind);
        let _ = writeln!(s, "dataset_dir = {}", path(&self.dataset_dir));
        let _ = writeln!(s, "rng_seed = {}", self.rng_seed);
        let _ = writeln!(s, "noise_stddev = {}", self.noise_stddev);
        let _ = writeln!(s, "checkpoint_every = {}", self.checkpoint_every);
        let _ = writeln!(s, "checkpoint_dir = {}", path(&self.checkpoint_dir));
        s
    }
}
