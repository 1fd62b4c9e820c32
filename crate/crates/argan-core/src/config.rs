//! Hyperparameter bundle and its `key = value` file format.
//!
//! Unknown keys are rejected; omitted keys keep their defaults. Lines that
//! are blank or start with '#' are ignored.

use crate::error::{ArganError, Result};
use std::path::Path;

#[derive(Clone, Debug, PartialEq)]
pub struct ArganConfig {
    /// Progressive steps in the generator.
    pub n: usize,
    /// Supervised weight in the semi-supervised adversarial loss.
    pub lambda: f64,
    pub image_size: usize,
    /// Stride-2 encoder depth of the remover (8 at full scale, 5 at desk scale).
    pub depth: usize,
    pub base_channels: usize,
    pub channel_cap: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum_mu: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub iterations: usize,
    pub seed: u64,
    pub share_weights: bool,
    pub semi_supervised: bool,
    /// Periodic checkpoint interval in iterations (0 = only at the end).
    pub checkpoint_every: usize,
}

impl Default for ArganConfig {
    fn default() -> Self {
        ArganConfig {
            n: 3,
            lambda: 0.7,
            image_size: 32,
            depth: 5,
            base_channels: 64,
            channel_cap: 512,
            batch_size: 4,
            lr: 2e-4,
            momentum_mu: 0.9,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            iterations: 2000,
            seed: 1,
            share_weights: true,
            semi_supervised: false,
            checkpoint_every: 0,
        }
    }
}

impl ArganConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 1 {
            return Err(ArganError::Config("n must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(ArganError::Config(format!(
                "lambda must lie in [0,1], got {}",
                self.lambda
            )));
        }
        let divisor = (1usize << self.depth).max(32);
        if self.image_size == 0 || self.image_size % divisor != 0 {
            return Err(ArganError::Config(format!(
                "image_size {} must be a positive multiple of {divisor} (max of 2^depth and the discriminator's 32)",
                self.image_size
            )));
        }
        if self.depth < 1 {
            return Err(ArganError::Config("depth must be at least 1".into()));
        }
        if self.batch_size < 1 {
            return Err(ArganError::Config("batch_size must be at least 1".into()));
        }
        if self.base_channels < 1 || self.channel_cap < self.base_channels {
            return Err(ArganError::Config(format!(
                "channel schedule needs base_channels >= 1 and channel_cap >= base_channels, got {} / {}",
                self.base_channels, self.channel_cap
            )));
        }
        if self.lr <= 0.0 {
            return Err(ArganError::Config(format!("lr must be positive, got {}", self.lr)));
        }
        Ok(())
    }

    /// Serialize in fixed key order; parsing this text reproduces the
    /// config exactly (floats use the shortest round-trip form).
    pub fn to_text(&self) -> String {
        format!(
            "n = {}\nlambda = {}\nimage_size = {}\ndepth = {}\nbase_channels = {}\nchannel_cap = {}\nbatch_size = {}\nlr = {}\nmomentum_mu = {}\nadam_beta1 = {}\nadam_beta2 = {}\nadam_eps = {}\niterations = {}\nseed = {}\nshare_weights = {}\nsemi_supervised = {}\ncheckpoint_every = {}\n",
            self.n,
            self.lambda,
            self.image_size,
            self.depth,
            self.base_channels,
            self.channel_cap,
            self.batch_size,
            self.lr,
            self.momentum_mu,
            self.adam_beta1,
            self.adam_beta2,
            self.adam_eps,
            self.iterations,
            self.seed,
            self.share_weights,
            self.semi_supervised,
            self.checkpoint_every,
        )
    }

    pub fn from_text(text: &str) -> Result<ArganConfig> {
        let mut cfg = ArganConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ArganError::Config(format!(
                    "line {}: expected 'key = value', got {raw:?}",
                    lineno + 1
                )));
            };
            let key = key.trim();
            let value = value.trim();
            let bad = |what: &str| {
                ArganError::Config(format!(
                    "line {}: cannot parse {key} as {what}: {value:?}",
                    lineno + 1
                ))
            };
            match key {
                "n" => cfg.n = value.parse().map_err(|_| bad("integer"))?,
                "lambda" => cfg.lambda = value.parse().map_err(|_| bad("float"))?,
                "image_size" => cfg.image_size = value.parse().map_err(|_| bad("integer"))?,
                "depth" => cfg.depth = value.parse().map_err(|_| bad("integer"))?,
                "base_channels" => {
                    cfg.base_channels = value.parse().map_err(|_| bad("integer"))?
                }
                "channel_cap" => cfg.channel_cap = value.parse().map_err(|_| bad("integer"))?,
                "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad("integer"))?,
                "lr" => cfg.lr = value.parse().map_err(|_| bad("float"))?,
                "momentum_mu" => cfg.momentum_mu = value.parse().map_err(|_| bad("float"))?,
                "adam_beta1" => cfg.adam_beta1 = value.parse().map_err(|_| bad("float"))?,
                "adam_beta2" => cfg.adam_beta2 = value.parse().map_err(|_| bad("float"))?,
                "adam_eps" => cfg.adam_eps = value.parse().map_err(|_| bad("float"))?,
                "iterations" => cfg.iterations = value.parse().map_err(|_| bad("integer"))?,
                "seed" => cfg.seed = value.parse().map_err(|_| bad("integer"))?,
                "share_weights" => {
                    cfg.share_weights = value.parse().map_err(|_| bad("bool"))?
                }
                "semi_supervised" => {
                    cfg.semi_supervised = value.parse().map_err(|_| bad("bool"))?
                }
                "checkpoint_every" => {
                    cfg.checkpoint_every = value.parse().map_err(|_| bad("integer"))?
                }
                other => {
                    return Err(ArganError::Config(format!(
                        "line {}: unknown key {other:?}",
                        lineno + 1
                    )))
                }
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<ArganConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            ArganError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ArganConfig::default().validate().unwrap();
    }

    #[test]
    fn text_round_trip_is_exact() {
        let mut cfg = ArganConfig::default();
        cfg.lambda = 0.65;
        cfg.lr = 3.5e-4;
        cfg.seed = 987654321;
        cfg.semi_supervised = true;
        let text = cfg.to_text();
        let back = ArganConfig::from_text(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.to_text(), text);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = ArganConfig::from_text("n = 3\nlearning_rate = 0.1\n")
            .unwrap_err()
            .to_string();
        assert!(err.contains("learning_rate"), "{err}");
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let cfg = ArganConfig::from_text("# comment\n\nn = 4\n").unwrap();
        assert_eq!(cfg.n, 4);
    }

    #[test]
    fn bad_values_name_the_key() {
        let err = ArganConfig::from_text("lr = fast\n").unwrap_err().to_string();
        assert!(err.contains("lr"), "{err}");
    }

    #[test]
    fn validation_catches_bad_combinations() {
        let mut cfg = ArganConfig::default();
        cfg.image_size = 48; // not a multiple of 32
        assert!(cfg.validate().is_err());
        let mut cfg = ArganConfig::default();
        cfg.lambda = 1.5;
        assert!(cfg.validate().is_err());
        let mut cfg = ArganConfig::default();
        cfg.n = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = ArganConfig::default();
        cfg.depth = 6; // 2^6 = 64 > 32, image 32 not divisible
        assert!(cfg.validate().is_err());
        cfg.image_size = 64;
        cfg.validate().unwrap();
    }
}
