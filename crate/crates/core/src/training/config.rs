use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimization settings. Every field has a default so partial JSON config
/// files work.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub warmup_steps: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub max_src_len: usize,
    pub max_tgt_len: usize,
    pub clip_norm: f64,
    /// Sort examples by source length inside windows of a few batches.
    pub bucketing: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            batch_size: 128,
            learning_rate: 1e-3,
            warmup_steps: 100,
            max_steps: 1000,
            seed: 0,
            max_src_len: 512,
            max_tgt_len: 64,
            clip_norm: 1.0,
            bucketing: true,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps must be at least 1"));
        }
        if self.max_src_len < 2 || self.max_tgt_len < 2 {
            return Err(Error::invalid("sequence limits must leave room for BOS and EOS"));
        }
        if !(self.clip_norm > 0.0) {
            return Err(Error::invalid("clip_norm must be positive"));
        }
        Ok(())
    }

    /// Linear warmup over `warmup_steps`, then constant. `step` is 0-based.
    pub fn learning_rate_at(&self, step: usize) -> f64 {
        if self.warmup_steps == 0 || step >= self.warmup_steps {
            self.learning_rate
        } else {
            self.learning_rate * (step + 1) as f64 / self.warmup_steps as f64
        }
    }
}
