use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

fn default_max_src_len() -> usize {
    512
}

fn default_max_tgt_len() -> usize {
    64
}

/// Architecture hyperparameters of the shared encoder-decoder.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_layers: usize,
    pub hidden_size: usize,
    pub filter_size: usize,
    pub num_heads: usize,
    pub vocab_size: usize,
    #[serde(default = "default_max_src_len")]
    pub max_src_len: usize,
    #[serde(default = "default_max_tgt_len")]
    pub max_tgt_len: usize,
}

impl ModelConfig {
    fn with_dims(layers: usize, hidden: usize, filter: usize, heads: usize, vocab_size: usize) -> Self {
        ModelConfig {
            num_layers: layers,
            hidden_size: hidden,
            filter_size: filter,
            num_heads: heads,
            vocab_size,
            max_src_len: default_max_src_len(),
            max_tgt_len: default_max_tgt_len(),
        }
    }

    /// 12 layers, hidden 768, filter 3072, 12 heads.
    pub fn base(vocab_size: usize) -> Self {
        Self::with_dims(12, 768, 3072, 12, vocab_size)
    }

    /// 24 layers, hidden 1024, filter 4096, 16 heads.
    pub fn large(vocab_size: usize) -> Self {
        Self::with_dims(24, 1024, 4096, 16, vocab_size)
    }

    /// 2 layers, hidden 64, filter 256, 4 heads.
    pub fn tiny(vocab_size: usize) -> Self {
        Self::with_dims(2, 64, 256, 4, vocab_size)
    }

    pub fn preset(name: &str, vocab_size: usize) -> Result<Self> {
        match name {
            "base" => Ok(Self::base(vocab_size)),
            "large" => Ok(Self::large(vocab_size)),
            "tiny" => Ok(Self::tiny(vocab_size)),
            other => Err(Error::invalid(format!(
                "unknown model preset `{other}` (expected base, large or tiny)"
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("num_layers", self.num_layers),
            ("hidden_size", self.hidden_size),
            ("filter_size", self.filter_size),
            ("num_heads", self.num_heads),
            ("vocab_size", self.vocab_size),
            ("max_src_len", self.max_src_len),
            ("max_tgt_len", self.max_tgt_len),
        ];
        if let Some((name, _)) = dims.iter().find(|(_, v)| *v == 0) {
            return Err(Error::invalid(format!("{name} must be positive")));
        }
        if self.hidden_size % self.num_heads != 0 {
            return Err(Error::invalid(format!(
                "hidden_size {} is not divisible by num_heads {}",
                self.hidden_size, self.num_heads
            )));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden_size / self.num_heads
    }

    /// Rows of the positional table, shared by source and target positions.
    pub fn position_table_len(&self) -> usize {
        self.max_src_len.max(self.max_tgt_len)
    }

    /// Closed-form count of learnable scalars.
    pub fn param_count(&self) -> usize {
        let (h, f, v, l) = (self.hidden_size, self.filter_size, self.vocab_size, self.num_layers);
        let attention = 4 * (h * h + h);
        let norm = 2 * h;
        let ffn = h * f + f + f * h + h;
        let shared = attention + norm + ffn + norm;
        let cross = attention + norm;
        v * h + self.position_table_len() * h + l * (shared + cross) + norm
    }
}
