use std::path::Path;

use qglab_core::decoding::DecodeConfig;
use qglab_core::model::ModelConfig;
use qglab_core::training::TrainingConfig;
use serde::{Deserialize, Serialize};

use crate::args::{DecodeFlags, TrainFlags};
use crate::failure::Failure;

/// Architecture choice: a preset plus optional per-field overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSection {
    pub preset: String,
    pub num_layers: Option<usize>,
    pub hidden_size: Option<usize>,
    pub filter_size: Option<usize>,
    pub num_heads: Option<usize>,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            preset: "tiny".into(),
            num_layers: None,
            hidden_size: None,
            filter_size: None,
            num_heads: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeSection {
    pub decoder: String,
    #[serde(flatten)]
    pub config: DecodeConfig,
}

impl Default for DecodeSection {
    fn default() -> Self {
        DecodeSection {
            decoder: "beam".into(),
            config: DecodeConfig::default(),
        }
    }
}

/// Fully resolved run settings, echoed into the manifest.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub model: ModelSection,
    pub training: TrainingConfig,
    pub decode: DecodeSection,
}

impl Settings {
    /// Defaults, overlaid by the config file when one is given.
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        match path {
            None => Ok(Settings::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Failure::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| Failure::data(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn apply_train(&mut self, f: &TrainFlags, seed: u64) {
        let t = &mut self.training;
        if let Some(p) = &f.preset {
            self.model.preset = p.clone();
        }
        if let Some(v) = f.steps {
            t.max_steps = v;
        }
        if let Some(v) = f.batch_size {
            t.batch_size = v;
        }
        if let Some(v) = f.lr {
            t.learning_rate = v;
        }
        if let Some(v) = f.warmup {
            t.warmup_steps = v;
        }
        if let Some(v) = f.max_src_len {
            t.max_src_len = v;
        }
        if let Some(v) = f.max_tgt_len {
            t.max_tgt_len = v;
        }
        if f.no_bucketing {
            t.bucketing = false;
        }
        t.seed = seed;
    }

    pub fn apply_decode(&mut self, f: &DecodeFlags) {
        let d = &mut self.decode;
        if let Some(v) = &f.decoder {
            d.decoder = v.clone();
        }
        if let Some(v) = f.beam {
            d.config.beam_size = v;
        }
        if let Some(v) = f.alpha {
            d.config.length_penalty_alpha = v;
        }
        if let Some(v) = f.max_len {
            d.config.max_len = v;
        }
    }

    /// Architecture for a fresh model over `vocab_size` tokens.
    pub fn model_config(&self, vocab_size: usize) -> Result<ModelConfig, Failure> {
        let m = &self.model;
        let mut c = ModelConfig::preset(&m.preset, vocab_size)?;
        if let Some(v) = m.num_layers {
            c.num_layers = v;
        }
        if let Some(v) = m.hidden_size {
            c.hidden_size = v;
        }
        if let Some(v) = m.filter_size {
            c.filter_size = v;
        }
        if let Some(v) = m.num_heads {
            c.num_heads = v;
        }
        c.max_src_len = self.training.max_src_len;
        c.max_tgt_len = self.training.max_tgt_len;
        c.validate()?;
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_sections_fill_from_defaults() {
        let s: Settings = serde_json::from_str(r#"{"model": {"hidden_size": 32}, "decode": {"max_len": 8}}"#).unwrap();
        assert_eq!(s.model.preset, "tiny");
        assert_eq!(s.model.hidden_size, Some(32));
        assert_eq!(s.decode.decoder, "beam");
        assert_eq!(s.decode.config.max_len, 8);
        assert_eq!(s.decode.config.beam_size, DecodeConfig::default().beam_size);
        assert_eq!(s.training, TrainingConfig::default());
    }
}
