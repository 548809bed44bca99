use std::collections::BTreeMap;

use super::scorer::StepScorer;
use super::search::{beam_search, greedy_search, BeamHypothesis, DecodeConfig};
use crate::error::{Error, Result};

/// A way of turning next-token distributions into ranked outputs.
pub trait DecodingStrategy: Send + Sync {
    fn name(&self) -> &str;

    fn decode(&self, scorer: &mut dyn StepScorer, config: &DecodeConfig) -> Result<Vec<BeamHypothesis>>;
}

pub struct Greedy;

impl DecodingStrategy for Greedy {
    fn name(&self) -> &str {
        "greedy"
    }

    fn decode(&self, scorer: &mut dyn StepScorer, config: &DecodeConfig) -> Result<Vec<BeamHypothesis>> {
        Ok(vec![greedy_search(scorer, config)?])
    }
}

pub struct Beam;

impl DecodingStrategy for Beam {
    fn name(&self) -> &str {
        "beam"
    }

    fn decode(&self, scorer: &mut dyn StepScorer, config: &DecodeConfig) -> Result<Vec<BeamHypothesis>> {
        beam_search(scorer, config)
    }
}

pub struct DecoderRegistry {
    strategies: BTreeMap<String, Box<dyn DecodingStrategy>>,
}

impl Default for DecoderRegistry {
    fn default() -> Self {
        let mut r = DecoderRegistry::empty();
        r.register(Box::new(Greedy));
        r.register(Box::new(Beam));
        r
    }
}

impl DecoderRegistry {
    pub fn empty() -> Self {
        DecoderRegistry {
            strategies: BTreeMap::new(),
        }
    }

    /// Adds `strategy`, replacing any previous one with the same name.
    pub fn register(&mut self, strategy: Box<dyn DecodingStrategy>) {
        self.strategies.insert(strategy.name().to_string(), strategy);
    }

    pub fn get(&self, name: &str) -> Result<&dyn DecodingStrategy> {
        self.strategies.get(name).map(|s| s.as_ref()).ok_or_else(|| {
            Error::invalid(format!(
                "unknown decoder `{name}` (available: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&str> {
        self.strategies.keys().map(String::as_str).collect()
    }
}
