//! Greedy and beam-search generation.

mod scorer;
mod search;
mod strategy;

pub use scorer::{ModelScorer, StepScorer};
pub use search::{beam_search, greedy_search, length_penalty, BeamHypothesis, DecodeConfig};
pub use strategy::{Beam, DecoderRegistry, DecodingStrategy, Greedy};

use crate::error::Result;
use crate::model::SeqToSeqParams;
use crate::numerics::Real;
use crate::tokenizer::TokenSequence;

/// Greedy output for `src` as `BOS + generated ids`; `truncated` is set
/// when generation hit the length budget before `EOS`.
pub fn greedy_decode<T: Real>(params: &SeqToSeqParams<T>, src: &[u32], config: &DecodeConfig) -> Result<TokenSequence> {
    let mut scorer = ModelScorer::new(params, src)?;
    let h = greedy_search(&mut scorer, config)?;
    let truncated = h.ids.last() != Some(&scorer.eos_id());
    Ok(TokenSequence {
        ids: h.with_bos(),
        truncated,
    })
}

pub fn beam_decode<T: Real>(params: &SeqToSeqParams<T>, src: &[u32], config: &DecodeConfig) -> Result<Vec<BeamHypothesis>> {
    beam_search(&mut ModelScorer::new(params, src)?, config)
}
