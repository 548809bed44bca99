use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::scorer::StepScorer;
use crate::error::{Error, Result};
use crate::tokenizer::BOS_ID;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    pub beam_size: usize,
    pub max_len: usize,
    pub length_penalty_alpha: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            beam_size: 4,
            max_len: 64,
            length_penalty_alpha: 0.6,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.beam_size == 0 {
            return Err(Error::invalid("beam_size must be at least 1"));
        }
        if self.max_len == 0 {
            return Err(Error::invalid("max_len must be at least 1"));
        }
        if !(self.length_penalty_alpha >= 0.0) {
            return Err(Error::invalid("length_penalty_alpha must be >= 0"));
        }
        Ok(())
    }
}

/// A generated continuation. `ids` excludes the leading `BOS`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamHypothesis {
    pub ids: Vec<u32>,
    pub log_prob: f64,
    /// Ended with `EOS` rather than at the length limit.
    pub finished: bool,
}

impl BeamHypothesis {
    pub fn score(&self, alpha: f64) -> f64 {
        self.log_prob / length_penalty(self.ids.len(), alpha)
    }

    /// `BOS` followed by the generated ids.
    pub fn with_bos(&self) -> Vec<u32> {
        let mut v = Vec::with_capacity(self.ids.len() + 1);
        v.push(BOS_ID);
        v.extend_from_slice(&self.ids);
        v
    }
}

/// `((5 + len) / 6)^alpha`.
pub fn length_penalty(len: usize, alpha: f64) -> f64 {
    ((5.0 + len as f64) / 6.0).powf(alpha)
}

fn effective_max_len(scorer: &dyn StepScorer, config: &DecodeConfig) -> Result<usize> {
    config.validate()?;
    Ok(config.max_len.min(scorer.max_len()))
}

/// Index of the best finite entry, lowest id on ties.
fn argmax(row: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &x) in row.iter().enumerate() {
        if x.is_finite() && best.is_none_or(|b| x > row[b]) {
            best = Some(i);
        }
    }
    best
}

pub fn greedy_search(scorer: &mut dyn StepScorer, config: &DecodeConfig) -> Result<BeamHypothesis> {
    let max_len = effective_max_len(scorer, config)?;
    let eos = scorer.eos_id();
    let mut prefix = vec![BOS_ID];
    let mut log_prob = 0.0;
    while prefix.len() <= max_len {
        let row = scorer.log_probs(std::slice::from_ref(&prefix))?.remove(0);
        let Some(next) = argmax(&row) else { break };
        log_prob += row[next];
        prefix.push(next as u32);
        if next as u32 == eos {
            break;
        }
    }
    let ids = prefix[1..].to_vec();
    Ok(BeamHypothesis {
        finished: ids.last() == Some(&eos),
        log_prob,
        ids,
    })
}

/// Beam search with length-normalized final ranking. Finished hypotheses
/// leave the beam, which refills from the next-best candidates. Search ends
/// once `beam_size` hypotheses are finished and no active one can still
/// beat the worst of them.
pub fn beam_search(scorer: &mut dyn StepScorer, config: &DecodeConfig) -> Result<Vec<BeamHypothesis>> {
    let max_len = effective_max_len(scorer, config)?;
    let (beam, alpha, eos) = (config.beam_size, config.length_penalty_alpha, scorer.eos_id());
    let by_score = |a: &BeamHypothesis, b: &BeamHypothesis| {
        b.score(alpha)
            .partial_cmp(&a.score(alpha))
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.ids.cmp(&b.ids))
    };

    let mut active = vec![BeamHypothesis {
        ids: Vec::new(),
        log_prob: 0.0,
        finished: false,
    }];
    let mut finished: Vec<BeamHypothesis> = Vec::new();
    while !active.is_empty() {
        let prefixes: Vec<Vec<u32>> = active.iter().map(BeamHypothesis::with_bos).collect();
        let rows = scorer.log_probs(&prefixes)?;
        let mut candidates: Vec<(f64, usize, u32)> = Vec::new();
        for (h, row) in rows.iter().enumerate() {
            for (tok, &lp) in row.iter().enumerate() {
                if lp.is_finite() {
                    candidates.push((active[h].log_prob + lp, h, tok as u32));
                }
            }
        }
        candidates.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap_or(Ordering::Equal)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });

        let mut next = Vec::with_capacity(beam);
        for (log_prob, h, tok) in candidates {
            if next.len() == beam {
                break;
            }
            let mut ids = active[h].ids.clone();
            ids.push(tok);
            let ended = tok == eos;
            let done = ended || ids.len() >= max_len;
            let hyp = BeamHypothesis {
                ids,
                log_prob,
                finished: ended,
            };
            if done {
                finished.push(hyp);
            } else {
                next.push(hyp);
            }
        }
        active = next;

        if finished.len() >= beam {
            finished.sort_by(by_score);
            finished.truncate(beam);
            let worst = finished[beam - 1].score(alpha);
            let bound = active
                .iter()
                .map(|h| h.log_prob / length_penalty(max_len, alpha))
                .fold(f64::NEG_INFINITY, f64::max);
            if bound <= worst {
                break;
            }
        }
    }
    finished.sort_by(by_score);
    finished.truncate(beam);
    Ok(finished)
}
