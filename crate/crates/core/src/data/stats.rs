use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::records::QAPair;
use crate::error::{Error, Result};
use crate::tokenizer::{pretokenize, Vocabulary};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub avg_question_tokens: f64,
    pub avg_answer_tokens: f64,
    pub count: usize,
}

/// On-disk form of [`CorpusStats`] together with filter drop counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStatsReport {
    pub avg_q_tokens: f64,
    pub avg_a_tokens: f64,
    pub count: usize,
    pub drops: BTreeMap<String, usize>,
}

impl CorpusStatsReport {
    pub fn new(stats: CorpusStats, drops: BTreeMap<String, usize>) -> Self {
        CorpusStatsReport {
            avg_q_tokens: stats.avg_question_tokens,
            avg_a_tokens: stats.avg_answer_tokens,
            count: stats.count,
            drops,
        }
    }
}

/// Mean untruncated token lengths. Without a vocabulary, lengths are counted
/// in pre-tokens (words and punctuation marks).
pub fn corpus_stats(pairs: &[QAPair], vocab: Option<&Vocabulary>) -> Result<CorpusStats> {
    if pairs.is_empty() {
        return Err(Error::UndefinedStats);
    }
    let count_tokens = |text: &str| match vocab {
        Some(v) => v.encode_content(text).len(),
        None => pretokenize(text).len(),
    };
    let (mut q, mut a) = (0usize, 0usize);
    for p in pairs {
        q += count_tokens(&p.question);
        a += count_tokens(&p.answer);
    }
    let n = pairs.len() as f64;
    Ok(CorpusStats {
        avg_question_tokens: q as f64 / n,
        avg_answer_tokens: a as f64 / n,
        count: pairs.len(),
    })
}
