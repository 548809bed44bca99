use std::collections::BTreeMap;

use serde::Serialize;

use super::records::{AnswerType, Malformed, QAPair, QGExample};

/// Records that survived a filter, plus a tally of why the rest did not.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FilterOutcome<R> {
    pub kept: Vec<R>,
    pub drops: BTreeMap<String, usize>,
    pub total: usize,
}

impl<R> FilterOutcome<R> {
    fn new() -> Self {
        FilterOutcome {
            kept: Vec::new(),
            drops: BTreeMap::new(),
            total: 0,
        }
    }

    fn drop(&mut self, reason: &str) {
        *self.drops.entry(reason.to_string()).or_default() += 1;
    }

    pub fn dropped(&self) -> usize {
        self.drops.values().sum()
    }
}

const STOPWORDS: &[&str] = &[
    "the", "a", "an", "and", "or", "of", "to", "in", "is", "are", "was", "it", "you", "i", "that",
    "this", "for", "on", "with", "be", "have", "not", "what", "how", "do", "can", "if", "my",
];

/// Best-effort check for untagged records: mostly ASCII letters, and for
/// longer texts at least some common English function words.
pub fn looks_english(text: &str) -> bool {
    let letters: Vec<char> = text.chars().filter(|c| c.is_alphabetic()).collect();
    if letters.is_empty() {
        return false;
    }
    let ascii = letters.iter().filter(|c| c.is_ascii_alphabetic()).count();
    if (ascii as f64) < 0.9 * letters.len() as f64 {
        return false;
    }
    let lower = text.to_lowercase();
    let words: Vec<&str> = lower
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .collect();
    if words.len() < 6 {
        return true;
    }
    let hits = words.iter().filter(|w| STOPWORDS.contains(w)).count();
    hits as f64 >= 0.08 * words.len() as f64
}

/// Why a well-formed pair is rejected, if it is.
pub fn qa_drop_reason(pair: &QAPair) -> Option<&'static str> {
    if pair.question.trim().is_empty() || pair.answer.trim().is_empty() {
        return Some("empty");
    }
    let english = match &pair.lang {
        Some(lang) => lang.trim().eq_ignore_ascii_case("en"),
        None => looks_english(&format!("{} {}", pair.question, pair.answer)),
    };
    if !english {
        return Some("non_english");
    }
    if pair.rating < 1 {
        return Some("unrated");
    }
    None
}

/// Keeps English pairs with a positive rating, in input order.
pub fn filter_qa_pairs<I>(records: I) -> FilterOutcome<QAPair>
where
    I: IntoIterator<Item = Result<QAPair, Malformed>>,
{
    let mut out = FilterOutcome::new();
    for rec in records {
        out.total += 1;
        match rec {
            Err(_) => out.drop("malformed"),
            Ok(pair) => match qa_drop_reason(&pair) {
                Some(reason) => out.drop(reason),
                None => out.kept.push(pair),
            },
        }
    }
    out
}

pub fn nq_drop_reason(ex: &QGExample) -> Option<&'static str> {
    match ex.answer_type {
        AnswerType::Span if ex.has_valid_span() => None,
        AnswerType::Span => Some("invalid_span"),
        other => Some(other.as_str()),
    }
}

/// Keeps only examples with a short answer span inside a paragraph.
pub fn filter_nq_examples<I>(examples: I) -> FilterOutcome<QGExample>
where
    I: IntoIterator<Item = QGExample>,
{
    let mut out = FilterOutcome::new();
    for ex in examples {
        out.total += 1;
        match nq_drop_reason(&ex) {
            Some(reason) => out.drop(reason),
            None => out.kept.push(ex),
        }
    }
    out
}
