use std::collections::BTreeMap;

use super::overlap::{bleu, rouge_l_f1, rouge_n_f1};
use crate::error::{Error, Result};

/// A corpus-level score of candidates against references.
pub trait Metric: Send + Sync {
    fn name(&self) -> &str;

    fn score(&self, candidates: &[String], references: &[String]) -> Result<f64>;
}

fn check_lengths(candidates: &[String], references: &[String]) -> Result<()> {
    if candidates.len() != references.len() {
        return Err(Error::invalid(format!(
            "{} candidates but {} references",
            candidates.len(),
            references.len()
        )));
    }
    if candidates.is_empty() {
        return Err(Error::invalid("no examples to score"));
    }
    Ok(())
}

fn mean_of(candidates: &[String], references: &[String], f: impl Fn(&str, &str) -> f64) -> Result<f64> {
    check_lengths(candidates, references)?;
    let total: f64 = candidates.iter().zip(references).map(|(c, r)| f(c, r)).sum();
    Ok(total / candidates.len() as f64)
}

/// Mean per-example ROUGE-N F1.
pub struct RougeN(pub usize);

impl Metric for RougeN {
    fn name(&self) -> &str {
        match self.0 {
            1 => "rouge1",
            2 => "rouge2",
            _ => "rougeN",
        }
    }

    fn score(&self, candidates: &[String], references: &[String]) -> Result<f64> {
        mean_of(candidates, references, |c, r| rouge_n_f1(c, r, self.0))
    }
}

/// Mean per-example ROUGE-L F1.
pub struct RougeL;

impl Metric for RougeL {
    fn name(&self) -> &str {
        "rougeL"
    }

    fn score(&self, candidates: &[String], references: &[String]) -> Result<f64> {
        mean_of(candidates, references, rouge_l_f1)
    }
}

/// Corpus BLEU up to the given order.
pub struct Bleu(pub usize);

impl Metric for Bleu {
    fn name(&self) -> &str {
        ["bleu1", "bleu2", "bleu3", "bleu4"].get(self.0.wrapping_sub(1)).copied().unwrap_or("bleuN")
    }

    fn score(&self, candidates: &[String], references: &[String]) -> Result<f64> {
        check_lengths(candidates, references)?;
        Ok(bleu(candidates, references, self.0)?[self.0 - 1])
    }
}

pub struct MetricRegistry {
    metrics: BTreeMap<String, Box<dyn Metric>>,
}

impl Default for MetricRegistry {
    fn default() -> Self {
        let mut r = MetricRegistry::empty();
        r.register(Box::new(RougeN(1)));
        r.register(Box::new(RougeN(2)));
        r.register(Box::new(RougeL));
        for n in 1..=4 {
            r.register(Box::new(Bleu(n)));
        }
        r
    }
}

impl MetricRegistry {
    pub fn empty() -> Self {
        MetricRegistry {
            metrics: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, metric: Box<dyn Metric>) {
        self.metrics.insert(metric.name().to_string(), metric);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Metric> {
        self.metrics.get(name).map(|m| m.as_ref()).ok_or_else(|| {
            Error::invalid(format!(
                "unknown metric `{name}` (available: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn names(&self) -> Vec<&str> {
        self.metrics.keys().map(String::as_str).collect()
    }

    /// Scores under each named metric, keyed by name.
    pub fn score_all(&self, names: &[&str], candidates: &[String], references: &[String]) -> Result<BTreeMap<String, f64>> {
        names
            .iter()
            .map(|&n| Ok((n.to_string(), self.get(n)?.score(candidates, references)?)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_names() {
        let r = MetricRegistry::default();
        assert_eq!(
            r.names(),
            vec!["bleu1", "bleu2", "bleu3", "bleu4", "rouge1", "rouge2", "rougeL"]
        );
        assert!(r.get("meteor").is_err());
    }

    #[test]
    fn perfect_agreement_scores_one() {
        let r = MetricRegistry::default();
        let refs = vec!["a quick brown fox jumps".to_string(), "over the lazy dog today".to_string()];
        let all = r.score_all(&r.names(), &refs, &refs).unwrap();
        assert!(all.values().all(|&v| (v - 1.0).abs() < 1e-12), "{all:?}");
    }
}
