use std::collections::HashMap;

use crate::error::{Error, Result};

/// Lowercased alphanumeric runs. No stemming, no stopword removal.
pub fn metric_tokens(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for w in tokens.windows(n) {
            *counts.entry(w).or_insert(0) += 1;
        }
    }
    counts
}

/// Candidate n-grams matched in the reference, each reference n-gram used
/// at most as often as it occurs there.
fn clipped_overlap(cand: &HashMap<&[String], usize>, reference: &HashMap<&[String], usize>) -> usize {
    cand.iter()
        .map(|(g, &c)| c.min(reference.get(g).copied().unwrap_or(0)))
        .sum()
}

fn f1(overlap: usize, cand_total: usize, ref_total: usize) -> f64 {
    if overlap == 0 || cand_total == 0 || ref_total == 0 {
        return 0.0;
    }
    let p = overlap as f64 / cand_total as f64;
    let r = overlap as f64 / ref_total as f64;
    2.0 * p * r / (p + r)
}

pub fn rouge_n_f1(candidate: &str, reference: &str, n: usize) -> f64 {
    let (c, r) = (metric_tokens(candidate), metric_tokens(reference));
    let (cc, rc) = (ngram_counts(&c, n), ngram_counts(&r, n));
    f1(
        clipped_overlap(&cc, &rc),
        cc.values().sum(),
        rc.values().sum(),
    )
}

fn lcs_len(a: &[String], b: &[String]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { cur[j].max(prev[j + 1]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

pub fn rouge_l_f1(candidate: &str, reference: &str) -> f64 {
    let (c, r) = (metric_tokens(candidate), metric_tokens(reference));
    f1(lcs_len(&c, &r), c.len(), r.len())
}

/// Corpus BLEU-1 through BLEU-`max_n`, without smoothing.
pub fn bleu<S: AsRef<str>>(candidates: &[S], references: &[S], max_n: usize) -> Result<Vec<f64>> {
    if candidates.len() != references.len() {
        return Err(Error::invalid(format!(
            "{} candidates but {} references",
            candidates.len(),
            references.len()
        )));
    }
    let mut matched = vec![0usize; max_n];
    let mut total = vec![0usize; max_n];
    let (mut cand_len, mut ref_len) = (0usize, 0usize);
    for (c, r) in candidates.iter().zip(references) {
        let (c, r) = (metric_tokens(c.as_ref()), metric_tokens(r.as_ref()));
        cand_len += c.len();
        ref_len += r.len();
        for n in 1..=max_n {
            let (cc, rc) = (ngram_counts(&c, n), ngram_counts(&r, n));
            matched[n - 1] += clipped_overlap(&cc, &rc);
            total[n - 1] += cc.values().sum::<usize>();
        }
    }
    if cand_len == 0 {
        return Ok(vec![0.0; max_n]);
    }
    let bp = if cand_len > ref_len {
        1.0
    } else {
        (1.0 - ref_len as f64 / cand_len as f64).exp()
    };
    let mut out = Vec::with_capacity(max_n);
    let mut log_sum = 0.0;
    for k in 1..=max_n {
        let p = if total[k - 1] == 0 {
            0.0
        } else {
            matched[k - 1] as f64 / total[k - 1] as f64
        };
        log_sum += p.ln();
        let score = if log_sum.is_finite() {
            bp * (log_sum / k as f64).exp()
        } else {
            0.0
        };
        out.push(score);
    }
    Ok(out)
}

/// Clipped n-gram precision of one candidate, as used inside BLEU.
pub fn modified_precision(candidate: &str, reference: &str, n: usize) -> f64 {
    let (c, r) = (metric_tokens(candidate), metric_tokens(reference));
    let (cc, rc) = (ngram_counts(&c, n), ngram_counts(&r, n));
    let total: usize = cc.values().sum();
    if total == 0 {
        return 0.0;
    }
    clipped_overlap(&cc, &rc) as f64 / total as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokens_are_lowercased_alphanumeric_runs() {
        assert_eq!(metric_tokens("The CAT's hat!"), vec!["the", "cat", "s", "hat"]);
        assert!(metric_tokens(" ,.; ").is_empty());
    }

    #[test]
    fn lcs_lengths() {
        let t = |s: &str| metric_tokens(s);
        assert_eq!(lcs_len(&t("a c d"), &t("a b c d")), 3);
        assert_eq!(lcs_len(&t(""), &t("a")), 0);
        assert_eq!(lcs_len(&t("a b c"), &t("c b a")), 1);
    }

    #[test]
    fn rouge_edges() {
        assert_eq!(rouge_n_f1("", "a b", 1), 0.0);
        assert_eq!(rouge_n_f1("a", "a", 2), 0.0);
        assert_eq!(rouge_l_f1("", "a b"), 0.0);
        assert_eq!(rouge_n_f1("A B", "a b", 2), 1.0);
    }

    #[test]
    fn bleu_length_mismatch() {
        assert!(bleu(&["a"], &[], 4).is_err());
    }
}
