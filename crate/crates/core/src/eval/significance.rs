use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PairPValue {
    pub system_a: String,
    pub system_b: String,
    pub p_value: f64,
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// Two-sided paired sign-flip test on the mean difference. All `2^n` sign
/// patterns are enumerated when that is at most `n_permutations`;
/// otherwise `n_permutations` random patterns are drawn and the p-value is
/// `(hits + 1) / (n_permutations + 1)`.
pub fn paired_permutation_p(a: &[f64], b: &[f64], n_permutations: usize, seed: u64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "paired test needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let n = d.len();
    if n == 0 {
        return Err(Error::invalid("paired test needs at least one item"));
    }
    let observed = d.iter().sum::<f64>().abs();
    let tol = 1e-12 * observed.max(1.0);
    let at_least = |stat: f64| stat >= observed - tol;

    if n < 63 && (1u64 << n) <= n_permutations as u64 {
        let total = 1u64 << n;
        let hits = (0..total)
            .filter(|mask| {
                let s: f64 = d
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| if mask >> i & 1 == 1 { -x } else { x })
                    .sum();
                at_least(s.abs())
            })
            .count();
        return Ok(hits as f64 / total as f64);
    }
    if n_permutations == 0 {
        return Err(Error::invalid("n_permutations must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hits = 0usize;
    for _ in 0..n_permutations {
        let s: f64 = d.iter().map(|&x| if rng.random::<bool>() { -x } else { x }).sum();
        if at_least(s.abs()) {
            hits += 1;
        }
    }
    Ok((hits + 1) as f64 / (n_permutations + 1) as f64)
}

/// p-values for every unordered pair of systems, with `system_a` before
/// `system_b` in name order. Each pair draws from its own stream derived
/// from `seed` and the two names, so swapping them changes nothing.
pub fn pairwise_permutation_test(
    scores: &BTreeMap<String, Vec<f64>>,
    n_permutations: usize,
    seed: u64,
) -> Result<Vec<PairPValue>> {
    let names: Vec<&String> = scores.keys().collect();
    let mut out = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let stream = seed ^ fnv1a(format!("{a}\u{0}{b}").as_bytes());
            out.push(PairPValue {
                system_a: a.to_string(),
                system_b: b.to_string(),
                p_value: paired_permutation_p(&scores[*a], &scores[*b], n_permutations, stream)?,
            });
        }
    }
    Ok(out)
}

pub fn write_pvalues_csv(path: impl AsRef<Path>, rows: &[PairPValue]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_comparison_is_one() {
        let x = [0.3, 0.1, 0.9, 0.4];
        assert_eq!(paired_permutation_p(&x, &x, 10_000, 1).unwrap(), 1.0);
        let many: Vec<f64> = (0..40).map(|i| i as f64).collect();
        assert_eq!(paired_permutation_p(&many, &many, 500, 1).unwrap(), 1.0);
    }

    #[test]
    fn separated_constants() {
        let a = vec![0.9; 30];
        let b = vec![0.1; 30];
        assert!(paired_permutation_p(&a, &b, 10_000, 7).unwrap() < 0.001);
    }

    #[test]
    fn symmetric_and_seeded() {
        let a: Vec<f64> = (0..20).map(|i| (i as f64 * 0.37).sin()).collect();
        let b: Vec<f64> = (0..20).map(|i| (i as f64 * 0.11).cos()).collect();
        let p1 = paired_permutation_p(&a, &b, 2000, 3).unwrap();
        assert_eq!(p1, paired_permutation_p(&b, &a, 2000, 3).unwrap());
        assert_eq!(p1, paired_permutation_p(&a, &b, 2000, 3).unwrap());
        assert!((0.0..=1.0).contains(&p1));
    }

    #[test]
    fn length_mismatch() {
        assert!(paired_permutation_p(&[1.0], &[1.0, 2.0], 10, 0).is_err());
        let mut m = BTreeMap::new();
        m.insert("a".to_string(), vec![1.0]);
        m.insert("b".to_string(), vec![1.0, 2.0]);
        assert!(pairwise_permutation_test(&m, 10, 0).is_err());
    }

    #[test]
    fn pairs_are_ordered_by_name() {
        let mut m = BTreeMap::new();
        for s in ["zeta", "alpha", "mid"] {
            m.insert(s.to_string(), vec![0.1, 0.5, 0.2]);
        }
        let rows = pairwise_permutation_test(&m, 100, 0).unwrap();
        let pairs: Vec<(&str, &str)> = rows.iter().map(|r| (r.system_a.as_str(), r.system_b.as_str())).collect();
        assert_eq!(pairs, vec![("alpha", "mid"), ("alpha", "zeta"), ("mid", "zeta")]);
    }
}
