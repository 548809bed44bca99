use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Fig. 4 x-axis: 1, 2, 5, 10, 20, 50 and 100 percent.
pub const DEFAULT_FRACTIONS: [f64; 7] = [0.01, 0.02, 0.05, 0.10, 0.20, 0.50, 1.00];

pub fn subsample_size(n: usize, fraction: f64) -> Result<usize> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::invalid(format!("fraction {fraction} is outside (0, 1]")));
    }
    // The epsilon keeps products like 0.07 * 100 from rounding up to 8.
    Ok(((fraction * n as f64 - 1e-9).ceil() as usize).min(n))
}

/// Indices of a seeded subsample, ascending. One permutation of `0..n` is
/// drawn per seed and the subsample is its prefix, so for a fixed seed
/// smaller fractions always select subsets of larger ones.
pub fn subsample_indices(n: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    let k = subsample_size(n, fraction)?;
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut picked = perm[..k].to_vec();
    picked.sort_unstable();
    Ok(picked)
}

pub fn subsample<T: Clone>(items: &[T], fraction: f64, seed: u64) -> Result<Vec<T>> {
    Ok(subsample_indices(items.len(), fraction, seed)?
        .into_iter()
        .map(|i| items[i].clone())
        .collect())
}
