//! Seeded random draws shared by the bootstrap, the partition test and the
//! simulators.
//!
//! Every replicate gets its own ChaCha stream derived from `(seed, index)`,
//! so replicates can run in any order or in parallel and still produce
//! identical numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Hypergeometric};

use crate::error::{Error, Result};

pub type ReplicateRng = ChaCha8Rng;

/// Independent generator for replicate `index` under `seed`.
pub fn replicate_rng(seed: u64, index: u64) -> ReplicateRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Checks a probability vector: finite, non-negative, summing to one within
/// `1e-12`.
pub fn check_probabilities(probs: &[f64], what: &str) -> Result<()> {
    if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidConfig(format!("{what}: invalid probability {p}")));
    }
    let sum: f64 = probs.iter().sum();
    if (sum - 1.0).abs() > 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "{what}: probabilities sum to {sum}, not 1"
        )));
    }
    Ok(())
}

/// `Mult(n, probs)` by sequential conditional binomials. `probs` must already
/// be validated.
pub fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut remaining_n = n;
    let mut remaining_p = 1.0f64;
    for (i, &p) in probs.iter().enumerate() {
        if remaining_n == 0 {
            break;
        }
        if i + 1 == probs.len() {
            out[i] = remaining_n;
            break;
        }
        let cond = if remaining_p > 0.0 {
            (p / remaining_p).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let x = if cond >= 1.0 {
            remaining_n
        } else if cond <= 0.0 {
            0
        } else {
            Binomial::new(remaining_n, cond)
                .expect("binomial parameters are in range")
                .sample(rng)
        };
        out[i] = x;
        remaining_n -= x;
        remaining_p -= p;
    }
    out
}

/// Resamples `Σ counts` rows with replacement from a population described by
/// per-category counts. Equivalent in distribution to drawing row indices
/// uniformly with replacement and counting categories.
pub fn resample_counts<R: Rng + ?Sized>(rng: &mut R, counts: &[u64]) -> Vec<u64> {
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return vec![0; counts.len()];
    }
    let mut out = vec![0u64; counts.len()];
    let mut remaining_draws = n;
    let mut remaining_pop = n;
    for (i, &c) in counts.iter().enumerate() {
        if remaining_draws == 0 {
            break;
        }
        if i + 1 == counts.len() || c == remaining_pop {
            out[i] = remaining_draws;
            break;
        }
        let x = if c == 0 {
            0
        } else {
            Binomial::new(remaining_draws, c as f64 / remaining_pop as f64)
                .expect("binomial parameters are in range")
                .sample(rng)
        };
        out[i] = x;
        remaining_draws -= x;
        remaining_pop -= c;
    }
    out
}

/// Draws `size` rows without replacement from a population given by
/// per-category counts (multivariate hypergeometric). Returns the drawn
/// counts; the caller subtracts them from the population.
pub fn draw_without_replacement<R: Rng + ?Sized>(rng: &mut R, counts: &[u64], size: u64) -> Vec<u64> {
    let mut population: u64 = counts.iter().sum();
    assert!(size <= population, "cannot draw {size} rows from {population}");
    let mut left = size;
    let mut out = vec![0u64; counts.len()];
    for (i, &c) in counts.iter().enumerate() {
        if left == 0 {
            break;
        }
        if c == population {
            out[i] = left;
            break;
        }
        let x = if c == 0 {
            0
        } else {
            Hypergeometric::new(population, c, left)
                .expect("hypergeometric parameters are in range")
                .sample(rng)
        };
        out[i] = x;
        left -= x;
        population -= c;
    }
    out
}

/// Splits a population into `folds` disjoint, equal-size random folds of
/// `⌊n / folds⌋` rows each; the remainder is dropped.
pub fn split_folds<R: Rng + ?Sized>(rng: &mut R, counts: &[u64], folds: usize) -> Vec<Vec<u64>> {
    let n: u64 = counts.iter().sum();
    let size = n / folds as u64;
    let mut left = counts.to_vec();
    (0..folds)
        .map(|_| {
            let fold = draw_without_replacement(rng, &left, size);
            for (l, f) in left.iter_mut().zip(&fold) {
                *l -= f;
            }
            fold
        })
        .collect()
}
