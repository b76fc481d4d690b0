//! Seeded generators for the two built-in study datasets.

mod movies;
mod names;
mod politics;

pub use movies::{sample_movies, MoviesGenSpec, RawRow};
pub use names::{generate_name, generate_title, FEMALE_FIRST, MALE_FIRST, SURNAMES};
pub use politics::{generate_politicians, ClampedNormal, PolicyModel, PolicySpec, PoliticsGenSpec};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::{Error, Result};

const PROB_TOLERANCE: f64 = 1e-9;

/// A discrete distribution over labels, kept in declaration order.
pub type Weights = Vec<(String, f64)>;

pub(crate) fn check_distribution(what: &str, weights: &[(String, f64)]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::Config(format!("{what}: empty distribution")));
    }
    if let Some((label, p)) = weights.iter().find(|(_, p)| !(0.0..=1.0).contains(p)) {
        return Err(Error::Config(format!(
            "{what}: probability {p} for {label:?} outside [0, 1]"
        )));
    }
    let total: f64 = weights.iter().map(|(_, p)| p).sum();
    if (total - 1.0).abs() > PROB_TOLERANCE {
        return Err(Error::Config(format!("{what}: probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// Index into `probs` selected by a uniform draw `u` in [0, 1).
pub(crate) fn pick(probs: impl IntoIterator<Item = f64>, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.into_iter().enumerate() {
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// `round(n * p)` per category, with the rounding remainder given to the
/// largest category so the counts sum to `n`.
pub fn stratified_counts(n: usize, probs: &[f64]) -> Vec<usize> {
    let mut counts: Vec<i64> = probs.iter().map(|p| libm::round(n as f64 * p) as i64).collect();
    let diff = n as i64 - counts.iter().sum::<i64>();
    if diff != 0 {
        if let Some(largest) = (0..probs.len()).max_by(|&a, &b| probs[a].total_cmp(&probs[b]).then(b.cmp(&a))) {
            counts[largest] += diff;
        }
    }
    counts.into_iter().map(|c| c.max(0) as usize).collect()
}
