//! Target subsampling and the negative distribution.

use rand::distr::Distribution;
use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;

use super::TrainError;
use crate::corpus::Vocabulary;

/// Exponent applied to unigram counts for negative sampling.
pub const NEGATIVE_POWER: f64 = 0.75;

/// `min(1, sqrt(t/f) + t/f)`.
#[inline]
pub fn keep_probability(frequency: f64, t: f64) -> f64 {
    let r = t / frequency;
    (r.sqrt() + r).min(1.0)
}

/// Subsampling decision for one target occurrence. Consumes exactly one
/// uniform draw from `rng`.
#[inline]
pub fn keep_target<R: Rng + ?Sized>(frequency: f64, t: f64, rng: &mut R) -> bool {
    let u: f64 = rng.random();
    u < keep_probability(frequency, t)
}

/// Alias table over `count^0.75`.
#[derive(Clone, Debug)]
pub struct NegativeTable {
    probabilities: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
}

impl NegativeTable {
    pub fn from_counts(counts: &[u64]) -> Result<Self, TrainError> {
        if counts.is_empty() || counts.iter().all(|&c| c == 0) {
            return Err(TrainError::Sampling("no positive counts".into()));
        }
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(NEGATIVE_POWER)).collect();
        let total: f64 = weights.iter().sum();
        let probabilities = weights.iter().map(|w| w / total).collect();
        let alias = WeightedAliasIndex::new(weights).map_err(|e| TrainError::Sampling(e.to_string()))?;
        Ok(NegativeTable { probabilities, alias })
    }

    pub fn from_vocabulary(vocab: &Vocabulary) -> Result<Self, TrainError> {
        let counts: Vec<u64> = vocab.entries().iter().map(|e| e.count).collect();
        Self::from_counts(&counts)
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probability(&self, id: u32) -> f64 {
        self.probabilities[id as usize]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        self.alias.sample(rng) as u32
    }

    /// Appends `k` draws to `out`, redrawing any that equal `target`.
    pub fn sample_into<R: Rng + ?Sized>(
        &self,
        k: usize,
        target: u32,
        rng: &mut R,
        out: &mut Vec<u32>,
    ) -> Result<(), TrainError> {
        if k == 0 {
            return Ok(());
        }
        let target_p = self.probabilities.get(target as usize).copied().unwrap_or(0.0);
        if self.len() < 2 || target_p >= 1.0 {
            return Err(TrainError::Sampling("cannot draw a negative distinct from the target".into()));
        }
        for _ in 0..k {
            loop {
                let id = self.draw(rng);
                if id != target {
                    out.push(id);
                    break;
                }
            }
        }
        Ok(())
    }
}

/// `k` negatives for `target`.
pub fn sample_negatives<R: Rng + ?Sized>(
    table: &NegativeTable,
    k: usize,
    target: u32,
    rng: &mut R,
) -> Result<Vec<u32>, TrainError> {
    let mut out = Vec::with_capacity(k);
    table.sample_into(k, target, rng, &mut out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn keep_probability_values() {
        assert_eq!(keep_probability(1e-6, 5e-6), 1.0);
        assert_eq!(keep_probability(5e-6, 5e-6), 1.0);
        assert!((keep_probability(0.05, 5e-6) - 0.0101).abs() < 1e-15);
    }

    #[test]
    fn keep_probability_is_non_increasing() {
        let mut prev = f64::INFINITY;
        for i in 1..=2000 {
            let f = i as f64 / 2000.0;
            let p = keep_probability(f, 5e-6);
            assert!(p <= prev);
            prev = p;
        }
    }

    #[test]
    fn keep_target_consumes_one_draw() {
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let mut b = ChaCha8Rng::seed_from_u64(1);
        keep_target(0.5, 5e-6, &mut a);
        let _: f64 = b.random();
        assert_eq!(a.random::<u64>(), b.random::<u64>());
    }

    #[test]
    fn two_word_probabilities() {
        let t = NegativeTable::from_counts(&[81, 16]).unwrap();
        assert!((t.probability(0) - 27.0 / 35.0).abs() < 1e-12);
        assert!((t.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn negatives_exclude_target() {
        let t = NegativeTable::from_counts(&[100, 1, 1]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = sample_negatives(&t, 500, 0, &mut rng).unwrap();
        assert_eq!(n.len(), 500);
        assert!(n.iter().all(|&i| i != 0));
        assert!(sample_negatives(&t, 0, 0, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn single_word_vocabulary_cannot_sample() {
        let t = NegativeTable::from_counts(&[5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(sample_negatives(&t, 3, 0, &mut rng), Err(TrainError::Sampling(_))));
        assert!(NegativeTable::from_counts(&[]).is_err());
    }

    #[test]
    fn sampling_is_deterministic_given_rng() {
        let t = NegativeTable::from_counts(&[9, 4, 1, 7]).unwrap();
        let a = sample_negatives(&t, 50, 1, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_negatives(&t, 50, 1, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }
}
