use rand::Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::Distribution;

use crate::corpus::{Vocabulary, WordId};
use crate::error::{Error, Result};

/// Draws ids with probability proportional to `count^power`.
#[derive(Debug, Clone)]
pub struct NoiseSampler {
    probs: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
}

impl NoiseSampler {
    pub fn new(vocab: &Vocabulary, power: f64) -> Result<Self> {
        Self::from_counts(vocab.counts(), power)
    }

    pub fn from_counts(counts: &[u64], power: f64) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        let weights: Vec<f64> = counts
            .iter()
            .map(|&c| if c == 0 { 0.0 } else { (c as f64).powf(power) })
            .collect();
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::Domain(format!("noise weights sum to {total}")));
        }
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let alias = WeightedAliasIndex::new(probs.clone())
            .map_err(|e| Error::Domain(format!("noise sampler: {e}")))?;
        Ok(NoiseSampler { probs, alias })
    }

    pub fn probability(&self, id: WordId) -> f64 {
        self.probs[id as usize]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> WordId {
        self.alias.sample(rng) as WordId
    }
}
