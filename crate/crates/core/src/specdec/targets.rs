//! Reference targets: a high-order n-gram model and a seeded random-logit
//! model. Both are deterministic functions of the context.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::TokenId;
use crate::drafter::{build_corpus_drafter, CorpusDrafter};
use crate::error::{Error, Result};
use crate::metrics::EmpiricalDistribution;

use super::TargetModel;

/// Backoff n-gram model over a held-out corpus, used as a stand-in target.
#[derive(Debug, Clone)]
pub struct NGramTarget {
    model: CorpusDrafter,
    vocab_size: usize,
}

impl NGramTarget {
    pub fn build<S: AsRef<[TokenId]> + Sync>(sequences: &[S], order: usize, vocab_size: usize) -> Result<Self> {
        let model = build_corpus_drafter(sequences, order, 1)?;
        if model.vocab_size() as usize > vocab_size {
            return Err(Error::param(
                "vocab_size",
                format!(
                    "corpus uses id {} but vocab_size is {vocab_size}",
                    model.vocab_size() - 1
                ),
            ));
        }
        Ok(Self { model, vocab_size })
    }

    pub fn order(&self) -> usize {
        self.model.n_max()
    }
}

impl TargetModel for NGramTarget {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<EmpiricalDistribution<TokenId>> {
        Ok(self.model.distribution(context))
    }
}

/// Softmax over pseudo-random logits keyed by the last `window` tokens of
/// the context and a seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RandomLogitTarget {
    vocab_size: usize,
    window: usize,
    seed: u64,
    scale: f64,
}

impl RandomLogitTarget {
    pub fn new(vocab_size: usize, window: usize, seed: u64) -> Result<Self> {
        if vocab_size == 0 || vocab_size > TokenId::MAX as usize {
            return Err(Error::param("vocab_size", "must be between 1 and 2^32 - 1"));
        }
        Ok(Self {
            vocab_size,
            window,
            seed,
            scale: 4.0,
        })
    }

    /// Logits are drawn uniformly from `[0, scale)`.
    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale >= 0.0) {
            return Err(Error::param("scale", "must be finite and non-negative"));
        }
        self.scale = scale;
        Ok(self)
    }

    fn key(&self, context: &[TokenId]) -> u64 {
        // FNV-1a over the window, with its length mixed in so short
        // contexts do not alias padded ones.
        let tail = &context[context.len().saturating_sub(self.window)..];
        let mut h: u64 = 0xcbf2_9ce4_8422_2325 ^ self.seed;
        for byte in (tail.len() as u32)
            .to_le_bytes()
            .into_iter()
            .chain(tail.iter().flat_map(|t| t.to_le_bytes()))
        {
            h ^= u64::from(byte);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        h
    }

    pub fn logits(&self, context: &[TokenId]) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.key(context));
        (0..self.vocab_size).map(|_| rng.gen::<f64>() * self.scale).collect()
    }
}

impl TargetModel for RandomLogitTarget {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<EmpiricalDistribution<TokenId>> {
        let logits = self.logits(context);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let exp: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
        let z: f64 = exp.iter().sum();
        EmpiricalDistribution::new(exp.into_iter().enumerate().map(|(i, e)| (i as TokenId, e / z)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_target_is_deterministic() {
        let t = RandomLogitTarget::new(50, 2, 7).unwrap();
        let a = t.next_distribution(&[1, 2, 3]).unwrap();
        assert_eq!(a, t.next_distribution(&[9, 2, 3]).unwrap());
        assert_ne!(a, t.next_distribution(&[1, 3, 2]).unwrap());
        assert_ne!(
            a,
            RandomLogitTarget::new(50, 2, 8)
                .unwrap()
                .next_distribution(&[2, 3])
                .unwrap()
        );
        let sum: f64 = a.probabilities().sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ngram_target_follows_corpus() {
        let t = NGramTarget::build(&[vec![1, 2, 3, 4], vec![1, 2, 3, 4]], 3, 5).unwrap();
        assert_eq!(t.greedy(&[2, 3]).unwrap(), 4);
        assert!(NGramTarget::build(&[vec![1, 9]], 2, 5).is_err());
    }
}
