//! Greedy vocabulary enrichment with a prefix-collision gate.
//!
//! Each iteration counts token n-grams of orders `2..=n_max` over the output
//! side of the corpus, takes the unused n-gram with the largest merge reward
//! `freq * (n - 1)`, and adds it as a token unless its final token's string
//! collides too often with longer tokens (the prefix collision score). The
//! candidate is marked as used either way.

use std::cmp::Ordering;
use std::collections::HashSet;

use serde::Serialize;

use crate::corpus::{count_ngrams, tokenize_corpus, NGramCounts, Side, TaskCorpus, TokenId};
use crate::error::{Error, Result};
use crate::par;

use super::{apply_merge, Vocabulary};

pub const DEFAULT_PCS_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AugmentationConfig {
    /// Number of tokens to add.
    pub budget: usize,
    pub n_max: usize,
    /// Candidates are accepted only when their PCS is strictly below this.
    pub pcs_threshold: f64,
    /// Recount n-grams after this many acceptances; 1 recounts every time.
    pub recount_interval: usize,
}

impl Default for AugmentationConfig {
    fn default() -> Self {
        Self {
            budget: 1000,
            n_max: 4,
            pcs_threshold: DEFAULT_PCS_THRESHOLD,
            recount_interval: 1,
        }
    }
}

impl AugmentationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.budget == 0 {
            return Err(Error::param("budget", "must be at least 1"));
        }
        if self.n_max < 2 {
            return Err(Error::param("n_max", "must be at least 2"));
        }
        if !(0.0..=1.0).contains(&self.pcs_threshold) {
            return Err(Error::param("pcs_threshold", "must lie in [0, 1]"));
        }
        if self.recount_interval == 0 {
            return Err(Error::param("recount_interval", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MergeCandidate {
    pub ngram: Vec<TokenId>,
    pub freq: u64,
    pub reward: u64,
    pub pcs: f64,
}

#[derive(Debug, Clone)]
pub struct EnrichmentOutcome {
    pub vocab: Vocabulary,
    pub accepted: Vec<MergeCandidate>,
    pub rejected: Vec<MergeCandidate>,
    /// The loop ran out of unused candidates before reaching the budget.
    pub exhausted: bool,
    /// Total output tokens over the corpus: entry `i` is the count after
    /// the first `i` accepted merges.
    pub total_tokens: Vec<u64>,
}

/// `freq(ngram) * (n - 1)`; zero for unseen n-grams.
pub fn merge_reward(ngram: &[TokenId], counts: &NGramCounts) -> Result<u64> {
    if ngram.len() != counts.order() {
        return Err(Error::ArityMismatch {
            expected: counts.order(),
            got: ngram.len(),
        });
    }
    Ok(counts.get(ngram) * (ngram.len() as u64).saturating_sub(1))
}

/// Frequency-weighted share of tokens whose string properly extends the
/// string of the n-gram's final token, among all tokens whose string starts
/// with it. Zero when no such token occurs.
pub fn prefix_collision_score(ngram: &[TokenId], vocab: &Vocabulary, token_freqs: &NGramCounts) -> f64 {
    debug_assert_eq!(token_freqs.order(), 1);
    let Some(&last) = ngram.last() else { return 0.0 };
    let Some(suffix) = vocab.token_bytes(last) else {
        return 0.0;
    };
    let mut colliding = 0u64;
    let mut sharing = 0u64;
    for (tok, freq) in token_freqs.iter() {
        let Some(s) = vocab.token_bytes(tok[0]) else { continue };
        if s.starts_with(suffix) {
            sharing += freq;
            if tok[0] != last && s.len() > suffix.len() {
                colliding += freq;
            }
        }
    }
    if sharing == 0 {
        0.0
    } else {
        colliding as f64 / sharing as f64
    }
}

/// Higher reward first, then longer n-grams, then lexicographic ids.
fn candidate_order(a: &(Vec<TokenId>, u64), b: &(Vec<TokenId>, u64)) -> Ordering {
    let reward = |(g, f): &(Vec<TokenId>, u64)| f * (g.len() as u64 - 1);
    reward(b)
        .cmp(&reward(a))
        .then(b.0.len().cmp(&a.0.len()))
        .then_with(|| a.0.cmp(&b.0))
}

struct Ranking {
    candidates: Vec<(Vec<TokenId>, u64)>,
    unigrams: NGramCounts,
}

fn rank(seqs: &[Vec<TokenId>], n_max: usize) -> Ranking {
    let mut candidates = Vec::new();
    for n in 2..=n_max {
        let counts = count_ngrams(seqs, n);
        candidates.extend(counts.iter().map(|(g, f)| (g.to_vec(), f)));
    }
    candidates.sort_unstable_by(candidate_order);
    Ranking {
        candidates,
        unigrams: count_ngrams(seqs, 1),
    }
}

fn total_len(seqs: &[Vec<TokenId>]) -> u64 {
    seqs.iter().map(|s| s.len() as u64).sum()
}

/// Adds up to `config.budget` n-gram tokens to `base`, chosen from the
/// output side of `corpus`.
pub fn enrich_vocabulary(
    corpus: &TaskCorpus,
    base: &Vocabulary,
    config: &AugmentationConfig,
) -> Result<EnrichmentOutcome> {
    config.validate()?;
    let mut vocab = base.clone();
    let mut seqs = tokenize_corpus(corpus, &vocab, Side::Output)?;
    if seqs.iter().all(|s| s.len() < 2) {
        return Err(Error::NoCandidates);
    }

    let mut used: HashSet<Vec<TokenId>> = HashSet::new();
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    let mut total_tokens = vec![total_len(&seqs)];
    let mut exhausted = false;

    let mut ranking = rank(&seqs, config.n_max);
    let mut cursor = 0;
    let mut since_recount = 0;

    while accepted.len() < config.budget {
        if since_recount >= config.recount_interval {
            ranking = rank(&seqs, config.n_max);
            cursor = 0;
            since_recount = 0;
        }
        while cursor < ranking.candidates.len() && used.contains(&ranking.candidates[cursor].0) {
            cursor += 1;
        }
        if cursor == ranking.candidates.len() {
            if since_recount > 0 {
                // Stale counts; a fresh count may surface new candidates.
                since_recount = config.recount_interval;
                continue;
            }
            exhausted = true;
            break;
        }
        let (ngram, freq) = ranking.candidates[cursor].clone();
        cursor += 1;

        let pcs = prefix_collision_score(&ngram, &vocab, &ranking.unigrams);
        used.insert(ngram.clone());
        let candidate = MergeCandidate {
            reward: freq * (ngram.len() as u64 - 1),
            ngram,
            freq,
            pcs,
        };
        if pcs < config.pcs_threshold {
            let id = vocab.add_token(&candidate.ngram)?;
            let pattern = candidate.ngram.as_slice();
            par::for_each_mut(&mut seqs, |s| {
                apply_merge(s, pattern, id);
            });
            total_tokens.push(total_len(&seqs));
            accepted.push(candidate);
            since_recount += 1;
        } else {
            rejected.push(candidate);
        }
    }

    Ok(EnrichmentOutcome {
        vocab,
        accepted,
        rejected,
        exhausted,
        total_tokens,
    })
}
