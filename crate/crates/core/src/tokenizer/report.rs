use serde::Serialize;

use crate::corpus::{count_ngrams, tokenize_corpus, Side, TaskCorpus};
use crate::error::{Error, Result};
use crate::metrics::{normalized_entropy, renyi_entropy, EmpiricalDistribution};

use super::Vocabulary;

/// Output-side length statistics under two vocabularies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompressionReport {
    pub documents: usize,
    pub total_bytes: u64,
    pub tokens_before: u64,
    pub tokens_after: u64,
    pub avg_len_before: f64,
    pub avg_len_after: f64,
    /// `avg_len_before / avg_len_after`.
    pub compression_ratio: f64,
    pub bytes_per_token_before: f64,
    pub bytes_per_token_after: f64,
}

pub fn compression_report(corpus: &TaskCorpus, before: &Vocabulary, after: &Vocabulary) -> Result<CompressionReport> {
    let count = |v: &Vocabulary| -> Result<u64> {
        Ok(tokenize_corpus(corpus, v, Side::Output)?
            .iter()
            .map(|s| s.len() as u64)
            .sum())
    };
    let tokens_before = count(before)?;
    let tokens_after = if before == after { tokens_before } else { count(after)? };
    let total_bytes: u64 = corpus.texts(Side::Output).map(|t| t.len() as u64).sum();
    let docs = corpus.len() as f64;
    Ok(CompressionReport {
        documents: corpus.len(),
        total_bytes,
        tokens_before,
        tokens_after,
        avg_len_before: tokens_before as f64 / docs,
        avg_len_after: tokens_after as f64 / docs,
        compression_ratio: tokens_before as f64 / tokens_after as f64,
        bytes_per_token_before: total_bytes as f64 / tokens_before as f64,
        bytes_per_token_after: total_bytes as f64 / tokens_after as f64,
    })
}

/// One budget of a prefix-truncation sweep over an enriched vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    #[serde(rename = "M")]
    pub budget: usize,
    pub added: usize,
    pub avg_len: f64,
    pub bytes_per_token: f64,
    /// Unigram token entropy divided by `log2` of the vocabulary size.
    pub normalized_entropy: f64,
    pub h2: f64,
}

/// Output-side statistics of `corpus` under the vocabulary truncated to
/// each budget. Budgets past the number of added tokens use them all.
pub fn budget_sweep(corpus: &TaskCorpus, vocab: &Vocabulary, budgets: &[usize]) -> Result<Vec<SweepRow>> {
    let total_bytes: u64 = corpus.texts(Side::Output).map(|t| t.len() as u64).sum();
    budgets
        .iter()
        .map(|&budget| {
            let v = vocab.truncated(budget);
            let seqs = tokenize_corpus(corpus, &v, Side::Output)?;
            let counts = count_ngrams(&seqs, 1);
            if counts.total() == 0 {
                return Err(Error::EmptyCorpus);
            }
            let dist = EmpiricalDistribution::from_counts(counts.iter().map(|(g, c)| (g[0], c)))?;
            Ok(SweepRow {
                budget,
                added: v.added_tokens().len(),
                avg_len: counts.total() as f64 / corpus.len() as f64,
                bytes_per_token: total_bytes as f64 / counts.total() as f64,
                normalized_entropy: normalized_entropy(&dist, v.size())?,
                h2: renyi_entropy(&dist, 2.0)?,
            })
        })
        .collect()
}
