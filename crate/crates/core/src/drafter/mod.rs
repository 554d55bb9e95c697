//! Training-free n-gram draft models.
//!
//! A drafter is a stack of count tables `M_2 ..= M_{n_max}` keyed by the
//! previous `n - 1` tokens. A query walks the stack from the highest order
//! down and answers with the normalized next-token counts of the first
//! table whose context matches; when none does, it answers with a point
//! mass on the fallback token. There is no smoothing or interpolation.
//!
//! The corpus drafter is built once from the task outputs and pruned; the
//! prompt drafter is built from the current context and may be refreshed
//! with accepted tokens as generation proceeds. [`MixedDrafter`] blends the
//! two with weight `lambda` on the corpus side.

mod file;

use std::collections::{BTreeMap, HashMap};

use crate::corpus::{count_ngrams, TokenId};
use crate::error::{Error, Result};
use crate::metrics::EmpiricalDistribution;

pub use file::NGRAM_FORMAT;

pub const DEFAULT_LAMBDA: f64 = 0.75;
pub const DEFAULT_P_MIN: u64 = 5;
pub const DEFAULT_GAMMA: usize = 8;

/// One order of the backoff stack: context of `order - 1` tokens to
/// next-token counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramModel {
    order: usize,
    pruned_below: u64,
    table: HashMap<Vec<TokenId>, BTreeMap<TokenId, u64>>,
}

impl NGramModel {
    pub fn build<S: AsRef<[TokenId]> + Sync>(sequences: &[S], order: usize, p_min: u64) -> Self {
        assert!(order >= 2, "n-gram model order must be at least 2");
        let counts = count_ngrams(sequences, order);
        let mut table: HashMap<Vec<TokenId>, BTreeMap<TokenId, u64>> = HashMap::new();
        for (gram, c) in counts.iter() {
            if c < p_min {
                continue;
            }
            let (ctx, next) = gram.split_at(order - 1);
            table.entry(ctx.to_vec()).or_default().insert(next[0], c);
        }
        Self {
            order,
            pruned_below: p_min,
            table,
        }
    }

    pub(crate) fn from_table(
        order: usize,
        pruned_below: u64,
        table: HashMap<Vec<TokenId>, BTreeMap<TokenId, u64>>,
    ) -> Self {
        Self {
            order,
            pruned_below,
            table,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn pruned_below(&self) -> u64 {
        self.pruned_below
    }

    pub fn next_counts(&self, context: &[TokenId]) -> Option<&BTreeMap<TokenId, u64>> {
        self.table.get(context)
    }

    pub fn contexts(&self) -> usize {
        self.table.len()
    }

    /// Number of `(context, next)` entries.
    pub fn entries(&self) -> usize {
        self.table.values().map(BTreeMap::len).sum()
    }

    /// Entries as `(context, next, count)` in lexicographic order.
    pub fn sorted_entries(&self) -> Vec<(&[TokenId], TokenId, u64)> {
        let mut ctxs: Vec<&Vec<TokenId>> = self.table.keys().collect();
        ctxs.sort_unstable();
        ctxs.into_iter()
            .flat_map(|ctx| self.table[ctx].iter().map(move |(&t, &c)| (ctx.as_slice(), t, c)))
            .collect()
    }

    fn increment(&mut self, context: &[TokenId], next: TokenId) {
        match self.table.get_mut(context) {
            Some(m) => *m.entry(next).or_insert(0) += 1,
            None => {
                self.table.insert(context.to_vec(), BTreeMap::from([(next, 1)]));
            }
        }
    }
}

fn normalize(counts: &BTreeMap<TokenId, u64>) -> EmpiricalDistribution<TokenId> {
    let total: u64 = counts.values().sum();
    let total = total as f64;
    EmpiricalDistribution::from_sorted_unchecked(counts.iter().map(|(&t, &c)| (t, c as f64 / total)).collect())
}

/// Backoff stack shared by the corpus and prompt drafters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BackoffTables {
    n_max: usize,
    models: Vec<NGramModel>,
    fallback: TokenId,
}

impl BackoffTables {
    fn build<S: AsRef<[TokenId]> + Sync>(sequences: &[S], n_max: usize, p_min: u64, fallback: TokenId) -> Self {
        let models = (2..=n_max).map(|n| NGramModel::build(sequences, n, p_min)).collect();
        Self {
            n_max,
            models,
            fallback,
        }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    /// Models in ascending order, starting at order 2.
    pub fn models(&self) -> &[NGramModel] {
        &self.models
    }

    pub fn fallback(&self) -> TokenId {
        self.fallback
    }

    /// Next-token counts of the highest matching order, with that order.
    pub fn matched(&self, context: &[TokenId]) -> Option<(usize, &BTreeMap<TokenId, u64>)> {
        self.models.iter().rev().find_map(|m| {
            let k = m.order - 1;
            if context.len() < k {
                return None;
            }
            m.next_counts(&context[context.len() - k..]).map(|c| (m.order, c))
        })
    }

    pub fn distribution(&self, context: &[TokenId]) -> EmpiricalDistribution<TokenId> {
        match self.matched(context) {
            Some((_, counts)) => normalize(counts),
            None => EmpiricalDistribution::point_mass(self.fallback),
        }
    }
}

fn unigram_argmax<S: AsRef<[TokenId]>>(sequences: &[S]) -> Option<TokenId> {
    let mut counts: HashMap<TokenId, u64> = HashMap::new();
    for s in sequences {
        for &t in s.as_ref() {
            *counts.entry(t).or_insert(0) += 1;
        }
    }
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(t, _)| t)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusDrafter {
    tables: BackoffTables,
    p_min: u64,
    vocab_size: u32,
}

impl CorpusDrafter {
    pub fn tables(&self) -> &BackoffTables {
        &self.tables
    }

    pub fn p_min(&self) -> u64 {
        self.p_min
    }

    pub fn n_max(&self) -> usize {
        self.tables.n_max
    }

    pub fn fallback(&self) -> TokenId {
        self.tables.fallback
    }

    /// Vocabulary size recorded with the tables (at least one past the
    /// largest id seen).
    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn with_vocab_size(mut self, vocab_size: u32) -> Self {
        self.vocab_size = self.vocab_size.max(vocab_size);
        self
    }

    pub fn distribution(&self, context: &[TokenId]) -> EmpiricalDistribution<TokenId> {
        self.tables.distribution(context)
    }
}

/// Builds the corpus drafter: orders `2..=n_max`, entries seen fewer than
/// `p_min` times dropped, fallback on the most frequent token (lowest id
/// on ties).
pub fn build_corpus_drafter<S: AsRef<[TokenId]> + Sync>(
    sequences: &[S],
    n_max: usize,
    p_min: u64,
) -> Result<CorpusDrafter> {
    if n_max < 2 {
        return Err(Error::param("n_max", "must be at least 2"));
    }
    if p_min < 1 {
        return Err(Error::param("p_min", "must be at least 1"));
    }
    let fallback = unigram_argmax(sequences).ok_or(Error::EmptyCorpus)?;
    let max_id = sequences
        .iter()
        .flat_map(|s| s.as_ref().iter().copied())
        .max()
        .unwrap_or(0);
    Ok(CorpusDrafter {
        tables: BackoffTables::build(sequences, n_max, p_min, fallback),
        p_min,
        vocab_size: max_id.saturating_add(1),
    })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptDrafter {
    tables: BackoffTables,
    history: Vec<TokenId>,
    unigrams: HashMap<TokenId, u64>,
    refresh: bool,
}

impl PromptDrafter {
    pub fn tables(&self) -> &BackoffTables {
        &self.tables
    }

    /// Built from an empty prompt and never refreshed since.
    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn history(&self) -> &[TokenId] {
        &self.history
    }

    pub fn refresh_enabled(&self) -> bool {
        self.refresh
    }

    pub fn with_refresh(mut self, enabled: bool) -> Self {
        self.refresh = enabled;
        self
    }

    pub fn distribution(&self, context: &[TokenId]) -> EmpiricalDistribution<TokenId> {
        self.tables.distribution(context)
    }

    /// Extends the tables as if rebuilt from `prompt ++ accepted`.
    pub fn refresh(&mut self, accepted: &[TokenId]) {
        for &t in accepted {
            for m in &mut self.tables.models {
                let k = m.order - 1;
                if self.history.len() >= k {
                    let ctx = &self.history[self.history.len() - k..];
                    m.increment(ctx, t);
                }
            }
            let c = self.unigrams.entry(t).or_insert(0);
            *c += 1;
            let c = *c;
            let best = if self.history.is_empty() {
                t
            } else {
                let fb = self.tables.fallback;
                let fc = self.unigrams.get(&fb).copied().unwrap_or(0);
                if c > fc || (c == fc && t < fb) {
                    t
                } else {
                    fb
                }
            };
            self.tables.fallback = best;
            self.history.push(t);
        }
    }
}

/// Builds the prompt drafter from one sequence with no pruning. An empty
/// prompt yields empty tables with fallback token 0 and `is_empty()` set.
pub fn build_prompt_drafter(prompt: &[TokenId], n_max: usize) -> Result<PromptDrafter> {
    if n_max < 2 {
        return Err(Error::param("n_max", "must be at least 2"));
    }
    let seqs = [prompt];
    let fallback = unigram_argmax(&seqs).unwrap_or(0);
    let mut unigrams = HashMap::new();
    for &t in prompt {
        *unigrams.entry(t).or_insert(0) += 1;
    }
    Ok(PromptDrafter {
        tables: BackoffTables::build(&seqs, n_max, 1, fallback),
        history: prompt.to_vec(),
        unigrams,
        refresh: true,
    })
}

/// `refresh_prompt_drafter(d, accepted)` is `d` refreshed with `accepted`.
pub fn refresh_prompt_drafter(mut drafter: PromptDrafter, accepted: &[TokenId]) -> PromptDrafter {
    drafter.refresh(accepted);
    drafter
}

/// `lambda * p_corpus + (1 - lambda) * p_prompt` over a shared corpus
/// drafter and a per-session prompt drafter.
#[derive(Debug, Clone)]
pub struct MixedDrafter<'a> {
    corpus: &'a CorpusDrafter,
    prompt: PromptDrafter,
    lambda: f64,
}

impl<'a> MixedDrafter<'a> {
    pub fn new(corpus: &'a CorpusDrafter, prompt: PromptDrafter, lambda: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::param("lambda", format!("must lie in [0, 1], got {lambda}")));
        }
        Ok(Self { corpus, prompt, lambda })
    }

    pub fn corpus(&self) -> &CorpusDrafter {
        self.corpus
    }

    pub fn prompt(&self) -> &PromptDrafter {
        &self.prompt
    }

    pub fn prompt_mut(&mut self) -> &mut PromptDrafter {
        &mut self.prompt
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn distribution(&self, context: &[TokenId]) -> EmpiricalDistribution<TokenId> {
        mixed_distribution(self, context)
    }

    pub fn draft(&self, context: &[TokenId], gamma: usize) -> Vec<TokenId> {
        draft(self, context, gamma)
    }
}

/// Pointwise mixture of two sorted supports. Components with weight zero
/// are skipped so `lambda = 1` reproduces the corpus support exactly.
fn mix(
    a: &EmpiricalDistribution<TokenId>,
    wa: f64,
    b: &EmpiricalDistribution<TokenId>,
    wb: f64,
) -> EmpiricalDistribution<TokenId> {
    let mut out: Vec<(TokenId, f64)> = Vec::with_capacity(a.len() + b.len());
    let mut ia = a.iter().filter(|_| wa > 0.0).peekable();
    let mut ib = b.iter().filter(|_| wb > 0.0).peekable();
    loop {
        let next = match (ia.peek(), ib.peek()) {
            (Some(&(ka, pa)), Some(&(kb, pb))) => {
                if ka < kb {
                    ia.next();
                    (*ka, wa * pa)
                } else if kb < ka {
                    ib.next();
                    (*kb, wb * pb)
                } else {
                    ia.next();
                    ib.next();
                    (*ka, wa * pa + wb * pb)
                }
            }
            (Some(&(ka, pa)), None) => {
                ia.next();
                (*ka, wa * pa)
            }
            (None, Some(&(kb, pb))) => {
                ib.next();
                (*kb, wb * pb)
            }
            (None, None) => break,
        };
        out.push(next);
    }
    EmpiricalDistribution::from_sorted_unchecked(out)
}

pub fn mixed_distribution(mixed: &MixedDrafter<'_>, context: &[TokenId]) -> EmpiricalDistribution<TokenId> {
    let corpus = mixed.corpus.distribution(context);
    let prompt = mixed.prompt.distribution(context);
    mix(&corpus, mixed.lambda, &prompt, 1.0 - mixed.lambda)
}

/// Greedy `gamma`-token draft: repeatedly take the argmax (lowest id on
/// ties) of the mixed distribution and append it to the working context.
/// The prompt drafter is not refreshed while drafting.
pub fn draft(mixed: &MixedDrafter<'_>, context: &[TokenId], gamma: usize) -> Vec<TokenId> {
    let mut work = context.to_vec();
    let mut out = Vec::with_capacity(gamma);
    for _ in 0..gamma {
        let dist = mixed_distribution(mixed, &work);
        let next = *dist.argmax().expect("drafter distributions are never empty");
        out.push(next);
        work.push(next);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_drafter_prunes() {
        let d = build_corpus_drafter(&[vec![1, 2, 3, 1, 2, 3]], 2, 2).unwrap();
        let m = &d.tables().models()[0];
        assert_eq!(m.next_counts(&[1]), Some(&BTreeMap::from([(2, 2)])));
        assert_eq!(m.next_counts(&[2]), Some(&BTreeMap::from([(3, 2)])));
        assert_eq!(m.next_counts(&[3]), None);
        assert_eq!(d.fallback(), 1);
    }

    #[test]
    fn p_min_one_prunes_nothing() {
        let d = build_corpus_drafter(&[vec![1, 2, 3, 1, 2, 3]], 2, 1).unwrap();
        assert_eq!(d.tables().models()[0].entries(), 3);
    }

    #[test]
    fn length_one_sequences() {
        let d = build_corpus_drafter(&[vec![4], vec![2], vec![4]], 3, 1).unwrap();
        assert!(d.tables().models().iter().all(|m| m.entries() == 0));
        assert_eq!(d.fallback(), 4);
        assert_eq!(d.distribution(&[4]), EmpiricalDistribution::point_mass(4));
    }

    #[test]
    fn empty_corpus_is_an_error() {
        assert!(matches!(
            build_corpus_drafter::<Vec<u32>>(&[], 2, 1),
            Err(Error::EmptyCorpus)
        ));
        assert!(matches!(
            build_corpus_drafter(&[Vec::<u32>::new()], 2, 1),
            Err(Error::EmptyCorpus)
        ));
        assert!(build_corpus_drafter(&[vec![1]], 1, 1).is_err());
        assert!(build_corpus_drafter(&[vec![1]], 2, 0).is_err());
    }

    #[test]
    fn uniform_over_tied_continuations() {
        let d = build_corpus_drafter(&[vec![1, 2, 1, 3, 1, 2, 1, 3]], 2, 1).unwrap();
        let dist = d.distribution(&[9, 1]);
        assert_eq!(dist.into_inner(), vec![(2, 0.5), (3, 0.5)]);
    }

    #[test]
    fn higher_order_takes_precedence() {
        // bigram (2)->{3:1, 4:2}, trigram (1,2)->{3:1}
        let d = build_corpus_drafter(&[vec![1, 2, 3], vec![5, 2, 4], vec![6, 2, 4]], 3, 1).unwrap();
        assert_eq!(d.distribution(&[1, 2]), EmpiricalDistribution::point_mass(3));
        assert_eq!(d.distribution(&[7, 2]).argmax(), Some(&4));
    }

    #[test]
    fn prompt_drafter_tables() {
        let p = build_prompt_drafter(&[5, 6, 5, 6], 2).unwrap();
        let m = &p.tables().models()[0];
        assert_eq!(m.next_counts(&[5]), Some(&BTreeMap::from([(6, 2)])));
        assert_eq!(m.next_counts(&[6]), Some(&BTreeMap::from([(5, 1)])));
        assert!(!p.is_empty());
    }

    #[test]
    fn empty_prompt_is_flagged() {
        let p = build_prompt_drafter(&[], 3).unwrap();
        assert!(p.is_empty());
        assert_eq!(p.tables().fallback(), 0);
    }

    #[test]
    fn refresh_adds_bigram() {
        let p = build_prompt_drafter(&[1, 2], 2).unwrap();
        let unchanged = refresh_prompt_drafter(p.clone(), &[]);
        assert_eq!(unchanged, p);
        let p = refresh_prompt_drafter(p, &[7]);
        assert_eq!(
            p.tables().models()[0].next_counts(&[2]),
            Some(&BTreeMap::from([(7, 1)]))
        );
    }

    #[test]
    fn mixture_weights() {
        let corpus = build_corpus_drafter(&[vec![1, 10]], 2, 1).unwrap();
        let prompt = build_prompt_drafter(&[1, 20], 2).unwrap();
        let m = MixedDrafter::new(&corpus, prompt.clone(), 0.75).unwrap();
        assert_eq!(m.distribution(&[1]).into_inner(), vec![(10, 0.75), (20, 0.25)]);
        let m = MixedDrafter::new(&corpus, prompt.clone(), 1.0).unwrap();
        assert_eq!(m.distribution(&[1]), corpus.distribution(&[1]));
        let m = MixedDrafter::new(&corpus, prompt.clone(), 0.0).unwrap();
        assert_eq!(m.distribution(&[1]), prompt.distribution(&[1]));
        assert!(MixedDrafter::new(&corpus, prompt, 1.5).is_err());
    }

    #[test]
    fn draft_follows_chain() {
        let corpus = build_corpus_drafter(&[vec![1, 2, 3]], 2, 1).unwrap();
        let prompt = build_prompt_drafter(&[], 2).unwrap();
        let m = MixedDrafter::new(&corpus, prompt, 1.0).unwrap();
        assert_eq!(m.draft(&[1], 2), vec![2, 3]);
        assert_eq!(m.draft(&[1], 1), vec![*m.distribution(&[1]).argmax().unwrap()]);
    }
}
