//! Brute-force reference implementations shared by the integration tests.
//! None of these call into the code they are used to check.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tasc::TokenId;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// All windows of length `n`, counted with a plain map.
pub fn brute_ngrams(seqs: &[Vec<TokenId>], n: usize) -> BTreeMap<Vec<TokenId>, u64> {
    let mut out = BTreeMap::new();
    for s in seqs {
        if s.len() < n {
            continue;
        }
        for i in 0..=s.len() - n {
            *out.entry(s[i..i + n].to_vec()).or_insert(0) += 1;
        }
    }
    out
}

/// Left-to-right non-overlapping replacement, written independently of
/// the library's merge routine.
pub fn replace_all(seq: &[TokenId], pattern: &[TokenId], with: TokenId) -> Vec<TokenId> {
    let mut out = Vec::with_capacity(seq.len());
    let mut i = 0;
    while i < seq.len() {
        if seq.len() - i >= pattern.len() && seq[i..i + pattern.len()] == *pattern {
            out.push(with);
            i += pattern.len();
        } else {
            out.push(seq[i]);
            i += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleEnrichment {
    pub accepted: Vec<Vec<TokenId>>,
    pub rejected: Vec<Vec<TokenId>>,
    pub sequences: Vec<Vec<TokenId>>,
    pub exhausted: bool,
}

/// Greedy merge selection over byte-level sequences: full recount every
/// iteration, exhaustive argmax by (reward desc, length desc, ids asc),
/// PCS by scanning every token occurrence.
pub fn brute_enrich(texts: &[&str], budget: usize, n_max: usize, alpha: f64) -> OracleEnrichment {
    let mut seqs: Vec<Vec<TokenId>> = texts.iter().map(|t| t.bytes().map(TokenId::from).collect()).collect();
    let mut strings: HashMap<TokenId, Vec<u8>> = (0..=255u8).map(|b| (TokenId::from(b), vec![b])).collect();
    let mut next_id: TokenId = 256;
    let mut used: HashSet<Vec<TokenId>> = HashSet::new();
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    let mut exhausted = false;

    while accepted.len() < budget {
        let mut best: Option<(u64, Vec<TokenId>)> = None;
        for n in 2..=n_max {
            for (g, f) in brute_ngrams(&seqs, n) {
                if used.contains(&g) {
                    continue;
                }
                let reward = f * (n as u64 - 1);
                let better = match &best {
                    None => true,
                    Some((br, bg)) => {
                        reward > *br || (reward == *br && (g.len() > bg.len() || (g.len() == bg.len() && g < *bg)))
                    }
                };
                if better {
                    best = Some((reward, g));
                }
            }
        }
        let Some((_, g)) = best else {
            exhausted = true;
            break;
        };
        used.insert(g.clone());

        let last = &strings[g.last().unwrap()];
        let (mut colliding, mut sharing) = (0u64, 0u64);
        for s in &seqs {
            for t in s {
                let ts = &strings[t];
                if ts.starts_with(last) {
                    sharing += 1;
                    if ts.len() > last.len() {
                        colliding += 1;
                    }
                }
            }
        }
        let pcs = if sharing == 0 {
            0.0
        } else {
            colliding as f64 / sharing as f64
        };
        if pcs < alpha {
            let s: Vec<u8> = g.iter().flat_map(|t| strings[t].clone()).collect();
            strings.insert(next_id, s);
            seqs = seqs.iter().map(|q| replace_all(q, &g, next_id)).collect();
            next_id += 1;
            accepted.push(g);
        } else {
            rejected.push(g);
        }
    }
    OracleEnrichment {
        accepted,
        rejected,
        sequences: seqs,
        exhausted,
    }
}

/// Backoff lookup by scanning the raw sequences: highest order whose
/// context occurs with at least one follower kept by `p_min`.
pub fn brute_backoff(
    seqs: &[Vec<TokenId>],
    n_max: usize,
    p_min: u64,
    context: &[TokenId],
) -> Option<BTreeMap<TokenId, f64>> {
    for n in (2..=n_max).rev() {
        let k = n - 1;
        if context.len() < k {
            continue;
        }
        let ctx = &context[context.len() - k..];
        let mut counts: BTreeMap<TokenId, u64> = BTreeMap::new();
        for (g, f) in brute_ngrams(seqs, n) {
            if g[..k] == *ctx && f >= p_min {
                counts.insert(g[k], f);
            }
        }
        if !counts.is_empty() {
            let total: u64 = counts.values().sum();
            return Some(counts.into_iter().map(|(t, c)| (t, c as f64 / total as f64)).collect());
        }
    }
    None
}

pub fn brute_unigram_argmax(seqs: &[Vec<TokenId>]) -> Option<TokenId> {
    let counts = brute_ngrams(seqs, 1);
    let max = counts.values().copied().max()?;
    counts.into_iter().find(|(_, c)| *c == max).map(|(g, _)| g[0])
}

pub struct PairCounts {
    pub concordant: i64,
    pub discordant: i64,
    pub x_ties: i64,
    pub y_ties: i64,
}

pub fn brute_pairs(x: &[f64], y: &[f64]) -> PairCounts {
    let mut c = PairCounts {
        concordant: 0,
        discordant: 0,
        x_ties: 0,
        y_ties: 0,
    };
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 {
                c.x_ties += 1;
            }
            if dy == 0.0 {
                c.y_ties += 1;
            }
            if dx * dy > 0.0 {
                c.concordant += 1;
            } else if dx * dy < 0.0 {
                c.discordant += 1;
            }
        }
    }
    c
}

/// Tau-b from pair enumeration.
pub fn brute_tau_b(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as i64;
    let n0 = n * (n - 1) / 2;
    let p = brute_pairs(x, y);
    (p.concordant - p.discordant) as f64 / (((n0 - p.x_ties) as f64) * ((n0 - p.y_ties) as f64)).sqrt()
}

/// Inversion-count distribution of all permutations of `n` items, by
/// enumeration (Heap's algorithm).
pub fn enumerate_inversions(n: usize) -> Vec<u64> {
    let mut perm: Vec<usize> = (0..n).collect();
    let mut hist = vec![0u64; n * (n - 1) / 2 + 1];
    let inversions = |p: &[usize]| {
        let mut c = 0;
        for i in 0..p.len() {
            for j in i + 1..p.len() {
                if p[i] > p[j] {
                    c += 1;
                }
            }
        }
        c
    };
    hist[inversions(&perm)] += 1;
    let mut stack = vec![0usize; n];
    let mut i = 1;
    while i < n {
        if stack[i] < i {
            if i % 2 == 0 {
                perm.swap(0, i);
            } else {
                perm.swap(stack[i], i);
            }
            hist[inversions(&perm)] += 1;
            stack[i] += 1;
            i = 1;
        } else {
            stack[i] = 0;
            i += 1;
        }
    }
    hist
}

/// Documents made of phrases drawn with Zipf(s = 1) weights.
pub fn zipf_phrase_corpus(seed: u64, docs: usize, phrases_per_doc: usize) -> Vec<String> {
    const PHRASES: &[&str] = &[
        "the commission shall ",
        "in accordance with article ",
        "of the european union ",
        "member states shall ensure ",
        "this regulation shall enter into force ",
        "on the day following its publication ",
        "the council adopted ",
        "for the purposes of ",
        "annex ii ",
        "having regard to ",
        "whereas ",
        "directive ",
        "paragraph 1 ",
        "the official journal ",
        "shall apply from ",
        "customs duties ",
    ];
    let weights: Vec<f64> = (1..=PHRASES.len()).map(|k| 1.0 / k as f64).collect();
    let dist = WeightedIndex::new(&weights).unwrap();
    let mut r = rng(seed);
    (0..docs)
        .map(|_| {
            let n = r.gen_range(1..=phrases_per_doc);
            (0..n).map(|_| PHRASES[dist.sample(&mut r)]).collect::<String>()
        })
        .collect()
}

/// Token sequences over `0..vocab` generated by a sparse random Markov
/// chain, so n-gram models have something to learn.
pub fn markov_sequences(seed: u64, vocab: u32, count: usize, len: usize) -> Vec<Vec<TokenId>> {
    let mut r = rng(seed);
    let successors: Vec<[TokenId; 3]> = (0..vocab)
        .map(|_| [r.gen_range(0..vocab), r.gen_range(0..vocab), r.gen_range(0..vocab)])
        .collect();
    (0..count)
        .map(|_| {
            let mut t = r.gen_range(0..vocab);
            let mut s = Vec::with_capacity(len);
            for _ in 0..len {
                s.push(t);
                let pick = if r.gen_bool(0.7) { 0 } else { r.gen_range(0..3) };
                t = successors[t as usize][pick];
            }
            s
        })
        .collect()
}

/// Minimal k with the k largest probabilities (stable on index) summing to
/// at least `mass`.
pub fn prefix_sum_coverage(probs: &[f64], mass: f64) -> usize {
    let mut sorted = probs.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    for (i, p) in sorted.iter().enumerate() {
        acc += p;
        if acc >= mass - 1e-12 {
            return i + 1;
        }
    }
    sorted.len()
}
