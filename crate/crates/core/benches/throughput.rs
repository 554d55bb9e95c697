//! Parallel versus sequential throughput of the data-parallel loops.
//! With `--no-default-features` the "parallel" entries run the sequential
//! fallback, which gives the baseline for the same code path.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tasc::corpus::{count_ngrams, count_ngrams_sequential, tokenize_corpus, Side};
use tasc::drafter::{build_corpus_drafter, build_prompt_drafter, MixedDrafter};
use tasc::specdec::{generate, generate_batch, DecodeConfig, NGramTarget};
use tasc::{TaskCorpus, TokenId, Vocabulary};

fn sequences(count: usize, len: usize) -> Vec<Vec<TokenId>> {
    let mut r = ChaCha8Rng::seed_from_u64(1);
    (0..count)
        .map(|_| (0..len).map(|_| r.gen_range(0..64)).collect())
        .collect()
}

fn corpus(docs: usize) -> TaskCorpus {
    let words = [
        "the",
        "court",
        "shall",
        "article",
        "regulation",
        "member",
        "state",
        "annex",
    ];
    let mut r = ChaCha8Rng::seed_from_u64(2);
    let outputs: Vec<String> = (0..docs)
        .map(|_| {
            (0..40)
                .map(|_| words[r.gen_range(0..words.len())])
                .collect::<Vec<_>>()
                .join(" ")
        })
        .collect();
    TaskCorpus::from_outputs("bench", outputs).unwrap()
}

fn ngram_counting(c: &mut Criterion) {
    let seqs = sequences(2000, 200);
    let mut g = c.benchmark_group("count_ngrams");
    g.throughput(Throughput::Elements(400_000));
    for n in [2usize, 4] {
        g.bench_with_input(BenchmarkId::new("parallel", n), &n, |b, &n| {
            b.iter(|| count_ngrams(black_box(&seqs), n))
        });
        g.bench_with_input(BenchmarkId::new("sequential", n), &n, |b, &n| {
            b.iter(|| count_ngrams_sequential(black_box(&seqs), n))
        });
    }
    g.finish();
}

fn tokenization(c: &mut Criterion) {
    let corpus = corpus(2000);
    let mut vocab = Vocabulary::bytes();
    let the = vocab.add_token(b"th".map(TokenId::from).as_slice()).unwrap();
    vocab.add_token(&[the, TokenId::from(b'e')]).unwrap();
    c.bench_function("tokenize_corpus", |b| {
        b.iter(|| tokenize_corpus(black_box(&corpus), &vocab, Side::Output).unwrap())
    });
}

fn decoding_sessions(c: &mut Criterion) {
    let data = sequences(200, 100);
    let target = NGramTarget::build(&data[..100], 5, 64).unwrap();
    let drafter = build_corpus_drafter(&data[100..], 4, 1).unwrap();
    let prompts: Vec<Vec<TokenId>> = data[100..164].iter().map(|s| s[..16].to_vec()).collect();
    let cfg = DecodeConfig {
        gamma: 8,
        max_tokens: 64,
        stop: None,
    };
    let mut g = c.benchmark_group("generate_sessions");
    g.bench_function("batch", |b| {
        b.iter(|| {
            generate_batch(&target, &prompts, &cfg, |p| {
                MixedDrafter::new(&drafter, build_prompt_drafter(p, 4)?, 0.75)
            })
            .unwrap()
        })
    });
    g.bench_function("one_by_one", |b| {
        b.iter(|| {
            prompts
                .iter()
                .map(|p| {
                    let mut d = MixedDrafter::new(&drafter, build_prompt_drafter(p, 4).unwrap(), 0.75).unwrap();
                    generate(&target, &mut d, p, &cfg).unwrap()
                })
                .collect::<Vec<_>>()
        })
    });
    g.finish();
}

criterion_group!(benches, ngram_counting, tokenization, decoding_sessions);
criterion_main!(benches);
