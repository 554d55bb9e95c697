mod common;

use std::collections::BTreeMap;

use proptest::prelude::*;
use tasc::corpus::{count_ngrams, count_ngrams_sequential, tokenize_corpus, CorpusFormat, Side};
use tasc::tokenizer::{enrich_vocabulary, init_embeddings, AugmentationConfig, BaseTokenizer, EmbeddingMatrix};
use tasc::{Document, TaskCorpus, TokenId, Vocabulary};

use common::{brute_enrich, brute_ngrams};

fn small_texts() -> impl Strategy<Value = Vec<String>> {
    prop::collection::vec("[a-f]{0,30}", 1..6)
}

fn as_map(counts: &tasc::NGramCounts) -> BTreeMap<Vec<TokenId>, u64> {
    counts.iter().map(|(g, c)| (g.to_vec(), c)).collect()
}

proptest! {
    #[test]
    fn ngram_counts_match_brute_force(
        seqs in prop::collection::vec(prop::collection::vec(0u32..6, 0..40), 0..8),
        n in 1usize..5,
    ) {
        let expected = brute_ngrams(&seqs, n);
        let par = count_ngrams(&seqs, n);
        prop_assert_eq!(as_map(&par), expected.clone());
        prop_assert_eq!(as_map(&count_ngrams_sequential(&seqs, n)), expected);
        prop_assert_eq!(par.total(), seqs.iter().map(|s| s.len().saturating_sub(n - 1) as u64).sum::<u64>());
    }

    #[test]
    fn enrichment_matches_oracle(texts in small_texts(), budget in 1usize..6, n_max in 2usize..5, alpha in prop::sample::select(vec![0.1, 0.3, 1.0])) {
        let Ok(corpus) = TaskCorpus::from_outputs("p", texts.clone()) else { return Ok(()) };
        let config = AugmentationConfig { budget, n_max, pcs_threshold: alpha, recount_interval: 1 };
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let oracle = brute_enrich(&refs, budget, n_max, alpha);
        match enrich_vocabulary(&corpus, &Vocabulary::bytes(), &config) {
            Ok(out) => {
                let accepted: Vec<_> = out.accepted.iter().map(|c| c.ngram.clone()).collect();
                let rejected: Vec<_> = out.rejected.iter().map(|c| c.ngram.clone()).collect();
                prop_assert_eq!(accepted, oracle.accepted);
                prop_assert_eq!(rejected, oracle.rejected);
                prop_assert_eq!(out.exhausted, oracle.exhausted);
                prop_assert_eq!(tokenize_corpus(&corpus, &out.vocab, Side::Output).unwrap(), oracle.sequences);
            }
            Err(tasc::Error::NoCandidates) => prop_assert!(oracle.accepted.is_empty() && oracle.rejected.is_empty()),
            Err(e) => prop_assert!(false, "unexpected error {e}"),
        }
    }

    #[test]
    fn merges_never_lengthen(texts in small_texts(), budget in 1usize..12, interval in 1usize..4) {
        let Ok(corpus) = TaskCorpus::from_outputs("p", texts) else { return Ok(()) };
        let config = AugmentationConfig { budget, n_max: 4, pcs_threshold: 1.0, recount_interval: interval };
        let Ok(out) = enrich_vocabulary(&corpus, &Vocabulary::bytes(), &config) else { return Ok(()) };
        for (i, w) in out.total_tokens.windows(2).enumerate() {
            prop_assert!(w[1] <= w[0]);
            if interval == 1 {
                prop_assert!(w[0] - w[1] <= out.accepted[i].reward);
            }
            let retokenized: u64 = tokenize_corpus(&corpus, &out.vocab.truncated(i + 1), Side::Output)
                .unwrap().iter().map(|s| s.len() as u64).sum();
            prop_assert_eq!(retokenized, w[1]);
        }
    }

    #[test]
    fn encode_decode_round_trip(text in prop::collection::vec(any::<u8>(), 0..200), merges in prop::collection::vec(prop::collection::vec(0u32..260, 2..4), 0..8)) {
        let mut vocab = Vocabulary::bytes();
        for m in merges {
            let ok = m.iter().all(|&t| vocab.contains(t));
            if ok {
                let _ = vocab.add_token(&m);
            }
        }
        let ids = vocab.encode(&text).unwrap();
        prop_assert!(ids.len() <= text.len());
        prop_assert_eq!(vocab.decode(&ids).unwrap(), text);
    }

    #[test]
    fn whitespace_base_round_trip(texts in prop::collection::vec("[a-c ]{0,20}", 1..5), probe in "[a-d \n]{0,40}") {
        let base = BaseTokenizer::whitespace_from_texts(texts.iter().map(|t| t.as_bytes()), 1);
        let vocab = Vocabulary::new(base);
        let ids = vocab.encode(probe.as_bytes()).unwrap();
        prop_assert_eq!(vocab.decode(&ids).unwrap(), probe.as_bytes());
    }

    #[test]
    fn jsonl_corpus_round_trip(docs in prop::collection::vec(("[ -~]{0,20}", "[ -~]{1,20}"), 1..10)) {
        let mut text = String::new();
        for (i, o) in &docs {
            text.push_str(&serde_json::json!({"input": i, "output": o}).to_string());
            text.push('\n');
        }
        let c = TaskCorpus::from_reader("r", text.as_bytes(), CorpusFormat::TascV1).unwrap();
        let expected: Vec<Document> = docs.iter().map(|(i, o)| Document::new(i.clone(), o.clone())).collect();
        prop_assert_eq!(c.documents(), expected.as_slice());
    }
}

#[test]
fn embeddings_are_recursive_means() {
    let dim = 3;
    let data: Vec<f64> = (0..256 * dim).map(|i| (i % 17) as f64 - 8.0).collect();
    let emb = EmbeddingMatrix::new(256, dim, data).unwrap();
    let mut vocab = Vocabulary::bytes();
    let ab = vocab.add_token(&[97, 98]).unwrap();
    let abc = vocab.add_token(&[ab, 99]).unwrap();
    let out = init_embeddings(&emb, &vocab).unwrap();
    let mean = |rows: &[Vec<f64>]| -> Vec<f64> {
        (0..dim)
            .map(|d| rows.iter().map(|r| r[d]).sum::<f64>() / rows.len() as f64)
            .collect()
    };
    let e_ab = mean(&[emb.row(97).to_vec(), emb.row(98).to_vec()]);
    let e_abc = mean(&[e_ab.clone(), emb.row(99).to_vec()]);
    assert_eq!(out.row(ab as usize), e_ab.as_slice());
    assert_eq!(out.row(abc as usize), e_abc.as_slice());
    assert_eq!(out.row(5), emb.row(5));
}

#[test]
fn vocabulary_json_round_trip_with_bpe_base() {
    let base = BaseTokenizer::parse_bpe(
        r#"{"t":0,"h":1,"e":2,"Ġ":3,"th":4,"the":5,"Ġt":6,"Ġthe":7}"#,
        "#version: 0.2\nt h\nth e\nĠ t\nĠt he\n",
    );
    // the last merge references a token that is not in the table
    assert!(base.is_err());
    let base = BaseTokenizer::parse_bpe(
        r#"{"t":0,"h":1,"e":2,"Ġ":3,"th":4,"the":5,"Ġt":6,"Ġthe":7}"#,
        "#version: 0.2\nt h\nth e\nĠ t\nĠ the\n",
    )
    .unwrap();
    let mut vocab = Vocabulary::new(base);
    let the = vocab.base().token_id(b"the").unwrap();
    let sp_the = vocab.base().token_id(b" the").unwrap();
    vocab.add_token(&[the, sp_the]).unwrap();
    let json = vocab.to_json();
    let back = Vocabulary::from_json(&json).unwrap();
    assert_eq!(back, vocab);
    assert_eq!(back.to_json(), json);
    assert_eq!(back.encode(b"the the").unwrap(), vec![vocab.size() as TokenId - 1]);
}
