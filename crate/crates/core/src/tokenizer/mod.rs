//! Vocabularies with added n-gram tokens, and the enrichment algorithm that
//! chooses them.
//!
//! An added token is defined by the ordered list of token ids it replaces.
//! Encoding runs the base tokenizer and then applies every added token as a
//! merge rule, in insertion order: each rule rewrites the current sequence
//! left to right, replacing non-overlapping occurrences of its constituents.
//! Because an added token can only be built from ids that exist before it,
//! nested tokens (`Y = (X, c)` with `X` itself added) resolve naturally, and
//! tokenizing under `V + t` is exactly "tokenize under `V`, then apply `t`".

mod base;
mod embedding;
mod enrich;
mod file;
mod report;

use std::collections::HashMap;

pub use base::{gpt2_byte_to_unicode, split_pieces, BaseKind, BaseTokenizer};
pub use embedding::{init_embeddings, EmbeddingMatrix};
pub use enrich::{
    enrich_vocabulary, merge_reward, prefix_collision_score, AugmentationConfig, EnrichmentOutcome, MergeCandidate,
    DEFAULT_PCS_THRESHOLD,
};
pub use file::VOCAB_FORMAT;
pub use report::{budget_sweep, compression_report, CompressionReport, SweepRow};

use crate::corpus::TokenId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AddedToken {
    pub id: TokenId,
    pub constituents: Vec<TokenId>,
    pub string: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    base: BaseTokenizer,
    added: Vec<AddedToken>,
    by_constituents: HashMap<Vec<TokenId>, TokenId>,
}

impl Vocabulary {
    pub fn new(base: BaseTokenizer) -> Self {
        Self {
            base,
            added: Vec::new(),
            by_constituents: HashMap::new(),
        }
    }

    /// Byte-level vocabulary: 256 tokens, id == byte value.
    pub fn bytes() -> Self {
        Self::new(BaseTokenizer::bytes())
    }

    pub fn base(&self) -> &BaseTokenizer {
        &self.base
    }

    pub fn added_tokens(&self) -> &[AddedToken] {
        &self.added
    }

    pub fn base_size(&self) -> usize {
        self.base.len()
    }

    pub fn size(&self) -> usize {
        self.base.len() + self.added.len()
    }

    pub fn contains(&self, id: TokenId) -> bool {
        (id as usize) < self.size()
    }

    pub fn token_bytes(&self, id: TokenId) -> Option<&[u8]> {
        let id = id as usize;
        let base = self.base.len();
        if id < base {
            Some(&self.base.tokens()[id])
        } else {
            self.added.get(id - base).map(|t| t.string.as_slice())
        }
    }

    pub fn added_token(&self, id: TokenId) -> Option<&AddedToken> {
        (id as usize)
            .checked_sub(self.base.len())
            .and_then(|i| self.added.get(i))
    }

    /// Id of the added token with exactly these constituents, if any.
    pub fn find_added(&self, constituents: &[TokenId]) -> Option<TokenId> {
        self.by_constituents.get(constituents).copied()
    }

    /// Appends a token that merges `constituents` and returns its id.
    pub fn add_token(&mut self, constituents: &[TokenId]) -> Result<TokenId> {
        if constituents.len() < 2 {
            return Err(Error::InvalidVocabulary(
                "an added token needs at least two constituents".into(),
            ));
        }
        if self.by_constituents.contains_key(constituents) {
            return Err(Error::InvalidVocabulary(format!(
                "constituents {constituents:?} are already merged"
            )));
        }
        let mut string = Vec::new();
        for &c in constituents {
            let bytes = self.token_bytes(c).ok_or(Error::UnknownToken(c))?;
            string.extend_from_slice(bytes);
        }
        let id = TokenId::try_from(self.size()).map_err(|_| Error::InvalidVocabulary("vocabulary is full".into()))?;
        self.added.push(AddedToken {
            id,
            constituents: constituents.to_vec(),
            string,
        });
        self.by_constituents.insert(constituents.to_vec(), id);
        Ok(id)
    }

    /// Copy of this vocabulary with only the first `count` added tokens.
    pub fn truncated(&self, count: usize) -> Self {
        let mut v = Self::new(self.base.clone());
        for t in self.added.iter().take(count) {
            v.added.push(t.clone());
            v.by_constituents.insert(t.constituents.clone(), t.id);
        }
        v
    }

    pub fn encode(&self, text: &[u8]) -> Result<Vec<TokenId>> {
        let mut ids = self.base.encode(text)?;
        for t in &self.added {
            apply_merge(&mut ids, &t.constituents, t.id);
        }
        Ok(ids)
    }

    pub fn decode(&self, tokens: &[TokenId]) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(tokens.len() * 2);
        for &t in tokens {
            out.extend_from_slice(self.token_bytes(t).ok_or(Error::UnknownToken(t))?);
        }
        Ok(out)
    }
}

/// Replaces non-overlapping occurrences of `pattern` in `seq`, scanning left
/// to right, with `replacement`. Returns the number of replacements.
pub fn apply_merge(seq: &mut Vec<TokenId>, pattern: &[TokenId], replacement: TokenId) -> usize {
    let n = pattern.len();
    if n == 0 || seq.len() < n {
        return 0;
    }
    let first = pattern[0];
    let mut write = 0;
    let mut read = 0;
    let mut hits = 0;
    while read < seq.len() {
        if seq[read] == first && read + n <= seq.len() && seq[read..read + n] == *pattern {
            seq[write] = replacement;
            read += n;
            hits += 1;
        } else {
            seq[write] = seq[read];
            read += 1;
        }
        write += 1;
    }
    seq.truncate(write);
    hits
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn direct_merge_of_word_pieces() {
        let mut v = Vocabulary::new(BaseTokenizer::whitespace(["in", " the"]));
        let in_id = v.base().token_id(b"in").unwrap();
        let the_id = v.base().token_id(b" the").unwrap();
        let x = v.add_token(&[in_id, the_id]).unwrap();
        assert_eq!(v.encode(b"in the").unwrap(), vec![x]);
        assert_eq!(v.token_bytes(x).unwrap(), b"in the");
    }

    #[test]
    fn no_added_tokens_is_base_encoding() {
        let v = Vocabulary::bytes();
        assert_eq!(v.encode(b"abc").unwrap(), vec![97, 98, 99]);
    }

    #[test]
    fn overlapping_candidates_merge_left_to_right() {
        let mut v = Vocabulary::bytes();
        let (a, b, c) = (97, 98, 99);
        let x = v.add_token(&[a, b]).unwrap();
        let _y = v.add_token(&[b, c]).unwrap();
        assert_eq!(v.encode(b"abc").unwrap(), vec![x, c]);
    }

    #[test]
    fn nested_added_token() {
        let mut v = Vocabulary::bytes();
        let x = v.add_token(&[97, 98]).unwrap();
        let y = v.add_token(&[x, 99]).unwrap();
        assert_eq!(v.encode(b"abcab").unwrap(), vec![y, x]);
        assert_eq!(v.decode(&[y]).unwrap(), b"abc");
    }

    #[test]
    fn decode_empty_and_unknown() {
        let v = Vocabulary::bytes();
        assert_eq!(v.decode(&[]).unwrap(), b"");
        assert!(matches!(v.decode(&[999]), Err(Error::UnknownToken(999))));
    }

    #[test]
    fn add_token_validation() {
        let mut v = Vocabulary::bytes();
        assert!(v.add_token(&[1]).is_err());
        assert!(v.add_token(&[1, 4000]).is_err());
        v.add_token(&[1, 2]).unwrap();
        assert!(v.add_token(&[1, 2]).is_err());
    }

    #[test]
    fn apply_merge_self_overlap() {
        let mut s = vec![5, 5, 5];
        assert_eq!(apply_merge(&mut s, &[5, 5], 9), 1);
        assert_eq!(s, vec![9, 5]);
    }
}
