//! Base tokenizers that added n-gram tokens are layered on top of.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::TokenId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaseKind {
    /// One token per byte value; id == byte.
    Bytes,
    /// Whole whitespace-delimited pieces (with their leading whitespace),
    /// falling back to single bytes for pieces outside the vocabulary.
    Whitespace,
    /// Byte-level BPE with a ranked merge table.
    Bpe,
}

impl std::str::FromStr for BaseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bytes" | "byte" => Ok(BaseKind::Bytes),
            "whitespace" | "words" => Ok(BaseKind::Whitespace),
            "bpe" => Ok(BaseKind::Bpe),
            other => Err(Error::param("base", format!("unknown base tokenizer `{other}`"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BaseTokenizer {
    kind: BaseKind,
    tokens: Vec<Vec<u8>>,
    lookup: HashMap<Vec<u8>, TokenId>,
    byte_ids: [Option<TokenId>; 256],
    merges: Vec<(TokenId, TokenId)>,
    merge_ranks: HashMap<(TokenId, TokenId), (usize, TokenId)>,
}

impl PartialEq for BaseTokenizer {
    fn eq(&self, other: &Self) -> bool {
        self.kind == other.kind && self.tokens == other.tokens && self.merges == other.merges
    }
}

fn all_bytes() -> Vec<Vec<u8>> {
    (0..=255u8).map(|b| vec![b]).collect()
}

/// Splits text so that every piece is a run of whitespace followed by a run
/// of non-whitespace (either may be empty at the text boundaries).
/// `"in the"` becomes `["in", " the"]`.
pub fn split_pieces(text: &[u8]) -> impl Iterator<Item = &[u8]> {
    let mut start = 0;
    let mut i = 0;
    std::iter::from_fn(move || {
        if start >= text.len() {
            return None;
        }
        i = i.max(start + 1);
        while i < text.len() {
            if text[i].is_ascii_whitespace() && !text[i - 1].is_ascii_whitespace() {
                break;
            }
            i += 1;
        }
        let piece = &text[start..i];
        start = i;
        Some(piece)
    })
}

impl BaseTokenizer {
    pub fn bytes() -> Self {
        Self::from_parts(BaseKind::Bytes, all_bytes(), Vec::new()).expect("byte vocabulary is valid")
    }

    /// Byte fallback tokens (ids 0..256) followed by `pieces` in the given
    /// order. Single-byte and duplicate pieces are ignored.
    pub fn whitespace<I, P>(pieces: I) -> Self
    where
        I: IntoIterator<Item = P>,
        P: AsRef<[u8]>,
    {
        let mut tokens = all_bytes();
        let mut seen: BTreeSet<Vec<u8>> = BTreeSet::new();
        for p in pieces {
            let p = p.as_ref();
            if p.len() > 1 && seen.insert(p.to_vec()) {
                tokens.push(p.to_vec());
            }
        }
        Self::from_parts(BaseKind::Whitespace, tokens, Vec::new()).expect("whitespace vocabulary is valid")
    }

    /// Whitespace vocabulary over every distinct piece in `texts`, in
    /// lexicographic byte order, optionally keeping only pieces seen at
    /// least `min_count` times.
    pub fn whitespace_from_texts<'a, I>(texts: I, min_count: usize) -> Self
    where
        I: IntoIterator<Item = &'a [u8]>,
    {
        let mut counts: HashMap<&[u8], usize> = HashMap::new();
        for t in texts {
            for p in split_pieces(t) {
                *counts.entry(p).or_insert(0) += 1;
            }
        }
        let mut pieces: Vec<&[u8]> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count.max(1))
            .map(|(p, _)| p)
            .collect();
        pieces.sort_unstable();
        Self::whitespace(pieces)
    }

    /// Validates and indexes a token table. For `Bpe`, `merges` are ranked by
    /// position and each merge result must itself be a token.
    pub fn from_parts(kind: BaseKind, tokens: Vec<Vec<u8>>, merges: Vec<(TokenId, TokenId)>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::InvalidVocabulary("base vocabulary is empty".into()));
        }
        if tokens.len() > TokenId::MAX as usize {
            return Err(Error::InvalidVocabulary("too many base tokens".into()));
        }
        let mut lookup = HashMap::with_capacity(tokens.len());
        for (id, t) in tokens.iter().enumerate() {
            if t.is_empty() {
                return Err(Error::InvalidVocabulary(format!("base token {id} is empty")));
            }
            if lookup.insert(t.clone(), id as TokenId).is_some() {
                return Err(Error::InvalidVocabulary(format!(
                    "base token {id} duplicates an earlier token"
                )));
            }
        }
        let mut byte_ids = [None; 256];
        for b in 0..=255u8 {
            byte_ids[b as usize] = lookup.get(&[b][..]).copied();
        }
        match kind {
            BaseKind::Bytes | BaseKind::Whitespace => {
                let prefix_ok = tokens.len() >= 256 && tokens[..256] == all_bytes()[..];
                if !prefix_ok || (kind == BaseKind::Bytes && tokens.len() != 256) {
                    return Err(Error::InvalidVocabulary(format!(
                        "{kind:?} vocabulary must start with the 256 single-byte tokens"
                    )));
                }
                if !merges.is_empty() {
                    return Err(Error::InvalidVocabulary(format!("{kind:?} vocabulary has merges")));
                }
            }
            BaseKind::Bpe => {}
        }
        let mut merge_ranks = HashMap::with_capacity(merges.len());
        for (rank, &(a, b)) in merges.iter().enumerate() {
            let (ta, tb) = match (tokens.get(a as usize), tokens.get(b as usize)) {
                (Some(ta), Some(tb)) => (ta, tb),
                _ => {
                    return Err(Error::InvalidVocabulary(format!(
                        "merge {rank} references an unknown token"
                    )))
                }
            };
            let joined = [ta.as_slice(), tb.as_slice()].concat();
            let Some(&result) = lookup.get(&joined) else {
                return Err(Error::InvalidVocabulary(format!(
                    "merge {rank} produces a string that is not in the vocabulary"
                )));
            };
            merge_ranks.entry((a, b)).or_insert((rank, result));
        }
        Ok(Self {
            kind,
            tokens,
            lookup,
            byte_ids,
            merges,
            merge_ranks,
        })
    }

    pub fn kind(&self) -> BaseKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Vec<u8>] {
        &self.tokens
    }

    pub fn merges(&self) -> &[(TokenId, TokenId)] {
        &self.merges
    }

    pub fn token_id(&self, bytes: &[u8]) -> Option<TokenId> {
        self.lookup.get(bytes).copied()
    }

    /// True when every byte value has a single-byte token.
    pub fn is_byte_complete(&self) -> bool {
        self.byte_ids.iter().all(Option::is_some)
    }

    fn push_bytes(&self, bytes: &[u8], base_offset: usize, out: &mut Vec<TokenId>) -> Result<()> {
        for (i, &b) in bytes.iter().enumerate() {
            match self.byte_ids[b as usize] {
                Some(id) => out.push(id),
                None => {
                    return Err(Error::UnencodableByte {
                        byte: b,
                        offset: base_offset + i,
                    })
                }
            }
        }
        Ok(())
    }

    pub fn encode(&self, text: &[u8]) -> Result<Vec<TokenId>> {
        let mut out = Vec::with_capacity(text.len());
        match self.kind {
            BaseKind::Bytes => self.push_bytes(text, 0, &mut out)?,
            BaseKind::Whitespace => {
                let mut offset = 0;
                for piece in split_pieces(text) {
                    match self.lookup.get(piece) {
                        Some(&id) => out.push(id),
                        None => self.push_bytes(piece, offset, &mut out)?,
                    }
                    offset += piece.len();
                }
            }
            BaseKind::Bpe => {
                let mut offset = 0;
                let mut buf = Vec::new();
                for piece in split_pieces(text) {
                    buf.clear();
                    self.push_bytes(piece, offset, &mut buf)?;
                    self.apply_bpe(&mut buf);
                    out.extend_from_slice(&buf);
                    offset += piece.len();
                }
            }
        }
        Ok(out)
    }

    /// Standard rank-ordered BPE: repeatedly merge every occurrence of the
    /// lowest-ranked adjacent pair until no ranked pair remains.
    fn apply_bpe(&self, ids: &mut Vec<TokenId>) {
        loop {
            let best = ids
                .windows(2)
                .filter_map(|w| {
                    self.merge_ranks
                        .get(&(w[0], w[1]))
                        .map(|&(r, res)| (r, (w[0], w[1]), res))
                })
                .min_by_key(|&(r, _, _)| r);
            let Some((_, pair, result)) = best else { break };
            let mut write = 0;
            let mut read = 0;
            while read < ids.len() {
                if read + 1 < ids.len() && (ids[read], ids[read + 1]) == pair {
                    ids[write] = result;
                    read += 2;
                } else {
                    ids[write] = ids[read];
                    read += 1;
                }
                write += 1;
            }
            ids.truncate(write);
        }
    }

    /// Loads a byte-level BPE vocabulary from the usual `vocab.json`
    /// (token string -> id) and `merges.txt` (one `left right` rule per
    /// line) pair. Token strings use the GPT-2 byte-to-unicode alphabet.
    pub fn load_bpe(vocab_path: impl AsRef<Path>, merges_path: impl AsRef<Path>) -> Result<Self> {
        let read = |p: &Path| {
            fs::read_to_string(p).map_err(|source| Error::Io {
                path: p.to_path_buf(),
                source,
            })
        };
        let vocab_json = read(vocab_path.as_ref())?;
        let merges_txt = read(merges_path.as_ref())?;
        Self::parse_bpe(&vocab_json, &merges_txt)
    }

    pub fn parse_bpe(vocab_json: &str, merges_txt: &str) -> Result<Self> {
        let map: HashMap<String, u64> =
            serde_json::from_str(vocab_json).map_err(|e| Error::file("bpe vocab", e.to_string()))?;
        let decoder = gpt2_unicode_to_byte();
        let mut tokens: Vec<Option<Vec<u8>>> = vec![None; map.len()];
        let mut by_string: HashMap<&str, TokenId> = HashMap::with_capacity(map.len());
        for (s, &id) in &map {
            let slot = tokens
                .get_mut(id as usize)
                .ok_or_else(|| Error::file("bpe vocab", format!("id {id} is not contiguous")))?;
            let bytes = s
                .chars()
                .map(|c| decoder.get(&c).copied())
                .collect::<Option<Vec<u8>>>()
                .ok_or_else(|| Error::file("bpe vocab", format!("token {s:?} is not byte-level")))?;
            if slot.replace(bytes).is_some() {
                return Err(Error::file("bpe vocab", format!("id {id} is assigned twice")));
            }
            by_string.insert(s.as_str(), id as TokenId);
        }
        let tokens: Vec<Vec<u8>> = tokens
            .into_iter()
            .collect::<Option<_>>()
            .ok_or_else(|| Error::file("bpe vocab", "ids are not contiguous"))?;

        let mut merges = Vec::new();
        for (idx, line) in merges_txt.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.is_empty() || (idx == 0 && line.starts_with("#version")) {
                continue;
            }
            let mut parts = line.split(' ');
            let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::file(
                    "bpe merges",
                    format!("line {}: expected two tokens", idx + 1),
                ));
            };
            let lookup = |s: &str| {
                by_string
                    .get(s)
                    .copied()
                    .ok_or_else(|| Error::file("bpe merges", format!("line {}: unknown token {s:?}", idx + 1)))
            };
            merges.push((lookup(a)?, lookup(b)?));
        }
        Self::from_parts(BaseKind::Bpe, tokens, merges)
    }
}

/// The GPT-2 printable alphabet used to store raw bytes in BPE vocab files.
pub fn gpt2_byte_to_unicode() -> [char; 256] {
    let mut printable: Vec<u32> = (b'!' as u32..=b'~' as u32)
        .chain(0xA1..=0xAC)
        .chain(0xAE..=0xFF)
        .collect();
    let mut chars = printable.clone();
    let mut extra = 0;
    for b in 0..256u32 {
        if !printable.contains(&b) {
            printable.push(b);
            chars.push(256 + extra);
            extra += 1;
        }
    }
    let mut table = ['\0'; 256];
    for (b, c) in printable.into_iter().zip(chars) {
        table[b as usize] = char::from_u32(c).expect("valid code point");
    }
    table
}

fn gpt2_unicode_to_byte() -> HashMap<char, u8> {
    gpt2_byte_to_unicode()
        .iter()
        .enumerate()
        .map(|(b, &c)| (c, b as u8))
        .collect()
}
