//! `tasc-vocab.v1` vocabulary files.
//!
//! A pretty-printed JSON document. Token strings are byte strings: printable
//! ASCII is stored as-is, a backslash as `\\`, and every other byte as
//! `\xHH`. Ids are implicit: base tokens first, then added tokens in order.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::TokenId;
use crate::error::{Error, Result};

use super::{BaseKind, BaseTokenizer, Vocabulary};

pub const VOCAB_FORMAT: &str = "tasc-vocab.v1";

#[derive(Serialize, Deserialize)]
struct VocabFile {
    format: String,
    base_kind: BaseKind,
    base_tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    merges: Vec<[TokenId; 2]>,
    added_tokens: Vec<AddedEntry>,
}

#[derive(Serialize, Deserialize)]
struct AddedEntry {
    constituents: Vec<TokenId>,
    string: String,
}

pub(crate) fn escape_bytes(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len());
    for &b in bytes {
        match b {
            b'\\' => s.push_str("\\\\"),
            0x20..=0x7e => s.push(b as char),
            _ => {
                let _ = write!(s, "\\x{b:02x}");
            }
        }
    }
    s
}

pub(crate) fn unescape_bytes(s: &str) -> Result<Vec<u8>> {
    let bad = |m: &str| Error::file(VOCAB_FORMAT, format!("{m} in {s:?}"));
    let mut out = Vec::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            let mut buf = [0u8; 4];
            out.extend_from_slice(c.encode_utf8(&mut buf).as_bytes());
            continue;
        }
        match chars.next() {
            Some('\\') => out.push(b'\\'),
            Some('x') => {
                let hex: String = chars.by_ref().take(2).collect();
                if hex.len() != 2 {
                    return Err(bad("truncated \\x escape"));
                }
                out.push(u8::from_str_radix(&hex, 16).map_err(|_| bad("invalid \\x escape"))?);
            }
            _ => return Err(bad("unknown escape")),
        }
    }
    Ok(out)
}

impl Vocabulary {
    pub fn to_json(&self) -> String {
        let file = VocabFile {
            format: VOCAB_FORMAT.to_string(),
            base_kind: self.base.kind(),
            base_tokens: self.base.tokens().iter().map(|t| escape_bytes(t)).collect(),
            merges: self.base.merges().iter().map(|&(a, b)| [a, b]).collect(),
            added_tokens: self
                .added
                .iter()
                .map(|t| AddedEntry {
                    constituents: t.constituents.clone(),
                    string: escape_bytes(&t.string),
                })
                .collect(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("vocabulary serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: VocabFile = serde_json::from_str(text).map_err(|e| Error::file(VOCAB_FORMAT, e.to_string()))?;
        if file.format != VOCAB_FORMAT {
            return Err(Error::file(
                VOCAB_FORMAT,
                format!("unexpected format tag {:?}", file.format),
            ));
        }
        let tokens = file
            .base_tokens
            .iter()
            .map(|t| unescape_bytes(t))
            .collect::<Result<Vec<_>>>()?;
        let merges = file.merges.iter().map(|&[a, b]| (a, b)).collect();
        let base = BaseTokenizer::from_parts(file.base_kind, tokens, merges)?;
        let mut vocab = Vocabulary::new(base);
        for (i, entry) in file.added_tokens.iter().enumerate() {
            let id = vocab.add_token(&entry.constituents)?;
            let declared = unescape_bytes(&entry.string)?;
            if vocab.token_bytes(id) != Some(declared.as_slice()) {
                return Err(Error::file(
                    VOCAB_FORMAT,
                    format!("added token {i}: string does not match its constituents"),
                ));
            }
        }
        Ok(vocab)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escaping() {
        assert_eq!(escape_bytes(b"a b\\\n\xff"), "a b\\\\\\x0a\\xff");
        assert_eq!(unescape_bytes("a b\\\\\\x0a\\xff").unwrap(), b"a b\\\n\xff");
        assert_eq!(unescape_bytes("é").unwrap(), "é".as_bytes());
        assert!(unescape_bytes("\\x4").is_err());
        assert!(unescape_bytes("\\q").is_err());
    }

    #[test]
    fn round_trip_with_added_tokens() {
        let mut v = Vocabulary::new(BaseTokenizer::whitespace(["in", " the"]));
        let x = v.add_token(&[256, 257]).unwrap();
        v.add_token(&[x, b'\n' as u32]).unwrap();
        let json = v.to_json();
        let back = Vocabulary::from_json(&json).unwrap();
        assert_eq!(back, v);
        assert_eq!(back.to_json(), json);
    }

    #[test]
    fn rejects_mismatched_string() {
        let mut v = Vocabulary::bytes();
        v.add_token(&[97, 98]).unwrap();
        let json = v.to_json().replace("\"string\": \"ab\"", "\"string\": \"ba\"");
        assert!(Vocabulary::from_json(&json).is_err());
    }
}
