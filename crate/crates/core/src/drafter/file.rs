//! `tasc-ngrams.v1`: binary corpus drafter tables.
//!
//! All integers little-endian.
//!
//! ```text
//! magic      8 bytes  "TASCNG01"
//! n_max      u32
//! p_min      u64
//! vocab_size u32
//! fallback   u32
//! for order in 2..=n_max:
//!     order   u32
//!     entries u64
//!     entries x { context: (order-1) x u32, next: u32, count: u64 }
//! ```
//!
//! Entries are sorted by `(context, next)`, so equal drafters serialize to
//! identical bytes.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use crate::corpus::TokenId;
use crate::error::{Error, Result};

use super::{BackoffTables, CorpusDrafter, NGramModel};

pub const NGRAM_FORMAT: &str = "tasc-ngrams.v1";
const MAGIC: &[u8; 8] = b"TASCNG01";

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::file(NGRAM_FORMAT, format!("truncated at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

impl CorpusDrafter {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.tables.n_max as u32).to_le_bytes());
        out.extend_from_slice(&self.p_min.to_le_bytes());
        out.extend_from_slice(&self.vocab_size.to_le_bytes());
        out.extend_from_slice(&self.tables.fallback.to_le_bytes());
        for m in &self.tables.models {
            let entries = m.sorted_entries();
            out.extend_from_slice(&(m.order as u32).to_le_bytes());
            out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
            for (ctx, next, count) in entries {
                for &t in ctx {
                    out.extend_from_slice(&t.to_le_bytes());
                }
                out.extend_from_slice(&next.to_le_bytes());
                out.extend_from_slice(&count.to_le_bytes());
            }
        }
        out
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut cur = Cursor { buf, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(Error::file(NGRAM_FORMAT, "bad magic"));
        }
        let n_max = cur.u32()? as usize;
        let p_min = cur.u64()?;
        let vocab_size = cur.u32()?;
        let fallback = cur.u32()?;
        if n_max < 2 || p_min < 1 {
            return Err(Error::file(NGRAM_FORMAT, "n_max must be >= 2 and p_min >= 1"));
        }
        let mut models = Vec::with_capacity(n_max - 1);
        for expected in 2..=n_max {
            let order = cur.u32()? as usize;
            if order != expected {
                return Err(Error::file(
                    NGRAM_FORMAT,
                    format!("expected order {expected}, found {order}"),
                ));
            }
            let entries = cur.u64()?;
            let entry_bytes = (order as u64 - 1) * 4 + 12;
            if entries.saturating_mul(entry_bytes) > (buf.len() - cur.pos) as u64 {
                return Err(Error::file(
                    NGRAM_FORMAT,
                    format!("order {order}: entry count exceeds file size"),
                ));
            }
            let mut table: HashMap<Vec<TokenId>, BTreeMap<TokenId, u64>> = HashMap::new();
            let mut prev: Option<(Vec<TokenId>, TokenId)> = None;
            for _ in 0..entries {
                let ctx = (0..order - 1).map(|_| cur.u32()).collect::<Result<Vec<_>>>()?;
                let next = cur.u32()?;
                let count = cur.u64()?;
                if count < p_min {
                    return Err(Error::file(
                        NGRAM_FORMAT,
                        format!("order {order}: count {count} below p_min"),
                    ));
                }
                let key = (ctx, next);
                if prev.as_ref().is_some_and(|p| *p >= key) {
                    return Err(Error::file(
                        NGRAM_FORMAT,
                        format!("order {order}: entries not strictly sorted"),
                    ));
                }
                table.entry(key.0.clone()).or_default().insert(next, count);
                prev = Some(key);
            }
            models.push(NGramModel::from_table(order, p_min, table));
        }
        if cur.pos != buf.len() {
            return Err(Error::file(NGRAM_FORMAT, "trailing bytes"));
        }
        Ok(CorpusDrafter {
            tables: BackoffTables {
                n_max,
                models,
                fallback,
            },
            p_min,
            vocab_size,
        })
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }
}

#[cfg(test)]
mod tests {
    use super::super::build_corpus_drafter;
    use super::*;

    #[test]
    fn round_trip() {
        let d = build_corpus_drafter(&[vec![1, 2, 3, 1, 2, 4], vec![2, 3, 1]], 3, 1).unwrap();
        let bytes = d.to_bytes();
        let back = CorpusDrafter::from_bytes(&bytes).unwrap();
        assert_eq!(back, d);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn rejects_corruption() {
        let d = build_corpus_drafter(&[vec![1, 2, 3]], 2, 1).unwrap();
        let bytes = d.to_bytes();
        assert!(CorpusDrafter::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(CorpusDrafter::from_bytes(&extra).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(CorpusDrafter::from_bytes(&bad).is_err());
    }
}
