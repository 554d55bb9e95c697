//! Input-embedding rows for added tokens.
//!
//! Binary layout: 16-byte header (`b"TASCEMB1"`, rows as `u32` LE, dim as
//! `u32` LE) followed by `rows * dim` little-endian `f64` values, row-major.

use std::io::{Read, Write};

use crate::corpus::TokenId;
use crate::error::{Error, Result};

use super::Vocabulary;

const MAGIC: &[u8; 8] = b"TASCEMB1";

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl EmbeddingMatrix {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::param(
                "embeddings",
                format!("expected {} values for {rows}x{dim}, got {}", rows * dim, data.len()),
            ));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::param(
                "embeddings",
                format!("non-finite value at row {}, column {}", i / dim.max(1), i % dim.max(1)),
            ));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn zeros(rows: usize, dim: usize) -> Self {
        Self {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        let rows = u32::try_from(self.rows).map_err(|_| Error::param("embeddings", "too many rows"))?;
        let dim = u32::try_from(self.dim).map_err(|_| Error::param("embeddings", "dimension too large"))?;
        w.write_all(MAGIC)?;
        w.write_all(&rows.to_le_bytes())?;
        w.write_all(&dim.to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 8);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)
            .map_err(|_| Error::file("embedding", "truncated header"))?;
        if &header[..8] != MAGIC {
            return Err(Error::file("embedding", "bad magic"));
        }
        let rows = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let dim = u32::from_le_bytes(header[12..16].try_into().unwrap()) as usize;
        let mut raw = Vec::new();
        r.read_to_end(&mut raw)?;
        if raw.len() != rows * dim * 8 {
            return Err(Error::file(
                "embedding",
                format!("expected {} payload bytes, found {}", rows * dim * 8, raw.len()),
            ));
        }
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::new(rows, dim, data)
    }
}

/// Extends `embeddings` to one row per token of `vocab`. Base rows are
/// copied; each added token gets the mean of its constituents' rows, which
/// for nested tokens are the already-initialized added rows.
pub fn init_embeddings(embeddings: &EmbeddingMatrix, vocab: &Vocabulary) -> Result<EmbeddingMatrix> {
    let base = vocab.base_size();
    if embeddings.rows < base {
        return Err(Error::MissingEmbeddingRow(embeddings.rows as TokenId));
    }
    let dim = embeddings.dim;
    let mut data = Vec::with_capacity(vocab.size() * dim);
    data.extend_from_slice(&embeddings.data[..base * dim]);
    for tok in vocab.added_tokens() {
        let mut row = vec![0.0; dim];
        for &c in &tok.constituents {
            let c = c as usize;
            if c >= tok.id as usize {
                return Err(Error::MissingEmbeddingRow(c as TokenId));
            }
            for (acc, v) in row.iter_mut().zip(&data[c * dim..(c + 1) * dim]) {
                *acc += v;
            }
        }
        let n = tok.constituents.len() as f64;
        data.extend(row.into_iter().map(|v| v / n));
    }
    Ok(EmbeddingMatrix {
        rows: vocab.size(),
        dim,
        data,
    })
}
