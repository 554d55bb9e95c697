//! Task corpora and exact n-gram counting.
//!
//! A corpus is an ordered list of `(input, output)` documents. Everything
//! downstream (vocabulary enrichment, the corpus drafter, the entropy
//! reports) is computed from the output side only unless stated otherwise.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::par;
use crate::tokenizer::Vocabulary;

pub type TokenId = u32;
pub type TokenSequence = Vec<TokenId>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub input: String,
    pub output: String,
}

impl Document {
    pub fn new(input: impl Into<String>, output: impl Into<String>) -> Self {
        Self {
            input: input.into(),
            output: output.into(),
        }
    }

    pub fn text(&self, side: Side) -> &str {
        match side {
            Side::Input => &self.input,
            Side::Output => &self.output,
        }
    }
}

/// Which half of each document an operation reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Input,
    Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    /// `tasc.v1`: one JSON object per line with string fields `input` and `output`.
    TascV1,
    /// One output per line, inputs empty.
    PlainText,
}

impl FromStr for CorpusFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tasc.v1" | "jsonl" => Ok(CorpusFormat::TascV1),
            "plain" | "text" | "txt" => Ok(CorpusFormat::PlainText),
            other => Err(Error::param(
                "format",
                format!("unknown corpus format `{other}` (expected tasc.v1 or plain)"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskCorpus {
    pub id: String,
    documents: Vec<Document>,
}

#[derive(Deserialize)]
struct RecordV1 {
    input: Option<String>,
    output: Option<String>,
}

impl TaskCorpus {
    pub fn new(id: impl Into<String>, documents: Vec<Document>) -> Result<Self> {
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        if let Some(pos) = documents.iter().position(|d| d.output.is_empty()) {
            return Err(Error::MalformedRecord {
                line: pos + 1,
                message: "output text is empty".into(),
            });
        }
        Ok(Self {
            id: id.into(),
            documents,
        })
    }

    /// Output-only corpus, one document per string.
    pub fn from_outputs<I, S>(id: impl Into<String>, outputs: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let docs = outputs.into_iter().map(|o| Document::new(String::new(), o)).collect();
        Self::new(id, docs)
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn texts(&self, side: Side) -> impl Iterator<Item = &str> {
        self.documents.iter().map(move |d| d.text(side))
    }

    /// Parses a corpus from any reader. Blank lines are skipped; line numbers
    /// in errors are 1-based physical lines.
    pub fn from_reader<R: Read>(id: impl Into<String>, reader: R, format: CorpusFormat) -> Result<Self> {
        let mut documents = Vec::new();
        for (idx, line) in BufReader::new(reader).lines().enumerate() {
            let line_no = idx + 1;
            let line = line.map_err(|e| Error::MalformedRecord {
                line: line_no,
                message: e.to_string(),
            })?;
            let trimmed = line.trim_end_matches('\r');
            if trimmed.trim().is_empty() {
                continue;
            }
            let doc = match format {
                CorpusFormat::PlainText => Document::new(String::new(), trimmed),
                CorpusFormat::TascV1 => {
                    let rec: RecordV1 = serde_json::from_str(trimmed).map_err(|e| Error::MalformedRecord {
                        line: line_no,
                        message: e.to_string(),
                    })?;
                    let output = rec.output.ok_or_else(|| Error::MalformedRecord {
                        line: line_no,
                        message: "missing field `output`".into(),
                    })?;
                    if output.is_empty() {
                        return Err(Error::MalformedRecord {
                            line: line_no,
                            message: "field `output` is empty".into(),
                        });
                    }
                    Document::new(rec.input.unwrap_or_default(), output)
                }
            };
            documents.push(doc);
        }
        if documents.is_empty() {
            return Err(Error::EmptyCorpus);
        }
        Ok(Self {
            id: id.into(),
            documents,
        })
    }
}

/// Reads a corpus file, one document per record in file order.
pub fn load_corpus(path: impl AsRef<Path>, format: CorpusFormat) -> Result<TaskCorpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    TaskCorpus::from_reader(id, file, format)
}

/// Encodes one side of every document under `vocab`.
pub fn tokenize_corpus(corpus: &TaskCorpus, vocab: &Vocabulary, side: Side) -> Result<Vec<TokenSequence>> {
    par::try_map_collect(corpus.documents(), |d| vocab.encode(d.text(side).as_bytes()))
}

/// Exact count table of contiguous order-`n` windows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NGramCounts {
    order: usize,
    table: HashMap<Vec<TokenId>, u64>,
    total: u64,
}

impl NGramCounts {
    pub fn empty(order: usize) -> Self {
        Self {
            order,
            table: HashMap::new(),
            total: 0,
        }
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct n-grams.
    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn get(&self, ngram: &[TokenId]) -> u64 {
        self.table.get(ngram).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[TokenId], u64)> {
        self.table.iter().map(|(k, &v)| (k.as_slice(), v))
    }

    /// Entries in lexicographic n-gram order.
    pub fn sorted(&self) -> Vec<(&[TokenId], u64)> {
        let mut v: Vec<_> = self.iter().collect();
        v.sort_unstable_by(|a, b| a.0.cmp(b.0));
        v
    }

    fn add_sequence(&mut self, seq: &[TokenId]) {
        if seq.len() < self.order {
            return;
        }
        for w in seq.windows(self.order) {
            match self.table.get_mut(w) {
                Some(c) => *c += 1,
                None => {
                    self.table.insert(w.to_vec(), 1);
                }
            }
            self.total += 1;
        }
    }

    fn merge(self, other: Self) -> Self {
        let (mut big, small) = if self.table.len() >= other.table.len() {
            (self, other)
        } else {
            (other, self)
        };
        for (k, v) in small.table {
            *big.table.entry(k).or_insert(0) += v;
        }
        big.total += small.total;
        big
    }
}

/// Counts order-`n` windows within each sequence; windows never span two
/// sequences. Panics if `n == 0`.
pub fn count_ngrams<S: AsRef<[TokenId]> + Sync>(sequences: &[S], n: usize) -> NGramCounts {
    assert!(n >= 1, "n-gram order must be at least 1");
    par::fold_reduce(
        sequences,
        || NGramCounts::empty(n),
        |mut acc, seq| {
            acc.add_sequence(seq.as_ref());
            acc
        },
        NGramCounts::merge,
    )
}

/// Single-threaded [`count_ngrams`], available regardless of features.
pub fn count_ngrams_sequential<S: AsRef<[TokenId]>>(sequences: &[S], n: usize) -> NGramCounts {
    assert!(n >= 1, "n-gram order must be at least 1");
    let mut acc = NGramCounts::empty(n);
    for seq in sequences {
        acc.add_sequence(seq.as_ref());
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bigram_hand_count() {
        let c = count_ngrams(&[vec![1, 2, 1, 2]], 2);
        assert_eq!(c.get(&[1, 2]), 2);
        assert_eq!(c.get(&[2, 1]), 1);
        assert_eq!(c.len(), 2);
        assert_eq!(c.total(), 3);
    }

    #[test]
    fn short_sequence_contributes_nothing() {
        let c = count_ngrams(&[vec![7]], 2);
        assert!(c.is_empty());
        assert_eq!(c.total(), 0);
    }

    #[test]
    fn windows_do_not_cross_documents() {
        let c = count_ngrams(&[vec![1, 2], vec![3, 4]], 2);
        assert_eq!(c.get(&[2, 3]), 0);
        assert_eq!(c.total(), 2);
    }

    #[test]
    fn two_line_record_file() {
        let data = "{\"input\":\"q1\",\"output\":\"a1\"}\n{\"input\":\"q2\",\"output\":\"a2\"}\n";
        let c = TaskCorpus::from_reader("t", data.as_bytes(), CorpusFormat::TascV1).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.documents()[1], Document::new("q2", "a2"));
    }

    #[test]
    fn missing_output_reports_line() {
        let data = "{\"input\":\"q1\",\"output\":\"a1\"}\n{\"input\":\"q2\"}\n";
        let err = TaskCorpus::from_reader("t", data.as_bytes(), CorpusFormat::TascV1).unwrap_err();
        assert!(matches!(err, Error::MalformedRecord { line: 2, .. }), "{err}");
    }

    #[test]
    fn empty_file_is_rejected() {
        let err = TaskCorpus::from_reader("t", "\n\n".as_bytes(), CorpusFormat::PlainText).unwrap_err();
        assert!(matches!(err, Error::EmptyCorpus));
    }

    #[test]
    fn plain_text_has_empty_inputs() {
        let c = TaskCorpus::from_reader("t", "yes\nno\n".as_bytes(), CorpusFormat::PlainText).unwrap();
        assert_eq!(c.documents()[0], Document::new("", "yes"));
        assert_eq!(c.texts(Side::Output).collect::<Vec<_>>(), ["yes", "no"]);
    }

    #[test]
    fn unreadable_file() {
        let err = load_corpus("/nonexistent/corpus.jsonl", CorpusFormat::TascV1).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
