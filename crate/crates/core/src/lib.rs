//! Task-adaptive sequence compression.
//!
//! The crate has three threads that share one corpus model:
//!
//! * [`tokenizer`] enriches a base vocabulary with frequent task n-grams so
//!   that generated outputs need fewer tokens.
//! * [`drafter`] and [`specdec`] build training-free n-gram draft models and
//!   run exact-match greedy speculative decoding against a pluggable target.
//! * [`metrics`] computes the entropy, coverage and rank-correlation
//!   diagnostics used to reason about both.
//!
//! Data-parallel loops (n-gram counting, corpus tokenization, batches of
//! decoding sessions) run on rayon when the `parallel` feature is enabled
//! and fall back to plain iterators otherwise. Results are identical either
//! way.

pub mod corpus;
pub mod drafter;
pub mod error;
pub mod metrics;
pub mod par;
pub mod specdec;
pub mod tokenizer;

pub use corpus::{Document, NGramCounts, TaskCorpus, TokenId, TokenSequence};
pub use error::{Error, Result};
pub use metrics::EmpiricalDistribution;
pub use tokenizer::Vocabulary;
