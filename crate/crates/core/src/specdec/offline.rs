//! File protocol for targets that run outside this process.
//!
//! Requests are JSONL `{"id": u64, "context": [ids]}`; responses are JSONL
//! `{"id": u64, "argmax": id, "distribution": [[id, p], ...]}`. An
//! [`OfflineTarget`] replays answered requests and fails with
//! `MissingResponse` on any context it has not seen.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::corpus::TokenId;
use crate::error::{Error, Result};
use crate::metrics::EmpiricalDistribution;

use super::{checked_argmax, TargetModel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OfflineRequest {
    pub id: u64,
    pub context: Vec<TokenId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineResponse {
    pub id: u64,
    pub argmax: TokenId,
    pub distribution: Vec<(TokenId, f64)>,
}

fn write_jsonl<W: Write, T: Serialize>(mut w: W, items: &[T], format: &'static str) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item).map_err(|e| Error::file(format, e.to_string()))?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

fn read_jsonl<R: BufRead, T: DeserializeOwned>(r: R) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}

pub fn write_requests<W: Write>(w: W, requests: &[OfflineRequest]) -> Result<()> {
    write_jsonl(w, requests, "requests")
}

pub fn read_requests<R: BufRead>(r: R) -> Result<Vec<OfflineRequest>> {
    read_jsonl(r)
}

pub fn write_responses<W: Write>(w: W, responses: &[OfflineResponse]) -> Result<()> {
    write_jsonl(w, responses, "responses")
}

pub fn read_responses<R: BufRead>(r: R) -> Result<Vec<OfflineResponse>> {
    read_jsonl(r)
}

/// Answers each request with `target`.
pub fn respond<T: TargetModel + ?Sized>(target: &T, requests: &[OfflineRequest]) -> Result<Vec<OfflineResponse>> {
    requests
        .iter()
        .map(|req| {
            let dist = target.next_distribution(&req.context)?;
            let argmax = checked_argmax(&dist, target.vocab_size())?;
            Ok(OfflineResponse {
                id: req.id,
                argmax,
                distribution: dist.into_inner(),
            })
        })
        .collect()
}

/// Target backed by a finished request/response exchange.
#[derive(Debug, Clone)]
pub struct OfflineTarget {
    vocab_size: usize,
    answers: HashMap<Vec<TokenId>, EmpiricalDistribution<TokenId>>,
}

impl OfflineTarget {
    pub fn new(vocab_size: usize, requests: &[OfflineRequest], responses: &[OfflineResponse]) -> Result<Self> {
        let by_id: HashMap<u64, &OfflineResponse> = responses.iter().map(|r| (r.id, r)).collect();
        let mut answers = HashMap::with_capacity(requests.len());
        for req in requests {
            let Some(resp) = by_id.get(&req.id) else {
                continue;
            };
            let dist = EmpiricalDistribution::new(resp.distribution.iter().copied())
                .map_err(|e| Error::InvalidDistribution(format!("response {}: {e}", resp.id)))?;
            let argmax = checked_argmax(&dist, vocab_size)?;
            if argmax != resp.argmax {
                return Err(Error::InvalidDistribution(format!(
                    "response {}: argmax {} disagrees with distribution argmax {argmax}",
                    resp.id, resp.argmax
                )));
            }
            answers.insert(req.context.clone(), dist);
        }
        Ok(Self { vocab_size, answers })
    }

    pub fn len(&self) -> usize {
        self.answers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.answers.is_empty()
    }
}

impl TargetModel for OfflineTarget {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<EmpiricalDistribution<TokenId>> {
        self.answers
            .get(context)
            .cloned()
            .ok_or(Error::MissingResponse { len: context.len() })
    }
}
