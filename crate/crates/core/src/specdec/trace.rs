//! JSONL session trace: one line per verification step.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus::TokenId;
use crate::error::{Error, Result};

use super::{Generation, StepRecord};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub session: usize,
    pub step: usize,
    pub drafted: Vec<TokenId>,
    pub k: usize,
    pub correction: TokenId,
}

impl TraceRecord {
    pub fn to_step(&self) -> StepRecord {
        StepRecord {
            drafted: self.drafted.clone(),
            accepted: self.k,
            correction: self.correction,
            target_calls: 1,
        }
    }
}

pub fn write_trace<W: Write>(mut w: W, generations: &[Generation]) -> Result<()> {
    for (session, g) in generations.iter().enumerate() {
        for (step, s) in g.steps.iter().enumerate() {
            let rec = TraceRecord {
                session,
                step,
                drafted: s.drafted.clone(),
                k: s.accepted,
                correction: s.correction,
            };
            serde_json::to_writer(&mut w, &rec).map_err(|e| Error::file("trace", e.to_string()))?;
            w.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn read_trace<R: BufRead>(r: R) -> Result<Vec<TraceRecord>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: TraceRecord = serde_json::from_str(&line).map_err(|e| Error::MalformedRecord {
            line: i + 1,
            message: e.to_string(),
        })?;
        if rec.k > rec.drafted.len() {
            return Err(Error::MalformedRecord {
                line: i + 1,
                message: format!("k = {} exceeds {} drafted tokens", rec.k, rec.drafted.len()),
            });
        }
        out.push(rec);
    }
    Ok(out)
}
