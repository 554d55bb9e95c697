//! Draft-then-verify decoding with exact-match greedy acceptance.
//!
//! Each step drafts `gamma` tokens, scores them with one (conceptual) pass
//! of the target, keeps the longest prefix that matches the target's greedy
//! choices and appends the target's own token at the first mismatch (or
//! after the last draft token). The emitted sequence is therefore always
//! identical to plain greedy decoding of the target; only the number of
//! target passes changes.

mod offline;
mod targets;
mod trace;

use serde::Serialize;

use crate::corpus::TokenId;
use crate::drafter::MixedDrafter;
use crate::error::{Error, Result};
use crate::metrics::EmpiricalDistribution;
use crate::par;

pub use offline::{
    read_requests, read_responses, respond, write_requests, write_responses, OfflineRequest, OfflineResponse,
    OfflineTarget,
};
pub use targets::{NGramTarget, RandomLogitTarget};
pub use trace::{read_trace, write_trace, TraceRecord};

/// Absolute tolerance on `Σ p == 1` for target distributions.
const TARGET_SUM_TOLERANCE: f64 = 1e-6;

/// Next-token provider being accelerated. Must be deterministic for a fixed
/// context.
pub trait TargetModel: Sync {
    fn vocab_size(&self) -> usize;

    fn next_distribution(&self, context: &[TokenId]) -> Result<EmpiricalDistribution<TokenId>>;

    /// Greedy next token; ties go to the lowest id.
    fn greedy(&self, context: &[TokenId]) -> Result<TokenId> {
        let dist = self.next_distribution(context)?;
        checked_argmax(&dist, self.vocab_size())
    }
}

impl<T: TargetModel + ?Sized> TargetModel for &T {
    fn vocab_size(&self) -> usize {
        (**self).vocab_size()
    }

    fn next_distribution(&self, context: &[TokenId]) -> Result<EmpiricalDistribution<TokenId>> {
        (**self).next_distribution(context)
    }

    fn greedy(&self, context: &[TokenId]) -> Result<TokenId> {
        (**self).greedy(context)
    }
}

/// Argmax of a target distribution after checking it is a valid
/// distribution over `0..vocab_size`.
pub fn checked_argmax(dist: &EmpiricalDistribution<TokenId>, vocab_size: usize) -> Result<TokenId> {
    let mut sum = 0.0;
    for (&t, p) in dist.iter() {
        if t as usize >= vocab_size {
            return Err(Error::InvalidDistribution(format!(
                "token {t} outside vocabulary of {vocab_size}"
            )));
        }
        if !p.is_finite() || p < 0.0 {
            return Err(Error::InvalidDistribution(format!("probability {p} for token {t}")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > TARGET_SUM_TOLERANCE {
        return Err(Error::InvalidDistribution(format!("probabilities sum to {sum}")));
    }
    dist.argmax()
        .copied()
        .ok_or_else(|| Error::InvalidDistribution("empty distribution".into()))
}

/// Source of draft tokens for [`generate`].
pub trait DraftSource {
    fn propose(&mut self, context: &[TokenId], gamma: usize) -> Result<Vec<TokenId>>;

    /// Called with the tokens emitted by each verification step.
    fn observe(&mut self, _emitted: &[TokenId]) {}
}

impl<D: DraftSource + ?Sized> DraftSource for Box<D> {
    fn propose(&mut self, context: &[TokenId], gamma: usize) -> Result<Vec<TokenId>> {
        (**self).propose(context, gamma)
    }

    fn observe(&mut self, emitted: &[TokenId]) {
        (**self).observe(emitted)
    }
}

impl DraftSource for MixedDrafter<'_> {
    fn propose(&mut self, context: &[TokenId], gamma: usize) -> Result<Vec<TokenId>> {
        Ok(self.draft(context, gamma))
    }

    fn observe(&mut self, emitted: &[TokenId]) {
        if self.prompt().refresh_enabled() {
            self.prompt_mut().refresh(emitted);
        }
    }
}

/// Drafts with the target's own greedy function; every draft is accepted.
pub struct OracleDrafter<T> {
    target: T,
}

impl<T: TargetModel> OracleDrafter<T> {
    pub fn new(target: T) -> Self {
        Self { target }
    }
}

impl<T: TargetModel> DraftSource for OracleDrafter<T> {
    fn propose(&mut self, context: &[TokenId], gamma: usize) -> Result<Vec<TokenId>> {
        let mut work = context.to_vec();
        let mut out = Vec::with_capacity(gamma);
        for _ in 0..gamma {
            let t = self.target.greedy(&work)?;
            out.push(t);
            work.push(t);
        }
        Ok(out)
    }
}

/// Always proposes a token other than the target's greedy choice.
pub struct AdversarialDrafter<T> {
    target: T,
}

impl<T: TargetModel> AdversarialDrafter<T> {
    pub fn new(target: T) -> Self {
        Self { target }
    }
}

impl<T: TargetModel> DraftSource for AdversarialDrafter<T> {
    fn propose(&mut self, context: &[TokenId], gamma: usize) -> Result<Vec<TokenId>> {
        let vocab = self.target.vocab_size().max(2) as TokenId;
        let mut work = context.to_vec();
        let mut out = Vec::with_capacity(gamma);
        for _ in 0..gamma {
            let t = (self.target.greedy(&work)? + 1) % vocab;
            out.push(t);
            work.push(t);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StepRecord {
    pub drafted: Vec<TokenId>,
    /// Length of the accepted draft prefix.
    pub accepted: usize,
    pub correction: TokenId,
    pub target_calls: u32,
}

impl StepRecord {
    /// Tokens this step contributes before any truncation.
    pub fn emitted(&self) -> Vec<TokenId> {
        let mut v = self.drafted[..self.accepted].to_vec();
        v.push(self.correction);
        v
    }
}

/// Scores `drafted` against the target's greedy continuation of `context`.
pub fn verify<T: TargetModel + ?Sized>(target: &T, context: &[TokenId], drafted: &[TokenId]) -> Result<StepRecord> {
    if drafted.is_empty() {
        return Err(Error::param("drafted", "must contain at least one token"));
    }
    let mut work = Vec::with_capacity(context.len() + drafted.len());
    work.extend_from_slice(context);
    let mut accepted = 0;
    for &d in drafted {
        let g = target.greedy(&work)?;
        if g != d {
            return Ok(StepRecord {
                drafted: drafted.to_vec(),
                accepted,
                correction: g,
                target_calls: 1,
            });
        }
        work.push(g);
        accepted += 1;
    }
    Ok(StepRecord {
        drafted: drafted.to_vec(),
        accepted,
        correction: target.greedy(&work)?,
        target_calls: 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DecodeConfig {
    pub gamma: usize,
    pub max_tokens: usize,
    pub stop: Option<TokenId>,
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma == 0 {
            return Err(Error::param("gamma", "must be at least 1"));
        }
        if self.max_tokens == 0 {
            return Err(Error::param("max_tokens", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccelerationReport {
    pub gamma: usize,
    pub sessions: usize,
    pub total_tokens: u64,
    pub target_passes: u64,
    /// Draft tokens proposed in total.
    pub draft_calls: u64,
    /// Generated tokens per target pass.
    pub tokens_per_pass: f64,
    pub mean_accepted: f64,
    /// Entry `i` is the fraction of steps whose accepted prefix reaches
    /// position `i + 1`.
    pub acceptance_by_position: Vec<f64>,
    pub first_position_rate: f64,
}

impl AccelerationReport {
    pub fn from_steps(gamma: usize, sessions: usize, total_tokens: u64, steps: &[StepRecord]) -> Self {
        let target_passes: u64 = steps.iter().map(|s| u64::from(s.target_calls)).sum();
        let draft_calls = steps.iter().map(|s| s.drafted.len() as u64).sum();
        let by_position = acceptance_by_position(steps, gamma).unwrap_or_else(|_| vec![0.0; gamma]);
        let mean_accepted = if steps.is_empty() {
            0.0
        } else {
            steps.iter().map(|s| s.accepted as f64).sum::<f64>() / steps.len() as f64
        };
        Self {
            gamma,
            sessions,
            total_tokens,
            target_passes,
            draft_calls,
            tokens_per_pass: if target_passes == 0 {
                0.0
            } else {
                total_tokens as f64 / target_passes as f64
            },
            mean_accepted,
            first_position_rate: by_position.first().copied().unwrap_or(0.0),
            acceptance_by_position: by_position,
        }
    }

    /// Pools several sessions into one report.
    pub fn aggregate(gamma: usize, generations: &[Generation]) -> Self {
        let steps: Vec<StepRecord> = generations.iter().flat_map(|g| g.steps.iter().cloned()).collect();
        let total = generations.iter().map(|g| g.tokens.len() as u64).sum();
        Self::from_steps(gamma, generations.len(), total, &steps)
    }
}

/// `rate[i]` = fraction of steps with at least `i + 1` accepted tokens.
pub fn acceptance_by_position(records: &[StepRecord], gamma: usize) -> Result<Vec<f64>> {
    if records.is_empty() {
        return Err(Error::InsufficientData("no verification steps".into()));
    }
    let mut reached = vec![0u64; gamma];
    for r in records {
        for slot in reached.iter_mut().take(r.accepted.min(gamma)) {
            *slot += 1;
        }
    }
    let n = records.len() as f64;
    Ok(reached.into_iter().map(|c| c as f64 / n).collect())
}

/// Speedup over plain decoding when a target pass costs `cost_target` and
/// each drafted token costs `cost_draft`.
pub fn modeled_speedup(report: &AccelerationReport, cost_target: f64, cost_draft: f64) -> Result<f64> {
    if !(cost_target > 0.0 && cost_target.is_finite()) {
        return Err(Error::param("cost_target", "must be positive"));
    }
    if !(cost_draft >= 0.0 && cost_draft.is_finite()) {
        return Err(Error::param("cost_draft", "must be non-negative"));
    }
    let spent = report.target_passes as f64 * cost_target + report.draft_calls as f64 * cost_draft;
    if spent == 0.0 {
        return Err(Error::InsufficientData("report has no target passes".into()));
    }
    Ok(report.total_tokens as f64 * cost_target / spent)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generation {
    pub tokens: Vec<TokenId>,
    pub steps: Vec<StepRecord>,
}

impl Generation {
    pub fn report(&self, gamma: usize) -> AccelerationReport {
        AccelerationReport::from_steps(gamma, 1, self.tokens.len() as u64, &self.steps)
    }
}

/// Appends `emitted` to `out`, stopping at `max_tokens` or after the stop
/// token. Returns true when generation is finished.
fn append_bounded(out: &mut Vec<TokenId>, emitted: &[TokenId], max_tokens: usize, stop: Option<TokenId>) -> bool {
    for &t in emitted {
        out.push(t);
        if Some(t) == stop || out.len() >= max_tokens {
            return true;
        }
    }
    false
}

/// Speculative decoding of up to `max_tokens` tokens after `prompt`.
pub fn generate<T, D>(target: &T, drafter: &mut D, prompt: &[TokenId], config: &DecodeConfig) -> Result<Generation>
where
    T: TargetModel + ?Sized,
    D: DraftSource + ?Sized,
{
    config.validate()?;
    let mut context = prompt.to_vec();
    let mut tokens = Vec::with_capacity(config.max_tokens);
    let mut steps = Vec::new();
    loop {
        let drafted = drafter.propose(&context, config.gamma)?;
        if drafted.len() != config.gamma {
            return Err(Error::param(
                "drafter",
                format!("proposed {} tokens, expected {}", drafted.len(), config.gamma),
            ));
        }
        let step = verify(target, &context, &drafted)?;
        let before = tokens.len();
        let done = append_bounded(&mut tokens, &step.emitted(), config.max_tokens, config.stop);
        let emitted = &tokens[before..];
        context.extend_from_slice(emitted);
        drafter.observe(emitted);
        steps.push(step);
        if done {
            break;
        }
    }
    Ok(Generation { tokens, steps })
}

/// Plain greedy decoding with the same stopping rule as [`generate`].
pub fn greedy_decode<T: TargetModel + ?Sized>(
    target: &T,
    prompt: &[TokenId],
    max_tokens: usize,
    stop: Option<TokenId>,
) -> Result<Vec<TokenId>> {
    let mut context = prompt.to_vec();
    let mut out = Vec::with_capacity(max_tokens);
    while out.len() < max_tokens {
        let t = target.greedy(&context)?;
        out.push(t);
        context.push(t);
        if Some(t) == stop {
            break;
        }
    }
    Ok(out)
}

/// Runs one independent session per prompt, in parallel when enabled.
/// `make_drafter` builds the per-session drafter from the prompt.
pub fn generate_batch<T, D, F>(
    target: &T,
    prompts: &[Vec<TokenId>],
    config: &DecodeConfig,
    make_drafter: F,
) -> Result<Vec<Generation>>
where
    T: TargetModel + ?Sized,
    D: DraftSource,
    F: Fn(&[TokenId]) -> Result<D> + Sync + Send,
{
    par::try_map_collect(prompts, |p| {
        let mut d = make_drafter(p)?;
        generate(target, &mut d, p, config)
    })
}
