//! Run parameters shared by every command. Flags fill a [`Params`]; a TOML
//! file given with `--config` is read into another `Params` and wins
//! wherever it sets a key.

use std::fs;
use std::path::Path;

use clap::Args;
use serde::{Deserialize, Serialize};
use tasc::corpus::CorpusFormat;
use tasc::drafter::{DEFAULT_GAMMA, DEFAULT_LAMBDA, DEFAULT_P_MIN};
use tasc::metrics::DEFAULT_COVERAGE_MASS;
use tasc::tokenizer::{AugmentationConfig, DEFAULT_PCS_THRESHOLD};

use crate::Failure;

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Params {
    /// Number of tokens to add to the vocabulary.
    #[arg(long, global = true)]
    pub budget: Option<usize>,
    /// Longest n-gram considered (merges and drafter tables).
    #[arg(long, global = true)]
    pub n_max: Option<usize>,
    /// Merges with a prefix collision score at or above this are rejected.
    #[arg(long, global = true)]
    pub pcs_threshold: Option<f64>,
    /// Corpus drafter entries seen fewer times are pruned.
    #[arg(long, global = true)]
    pub p_min: Option<u64>,
    /// Weight of the corpus drafter in the mixture.
    #[arg(long, global = true)]
    pub lambda: Option<f64>,
    /// Draft tokens per verification step.
    #[arg(long, global = true)]
    pub gamma: Option<usize>,
    /// Probability mass for coverage counts.
    #[arg(long, global = true)]
    pub mass: Option<f64>,
    /// Seed for prompt sampling and the random target.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Acceptances between n-gram recounts.
    #[arg(long, global = true)]
    pub recount_interval: Option<usize>,
    /// Corpus format: `tasc.v1` (JSONL) or `plain`.
    #[arg(long, global = true)]
    pub format: Option<String>,
}

impl Params {
    /// `self` with every key set in `file` replaced.
    pub fn overlay(self, file: Params) -> Params {
        Params {
            budget: file.budget.or(self.budget),
            n_max: file.n_max.or(self.n_max),
            pcs_threshold: file.pcs_threshold.or(self.pcs_threshold),
            p_min: file.p_min.or(self.p_min),
            lambda: file.lambda.or(self.lambda),
            gamma: file.gamma.or(self.gamma),
            mass: file.mass.or(self.mass),
            seed: file.seed.or(self.seed),
            recount_interval: file.recount_interval.or(self.recount_interval),
            format: file.format.or(self.format),
        }
    }

    pub fn from_file(path: &Path) -> Result<Params, Failure> {
        let text = fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
    }

    pub fn resolve(self) -> Result<RunConfig, Failure> {
        let format_name = self.format.unwrap_or_else(|| "tasc.v1".into());
        let format: CorpusFormat = format_name.parse().map_err(Failure::from)?;
        let cfg = RunConfig {
            budget: self.budget.unwrap_or(1000),
            n_max: self.n_max.unwrap_or(4),
            pcs_threshold: self.pcs_threshold.unwrap_or(DEFAULT_PCS_THRESHOLD),
            p_min: self.p_min.unwrap_or(DEFAULT_P_MIN),
            lambda: self.lambda.unwrap_or(DEFAULT_LAMBDA),
            gamma: self.gamma.unwrap_or(DEFAULT_GAMMA),
            mass: self.mass.unwrap_or(DEFAULT_COVERAGE_MASS),
            seed: self.seed.unwrap_or(0),
            recount_interval: self.recount_interval.unwrap_or(1),
            format: format_name,
            corpus_format: format,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub budget: usize,
    pub n_max: usize,
    pub pcs_threshold: f64,
    pub p_min: u64,
    pub lambda: f64,
    pub gamma: usize,
    pub mass: f64,
    pub seed: u64,
    pub recount_interval: usize,
    pub format: String,
    #[serde(skip)]
    pub corpus_format: CorpusFormat,
}

impl RunConfig {
    fn validate(&self) -> Result<(), Failure> {
        self.augmentation().validate()?;
        if self.p_min < 1 {
            return Err(Failure::input("--p-min must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Failure::input("--lambda must lie in [0, 1]"));
        }
        if self.gamma < 1 {
            return Err(Failure::input("--gamma must be at least 1"));
        }
        if !(self.mass > 0.0 && self.mass <= 1.0) {
            return Err(Failure::input("--mass must lie in (0, 1]"));
        }
        Ok(())
    }

    pub fn augmentation(&self) -> AugmentationConfig {
        AugmentationConfig {
            budget: self.budget,
            n_max: self.n_max,
            pcs_threshold: self.pcs_threshold,
            recount_interval: self.recount_interval,
        }
    }
}
