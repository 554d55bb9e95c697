//! Word n-gram variability of inputs versus outputs.

use std::collections::HashMap;
use std::str::FromStr;

use serde::Serialize;

use crate::corpus::{Side, TaskCorpus};
use crate::error::{Error, Result};
use crate::par;

use super::{coverage_count, shannon_entropy, EmpiricalDistribution};

pub const DEFAULT_COVERAGE_MASS: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Normalization {
    #[default]
    None,
    Lower,
    LowerStripPunct,
}

impl FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Normalization::None),
            "lower" => Ok(Normalization::Lower),
            "lower+strip-punct" | "lower-strip-punct" => Ok(Normalization::LowerStripPunct),
            other => Err(Error::param(
                "normalization",
                format!("unknown normalization `{other}`"),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariabilityReport {
    pub n: usize,
    pub normalization: Normalization,
    pub mass: f64,
    pub input_entropy: f64,
    pub output_entropy: f64,
    /// `100 * (output - input) / input`; absent when the input entropy is 0.
    pub delta_pct: Option<f64>,
    pub input_cov80: usize,
    pub output_cov80: usize,
    pub cov_ratio: f64,
    pub input_unique: usize,
    pub output_unique: usize,
    pub input_total: u64,
    pub output_total: u64,
}

fn normalize(text: &str, norm: Normalization) -> String {
    match norm {
        Normalization::None => text.to_string(),
        Normalization::Lower => text.to_lowercase(),
        Normalization::LowerStripPunct => text
            .to_lowercase()
            .chars()
            .filter(|c| c.is_alphanumeric() || c.is_whitespace())
            .collect(),
    }
}

/// Whitespace-split word n-grams of one text, joined by single spaces.
pub fn word_ngrams(text: &str, n: usize, norm: Normalization) -> Vec<String> {
    let text = normalize(text, norm);
    let words: Vec<&str> = text.split_whitespace().collect();
    if n == 0 || words.len() < n {
        return Vec::new();
    }
    words.windows(n).map(|w| w.join(" ")).collect()
}

struct SideStats {
    entropy: f64,
    coverage: usize,
    unique: usize,
    total: u64,
}

fn side_stats(corpus: &TaskCorpus, side: Side, n: usize, norm: Normalization, mass: f64) -> Result<SideStats> {
    let counts = par::fold_reduce(
        corpus.documents(),
        HashMap::<String, u64>::new,
        |mut acc, doc| {
            for g in word_ngrams(doc.text(side), n, norm) {
                *acc.entry(g).or_insert(0) += 1;
            }
            acc
        },
        |mut a, b| {
            for (k, v) in b {
                *a.entry(k).or_insert(0) += v;
            }
            a
        },
    );
    let total: u64 = counts.values().sum();
    if total == 0 {
        let name = match side {
            Side::Input => "input",
            Side::Output => "output",
        };
        return Err(Error::InsufficientData(format!(
            "the {name} side has no word {n}-grams"
        )));
    }
    let unique = counts.len();
    let dist = EmpiricalDistribution::from_counts(counts)?;
    Ok(SideStats {
        entropy: shannon_entropy(&dist),
        coverage: coverage_count(&dist, mass)?,
        unique,
        total,
    })
}

/// Word n-gram entropy and `mass`-coverage for inputs and outputs.
pub fn variability_report(
    corpus: &TaskCorpus,
    n: usize,
    normalization: Normalization,
    mass: f64,
) -> Result<VariabilityReport> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    let input = side_stats(corpus, Side::Input, n, normalization, mass)?;
    let output = side_stats(corpus, Side::Output, n, normalization, mass)?;
    let delta_pct = (input.entropy > 0.0).then(|| 100.0 * (output.entropy - input.entropy) / input.entropy);
    Ok(VariabilityReport {
        n,
        normalization,
        mass,
        input_entropy: input.entropy,
        output_entropy: output.entropy,
        delta_pct,
        input_cov80: input.coverage,
        output_cov80: output.coverage,
        cov_ratio: input.coverage as f64 / output.coverage as f64,
        input_unique: input.unique,
        output_unique: output.unique,
        input_total: input.total,
        output_total: output.total,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;

    #[test]
    fn word_bigrams() {
        assert_eq!(word_ngrams("a b  c", 2, Normalization::None), ["a b", "b c"]);
        assert_eq!(
            word_ngrams("Hi, There!", 1, Normalization::LowerStripPunct),
            ["hi", "there"]
        );
        assert_eq!(word_ngrams("Hi", 1, Normalization::Lower), ["hi"]);
        assert!(word_ngrams("one", 2, Normalization::None).is_empty());
    }

    #[test]
    fn symmetric_corpus() {
        let docs = ["the cat sat", "a dog ran home", "the cat ran"]
            .iter()
            .map(|t| Document::new(*t, *t))
            .collect();
        let c = TaskCorpus::new("sym", docs).unwrap();
        let r = variability_report(&c, 2, Normalization::None, 0.8).unwrap();
        assert_eq!(r.delta_pct, Some(0.0));
        assert_eq!(r.cov_ratio, 1.0);
    }

    #[test]
    fn constant_output() {
        let docs = (0..20)
            .map(|i| Document::new(format!("question number {i}"), "yes"))
            .collect();
        let c = TaskCorpus::new("c", docs).unwrap();
        let r = variability_report(&c, 1, Normalization::None, 0.8).unwrap();
        assert_eq!(r.output_entropy, 0.0);
        assert_eq!(r.output_cov80, 1);
        assert!(r.delta_pct.unwrap() < 0.0);
    }

    #[test]
    fn empty_input_side() {
        let c = TaskCorpus::from_outputs("c", ["a b"]).unwrap();
        assert!(matches!(
            variability_report(&c, 1, Normalization::None, 0.8),
            Err(Error::InsufficientData(_))
        ));
    }
}
