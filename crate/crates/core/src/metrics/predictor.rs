//! Does a larger H₂ of the enriched token distribution predict a lower
//! post-fine-tuning runtime? Series of `(M, H₂(M), runtime(M))` grouped by
//! configuration are scored with per-configuration Kendall tau and with the
//! rate at which an H₂ increase is followed by a runtime decrease.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::kendall::{kendall_tau_b, KendallTau};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorPoint {
    #[serde(rename = "M")]
    pub budget: u64,
    pub h2: f64,
    pub runtime: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PredictorSeries {
    configs: Vec<(String, Vec<PredictorPoint>)>,
}

#[derive(Deserialize)]
struct Row {
    config_id: String,
    #[serde(rename = "M")]
    budget: u64,
    h2: f64,
    runtime: f64,
}

impl PredictorSeries {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a point. Budgets must be strictly increasing within a
    /// configuration.
    pub fn push(&mut self, config: &str, point: PredictorPoint) -> Result<()> {
        if !(point.h2.is_finite() && point.runtime.is_finite()) {
            return Err(Error::param(
                "series",
                format!("non-finite value in configuration {config}"),
            ));
        }
        let idx = match self.configs.iter().position(|(c, _)| c == config) {
            Some(i) => i,
            None => {
                self.configs.push((config.to_string(), Vec::new()));
                self.configs.len() - 1
            }
        };
        let points = &mut self.configs[idx].1;
        if let Some(last) = points.last() {
            if point.budget <= last.budget {
                return Err(Error::param(
                    "series",
                    format!(
                        "budgets must increase within configuration {config}: {} after {}",
                        point.budget, last.budget
                    ),
                ));
            }
        }
        points.push(point);
        Ok(())
    }

    /// Reads a CSV table with header `config_id,M,h2,runtime`.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut series = Self::new();
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        for (i, row) in rdr.deserialize::<Row>().enumerate() {
            let row = row.map_err(|e| Error::MalformedRecord {
                line: i + 2,
                message: e.to_string(),
            })?;
            series
                .push(
                    &row.config_id,
                    PredictorPoint {
                        budget: row.budget,
                        h2: row.h2,
                        runtime: row.runtime,
                    },
                )
                .map_err(|e| Error::MalformedRecord {
                    line: i + 2,
                    message: e.to_string(),
                })?;
        }
        Ok(series)
    }

    pub fn configs(&self) -> impl Iterator<Item = (&str, &[PredictorPoint])> {
        self.configs.iter().map(|(c, p)| (c.as_str(), p.as_slice()))
    }

    pub fn points(&self, config: &str) -> Option<&[PredictorPoint]> {
        self.configs
            .iter()
            .find(|(c, _)| c == config)
            .map(|(_, p)| p.as_slice())
    }
}

/// Kendall tau-b between H₂ and runtime within one configuration.
pub fn kendall_tau(series: &PredictorSeries, config: &str) -> Result<KendallTau> {
    let points = series
        .points(config)
        .ok_or_else(|| Error::param("config", format!("unknown configuration {config:?}")))?;
    let h2: Vec<f64> = points.iter().map(|p| p.h2).collect();
    let runtime: Vec<f64> = points.iter().map(|p| p.runtime).collect();
    kendall_tau_b(&h2, &runtime)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirectionalRate {
    pub rate: f64,
    pub successes: usize,
    pub transitions_used: usize,
}

/// Among consecutive within-configuration transitions where H₂ increases,
/// the fraction where runtime decreases.
pub fn directional_success_rate(series: &PredictorSeries) -> Result<DirectionalRate> {
    let mut used = 0;
    let mut successes = 0;
    for (_, points) in series.configs() {
        for w in points.windows(2) {
            if w[1].h2 - w[0].h2 > 0.0 {
                used += 1;
                if w[1].runtime - w[0].runtime < 0.0 {
                    successes += 1;
                }
            }
        }
    }
    if used == 0 {
        return Err(Error::InsufficientData("no transition with increasing H2".into()));
    }
    Ok(DirectionalRate {
        rate: successes as f64 / used as f64,
        successes,
        transitions_used: used,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigSummary {
    pub config_id: String,
    pub points: usize,
    pub tau: f64,
    pub p_value: f64,
    pub exact_p: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictorReport {
    pub configs: Vec<ConfigSummary>,
    pub mean_tau: Option<f64>,
    pub directional: Option<DirectionalRate>,
    /// Configurations left out of the tau statistics, with the reason.
    pub excluded: Vec<(String, String)>,
}

pub fn predictor_report(series: &PredictorSeries) -> PredictorReport {
    let mut configs = Vec::new();
    let mut excluded = Vec::new();
    for (id, points) in series.configs() {
        match kendall_tau(series, id) {
            Ok(k) => configs.push(ConfigSummary {
                config_id: id.to_string(),
                points: points.len(),
                tau: k.tau,
                p_value: k.p_value,
                exact_p: k.exact,
            }),
            Err(e) => excluded.push((id.to_string(), e.to_string())),
        }
    }
    let mean_tau = (!configs.is_empty()).then(|| configs.iter().map(|c| c.tau).sum::<f64>() / configs.len() as f64);
    PredictorReport {
        configs,
        mean_tau,
        directional: directional_success_rate(series).ok(),
        excluded,
    }
}
