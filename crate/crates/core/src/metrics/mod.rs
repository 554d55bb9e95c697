//! Plug-in entropy estimates, typical-set coverage, and the runtime
//! predictor statistics. All entropies are reported in bits.

mod distribution;
mod kendall;
mod predictor;
mod variability;

pub use distribution::EmpiricalDistribution;
pub use kendall::{kendall_tau_b, KendallTau};
pub use predictor::{
    directional_success_rate, kendall_tau, predictor_report, ConfigSummary, DirectionalRate, PredictorPoint,
    PredictorReport, PredictorSeries,
};
pub use variability::{variability_report, word_ngrams, Normalization, VariabilityReport, DEFAULT_COVERAGE_MASS};

use crate::error::{Error, Result};

/// `-Σ p log₂ p`, with `0 log 0 = 0`.
pub fn shannon_entropy<K>(dist: &EmpiricalDistribution<K>) -> f64 {
    let h: f64 = dist.probabilities().filter(|&p| p > 0.0).map(|p| -p * p.log2()).sum();
    h.max(0.0)
}

/// Rényi entropy of order `alpha` (`alpha > 0`, `alpha != 1`) in bits.
pub fn renyi_entropy<K>(dist: &EmpiricalDistribution<K>, alpha: f64) -> Result<f64> {
    if !(alpha.is_finite() && alpha > 0.0) || alpha == 1.0 {
        return Err(Error::param(
            "alpha",
            format!("Rényi order must be positive and not 1, got {alpha}"),
        ));
    }
    let sum: f64 = dist.probabilities().filter(|&p| p > 0.0).map(|p| p.powf(alpha)).sum();
    Ok((sum.log2() / (1.0 - alpha)).max(0.0))
}

/// Shannon entropy divided by `log₂ vocab_size`.
pub fn normalized_entropy<K>(dist: &EmpiricalDistribution<K>, vocab_size: usize) -> Result<f64> {
    let support = dist.support_size();
    if vocab_size < support {
        return Err(Error::param(
            "vocab_size",
            format!("{vocab_size} is smaller than the support size {support}"),
        ));
    }
    if vocab_size <= 1 {
        return Ok(0.0);
    }
    Ok(shannon_entropy(dist) / (vocab_size as f64).log2())
}

/// Absolute slack when comparing a floating prefix sum against `mass`.
const MASS_EPS: f64 = 1e-12;

/// Smallest number of most-probable items whose mass reaches `mass`.
/// Ties in probability are broken by key order.
pub fn coverage_count<K: Ord>(dist: &EmpiricalDistribution<K>, mass: f64) -> Result<usize> {
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::param("mass", format!("must lie in (0, 1], got {mass}")));
    }
    let mut probs: Vec<(&K, f64)> = dist.iter().collect();
    probs.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let mut acc = 0.0;
    for (i, (_, p)) in probs.iter().enumerate() {
        acc += p;
        if acc >= mass - MASS_EPS {
            return Ok(i + 1);
        }
    }
    Ok(probs.len().max(1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(p: &[f64]) -> EmpiricalDistribution<usize> {
        EmpiricalDistribution::new(p.iter().copied().enumerate()).unwrap()
    }

    #[test]
    fn shannon_closed_forms() {
        assert!((shannon_entropy(&dist(&[0.25; 4])) - 2.0).abs() < 1e-12);
        assert_eq!(shannon_entropy(&EmpiricalDistribution::point_mass(3)), 0.0);
        assert!((shannon_entropy(&dist(&[0.5, 0.25, 0.25])) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn renyi_closed_forms() {
        let u = dist(&[0.2; 5]);
        for a in [0.5, 2.0, 3.0, 10.0] {
            assert!((renyi_entropy(&u, a).unwrap() - 5f64.log2()).abs() < 1e-12);
        }
        assert_eq!(renyi_entropy(&EmpiricalDistribution::point_mass(1), 2.0).unwrap(), 0.0);
        assert!((renyi_entropy(&dist(&[0.5, 0.5]), 2.0).unwrap() - 1.0).abs() < 1e-12);
        let h2 = renyi_entropy(&dist(&[0.75, 0.25]), 2.0).unwrap();
        assert!((h2 - -(0.625f64).log2()).abs() < 1e-12);
        assert!((h2 - 0.678).abs() < 1e-3);
    }

    #[test]
    fn renyi_rejects_bad_alpha() {
        let d = dist(&[0.5, 0.5]);
        for a in [1.0, 0.0, -1.0, f64::NAN] {
            assert!(renyi_entropy(&d, a).is_err());
        }
    }

    #[test]
    fn normalized_bounds() {
        assert!((normalized_entropy(&dist(&[0.125; 8]), 8).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            normalized_entropy(&EmpiricalDistribution::point_mass(0), 8).unwrap(),
            0.0
        );
        assert!(normalized_entropy(&dist(&[0.5, 0.5]), 1).is_err());
    }

    #[test]
    fn coverage_basic() {
        assert_eq!(coverage_count(&EmpiricalDistribution::point_mass(0), 0.8).unwrap(), 1);
        assert_eq!(coverage_count(&dist(&[0.1; 10]), 0.8).unwrap(), 8);
        assert_eq!(coverage_count(&dist(&[0.1; 10]), 1.0).unwrap(), 10);
        assert!(coverage_count(&dist(&[1.0]), 0.0).is_err());
    }
}
