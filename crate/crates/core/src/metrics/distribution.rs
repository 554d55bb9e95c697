use crate::error::{Error, Result};

/// Absolute tolerance on `Σ p == 1`.
const SUM_TOLERANCE: f64 = 1e-9;

/// A finite distribution with keys kept in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDistribution<K> {
    support: Vec<(K, f64)>,
}

impl<K: Ord> EmpiricalDistribution<K> {
    /// Builds from `(key, probability)` pairs. Keys must be distinct and the
    /// probabilities non-negative and summing to one.
    pub fn new<I: IntoIterator<Item = (K, f64)>>(items: I) -> Result<Self> {
        let mut support: Vec<(K, f64)> = items.into_iter().collect();
        support.sort_by(|a, b| a.0.cmp(&b.0));
        if support.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidDistribution("duplicate key".into()));
        }
        let mut sum = 0.0;
        for (_, p) in &support {
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::InvalidDistribution(format!("probability {p} out of range")));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {sum}")));
        }
        Ok(Self { support })
    }

    /// Normalizes positive counts. Duplicate keys are summed.
    pub fn from_counts<I: IntoIterator<Item = (K, u64)>>(counts: I) -> Result<Self> {
        let mut items: Vec<(K, u64)> = counts.into_iter().filter(|(_, c)| *c > 0).collect();
        items.sort_by(|a, b| a.0.cmp(&b.0));
        let mut merged: Vec<(K, u64)> = Vec::with_capacity(items.len());
        for (k, c) in items {
            match merged.last_mut() {
                Some((lk, lc)) if *lk == k => *lc += c,
                _ => merged.push((k, c)),
            }
        }
        let total: u64 = merged.iter().map(|(_, c)| c).sum();
        if total == 0 {
            return Err(Error::InsufficientData("cannot normalize an empty count table".into()));
        }
        let total = total as f64;
        Ok(Self {
            support: merged.into_iter().map(|(k, c)| (k, c as f64 / total)).collect(),
        })
    }

    pub fn point_mass(key: K) -> Self {
        Self {
            support: vec![(key, 1.0)],
        }
    }

    pub fn uniform<I: IntoIterator<Item = K>>(keys: I) -> Result<Self> {
        let keys: Vec<K> = keys.into_iter().collect();
        let p = 1.0 / keys.len() as f64;
        Self::new(keys.into_iter().map(|k| (k, p)))
    }

    pub fn probability(&self, key: &K) -> f64 {
        self.support
            .binary_search_by(|(k, _)| k.cmp(key))
            .map(|i| self.support[i].1)
            .unwrap_or(0.0)
    }

    /// Most probable key; ties go to the smallest key.
    pub fn argmax(&self) -> Option<&K> {
        let mut best: Option<&(K, f64)> = None;
        for item in &self.support {
            if best.is_none_or(|b| item.1 > b.1) {
                best = Some(item);
            }
        }
        best.map(|(k, _)| k)
    }
}

impl<K> EmpiricalDistribution<K> {
    /// Skips the validation in [`EmpiricalDistribution::new`]; callers must
    /// pass sorted, distinct keys with valid probabilities.
    pub(crate) fn from_sorted_unchecked(support: Vec<(K, f64)>) -> Self {
        Self { support }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, f64)> {
        self.support.iter().map(|(k, p)| (k, *p))
    }

    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        self.support.iter().map(|(_, p)| *p)
    }

    /// Number of keys with positive probability.
    pub fn support_size(&self) -> usize {
        self.support.iter().filter(|(_, p)| *p > 0.0).count()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn into_inner(self) -> Vec<(K, f64)> {
        self.support
    }
}
