//! Kendall's tau-b in O(n log n) (Knight's merge-sort algorithm).
//!
//! The two-sided p-value is exact for tie-free samples of at most
//! [`EXACT_MAX_N`] points and uses the tie-corrected normal approximation
//! otherwise.

use serde::Serialize;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub const EXACT_MAX_N: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KendallTau {
    pub tau: f64,
    pub p_value: f64,
    pub n: usize,
    /// `concordant - discordant`.
    pub score: i64,
    pub exact: bool,
}

fn tied_pair_stats(sorted: &[f64]) -> (u64, f64, f64, f64) {
    // (pairs, Σ t(t-1)(2t+5), Σ t(t-1)(t-2), Σ t(t-1)) over runs of ties
    let (mut pairs, mut v0, mut v1, mut v2) = (0u64, 0.0, 0.0, 0.0);
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as u64;
        if t > 1 {
            pairs += t * (t - 1) / 2;
            let t = t as f64;
            v0 += t * (t - 1.0) * (2.0 * t + 5.0);
            v1 += t * (t - 1.0) * (t - 2.0);
            v2 += t * (t - 1.0);
        }
        i = j;
    }
    (pairs, v0, v1, v2)
}

/// Sorts `v` and returns the number of inversions removed.
fn merge_sort_count(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_sort_count(&mut v[..mid], &mut buf[..mid]);
    swaps += merge_sort_count(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Counts of permutations of `n` items by number of inversions.
fn mahonian(n: usize) -> Vec<f64> {
    let mut row = vec![1.0];
    for i in 2..=n {
        let mut next = vec![0.0; row.len() + i - 1];
        for (k, &c) in row.iter().enumerate() {
            for slot in &mut next[k..k + i] {
                *slot += c;
            }
        }
        row = next;
    }
    row
}

fn exact_p(n: usize, discordant: u64) -> f64 {
    let total_pairs = (n * (n - 1) / 2) as u64;
    let c = discordant.min(total_pairs - discordant) as usize;
    let counts = mahonian(n);
    let all: f64 = counts.iter().sum();
    let tail: f64 = counts[..=c].iter().sum();
    (2.0 * tail / all).min(1.0)
}

pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<KendallTau> {
    if x.len() != y.len() {
        return Err(Error::param(
            "series",
            format!("length mismatch: {} vs {}", x.len(), y.len()),
        ));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "kendall tau needs at least 2 points, got {n}"
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::param("series", "values must be finite"));
    }

    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));

    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let (x_ties, xv0, xv1, xv2) = tied_pair_stats(&xs);

    let mut joint_ties = 0u64;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && pairs[j] == pairs[i] {
            j += 1;
        }
        let t = (j - i) as u64;
        joint_ties += t * (t - 1) / 2;
        i = j;
    }

    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let discordant = merge_sort_count(&mut ys, &mut buf);
    let (y_ties, yv0, yv1, yv2) = tied_pair_stats(&ys);

    let total = (n * (n - 1) / 2) as u64;
    let score = total as i64 - x_ties as i64 - y_ties as i64 + joint_ties as i64 - 2 * discordant as i64;
    let denom = ((total - x_ties) as f64 * (total - y_ties) as f64).sqrt();
    if denom == 0.0 {
        return Err(Error::InsufficientData(
            "kendall tau is undefined for a constant series".into(),
        ));
    }
    let tau = (score as f64 / denom).clamp(-1.0, 1.0);

    let exact = x_ties == 0 && y_ties == 0 && n <= EXACT_MAX_N;
    let p_value = if exact {
        exact_p(n, discordant)
    } else {
        let nf = n as f64;
        let mut var = (nf * (nf - 1.0) * (2.0 * nf + 5.0) - xv0 - yv0) / 18.0;
        if n > 2 {
            var += xv1 * yv1 / (9.0 * nf * (nf - 1.0) * (nf - 2.0));
        }
        var += xv2 * yv2 / (2.0 * nf * (nf - 1.0));
        let z = score as f64 / var.sqrt();
        erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
    };

    Ok(KendallTau {
        tau,
        p_value,
        n,
        score,
        exact,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_orderings() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let r = kendall_tau_b(&x, &[10.0, 20.0, 30.0, 40.0]).unwrap();
        assert_eq!(r.tau, 1.0);
        let r = kendall_tau_b(&x, &[4.0, 3.0, 2.0, 1.0]).unwrap();
        assert_eq!(r.tau, -1.0);
        // only 1 of 24 permutations is fully inverted: p = 2/24
        assert!((r.p_value - 2.0 / 24.0).abs() < 1e-12);
    }

    #[test]
    fn mahonian_rows() {
        assert_eq!(mahonian(3), vec![1.0, 2.0, 2.0, 1.0]);
        assert_eq!(mahonian(4).iter().sum::<f64>(), 24.0);
    }

    #[test]
    fn errors() {
        assert!(kendall_tau_b(&[1.0], &[1.0]).is_err());
        assert!(kendall_tau_b(&[1.0, 2.0], &[1.0]).is_err());
        assert!(kendall_tau_b(&[1.0, 1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn large_sample_uses_normal_approximation() {
        let x: Vec<f64> = (0..30).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| -v).collect();
        let r = kendall_tau_b(&x, &y).unwrap();
        assert!(!r.exact);
        assert_eq!(r.tau, -1.0);
        assert!(r.p_value < 1e-9);
    }
}
