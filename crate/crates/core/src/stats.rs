//! Deterministic summary statistics and the two-sample Kolmogorov-Smirnov
//! test.

use serde::Serialize;

/// Pairwise (cascade) summation; the result depends only on the order of
/// the input, not on how it was produced.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    const LEAF: usize = 32;
    if xs.len() <= LEAF {
        return xs.iter().sum();
    }
    let mid = xs.len() / 2;
    pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    pairwise_sum(xs) / xs.len() as f64
}

/// Sample mean and standard error of the mean (`s/√n`, unbiased `s²`).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len();
    let m = mean(xs);
    if n < 2 {
        return (m, if n == 1 { 0.0 } else { f64::NAN });
    }
    let dev: Vec<f64> = xs.iter().map(|x| (x - m) * (x - m)).collect();
    let var = pairwise_sum(&dev) / (n - 1) as f64;
    (m, (var / n as f64).sqrt())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Two-sample KS test with the asymptotic Kolmogorov distribution and the
/// usual small-sample correction of the argument.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len(), y.len());
    if n == 0 || m == 0 {
        return KsResult {
            statistic: 0.0,
            p_value: 1.0,
        };
    }
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = x[i].min(y[j]);
        while i < n && x[i] <= v {
            i += 1;
        }
        while j < m && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n as f64 * m as f64 / (n + m) as f64).sqrt();
    let lambda = (ne + 0.12 + 0.11 / ne) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
    }
}

/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} exp(-2k²λ²)`, clamped to `[0, 1]`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=200 {
        let kf = k as f64;
        let term = sign * (-2.0 * kf * kf * lambda * lambda).exp();
        sum += term;
        if term.abs() < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{fill_normal, path_rng};

    #[test]
    fn pairwise_matches_naive_on_small_input() {
        let xs: Vec<f64> = (0..100).map(|i| i as f64).collect();
        assert_eq!(pairwise_sum(&xs), 4950.0);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn stderr_of_known_sample() {
        let (m, se) = mean_stderr(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, 2.5);
        assert!((se - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_stderr(&[3.0, 3.0, 3.0]), (3.0, 0.0));
    }

    #[test]
    fn kolmogorov_reference_values() {
        // Q(1.36) ≈ 0.0505 and Q(1.63) ≈ 0.0098 are the textbook 5% and 1%
        // critical points.
        assert!((kolmogorov_q(1.36) - 0.04949).abs() < 1e-4);
        assert!((kolmogorov_q(1.63) - 0.0098).abs() < 3e-4);
        assert_eq!(kolmogorov_q(0.0), 1.0);
        assert!(kolmogorov_q(5.0) < 1e-20);
    }

    #[test]
    fn ks_same_and_shifted() {
        let mut r = path_rng(1, 0);
        let mut a = vec![0.0; 4000];
        let mut b = vec![0.0; 4000];
        fill_normal(&mut r, 1.0, &mut a);
        fill_normal(&mut r, 1.0, &mut b);
        assert!(ks_two_sample(&a, &b).p_value > 0.01);
        let shifted: Vec<f64> = b.iter().map(|v| v + 0.2).collect();
        assert!(ks_two_sample(&a, &shifted).p_value < 1e-6);
        let same = ks_two_sample(&a, &a);
        assert_eq!(same.statistic, 0.0);
    }
}
