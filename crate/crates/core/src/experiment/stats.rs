//! Bootstrap intervals and the Wilcoxon rank-sum test.

use rand::Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// Sample mean with a percentile bootstrap interval at `level` (e.g. 0.95).
pub fn bootstrap_ci<R: Rng + ?Sized>(
    values: &[f64],
    resamples: usize,
    level: f64,
    rng: &mut R,
) -> (f64, f64, f64) {
    assert!(!values.is_empty() && resamples > 0);
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| (0..n).map(|_| values[rng.random_range(0..n)]).sum::<f64>() / n as f64)
        .collect();
    means.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    (mean, quantile(&means, alpha), quantile(&means, 1.0 - alpha))
}

/// Linear interpolation between order statistics of a sorted slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos.fract());
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

/// Ranks starting at 1; tied values share their mean rank.
pub fn midranks(values: &[f64]) -> (Vec<f64>, bool) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = false;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        ties |= j > i;
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    (ranks, ties)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankSum {
    pub n1: usize,
    pub n2: usize,
    /// Rank sum of the first sample.
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    /// Exact null distribution rather than the normal approximation.
    pub exact: bool,
}

/// Largest pooled sample for which the exact distribution is tabulated.
const EXACT_LIMIT: usize = 60;

/// Number of `k`-subsets of `{1..=n}` with each possible sum, `counts[k][s]`.
fn subset_sum_counts(n: usize, k: usize) -> Vec<f64> {
    let max = k * (2 * n - k + 1) / 2;
    let mut c = vec![vec![0.0f64; max + 1]; k + 1];
    c[0][0] = 1.0;
    for v in 1..=n {
        for j in (1..=k.min(v)).rev() {
            for s in (v..=max).rev() {
                c[j][s] += c[j - 1][s - v];
            }
        }
    }
    c.swap_remove(k)
}

pub fn rank_sum(a: &[f64], b: &[f64]) -> Option<RankSum> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let (n1, n2) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let (ranks, ties) = midranks(&pooled);
    let w: f64 = ranks[..n1].iter().sum();
    let n = n1 + n2;

    if !ties && n <= EXACT_LIMIT {
        let counts = subset_sum_counts(n, n1);
        let total: f64 = counts.iter().sum();
        let w = w.round() as usize;
        let below: f64 = counts[..=w].iter().sum::<f64>() / total;
        let above: f64 = counts[w..].iter().sum::<f64>() / total;
        return Some(RankSum {
            n1,
            n2,
            statistic: w as f64,
            p_value: (2.0 * below.min(above)).min(1.0),
            exact: true,
        });
    }

    let mean = n1 as f64 * (n as f64 + 1.0) / 2.0;
    let mut tie_term = 0.0;
    let mut sorted = pooled.clone();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < n {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        tie_term += (j * j * j - j) as f64;
        i += j;
    }
    let var = n1 as f64 * n2 as f64 / 12.0
        * ((n as f64 + 1.0) - tie_term / (n as f64 * (n as f64 - 1.0)));
    let p_value = if var > 0.0 {
        // continuity correction
        let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let std = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * (1.0 - std.cdf(z))).min(1.0)
    } else {
        1.0
    };
    Some(RankSum {
        n1,
        n2,
        statistic: w,
        p_value,
        exact: false,
    })
}
