//! Rank statistics: the two-group Kruskal-Wallis test.

use crate::error::{Error, Result};

/// Average ranks (1-based) of the values, ties sharing the mean of their
/// rank range.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // tied block occupies ranks i+1..=j; all receive the mean
        let rank = (i + 1 + j) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    ranks
}

/// Survival function of the chi-square distribution with one degree of
/// freedom, through the complementary error function identity
/// `P(X > x) = erfc(sqrt(x / 2))`.
pub fn chi2_sf_1df(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    libm::erfc((x / 2.0).sqrt())
}

/// Two-group Kruskal-Wallis test.
///
/// Pools both groups, ranks with tie averaging, computes
/// `H = 12 / (N (N+1)) * sum_i n_i (mean_rank_i - (N+1)/2)^2`, applies the
/// tie correction divisor `1 - sum(t^3 - t) / (N^3 - N)`, and derives the
/// p-value from the chi-square distribution with one degree of freedom.
/// When every pooled value is identical the statistic is 0 and p is 1.
pub fn kruskal_wallis(group1: &[f64], group2: &[f64]) -> Result<(f64, f64)> {
    if group1.is_empty() || group2.is_empty() {
        return Err(Error::Data(
            "kruskal_wallis requires at least one value per group".to_string(),
        ));
    }
    let n1 = group1.len();
    let n2 = group2.len();
    let n = n1 + n2;
    let mut pooled = Vec::with_capacity(n);
    pooled.extend_from_slice(group1);
    pooled.extend_from_slice(group2);
    let ranks = average_ranks(&pooled);

    let correction = tie_correction(&pooled);
    if correction == 0.0 {
        // all values identical
        return Ok((0.0, 1.0));
    }

    let mean1: f64 = ranks[..n1].iter().sum::<f64>() / n1 as f64;
    let mean2: f64 = ranks[n1..].iter().sum::<f64>() / n2 as f64;
    let grand = (n + 1) as f64 / 2.0;
    let h_raw = 12.0 / (n as f64 * (n + 1) as f64)
        * (n1 as f64 * (mean1 - grand).powi(2) + n2 as f64 * (mean2 - grand).powi(2));
    let h = (h_raw / correction).max(0.0);
    let p = chi2_sf_1df(h).clamp(f64::MIN_POSITIVE, 1.0);
    Ok((h, p))
}

/// The tie correction divisor `1 - sum(t^3 - t) / (N^3 - N)` over tie group
/// sizes `t`. Zero exactly when all values are identical.
fn tie_correction(pooled: &[f64]) -> f64 {
    let n = pooled.len();
    if n < 2 {
        return 1.0;
    }
    let mut sorted = pooled.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_sum = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_sum += t * t * t - t;
        i = j;
    }
    1.0 - tie_sum / ((n * n * n - n) as f64)
}
