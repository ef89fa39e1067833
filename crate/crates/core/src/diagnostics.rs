//! Goodness-of-fit statistics used to check sampler output.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Result of a hypothesis test.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k>=1} (-1)^{k-1} exp(-2 k² λ²)`.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 1e-3 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for k in 1..=100 {
        let k = k as f64;
        let term = (-2.0 * k * k * lambda * lambda).exp();
        sum += sign * term;
        if term < 1e-16 * sum.abs() {
            break;
        }
        sign = -sign;
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn ks_p_value(d: f64, effective_n: f64) -> f64 {
    let s = effective_n.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

/// One-sample Kolmogorov-Smirnov test of `data` against a continuous CDF.
pub fn ks_one_sample(data: &[f64], cdf: impl Fn(f64) -> f64) -> TestResult {
    let mut x = data.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &v) in x.iter().enumerate() {
        let f = cdf(v);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    TestResult {
        statistic: d,
        p_value: ks_p_value(d, n),
    }
}

/// Two-sample Kolmogorov-Smirnov test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> TestResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    TestResult {
        statistic: d,
        p_value: ks_p_value(d, na * nb / (na + nb)),
    }
}

/// Chi-square test of homogeneity for a contingency table whose rows are
/// samples and whose columns are categories. Columns that are empty in every
/// row are dropped.
pub fn chi_square_homogeneity(table: &[Vec<u64>]) -> TestResult {
    let cols = table.iter().map(Vec::len).max().unwrap_or(0);
    let column_total = |c: usize| -> f64 {
        table.iter().map(|r| r.get(c).copied().unwrap_or(0) as f64).sum()
    };
    let used: Vec<usize> = (0..cols).filter(|&c| column_total(c) > 0.0).collect();
    let row_totals: Vec<f64> = table.iter().map(|r| r.iter().sum::<u64>() as f64).collect();
    let total: f64 = row_totals.iter().sum();
    let mut stat = 0.0;
    for (r, row) in table.iter().enumerate() {
        for &c in &used {
            let expected = row_totals[r] * column_total(c) / total;
            if expected > 0.0 {
                let observed = row.get(c).copied().unwrap_or(0) as f64;
                stat += (observed - expected).powi(2) / expected;
            }
        }
    }
    let dof = (table.len().saturating_sub(1) * used.len().saturating_sub(1)) as f64;
    let p_value = if dof == 0.0 {
        1.0
    } else {
        ChiSquared::new(dof).map_or(f64::NAN, |d| d.sf(stat))
    };
    TestResult {
        statistic: stat,
        p_value,
    }
}

/// Histogram of small nonnegative integers.
pub fn count_histogram(values: impl IntoIterator<Item = usize>) -> Vec<u64> {
    let mut h = Vec::new();
    for v in values {
        if h.len() <= v {
            h.resize(v + 1, 0);
        }
        h[v] += 1;
    }
    h
}
