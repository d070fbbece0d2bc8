//! Descriptive statistics and histograms of simulated samples.

use crate::error::{domain, Result};

/// Probabilities of the reported quantiles.
pub const QUANTILE_LEVELS: [f64; 6] = [0.01, 0.05, 0.25, 0.75, 0.95, 0.99];

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Unbiased (n - 1) standard deviation.
    pub sd: f64,
    /// `None` for a constant sample.
    pub skewness: Option<f64>,
    pub excess_kurtosis: Option<f64>,
    /// Quantiles at [`QUANTILE_LEVELS`].
    pub quantiles: [f64; 6],
    /// Daily mean over sd; `None` when sd is zero.
    pub sharpe: Option<f64>,
}

impl SummaryStats {
    pub fn quantile(&self, level: f64) -> Option<f64> {
        QUANTILE_LEVELS.iter().position(|&l| l == level).map(|i| self.quantiles[i])
    }
}

/// Quantile by linear interpolation between order statistics of a sorted slice.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn summarize(sample: &[f64]) -> Result<SummaryStats> {
    if sample.len() < 2 {
        return domain(format!("summary needs at least 2 values, got {}", sample.len()));
    }
    if let Some(bad) = sample.iter().find(|v| !v.is_finite()) {
        return domain(format!("sample contains the non-finite value {bad}"));
    }
    let n = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for &v in sample {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let sd = (m2 / (n - 1.0)).sqrt();
    let (m2, m3, m4) = (m2 / n, m3 / n, m4 / n);
    // Rounding in the mean can leave a tiny spread in a constant sample.
    let constant = sample.iter().all(|&v| v == sample[0]);
    let (skewness, excess_kurtosis) =
        if constant || m2 == 0.0 { (None, None) } else { (Some(m3 / m2.powf(1.5)), Some(m4 / (m2 * m2) - 3.0)) };
    let sd = if constant { 0.0 } else { sd };

    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let quantiles = QUANTILE_LEVELS.map(|p| quantile_sorted(&sorted, p));
    Ok(SummaryStats {
        count: sample.len(),
        mean,
        median: quantile_sorted(&sorted, 0.5),
        sd,
        skewness,
        excess_kurtosis,
        quantiles,
        sharpe: (sd > 0.0).then(|| mean / sd),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    /// `counts.len() + 1` uniform edges.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Uniform bins over `[min, max]`, the last bin closed on the right.
///
/// A sample with no spread gets bins of width one starting at its value.
pub fn histogram(values: &[f64], n_bins: usize) -> Result<Histogram> {
    if values.is_empty() {
        return domain("cannot bin an empty sample");
    }
    if n_bins == 0 {
        return domain("n_bins must be >= 1");
    }
    if values.iter().any(|v| !v.is_finite()) {
        return domain("cannot bin non-finite values");
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let width = if hi > lo { (hi - lo) / n_bins as f64 } else { 1.0 };
    let edges: Vec<f64> = (0..=n_bins).map(|i| if i == n_bins && hi > lo { hi } else { lo + i as f64 * width }).collect();
    let mut counts = vec![0; n_bins];
    for &v in values {
        let bin = (((v - lo) / width) as usize).min(n_bins - 1);
        counts[bin] += 1;
    }
    Ok(Histogram { edges, counts })
}

/// Histogram of integer data such as inventory extremes.
pub fn histogram_ints(values: &[i64], n_bins: usize) -> Result<Histogram> {
    histogram(&values.iter().map(|&v| v as f64).collect::<Vec<_>>(), n_bins)
}
