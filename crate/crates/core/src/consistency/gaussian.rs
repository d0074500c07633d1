//! Empirical distribution of a normalized sequence against the standard normal.

use statrs::distribution::{ContinuousCDF, Normal};

/// Quantile grid `−4, −3.9, …, 4` and histogram range `[−4, 4]`.
const GRID_HALF_WIDTH: f64 = 4.0;
const GRID_POINTS: usize = 81;
const HIST_BINS: usize = 80;
/// Kolmogorov–Smirnov critical value at 1% significance, `≈ 1.628 / √N`.
const KS_CRITICAL: f64 = 1.628;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianityReport {
    pub samples: usize,
    /// `(z, F_empirical(z), Φ(z))` on the quantile grid.
    pub cdf: Vec<(f64, f64, f64)>,
    /// Bin edges of the histogram, `HIST_BINS + 1` values.
    pub edges: Vec<f64>,
    /// Counts per bin; `underflow + Σ counts + overflow = samples`.
    pub counts: Vec<u64>,
    pub underflow: u64,
    pub overflow: u64,
    /// `sup_x |F_empirical(x) − Φ(x)|`.
    pub ks_statistic: f64,
    pub ks_threshold: f64,
}

impl GaussianityReport {
    pub fn flagged(&self) -> bool {
        self.ks_statistic > self.ks_threshold
    }

    /// Histogram density per bin.
    pub fn pdf(&self) -> Vec<f64> {
        let width = self.edges[1] - self.edges[0];
        self.counts
            .iter()
            .map(|&c| c as f64 / (self.samples as f64 * width))
            .collect()
    }

    /// Largest deviation from `Φ` on the quantile grid.
    pub fn max_grid_deviation(&self) -> f64 {
        self.cdf
            .iter()
            .map(|(_, e, t)| (e - t).abs())
            .fold(0.0, f64::max)
    }
}

pub fn gaussianity_report(x: &[f64]) -> GaussianityReport {
    let normal = Normal::standard();
    let n = x.len();
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let nf = n.max(1) as f64;

    let mut ks: f64 = 0.0;
    for (i, &v) in sorted.iter().enumerate() {
        let f = normal.cdf(v);
        ks = ks.max((i + 1) as f64 / nf - f).max(f - i as f64 / nf);
    }

    let step = 2.0 * GRID_HALF_WIDTH / (GRID_POINTS - 1) as f64;
    let cdf = (0..GRID_POINTS)
        .map(|k| {
            let z = -GRID_HALF_WIDTH + k as f64 * step;
            let below = sorted.partition_point(|&v| v <= z);
            (z, below as f64 / nf, normal.cdf(z))
        })
        .collect();

    let width = 2.0 * GRID_HALF_WIDTH / HIST_BINS as f64;
    let edges = (0..=HIST_BINS)
        .map(|k| -GRID_HALF_WIDTH + k as f64 * width)
        .collect();
    let mut counts = vec![0u64; HIST_BINS];
    let (mut underflow, mut overflow) = (0, 0);
    for &v in x {
        let b = ((v + GRID_HALF_WIDTH) / width).floor();
        if b.is_nan() || b >= HIST_BINS as f64 {
            overflow += 1;
        } else if b < 0.0 {
            underflow += 1;
        } else {
            counts[b as usize] += 1;
        }
    }
    GaussianityReport {
        samples: n,
        cdf,
        edges,
        counts,
        underflow,
        overflow,
        ks_statistic: ks,
        ks_threshold: KS_CRITICAL / nf.sqrt(),
    }
}
