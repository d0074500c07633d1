//! Whiteness and Gaussianity checks on filter innovations.
//!
//! Innovations are whitened with the Cholesky factor of their predicted covariance,
//! `ν̄ = L⁻¹ ν` with `S = L Lᵀ`. For a correctly modeled filter each channel of `ν̄`
//! is zero-mean, unit-variance white Gaussian noise.

mod gaussian;
mod spectral;

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::record::Samples;

pub use gaussian::{gaussianity_report, GaussianityReport};
pub use spectral::{
    chi2_band, hamming, interior_bins, periodogram, welch_spectrum, windowed_periodogram,
    WelchSpectrum,
};

/// Two-sided 95% quantile of the standard normal.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Whiten each innovation with the Cholesky factor of its covariance.
pub fn normalize_innovations(nu: &Samples, s_seq: &Samples) -> Result<Samples> {
    let m = nu.cols();
    if s_seq.cols() != m * m || s_seq.rows() != nu.rows() {
        return Err(Error::Dimension(format!(
            "{} innovations of width {m} with {} covariances of width {}",
            nu.rows(),
            s_seq.rows(),
            s_seq.cols()
        )));
    }
    let mut out = Samples::with_capacity(nu.rows(), m);
    let mut cached: Option<(Vec<f64>, DMatrix<f64>)> = None;
    for k in 0..nu.rows() {
        let s_row = s_seq.row(k);
        let hit = matches!(&cached, Some((row, _)) if row.as_slice() == s_row);
        if !hit {
            let s = DMatrix::from_row_slice(m, m, s_row);
            let l = s
                .cholesky()
                .ok_or_else(|| Error::NotPositiveDefinite {
                    what: format!("innovation covariance at step {k}"),
                })?
                .unpack();
            cached = Some((s_row.to_vec(), l));
        }
        let l = &cached.as_ref().expect("factor cached").1;
        let v = DVector::from_column_slice(nu.row(k));
        let w = l
            .solve_lower_triangular(&v)
            .ok_or_else(|| Error::NotPositiveDefinite {
                what: format!("innovation covariance at step {k}"),
            })?;
        out.push_row(w.as_slice());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelStats {
    pub mean: f64,
    pub variance: f64,
    /// Fraction with `|ν̄| ≤ 1.95996`.
    pub fraction_95: f64,
    /// Fraction with `|ν̄| ≤ 2`.
    pub fraction_2sigma: f64,
}

fn channel_stats(x: &[f64]) -> ChannelStats {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let variance = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let inside = |z: f64| x.iter().filter(|v| v.abs() <= z).count() as f64 / n;
    ChannelStats {
        mean,
        variance,
        fraction_95: inside(Z95),
        fraction_2sigma: inside(2.0),
    }
}

/// Per-channel mean, variance and confidence-region fractions.
pub fn innovation_stats(nubar: &Samples) -> Result<Vec<ChannelStats>> {
    if nubar.rows() < 100 {
        return Err(Error::TooShort(format!(
            "{} normalized innovations, need 100",
            nubar.rows()
        )));
    }
    Ok((0..nubar.cols())
        .map(|j| channel_stats(&nubar.column(j)))
        .collect())
}

/// Shortest out-of-band run listed in the key-value report. Shorter runs are
/// expected by chance at a rate of roughly `(1 − confidence)^len` per bin.
pub const MIN_LISTED_RUN: usize = 4;

/// Contiguous run of out-of-band Welch bins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlaggedRange {
    pub first_bin: usize,
    pub last_bin: usize,
    /// Largest deviation `max(bin, 1/bin)` relative to the reference inside the run.
    pub peak_ratio: f64,
}

/// Out-of-band runs of a Welch spectrum relative to `reference`.
pub fn flagged_ranges(w: &WelchSpectrum, reference: &[f64], confidence: f64) -> Vec<FlaggedRange> {
    let mut out: Vec<FlaggedRange> = Vec::new();
    for (j, ok) in w.in_band(reference, confidence) {
        if ok {
            continue;
        }
        let r = w.bins[j] / reference[j];
        let dev = r.max(1.0 / r);
        match out.last_mut() {
            Some(last) if last.last_bin + 1 == j => {
                last.last_bin = j;
                last.peak_ratio = last.peak_ratio.max(dev);
            }
            _ => out.push(FlaggedRange {
                first_bin: j,
                last_bin: j,
                peak_ratio: dev,
            }),
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportOptions {
    pub segments: usize,
    pub confidence: f64,
    /// Sampling step used to label frequencies; bins are reported in cycles/sample without it.
    pub dt: Option<f64>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            segments: 8,
            confidence: 0.95,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelReport {
    pub stats: ChannelStats,
    pub periodogram: Vec<f64>,
    pub welch: WelchSpectrum,
    pub welch_in_band: f64,
    pub flagged: Vec<FlaggedRange>,
    pub gaussianity: GaussianityReport,
}

impl ChannelReport {
    /// Length in bins of the longest out-of-band run.
    pub fn longest_flagged_run(&self) -> usize {
        self.flagged
            .iter()
            .map(|r| r.last_bin - r.first_bin + 1)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnovationReport {
    pub samples: usize,
    pub options: ReportOptions,
    pub channels: Vec<ChannelReport>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    /// Allowed `|mean|` in units of `1/√N`.
    pub mean_sigmas: f64,
    pub fraction_min: f64,
    pub fraction_max: f64,
    pub welch_min: f64,
    /// Longest allowed run of consecutive out-of-band Welch bins, when set.
    pub max_flagged_run: Option<usize>,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            mean_sigmas: 3.0,
            fraction_min: 0.94,
            fraction_max: 0.96,
            welch_min: 0.90,
            max_flagged_run: None,
        }
    }
}

impl InnovationReport {
    pub fn new(nubar: &Samples, options: ReportOptions) -> Result<Self> {
        let stats = innovation_stats(nubar)?;
        let channels = stats
            .into_iter()
            .enumerate()
            .map(|(j, stats)| {
                let x = nubar.column(j);
                let welch = welch_spectrum(&x, options.segments)?;
                let flat = vec![1.0; welch.bins.len()];
                Ok(ChannelReport {
                    stats,
                    periodogram: periodogram(&x),
                    welch_in_band: welch.fraction_in_band(&flat, options.confidence),
                    flagged: flagged_ranges(&welch, &flat, options.confidence),
                    welch,
                    gaussianity: gaussianity_report(&x),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            samples: nubar.rows(),
            options,
            channels,
        })
    }

    /// Named pass/fail results for each channel.
    pub fn evaluate(&self, t: &Thresholds) -> Vec<(String, bool)> {
        let bound = t.mean_sigmas / (self.samples as f64).sqrt();
        let mut out = Vec::new();
        for (j, c) in self.channels.iter().enumerate() {
            out.push((format!("channel.{j}.mean"), c.stats.mean.abs() < bound));
            out.push((
                format!("channel.{j}.fraction_95"),
                (t.fraction_min..=t.fraction_max).contains(&c.stats.fraction_95),
            ));
            out.push((format!("channel.{j}.welch_in_band"), c.welch_in_band >= t.welch_min));
            if let Some(max_run) = t.max_flagged_run {
                out.push((format!("channel.{j}.flagged_run"), c.longest_flagged_run() <= max_run));
            }
        }
        out
    }

    pub fn passes(&self, t: &Thresholds) -> bool {
        self.evaluate(t).iter().all(|(_, ok)| *ok)
    }

    fn bin_label(&self, j: usize) -> String {
        let w = &self.channels[0].welch;
        match self.options.dt {
            Some(dt) => format!("{:.6e}", w.frequency(j, dt)),
            None => format!("{:.6e}", j as f64 / w.segment_len as f64),
        }
    }

    /// Machine-readable `key = value` lines.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        let (lo, hi) = chi2_band(2 * self.options.segments, self.options.confidence);
        let _ = writeln!(s, "samples = {}", self.samples);
        let _ = writeln!(s, "welch.segments = {}", self.options.segments);
        let _ = writeln!(s, "welch.band = [{lo:.6}, {hi:.6}]");
        let _ = writeln!(
            s,
            "frequency_unit = {}",
            if self.options.dt.is_some() { "Hz" } else { "cycles_per_sample" }
        );
        let _ = writeln!(s, "mean_bound = {:.6e}", 3.0 / (self.samples as f64).sqrt());
        for (j, c) in self.channels.iter().enumerate() {
            let p = format!("channel.{j}");
            let _ = writeln!(s, "{p}.mean = {:.6e}", c.stats.mean);
            let _ = writeln!(s, "{p}.variance = {:.6}", c.stats.variance);
            let _ = writeln!(s, "{p}.fraction_95 = {:.6}", c.stats.fraction_95);
            let _ = writeln!(s, "{p}.fraction_2sigma = {:.6}", c.stats.fraction_2sigma);
            let _ = writeln!(s, "{p}.welch_in_band = {:.6}", c.welch_in_band);
            let _ = writeln!(s, "{p}.ks_statistic = {:.6e}", c.gaussianity.ks_statistic);
            let _ = writeln!(s, "{p}.gaussian = {}", !c.gaussianity.flagged());
            let flagged_bins: usize = c.flagged.iter().map(|r| r.last_bin - r.first_bin + 1).sum();
            let _ = writeln!(s, "{p}.flagged_bins = {flagged_bins}");
            let _ = writeln!(s, "{p}.longest_flagged_run = {}", c.longest_flagged_run());
            let ranges: Vec<String> = c
                .flagged
                .iter()
                .filter(|r| r.last_bin - r.first_bin + 1 >= MIN_LISTED_RUN)
                .map(|r| {
                    format!(
                        "{}..{} ({:.2})",
                        self.bin_label(r.first_bin),
                        self.bin_label(r.last_bin),
                        r.peak_ratio
                    )
                })
                .collect();
            let _ = writeln!(s, "{p}.flagged_ranges = [{}]", ranges.join(", "));
        }
        s
    }

    /// Welch spectra as CSV, one column per channel.
    pub fn write_welch_csv(&self, w: &mut impl Write) -> Result<()> {
        let unit = if self.options.dt.is_some() { "frequency_hz" } else { "frequency_cps" };
        let mut header = vec![unit.to_string()];
        header.extend((0..self.channels.len()).map(|j| format!("channel{j}")));
        writeln!(w, "{}", header.join(","))?;
        let bins = self.channels.first().map_or(0, |c| c.welch.bins.len());
        for k in 0..bins {
            let mut line = self.bin_label(k);
            for c in &self.channels {
                line.push_str(&format!(",{:e}", c.welch.bins[k]));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Measured normalized-innovation means from the reference experiment, per regime.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ReferenceMeans {
    pub detuned: f64,
    pub resonant: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
pub struct ReferenceData {
    pub weak: ReferenceMeans,
    pub strong: ReferenceMeans,
}

const REFERENCE: &str = include_str!("../../fixtures/reference_innovation_means.toml");

impl ReferenceData {
    pub fn builtin() -> Self {
        toml::from_str(REFERENCE).expect("bundled reference data parses")
    }

    pub fn regime(&self, name: &str) -> Option<ReferenceMeans> {
        match name {
            "weak" => Some(self.weak),
            "strong" => Some(self.strong),
            _ => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn identity_and_scaled_whitening() {
        let nu = Samples::from_rows(&[vec![0.3, -1.2], vec![2.0, -2.0]]).unwrap();
        let eye = Samples::from_rows(&[vec![1.0, 0.0, 0.0, 1.0], vec![4.0, 0.0, 0.0, 4.0]]).unwrap();
        let out = normalize_innovations(&nu, &eye).unwrap();
        assert_eq!(out.row(0), &[0.3, -1.2]);
        assert_eq!(out.row(1), &[1.0, -1.0]);
        let bad = Samples::from_rows(&[vec![1.0, 2.0, 2.0, 1.0], vec![1.0, 0.0, 0.0, 1.0]]).unwrap();
        assert!(normalize_innovations(&nu, &bad).is_err());
    }

    #[test]
    fn zero_sequence_stats() {
        let s = innovation_stats(&Samples::zeros(200, 2)).unwrap();
        assert_eq!(s[0].mean, 0.0);
        assert_eq!(s[0].fraction_95, 1.0);
        assert!(innovation_stats(&Samples::zeros(50, 1)).is_err());
    }

    #[test]
    fn white_report_passes() {
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let n = 200_000;
        let data: Vec<f64> = (0..2 * n).map(|_| StandardNormal.sample(&mut rng)).collect();
        let nubar = Samples::from_vec(2, data).unwrap();
        let r = InnovationReport::new(&nubar, ReportOptions { dt: Some(20e-9), ..Default::default() }).unwrap();
        assert!(r.passes(&Thresholds::default()), "{}", r.to_key_value());
        let kv = r.to_key_value();
        assert!(kv.contains("channel.1.fraction_95 = "));
        assert!(kv.contains("frequency_unit = Hz"));
        let mut csv = Vec::new();
        r.write_welch_csv(&mut csv).unwrap();
        assert_eq!(String::from_utf8(csv).unwrap().lines().count(), n / 8 / 2 + 2);
    }

    #[test]
    fn tone_is_flagged() {
        let mut rng = ChaCha20Rng::seed_from_u64(22);
        let n = 80_000;
        let x: Vec<f64> = (0..n)
            .map(|t| {
                let e: f64 = StandardNormal.sample(&mut rng);
                e + 0.2 * (2.0 * std::f64::consts::PI * 0.1 * t as f64).sin()
            })
            .collect();
        let w = welch_spectrum(&x, 8).unwrap();
        let flagged = flagged_ranges(&w, &vec![1.0; w.bins.len()], 0.95);
        let bin = (0.1 * w.segment_len as f64).round() as usize;
        assert!(flagged.iter().any(|r| r.first_bin <= bin && bin <= r.last_bin && r.peak_ratio > 10.0));
    }

    #[test]
    fn reference_fixture() {
        let r = ReferenceData::builtin();
        assert_eq!(r.regime("weak").unwrap().detuned, 0.004);
        assert_eq!(r.regime("strong").unwrap().detuned, -0.012);
        assert_eq!(r.strong.resonant, 0.031);
        assert!(r.regime("medium").is_none());
    }
}
