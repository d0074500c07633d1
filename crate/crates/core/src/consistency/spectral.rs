//! Periodogram and Welch estimates scaled so that unit-variance white noise has unit
//! expected level in every bin.

use rustfft::{num_complex::Complex, FftPlanner};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// `I_j = |Σ_t x_t e^{−2πi jt/N}|² / N` for `j = 0..=N/2`.
pub fn periodogram(x: &[f64]) -> Vec<f64> {
    let w = vec![1.0; x.len()];
    windowed_periodogram(x, &w)
}

/// `|Σ_t w_t x_t e^{−2πi jt/L}|² / Σ_t w_t²` for `j = 0..=L/2`.
pub fn windowed_periodogram(x: &[f64], window: &[f64]) -> Vec<f64> {
    assert_eq!(x.len(), window.len(), "window length");
    let len = x.len();
    if len == 0 {
        return Vec::new();
    }
    let mut buf: Vec<Complex<f64>> = x
        .iter()
        .zip(window)
        .map(|(v, w)| Complex::new(v * w, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(len).process(&mut buf);
    let power: f64 = window.iter().map(|w| w * w).sum();
    buf[..=len / 2].iter().map(|c| c.norm_sqr() / power).collect()
}

/// Periodic Hamming window of length `len`.
pub fn hamming(len: usize) -> Vec<f64> {
    (0..len)
        .map(|t| 0.54 - 0.46 * (2.0 * std::f64::consts::PI * t as f64 / len as f64).cos())
        .collect()
}

/// Indices of bins that are neither DC nor Nyquist for a transform of length `len`.
pub fn interior_bins(len: usize) -> std::ops::RangeInclusive<usize> {
    1..=(len.saturating_sub(1) / 2)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WelchSpectrum {
    /// `segment_len / 2 + 1` averaged bins.
    pub bins: Vec<f64>,
    pub segments: usize,
    pub segment_len: usize,
}

impl WelchSpectrum {
    /// Degrees of freedom of each interior bin, `2 · segments`.
    pub fn dof(&self) -> usize {
        2 * self.segments
    }

    /// Bin frequency in Hz for sampling step `dt`.
    pub fn frequency(&self, j: usize, dt: f64) -> f64 {
        j as f64 / (self.segment_len as f64 * dt)
    }

    pub fn interior(&self) -> std::ops::RangeInclusive<usize> {
        interior_bins(self.segment_len)
    }

    /// Two-sided band `χ²_ν⁻¹((1∓c)/2) / ν` for bins relative to their expectation.
    pub fn chi2_band(&self, confidence: f64) -> (f64, f64) {
        chi2_band(self.dof(), confidence)
    }

    /// For each interior bin `j`, whether `bins[j] / reference[j]` lies in the band.
    pub fn in_band(&self, reference: &[f64], confidence: f64) -> Vec<(usize, bool)> {
        let (lo, hi) = self.chi2_band(confidence);
        self.interior()
            .map(|j| {
                let r = self.bins[j] / reference[j];
                (j, (lo..=hi).contains(&r))
            })
            .collect()
    }

    /// Fraction of interior bins inside the band around `reference`.
    pub fn fraction_in_band(&self, reference: &[f64], confidence: f64) -> f64 {
        let flags = self.in_band(reference, confidence);
        if flags.is_empty() {
            return 0.0;
        }
        flags.iter().filter(|(_, ok)| *ok).count() as f64 / flags.len() as f64
    }

    /// Fraction inside the band for a flat unit reference.
    pub fn white_fraction_in_band(&self, confidence: f64) -> f64 {
        self.fraction_in_band(&vec![1.0; self.bins.len()], confidence)
    }
}

pub fn chi2_band(dof: usize, confidence: f64) -> (f64, f64) {
    let d = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    let tail = (1.0 - confidence) / 2.0;
    (
        d.inverse_cdf(tail) / dof as f64,
        d.inverse_cdf(1.0 - tail) / dof as f64,
    )
}

/// Average of Hamming-windowed periodograms over `segments` non-overlapping pieces.
/// Trailing samples that do not fill a segment are dropped.
pub fn welch_spectrum(x: &[f64], segments: usize) -> Result<WelchSpectrum> {
    if segments == 0 {
        return Err(Error::InvalidParameter("welch needs at least one segment".into()));
    }
    if x.len() < 16 * segments {
        return Err(Error::TooShort(format!(
            "{} samples for {segments} segments, need {}",
            x.len(),
            16 * segments
        )));
    }
    let len = x.len() / segments;
    let window = hamming(len);
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(len);
    let power: f64 = window.iter().map(|w| w * w).sum();
    let mut bins = vec![0.0; len / 2 + 1];
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for seg in x.chunks_exact(len).take(segments) {
        for ((b, v), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex::new(v * w, 0.0);
        }
        fft.process(&mut buf);
        for (acc, c) in bins.iter_mut().zip(&buf) {
            *acc += c.norm_sqr() / power;
        }
    }
    bins.iter_mut().for_each(|b| *b /= segments as f64);
    Ok(WelchSpectrum {
        bins,
        segments,
        segment_len: len,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn white(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn zero_and_cosine() {
        assert!(periodogram(&[0.0; 64]).iter().all(|&v| v == 0.0));
        let n = 256;
        let a = 1.5;
        let x: Vec<f64> = (0..n)
            .map(|t| a * (2.0 * std::f64::consts::PI * 10.0 * t as f64 / n as f64).cos())
            .collect();
        let p = periodogram(&x);
        assert_eq!(p.len(), n / 2 + 1);
        assert!((p[10] - n as f64 * a * a / 4.0).abs() < 1e-9);
        for (j, v) in p.iter().enumerate() {
            if j != 10 {
                assert!(v.abs() < 1e-20 * n as f64 + 1e-18, "bin {j}: {v}");
            }
        }
    }

    #[test]
    fn white_mean_level() {
        let p = periodogram(&white(100_000, 3));
        let interior: Vec<f64> = interior_bins(100_000).map(|j| p[j]).collect();
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn parseval() {
        let mut x = white(1001, 4);
        x.truncate(1000);
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter_mut().for_each(|v| *v -= m);
        let var = x.iter().map(|v| v * v).sum::<f64>() / (x.len() - 1) as f64;
        let p = periodogram(&x);
        let n = x.len();
        let total: f64 = p[0] + p[n / 2] + 2.0 * interior_bins(n).map(|j| p[j]).sum::<f64>();
        assert!((total - (n - 1) as f64 * var).abs() < 1e-10 * total);
    }

    #[test]
    fn welch_single_segment_is_windowed_periodogram() {
        let x = white(512, 5);
        let w = welch_spectrum(&x, 1).unwrap();
        let p = windowed_periodogram(&x, &hamming(512));
        for (a, b) in w.bins.iter().zip(&p) {
            assert!((a - b).abs() < 1e-12 * b.max(1.0));
        }
    }

    #[test]
    fn welch_constant_in_dc() {
        let w = welch_spectrum(&[2.0; 1024], 8).unwrap();
        // The periodic Hamming main lobe spans DC and the first neighbour only,
        // with power ratio (0.54 / 0.23)².
        assert!((w.bins[0] / w.bins[1] - (0.54_f64 / 0.23).powi(2)).abs() < 1e-9);
        assert!(w.bins[2..].iter().all(|&v| v < 1e-20));
    }

    #[test]
    fn chi2_band_values() {
        let (lo, hi) = chi2_band(16, 0.95);
        assert!((lo - 6.907_664 / 16.0).abs() < 1e-6);
        assert!((hi - 28.845_350 / 16.0).abs() < 1e-6);
    }

    #[test]
    fn short_input_rejected() {
        assert!(welch_spectrum(&[0.0; 100], 8).is_err());
    }
}
