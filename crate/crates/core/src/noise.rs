//! Shaping filters for colored laser noise and the photocurrent calibration spectra.
//!
//! A shaping filter is `ξ̇ = F ξ + G ζ`, `y = H ξ` with white drive `E[ζ ζᵀ] = W δ`.
//! Spectra are two-sided in rad/s; [`one_sided_per_hz`] converts for external I/O.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, to_complex, C64, DEFINITENESS_RTOL};
use crate::statespace::StateSpaceModel;

#[derive(Debug, Clone, PartialEq)]
pub struct ShapingFilter {
    f: DMatrix<f64>,
    g: DMatrix<f64>,
    w_drive: DMatrix<f64>,
    h_out: DMatrix<f64>,
    label: String,
}

impl ShapingFilter {
    pub fn new(
        f: DMatrix<f64>,
        g: DMatrix<f64>,
        w_drive: DMatrix<f64>,
        h_out: DMatrix<f64>,
        label: impl Into<String>,
    ) -> Result<Self> {
        let k = f.nrows();
        if k == 0 {
            return Err(Error::InvalidParameter(
                "shaping filter needs at least one state; white noise belongs in W".into(),
            ));
        }
        if f.ncols() != k || g.nrows() != k || h_out.ncols() != k || h_out.nrows() != 1 {
            return Err(Error::Dimension(format!(
                "shaping filter shapes: F {}x{}, G {}x{}, H {}x{}",
                f.nrows(),
                f.ncols(),
                g.nrows(),
                g.ncols(),
                h_out.nrows(),
                h_out.ncols()
            )));
        }
        let r = g.ncols();
        if w_drive.shape() != (r, r) {
            return Err(Error::Dimension(format!(
                "W_drive is {}x{}, expected {r}x{r}",
                w_drive.nrows(),
                w_drive.ncols()
            )));
        }
        let max_real = linalg::spectral_abscissa(&f);
        if max_real >= 0.0 {
            return Err(Error::NotHurwitz { max_real });
        }
        if !linalg::is_psd(&w_drive, DEFINITENESS_RTOL) {
            return Err(Error::NotPositiveSemidefinite {
                what: "W_drive".into(),
                min_eig: linalg::min_eigenvalue(&w_drive),
            });
        }
        Ok(Self::new_unchecked(f, g, w_drive, h_out, label))
    }

    pub(crate) fn new_unchecked(
        f: DMatrix<f64>,
        g: DMatrix<f64>,
        w_drive: DMatrix<f64>,
        h_out: DMatrix<f64>,
        label: impl Into<String>,
    ) -> Self {
        Self {
            f,
            g,
            w_drive,
            h_out,
            label: label.into(),
        }
    }

    pub fn f(&self) -> &DMatrix<f64> {
        &self.f
    }
    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }
    pub fn w_drive(&self) -> &DMatrix<f64> {
        &self.w_drive
    }
    pub fn h_out(&self) -> &DMatrix<f64> {
        &self.h_out
    }
    pub fn label(&self) -> &str {
        &self.label
    }
    pub fn order(&self) -> usize {
        self.f.nrows()
    }
    pub fn drive_dim(&self) -> usize {
        self.g.ncols()
    }

    /// Analytic output spectrum `|H (iω − F)⁻¹ G|² W`.
    pub fn spectrum(&self, omega: f64) -> f64 {
        let k = self.order();
        let mut m = -to_complex(&self.f);
        for i in 0..k {
            m[(i, i)] += C64::new(0.0, omega);
        }
        let x = m
            .lu()
            .solve(&to_complex(&self.g))
            .expect("Hurwitz F has a regular resolvent on the imaginary axis");
        let h = to_complex(&self.h_out) * x;
        (&h * to_complex(&self.w_drive) * h.adjoint())[(0, 0)].re
    }

    /// Stationary output variance `H Σ Hᵀ`.
    pub fn variance(&self) -> Result<f64> {
        let sigma = linalg::stationary_covariance(&self.f, &self.g, &self.w_drive)?;
        Ok((&self.h_out * sigma * self.h_out.transpose())[(0, 0)])
    }

    /// The filter as a stand-alone model with noiseless output `y = H ξ`.
    pub fn to_model(&self) -> StateSpaceModel {
        let k = self.order();
        let r = self.drive_dim();
        StateSpaceModel::new(
            self.f.clone(),
            DMatrix::zeros(k, 0),
            self.h_out.clone(),
            DMatrix::zeros(1, 0),
            self.g.clone(),
            self.w_drive.clone(),
            DMatrix::zeros(1, 1),
            DMatrix::zeros(r, 1),
        )
        .expect("filter shapes are consistent")
    }

    /// Filter whose output is the sum of two independent filters' outputs.
    pub fn sum(&self, other: &ShapingFilter) -> ShapingFilter {
        let mut h = DMatrix::zeros(1, self.order() + other.order());
        h.view_mut((0, 0), (1, self.order())).copy_from(&self.h_out);
        h.view_mut((0, self.order()), (1, other.order()))
            .copy_from(&other.h_out);
        Self::new_unchecked(
            linalg::block_diag(&self.f, &other.f),
            linalg::block_diag(&self.g, &other.g),
            linalg::block_diag(&self.w_drive, &other.w_drive),
            h,
            format!("{} + {}", self.label, other.label),
        )
    }

    pub fn to_spec(&self) -> NoiseSpec {
        let rows = |m: &DMatrix<f64>| m.row_iter().map(|r| r.iter().copied().collect()).collect();
        NoiseSpec::StateSpace {
            f: rows(&self.f),
            g_drive: rows(&self.g),
            w_drive: rows(&self.w_drive),
            h_out: rows(&self.h_out),
        }
    }
}

/// Configuration form of a shaping filter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseSpec {
    Lorentzian {
        f0_hz: f64,
        linewidth_hz: f64,
        peak_power: f64,
    },
    StateSpace {
        #[serde(rename = "F")]
        f: Vec<Vec<f64>>,
        #[serde(rename = "G_drive")]
        g_drive: Vec<Vec<f64>>,
        #[serde(rename = "W_drive")]
        w_drive: Vec<Vec<f64>>,
        #[serde(rename = "H_out")]
        h_out: Vec<Vec<f64>>,
    },
}

fn matrix_from_rows(name: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, |r| r.len());
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Config(format!("{name}: ragged rows")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}

impl NoiseSpec {
    pub fn build(&self, label: &str) -> Result<ShapingFilter> {
        match self {
            NoiseSpec::Lorentzian {
                f0_hz,
                linewidth_hz,
                peak_power,
            } => {
                let mut filt = lorentzian_line(*f0_hz, *linewidth_hz, *peak_power)?;
                filt.label = label.to_string();
                Ok(filt)
            }
            NoiseSpec::StateSpace {
                f,
                g_drive,
                w_drive,
                h_out,
            } => broadband_filter(
                matrix_from_rows("F", f)?,
                matrix_from_rows("G_drive", g_drive)?,
                matrix_from_rows("W_drive", w_drive)?,
                matrix_from_rows("H_out", h_out)?,
                label,
            ),
        }
    }
}

/// Lorentzian line at `f0_hz` with full width `linewidth_hz` and spectral peak
/// `peak_power` (two-sided, rad/s units).
///
/// For `f0 > 0` the filter is a damped rotation `F = [[−a, −ω₀], [ω₀, −a]]`,
/// `a = π·linewidth`, driven isotropically with intensity `w`, so that
///
/// ```text
/// S(ω) = (w/2) [1/(a² + (ω−ω₀)²) + 1/(a² + (ω+ω₀)²)]
/// ```
///
/// and `w` is chosen so that `S(ω₀) = peak_power`. For `f0 = 0` it is the
/// first-order low-pass `S(ω) = w/(a² + ω²)` with `w = peak_power·a²`.
pub fn lorentzian_line(f0_hz: f64, linewidth_hz: f64, peak_power: f64) -> Result<ShapingFilter> {
    if !(f0_hz >= 0.0 && linewidth_hz > 0.0 && peak_power >= 0.0)
        || !(f0_hz.is_finite() && linewidth_hz.is_finite() && peak_power.is_finite())
    {
        return Err(Error::InvalidParameter(format!(
            "lorentzian_line: f0={f0_hz}, linewidth={linewidth_hz}, peak={peak_power}"
        )));
    }
    let a = PI * linewidth_hz;
    let w0 = 2.0 * PI * f0_hz;
    let label = format!("lorentzian {f0_hz} Hz");
    if f0_hz == 0.0 {
        return ShapingFilter::new(
            DMatrix::from_element(1, 1, -a),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, peak_power * a * a),
            DMatrix::from_element(1, 1, 1.0),
            label,
        );
    }
    let w = 2.0 * peak_power / (1.0 / (a * a) + 1.0 / (a * a + 4.0 * w0 * w0));
    ShapingFilter::new(
        DMatrix::from_row_slice(2, 2, &[-a, -w0, w0, -a]),
        DMatrix::identity(2, 2),
        DMatrix::identity(2, 2) * w,
        DMatrix::from_row_slice(1, 2, &[1.0, 0.0]),
        label,
    )
}

/// Wrap user-supplied state-space coefficients. `F` must be Hurwitz.
pub fn broadband_filter(
    f: DMatrix<f64>,
    g_drive: DMatrix<f64>,
    w_drive: DMatrix<f64>,
    h_out: DMatrix<f64>,
    label: &str,
) -> Result<ShapingFilter> {
    ShapingFilter::new(f, g_drive, w_drive, h_out, label)
}

/// Two-sided rad/s density to one-sided per-Hz density.
pub fn one_sided_per_hz(s: f64) -> f64 {
    2.0 * s
}

/// One-sided per-Hz density to two-sided rad/s density.
pub fn two_sided_per_rad(s_hz: f64) -> f64 {
    0.5 * s_hz
}

/// Delayed self-homodyne transfer for phase noise, `4 sin²(ω ΔT / 2)`.
pub fn self_homodyne_gain(omega: f64, delta_t: f64) -> f64 {
    let x = 0.5 * omega * delta_t;
    // sin² has period π; reduce to [−π/2, π/2] so exact zeros survive rounding.
    let r = x - PI * (x / PI).round();
    let s = r.sin();
    4.0 * s * s
}

/// `S_φ̇φ̇(ω) = ω² S_φφ(ω)`.
pub fn frequency_noise_spectrum(s_phiphi: &[f64], omega: &[f64]) -> Result<Vec<f64>> {
    if s_phiphi.len() != omega.len() {
        return Err(Error::Dimension(format!(
            "spectrum has {} samples, grid has {}",
            s_phiphi.len(),
            omega.len()
        )));
    }
    Ok(s_phiphi.iter().zip(omega).map(|(s, w)| w * w * s).collect())
}

/// Photon-number noise in direct detection: `4β₀² S_δβδβ(ω) + β₀² + Var(δβ)`.
pub fn direct_detection_spectrum(s_amp: &[f64], beta0: f64, var_dbeta: f64) -> Vec<f64> {
    let b2 = beta0 * beta0;
    s_amp.iter().map(|s| 4.0 * b2 * s + b2 + var_dbeta).collect()
}

/// Parameters of the balanced homodyne photocurrent spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomodyneTerms {
    /// Signal amplitude.
    pub beta0: f64,
    /// Local-oscillator to signal amplitude ratio.
    pub r: f64,
    /// Homodyne angle, rad.
    pub phi: f64,
    pub var_dbeta: f64,
    pub var_dx: f64,
    pub var_dy: f64,
}

/// Homodyne photocurrent spectrum:
/// `(β₀²+Var δβ)(1+r²) + Var δx + Var δy + 4β₀² S_xφ + 16 (r cos φ)² β₀² S_δβδβ`.
pub fn homodyne_spectrum(s_quad: &[f64], s_amp: &[f64], t: &HomodyneTerms) -> Result<Vec<f64>> {
    if s_quad.len() != s_amp.len() {
        return Err(Error::Dimension(format!(
            "quadrature spectrum has {} samples, amplitude spectrum has {}",
            s_quad.len(),
            s_amp.len()
        )));
    }
    if t.r < 0.0 || t.beta0 < 0.0 {
        return Err(Error::InvalidParameter("r and beta0 must be non-negative".into()));
    }
    let b2 = t.beta0 * t.beta0;
    let floor = (b2 + t.var_dbeta) * (1.0 + t.r * t.r) + t.var_dx + t.var_dy;
    let leak = (t.r * t.phi.cos()).powi(2) * 16.0 * b2;
    Ok(s_quad
        .iter()
        .zip(s_amp)
        .map(|(sq, sa)| floor + 4.0 * b2 * sq + leak * sa)
        .collect())
}

/// Write `(frequency_hz, psd)` pairs as two-column CSV.
pub fn write_spectrum(path: impl AsRef<Path>, freq_hz: &[f64], psd: &[f64]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "frequency_hz,psd")?;
    for (x, y) in freq_hz.iter().zip(psd) {
        writeln!(f, "{x:e},{y:e}")?;
    }
    f.flush()?;
    Ok(())
}

/// Read a two-column spectrum file; a non-numeric first line is treated as a header.
pub fn read_spectrum(path: impl AsRef<Path>) -> Result<(Vec<f64>, Vec<f64>)> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for (k, line) in f.lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty());
        let parsed = (
            parts.next().map(str::parse::<f64>),
            parts.next().map(str::parse::<f64>),
        );
        match parsed {
            (Some(Ok(x)), Some(Ok(y))) => {
                xs.push(x);
                ys.push(y);
            }
            _ if k == 0 => continue,
            _ => return Err(Error::Format(format!("spectrum line {}: {line}", k + 1))),
        }
    }
    Ok((xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn zero_peak_gives_zero_spectrum() {
        let f = lorentzian_line(1e6, 1e3, 0.0).unwrap();
        for w in [0.0, 2e6 * PI, 1e8] {
            assert_eq!(f.spectrum(w), 0.0);
        }
    }

    #[test]
    fn lorentzian_peak_at_center() {
        let f0 = 20e6;
        let filt = lorentzian_line(f0, 1e3, 3.0).unwrap();
        let w0 = 2.0 * PI * f0;
        assert!((filt.spectrum(w0) - 3.0).abs() < 1e-9);
        // Half maximum at ±a about the line.
        let a = PI * 1e3;
        assert!((filt.spectrum(w0 + a) / 3.0 - 0.5).abs() < 1e-6);
        assert!(filt.spectrum(w0 * 1.01) < filt.spectrum(w0));
        assert!(filt.spectrum(w0 * 0.99) < filt.spectrum(w0));
    }

    #[test]
    fn lorentzian_closed_form() {
        let filt = lorentzian_line(2.0, 0.5, 1.7).unwrap();
        let (a, w0) = (PI * 0.5, 4.0 * PI);
        let w = filt.w_drive()[(0, 0)];
        for om in [0.0, 3.0, w0, 20.0] {
            let expect = 0.5 * w * (1.0 / (a * a + (om - w0).powi(2)) + 1.0 / (a * a + (om + w0).powi(2)));
            assert!((filt.spectrum(om) - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn dc_line_is_first_order() {
        let filt = lorentzian_line(0.0, 2.0, 5.0).unwrap();
        assert_eq!(filt.order(), 1);
        assert!((filt.spectrum(0.0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn ou_filter_spectrum() {
        let (k, w) = (3.0, 2.0);
        let filt = broadband_filter(dmatrix![-k], dmatrix![1.0], dmatrix![w], dmatrix![1.0], "ou").unwrap();
        for om in [0.0, 1.0, 10.0] {
            assert!((filt.spectrum(om) - w / (k * k + om * om)).abs() < 1e-15);
        }
        assert!((filt.variance().unwrap() - w / (2.0 * k)).abs() < 1e-15);
    }

    #[test]
    fn static_and_unstable_filters_rejected() {
        let e = DMatrix::zeros(0, 0);
        assert!(broadband_filter(e.clone(), e.clone(), e.clone(), DMatrix::zeros(1, 0), "x").is_err());
        assert!(broadband_filter(dmatrix![0.1], dmatrix![1.0], dmatrix![1.0], dmatrix![1.0], "x").is_err());
        assert!(broadband_filter(dmatrix![-1.0], dmatrix![1.0], dmatrix![-1.0], dmatrix![1.0], "x").is_err());
    }

    #[test]
    fn state_space_spec_round_trips() {
        let filt = broadband_filter(
            dmatrix![-1.0, 2.0, 0.0, 0.0; -2.0, -1.0, 0.0, 0.0; 0.0, 0.0, -0.3, 7.1; 0.0, 0.0, -7.1, -0.3],
            dmatrix![1.0; 0.1; 0.0; 1.0 / 3.0],
            dmatrix![1e-7],
            dmatrix![1.0, 0.0, 0.123456789012345, 0.0],
            "broad",
        )
        .unwrap();
        #[derive(Serialize, Deserialize)]
        struct Wrap {
            filt: NoiseSpec,
        }
        let text = toml::to_string(&Wrap { filt: filt.to_spec() }).unwrap();
        let back: Wrap = toml::from_str(&text).unwrap();
        assert_eq!(back.filt.build("broad").unwrap(), filt);
    }

    #[test]
    fn self_homodyne_zeros_and_peaks() {
        let dt = 27e-9;
        for k in 1..=5 {
            assert!(self_homodyne_gain(k as f64 * 2.0 * PI / dt, dt) < 1e-12);
        }
        assert!((self_homodyne_gain(PI / dt, dt) - 4.0).abs() < 1e-12);
        let g = self_homodyne_gain(2.0 * PI * 1e6, dt);
        let expect = 4.0 * (2.0 * PI * 1e6 * 13.5e-9_f64).sin().powi(2);
        assert!((g - expect).abs() < 1e-14);
        assert!((g - 0.028711).abs() < 1e-6);
    }

    #[test]
    fn frequency_noise_relation() {
        let om = [1.0, 2.0, 3.0];
        assert_eq!(frequency_noise_spectrum(&[0.0; 3], &om).unwrap(), vec![0.0; 3]);
        let inv: Vec<f64> = om.iter().map(|w| 1.0 / (w * w)).collect();
        for v in frequency_noise_spectrum(&inv, &om).unwrap() {
            assert!((v - 1.0).abs() < 1e-15);
        }
        assert_eq!(frequency_noise_spectrum(&[2.0; 3], &om).unwrap(), vec![2.0, 8.0, 18.0]);
        assert!(frequency_noise_spectrum(&[1.0], &om).is_err());
    }

    #[test]
    fn direct_detection_terms() {
        assert_eq!(direct_detection_spectrum(&[0.0, 0.0], 3.0, 0.0), vec![9.0, 9.0]);
        assert_eq!(direct_detection_spectrum(&[5.0], 0.0, 0.25), vec![0.25]);
        // Halving the power: classical term drops 4x, shot noise 2x.
        let s = 0.7;
        let full = 4.0 * 2.0 * s;
        let half = 4.0 * 1.0 * s;
        let d_full = direct_detection_spectrum(&[s], 2.0_f64.sqrt(), 0.0)[0];
        let d_half = direct_detection_spectrum(&[s / 2.0], 1.0, 0.0)[0];
        assert!(((d_full - 2.0) / (d_half - 1.0) - full / (half / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn homodyne_terms() {
        let base = HomodyneTerms {
            beta0: 2.0,
            r: 1.0,
            phi: PI / 2.0,
            var_dbeta: 0.0,
            var_dx: 0.0,
            var_dy: 0.0,
        };
        let floor = (4.0) * 2.0;
        let quiet = homodyne_spectrum(&[0.0], &[1.0], &base).unwrap()[0];
        assert!((quiet - floor).abs() < 1e-12);
        let r0 = HomodyneTerms { r: 0.0, ..base };
        assert_eq!(homodyne_spectrum(&[0.0], &[1.0], &r0).unwrap()[0], 4.0);
        let phi0 = HomodyneTerms { phi: 0.0, ..base };
        let c = 0.3;
        let v = homodyne_spectrum(&[0.0], &[c], &phi0).unwrap()[0];
        assert!((v - floor - 16.0 * 4.0 * c).abs() < 1e-12);
    }

    #[test]
    fn spectrum_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        write_spectrum(&p, &[1.0, 2.5e6], &[0.5, 1.0 / 3.0]).unwrap();
        let (f, s) = read_spectrum(&p).unwrap();
        assert_eq!(f, vec![1.0, 2.5e6]);
        assert_eq!(s, vec![0.5, 1.0 / 3.0]);
    }
}
