//! Kalman-Bucy estimation with cross-correlated process and measurement noise.
//!
//! The continuous pieces (gain, Riccati right-hand side, stationary solution) work on
//! a [`StateSpaceModel`]. Measurement records are processed by the discrete filter in
//! [`kalman`], which runs on the exact discretization of the same model.

mod care;
mod kalman;

use nalgebra::{DMatrix, SymmetricEigen};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::linalg::{ensure_psd, spd_solve, spectral_abscissa, symmetrize};
use crate::record::Samples;
use crate::statespace::StateSpaceModel;

pub use care::{steady_state, DecorrelatedRiccati, SteadyState, SteadyStateOptions};
pub use kalman::{
    run_filter, run_filter_with_inputs, FilterInit, FilterOptions, FilterRun, KalmanFilter,
    KalmanState,
};

/// `K = (P Cᵀ + L M) V⁻¹`, solved through a Cholesky factor of `V`.
pub fn kalman_gain(
    p: &DMatrix<f64>,
    c: &DMatrix<f64>,
    l: &DMatrix<f64>,
    m: &DMatrix<f64>,
    v: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    let mo = v.nrows();
    if p.ncols() != n || c.shape() != (mo, n) || l.nrows() != n || m.shape() != (l.ncols(), mo) {
        return Err(Error::Dimension(format!(
            "kalman_gain: P {:?}, C {:?}, L {:?}, M {:?}, V {:?}",
            p.shape(),
            c.shape(),
            l.shape(),
            m.shape(),
            v.shape()
        )));
    }
    let x = p * c.transpose() + l * m;
    // K V = X  ⇔  V Kᵀ = Xᵀ
    Ok(spd_solve(v, &x.transpose(), "V")?.transpose())
}

/// `Ṗ = A P + P Aᵀ + L W Lᵀ − K V Kᵀ`, symmetrized.
pub fn riccati_rhs(
    p: &DMatrix<f64>,
    a: &DMatrix<f64>,
    c: &DMatrix<f64>,
    l: &DMatrix<f64>,
    w: &DMatrix<f64>,
    v: &DMatrix<f64>,
    m: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let k = kalman_gain(p, c, l, m, v)?;
    let ap = a * p;
    Ok(symmetrize(
        &(&ap + ap.transpose() + l * w * l.transpose() - &k * v * k.transpose()),
    ))
}

/// Riccati right-hand side for the base measurement of a model.
pub fn model_riccati_rhs(sys: &StateSpaceModel, p: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let s = sys.base_measurement();
    riccati_rhs(p, sys.a(), s.c, sys.l(), sys.w(), s.v, s.m)
}

/// Stationary estimation-error covariance with default solver options.
pub fn steady_state_covariance(sys: &StateSpaceModel) -> Result<DMatrix<f64>> {
    Ok(steady_state(sys, &SteadyStateOptions::default())?.p)
}

/// Number of leading samples to discard: `5 / γ_min` with `γ_min = 2 min |Re λ(A)|`,
/// the energy decay rate of the slowest mode.
pub fn transient_steps(sys: &StateSpaceModel, dt: f64) -> Result<usize> {
    if sys.n() == 0 {
        return Ok(0);
    }
    let slowest = crate::linalg::eigenvalues(sys.a())
        .iter()
        .map(|l| l.re.abs())
        .fold(f64::INFINITY, f64::min);
    if spectral_abscissa(sys.a()) >= 0.0 || slowest == 0.0 {
        return Err(Error::NotHurwitz {
            max_real: spectral_abscissa(sys.a()),
        });
    }
    Ok((5.0 / (2.0 * slowest) / dt).ceil() as usize)
}

/// `P + Cov(x̂)` over `xhat` rows `skip..`.
pub fn unconditional_covariance(
    p: &DMatrix<f64>,
    xhat: &Samples,
    skip: usize,
    min_samples: usize,
) -> Result<DMatrix<f64>> {
    let n = p.nrows();
    if xhat.cols() != n {
        return Err(Error::Dimension(format!(
            "estimate series has {} columns, P is {n}x{n}",
            xhat.cols()
        )));
    }
    let kept = xhat.rows().saturating_sub(skip);
    if kept < min_samples.max(2) {
        return Err(Error::TooShort(format!(
            "{kept} samples after dropping {skip}, need {}",
            min_samples.max(2)
        )));
    }
    let cov = DMatrix::from_row_slice(n, n, &xhat.tail(skip).covariance());
    Ok(symmetrize(&(p + cov)))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Angle of the major axis from the first coordinate, in (−π/2, π/2].
    pub angle: f64,
}

impl Ellipse {
    pub fn axes_ratio(&self) -> f64 {
        self.semi_major / self.semi_minor
    }
}

/// Confidence ellipse of the `(i, j)` marginal of a Gaussian with covariance `p`.
pub fn uncertainty_ellipse(p: &DMatrix<f64>, i: usize, j: usize, confidence: f64) -> Result<Ellipse> {
    let n = p.nrows();
    if i >= n || j >= n || i == j {
        return Err(Error::InvalidParameter(format!(
            "index pair ({i}, {j}) invalid for {n} states"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "confidence {confidence} outside (0, 1)"
        )));
    }
    let block = nalgebra::dmatrix![p[(i, i)], p[(i, j)]; p[(j, i)], p[(j, j)]];
    let block = symmetrize(&block);
    ensure_psd(&block, "covariance subblock")?;
    let scale = ChiSquared::new(2.0)
        .expect("two degrees of freedom")
        .inverse_cdf(confidence);
    let eig = SymmetricEigen::new(block);
    let (hi, lo) = if eig.eigenvalues[0] >= eig.eigenvalues[1] {
        (0, 1)
    } else {
        (1, 0)
    };
    let v = eig.eigenvectors.column(hi);
    let mut angle = v[1].atan2(v[0]);
    if angle > std::f64::consts::FRAC_PI_2 {
        angle -= std::f64::consts::PI;
    } else if angle <= -std::f64::consts::FRAC_PI_2 {
        angle += std::f64::consts::PI;
    }
    Ok(Ellipse {
        semi_major: (eig.eigenvalues[hi].max(0.0) * scale).sqrt(),
        semi_minor: (eig.eigenvalues[lo].max(0.0) * scale).sqrt(),
        angle,
    })
}
