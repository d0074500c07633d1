//! Exact zero-order-hold discretization.
//!
//! Over one step of length `dt` the state noise `w_k = ∫ e^{A(dt−s)} L w(s) ds` and the
//! averaged measurement noise `v_k = (1/dt) ∫ v(s) ds` are jointly Gaussian with
//!
//! ```text
//! Cov(w_k) = Qd,   Cov(v_k) = V / dt,   Cov(w_k, v_k) = Γ L M / dt,   Γ = ∫₀^dt e^{Aτ} dτ
//! ```
//!
//! `Ad`, `Γ` and `Qd` all come from one exponential of
//! `[[A, LWLᵀ, I], [0, −Aᵀ, 0], [0, 0, 0]]·dt`.

use nalgebra::DMatrix;

use super::StateSpaceModel;
use crate::error::{Error, Result};
use crate::linalg::{expm, symmetrize};

/// Measurement maps for one schedule segment, scaled to a single step.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasurement {
    /// Segment start in absolute time (`-inf` for the base segment).
    pub t_start: f64,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// Per-step measurement covariance `V/dt`.
    pub r: DMatrix<f64>,
    /// Per-step state/measurement noise cross-covariance `Γ L M / dt` (n×m).
    pub md: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteModel {
    pub dt: f64,
    pub ad: DMatrix<f64>,
    pub bd: DMatrix<f64>,
    pub qd: DMatrix<f64>,
    /// `∫₀^dt e^{Aτ} dτ`.
    pub gamma: DMatrix<f64>,
    /// Base segment first, then schedule segments in time order.
    pub segments: Vec<DiscreteMeasurement>,
    /// Continuous stationary covariance, present when `A` is Hurwitz.
    pub stationary: Option<DMatrix<f64>>,
    pub fingerprint: [u8; 32],
}

impl DiscreteModel {
    pub fn n(&self) -> usize {
        self.ad.nrows()
    }
    pub fn p(&self) -> usize {
        self.bd.ncols()
    }
    pub fn m_out(&self) -> usize {
        self.segments[0].c.nrows()
    }

    /// Index of the segment in force at absolute time `t`.
    pub fn segment_index(&self, t: f64) -> usize {
        self.segments
            .iter()
            .rposition(|s| s.t_start <= t)
            .unwrap_or(0)
    }

    /// Per-step joint covariance `[[Qd, Md], [Mdᵀ, V/dt]]` of a segment.
    pub fn joint_step_covariance(&self, segment: usize) -> DMatrix<f64> {
        let s = &self.segments[segment];
        let (n, m) = (self.n(), self.m_out());
        let mut j = DMatrix::zeros(n + m, n + m);
        j.view_mut((0, 0), (n, n)).copy_from(&self.qd);
        j.view_mut((0, n), (n, m)).copy_from(&s.md);
        j.view_mut((n, 0), (m, n)).copy_from(&s.md.transpose());
        j.view_mut((n, n), (m, m)).copy_from(&s.r);
        j
    }
}

/// Discretize with step `dt`; see the module documentation for conventions.
pub fn discretize(sys: &StateSpaceModel, dt: f64) -> Result<DiscreteModel> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    let n = sys.n();
    let q = sys.process_noise_intensity();
    let mut big = DMatrix::zeros(3 * n, 3 * n);
    big.view_mut((0, 0), (n, n)).copy_from(&(sys.a() * dt));
    big.view_mut((0, n), (n, n)).copy_from(&(&q * dt));
    big.view_mut((0, 2 * n), (n, n)).copy_from(&(DMatrix::<f64>::identity(n, n) * dt));
    big.view_mut((n, n), (n, n)).copy_from(&(-sys.a().transpose() * dt));
    let e = expm(&big);
    let ad = e.view((0, 0), (n, n)).clone_owned();
    let f12 = e.view((0, n), (n, n)).clone_owned();
    let gamma = e.view((0, 2 * n), (n, n)).clone_owned();
    let qd = symmetrize(&(f12 * ad.transpose()));
    let bd = &gamma * sys.b();

    let lift = |t_start: f64, set: super::MeasurementSet<'_>| DiscreteMeasurement {
        t_start,
        c: set.c.clone(),
        d: set.d.clone(),
        r: set.v / dt,
        md: &gamma * sys.l() * set.m / dt,
    };
    let mut segments = vec![lift(f64::NEG_INFINITY, sys.base_measurement())];
    for t in sys.breakpoints() {
        segments.push(lift(t, sys.measurement_at(t)));
    }
    let stationary = if n > 0 && sys.is_hurwitz() {
        sys.stationary_covariance().ok()
    } else {
        None
    };
    Ok(DiscreteModel {
        dt,
        ad,
        bd,
        qd,
        gamma,
        segments,
        stationary,
        fingerprint: sys.fingerprint(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    fn scalar(a: f64, w: f64) -> StateSpaceModel {
        StateSpaceModel::new(
            dmatrix![a],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![0.0],
            dmatrix![1.0],
            dmatrix![w],
            dmatrix![1.0],
            dmatrix![0.25],
        )
        .unwrap()
    }

    #[test]
    fn zero_dynamics() {
        let d = discretize(&scalar(0.0, 3.0), 0.2).unwrap();
        assert!((d.ad[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((d.qd[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((d.bd[(0, 0)] - 0.2).abs() < 1e-15);
    }

    #[test]
    fn scalar_decay() {
        let d = discretize(&scalar(-1.0, 2.0), 0.1).unwrap();
        assert!((d.ad[(0, 0)] - (-0.1_f64).exp()).abs() < 1e-15);
        assert!((d.qd[(0, 0)] - (1.0 - (-0.2_f64).exp())).abs() < 1e-15);
        let gamma = 1.0 - (-0.1_f64).exp();
        assert!((d.bd[(0, 0)] - gamma).abs() < 1e-15);
        assert!((d.segments[0].md[(0, 0)] - gamma * 0.25 / 0.1).abs() < 1e-13);
        assert!((d.segments[0].r[(0, 0)] - 10.0).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_dt() {
        assert!(discretize(&scalar(-1.0, 1.0), 0.0).is_err());
        assert!(discretize(&scalar(-1.0, 1.0), f64::NAN).is_err());
    }

    #[test]
    fn small_step_matches_series() {
        let a = dmatrix![-0.3, 5.0, 0.0; -5.0, -0.1, 1.0; 0.2, 0.0, -2.0];
        let sys = StateSpaceModel::autonomous(a.clone(), dmatrix![1.0, 0.0, 0.0]).unwrap();
        let dt = 1e-6 / a.norm();
        let d = discretize(&sys, dt).unwrap();
        let ad = a.clone() * dt;
        let eye = DMatrix::<f64>::identity(3, 3);
        let a2 = &ad * &ad;
        let a3 = &a2 * &ad;
        let series = &eye + &ad + &a2 / 2.0 + &a3 / 6.0 + &a3 * &ad / 24.0;
        assert!((&d.ad - &series).norm() < 1e-8 * series.norm());
        let first = &eye + &ad;
        assert!((&d.ad - &first).norm() < 10.0 * dt * dt * a.norm() * a.norm());
    }
}
