//! Continuous-time linear Gaussian state-space models.
//!
//! ```text
//! ẋ = A x + B u + L w        E[w(t) w(s)ᵀ] = W δ(t−s)
//! z = C x + D u + v          E[v(t) v(s)ᵀ] = V δ(t−s),  E[w(t) v(s)ᵀ] = M δ(t−s)
//! ```
//!
//! `W` and `V` are white-noise intensities. The measurement maps `C`, `D` (and
//! the noise terms `V`, `M` that depend on them after composition) may follow a
//! piecewise-constant schedule in absolute time.

mod compose;
mod discrete;
mod frequency;
mod io;

pub use compose::{augment_colored_noise, drop_input, parallel, series_connect};
pub use discrete::{discretize, DiscreteMeasurement, DiscreteModel};
pub use frequency::{
    noise_transfer, output_cross_spectrum, output_noise_spectrum, output_noise_spectrum_grid,
    transfer_function,
};
pub use io::ModelDocument;

use std::fmt;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::{self, DEFINITENESS_RTOL};

/// Measurement-side matrices valid from `t_start` until the next entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleEntry {
    pub t_start: f64,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    /// Replaces the base `V` for this segment when present.
    pub v: Option<DMatrix<f64>>,
    /// Replaces the base `M` for this segment when present.
    pub m: Option<DMatrix<f64>>,
}

/// Borrowed view of the measurement matrices active at some instant.
#[derive(Debug, Clone, Copy)]
pub struct MeasurementSet<'a> {
    pub c: &'a DMatrix<f64>,
    pub d: &'a DMatrix<f64>,
    pub v: &'a DMatrix<f64>,
    pub m: &'a DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceModel {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
    c: DMatrix<f64>,
    d: DMatrix<f64>,
    l: DMatrix<f64>,
    w: DMatrix<f64>,
    v: DMatrix<f64>,
    m: DMatrix<f64>,
    schedule: Option<Vec<ScheduleEntry>>,
}

fn check_shape(name: &str, mat: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if mat.nrows() != rows || mat.ncols() != cols {
        return Err(Error::Dimension(format!(
            "{name} is {}x{}, expected {rows}x{cols}",
            mat.nrows(),
            mat.ncols()
        )));
    }
    Ok(())
}

impl StateSpaceModel {
    /// Build a model, checking that all shapes agree. Definiteness of the
    /// noise covariances is not enforced here; see [`validate`].
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        a: DMatrix<f64>,
        b: DMatrix<f64>,
        c: DMatrix<f64>,
        d: DMatrix<f64>,
        l: DMatrix<f64>,
        w: DMatrix<f64>,
        v: DMatrix<f64>,
        m: DMatrix<f64>,
    ) -> Result<Self> {
        let n = a.nrows();
        check_shape("A", &a, n, n)?;
        let p = b.ncols();
        check_shape("B", &b, n, p)?;
        let mo = c.nrows();
        check_shape("C", &c, mo, n)?;
        check_shape("D", &d, mo, p)?;
        let q = l.ncols();
        check_shape("L", &l, n, q)?;
        check_shape("W", &w, q, q)?;
        check_shape("V", &v, mo, mo)?;
        check_shape("M", &m, q, mo)?;
        for (name, mat) in [
            ("A", &a),
            ("B", &b),
            ("C", &c),
            ("D", &d),
            ("L", &l),
            ("W", &w),
            ("V", &v),
            ("M", &m),
        ] {
            if mat.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} has non-finite entries")));
            }
        }
        Ok(Self {
            a,
            b,
            c,
            d,
            l,
            w,
            v,
            m,
            schedule: None,
        })
    }

    /// Noise-free model with no deterministic inputs.
    pub fn autonomous(a: DMatrix<f64>, c: DMatrix<f64>) -> Result<Self> {
        let n = a.nrows();
        let mo = c.nrows();
        Self::new(
            a,
            DMatrix::zeros(n, 0),
            c,
            DMatrix::zeros(mo, 0),
            DMatrix::zeros(n, 0),
            DMatrix::zeros(0, 0),
            DMatrix::zeros(mo, mo),
            DMatrix::zeros(0, mo),
        )
    }

    /// Static model `z = D u + v` (no states, no process noise).
    pub fn static_gain(d: DMatrix<f64>, v: DMatrix<f64>) -> Result<Self> {
        let (mo, p) = d.shape();
        Self::new(
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, p),
            DMatrix::zeros(mo, 0),
            d,
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, 0),
            v,
            DMatrix::zeros(0, mo),
        )
    }

    /// Attach a measurement schedule. Entries must be strictly increasing in time
    /// and match the model's measurement dimensions.
    pub fn with_schedule(mut self, schedule: Vec<ScheduleEntry>) -> Result<Self> {
        let (n, p, mo, q) = (self.n(), self.p(), self.m_out(), self.q());
        for (k, e) in schedule.iter().enumerate() {
            if !e.t_start.is_finite() {
                return Err(Error::Schedule(format!("entry {k} has non-finite start time")));
            }
            check_shape(&format!("schedule[{k}].C"), &e.c, mo, n)?;
            check_shape(&format!("schedule[{k}].D"), &e.d, mo, p)?;
            if let Some(v) = &e.v {
                check_shape(&format!("schedule[{k}].V"), v, mo, mo)?;
            }
            if let Some(m) = &e.m {
                check_shape(&format!("schedule[{k}].M"), m, q, mo)?;
            }
        }
        for pair in schedule.windows(2) {
            if pair[1].t_start <= pair[0].t_start {
                return Err(Error::Schedule(format!(
                    "entries out of order: {} follows {}",
                    pair[1].t_start, pair[0].t_start
                )));
            }
        }
        self.schedule = if schedule.is_empty() { None } else { Some(schedule) };
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }
    pub fn p(&self) -> usize {
        self.b.ncols()
    }
    /// Output dimension.
    pub fn m_out(&self) -> usize {
        self.c.nrows()
    }
    pub fn q(&self) -> usize {
        self.l.ncols()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }
    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }
    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }
    pub fn d(&self) -> &DMatrix<f64> {
        &self.d
    }
    pub fn l(&self) -> &DMatrix<f64> {
        &self.l
    }
    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }
    pub fn v(&self) -> &DMatrix<f64> {
        &self.v
    }
    /// Process/measurement noise cross-correlation `M` (q×m).
    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }
    pub fn schedule(&self) -> Option<&[ScheduleEntry]> {
        self.schedule.as_deref()
    }

    /// Measurement matrices in force at the base segment (before any schedule entry).
    pub fn base_measurement(&self) -> MeasurementSet<'_> {
        MeasurementSet {
            c: &self.c,
            d: &self.d,
            v: &self.v,
            m: &self.m,
        }
    }

    /// Measurement matrices in force at absolute time `t`.
    pub fn measurement_at(&self, t: f64) -> MeasurementSet<'_> {
        let base = self.base_measurement();
        let Some(schedule) = &self.schedule else {
            return base;
        };
        match schedule.iter().rev().find(|e| e.t_start <= t) {
            None => base,
            Some(e) => MeasurementSet {
                c: &e.c,
                d: &e.d,
                v: e.v.as_ref().unwrap_or(&self.v),
                m: e.m.as_ref().unwrap_or(&self.m),
            },
        }
    }

    /// Start times of all schedule segments.
    pub fn breakpoints(&self) -> Vec<f64> {
        self.schedule
            .as_ref()
            .map(|s| s.iter().map(|e| e.t_start).collect())
            .unwrap_or_default()
    }

    /// Copy of the model with the measurement matrices in force at `t` and no schedule.
    pub fn frozen_at(&self, t: f64) -> Self {
        let set = self.measurement_at(t);
        Self {
            c: set.c.clone(),
            d: set.d.clone(),
            v: set.v.clone(),
            m: set.m.clone(),
            schedule: None,
            ..self.clone()
        }
    }

    /// Joint white-noise intensity `[[W, M], [Mᵀ, V]]` for a measurement set.
    pub fn joint_noise_covariance(&self, set: MeasurementSet<'_>) -> DMatrix<f64> {
        let (q, mo) = (self.q(), self.m_out());
        let mut j = DMatrix::zeros(q + mo, q + mo);
        j.view_mut((0, 0), (q, q)).copy_from(&self.w);
        j.view_mut((0, q), (q, mo)).copy_from(set.m);
        j.view_mut((q, 0), (mo, q)).copy_from(&set.m.transpose());
        j.view_mut((q, q), (mo, mo)).copy_from(set.v);
        j
    }

    /// `L W Lᵀ`.
    pub fn process_noise_intensity(&self) -> DMatrix<f64> {
        &self.l * &self.w * self.l.transpose()
    }

    /// Cross-correlation lifted into state space, `L M` (n×m).
    pub fn state_cross_correlation(&self, set: MeasurementSet<'_>) -> DMatrix<f64> {
        &self.l * set.m
    }

    pub fn is_hurwitz(&self) -> bool {
        self.n() == 0 || linalg::spectral_abscissa(&self.a) < 0.0
    }

    /// Stationary state covariance `Σ` solving `AΣ + ΣAᵀ + LWLᵀ = 0`.
    pub fn stationary_covariance(&self) -> Result<DMatrix<f64>> {
        linalg::stationary_covariance(&self.a, &self.l, &self.w)
    }

    /// SHA-256 over the canonical text serialization.
    pub fn fingerprint(&self) -> [u8; 32] {
        let doc = ModelDocument::from_model(self);
        let bytes = serde_json::to_vec(&doc).expect("model document serializes");
        Sha256::digest(&bytes).into()
    }

    pub(crate) fn from_parts_unchecked(
        parts: [DMatrix<f64>; 8],
        schedule: Option<Vec<ScheduleEntry>>,
    ) -> Self {
        let [a, b, c, d, l, w, v, m] = parts;
        Self {
            a,
            b,
            c,
            d,
            l,
            w,
            v,
            m,
            schedule,
        }
    }
}

/// One violated model invariant.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub matrix: String,
    pub property: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {}", self.matrix, self.property)
    }
}

fn diag(matrix: impl Into<String>, property: impl Into<String>) -> Diagnostic {
    Diagnostic {
        matrix: matrix.into(),
        property: property.into(),
    }
}

fn check_measurement_set(
    model: &StateSpaceModel,
    set: MeasurementSet<'_>,
    prefix: &str,
    out: &mut Vec<Diagnostic>,
) {
    if !linalg::is_symmetric(set.v, 1e-12) {
        out.push(diag(format!("{prefix}V"), "not symmetric"));
    }
    if !linalg::is_pd(set.v, DEFINITENESS_RTOL) {
        out.push(diag(format!("{prefix}V"), "not positive definite"));
    }
    let joint = model.joint_noise_covariance(set);
    if !linalg::is_psd(&joint, DEFINITENESS_RTOL) {
        out.push(diag(format!("{prefix}[[W,M],[M^T,V]]"), "not PSD"));
    }
}

/// Check every model invariant; an empty list means the model is well formed.
pub fn validate(model: &StateSpaceModel) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    if !linalg::is_symmetric(&model.w, 1e-12) {
        out.push(diag("W", "not symmetric"));
    }
    if !linalg::is_psd(&model.w, DEFINITENESS_RTOL) {
        out.push(diag("W", "not PSD"));
    }
    check_measurement_set(model, model.base_measurement(), "", &mut out);
    if let Some(schedule) = &model.schedule {
        for pair in schedule.windows(2) {
            if pair[1].t_start <= pair[0].t_start {
                out.push(diag("schedule", "segments not ordered in time"));
            }
        }
        for (k, e) in schedule.iter().enumerate() {
            let set = model.measurement_at(e.t_start);
            check_measurement_set(model, set, &format!("schedule[{k}]."), &mut out);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    pub(crate) fn damped_oscillator() -> StateSpaceModel {
        StateSpaceModel::new(
            dmatrix![0.0, 1.0; -1.0, -0.2],
            dmatrix![0.0; 1.0],
            dmatrix![1.0, 0.0],
            dmatrix![0.0],
            dmatrix![0.0; 1.0],
            dmatrix![1.0],
            dmatrix![0.5],
            dmatrix![0.0],
        )
        .unwrap()
    }

    #[test]
    fn well_formed_model_has_no_diagnostics() {
        assert!(validate(&damped_oscillator()).is_empty());
    }

    #[test]
    fn zero_v_is_reported() {
        let s = damped_oscillator();
        let bad = StateSpaceModel::new(
            s.a.clone(),
            s.b.clone(),
            s.c.clone(),
            s.d.clone(),
            s.l.clone(),
            s.w.clone(),
            dmatrix![0.0],
            s.m.clone(),
        )
        .unwrap();
        let diags = validate(&bad);
        assert!(diags.iter().any(|d| d.to_string() == "V not positive definite"));
    }

    #[test]
    fn negative_w_is_reported() {
        let s = damped_oscillator();
        let bad = StateSpaceModel::new(
            s.a.clone(),
            s.b.clone(),
            s.c.clone(),
            s.d.clone(),
            s.l.clone(),
            dmatrix![-1.0],
            s.v.clone(),
            s.m.clone(),
        )
        .unwrap();
        let diags = validate(&bad);
        assert!(diags.iter().any(|d| d.to_string() == "W not PSD"));
    }

    #[test]
    fn overcorrelated_noise_is_reported() {
        let s = damped_oscillator();
        let bad = StateSpaceModel::new(
            s.a.clone(),
            s.b.clone(),
            s.c.clone(),
            s.d.clone(),
            s.l.clone(),
            dmatrix![1.0],
            dmatrix![0.5],
            dmatrix![1.0],
        )
        .unwrap();
        let diags = validate(&bad);
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].matrix, "[[W,M],[M^T,V]]");
    }

    #[test]
    fn shape_errors_name_the_matrix() {
        let err = StateSpaceModel::new(
            dmatrix![-1.0],
            DMatrix::zeros(1, 0),
            dmatrix![1.0, 0.0],
            DMatrix::zeros(1, 0),
            DMatrix::zeros(1, 0),
            DMatrix::zeros(0, 0),
            dmatrix![1.0],
            DMatrix::zeros(0, 1),
        )
        .unwrap_err();
        assert!(err.to_string().contains("C is 1x2"));
    }

    #[test]
    fn schedule_lookup_and_ordering() {
        let s = damped_oscillator();
        let e = |t: f64, g: f64| ScheduleEntry {
            t_start: t,
            c: dmatrix![g, 0.0],
            d: dmatrix![0.0],
            v: None,
            m: None,
        };
        let model = s.clone().with_schedule(vec![e(1.0, 2.0), e(2.0, 3.0)]).unwrap();
        assert_eq!(model.measurement_at(0.5).c[(0, 0)], 1.0);
        assert_eq!(model.measurement_at(1.0).c[(0, 0)], 2.0);
        assert_eq!(model.measurement_at(7.0).c[(0, 0)], 3.0);
        assert!(s.with_schedule(vec![e(2.0, 2.0), e(1.0, 3.0)]).is_err());
    }
}
