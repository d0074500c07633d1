//! Discrete predict/update filter on an exactly discretized model.
//!
//! Within one sampling step the state noise `w_k` and the averaged measurement noise
//! `v_k` are correlated, `E[w_k v_kᵀ] = M_d`. Writing `J = M_d R⁻¹` removes the
//! correlation from the prediction:
//!
//! ```text
//! x⁻_{k+1} = (A_d − J C) x⁺_k + B_d u_k + J (z_k − D u_k)
//! P⁻_{k+1} = (A_d − J C) P⁺_k (A_d − J C)ᵀ + Q_d − J M_dᵀ
//! ```
//!
//! The update is the usual one with `S = C P⁻ Cᵀ + R`, `ν = z − C x⁻ − D u`.
//! Once `P⁻` stops changing the gain is frozen and each step costs a few
//! matrix-vector products; a schedule breakpoint unfreezes it.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{ensure_psd, max_abs, min_eigenvalue, spd_solve, symmetrize};
use crate::record::{self, Samples};
use crate::statespace::DiscreteModel;

const MAGIC: &[u8; 8] = b"OMKFILT\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub t: f64,
    pub xhat: DVector<f64>,
    pub p: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterInit {
    pub x0: DVector<f64>,
    pub p0: DMatrix<f64>,
}

impl FilterInit {
    /// `x̂₀ = 0`, `P₀` the stationary covariance of the model.
    pub fn thermal_prior(dsys: &DiscreteModel) -> Result<Self> {
        let p0 = dsys.stationary.clone().ok_or_else(|| {
            Error::InvalidParameter("model has no stationary covariance for the prior".into())
        })?;
        Ok(Self {
            x0: DVector::zeros(dsys.n()),
            p0,
        })
    }

    pub fn new(x0: DVector<f64>, p0: DMatrix<f64>) -> Self {
        Self { x0, p0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FilterOptions {
    /// Absolute time of the first sample.
    pub t0: f64,
    /// Freeze the gain once `‖ΔP⁻‖ ≤ freeze_tol ‖P⁻‖` (max-abs norms).
    pub freeze_gain: bool,
    pub freeze_tol: f64,
    /// Verify `P⁺` is PSD after every non-frozen update.
    pub check_psd: bool,
    /// Record `x̂⁺` and `diag P⁺` per step.
    pub store_states: bool,
    /// Record full `P⁺` per step.
    pub store_covariances: bool,
    /// Record `K` per step.
    pub store_gains: bool,
}

impl Default for FilterOptions {
    fn default() -> Self {
        Self {
            t0: 0.0,
            freeze_gain: true,
            freeze_tol: 1e-13,
            check_psd: false,
            store_states: true,
            store_covariances: false,
            store_gains: false,
        }
    }
}

struct SegmentData {
    t_start: f64,
    c: DMatrix<f64>,
    r: DMatrix<f64>,
    a_t: DMatrix<f64>,
    q_t: DMatrix<f64>,
    c_flat: Vec<f64>,
    d_flat: Vec<f64>,
    j_flat: Vec<f64>,
    a_flat: Vec<f64>,
}

struct Frozen {
    k: DMatrix<f64>,
    k_flat: Vec<f64>,
    s: DMatrix<f64>,
    p_post: DMatrix<f64>,
}

fn flat(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

fn matvec(a: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        *o = a[i * cols..(i + 1) * cols]
            .iter()
            .zip(x)
            .map(|(p, q)| p * q)
            .sum();
    }
}

fn matvec_add(a: &[f64], x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    if cols == 0 {
        return;
    }
    for (i, o) in out.iter_mut().enumerate() {
        *o += a[i * cols..(i + 1) * cols]
            .iter()
            .zip(x)
            .map(|(p, q)| p * q)
            .sum::<f64>();
    }
}

/// Incremental filter; [`run_filter`] drives it over a whole record.
pub struct KalmanFilter<'a> {
    dsys: &'a DiscreteModel,
    opts: FilterOptions,
    segments: Vec<SegmentData>,
    bd_flat: Vec<f64>,
    seg: usize,
    steps: usize,
    x_prior: Vec<f64>,
    p_prior: DMatrix<f64>,
    x_post: Vec<f64>,
    p_post: DMatrix<f64>,
    nu: Vec<f64>,
    s: DMatrix<f64>,
    k: DMatrix<f64>,
    frozen: Option<Frozen>,
    frozen_at: Option<usize>,
    scratch_m: Vec<f64>,
}

impl<'a> KalmanFilter<'a> {
    pub fn new(dsys: &'a DiscreteModel, init: &FilterInit, opts: FilterOptions) -> Result<Self> {
        let (n, m) = (dsys.n(), dsys.m_out());
        if init.x0.len() != n || init.p0.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "initial state {} and covariance {:?} for {n} states",
                init.x0.len(),
                init.p0.shape()
            )));
        }
        ensure_psd(&init.p0, "P0")?;
        let mut segments = Vec::with_capacity(dsys.segments.len());
        for s in &dsys.segments {
            let j = if max_abs(&s.md) == 0.0 {
                DMatrix::zeros(n, m)
            } else {
                spd_solve(&s.r, &s.md.transpose(), "per-step measurement noise R")?.transpose()
            };
            let a_t = &dsys.ad - &j * &s.c;
            let q_t = symmetrize(&(&dsys.qd - &j * s.md.transpose()));
            segments.push(SegmentData {
                t_start: s.t_start,
                c_flat: flat(&s.c),
                d_flat: flat(&s.d),
                j_flat: flat(&j),
                a_flat: flat(&a_t),
                c: s.c.clone(),
                r: s.r.clone(),
                a_t,
                q_t,
            });
        }
        let seg = dsys.segment_index(opts.t0);
        Ok(Self {
            dsys,
            opts,
            segments,
            bd_flat: flat(&dsys.bd),
            seg,
            steps: 0,
            x_prior: init.x0.as_slice().to_vec(),
            p_prior: symmetrize(&init.p0),
            x_post: init.x0.as_slice().to_vec(),
            p_post: symmetrize(&init.p0),
            nu: vec![0.0; m],
            s: DMatrix::zeros(m, m),
            k: DMatrix::zeros(n, m),
            frozen: None,
            frozen_at: None,
            scratch_m: vec![0.0; m],
        })
    }

    /// Time of the next sample to be processed.
    pub fn time(&self) -> f64 {
        self.opts.t0 + self.steps as f64 * self.dsys.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Step index at which the gain was frozen last.
    pub fn frozen_at(&self) -> Option<usize> {
        self.frozen_at
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen.is_some()
    }

    /// Filtered estimate `x̂⁺` after the last step.
    pub fn xhat(&self) -> &[f64] {
        &self.x_post
    }

    /// `P⁺` after the last step.
    pub fn p_post(&self) -> &DMatrix<f64> {
        match &self.frozen {
            Some(f) => &f.p_post,
            None => &self.p_post,
        }
    }

    /// Prior for the next sample.
    pub fn x_prior(&self) -> &[f64] {
        &self.x_prior
    }

    pub fn p_prior(&self) -> &DMatrix<f64> {
        &self.p_prior
    }

    pub fn innovation(&self) -> &[f64] {
        &self.nu
    }

    pub fn innovation_covariance(&self) -> &DMatrix<f64> {
        match &self.frozen {
            Some(f) => &f.s,
            None => &self.s,
        }
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        match &self.frozen {
            Some(f) => &f.k,
            None => &self.k,
        }
    }

    pub fn state(&self) -> KalmanState {
        KalmanState {
            t: self.time() - self.dsys.dt,
            xhat: DVector::from_column_slice(&self.x_post),
            p: self.p_post().clone(),
        }
    }

    fn advance_segment(&mut self) {
        let t = self.time();
        let mut seg = self.seg;
        while seg + 1 < self.segments.len() && self.segments[seg + 1].t_start <= t {
            seg += 1;
        }
        if seg != self.seg {
            self.seg = seg;
            if let Some(f) = self.frozen.take() {
                self.p_post = f.p_post;
                self.s = f.s;
                self.k = f.k;
            }
        }
    }

    /// Process one measurement `z` (with optional deterministic input `u`).
    pub fn step(&mut self, z: &[f64], u: Option<&[f64]>) -> Result<()> {
        let (n, m) = (self.dsys.n(), self.dsys.m_out());
        if z.len() != m {
            return Err(Error::Dimension(format!("measurement has {} entries, expected {m}", z.len())));
        }
        if let Some(u) = u {
            if u.len() != self.dsys.p() {
                return Err(Error::Dimension(format!(
                    "input has {} entries, expected {}",
                    u.len(),
                    self.dsys.p()
                )));
            }
        }
        self.advance_segment();
        let seg = &self.segments[self.seg];

        // zc = z − D u
        let zc = &mut self.scratch_m;
        zc.copy_from_slice(z);
        if let Some(u) = u {
            matvec(&seg.d_flat, u, &mut self.nu);
            for (a, b) in zc.iter_mut().zip(&self.nu) {
                *a -= b;
            }
        }
        // ν = zc − C x⁻
        matvec(&seg.c_flat, &self.x_prior, &mut self.nu);
        for (v, a) in self.nu.iter_mut().zip(zc.iter()) {
            *v = a - *v;
        }

        if let Some(f) = &self.frozen {
            self.x_post.copy_from_slice(&self.x_prior);
            matvec_add(&f.k_flat, &self.nu, &mut self.x_post);
            matvec(&seg.a_flat, &self.x_post, &mut self.x_prior);
            matvec_add(&seg.j_flat, zc, &mut self.x_prior);
            if let Some(u) = u {
                matvec_add(&self.bd_flat, u, &mut self.x_prior);
            }
            self.steps += 1;
            return Ok(());
        }

        // Update.
        let pct = &self.p_prior * seg.c.transpose();
        let s = symmetrize(&(&seg.c * &pct + &seg.r));
        let k = spd_solve(&s, &pct.transpose(), "innovation covariance S")?.transpose();
        self.x_post.copy_from_slice(&self.x_prior);
        let kv = &k * DVector::from_column_slice(&self.nu);
        for (x, d) in self.x_post.iter_mut().zip(kv.iter()) {
            *x += d;
        }
        let ikc = DMatrix::identity(n, n) - &k * &seg.c;
        let p_post = symmetrize(&(&ikc * &self.p_prior * ikc.transpose() + &k * &seg.r * k.transpose()));
        if self.opts.check_psd {
            let tr = p_post.trace().abs().max(f64::MIN_POSITIVE);
            let min = min_eigenvalue(&p_post);
            if min < -1e-10 * tr {
                return Err(Error::NotPositiveSemidefinite {
                    what: format!("P after step {}", self.steps),
                    min_eig: min,
                });
            }
        }

        // Predict.
        matvec(&seg.a_flat, &self.x_post, &mut self.x_prior);
        matvec_add(&seg.j_flat, zc, &mut self.x_prior);
        if let Some(u) = u {
            matvec_add(&self.bd_flat, u, &mut self.x_prior);
        }
        let p_next = symmetrize(&(&seg.a_t * &p_post * seg.a_t.transpose() + &seg.q_t));
        let change = max_abs(&(&p_next - &self.p_prior));
        let scale = max_abs(&p_next);
        self.p_prior = p_next;
        self.s = s;
        self.k = k;
        self.p_post = p_post;
        if self.opts.freeze_gain && n > 0 && change <= self.opts.freeze_tol * scale {
            self.frozen = Some(Frozen {
                k_flat: flat(&self.k),
                k: self.k.clone(),
                s: self.s.clone(),
                p_post: self.p_post.clone(),
            });
            self.frozen_at = Some(self.steps);
        }
        self.steps += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterRun {
    pub dt: f64,
    pub t0: f64,
    pub fingerprint: [u8; 32],
    /// `N × n` filtered estimates (empty unless states were stored).
    pub xhat: Samples,
    /// `N × n` diagonal of `P⁺`.
    pub p_diag: Samples,
    /// `N × m` innovations.
    pub innovations: Samples,
    /// `N × m²` innovation covariances, row-major.
    pub s_seq: Samples,
    /// `N × n²` full `P⁺`, when requested.
    pub covariances: Option<Samples>,
    /// `N × nm` gains, row-major, when requested.
    pub gains: Option<Samples>,
    pub p_final: DMatrix<f64>,
    pub frozen_at: Option<usize>,
}

impl FilterRun {
    pub fn len(&self) -> usize {
        self.innovations.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.innovations.is_empty()
    }

    pub fn n(&self) -> usize {
        self.p_final.nrows()
    }

    pub fn m(&self) -> usize {
        self.innovations.cols()
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t0 + k as f64 * self.dt
    }

    pub fn innovation_covariance(&self, k: usize) -> DMatrix<f64> {
        let m = self.m();
        DMatrix::from_row_slice(m, m, self.s_seq.row(k))
    }

    /// Estimate and covariance at step `k`; needs stored states and covariances.
    pub fn state(&self, k: usize) -> Option<KalmanState> {
        let cov = self.covariances.as_ref()?;
        if self.xhat.rows() <= k {
            return None;
        }
        let n = self.n();
        Some(KalmanState {
            t: self.time(k),
            xhat: DVector::from_column_slice(self.xhat.row(k)),
            p: DMatrix::from_row_slice(n, n, cov.row(k)),
        })
    }

    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        w.write_all(MAGIC)?;
        record::write_u32(w, VERSION)?;
        record::write_u32(w, n as u32)?;
        record::write_u32(w, m as u32)?;
        record::write_f64(w, self.dt)?;
        record::write_f64(w, self.t0)?;
        record::write_u64(w, self.len() as u64)?;
        record::write_u64(w, self.xhat.rows() as u64)?;
        record::write_u64(w, self.frozen_at.map_or(u64::MAX, |k| k as u64))?;
        w.write_all(&self.fingerprint)?;
        record::write_f64s(w, self.xhat.as_slice())?;
        record::write_f64s(w, self.p_diag.as_slice())?;
        record::write_f64s(w, self.innovations.as_slice())?;
        record::write_f64s(w, self.s_seq.as_slice())?;
        record::write_f64s(w, self.p_final.transpose().as_slice())?;
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let magic: [u8; 8] = record::read_array(r)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a filter-run file".into()));
        }
        let version = record::read_u32(r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported filter-run version {version}")));
        }
        let n = record::read_u32(r)? as usize;
        let m = record::read_u32(r)? as usize;
        let dt = record::read_f64(r)?;
        let t0 = record::read_f64(r)?;
        let len = record::read_u64(r)? as usize;
        let state_rows = record::read_u64(r)? as usize;
        let frozen = record::read_u64(r)?;
        let fingerprint: [u8; 32] = record::read_array(r)?;
        let xhat = Samples::from_vec(n, record::read_f64s(r, state_rows * n)?)?;
        let p_diag = Samples::from_vec(n, record::read_f64s(r, state_rows * n)?)?;
        let innovations = Samples::from_vec(m, record::read_f64s(r, len * m)?)?;
        let s_seq = Samples::from_vec(m * m, record::read_f64s(r, len * m * m)?)?;
        let p_final = DMatrix::from_row_slice(n, n, &record::read_f64s(r, n * n)?);
        Ok(Self {
            dt,
            t0,
            fingerprint,
            xhat,
            p_diag,
            innovations,
            s_seq,
            covariances: None,
            gains: None,
            p_final,
            frozen_at: (frozen != u64::MAX).then_some(frozen as usize),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        self.write_binary(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_binary(&mut BufReader::new(std::fs::File::open(path)?))
    }

    /// CSV with columns `t, xhat*, P*, nu*`; at most `max_rows` rows when given.
    pub fn write_csv(&self, w: &mut impl Write, max_rows: Option<usize>) -> Result<()> {
        let (n, m) = (self.n(), self.m());
        let with_states = self.xhat.rows() == self.len();
        let mut header = vec!["t".to_string()];
        if with_states {
            header.extend((0..n).map(|i| format!("xhat{i}")));
            header.extend((0..n).map(|i| format!("P{i}{i}")));
        }
        header.extend((0..m).map(|i| format!("nu{i}")));
        writeln!(w, "{}", header.join(","))?;
        let rows = max_rows.map_or(self.len(), |r| r.min(self.len()));
        for k in 0..rows {
            let mut line = format!("{:e}", self.time(k));
            let mut push = |vals: &[f64]| {
                for v in vals {
                    line.push_str(&format!(",{v:e}"));
                }
            };
            if with_states {
                push(self.xhat.row(k));
                push(self.p_diag.row(k));
            }
            push(self.innovations.row(k));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

pub fn run_filter(
    dsys: &DiscreteModel,
    z: &Samples,
    init: &FilterInit,
    opts: &FilterOptions,
) -> Result<FilterRun> {
    run_filter_with_inputs(dsys, z, None, init, opts)
}

/// As [`run_filter`], with deterministic inputs `u` (`N × p`) supplied externally.
pub fn run_filter_with_inputs(
    dsys: &DiscreteModel,
    z: &Samples,
    u: Option<&Samples>,
    init: &FilterInit,
    opts: &FilterOptions,
) -> Result<FilterRun> {
    let (n, m) = (dsys.n(), dsys.m_out());
    let steps = z.rows();
    if steps == 0 {
        return Err(Error::TooShort("empty measurement record".into()));
    }
    if z.cols() != m {
        return Err(Error::Dimension(format!(
            "record has {} channels, model has {m} outputs",
            z.cols()
        )));
    }
    if let Some(u) = u {
        if u.rows() != steps || u.cols() != dsys.p() {
            return Err(Error::Dimension(format!(
                "inputs are {}x{}, expected {steps}x{}",
                u.rows(),
                u.cols(),
                dsys.p()
            )));
        }
    }
    let mut kf = KalmanFilter::new(dsys, init, *opts)?;
    let state_rows = if opts.store_states { steps } else { 0 };
    let mut xhat = Samples::with_capacity(state_rows, n);
    let mut p_diag = Samples::with_capacity(state_rows, n);
    let mut innovations = Samples::with_capacity(steps, m);
    let mut s_seq = Samples::with_capacity(steps, m * m);
    let mut covariances = opts.store_covariances.then(|| Samples::with_capacity(steps, n * n));
    let mut gains = opts.store_gains.then(|| Samples::with_capacity(steps, n * m));
    let mut diag = vec![0.0; n];
    for k in 0..steps {
        kf.step(z.row(k), u.map(|u| u.row(k)))?;
        innovations.push_row(kf.innovation());
        s_seq.push_row(kf.innovation_covariance().transpose().as_slice());
        if opts.store_states {
            xhat.push_row(kf.xhat());
            let p = kf.p_post();
            for (i, d) in diag.iter_mut().enumerate() {
                *d = p[(i, i)];
            }
            p_diag.push_row(&diag);
        }
        if let Some(c) = covariances.as_mut() {
            c.push_row(kf.p_post().transpose().as_slice());
        }
        if let Some(g) = gains.as_mut() {
            g.push_row(kf.gain().transpose().as_slice());
        }
    }
    Ok(FilterRun {
        dt: dsys.dt,
        t0: opts.t0,
        fingerprint: dsys.fingerprint,
        xhat,
        p_diag,
        innovations,
        s_seq,
        covariances,
        gains,
        p_final: kf.p_post().clone(),
        frozen_at: kf.frozen_at(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filter::steady_state_covariance;
    use crate::sim::{simulate, InitialState};
    use crate::statespace::{discretize, StateSpaceModel};
    use nalgebra::dmatrix;

    fn scalar() -> StateSpaceModel {
        StateSpaceModel::new(
            dmatrix![-1.0],
            DMatrix::zeros(1, 0),
            dmatrix![1.0],
            DMatrix::zeros(1, 0),
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![1.0],
            dmatrix![0.0],
        )
        .unwrap()
    }

    #[test]
    fn zero_record_stays_at_zero() {
        let d = discretize(&scalar(), 1e-2).unwrap();
        let z = Samples::zeros(500, 1);
        let run = run_filter(&d, &z, &FilterInit::thermal_prior(&d).unwrap(), &FilterOptions::default()).unwrap();
        assert!(run.innovations.as_slice().iter().all(|&v| v == 0.0));
        assert!(run.xhat.as_slice().iter().all(|&v| v == 0.0));
        assert_eq!(run.len(), 500);
    }

    #[test]
    fn huge_prior_converges_to_continuous_solution() {
        let sys = scalar();
        let dt = 1e-3;
        let d = discretize(&sys, dt).unwrap();
        let init = FilterInit::new(DVector::zeros(1), dmatrix![1e6]);
        let mut kf = KalmanFilter::new(&d, &init, FilterOptions::default()).unwrap();
        for _ in 0..40_000 {
            kf.step(&[0.0], None).unwrap();
        }
        assert!(kf.is_frozen());
        let mid = (kf.p_prior()[(0, 0)] + kf.p_post()[(0, 0)]) / 2.0;
        let pinf = steady_state_covariance(&sys).unwrap()[(0, 0)];
        assert!((mid / pinf - 1.0).abs() < 1e-6, "{mid} vs {pinf}");
    }

    #[test]
    fn frozen_and_unfrozen_agree() {
        let sys = scalar();
        let d = discretize(&sys, 1e-2).unwrap();
        let traj = simulate(&d, 3000, 5, &InitialState::Stationary).unwrap();
        let init = FilterInit::thermal_prior(&d).unwrap();
        let a = run_filter(&d, &traj.z, &init, &FilterOptions::default()).unwrap();
        let b = run_filter(
            &d,
            &traj.z,
            &init,
            &FilterOptions {
                freeze_gain: false,
                check_psd: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(a.frozen_at.is_some());
        assert!(b.frozen_at.is_none());
        for (x, y) in a.xhat.as_slice().iter().zip(b.xhat.as_slice()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn binary_and_csv_records() {
        let d = discretize(&scalar(), 1e-2).unwrap();
        let traj = simulate(&d, 50, 1, &InitialState::Zero).unwrap();
        let run = run_filter(&d, &traj.z, &FilterInit::thermal_prior(&d).unwrap(), &FilterOptions::default()).unwrap();
        let mut buf = Vec::new();
        run.write_binary(&mut buf).unwrap();
        let back = FilterRun::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back, run);
        let mut csv = Vec::new();
        run.write_csv(&mut csv, Some(3)).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().next().unwrap(), "t,xhat0,P00,nu0");
        assert_eq!(text.lines().count(), 4);
        assert!(FilterRun::read_binary(&mut &buf[..20]).is_err());
    }

    #[test]
    fn empty_record_rejected() {
        let d = discretize(&scalar(), 1e-2).unwrap();
        let err = run_filter(&d, &Samples::zeros(0, 1), &FilterInit::thermal_prior(&d).unwrap(), &FilterOptions::default());
        assert!(matches!(err, Err(Error::TooShort(_))));
    }
}
