//! Linearized two-beam cavity optomechanics as state-space models.
//!
//! State order: `(q_k, p_k)` for each mechanical mode, then `x_d, y_d, x_r, y_r`
//! (detuned and resonant intra-cavity quadratures). Deterministic inputs are the
//! classical laser noises `(δβ_d, φ̇_d, δβ_r, φ̇_r)`. Process-noise channels are one
//! thermal channel per mechanical mode followed by the optical vacuum inputs
//! `x_d1, y_d1, x_d2, y_d2, x_r1, y_r1, x_r2, y_r2` (port 1 = input coupler,
//! port 2 = loss).

mod config;

pub use config::{BeamSection, OptomechConfig, PhaseStep};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::noise::ShapingFilter;
use crate::sim::thermal_occupation;
use crate::statespace::{
    augment_colored_noise, drop_input, parallel, series_connect, ScheduleEntry, StateSpaceModel,
};
use crate::units::HBAR;

/// Homodyne angle, piecewise constant in absolute time.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    pub initial: f64,
    /// `(t_start, phase)` pairs, strictly increasing in time.
    pub steps: Vec<(f64, f64)>,
}

impl PhaseSchedule {
    pub fn constant(phase: f64) -> Self {
        Self {
            initial: phase,
            steps: Vec::new(),
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        self.steps
            .iter()
            .rev()
            .find(|(t0, _)| *t0 <= t)
            .map_or(self.initial, |(_, phi)| *phi)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Beam {
    /// Extra-cavity power, W.
    pub power: f64,
    /// Laser angular frequency, rad/s.
    pub omega0: f64,
    /// Effective detuning from cavity resonance, rad/s.
    pub detuning: f64,
    /// Detection-path power transmission in `[0, 1]`.
    pub transmission: f64,
    pub phase: PhaseSchedule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalParams {
    /// Mechanical angular frequencies, rad/s; the first entry is the fundamental mode.
    pub omega_m: Vec<f64>,
    /// Mechanical linewidths (FWHM), rad/s.
    pub gamma_m: Vec<f64>,
    /// Coupling relative to the fundamental mode.
    pub coupling_scale: Vec<f64>,
    /// Input-coupler decay (HWHM), rad/s.
    pub kappa1: f64,
    /// Loss-port decay (HWHM), rad/s.
    pub kappa2: f64,
    /// Single-photon coupling, rad/s.
    pub g0: f64,
    pub detuned: Beam,
    pub resonant: Beam,
    /// Bath temperature, K.
    pub t_bath: f64,
    /// Zero-point position, m (reporting only).
    pub q_zpf: Option<f64>,
    /// Zero-point momentum, kg·m/s (reporting only).
    pub p_zpf: Option<f64>,
}

impl PhysicalParams {
    pub fn modes(&self) -> usize {
        self.omega_m.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        let m = self.coupling_scale.len();
        if m == 0 || self.omega_m.len() != m || self.gamma_m.len() != m {
            return bad(format!(
                "mechanical lists differ in length: omega_m {}, gamma_m {}, coupling_scale {}",
                self.omega_m.len(),
                self.gamma_m.len(),
                m
            ));
        }
        for (k, (&w, &g)) in self.omega_m.iter().zip(&self.gamma_m).enumerate() {
            if !(w > 0.0 && g > 0.0 && w.is_finite() && g.is_finite()) {
                return bad(format!("mode {k}: omega_m = {w}, gamma_m = {g} must be positive"));
            }
        }
        if self.coupling_scale.iter().any(|s| !s.is_finite()) {
            return bad("coupling_scale must be finite".into());
        }
        if !(self.kappa1 > 0.0 && self.kappa2 >= 0.0) {
            return bad(format!(
                "kappa1 = {} must be positive and kappa2 = {} non-negative",
                self.kappa1, self.kappa2
            ));
        }
        if !(self.g0 >= 0.0 && self.g0.is_finite()) {
            return bad(format!("g0 = {} must be non-negative", self.g0));
        }
        if !(self.t_bath >= 0.0) {
            return bad(format!("temperature {} K must be non-negative", self.t_bath));
        }
        for (name, b) in [("detuned", &self.detuned), ("resonant", &self.resonant)] {
            if !(b.power >= 0.0 && b.power.is_finite()) {
                return bad(format!("{name} beam power {} must be non-negative", b.power));
            }
            if !(b.omega0 > 0.0) {
                return bad(format!("{name} beam laser frequency must be positive"));
            }
            if !(0.0..=1.0).contains(&b.transmission) {
                return bad(format!(
                    "{name} beam transmission {} outside [0, 1]",
                    b.transmission
                ));
            }
            if !b.detuning.is_finite() {
                return bad(format!("{name} beam detuning must be finite"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedParams {
    /// Total cavity decay κ₁ + κ₂, rad/s.
    pub kappa: f64,
    pub alpha0_d: f64,
    pub alpha0_r: f64,
    pub theta_d: f64,
    pub theta_r: f64,
    /// Linearized coupling rates, rad/s.
    pub g_d: f64,
    pub g_r: f64,
    /// Bath occupation of the fundamental mode.
    pub nbar: f64,
    /// Bath occupation of every mode.
    pub nbar_modes: Vec<f64>,
}

/// Intra-cavity amplitude `|α₀| = √(2κ₁P/ħω₀) / √(κ² + Δ²)`.
pub fn intracavity_amplitude(kappa1: f64, kappa: f64, beam: &Beam) -> f64 {
    (2.0 * kappa1 * beam.power / (HBAR * beam.omega0)).sqrt()
        / (kappa * kappa + beam.detuning * beam.detuning).sqrt()
}

/// Power that produces the linearized coupling `g` (inverse of `g = √2 g₀ |α₀|`).
pub fn power_for_coupling(g: f64, g0: f64, kappa1: f64, kappa: f64, detuning: f64, omega0: f64) -> f64 {
    let alpha = g / (2.0_f64.sqrt() * g0);
    alpha * alpha * (kappa * kappa + detuning * detuning) * HBAR * omega0 / (2.0 * kappa1)
}

pub fn derive_params(p: &PhysicalParams) -> Result<DerivedParams> {
    p.validate()?;
    let kappa = p.kappa1 + p.kappa2;
    let alpha0_d = intracavity_amplitude(p.kappa1, kappa, &p.detuned);
    let alpha0_r = intracavity_amplitude(p.kappa1, kappa, &p.resonant);
    let nbar_modes: Vec<f64> = p
        .omega_m
        .iter()
        .map(|&w| thermal_occupation(p.t_bath, w))
        .collect();
    Ok(DerivedParams {
        kappa,
        alpha0_d,
        alpha0_r,
        theta_d: (p.detuned.detuning / kappa).atan(),
        theta_r: (p.resonant.detuning / kappa).atan(),
        g_d: 2.0_f64.sqrt() * p.g0 * alpha0_d,
        g_r: 2.0_f64.sqrt() * p.g0 * alpha0_r,
        nbar: nbar_modes[0],
        nbar_modes,
    })
}

/// Smallest relative state increment needed to resolve single-phonon steps,
/// `f_m dt / √n̄` with `f_m = ω_m / 2π`.
pub fn resolution_criterion(omega_m: f64, dt: f64, nbar: f64) -> f64 {
    omega_m / (2.0 * std::f64::consts::PI) * dt / nbar.sqrt()
}

/// Index range of the `(q, p)` pair of mechanical mode `k`.
pub fn mode_indices(k: usize) -> (usize, usize) {
    (2 * k, 2 * k + 1)
}

/// The bare cavity model with four raw outputs `(x_d^out, y_d^out, x_r^out, y_r^out)`.
pub fn build_cavity_model(p: &PhysicalParams, d: &DerivedParams) -> Result<StateSpaceModel> {
    p.validate()?;
    let modes = p.modes();
    let o = 2 * modes;
    let n = o + 4;
    let q = modes + 8;
    let k = d.kappa;
    let beams = [
        (d.g_d, d.theta_d, p.detuned.detuning, d.alpha0_d),
        (d.g_r, d.theta_r, p.resonant.detuning, d.alpha0_r),
    ];

    let mut a = DMatrix::zeros(n, n);
    for m in 0..modes {
        let (iq, ip) = mode_indices(m);
        a[(iq, ip)] = p.omega_m[m];
        a[(ip, iq)] = -p.omega_m[m];
        a[(ip, ip)] = -p.gamma_m[m];
        for (b, &(g, theta, _, _)) in beams.iter().enumerate() {
            let g = g * p.coupling_scale[m];
            let (ix, iy) = (o + 2 * b, o + 2 * b + 1);
            a[(ip, ix)] = g * theta.cos();
            a[(ip, iy)] = -g * theta.sin();
            a[(ix, iq)] = g * theta.sin();
            a[(iy, iq)] = g * theta.cos();
        }
    }
    let s1 = (2.0 * p.kappa1).sqrt();
    let s2 = (2.0 * p.kappa2).sqrt();
    let mut b_mat = DMatrix::zeros(n, 4);
    let mut l = DMatrix::zeros(n, q);
    let mut c = DMatrix::zeros(4, n);
    let mut dm = DMatrix::zeros(4, 4);
    let mut mm = DMatrix::zeros(q, 4);
    for (b, &(_, theta, delta, alpha)) in beams.iter().enumerate() {
        let (ix, iy) = (o + 2 * b, o + 2 * b + 1);
        a[(ix, ix)] = -k;
        a[(ix, iy)] = delta;
        a[(iy, ix)] = -delta;
        a[(iy, iy)] = -k;
        b_mat[(ix, 2 * b)] = s1;
        b_mat[(ix, 2 * b + 1)] = alpha * theta.sin();
        b_mat[(iy, 2 * b + 1)] = alpha * theta.cos();
        let col1 = modes + 4 * b;
        let col2 = col1 + 2;
        l[(ix, col1)] = -s1;
        l[(iy, col1 + 1)] = -s1;
        l[(ix, col2)] = -s2;
        l[(iy, col2 + 1)] = -s2;
        c[(2 * b, ix)] = s1;
        c[(2 * b + 1, iy)] = s1;
        dm[(2 * b, 2 * b)] = 1.0;
        mm[(col1, 2 * b)] = 0.5;
        mm[(col1 + 1, 2 * b + 1)] = 0.5;
    }
    let mut w = DMatrix::identity(q, q) * 0.5;
    for m in 0..modes {
        let (_, ip) = mode_indices(m);
        l[(ip, m)] = -(2.0 * p.gamma_m[m]).sqrt();
        w[(m, m)] = d.nbar_modes[m] + 0.5;
    }
    StateSpaceModel::new(a, b_mat, c, dm, l, w, DMatrix::identity(4, 4) * 0.5, mm)
}

/// Beam-splitter loss on one beam's two quadratures, with power transmission `η_t`.
///
/// The signal passes with `cos τ = √η_t`; the vacuum entering the open port adds
/// white noise `½ sin²τ` per quadrature, so a vacuum-level input leaves at `½`.
pub fn build_loss_model(eta_transmission: f64) -> Result<StateSpaceModel> {
    if !(0.0..=1.0).contains(&eta_transmission) {
        return Err(Error::InvalidParameter(format!(
            "transmission {eta_transmission} outside [0, 1]"
        )));
    }
    let tau = eta_transmission.sqrt().acos();
    let (c, s) = (tau.cos(), tau.sin());
    StateSpaceModel::static_gain(
        DMatrix::identity(2, 2) * c,
        DMatrix::identity(2, 2) * (0.5 * s * s),
    )
}

fn homodyne_rows(phi_d: f64, phi_r: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(
        2,
        4,
        &[
            phi_d.cos(),
            phi_d.sin(),
            0.0,
            0.0,
            0.0,
            0.0,
            phi_r.cos(),
            phi_r.sin(),
        ],
    )
}

/// Project each beam onto the generalized quadrature `x cos φ + y sin φ`.
pub fn build_homodyne_model(phi_d: &PhaseSchedule, phi_r: &PhaseSchedule) -> Result<StateSpaceModel> {
    for s in [phi_d, phi_r] {
        for w in s.steps.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Schedule("phase steps must increase in time".into()));
            }
        }
    }
    let mut times: Vec<f64> = phi_d.steps.iter().chain(&phi_r.steps).map(|s| s.0).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let model = StateSpaceModel::static_gain(
        homodyne_rows(phi_d.initial, phi_r.initial),
        DMatrix::zeros(2, 2),
    )?;
    let schedule = times
        .into_iter()
        .map(|t| ScheduleEntry {
            t_start: t,
            c: DMatrix::zeros(2, 0),
            d: homodyne_rows(phi_d.at(t), phi_r.at(t)),
            v: None,
            m: None,
        })
        .collect();
    model.with_schedule(schedule)
}

/// Classical laser-noise input channels of the cavity model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NoiseChannel {
    DetunedAmplitude = 0,
    DetunedFrequency = 1,
    ResonantAmplitude = 2,
    ResonantFrequency = 3,
}

impl NoiseChannel {
    pub const ALL: [NoiseChannel; 4] = [
        NoiseChannel::DetunedAmplitude,
        NoiseChannel::DetunedFrequency,
        NoiseChannel::ResonantAmplitude,
        NoiseChannel::ResonantFrequency,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NoiseChannel::DetunedAmplitude => "detuned_amplitude",
            NoiseChannel::DetunedFrequency => "detuned_frequency",
            NoiseChannel::ResonantAmplitude => "resonant_amplitude",
            NoiseChannel::ResonantFrequency => "resonant_frequency",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Shaping filters per classical-noise channel; absent channels are held at zero.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClassicalNoise {
    channels: [Option<ShapingFilter>; 4],
}

impl ClassicalNoise {
    pub fn none() -> Self {
        Self::default()
    }

    /// Add a filter to a channel; several filters on one channel add their outputs.
    pub fn add(&mut self, channel: NoiseChannel, filter: ShapingFilter) {
        let slot = &mut self.channels[channel as usize];
        *slot = Some(match slot.take() {
            None => filter,
            Some(prev) => prev.sum(&filter),
        });
    }

    pub fn with(mut self, channel: NoiseChannel, filter: ShapingFilter) -> Self {
        self.add(channel, filter);
        self
    }

    pub fn get(&self, channel: NoiseChannel) -> Option<&ShapingFilter> {
        self.channels[channel as usize].as_ref()
    }

    /// Total number of filter states.
    pub fn order(&self) -> usize {
        self.channels.iter().flatten().map(|f| f.order()).sum()
    }
}

/// Colored-noise augmentation, per-beam loss and homodyne projection composed into
/// one model with outputs `(z_d, z_r)` and no deterministic inputs.
///
/// Filter states follow the cavity states in channel order.
pub fn assemble_full_model(
    p: &PhysicalParams,
    d: &DerivedParams,
    noise: &ClassicalNoise,
) -> Result<StateSpaceModel> {
    let mut sys = build_cavity_model(p, d)?;
    let mut removed = 0;
    for ch in NoiseChannel::ALL {
        let idx = ch as usize - removed;
        sys = match noise.get(ch) {
            Some(f) => augment_colored_noise(&sys, f, idx)?,
            None => drop_input(&sys, idx)?,
        };
        removed += 1;
    }
    let loss = parallel(
        &build_loss_model(p.detuned.transmission)?,
        &build_loss_model(p.resonant.transmission)?,
    )?;
    let sys = series_connect(&sys, &loss)?;
    series_connect(
        &sys,
        &build_homodyne_model(&p.detuned.phase, &p.resonant.phase)?,
    )
}
