//! Exact Gaussian simulation of discretized models.
//!
//! Each step draws the state noise and the averaged measurement noise jointly from
//! `[[Qd, Md], [Mdᵀ, V/dt]]`, so correlated shot-noise channels are reproduced exactly.
//! The generator is ChaCha20 keyed by `(seed, stream)`; distinct streams are
//! independent for the same seed.

use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::psd_factor;
use crate::record::{self, Samples};
use crate::statespace::DiscreteModel;
use crate::units::{HBAR, K_B};

pub const GENERATOR: &[u8; 8] = b"CHACHA20";
const MAGIC: &[u8; 8] = b"OMKTRAJ\0";
const VERSION: u32 = 1;

/// Mean bath occupation `k_B T / ħ ω_m`.
pub fn thermal_occupation(t_kelvin: f64, omega_m: f64) -> f64 {
    K_B * t_kelvin / (HBAR * omega_m)
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Zero,
    /// Draw from the stationary covariance of the model.
    Stationary,
    Given(DVector<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub dt: f64,
    pub t0: f64,
    pub seed: u64,
    pub stream: u64,
    pub fingerprint: [u8; 32],
    /// `N × n` true states.
    pub x_true: Samples,
    /// `N × m` measurements.
    pub z: Samples,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.z.rows()
    }
    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }
    pub fn n(&self) -> usize {
        self.x_true.cols()
    }
    pub fn m(&self) -> usize {
        self.z.cols()
    }
}

/// Low-rank factor `F` with `F Fᵀ = J`, keeping only positive eigen-directions.
fn joint_factor(j: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let f = psd_factor(j, "joint step noise covariance")?;
    let keep: Vec<usize> = (0..f.ncols())
        .filter(|&c| f.column(c).norm_squared() > 0.0)
        .collect();
    Ok(DMatrix::from_fn(f.nrows(), keep.len(), |i, c| f[(i, keep[c])]))
}

struct Segment {
    /// Flat row-major factor, `(n+m) × r`.
    factor: Vec<f64>,
    rank: usize,
    c: Vec<f64>,
}

fn flat(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

pub fn simulate(dsys: &DiscreteModel, steps: usize, seed: u64, init: &InitialState) -> Result<Trajectory> {
    simulate_stream(dsys, steps, seed, 0, init, 0.0)
}

/// Simulate `steps` samples starting at absolute time `t0` on ChaCha20 stream `stream`.
pub fn simulate_stream(
    dsys: &DiscreteModel,
    steps: usize,
    seed: u64,
    stream: u64,
    init: &InitialState,
    t0: f64,
) -> Result<Trajectory> {
    if steps == 0 {
        return Err(Error::InvalidParameter("simulate needs at least one step".into()));
    }
    let (n, m) = (dsys.n(), dsys.m_out());
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut normal = move || -> f64 { StandardNormal.sample(&mut rng) };

    let segments = (0..dsys.segments.len())
        .map(|k| {
            let f = joint_factor(&dsys.joint_step_covariance(k))?;
            Ok(Segment {
                rank: f.ncols(),
                factor: flat(&f),
                c: flat(&dsys.segments[k].c),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut x: Vec<f64> = match init {
        InitialState::Zero => vec![0.0; n],
        InitialState::Given(v) => {
            if v.len() != n {
                return Err(Error::Dimension(format!(
                    "initial state has {} entries, model has {n} states",
                    v.len()
                )));
            }
            v.as_slice().to_vec()
        }
        InitialState::Stationary => {
            let sigma = dsys
                .stationary
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("model has no stationary covariance".into()))?;
            let f = psd_factor(sigma, "stationary covariance")?;
            let e: Vec<f64> = (0..n).map(|_| normal()).collect();
            (0..n)
                .map(|i| (0..n).map(|j| f[(i, j)] * e[j]).sum())
                .collect()
        }
    };

    let ad = flat(&dsys.ad);
    let mut xs = Samples::with_capacity(steps, n);
    let mut zs = Samples::with_capacity(steps, m);
    let mut e = vec![0.0; n + m];
    let mut noise = vec![0.0; n + m];
    let mut z = vec![0.0; m];
    let mut xn = vec![0.0; n];
    let breaks: Vec<f64> = dsys.segments.iter().map(|s| s.t_start).collect();
    let mut seg = dsys.segment_index(t0);
    for k in 0..steps {
        let t = t0 + k as f64 * dsys.dt;
        while seg + 1 < breaks.len() && breaks[seg + 1] <= t {
            seg += 1;
        }
        let s = &segments[seg];
        for v in e.iter_mut().take(s.rank) {
            *v = normal();
        }
        for (i, out) in noise.iter_mut().enumerate() {
            let row = &s.factor[i * s.rank..(i + 1) * s.rank];
            *out = row.iter().zip(&e).map(|(a, b)| a * b).sum();
        }
        for (i, zi) in z.iter_mut().enumerate() {
            let row = &s.c[i * n..(i + 1) * n];
            *zi = row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + noise[n + i];
        }
        xs.push_row(&x);
        zs.push_row(&z);
        for (i, out) in xn.iter_mut().enumerate() {
            let row = &ad[i * n..(i + 1) * n];
            *out = row.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>() + noise[i];
        }
        std::mem::swap(&mut x, &mut xn);
    }
    Ok(Trajectory {
        dt: dsys.dt,
        t0,
        seed,
        stream,
        fingerprint: dsys.fingerprint,
        x_true: xs,
        z: zs,
    })
}

impl Trajectory {
    pub fn write_binary(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(MAGIC)?;
        record::write_u32(w, VERSION)?;
        record::write_u32(w, self.n() as u32)?;
        record::write_u32(w, self.m() as u32)?;
        record::write_f64(w, self.dt)?;
        record::write_f64(w, self.t0)?;
        record::write_u64(w, self.len() as u64)?;
        record::write_u64(w, self.seed)?;
        record::write_u64(w, self.stream)?;
        w.write_all(GENERATOR)?;
        w.write_all(&self.fingerprint)?;
        record::write_f64s(w, self.x_true.as_slice())?;
        record::write_f64s(w, self.z.as_slice())?;
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> Result<Self> {
        let magic: [u8; 8] = record::read_array(r)?;
        if &magic != MAGIC {
            return Err(Error::Format("not a trajectory file".into()));
        }
        let version = record::read_u32(r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported trajectory version {version}")));
        }
        let n = record::read_u32(r)? as usize;
        let m = record::read_u32(r)? as usize;
        let dt = record::read_f64(r)?;
        let t0 = record::read_f64(r)?;
        let len = record::read_u64(r)? as usize;
        let seed = record::read_u64(r)?;
        let stream = record::read_u64(r)?;
        let gen: [u8; 8] = record::read_array(r)?;
        if &gen != GENERATOR {
            return Err(Error::Format("unknown generator tag".into()));
        }
        let fingerprint: [u8; 32] = record::read_array(r)?;
        let x_true = Samples::from_vec(n, record::read_f64s(r, len * n)?)?;
        let z = Samples::from_vec(m, record::read_f64s(r, len * m)?)?;
        Ok(Self {
            dt,
            t0,
            seed,
            stream,
            fingerprint,
            x_true,
            z,
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

    /// CSV with columns `t, x0.., z0..`; at most `max_rows` rows when given.
    pub fn write_csv(&self, w: &mut impl Write, max_rows: Option<usize>) -> Result<()> {
        let mut header = vec!["t".to_string()];
        header.extend((0..self.n()).map(|i| format!("x{i}")));
        header.extend((0..self.m()).map(|i| format!("z{i}")));
        writeln!(w, "{}", header.join(","))?;
        let rows = max_rows.map_or(self.len(), |r| r.min(self.len()));
        for k in 0..rows {
            let t = self.t0 + k as f64 * self.dt;
            let mut line = format!("{t:e}");
            for v in self.x_true.row(k).iter().chain(self.z.row(k)) {
                line.push_str(&format!(",{v:e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}
