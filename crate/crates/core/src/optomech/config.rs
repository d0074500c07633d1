//! TOML parameter files. Frequencies are given in Hz and converted with ×2π.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{
    assemble_full_model, derive_params, power_for_coupling, Beam, ClassicalNoise, DerivedParams,
    NoiseChannel, PhaseSchedule, PhysicalParams,
};
use crate::error::{Error, Result};
use crate::noise::NoiseSpec;
use crate::statespace::StateSpaceModel;
use crate::units::{hz_to_rad, wavelength_to_omega};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicsSection {
    pub omega_m_hz: Vec<f64>,
    pub gamma_m_hz: Vec<f64>,
    #[serde(default)]
    pub coupling_scale: Option<Vec<f64>>,
    #[serde(default)]
    pub q_zpf_m: Option<f64>,
    #[serde(default)]
    pub p_zpf_kg_m_per_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub kappa1_hz: f64,
    pub kappa2_hz: f64,
    pub g0_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseStep {
    pub t_start_s: f64,
    pub phase_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamSection {
    /// Extra-cavity power. Exactly one of `power_w` and `coupling_rate_hz` is required.
    #[serde(default)]
    pub power_w: Option<f64>,
    /// Linearized coupling g/2π; the power is solved for.
    #[serde(default)]
    pub coupling_rate_hz: Option<f64>,
    #[serde(default)]
    pub wavelength_m: Option<f64>,
    /// Laser frequency ω₀/2π.
    #[serde(default)]
    pub omega0_hz: Option<f64>,
    pub detuning_hz: f64,
    #[serde(default = "one")]
    pub transmission: f64,
    #[serde(default)]
    pub homodyne_phase_rad: f64,
    #[serde(default)]
    pub phase_schedule: Vec<PhaseStep>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BeamsSection {
    pub detuned: Option<BeamSection>,
    pub resonant: Option<BeamSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BathSection {
    pub temperature_k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseBlock {
    pub channel: String,
    #[serde(flatten)]
    pub spec: NoiseSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSection {
    #[serde(default)]
    pub dt_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptomechConfig {
    pub mechanics: Option<MechanicsSection>,
    pub cavity: Option<CavitySection>,
    pub beams: Option<BeamsSection>,
    pub bath: Option<BathSection>,
    #[serde(default)]
    pub noise: BTreeMap<String, NoiseBlock>,
    #[serde(default)]
    pub simulation: Option<SimulationSection>,
}

fn missing(section: &str) -> Error {
    Error::Config(format!("missing section [{section}]"))
}

fn field(section: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("[{section}] {msg}"))
}

impl OptomechConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Sampling step, 20 ns (50 MHz) unless configured.
    pub fn dt(&self) -> f64 {
        self.simulation.as_ref().and_then(|s| s.dt_s).unwrap_or(20e-9)
    }

    pub fn physical_params(&self) -> Result<PhysicalParams> {
        let mech = self.mechanics.as_ref().ok_or_else(|| missing("mechanics"))?;
        let cav = self.cavity.as_ref().ok_or_else(|| missing("cavity"))?;
        let beams = self.beams.as_ref().ok_or_else(|| missing("beams"))?;
        let detuned = beams.detuned.as_ref().ok_or_else(|| missing("beams.detuned"))?;
        let resonant = beams.resonant.as_ref().ok_or_else(|| missing("beams.resonant"))?;
        let bath = self.bath.as_ref().ok_or_else(|| missing("bath"))?;

        let modes = mech.omega_m_hz.len();
        let coupling_scale = match &mech.coupling_scale {
            Some(s) => s.clone(),
            None if modes == 1 => vec![1.0],
            None => return Err(field("mechanics", "coupling_scale required for several modes")),
        };
        if mech.gamma_m_hz.len() != modes || coupling_scale.len() != modes {
            return Err(field(
                "mechanics",
                format!(
                    "omega_m_hz, gamma_m_hz and coupling_scale lengths differ ({}, {}, {})",
                    modes,
                    mech.gamma_m_hz.len(),
                    coupling_scale.len()
                ),
            ));
        }
        let kappa1 = hz_to_rad(cav.kappa1_hz);
        let kappa2 = hz_to_rad(cav.kappa2_hz);
        let g0 = hz_to_rad(cav.g0_hz);
        let beam = |name: &str, b: &BeamSection| -> Result<Beam> {
            let section = format!("beams.{name}");
            let omega0 = match (b.wavelength_m, b.omega0_hz) {
                (Some(l), None) if l > 0.0 => wavelength_to_omega(l),
                (None, Some(f)) if f > 0.0 => hz_to_rad(f),
                (None, None) => wavelength_to_omega(1064e-9),
                _ => return Err(field(&section, "give one positive wavelength_m or omega0_hz")),
            };
            let detuning = hz_to_rad(b.detuning_hz);
            let power = match (b.power_w, b.coupling_rate_hz) {
                (Some(p), None) => p,
                (None, Some(g)) => {
                    if g0 <= 0.0 {
                        return Err(field(&section, "coupling_rate_hz needs g0_hz > 0"));
                    }
                    power_for_coupling(hz_to_rad(g), g0, kappa1, kappa1 + kappa2, detuning, omega0)
                }
                _ => return Err(field(&section, "give exactly one of power_w, coupling_rate_hz")),
            };
            if !(0.0..=1.0).contains(&b.transmission) {
                return Err(field(&section, format!("transmission {} outside [0, 1]", b.transmission)));
            }
            Ok(Beam {
                power,
                omega0,
                detuning,
                transmission: b.transmission,
                phase: PhaseSchedule {
                    initial: b.homodyne_phase_rad,
                    steps: b.phase_schedule.iter().map(|s| (s.t_start_s, s.phase_rad)).collect(),
                },
            })
        };
        let p = PhysicalParams {
            omega_m: mech.omega_m_hz.iter().map(|&f| hz_to_rad(f)).collect(),
            gamma_m: mech.gamma_m_hz.iter().map(|&f| hz_to_rad(f)).collect(),
            coupling_scale,
            kappa1,
            kappa2,
            g0,
            detuned: beam("detuned", detuned)?,
            resonant: beam("resonant", resonant)?,
            t_bath: bath.temperature_k,
            q_zpf: mech.q_zpf_m,
            p_zpf: mech.p_zpf_kg_m_per_s,
        };
        p.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(p)
    }

    pub fn classical_noise(&self) -> Result<ClassicalNoise> {
        let mut noise = ClassicalNoise::none();
        for (name, block) in &self.noise {
            let ch = NoiseChannel::parse(&block.channel).ok_or_else(|| {
                field(&format!("noise.{name}"), format!("unknown channel '{}'", block.channel))
            })?;
            let filt = block
                .spec
                .build(name)
                .map_err(|e| field(&format!("noise.{name}"), e))?;
            noise.add(ch, filt);
        }
        Ok(noise)
    }

    /// Parameters, derived quantities and the assembled two-output model.
    pub fn build(&self) -> Result<(PhysicalParams, DerivedParams, StateSpaceModel)> {
        let p = self.physical_params()?;
        let d = derive_params(&p)?;
        let model = assemble_full_model(&p, &d, &self.classical_noise()?)?;
        Ok((p, d, model))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const WEAK: &str = r#"
[mechanics]
omega_m_hz = [1.278e6]
gamma_m_hz = [265.0]

[cavity]
kappa1_hz = 354645.0
kappa2_hz = 81153.0
g0_hz = 7.7

[beams.detuned]
coupling_rate_hz = 87159.6
detuning_hz = 1.278e6
homodyne_phase_rad = 0.0

[beams.resonant]
coupling_rate_hz = 87159.6
detuning_hz = 0.0
homodyne_phase_rad = 1.5707963267948966

[bath]
temperature_k = 300.0

[noise.pdh]
channel = "resonant_frequency"
kind = "lorentzian"
f0_hz = 20e6
linewidth_hz = 1e3
peak_power = 1e-3
"#;

    #[test]
    fn weak_config_builds() {
        let cfg = OptomechConfig::from_toml(WEAK).unwrap();
        let (p, d, m) = cfg.build().unwrap();
        assert_eq!(m.n(), 8);
        assert_eq!(m.m_out(), 2);
        assert!((d.g_r / hz_to_rad(87159.6) - 1.0).abs() < 1e-12);
        assert!((d.kappa - p.kappa1 - p.kappa2).abs() < 1e-9);
        assert!(m.is_hurwitz());
        assert_eq!(cfg.dt(), 20e-9);
    }

    #[test]
    fn missing_cavity_is_named() {
        let text = WEAK.replace("[cavity]", "[unused]");
        let err = OptomechConfig::from_toml(&text).unwrap_err().to_string();
        assert!(err.contains("unused"), "{err}");
        let cfg = OptomechConfig {
            cavity: None,
            ..OptomechConfig::from_toml(WEAK).unwrap()
        };
        let err = cfg.physical_params().unwrap_err().to_string();
        assert!(err.contains("missing section [cavity]"), "{err}");
    }

    #[test]
    fn power_and_coupling_are_exclusive() {
        let text = WEAK.replacen("coupling_rate_hz = 87159.6", "coupling_rate_hz = 1.0\npower_w = 1e-3", 1);
        let err = OptomechConfig::from_toml(&text).unwrap().build().unwrap_err();
        assert!(err.to_string().contains("beams.detuned"));
    }

    #[test]
    fn unknown_channel_rejected() {
        let text = WEAK.replace("resonant_frequency", "bogus");
        let err = OptomechConfig::from_toml(&text).unwrap().build().unwrap_err();
        assert!(err.to_string().contains("unknown channel"));
    }
}
