//! Physical constants and unit conversions at the configuration boundary.
//! Configuration values are in Hz, W, K and seconds; internal rates are rad/s.

use std::f64::consts::PI;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K.
pub const K_B: f64 = 1.380_649e-23;
/// Speed of light, m/s.
pub const C_LIGHT: f64 = 299_792_458.0;

/// Hz to rad/s (×2π).
pub fn hz_to_rad(f_hz: f64) -> f64 {
    2.0 * PI * f_hz
}

/// rad/s to Hz (÷2π).
pub fn rad_to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

/// Angular optical frequency of a vacuum wavelength.
pub fn wavelength_to_omega(lambda_m: f64) -> f64 {
    2.0 * PI * C_LIGHT / lambda_m
}
