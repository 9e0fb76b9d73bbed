//! Physical constants (CODATA 2018) and conversions between SI and the
//! lab units used at the interfaces (gauss, millimetre, kHz).

use std::f64::consts::PI;

/// Vacuum permeability, T·m/A.
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Bohr magneton, J/T.
pub const MU_B: f64 = 9.274_010_078_3e-24;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;
/// Standard gravity, m/s².
pub const STANDARD_GRAVITY: f64 = 9.806_65;
/// Mass of ⁸⁷Rb, kg.
pub const MASS_RB87: f64 = 1.443_160_60e-25;

pub const CONSTANTS_VERSION: &str = "CODATA-2018";

/// One gauss in tesla.
pub const GAUSS: f64 = 1e-4;
/// One millimetre in metres.
pub const MM: f64 = 1e-3;
/// One micrometre in metres.
pub const UM: f64 = 1e-6;

pub fn gauss(value: f64) -> f64 {
    value * GAUSS
}

pub fn to_gauss(tesla: f64) -> f64 {
    tesla / GAUSS
}

pub fn mm(value: f64) -> f64 {
    value * MM
}

pub fn to_mm(metres: f64) -> f64 {
    metres / MM
}

/// Angular frequency (rad/s) of a frequency given in kHz.
pub fn khz_to_angular(khz: f64) -> f64 {
    2.0 * PI * khz * 1e3
}

pub fn angular_to_khz(omega: f64) -> f64 {
    omega / (2.0 * PI * 1e3)
}

pub fn angular_to_hz(omega: f64) -> f64 {
    omega / (2.0 * PI)
}

pub fn hz_to_angular(hz: f64) -> f64 {
    2.0 * PI * hz
}

pub fn joule_to_microkelvin(energy: f64) -> f64 {
    energy / BOLTZMANN * 1e6
}
