//! Closed-form results for the cross trap and guide.
//!
//! Expansion coefficients are stored in field units (T) against the
//! dimensionless coordinates x/z₀, y/z₀, ζ/z₀ with ζ = z − z₀. Conversion to
//! energies and frequencies happens only where an [`AtomSpecies`] is given.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::Vec3;
use crate::units::{MASS_RB87, MU0, MU_B, PLANCK};

/// Trap parameters with z₀ and β as independent variables.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    pub beta: f64,
    pub gamma: f64,
    pub z0: f64,
    pub phi: f64,
    pub omega: f64,
}

impl TrapParams {
    pub fn new(beta: f64, gamma: f64, z0: f64) -> Result<Self> {
        let p = TrapParams {
            beta,
            gamma,
            z0,
            phi: 0.0,
            omega: 0.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_phi(mut self, phi: f64) -> Result<Self> {
        self.phi = phi;
        self.validate()?;
        Ok(self)
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    /// Parameters of the trap produced by chip current `current`.
    pub fn from_current(current: f64, beta: f64, gamma: f64) -> Result<Self> {
        TrapParams::new(beta, gamma, trap_distance(current, beta)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.gamma > 0.0 && self.z0 > 0.0) {
            return Err(Error::invalid("beta, gamma and z0 must be positive"));
        }
        if !(self.phi.abs() <= PI) {
            return Err(Error::invalid("|phi| must not exceed pi"));
        }
        Ok(())
    }

    /// Chip current amplitude implied by z₀ and β.
    pub fn current(&self) -> f64 {
        2.0 * PI * self.beta * self.z0 / MU0
    }

    fn require_phi_zero(&self) -> Result<()> {
        if self.phi != 0.0 {
            return Err(Error::invalid("expression holds for phi = 0; use phi_expansion"));
        }
        Ok(())
    }
}

/// Mass, magnetic moment and Landé factor of the trapped state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSpecies {
    pub name: String,
    pub mass: f64,
    pub moment: f64,
    pub g_factor: f64,
}

impl AtomSpecies {
    pub fn new(name: impl Into<String>, mass: f64, moment: f64, g_factor: f64) -> Result<Self> {
        let s = AtomSpecies {
            name: name.into(),
            mass,
            moment,
            g_factor,
        };
        s.validate()?;
        Ok(s)
    }

    /// ⁸⁷Rb in |F=2, m_F=2⟩: μ = μ_B, g_F = 1/2.
    pub fn rb87() -> Self {
        AtomSpecies {
            name: "Rb87".into(),
            mass: MASS_RB87,
            moment: MU_B,
            g_factor: 0.5,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass > 0.0 && self.moment > 0.0) {
            return Err(Error::invalid("species mass and moment must be positive"));
        }
        if !self.g_factor.is_finite() {
            return Err(Error::invalid("species g-factor must be finite"));
        }
        Ok(())
    }

    /// Angular frequency for a potential curvature c (T per unit of (s/z₀)²):
    /// V = μ c (s/z₀)², so ω² = 2μc/(m z₀²).
    pub fn frequency_for_curvature(&self, coefficient: f64, z0: f64) -> f64 {
        (2.0 * self.moment * coefficient / (self.mass * z0 * z0))
            .max(0.0)
            .sqrt()
    }
}

/// Time-averaged field to second order about (0, 0, z₀).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticForm {
    pub offset: f64,
    /// Coefficient of ζ/z₀.
    pub linear: f64,
    /// Coefficients of (x/z₀)², (y/z₀)², (ζ/z₀)².
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub z0: f64,
}

impl QuadraticForm {
    /// ⟨B⟩ at an absolute position.
    pub fn evaluate(&self, r: &Vec3) -> f64 {
        let x = r.x / self.z0;
        let y = r.y / self.z0;
        let z = (r.z - self.z0) / self.z0;
        self.offset + self.linear * z + self.xx * x * x + self.yy * y * y + self.zz * z * z
    }

    /// Harmonic angular frequencies (x, y, z) for a species.
    pub fn frequencies(&self, sp: &AtomSpecies) -> [f64; 3] {
        [self.xx, self.yy, self.zz].map(|c| sp.frequency_for_curvature(c, self.z0))
    }

    /// The ρ² coefficient (x and y coincide for the trap).
    pub fn rho2(&self) -> f64 {
        0.5 * (self.xx + self.yy)
    }
}

/// Coefficients of the fourth-order expansion of ⟨B⟩ in the coordinates
/// x̂ = x/z₀, ŷ = y/z₀, ẑ = ζ/z₀, T.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuarticCoefficients {
    pub offset: f64,
    pub rho2: f64,
    pub z2: f64,
    pub rho2_z: f64,
    pub z3: f64,
    pub rho4: f64,
    pub x2y2: f64,
    /// Coefficient of x̂ŷ³ − x̂³ŷ.
    pub xy3_minus_x3y: f64,
    pub rho2_z2: f64,
    pub z4: f64,
}

impl QuarticCoefficients {
    pub const NAMES: [&'static str; 10] = [
        "offset",
        "rho2",
        "z2",
        "rho2_z",
        "z3",
        "rho4",
        "x2y2",
        "xy3_minus_x3y",
        "rho2_z2",
        "z4",
    ];

    pub fn evaluate_normalized(&self, x: f64, y: f64, z: f64) -> f64 {
        let r2 = x * x + y * y;
        self.offset
            + self.rho2 * r2
            + self.z2 * z * z
            + self.rho2_z * r2 * z
            + self.z3 * z * z * z
            + self.rho4 * r2 * r2
            + self.x2y2 * x * x * y * y
            + self.xy3_minus_x3y * (x * y * y * y - x * x * x * y)
            + self.rho2_z2 * r2 * z * z
            + self.z4 * z * z * z * z
    }

    /// ⟨B⟩ at an absolute position for a trap centred at (0, 0, z0).
    pub fn evaluate(&self, r: &Vec3, z0: f64) -> f64 {
        self.evaluate_normalized(r.x / z0, r.y / z0, (r.z - z0) / z0)
    }

    pub fn to_array(&self) -> [f64; 10] {
        [
            self.offset,
            self.rho2,
            self.z2,
            self.rho2_z,
            self.z3,
            self.rho4,
            self.x2y2,
            self.xy3_minus_x3y,
            self.rho2_z2,
            self.z4,
        ]
    }

    pub fn from_array(a: [f64; 10]) -> Self {
        QuarticCoefficients {
            offset: a[0],
            rho2: a[1],
            z2: a[2],
            rho2_z: a[3],
            z3: a[4],
            rho4: a[5],
            x2y2: a[6],
            xy3_minus_x3y: a[7],
            rho2_z2: a[8],
            z4: a[9],
        }
    }

    /// Indices of the `n` fourth-order coefficients with the largest
    /// magnitude.
    pub fn largest_quartic(&self, n: usize) -> Vec<usize> {
        let a = self.to_array();
        let mut idx: Vec<usize> = (5..10).collect();
        idx.sort_by(|&i, &j| a[j].abs().total_cmp(&a[i].abs()));
        idx.truncate(n);
        idx
    }
}

/// z₀ = μ₀I₀/(2πβ).
pub fn trap_distance(current: f64, beta: f64) -> Result<f64> {
    if !(current > 0.0 && beta > 0.0) {
        return Err(Error::invalid("current and beta must be positive"));
    }
    Ok(MU0 * current / (2.0 * PI * beta))
}

/// Amplitude and phase of the single rotating field equivalent to the β and
/// (φ-shifted) γ components.
pub fn combined_bias(beta: f64, gamma: f64, phi: f64) -> Result<(f64, f64)> {
    if !(beta >= 0.0 && gamma >= 0.0) || (beta == 0.0 && gamma == 0.0) {
        return Err(Error::invalid("bias amplitudes must be >= 0 and not both zero"));
    }
    let (s, c) = phi.sin_cos();
    let amp = (beta * beta + gamma * gamma + 2.0 * gamma * beta * s).max(0.0).sqrt();
    Ok((amp, (beta + gamma * s).atan2(gamma * c)))
}

/// (ω_ρ, ω_z) of the synchronous trap.
pub fn harmonic_frequencies(p: &TrapParams, sp: &AtomSpecies) -> Result<(f64, f64)> {
    p.validate()?;
    sp.validate()?;
    p.require_phi_zero()?;
    let w_rho = (sp.moment * p.beta * p.beta / (2.0 * sp.mass * p.gamma * p.z0 * p.z0)).sqrt();
    Ok((w_rho, std::f64::consts::SQRT_2 * w_rho))
}

/// Quadratic-order potential energy μ⟨B⟩ at an absolute position, J.
pub fn quadratic_potential(p: &TrapParams, sp: &AtomSpecies, r: &Vec3) -> Result<f64> {
    p.validate()?;
    p.require_phi_zero()?;
    let rho2 = r.x * r.x + r.y * r.y;
    let zeta = r.z - p.z0;
    let c = p.beta * p.beta / (4.0 * p.gamma * p.z0 * p.z0);
    Ok(sp.moment * (p.gamma + c * (rho2 + 2.0 * zeta * zeta)))
}

/// Fourth-order expansion of ⟨B⟩ for the synchronous thin-wire trap.
///
/// The coefficients follow from a direct series expansion of the thin-wire
/// field; with P = β²/4γ and r = β²/γ²:
/// `P{ρ² + 2ẑ² − 2ρ²ẑ − 4ẑ³ − (1/16)[(20+3r)ρ⁴ − 48x²y² − 8(β/γ)(xy³ − x³y)
/// + 8(r−4)ρ²ẑ² + 8(r−12)ẑ⁴]}`.
pub fn quartic_expansion(p: &TrapParams) -> Result<QuarticCoefficients> {
    p.validate()?;
    p.require_phi_zero()?;
    let pref = p.beta * p.beta / (4.0 * p.gamma);
    let k = p.beta / p.gamma;
    let r = k * k;
    let q = -pref / 16.0;
    Ok(QuarticCoefficients {
        offset: p.gamma,
        rho2: pref,
        z2: 2.0 * pref,
        rho2_z: -2.0 * pref,
        z3: -4.0 * pref,
        rho4: q * (20.0 + 3.0 * r),
        x2y2: q * -48.0,
        xy3_minus_x3y: q * (-8.0 * k),
        rho2_z2: q * 8.0 * (r - 4.0),
        z4: q * 8.0 * (r - 12.0),
    })
}

/// The fourth-order expansion with the literal coefficients
/// `−(2/z₀)(ρ²z + z³)`, `(28 + 3β²/γ²)x²y²` and `(8β²/γ²)(xy³ − x³y)` found
/// in the original presentation. Kept for comparison; three of its terms
/// disagree with the series of the field model (see [`quartic_expansion`]).
pub fn quartic_expansion_as_printed(p: &TrapParams) -> Result<QuarticCoefficients> {
    let mut c = quartic_expansion(p)?;
    let pref = p.beta * p.beta / (4.0 * p.gamma);
    let r = (p.beta / p.gamma).powi(2);
    let q = -pref / 16.0;
    c.z3 = -2.0 * pref;
    c.x2y2 = q * (28.0 + 3.0 * r);
    c.xy3_minus_x3y = q * 8.0 * r;
    Ok(c)
}

/// Second-order expansion of the trap with a phase φ on the γ field.
pub fn phi_expansion(p: &TrapParams) -> Result<QuadraticForm> {
    p.validate()?;
    let (s, c) = p.phi.sin_cos();
    let b = p.beta;
    let g = p.gamma;
    let rho = b * b / (4.0 * g) + 0.5 * b * s;
    Ok(QuadraticForm {
        offset: g,
        linear: b * s,
        xx: rho,
        yy: rho,
        zz: b * b / (2.0 * g) * c * c - b * s,
        z0: p.z0,
    })
}

/// Second-order expansion of the guide (free axis x).
pub fn guide_expansion(p: &TrapParams) -> Result<QuadraticForm> {
    p.validate()?;
    let (s, c) = p.phi.sin_cos();
    let b = p.beta;
    let g = p.gamma;
    Ok(QuadraticForm {
        offset: g,
        linear: 0.5 * b * s,
        xx: 0.0,
        yy: b * b / (4.0 * g) + 0.5 * b * s,
        zz: b * b / (16.0 * g) * (1.0 + 2.0 * c * c) - 0.5 * b * s,
        z0: p.z0,
    })
}

/// Phase φ whose linear ζ term cancels the z component of gravity at the
/// trap centre: sin φ = m g_z z₀ / (μ β).
pub fn gravity_phi(p: &TrapParams, sp: &AtomSpecies, gravity: &Vec3) -> Result<f64> {
    p.validate()?;
    sp.validate()?;
    let s = sp.mass * gravity.z * p.z0 / (sp.moment * p.beta);
    if s.abs() > 1.0 {
        return Err(Error::Unsupportable { required_sin: s });
    }
    Ok(s.asin())
}

/// Same balance for the guide, whose linear term is half as large.
pub fn guide_gravity_phi(p: &TrapParams, sp: &AtomSpecies, gravity: &Vec3) -> Result<f64> {
    p.validate()?;
    sp.validate()?;
    let s = 2.0 * sp.mass * gravity.z * p.z0 / (sp.moment * p.beta);
    if s.abs() > 1.0 {
        return Err(Error::Unsupportable { required_sin: s });
    }
    Ok(s.asin())
}

/// Frequency of the spherical trap obtained when the γ field rotates at a
/// rate different from Ω.
pub fn isotropic_frequency(p: &TrapParams, sp: &AtomSpecies) -> Result<f64> {
    p.validate()?;
    sp.validate()?;
    Ok((sp.moment * p.beta * p.beta / (2.0 * sp.mass * p.gamma * p.z0 * p.z0)).sqrt())
}

/// Oscillation frequencies of a Z-wire Ioffe–Pritchard trap with the same
/// bias fields, centre segment length 2a.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTrapFrequencies {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ZTrapFrequencies {
    pub fn net_curvature(&self) -> f64 {
        self.x * self.x + self.y * self.y + self.z * self.z
    }

    pub fn geometric_mean(&self) -> f64 {
        (self.x * self.y * self.z).cbrt()
    }
}

pub fn ztrap_frequencies(beta: f64, gamma: f64, z0: f64, a: f64, sp: &AtomSpecies) -> Result<ZTrapFrequencies> {
    if !(beta > 0.0 && gamma > 0.0 && z0 > 0.0 && a > 0.0) {
        return Err(Error::invalid("Z-trap inputs must be positive"));
    }
    sp.validate()?;
    let wz = (sp.moment * beta * beta / (sp.mass * gamma * z0 * z0)).sqrt();
    Ok(ZTrapFrequencies {
        x: 2.0 * z0 * z0 / (a * a) * wz,
        y: wz,
        z: wz,
    })
}

/// Natural depth scale D₀ = √(β² + γ²) − γ.
pub fn depth_scale(beta: f64, gamma: f64) -> f64 {
    beta.hypot(gamma) - gamma
}

/// Larmor frequency g_F μ_B B / h, Hz.
pub fn larmor_frequency(field: f64, sp: &AtomSpecies) -> Result<f64> {
    if !(field > 0.0) {
        return Err(Error::invalid("field must be positive"));
    }
    Ok(sp.g_factor.abs() * MU_B * field / PLANCK)
}
