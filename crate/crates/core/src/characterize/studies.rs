//! Robustness of the thin-wire results against finite wire length and
//! finite strip width.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{harmonic_frequencies, AtomSpecies, TrapParams};
use crate::average::{AveragingSpec, EffectivePotential};
use crate::error::{Error, Result};
use crate::fields::{build_cross_trap, CrossTrapSpec, FieldSystem, Vec3, WireGeometry, WirePrimitive};
use crate::units::MU0;

use super::hessian::{axis_frequencies, frequencies_from_hessian, hessian};
use super::minimize::find_minimum;

/// How β is chosen for a finite-length wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BiasPolicy {
    /// Re-tune β so the minimum stays at z₀.
    HoldHeight,
    /// Keep the thin-wire β and let the minimum move.
    FixedBeta,
}

/// Common inputs of both studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySettings {
    /// Nominal bias β, T.
    pub beta: f64,
    /// Parallel bias γ, T.
    pub gamma: f64,
    /// TOP angular frequency, rad/s.
    pub omega: f64,
    pub species: AtomSpecies,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    /// L/z₀ or z₀/w.
    pub parameter: f64,
    /// β actually used, T.
    pub beta: f64,
    /// Height of the numeric minimum, m.
    pub z_min: f64,
    /// (z_min − z₀)/z₀.
    pub dz_over_z0: f64,
    /// Numeric angular frequencies along x, y, z.
    pub frequencies: [f64; 3],
    /// Thin-wire reference frequencies along x, y, z.
    pub reference: [f64; 3],
    /// (ω − ω_ref)/ω_ref per axis.
    pub d_omega: [f64; 3],
}

impl StudyRow {
    /// Largest fractional frequency reduction (positive when weaker).
    pub fn reduction(&self) -> f64 {
        self.d_omega.iter().fold(f64::NEG_INFINITY, |m, d| m.max(-d))
    }

    /// Largest |Δω/ω| over the three axes.
    pub fn max_abs_d_omega(&self) -> f64 {
        self.d_omega.iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

fn potential(sys: FieldSystem, s: &StudySettings, z0: f64, beta: f64) -> Result<EffectivePotential> {
    Ok(EffectivePotential::new(sys, AveragingSpec::new(s.omega), s.species.clone(), z0)?.with_field_scale(beta))
}

fn measure(sys: FieldSystem, s: &StudySettings, z0: f64, beta: f64) -> Result<(Vec3, [f64; 3])> {
    let ep = potential(sys, s, z0, beta)?;
    let r = find_minimum(&ep, &Vec3::new(0.0, 0.0, z0))?;
    let modes = frequencies_from_hessian(&hessian(&ep, &r)?, &s.species)?;
    Ok((r, axis_frequencies(&modes)))
}

fn reference(s: &StudySettings, z0: f64) -> Result<[f64; 3]> {
    let (wr, wz) = harmonic_frequencies(&TrapParams::new(s.beta, s.gamma, z0)?, &s.species)?;
    Ok([wr, wr, wz])
}

fn row(parameter: f64, beta: f64, z0: f64, r: Vec3, w: [f64; 3], reference: [f64; 3]) -> StudyRow {
    let mut d = [0.0; 3];
    for i in 0..3 {
        d[i] = (w[i] - reference[i]) / reference[i];
    }
    StudyRow {
        parameter,
        beta,
        z_min: r.z,
        dz_over_z0: (r.z - z0) / z0,
        frequencies: w,
        reference,
        d_omega: d,
    }
}

fn current_for(beta: f64, z0: f64) -> f64 {
    2.0 * std::f64::consts::PI * beta * z0 / MU0
}

fn finite_spec(s: &StudySettings, current: f64, beta: f64, length: f64) -> CrossTrapSpec {
    CrossTrapSpec::new(
        current,
        beta,
        s.gamma,
        0.0,
        s.omega,
        WireGeometry::Finite { length, leads: true },
    )
}

/// Finite segments with leads running to −z. Rows are returned in input order.
pub fn finite_length_study(z0: f64, l_over_z0: &[f64], policy: BiasPolicy, s: &StudySettings) -> Result<Vec<StudyRow>> {
    if !(z0 > 0.0) {
        return Err(Error::invalid("z0 must be positive"));
    }
    if let Some(bad) = l_over_z0.iter().find(|l| !(**l > 1.0)) {
        return Err(Error::invalid(format!("L/z0 must exceed 1 (got {bad})")));
    }
    let current = current_for(s.beta, z0);
    let reference = reference(s, z0)?;
    l_over_z0
        .par_iter()
        .map(|&ratio| {
            let length = ratio * z0;
            let beta = match policy {
                BiasPolicy::FixedBeta => s.beta,
                BiasPolicy::HoldHeight => retune_beta(s, current, length, z0)?,
            };
            let (r, w) = measure(build_cross_trap(&finite_spec(s, current, beta, length))?, s, z0, beta)?;
            Ok(row(ratio, beta, z0, r, w, reference))
        })
        .collect()
}

/// Secant search for the β that puts the minimum back at z₀.
fn retune_beta(s: &StudySettings, current: f64, length: f64, z0: f64) -> Result<f64> {
    let height = |beta: f64| -> Result<f64> {
        let ep = potential(build_cross_trap(&finite_spec(s, current, beta, length))?, s, z0, beta)?;
        Ok(find_minimum(&ep, &Vec3::new(0.0, 0.0, z0))?.z - z0)
    };
    let mut b0 = s.beta;
    let mut f0 = height(b0)?;
    let mut b1 = s.beta * if f0 < 0.0 { 0.97 } else { 1.03 };
    let mut f1 = height(b1)?;
    for _ in 0..30 {
        if f1.abs() < 1e-7 * z0 {
            return Ok(b1);
        }
        if f1 == f0 {
            break;
        }
        let b2 = (b1 - f1 * (b1 - b0) / (f1 - f0)).clamp(0.5 * b1, 1.5 * b1);
        b0 = b1;
        f0 = f1;
        b1 = b2;
        f1 = height(b1)?;
    }
    Err(Error::no_convergence("beta re-tuning"))
}

/// Smallest cosine, over one drive period, between the lead field at the
/// trap centre and the β bias. Positive means the leads add to β.
pub fn lead_alignment(z0: f64, l_over_z0: f64, s: &StudySettings) -> Result<f64> {
    let current = current_for(s.beta, z0);
    let sys = build_cross_trap(&finite_spec(s, current, s.beta, l_over_z0 * z0))?;
    let r = Vec3::new(0.0, 0.0, z0);
    let beta_bias = sys.biases.first().ok_or_else(|| Error::invalid("system has no bias"))?;
    let mut worst = f64::INFINITY;
    for k in 0..16 {
        let t = k as f64 / 16.0 * 2.0 * std::f64::consts::PI / s.omega;
        let mut lead = Vec3::zeros();
        for (w, d) in &sys.elements {
            if matches!(w, WirePrimitive::SemiInfiniteLead { .. }) {
                lead += w.field(d.current(t), &r)?;
            }
        }
        let b = beta_bias.field(t);
        worst = worst.min(lead.dot(&b) / (lead.norm() * b.norm()));
    }
    Ok(worst)
}

/// Flat strips of width `w` at trap heights z₀ = ratio·w, with I₀ and β
/// fixed by the thin-wire relation for that height.
pub fn strip_width_study(w: f64, z0_over_w: &[f64], s: &StudySettings) -> Result<Vec<StudyRow>> {
    if !(w > 0.0) {
        return Err(Error::invalid("strip width must be positive"));
    }
    if let Some(bad) = z0_over_w.iter().find(|r| !(**r >= 0.5)) {
        return Err(Error::invalid(format!("z0/w must be at least 0.5 (got {bad})")));
    }
    z0_over_w
        .par_iter()
        .map(|&ratio| {
            let z0 = ratio * w;
            let current = current_for(s.beta, z0);
            let spec = CrossTrapSpec::new(current, s.beta, s.gamma, 0.0, s.omega, WireGeometry::Strip { width: w });
            let (r, freq) = measure(build_cross_trap(&spec)?, s, z0, s.beta)?;
            Ok(row(ratio, s.beta, z0, r, freq, reference(s, z0)?))
        })
        .collect()
}
