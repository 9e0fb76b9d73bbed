//! Numerical characterisation of a trap: minimum, normal modes, depth,
//! anharmonicity and the finite-geometry studies.

mod depth;
mod fit;
mod hessian;
mod minimize;
mod studies;

pub use depth::{flood, sample_grid, trap_depth, DepthGrid, DepthResult, GridPolicy, SampledGrid, MIN_RESOLUTION};
pub use fit::{anharmonic_fit, AnharmonicFit, MAX_CONDITION};
pub use hessian::{axis_frequencies, frequencies_from_hessian, hessian, hessian_with_step, NormalMode, HESSIAN_STEP};
pub use minimize::{find_minimum, find_minimum_with, FnPotential, MinimizeOptions, Potential};
pub use studies::{finite_length_study, lead_alignment, strip_width_study, BiasPolicy, StudyRow, StudySettings};

use serde::{Deserialize, Serialize};

use crate::analytic::{depth_scale, larmor_frequency};
use crate::average::{AveragingSpec, EffectivePotential};
use crate::error::{Error, Result};
use crate::fields::{build_cross_trap, CrossTrapSpec, Vec3, WireGeometry};
use crate::units::MU0;

/// Full trap or two-dimensional guide.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrapMode {
    #[default]
    Trap,
    Guide,
}

/// Averaging used for bulk depth grids: coarser than the point default and
/// never fatal near the cusps of small-γ averages.
pub fn depth_averaging(omega: f64) -> AveragingSpec {
    AveragingSpec::new(omega).with_tolerance(1e-7).with_max_doublings(6)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityRatios {
    /// Ω / ω_max.
    pub omega_over_max_frequency: f64,
    /// 2π f_Larmor(⟨B⟩ at the minimum) / Ω.
    pub larmor_over_omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrapReport {
    pub mode: TrapMode,
    /// m.
    pub minimum: Vec3,
    /// ⟨B⟩ at the minimum, T.
    pub field_at_minimum: f64,
    /// Potential at the minimum, J.
    pub potential_offset: f64,
    pub modes: Vec<NormalMode>,
    /// Angular frequencies of the modes nearest x, y, z.
    pub axis_frequencies: [f64; 3],
    pub depth: Option<DepthResult>,
    pub fit: Option<AnharmonicFit>,
    pub validity: ValidityRatios,
    pub geometry: WireGeometry,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CharacterizeOptions {
    pub mode: TrapMode,
    pub guess: Vec3,
    /// TOP angular frequency, rad/s.
    pub omega: f64,
    pub geometry: WireGeometry,
    /// Depth grid; `None` skips the depth.
    pub depth: Option<GridPolicy>,
    /// Shell radius of the anharmonic fit; `None` skips the fit.
    pub fit_shell: Option<f64>,
}

fn wire_width(g: &WireGeometry) -> f64 {
    match *g {
        WireGeometry::Strip { width } => width,
        _ => 0.0,
    }
}

pub fn characterize_trap(ep: &EffectivePotential, opts: &CharacterizeOptions) -> Result<TrapReport> {
    let minimum = find_minimum(ep, &opts.guess)?;
    let modes = frequencies_from_hessian(&hessian(ep, &minimum)?, &ep.species)?;
    let field_at_minimum = ep.average_field(&minimum)?;
    let potential_offset = ep.potential_at(&minimum)?;
    let depth = match &opts.depth {
        None => None,
        Some(policy) => {
            let coarse = ep.with_averaging(depth_averaging(opts.omega))?;
            let z0 = ep.length_scale;
            let width = wire_width(&opts.geometry);
            let grid = match opts.mode {
                TrapMode::Trap => DepthGrid::for_trap(z0, width, policy)?,
                TrapMode::Guide => DepthGrid::guide_slice(z0, width, minimum.x, policy)?,
            };
            Some(trap_depth(&coarse, &grid, &minimum)?)
        }
    };
    let fit = match opts.fit_shell {
        Some(f) if opts.mode == TrapMode::Trap => Some(anharmonic_fit(ep, &minimum, f)?),
        _ => None,
    };
    let w_max = modes.iter().map(|m| m.angular_frequency).fold(0.0, f64::max);
    let larmor = larmor_frequency(field_at_minimum, &ep.species).unwrap_or(0.0);
    Ok(TrapReport {
        mode: opts.mode,
        minimum,
        field_at_minimum,
        potential_offset,
        axis_frequencies: axis_frequencies(&modes),
        modes,
        depth,
        fit,
        validity: ValidityRatios {
            omega_over_max_frequency: opts.omega / w_max,
            larmor_over_omega: 2.0 * std::f64::consts::PI * larmor / opts.omega,
        },
        geometry: opts.geometry,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthCurvePoint {
    pub gamma_over_beta: f64,
    /// D/D₀ with D₀ = √(β² + γ²) − γ.
    pub depth_over_d0: f64,
    /// T.
    pub depth: f64,
}

/// Limits of D/D₀ for γ/β → 0 and γ/β → ∞.
pub const DEPTH_ASYMPTOTES: (f64, f64) = (2.0 / std::f64::consts::PI, 1.0 / 3.0);

/// Depth of the thin-wire cross trap over a range of γ/β at fixed β, with the
/// trap height fixed at `z0`.
pub fn depth_curve(
    beta: f64,
    z0: f64,
    omega: f64,
    ratios: &[f64],
    policy: &GridPolicy,
) -> Result<Vec<DepthCurvePoint>> {
    if let Some(bad) = ratios.iter().find(|r| !(**r > 0.0)) {
        return Err(Error::invalid(format!("gamma/beta must be positive (got {bad})")));
    }
    let current = 2.0 * std::f64::consts::PI * beta * z0 / MU0;
    let sp = crate::analytic::AtomSpecies::rb87();
    // rows are independent; grid evaluation parallelises inside each row
    ratios
        .iter()
        .map(|&ratio| {
            let gamma = ratio * beta;
            let spec = CrossTrapSpec::new(current, beta, gamma, 0.0, omega, WireGeometry::Thin);
            let ep = EffectivePotential::new(build_cross_trap(&spec)?, AveragingSpec::new(omega), sp.clone(), z0)?
                .with_field_scale(beta);
            let centre = find_minimum(&ep, &Vec3::new(0.0, 0.0, z0))?;
            let coarse = ep.with_averaging(depth_averaging(omega))?;
            let d = trap_depth(&coarse, &DepthGrid::for_trap(z0, 0.0, policy)?, &centre)?;
            Ok(DepthCurvePoint {
                gamma_over_beta: ratio,
                depth_over_d0: d.depth / depth_scale(beta, gamma),
                depth: d.depth,
            })
        })
        .collect()
}
