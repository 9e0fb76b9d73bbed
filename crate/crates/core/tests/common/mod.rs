#![allow(dead_code)]

pub mod oracle;

use crosstop::analytic::AtomSpecies;
use crosstop::average::{AveragingSpec, EffectivePotential};
use crosstop::fields::{build_cross_trap, build_guide, CrossTrapSpec, WireGeometry};
use crosstop::units::{gauss, khz_to_angular};

pub const OMEGA_KHZ: f64 = 10.0;

/// 20 A, β = 40 G, γ = 4 G thin-wire trap (z₀ = 1 mm).
pub fn fig2() -> CrossTrapSpec {
    CrossTrapSpec::new(
        20.0,
        gauss(40.0),
        gauss(4.0),
        0.0,
        khz_to_angular(OMEGA_KHZ),
        WireGeometry::Thin,
    )
}

/// 5 A, 40 G, 2 G on 100 μm strips.
pub fn compressed() -> CrossTrapSpec {
    CrossTrapSpec::new(
        5.0,
        gauss(40.0),
        gauss(2.0),
        0.0,
        khz_to_angular(30.0),
        WireGeometry::Strip { width: 1e-4 },
    )
}

pub fn trap_potential(spec: &CrossTrapSpec) -> EffectivePotential {
    EffectivePotential::new(
        build_cross_trap(spec).unwrap(),
        AveragingSpec::new(spec.omega),
        AtomSpecies::rb87(),
        spec.z0(),
    )
    .unwrap()
    .with_field_scale(spec.beta)
}

pub fn guide_potential(spec: &CrossTrapSpec) -> EffectivePotential {
    EffectivePotential::new(
        build_guide(spec).unwrap(),
        AveragingSpec::new(spec.omega),
        AtomSpecies::rb87(),
        spec.z0(),
    )
    .unwrap()
    .with_field_scale(spec.beta)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}
