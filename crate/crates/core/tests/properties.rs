//! Randomised invariants of the field model and the time average.

mod common;

use proptest::prelude::*;

use crosstop::average::{average_field, average_vector, Averager, AveragingSpec};
use crosstop::fields::{
    build_cross_trap, build_guide, CrossTrapSpec, Drive, FieldSystem, Vec3, WireGeometry, WirePrimitive,
};
use crosstop::units::gauss;

use common::{fig2, rel};

fn point() -> impl Strategy<Value = Vec3> {
    (-2.0..2.0f64, -2.0..2.0f64, 0.2..3.0f64).prop_map(|(x, y, z)| Vec3::new(x, y, z) * 1e-3)
}

fn geometry() -> impl Strategy<Value = WireGeometry> {
    prop_oneof![
        Just(WireGeometry::Thin),
        (0.05..0.5f64).prop_map(|w| WireGeometry::Strip { width: w * 1e-3 }),
        (2.0..20.0f64, any::<bool>()).prop_map(|(l, leads)| WireGeometry::Finite {
            length: l * 1e-3,
            leads
        }),
    ]
}

fn spec() -> impl Strategy<Value = CrossTrapSpec> {
    (1.0..40.0f64, 5.0..80.0f64, 0.5..8.0f64, -1.0..1.0f64, geometry()).prop_map(|(i, b, g, phi, geo)| {
        CrossTrapSpec::new(i, gauss(b), gauss(g), phi, 2.0 * std::f64::consts::PI * 1e4, geo)
    })
}

fn parts(sys: &FieldSystem) -> Vec<FieldSystem> {
    let mut out: Vec<FieldSystem> = sys
        .elements
        .iter()
        .map(|e| FieldSystem {
            elements: vec![e.clone()],
            ..FieldSystem::new()
        })
        .collect();
    out.extend(sys.biases.iter().map(|b| FieldSystem::new().with_bias(*b)));
    out.extend(sys.oscillating.iter().map(|b| FieldSystem::new().with_oscillating(*b)));
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn superposition(s in spec(), r in point(), t in 0.0..1e-4f64) {
        for sys in [build_cross_trap(&s).unwrap(), build_guide(&s).unwrap()] {
            let whole = sys.field_at(&r, t).unwrap();
            let sum = parts(&sys).iter().fold(Vec3::zeros(), |acc, p| acc + p.field_at(&r, t).unwrap());
            let scale = parts(&sys).iter().map(|p| p.field_at(&r, t).unwrap().norm()).sum::<f64>();
            prop_assert!((whole - sum).norm() <= 1e-14 * scale);
        }
    }

    #[test]
    fn drive_linearity(s in spec(), r in point(), t in 0.0..1e-4f64, k in -3.0..3.0f64) {
        let sys = build_cross_trap(&s).unwrap();
        let a = sys.scaled(k).field_at(&r, t).unwrap();
        let b = sys.field_at(&r, t).unwrap() * k;
        // exact up to rounding of the individual terms
        let scale = parts(&sys).iter().map(|p| p.field_at(&r, t).unwrap().norm()).sum::<f64>() * k.abs();
        prop_assert!((a - b).norm() <= 1e-15 * scale);
    }

    #[test]
    fn thin_wire_is_divergence_and_curl_free(
        d in (-1.0..1.0f64, -1.0..1.0f64, -1.0..1.0f64).prop_filter("non-zero", |v| v.0 * v.0 + v.1 * v.1 + v.2 * v.2 > 0.05),
        r in point(),
    ) {
        let dir = Vec3::new(d.0, d.1, d.2).normalize();
        let w = WirePrimitive::thin_wire(Vec3::zeros(), dir).unwrap();
        let dist = w.distance(&r);
        prop_assume!(dist > 1e-4);
        let h = 1e-4 * dist;
        let mut jac = [[0.0; 3]; 3];
        for j in 0..3 {
            let mut e = Vec3::zeros();
            e[j] = h;
            let dp = (w.field(1.0, &(r + e)).unwrap() - w.field(1.0, &(r - e)).unwrap()) / (2.0 * h);
            for i in 0..3 {
                jac[i][j] = dp[i];
            }
        }
        let scale = w.field(1.0, &r).unwrap().norm() / dist;
        let div = jac[0][0] + jac[1][1] + jac[2][2];
        let curl = Vec3::new(jac[2][1] - jac[1][2], jac[0][2] - jac[2][0], jac[1][0] - jac[0][1]);
        prop_assert!(div.abs() < 1e-6 * scale, "div {div:e} vs {scale:e}");
        prop_assert!(curl.norm() < 1e-6 * scale, "curl {:e} vs {scale:e}", curl.norm());
    }

    #[test]
    fn rotation_covariance(s in spec(), r in point(), t in 0.0..1e-4f64, a in -3.2..3.2f64) {
        let sys = build_cross_trap(&s).unwrap();
        let rot = nalgebra::Rotation3::from_axis_angle(&Vec3::z_axis(), a);
        let b0 = sys.field_at(&r, t).unwrap();
        let b1 = sys.rotated_z(a).field_at(&(rot * r), t).unwrap();
        prop_assert!((b1 - rot * b0).norm() <= 1e-13 * b0.norm());
        prop_assert!((b1.norm() - b0.norm()).abs() <= 1e-13 * b0.norm());
    }

    #[test]
    fn average_dominates_vector_average(s in spec(), r in point()) {
        let sys = build_cross_trap(&s).unwrap();
        let spec = AveragingSpec::new(s.omega);
        let mag = average_field(&sys, &spec, &r).unwrap();
        let vec = average_vector(&sys, &spec, &r).unwrap().norm();
        prop_assert!(mag >= vec * (1.0 - 1e-12));
    }

    #[test]
    fn average_is_fourfold_symmetric(x in -1.5..1.5f64, y in -1.5..1.5f64, z in 0.3..2.5f64) {
        let s = fig2();
        let av = Averager::new(build_cross_trap(&s).unwrap(), AveragingSpec::new(s.omega)).unwrap();
        let z0 = s.z0();
        let b = |x: f64, y: f64| av.average(&(Vec3::new(x, y, z) * z0)).unwrap();
        let b0 = b(x, y);
        prop_assert!(rel(b(-x, -y), b0) < 1e-9);
        prop_assert!(rel(b(-y, x), b0) < 1e-9);
    }

    #[test]
    fn scale_invariance(x in -1.0..1.0f64, y in -1.0..1.0f64, z in 0.3..2.5f64, k in 0.2..5.0f64) {
        let s = fig2();
        let big = CrossTrapSpec { current: s.current * k, ..s };
        let r = Vec3::new(x, y, z) * s.z0();
        let spec = AveragingSpec::new(s.omega);
        let a = average_field(&build_cross_trap(&s).unwrap(), &spec, &r).unwrap();
        let b = average_field(&build_cross_trap(&big).unwrap(), &spec, &(r * k)).unwrap();
        prop_assert!(rel(b, a) < 1e-10);
    }
}

#[test]
fn far_field_tends_to_combined_bias() {
    // on the axis the wire field opposes β with magnitude β z₀/z
    let s = fig2();
    let sys = build_cross_trap(&s).unwrap();
    let spec = AveragingSpec::new(s.omega);
    let limit = (s.beta * s.beta + s.gamma * s.gamma).sqrt();
    for k in [50.0, 200.0, 1000.0] {
        let b = average_field(&sys, &spec, &Vec3::new(0.0, 0.0, k * s.z0())).unwrap();
        let axis = ((s.beta * (1.0 - 1.0 / k)).powi(2) + s.gamma * s.gamma).sqrt();
        assert!(rel(b, axis) < 1e-8, "{b} vs {axis} at {k} z0");
        if k >= 200.0 {
            assert!(rel(b, limit) < 0.01, "{b} vs {limit} at {k} z0");
        }
    }
}

#[test]
fn counter_rotating_gamma_is_incommensurate_free() {
    // Δ = −1/2 halves the γ rate; the common period doubles
    let s = fig2().with_detuning(-0.5);
    let av = Averager::new(build_cross_trap(&s).unwrap(), AveragingSpec::new(s.omega)).unwrap();
    assert!(rel(av.period(), 2.0 * 2.0 * std::f64::consts::PI / s.omega) < 1e-12);
}

#[test]
fn single_element_system_matches_primitive() {
    let w = WirePrimitive::thin_wire(Vec3::zeros(), Vec3::y()).unwrap();
    let sys = FieldSystem::new().with_element(w.clone(), Drive::dc(3.0));
    let r = Vec3::new(1e-3, 0.0, 2e-3);
    assert_eq!(sys.field_at(&r, 0.7).unwrap(), w.field(3.0, &r).unwrap());
}
