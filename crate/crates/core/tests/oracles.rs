//! Closed-form conductor fields against brute-force Biot–Savart oracles, and
//! the convergence of the time-average quadrature.

mod common;

use common::fig2;
use common::oracle::{biot_savart, filament, integrate, strip_oracle};
use crosstop::average::{Averager, AveragingSpec};
use crosstop::fields::{build_cross_trap, field_of_segment, LeadFlow, Vec3, WirePrimitive};

const TOL: f64 = 1e-6;

fn probe_points(scale: f64) -> Vec<Vec3> {
    vec![
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(0.3, -0.2, 0.5),
        Vec3::new(-1.7, 0.9, 0.7),
        Vec3::new(2.5, 3.0, 1.5),
        Vec3::new(0.1, 0.6, 0.8),
        Vec3::new(-0.4, -1.2, 3.0),
    ]
    .into_iter()
    .map(|p| p * scale)
    .collect()
}

#[test]
fn strip_matches_filament_sum() {
    let w = 1e-4;
    let strip = WirePrimitive::strip(Vec3::zeros(), Vec3::x(), Vec3::y(), w).unwrap();
    for r in probe_points(w) {
        let exact = strip.field(2.5, &r).unwrap();
        let oracle = strip_oracle(w, 2.5, &r);
        let err = (exact - oracle).norm() / oracle.norm();
        assert!(err < TOL, "strip at {r:?}: {err:e}");
    }
}

#[test]
fn segment_matches_quadrature() {
    let (a, b) = (Vec3::new(-1e-3, 2e-4, 0.0), Vec3::new(2e-3, -1e-4, 3e-4));
    let len = (b - a).norm();
    let dir = (b - a) / len;
    for r in probe_points(1e-3) {
        let exact = field_of_segment(&a, &b, 3.0, &r).unwrap();
        let oracle = integrate(biot_savart(a, dir, 3.0, r), 0.0, len, 1e-13 * exact.norm());
        let err = (exact - oracle).norm() / oracle.norm();
        assert!(err < 1e-9, "segment at {r:?}: {err:e}");
    }
}

#[test]
fn lead_matches_quadrature() {
    let start = Vec3::new(1e-3, 0.0, 0.0);
    let dir = -Vec3::z();
    for (flow, sign) in [(LeadFlow::Outward, 1.0), (LeadFlow::Inward, -1.0)] {
        let lead = WirePrimitive::lead(start, dir, flow).unwrap();
        for r in probe_points(1e-3) {
            let exact = lead.field(2.0, &r).unwrap();
            // s = u/(1 − u) maps the half line onto [0, 1)
            let f = biot_savart(start, dir, sign * 2.0, r);
            let g = |u: f64| {
                if u >= 1.0 {
                    Vec3::zeros()
                } else {
                    f(u / (1.0 - u)) / ((1.0 - u) * (1.0 - u))
                }
            };
            let oracle = integrate(g, 0.0, 1.0, 1e-13 * exact.norm());
            let err = (exact - oracle).norm() / oracle.norm();
            assert!(err < TOL, "lead {flow:?} at {r:?}: {err:e}");
        }
    }
}

#[test]
fn thin_wire_matches_filament() {
    let w = WirePrimitive::thin_wire(Vec3::new(0.0, 1e-4, 0.0), Vec3::x()).unwrap();
    for r in probe_points(1e-3) {
        let a = w.field(7.0, &r).unwrap();
        let b = filament(&Vec3::new(0.0, 1e-4, 0.0), &Vec3::x(), 7.0, &r);
        assert!((a - b).norm() <= 1e-14 * b.norm());
    }
}

/// Single-level average with `n` samples per period.
fn average_with(n: usize, r: &Vec3) -> f64 {
    let spec = fig2();
    let av = Averager::new(
        build_cross_trap(&spec).unwrap(),
        AveragingSpec::new(spec.omega).with_samples(n).with_max_doublings(0),
    )
    .unwrap();
    av.average_relaxed(r).unwrap()
}

#[test]
fn averaging_error_falls_at_least_fourfold_per_doubling() {
    let z0 = fig2().z0();
    // ten fixed points in a box of ±0.5 z₀ around the centre
    let points: Vec<Vec3> = (0..10)
        .map(|k| {
            let t = k as f64;
            Vec3::new(
                0.5 * (1.3 * t).sin(),
                0.5 * (2.1 * t + 0.4).cos(),
                1.0 + 0.45 * (0.7 * t + 1.0).sin(),
            ) * z0
        })
        .collect();
    for r in &points {
        let reference = average_with(4096, r);
        let errors: Vec<f64> = [8, 16, 32]
            .iter()
            .map(|&n| (average_with(n, r) - reference).abs() / reference)
            .collect();
        for pair in errors.windows(2) {
            // stop comparing once both sit at round-off
            if pair[0] < 1e-13 {
                break;
            }
            assert!(pair[1] <= pair[0] / 4.0, "at {r:?}: errors {errors:?}");
        }
        assert!(errors[0] > 0.0 || errors[2] == 0.0);
    }
}

#[test]
fn adaptive_average_meets_its_tolerance() {
    let spec = fig2();
    let r = Vec3::new(0.3, -0.2, 1.1) * spec.z0();
    let av = Averager::new(build_cross_trap(&spec).unwrap(), AveragingSpec::new(spec.omega)).unwrap();
    let reference = average_with(4096, &r);
    assert!((av.average(&r).unwrap() - reference).abs() < 1e-9 * reference);
}
