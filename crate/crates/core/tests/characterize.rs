//! End-to-end trap characterisation against the closed-form expansions.

mod common;

use crosstop::analytic::{
    gravity_phi, guide_expansion, harmonic_frequencies, isotropic_frequency, phi_expansion, quartic_expansion,
    AtomSpecies, TrapParams,
};
use crosstop::average::{AveragingSpec, EffectivePotential};
use crosstop::characterize::{
    anharmonic_fit, axis_frequencies, depth_curve, find_minimum, finite_length_study, frequencies_from_hessian,
    hessian, lead_alignment, strip_width_study, trap_depth, BiasPolicy, DepthGrid, GridPolicy, StudySettings,
    DEPTH_ASYMPTOTES,
};
use crosstop::fields::{build_cross_trap, CrossTrapSpec, Vec3, WireGeometry};
use crosstop::units::{gauss, khz_to_angular, STANDARD_GRAVITY};

use common::{compressed, fig2, guide_potential, rel, trap_potential};

fn params(s: &CrossTrapSpec) -> TrapParams {
    TrapParams::new(s.beta, s.gamma, s.z0())
        .unwrap()
        .with_phi(s.phi)
        .unwrap()
}

fn frequencies(ep: &EffectivePotential, guess: Vec3) -> (Vec3, [f64; 3]) {
    let m = find_minimum(ep, &guess).unwrap();
    let modes = frequencies_from_hessian(&hessian(ep, &m).unwrap(), &ep.species).unwrap();
    (m, axis_frequencies(&modes))
}

/// Second derivative of ⟨B⟩ along `dir` (unit) at `c`, in T per (s/z₀)².
fn curvature(ep: &EffectivePotential, c: Vec3, dir: Vec3, z0: f64) -> f64 {
    let h = 0.01;
    let f = |s: f64| ep.average_field(&(c + dir * (s * z0))).unwrap();
    // fourth-order stencil, halved to give the coefficient of s²
    (-f(2.0 * h) + 16.0 * f(h) - 30.0 * f(0.0) + 16.0 * f(-h) - f(-2.0 * h)) / (12.0 * h * h) / 2.0
}

#[test]
fn fig2_minimum_field_and_curvatures() {
    let s = fig2();
    let z0 = s.z0();
    let ep = trap_potential(&s);
    let m = find_minimum(&ep, &Vec3::new(0.0, 0.0, z0)).unwrap();
    assert!(rel(m.z, z0) < 1e-3 && m.x.abs() < 1e-9 && m.y.abs() < 1e-9, "{m:?}");
    assert!(rel(ep.average_field(&m).unwrap(), gauss(4.0)) < 1e-6);
    let q = phi_expansion(&params(&s)).unwrap();
    let diag = Vec3::new(1.0, 1.0, 0.0).normalize();
    assert!(rel(curvature(&ep, m, Vec3::x(), z0), q.xx) < 1e-3);
    assert!(rel(curvature(&ep, m, diag, z0), q.xx) < 1e-3);
    assert!(rel(curvature(&ep, m, Vec3::z(), z0), q.zz) < 1e-3);
    // 100 G and 200 G per (s/z₀)²
    assert!(rel(q.xx, gauss(100.0)) < 1e-12 && rel(q.zz, gauss(200.0)) < 1e-12);
}

#[test]
fn phi_shifted_coefficients_match_numeric_average() {
    let s = CrossTrapSpec { phi: 0.3, ..fig2() };
    let z0 = s.z0();
    let ep = trap_potential(&s);
    let q = phi_expansion(&params(&s)).unwrap();
    let c = Vec3::new(0.0, 0.0, z0);
    assert!(rel(curvature(&ep, c, Vec3::x(), z0), q.xx) < 1e-3);
    assert!(rel(curvature(&ep, c, Vec3::z(), z0), q.zz) < 1e-3);
    let h = 1e-3;
    let slope = (ep.average_field(&(c + Vec3::z() * (h * z0))).unwrap()
        - ep.average_field(&(c - Vec3::z() * (h * z0))).unwrap())
        / (2.0 * h);
    assert!(rel(slope, q.linear) < 1e-3);
    assert!(rel(ep.average_field(&c).unwrap(), q.offset) < 1e-9);
}

#[test]
fn guide_coefficients_match_numeric_average() {
    for phi in [0.0, 0.4] {
        let s = CrossTrapSpec { phi, ..fig2() };
        let z0 = s.z0();
        let ep = guide_potential(&s);
        let q = guide_expansion(&params(&s)).unwrap();
        let c = Vec3::new(0.0, 0.0, z0);
        assert!(rel(curvature(&ep, c, Vec3::y(), z0), q.yy) < 1e-3);
        assert!(rel(curvature(&ep, c, Vec3::z(), z0), q.zz) < 1e-3);
        assert!(curvature(&ep, c, Vec3::x(), z0).abs() < 1e-12);
    }
}

#[test]
fn eq6_frequencies_over_a_bias_grid() {
    for beta in [20.0, 40.0, 80.0] {
        for gamma in [1.0, 2.0, 4.0] {
            let current = 2.0 * std::f64::consts::PI * gauss(beta) * 1e-3 / crosstop::units::MU0;
            let s = CrossTrapSpec::new(
                current,
                gauss(beta),
                gauss(gamma),
                0.0,
                khz_to_angular(10.0),
                WireGeometry::Thin,
            );
            let ep = trap_potential(&s);
            let (_, w) = frequencies(&ep, Vec3::new(0.0, 0.0, s.z0()));
            let (wr, wz) = harmonic_frequencies(&params(&s), &AtomSpecies::rb87()).unwrap();
            for (a, b) in [(w[0], wr), (w[1], wr), (w[2], wz)] {
                assert!(rel(a, b) < 0.01, "β {beta} γ {gamma}: {a} vs {b}");
            }
            assert!(rel(w[2] / w[0], std::f64::consts::SQRT_2) < 0.01);
        }
    }
}

#[test]
fn frequencies_scale_inversely_with_height() {
    let s = fig2();
    let (_, w1) = frequencies(&trap_potential(&s), Vec3::new(0.0, 0.0, s.z0()));
    let big = CrossTrapSpec {
        current: 2.0 * s.current,
        ..s
    };
    let (m2, w2) = frequencies(&trap_potential(&big), Vec3::new(0.0, 0.0, big.z0()));
    assert!(rel(m2.z, 2.0 * s.z0()) < 1e-6);
    for i in 0..3 {
        assert!(rel(w2[i], 0.5 * w1[i]) < 1e-4);
    }
}

#[test]
fn counter_rotating_gamma_gives_isotropic_trap() {
    let s = fig2().with_detuning(-1.0);
    let (_, w) = frequencies(&trap_potential(&s), Vec3::new(0.0, 0.0, s.z0()));
    let iso = isotropic_frequency(&params(&fig2()), &AtomSpecies::rb87()).unwrap();
    for i in 0..3 {
        assert!(rel(w[i], iso) < 0.02, "{w:?} vs {iso}");
        assert!(rel(w[i], w[(i + 1) % 3]) < 0.02);
    }
}

#[test]
fn gravity_phase_restores_the_height() {
    let sp = AtomSpecies::rb87();
    let g = Vec3::new(0.0, 0.0, STANDARD_GRAVITY);
    let base = fig2();
    let phi = gravity_phi(&params(&base), &sp, &g).unwrap();
    let s = CrossTrapSpec { phi, ..base };
    let z0 = s.z0();
    let ep = trap_potential(&s).with_gravity(g);
    let m = find_minimum(&ep, &Vec3::new(0.0, 0.0, z0)).unwrap();
    assert!((m.z - z0).abs() < 0.05 * z0, "{m:?}");
    // net force at the numeric minimum is negligible against m g
    let grad = ep.gradient(&m, 1e-4 * z0).unwrap();
    assert!(grad.norm() < 1e-4 * sp.mass * STANDARD_GRAVITY, "{grad:?}");
    // the quadratic-order balance is exact: μ·linear/z₀ = m g
    let q = phi_expansion(&params(&s)).unwrap();
    assert!(rel(sp.moment * q.linear / z0, sp.mass * STANDARD_GRAVITY) < 1e-12);
    // without the phase the trap sags away from the chip
    let sag = find_minimum(&trap_potential(&base).with_gravity(g), &Vec3::new(0.0, 0.0, z0)).unwrap();
    assert!(sag.z - z0 > (m.z - z0).abs());
}

#[test]
fn guide_is_uniform_along_its_axis() {
    let s = compressed();
    let ep = guide_potential(&s);
    let (m, w) = frequencies(&ep, Vec3::new(0.0, 0.0, s.z0()));
    let b0 = ep.average_field(&m).unwrap();
    for x in [-3.0, -0.7, 0.4, 2.0, 10.0] {
        let b = ep.average_field(&(m + Vec3::x() * (x * s.z0()))).unwrap();
        assert!(rel(b, b0) < 1e-10);
    }
    assert!(w[0] < 1e-6 * w[1]);
    assert!(rel(w[1] / (2.0 * std::f64::consts::PI), 1000.0) < 0.1, "{w:?}");
    assert!(rel(w[2] / (2.0 * std::f64::consts::PI), 880.0) < 0.1, "{w:?}");
    assert!(rel((w[2] / w[1]).powi(2), 0.75) < 0.01);
}

#[test]
fn compressed_trap_numbers() {
    let s = compressed();
    let (m, w) = frequencies(&trap_potential(&s), Vec3::new(0.0, 0.0, s.z0()));
    let hz = w.map(|x| x / (2.0 * std::f64::consts::PI));
    assert!(rel(m.z, 2.5e-4) < 0.1);
    assert!(
        rel(hz[0], 1000.0) < 0.1 && rel(hz[1], 1000.0) < 0.1 && rel(hz[2], 1400.0) < 0.1,
        "{hz:?}"
    );
}

#[test]
fn quartic_fit_matches_expansion() {
    let s = fig2();
    let ep = trap_potential(&s);
    let m = find_minimum(&ep, &Vec3::new(0.0, 0.0, s.z0())).unwrap();
    let fit = anharmonic_fit(&ep, &m, 0.02).unwrap();
    let exact = quartic_expansion(&params(&s)).unwrap();
    let (a, b) = (fit.coefficients.to_array(), exact.to_array());
    for i in exact.largest_quartic(3) {
        assert!(rel(a[i], b[i]) < 0.05, "coefficient {i}: {} vs {}", a[i], b[i]);
    }
}

/// Largest |expansion − ⟨B⟩| over a shell, relative to the largest rise of
/// ⟨B⟩ on it, for the quartic and the quadratic series.
fn shell_residuals(ep: &EffectivePotential, s: &CrossTrapSpec, shell: f64) -> (f64, f64) {
    let z0 = s.z0();
    let p = params(s);
    let quartic = quartic_expansion(&p).unwrap();
    let quadratic = phi_expansion(&p).unwrap();
    let centre = Vec3::new(0.0, 0.0, z0);
    let b0 = ep.average_field(&centre).unwrap();
    let (mut worst4, mut worst2, mut spread) = (0.0f64, 0.0f64, 0.0f64);
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    for k in 0..200 {
        let zc = 1.0 - 2.0 * (k as f64 + 0.5) / 200.0;
        let rc = (1.0 - zc * zc).sqrt();
        let a = golden * k as f64;
        let r = centre + Vec3::new(rc * a.cos(), rc * a.sin(), zc) * (shell * z0);
        let b = ep.average_field(&r).unwrap();
        spread = spread.max(b - b0);
        worst4 = worst4.max((quartic.evaluate(&r, z0) - b).abs());
        worst2 = worst2.max((quadratic.evaluate(&r) - b).abs());
    }
    (worst4 / spread, worst2 / spread)
}

#[test]
fn quartic_beats_quadratic_on_a_shell() {
    // with β/γ = 10 the series converges only within about γz₀/β = 0.1 z₀
    let s = fig2();
    let ep = trap_potential(&s);
    let mut last = f64::INFINITY;
    for shell in [0.1, 0.05, 0.02] {
        let (q4, q2) = shell_residuals(&ep, &s, shell);
        assert!(q4 < q2, "shell {shell}: {q4:e} vs {q2:e}");
        assert!(q4 < last / 4.0);
        last = q4;
    }
    assert!(last < 1e-3, "{last:e}");
}

#[test]
fn depth_is_grid_converged() {
    let s = CrossTrapSpec {
        omega: khz_to_angular(10.0),
        ..fig2()
    };
    let ep = trap_potential(&s)
        .with_averaging(crosstop::characterize::depth_averaging(s.omega))
        .unwrap();
    let m = Vec3::new(0.0, 0.0, s.z0());
    let coarse = trap_depth(
        &ep,
        &DepthGrid::for_trap(s.z0(), 0.0, &GridPolicy::default().with_points(81)).unwrap(),
        &m,
    )
    .unwrap();
    let fine = trap_depth(
        &ep,
        &DepthGrid::for_trap(s.z0(), 0.0, &GridPolicy::default()).unwrap(),
        &m,
    )
    .unwrap();
    assert!(
        rel(coarse.depth, fine.depth) < 0.02,
        "{} vs {}",
        coarse.depth,
        fine.depth
    );
}

#[test]
fn depth_curve_limits_and_monotonicity() {
    let ratios = [0.01, 0.1, 1.0, 30.0];
    let policy = GridPolicy::default().with_points(81);
    let pts = depth_curve(gauss(40.0), 1e-3, khz_to_angular(10.0), &ratios, &policy).unwrap();
    assert!(rel(pts[0].depth_over_d0, DEPTH_ASYMPTOTES.0) < 0.05);
    assert!(rel(pts[3].depth_over_d0, DEPTH_ASYMPTOTES.1) < 0.05);
    for w in pts.windows(2) {
        assert!(w[1].depth_over_d0 < w[0].depth_over_d0);
    }
}

fn study_settings() -> StudySettings {
    StudySettings {
        beta: gauss(40.0),
        gamma: gauss(4.0),
        omega: khz_to_angular(10.0),
        species: AtomSpecies::rb87(),
    }
}

#[test]
fn long_wires_approach_the_thin_wire_limit() {
    let rows = finite_length_study(1e-3, &[4.0, 40.0], BiasPolicy::HoldHeight, &study_settings()).unwrap();
    for r in &rows {
        assert!(r.dz_over_z0.abs() < 1e-5);
        // the frequencies follow the midplane field factor of the segment
        let half = 0.5 * r.parameter;
        let factor = half / (half * half + 1.0).sqrt();
        assert!((r.reduction() - (1.0 - factor)).abs() < 1e-3, "{r:?}");
    }
    assert!(rows[1].reduction() < 0.01);
    assert!(lead_alignment(1e-3, 4.0, &study_settings()).unwrap() > 0.99);
    // without retuning the leads pull the trap towards the chip and stiffen it
    let fixed = finite_length_study(1e-3, &[4.0], BiasPolicy::FixedBeta, &study_settings()).unwrap();
    assert!(fixed[0].dz_over_z0 < 0.0 && fixed[0].d_omega[0] > 0.0, "{:?}", fixed[0]);
}

#[test]
fn strips_stay_within_ten_percent_down_to_z0_equal_w() {
    let s = StudySettings {
        gamma: gauss(2.0),
        ..study_settings()
    };
    let rows = strip_width_study(1e-4, &[1.0, 2.0, 20.0], &s).unwrap();
    for r in &rows {
        assert!(r.dz_over_z0 < 0.0 && r.d_omega.iter().all(|d| *d < 0.0), "{r:?}");
        assert!(r.dz_over_z0.abs() <= 0.1 && r.max_abs_d_omega() <= 0.1, "{r:?}");
    }
    assert!(rows[2].max_abs_d_omega() < rows[0].max_abs_d_omega());
}

#[test]
fn thin_and_infinite_geometries_agree_far_from_strips() {
    let s = fig2();
    let wide = CrossTrapSpec {
        geometry: WireGeometry::Strip { width: 1e-6 },
        ..s
    };
    let spec = AveragingSpec::new(s.omega);
    let r = Vec3::new(0.2e-3, -0.1e-3, 1.1e-3);
    let a = crosstop::average::average_field(&build_cross_trap(&s).unwrap(), &spec, &r).unwrap();
    let b = crosstop::average::average_field(&build_cross_trap(&wide).unwrap(), &spec, &r).unwrap();
    assert!(rel(a, b) < 1e-6);
}
