//! Brute-force Biot–Savart references.

use crosstop::fields::Vec3;
use crosstop::units::MU0;

/// Infinite straight filament through `p` along `d`, written out directly.
pub fn filament(p: &Vec3, d: &Vec3, current: f64, r: &Vec3) -> Vec3 {
    let s = r - p;
    let perp = s - d * d.dot(&s);
    d.cross(&perp) * (MU0 * current / (2.0 * std::f64::consts::PI * perp.norm_squared()))
}

/// Midpoint filament sum across the strip, extrapolated in the filament count.
pub fn strip_oracle(width: f64, current: f64, r: &Vec3) -> Vec3 {
    let sum = |n: usize| {
        let dw = width / n as f64;
        (0..n).fold(Vec3::zeros(), |acc, k| {
            let y = -0.5 * width + (k as f64 + 0.5) * dw;
            acc + filament(&Vec3::new(0.0, y, 0.0), &Vec3::x(), current / n as f64, r)
        })
    };
    let coarse = sum(250);
    let fine = sum(500);
    fine + (fine - coarse) / 3.0
}

#[allow(clippy::too_many_arguments)]
fn simpson<F: Fn(f64) -> Vec3>(
    f: &F,
    a: f64,
    b: f64,
    fa: Vec3,
    fm: Vec3,
    fb: Vec3,
    whole: Vec3,
    tol: f64,
    depth: u32,
) -> Vec3 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (fa + flm * 4.0 + fm) * ((m - a) / 6.0);
    let right = (fm + frm * 4.0 + fb) * ((b - m) / 6.0);
    let delta = left + right - whole;
    if depth == 0 || delta.norm() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

pub fn integrate<F: Fn(f64) -> Vec3>(f: F, a: f64, b: f64, tol: f64) -> Vec3 {
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = (fa + fm * 4.0 + fb) * ((b - a) / 6.0);
    simpson(&f, a, b, fa, fm, fb, whole, tol, 40)
}

/// dB = μ₀I/4π dl × R/|R|³ along a straight path.
pub fn biot_savart(origin: Vec3, dir: Vec3, current: f64, r: Vec3) -> impl Fn(f64) -> Vec3 {
    move |s: f64| {
        let rr = r - (origin + dir * s);
        dir.cross(&rr) * (MU0 * current / (4.0 * std::f64::consts::PI) / rr.norm().powi(3))
    }
}
