//! Least-squares polynomial fit of ⟨B⟩ around a minimum.
//!
//! The fit uses every monomial up to sixth degree so that truncation of the
//! series does not leak into the fourth-order coefficients; the quartic
//! part is then read off in the ρ-based basis of [`QuarticCoefficients`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::analytic::QuarticCoefficients;
use crate::error::{Error, Result};
use crate::fields::Vec3;

use super::minimize::Potential;

const FIT_DEGREE: u32 = 6;
const SHELLS: usize = 6;
const POINTS_PER_SHELL: usize = 160;
/// Largest condition number of the scaled design matrix accepted.
pub const MAX_CONDITION: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnharmonicFit {
    /// Fourth-order coefficients, T against coordinates in units of the
    /// length scale about the fitted centre.
    pub coefficients: QuarticCoefficients,
    /// Second-order coefficients of x², y², ζ² (same units).
    pub quadratic: [f64; 3],
    /// Condition number of the scaled design matrix.
    pub condition: f64,
    /// RMS residual, T.
    pub residual: f64,
}

fn monomials() -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    for d in 0..=FIT_DEGREE {
        for i in (0..=d).rev() {
            for j in (0..=d - i).rev() {
                out.push([i, j, d - i - j]);
            }
        }
    }
    out
}

/// Quasi-uniform directions on the unit sphere.
fn fibonacci_sphere(n: usize, twist: f64) -> Vec<Vec3> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|k| {
            let z = 1.0 - 2.0 * (k as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let a = golden * k as f64 + twist;
            Vec3::new(r * a.cos(), r * a.sin(), z)
        })
        .collect()
}

/// Fit the potential (in field units) on shells of radius up to
/// `shell_fraction` length scales around `centre`.
pub fn anharmonic_fit<P: Potential + ?Sized>(p: &P, centre: &Vec3, shell_fraction: f64) -> Result<AnharmonicFit> {
    if !(shell_fraction > 0.0 && shell_fraction <= 0.3) {
        return Err(Error::invalid("shell fraction must lie in (0, 0.3]"));
    }
    let l = p.length_scale();
    let mons = monomials();
    let mut offsets = vec![Vec3::zeros()];
    for s in 1..=SHELLS {
        let radius = s as f64 / SHELLS as f64;
        offsets.extend(
            fibonacci_sphere(POINTS_PER_SHELL, 0.7 * s as f64)
                .into_iter()
                .map(|d| d * radius),
        );
    }
    let moment = p.moment();
    let mut rows = Vec::with_capacity(offsets.len() * mons.len());
    let mut rhs = Vec::with_capacity(offsets.len());
    for u in &offsets {
        let r = centre + u * (shell_fraction * l);
        rhs.push(p.value(&r)? / moment);
        for m in &mons {
            rows.push(u.x.powi(m[0] as i32) * u.y.powi(m[1] as i32) * u.z.powi(m[2] as i32));
        }
    }
    let a = DMatrix::from_row_slice(offsets.len(), mons.len(), &rows);
    let b = DVector::from_vec(rhs);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditionedFit { condition });
    }
    let c = svd
        .solve(&b, 0.0)
        .map_err(|e| Error::no_convergence(format!("least-squares solve: {e}")))?;
    let residual = ((&a * &c - &b).norm_squared() / b.len() as f64).sqrt();
    let coef = |e: [u32; 3]| -> f64 {
        let k = mons.iter().position(|m| *m == e).expect("monomial in basis");
        c[k] / shell_fraction.powi((e[0] + e[1] + e[2]) as i32)
    };
    let rho4 = coef([4, 0, 0]);
    let rho2 = 0.5 * (coef([2, 0, 0]) + coef([0, 2, 0]));
    let rho2_z = 0.5 * (coef([2, 0, 1]) + coef([0, 2, 1]));
    let rho2_z2 = 0.5 * (coef([2, 0, 2]) + coef([0, 2, 2]));
    let coefficients = QuarticCoefficients {
        offset: coef([0, 0, 0]),
        rho2,
        z2: coef([0, 0, 2]),
        rho2_z,
        z3: coef([0, 0, 3]),
        rho4,
        x2y2: coef([2, 2, 0]) - 2.0 * rho4,
        xy3_minus_x3y: 0.5 * (coef([1, 3, 0]) - coef([3, 1, 0])),
        rho2_z2,
        z4: coef([0, 0, 4]),
    };
    Ok(AnharmonicFit {
        coefficients,
        quadratic: [coef([2, 0, 0]), coef([0, 2, 0]), coef([0, 0, 2])],
        condition,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::characterize::minimize::FnPotential;

    #[test]
    fn recovers_a_known_polynomial() {
        let q = QuarticCoefficients {
            offset: 4.0,
            rho2: 100.0,
            z2: 200.0,
            rho2_z: -200.0,
            z3: -400.0,
            rho4: -2000.0,
            x2y2: 300.0,
            xy3_minus_x3y: 500.0,
            rho2_z2: -4800.0,
            z4: -4400.0,
        };
        let p = FnPotential {
            f: move |r: &Vec3| Ok(q.evaluate(r, 1e-3)),
            length_scale: 1e-3,
            gradient_scale: 1.0,
        };
        let fit = anharmonic_fit(&p, &Vec3::new(0.0, 0.0, 1e-3), 0.05).unwrap();
        for (a, b) in fit.coefficients.to_array().iter().zip(q.to_array()) {
            assert!((a - b).abs() < 1e-6 * b.abs().max(1.0), "{a} vs {b}");
        }
    }

    #[test]
    fn pure_quadratic_has_no_quartic_part() {
        let p = FnPotential {
            f: |r: &Vec3| Ok(1.0 + 50.0 * (r.x * r.x + r.y * r.y) / 1e-6 + 80.0 * (r.z - 1e-3).powi(2) / 1e-6),
            length_scale: 1e-3,
            gradient_scale: 1.0,
        };
        let fit = anharmonic_fit(&p, &Vec3::new(0.0, 0.0, 1e-3), 0.1).unwrap();
        let a = fit.coefficients.to_array();
        for v in &a[5..] {
            assert!(v.abs() < 1e-6 * 50.0);
        }
        assert!((fit.quadratic[2] - 80.0).abs() < 1e-9);
        assert!(anharmonic_fit(&p, &Vec3::zeros(), 0.5).is_err());
    }
}
