//! Finite-difference curvature and normal-mode frequencies.

use nalgebra::{Matrix3, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::analytic::AtomSpecies;
use crate::error::{Error, Result};
use crate::fields::Vec3;

use super::minimize::Potential;

/// Relative step of the Hessian stencil, in length scales.
pub const HESSIAN_STEP: f64 = 1e-3;

fn raw_hessian<P: Potential + ?Sized>(p: &P, r: &Vec3, h: f64) -> Result<Matrix3<f64>> {
    let f0 = p.value(r)?;
    let e = |i: usize| {
        let mut v = Vec3::zeros();
        v[i] = h;
        v
    };
    let mut m = Matrix3::zeros();
    for i in 0..3 {
        let fp = p.value(&(r + e(i)))?;
        let fm = p.value(&(r - e(i)))?;
        m[(i, i)] = (fp - 2.0 * f0 + fm) / (h * h);
        for j in 0..i {
            let fpp = p.value(&(r + e(i) + e(j)))?;
            let fpm = p.value(&(r + e(i) - e(j)))?;
            let fmp = p.value(&(r - e(i) + e(j)))?;
            let fmm = p.value(&(r - e(i) - e(j)))?;
            let v = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Ok(m)
}

/// Central-difference Hessian (J/m²) with step 10⁻³ of the length scale and
/// one Richardson refinement.
pub fn hessian<P: Potential + ?Sized>(p: &P, r: &Vec3) -> Result<Matrix3<f64>> {
    hessian_with_step(p, r, HESSIAN_STEP * p.length_scale())
}

pub fn hessian_with_step<P: Potential + ?Sized>(p: &P, r: &Vec3, h: f64) -> Result<Matrix3<f64>> {
    if !(h > 0.0) {
        return Err(Error::invalid("Hessian step must be positive"));
    }
    let coarse = raw_hessian(p, r, h)?;
    let fine = raw_hessian(p, r, 0.5 * h)?;
    let m = (fine * 4.0 - coarse) / 3.0;
    Ok((m + m.transpose()) * 0.5)
}

/// One normal mode of a trap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalMode {
    /// Angular frequency, rad/s.
    pub angular_frequency: f64,
    /// Curvature eigenvalue, J/m².
    pub curvature: f64,
    /// Unit axis; sign fixed so its largest component is positive.
    pub axis: Vec3,
}

/// ω_i = √(λ_i/m), ascending, with orthonormal axes.
pub fn frequencies_from_hessian(h: &Matrix3<f64>, sp: &AtomSpecies) -> Result<Vec<NormalMode>> {
    sp.validate()?;
    if h.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("Hessian has non-finite entries"));
    }
    let eig = SymmetricEigen::new((h + h.transpose()) * 0.5);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut modes = Vec::with_capacity(3);
    for k in 0..3 {
        let lam = eig.eigenvalues[k];
        if lam < -1e-9 * scale {
            return Err(Error::NotAMinimum { eigenvalue: lam });
        }
        let mut axis: Vec3 = eig.eigenvectors.column(k).into();
        let big = (0..3)
            .max_by(|&a, &b| axis[a].abs().total_cmp(&axis[b].abs()))
            .unwrap_or(0);
        if axis[big] < 0.0 {
            axis = -axis;
        }
        modes.push(NormalMode {
            angular_frequency: (lam.max(0.0) / sp.mass).sqrt(),
            curvature: lam,
            axis,
        });
    }
    modes.sort_by(|a, b| a.curvature.total_cmp(&b.curvature));
    Ok(modes)
}

/// Frequencies of the modes closest to the x, y and z axes.
pub fn axis_frequencies(modes: &[NormalMode]) -> [f64; 3] {
    let mut out = [0.0; 3];
    let mut used = [false; 3];
    for (i, o) in out.iter_mut().enumerate() {
        let best = (0..modes.len()).filter(|&k| !used[k]).max_by(|&a, &b| {
            modes[a].axis[i]
                .abs()
                .total_cmp(&modes[b].axis[i].abs())
                .then(b.cmp(&a))
        });
        if let Some(k) = best {
            used[k] = true;
            *o = modes[k].angular_frequency;
        }
    }
    out
}
