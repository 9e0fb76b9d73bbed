//! Local minimisation: Nelder–Mead descent followed by a Newton polish.

use nalgebra::{Matrix3, SymmetricEigen};

use crate::average::EffectivePotential;
use crate::error::{Error, Result};
use crate::fields::Vec3;

use super::hessian::hessian;

/// Anything with a scalar energy landscape that the characterisation tools
/// can work on.
pub trait Potential: Sync {
    /// Energy at `r`, J.
    fn value(&self, r: &Vec3) -> Result<f64>;

    /// Cheaper evaluation for bulk grid work; may trade accuracy for
    /// robustness. Defaults to [`Potential::value`].
    fn value_coarse(&self, r: &Vec3) -> Result<f64> {
        self.value(r)
    }

    /// Length (m) setting finite-difference steps and search sizes.
    fn length_scale(&self) -> f64;

    /// Gradient (J/m) against which stationarity is judged.
    fn gradient_scale(&self) -> f64;

    /// Energy per unit field, J/T; 1 for synthetic potentials.
    fn moment(&self) -> f64 {
        1.0
    }

    /// Distance from `r` to the nearest conductor, m.
    fn wire_distance(&self, _r: &Vec3) -> f64 {
        f64::INFINITY
    }

    fn gradient(&self, r: &Vec3, step: f64) -> Result<Vec3> {
        let mut g = Vec3::zeros();
        for i in 0..3 {
            let mut e = Vec3::zeros();
            e[i] = step;
            g[i] = (self.value(&(r + e))? - self.value(&(r - e))?) / (2.0 * step);
        }
        Ok(g)
    }
}

impl Potential for EffectivePotential {
    fn value(&self, r: &Vec3) -> Result<f64> {
        self.potential_at(r)
    }

    fn value_coarse(&self, r: &Vec3) -> Result<f64> {
        self.potential_relaxed(r)
    }

    fn length_scale(&self) -> f64 {
        self.length_scale
    }

    fn gradient_scale(&self) -> f64 {
        let g = EffectivePotential::gradient_scale(self);
        if g > 0.0 {
            g
        } else {
            // no field scale given: fall back to the energy at the origin of the search
            self.species.moment * 1e-4 / self.length_scale
        }
    }

    fn moment(&self) -> f64 {
        self.species.moment
    }

    fn wire_distance(&self, r: &Vec3) -> f64 {
        self.system().wire_distance(r)
    }
}

/// A closure-backed potential, mostly for tests and synthetic wells.
pub struct FnPotential<F> {
    pub f: F,
    pub length_scale: f64,
    pub gradient_scale: f64,
}

impl<F: Fn(&Vec3) -> Result<f64> + Sync> Potential for FnPotential<F> {
    fn value(&self, r: &Vec3) -> Result<f64> {
        (self.f)(r)
    }

    fn length_scale(&self) -> f64 {
        self.length_scale
    }

    fn gradient_scale(&self) -> f64 {
        self.gradient_scale
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    /// Half-width of the search box around the guess, in length scales.
    pub box_half_width: f64,
    /// Initial simplex edge, in length scales.
    pub initial_step: f64,
    pub max_simplex_iterations: usize,
    pub max_newton_iterations: usize,
    /// Required |∇V| relative to the gradient scale.
    pub gradient_tolerance: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            box_half_width: 10.0,
            initial_step: 0.05,
            max_simplex_iterations: 4000,
            max_newton_iterations: 40,
            gradient_tolerance: 1e-6,
        }
    }
}

/// Local minimum of `p` near `guess` with default options.
pub fn find_minimum<P: Potential + ?Sized>(p: &P, guess: &Vec3) -> Result<Vec3> {
    find_minimum_with(p, guess, &MinimizeOptions::default())
}

pub fn find_minimum_with<P: Potential + ?Sized>(p: &P, guess: &Vec3, opts: &MinimizeOptions) -> Result<Vec3> {
    let l = p.length_scale();
    let half = opts.box_half_width * l;
    let lo = guess - Vec3::repeat(half);
    let hi = guess + Vec3::repeat(half);
    match p.value(guess) {
        Ok(v) if v.is_finite() => {}
        Ok(_) => return Err(Error::invalid("potential is not finite at the initial guess")),
        Err(e) => return Err(e),
    }
    let start = nelder_mead(p, guess, opts, &lo, &hi)?;
    newton_polish(p, &start, opts, &lo, &hi)
}

fn inside(r: &Vec3, lo: &Vec3, hi: &Vec3) -> Result<()> {
    if (0..3).all(|i| r[i] >= lo[i] && r[i] <= hi[i]) {
        Ok(())
    } else {
        Err(Error::EscapedDomain { x: r.x, y: r.y, z: r.z })
    }
}

fn penalised<P: Potential + ?Sized>(p: &P, r: &Vec3) -> Result<f64> {
    match p.value(r) {
        Ok(v) => Ok(v),
        Err(Error::EvaluationOnWire { .. }) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

fn nelder_mead<P: Potential + ?Sized>(
    p: &P,
    guess: &Vec3,
    opts: &MinimizeOptions,
    lo: &Vec3,
    hi: &Vec3,
) -> Result<Vec3> {
    let l = p.length_scale();
    let mut pts = vec![*guess];
    for i in 0..3 {
        let mut q = *guess;
        q[i] += opts.initial_step * l;
        pts.push(q);
    }
    let mut vals = Vec::with_capacity(4);
    for q in &pts {
        vals.push(penalised(p, q)?);
    }
    let eval = |q: &Vec3| -> Result<f64> {
        inside(q, lo, hi)?;
        penalised(p, q)
    };
    for _ in 0..opts.max_simplex_iterations {
        let mut order = [0usize, 1, 2, 3];
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]).then(a.cmp(&b)));
        let pts_sorted: Vec<Vec3> = order.iter().map(|&i| pts[i]).collect();
        let vals_sorted: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
        pts = pts_sorted;
        vals = vals_sorted;
        let size = pts[1..].iter().map(|q| (q - pts[0]).norm()).fold(0.0, f64::max);
        if size < 1e-7 * l {
            return Ok(pts[0]);
        }
        let centroid = (pts[0] + pts[1] + pts[2]) / 3.0;
        let worst = pts[3];
        let reflected = centroid + (centroid - worst);
        let fr = eval(&reflected)?;
        if fr < vals[0] {
            let expanded = centroid + 2.0 * (centroid - worst);
            let fe = eval(&expanded)?;
            if fe < fr {
                pts[3] = expanded;
                vals[3] = fe;
            } else {
                pts[3] = reflected;
                vals[3] = fr;
            }
            continue;
        }
        if fr < vals[2] {
            pts[3] = reflected;
            vals[3] = fr;
            continue;
        }
        let (contracted, fc) = if fr < vals[3] {
            let c = centroid + 0.5 * (reflected - centroid);
            (c, eval(&c)?)
        } else {
            let c = centroid + 0.5 * (worst - centroid);
            (c, eval(&c)?)
        };
        if fc < vals[3].min(fr) {
            pts[3] = contracted;
            vals[3] = fc;
            continue;
        }
        for i in 1..4 {
            pts[i] = pts[0] + 0.5 * (pts[i] - pts[0]);
            vals[i] = eval(&pts[i])?;
        }
    }
    Err(Error::no_convergence("simplex descent"))
}

/// Solve H·s = −g on the subspace of non-negligible curvature; flat
/// directions (a guide's free axis) are left alone.
fn newton_step(h: &Matrix3<f64>, g: &Vec3) -> Vec3 {
    let eig = SymmetricEigen::new(*h);
    let scale = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut step = Vec3::zeros();
    for k in 0..3 {
        let lam = eig.eigenvalues[k];
        if lam.abs() <= 1e-8 * scale {
            continue;
        }
        let axis: Vec3 = eig.eigenvectors.column(k).into();
        step -= axis * (axis.dot(g) / lam.abs());
    }
    step
}

fn newton_polish<P: Potential + ?Sized>(
    p: &P,
    start: &Vec3,
    opts: &MinimizeOptions,
    lo: &Vec3,
    hi: &Vec3,
) -> Result<Vec3> {
    let l = p.length_scale();
    let tol = opts.gradient_tolerance * p.gradient_scale();
    let mut r = *start;
    let mut v = p.value(&r)?;
    for _ in 0..opts.max_newton_iterations {
        let g = p.gradient(&r, 1e-4 * l)?;
        let converged = g.norm() < tol;
        let h = hessian(p, &r)?;
        let mut step = newton_step(&h, &g);
        if converged && step.norm() < 1e-9 * l {
            return Ok(r);
        }
        if step.norm() > 0.1 * l {
            step *= 0.1 * l / step.norm();
        }
        let mut accepted = false;
        for _ in 0..20 {
            let trial = r + step;
            inside(&trial, lo, hi)?;
            let vt = penalised(p, &trial)?;
            if vt <= v + 1e-14 * v.abs() {
                r = trial;
                v = vt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // the finite-difference gradient is at its noise floor
            return if converged {
                Ok(r)
            } else {
                Err(Error::no_convergence("Newton polish"))
            };
        }
    }
    if p.gradient(&r, 1e-4 * l)?.norm() < tol {
        Ok(r)
    } else {
        Err(Error::no_convergence("Newton polish"))
    }
}
