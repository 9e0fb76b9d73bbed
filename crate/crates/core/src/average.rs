//! Time-averaged field magnitude and the effective mechanical potential.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::analytic::AtomSpecies;
use crate::error::{Error, Result};
use crate::fields::{FieldSystem, Vec3};

/// Largest denominator accepted when expressing a drive frequency as a
/// rational multiple of the base frequency.
pub const MAX_DENOMINATOR: u64 = 64;

/// Uniform-sampling quadrature over the common drive period.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragingSpec {
    pub base_frequency: f64,
    pub samples_per_period: usize,
    pub relative_tolerance: f64,
    pub max_doublings: u32,
}

impl AveragingSpec {
    pub fn new(base_frequency: f64) -> Self {
        AveragingSpec {
            base_frequency,
            samples_per_period: 64,
            relative_tolerance: 1e-10,
            max_doublings: 6,
        }
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples_per_period = samples;
        self
    }

    pub fn with_tolerance(mut self, tol: f64) -> Self {
        self.relative_tolerance = tol;
        self
    }

    pub fn with_max_doublings(mut self, n: u32) -> Self {
        self.max_doublings = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_period < 8 || !self.samples_per_period.is_multiple_of(2) {
            return Err(Error::invalid("samples_per_period must be even and >= 8"));
        }
        if !(self.relative_tolerance > 0.0) {
            return Err(Error::invalid("relative_tolerance must be positive"));
        }
        if !(self.base_frequency > 0.0) {
            return Err(Error::invalid("base frequency must be positive"));
        }
        Ok(())
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Smallest q ≤ MAX_DENOMINATOR with `ratio` ≈ p/q.
fn rational_denominator(ratio: f64) -> Option<u64> {
    (1..=MAX_DENOMINATOR).find(|&q| {
        let scaled = ratio * q as f64;
        (scaled - scaled.round()).abs() <= 1e-9 * scaled.abs().max(1.0)
    })
}

/// Least common period (s) of a set of angular frequencies, each a rational
/// multiple of `base`. Zero frequencies impose no constraint.
pub fn common_period(frequencies: &[f64], base: f64) -> Result<f64> {
    if !(base > 0.0) {
        return Err(Error::invalid("base frequency must be positive"));
    }
    let mut lcm = 1u64;
    for &f in frequencies {
        if f == 0.0 {
            continue;
        }
        let q = rational_denominator(f.abs() / base).ok_or(Error::IncommensurateFrequencies {
            frequency: f,
            base,
            max_denominator: MAX_DENOMINATOR,
        })?;
        lcm = lcm / gcd(lcm, q) * q;
    }
    Ok(2.0 * PI / base * lcm as f64)
}

fn is_static(system: &FieldSystem) -> bool {
    system.frequencies().iter().all(|&f| f == 0.0)
}

/// Drive currents and uniform fields at the sample times of one refinement
/// level. Level 0 holds `n0` points at k·T/n0; level i ≥ 1 holds the
/// midpoints of level i−1's combined grid.
#[derive(Debug, Clone)]
struct SampleTable {
    currents: Vec<f64>,
    uniform: Vec<Vec3>,
}

impl SampleTable {
    fn build(system: &FieldSystem, times: impl Iterator<Item = f64>) -> Self {
        let mut currents = Vec::new();
        let mut uniform = Vec::new();
        for t in times {
            currents.extend(system.elements.iter().map(|(_, d)| d.current(t)));
            let mut b = system.static_field;
            for bias in &system.biases {
                b += bias.field(t);
            }
            for bias in &system.oscillating {
                b += bias.field(t);
            }
            uniform.push(b);
        }
        SampleTable { currents, uniform }
    }

    fn sum(&self, unit_fields: &[Vec3]) -> f64 {
        let ne = unit_fields.len();
        let mut acc = 0.0;
        for (j, u) in self.uniform.iter().enumerate() {
            let mut b = *u;
            let row = &self.currents[j * ne..(j + 1) * ne];
            for (i, g) in row.iter().zip(unit_fields) {
                b += g * *i;
            }
            acc += b.norm();
        }
        acc
    }
}

/// Time averager for one field system. Each conductor's field is linear in
/// its current, so a point costs one Biot–Savart evaluation per conductor
/// plus a cheap sum over cached sample tables.
#[derive(Debug, Clone)]
pub struct Averager {
    system: FieldSystem,
    spec: AveragingSpec,
    period: f64,
    is_static: bool,
    levels: Vec<OnceLock<SampleTable>>,
}

impl Averager {
    pub fn new(system: FieldSystem, spec: AveragingSpec) -> Result<Self> {
        spec.validate()?;
        let is_static = is_static(&system);
        let period = if is_static {
            2.0 * PI / spec.base_frequency
        } else {
            common_period(&system.frequencies(), spec.base_frequency)?
        };
        let levels = (0..=spec.max_doublings).map(|_| OnceLock::new()).collect();
        Ok(Averager {
            system,
            spec,
            period,
            is_static,
            levels,
        })
    }

    pub fn system(&self) -> &FieldSystem {
        &self.system
    }

    pub fn spec(&self) -> &AveragingSpec {
        &self.spec
    }

    /// Common drive period, s.
    pub fn period(&self) -> f64 {
        self.period
    }

    fn level(&self, i: usize) -> &SampleTable {
        self.levels[i].get_or_init(|| {
            let n0 = self.spec.samples_per_period;
            let period = self.period;
            if i == 0 {
                SampleTable::build(&self.system, (0..n0).map(|k| k as f64 * period / n0 as f64))
            } else {
                let n = n0 << (i - 1);
                let dt = period / n as f64;
                SampleTable::build(&self.system, (0..n).map(|k| (k as f64 + 0.5) * dt))
            }
        })
    }

    /// Field per ampere of every conductor at `r`.
    fn unit_fields(&self, r: &Vec3) -> Result<Vec<Vec3>> {
        self.system.elements.iter().map(|(w, _)| w.field(1.0, r)).collect()
    }

    /// ⟨|B(r, t)|⟩, T.
    pub fn average(&self, r: &Vec3) -> Result<f64> {
        self.average_impl(r, true)
    }

    /// Like [`Averager::average`] but returns the finest estimate instead of
    /// failing when the tolerance is not met (cusps near field zeros).
    pub fn average_relaxed(&self, r: &Vec3) -> Result<f64> {
        self.average_impl(r, false)
    }

    fn average_impl(&self, r: &Vec3, strict: bool) -> Result<f64> {
        let unit = self.unit_fields(r)?;
        if self.is_static {
            let mut b = self.system.static_field;
            for ((_, d), g) in self.system.elements.iter().zip(&unit) {
                b += g * d.current(0.0);
            }
            for bias in &self.system.biases {
                b += bias.field(0.0);
            }
            for bias in &self.system.oscillating {
                b += bias.field(0.0);
            }
            return Ok(b.norm());
        }
        let mut n = self.spec.samples_per_period;
        let mut sum = self.level(0).sum(&unit);
        let mut estimate = sum / n as f64;
        for i in 1..=self.spec.max_doublings as usize {
            sum += self.level(i).sum(&unit);
            n *= 2;
            let next = sum / n as f64;
            if (next - estimate).abs() <= self.spec.relative_tolerance * next.abs() {
                return Ok(next);
            }
            estimate = next;
        }
        if strict {
            Err(Error::no_convergence(format!("time average after {n} samples")))
        } else {
            Ok(estimate)
        }
    }

    /// ⟨B_vec(r, t)⟩ on the level-0 sample grid.
    pub fn average_vector(&self, r: &Vec3) -> Result<Vec3> {
        let unit = self.unit_fields(r)?;
        let table = self.level(0);
        let ne = unit.len();
        let mut acc = Vec3::zeros();
        for (j, u) in table.uniform.iter().enumerate() {
            acc += u;
            for (i, g) in table.currents[j * ne..(j + 1) * ne].iter().zip(&unit) {
                acc += g * *i;
            }
        }
        Ok(acc / table.uniform.len() as f64)
    }
}

/// ⟨|B(r, t)|⟩ over the common period of the system.
pub fn average_field(system: &FieldSystem, spec: &AveragingSpec, r: &Vec3) -> Result<f64> {
    Averager::new(system.clone(), *spec)?.average(r)
}

/// ⟨B_vec(r, t)⟩, the time average of the field vector itself.
pub fn average_vector(system: &FieldSystem, spec: &AveragingSpec, r: &Vec3) -> Result<Vec3> {
    Averager::new(system.clone(), *spec)?.average_vector(r)
}

/// μ⟨B⟩(r) − m g·r for one species in one field system.
#[derive(Debug, Clone)]
pub struct EffectivePotential {
    averager: Averager,
    pub species: AtomSpecies,
    pub gravity: Vec3,
    /// Length scale (m) used for finite-difference steps and tolerances,
    /// normally the nominal trap height z₀.
    pub length_scale: f64,
    /// Field scale (T) used by tolerance checks, normally β.
    pub field_scale: f64,
}

impl EffectivePotential {
    pub fn new(system: FieldSystem, averaging: AveragingSpec, species: AtomSpecies, length_scale: f64) -> Result<Self> {
        species.validate()?;
        system.validate()?;
        if !(length_scale > 0.0) {
            return Err(Error::invalid("length scale must be positive"));
        }
        Ok(EffectivePotential {
            averager: Averager::new(system, averaging)?,
            species,
            gravity: Vec3::zeros(),
            length_scale,
            field_scale: 0.0,
        })
    }

    pub fn with_gravity(mut self, gravity: Vec3) -> Self {
        self.gravity = gravity;
        self
    }

    pub fn with_field_scale(mut self, field: f64) -> Self {
        self.field_scale = field;
        self
    }

    /// Same potential with a different averaging spec.
    pub fn with_averaging(&self, averaging: AveragingSpec) -> Result<Self> {
        Ok(EffectivePotential {
            averager: Averager::new(self.system().clone(), averaging)?,
            ..self.clone()
        })
    }

    pub fn system(&self) -> &FieldSystem {
        self.averager.system()
    }

    pub fn averaging(&self) -> &AveragingSpec {
        self.averager.spec()
    }

    pub fn averager(&self) -> &Averager {
        &self.averager
    }

    pub fn average_field(&self, r: &Vec3) -> Result<f64> {
        self.averager.average(r)
    }

    /// Potential energy, J.
    pub fn potential_at(&self, r: &Vec3) -> Result<f64> {
        let b = self.average_field(r)?;
        Ok(self.species.moment * b - self.species.mass * self.gravity.dot(r))
    }

    /// Potential with the relaxed average, for bulk grid evaluation.
    pub fn potential_relaxed(&self, r: &Vec3) -> Result<f64> {
        let b = self.averager.average_relaxed(r)?;
        Ok(self.species.moment * b - self.species.mass * self.gravity.dot(r))
    }

    /// Potential expressed as an equivalent field, T.
    pub fn potential_field_at(&self, r: &Vec3) -> Result<f64> {
        Ok(self.potential_at(r)? / self.species.moment)
    }

    /// Natural gradient scale μβ/z₀ used by stationarity tests, J/m.
    pub fn gradient_scale(&self) -> f64 {
        self.species.moment * self.field_scale / self.length_scale
    }

    /// Central-difference gradient, J/m.
    pub fn gradient(&self, r: &Vec3, step: f64) -> Result<Vec3> {
        let mut g = Vec3::zeros();
        for i in 0..3 {
            let mut e = Vec3::zeros();
            e[i] = step;
            let fp = self.potential_at(&(r + e))?;
            let fm = self.potential_at(&(r - e))?;
            g[i] = (fp - fm) / (2.0 * step);
        }
        Ok(g)
    }

    /// Evaluate the potential at many points; results follow input order.
    pub fn potential_batch(&self, points: &[Vec3]) -> Vec<Result<f64>> {
        use rayon::prelude::*;
        points.par_iter().map(|p| self.potential_at(p)).collect()
    }
}
