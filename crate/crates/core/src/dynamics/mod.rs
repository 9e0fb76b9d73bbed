//! Classical atom trajectories in the instantaneous field.
//!
//! The atom is a weak-field seeker whose moment follows the local field, so
//! the force is −μ∇|B(r, t)| + m g. Comparing these trajectories against
//! the time-averaged potential shows where the averaging picture holds.

mod integrator;
mod spectrum;

pub use integrator::{Dopri5, State, Tolerances};
pub use spectrum::{interpolate_peak, power_spectrum};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analytic::{larmor_frequency, AtomSpecies};
use crate::average::{Averager, AveragingSpec, EffectivePotential};
use crate::characterize::{axis_frequencies, find_minimum, frequencies_from_hessian, hessian, TrapMode};
use crate::error::{Error, Result};
use crate::fields::{build_cross_trap, build_guide, CrossTrapSpec, FieldSystem, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    /// m.
    pub initial_position: Vec3,
    /// m/s.
    pub initial_velocity: Vec3,
    /// s.
    pub start_time: f64,
    /// s.
    pub duration: f64,
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    /// Output interval, s.
    pub sample_stride: f64,
    /// m/s², added to the magnetic force.
    pub gravity: Vec3,
    /// Central-difference step for ∇|B|, m.
    pub gradient_step: f64,
    /// Abort with `EscapedDomain` beyond this distance from the start, m.
    pub escape_radius: Option<f64>,
}

impl TrajectoryConfig {
    /// Defaults: tolerances 1e−10 / 1e−12, gradient step 10⁻⁴ of `length`,
    /// no gravity, release at rest at t = 0.
    pub fn new(position: Vec3, duration: f64, sample_stride: f64, length: f64) -> Self {
        TrajectoryConfig {
            initial_position: position,
            initial_velocity: Vec3::zeros(),
            start_time: 0.0,
            duration,
            relative_tolerance: 1e-10,
            absolute_tolerance: 1e-12,
            sample_stride,
            gravity: Vec3::zeros(),
            gradient_step: 1e-4 * length,
            escape_radius: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(Error::invalid("duration must be positive"));
        }
        if !(self.relative_tolerance > 0.0 && self.absolute_tolerance > 0.0) {
            return Err(Error::invalid("integrator tolerances must be positive"));
        }
        if !(self.sample_stride > 0.0 && self.sample_stride <= self.duration) {
            return Err(Error::invalid(
                "sample stride must be positive and no longer than the run",
            ));
        }
        if !(self.gradient_step > 0.0) {
            return Err(Error::invalid("gradient step must be positive"));
        }
        let finite = |v: &Vec3| v.iter().all(|c| c.is_finite());
        if !(finite(&self.initial_position) && finite(&self.initial_velocity) && finite(&self.gravity)) {
            return Err(Error::invalid("initial conditions and gravity must be finite"));
        }
        if !self.start_time.is_finite() {
            return Err(Error::invalid("start time must be finite"));
        }
        if let Some(r) = self.escape_radius {
            if !(r > 0.0) {
                return Err(Error::invalid("escape radius must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub position: Vec3,
    pub velocity: Vec3,
    /// Instantaneous |B|, T.
    pub field: f64,
    /// Kinetic energy plus the time-averaged potential, J.
    pub energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    /// Lowest non-zero drive frequency of the system, rad/s (0 if static).
    pub drive_frequency: f64,
    pub steps: usize,
    pub rejected_steps: usize,
}

impl Trajectory {
    pub fn stride(&self) -> f64 {
        if self.samples.len() < 2 {
            0.0
        } else {
            self.samples[1].t - self.samples[0].t
        }
    }

    pub fn duration(&self) -> f64 {
        match (self.samples.first(), self.samples.last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0.0,
        }
    }

    pub fn coordinate(&self, axis: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.position[axis]).collect()
    }
}

fn drive_frequency(system: &FieldSystem) -> f64 {
    system
        .frequencies()
        .into_iter()
        .filter(|f| *f > 0.0)
        .fold(f64::INFINITY, f64::min)
}

fn gradient_of_magnitude(system: &FieldSystem, r: &Vec3, t: f64, h: f64) -> Result<Vec3> {
    let mut g = Vec3::zeros();
    for i in 0..3 {
        let mut e = Vec3::zeros();
        e[i] = h;
        g[i] = (system.magnitude_at(&(r + e), t)? - system.magnitude_at(&(r - e), t)?) / (2.0 * h);
    }
    Ok(g)
}

/// Integrate m r̈ = −μ∇|B(r, t)| + m g.
pub fn integrate(system: &FieldSystem, sp: &AtomSpecies, cfg: &TrajectoryConfig) -> Result<Trajectory> {
    cfg.validate()?;
    sp.validate()?;
    system.validate()?;
    let drive = drive_frequency(system);
    let drive = if drive.is_finite() { drive } else { 0.0 };
    let base = if drive > 0.0 { drive } else { 1.0 };
    let averager = Averager::new(system.clone(), AveragingSpec::new(base))?;
    let accel = sp.moment / sp.mass;
    let h = cfg.gradient_step;
    let g = cfg.gravity;
    let rhs = |t: f64, y: &State| -> Result<State> {
        let r = Vec3::new(y[0], y[1], y[2]);
        let grad = gradient_of_magnitude(system, &r, t, h)?;
        let a = -grad * accel + g;
        Ok([y[3], y[4], y[5], a.x, a.y, a.z])
    };
    let energy = |r: &Vec3, v: &Vec3| -> Result<f64> {
        Ok(0.5 * sp.mass * v.norm_squared() + sp.moment * averager.average_relaxed(r)? - sp.mass * g.dot(r))
    };
    let p0 = cfg.initial_position;
    let v0 = cfg.initial_velocity;
    let y0 = [p0.x, p0.y, p0.z, v0.x, v0.y, v0.z];
    let tol = Tolerances {
        relative: cfg.relative_tolerance,
        absolute: cfg.absolute_tolerance,
    };
    let mut solver = Dopri5::new(rhs, cfg.start_time, y0, cfg.sample_stride / 8.0, tol)?;
    let n = (cfg.duration / cfg.sample_stride * (1.0 + 1e-12)).floor() as usize;
    let mut samples = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let t = cfg.start_time + k as f64 * cfg.sample_stride;
        solver.advance_to(t)?;
        let y = solver.state();
        let r = Vec3::new(y[0], y[1], y[2]);
        let v = Vec3::new(y[3], y[4], y[5]);
        if let Some(radius) = cfg.escape_radius {
            if (r - p0).norm() > radius {
                return Err(Error::EscapedDomain { x: r.x, y: r.y, z: r.z });
            }
        }
        if !(r.iter().chain(v.iter()).all(|c| c.is_finite())) {
            return Err(Error::StepSizeUnderflow { t });
        }
        samples.push(Sample {
            t,
            position: r,
            velocity: v,
            field: system.magnitude_at(&r, t)?,
            energy: energy(&r, &v)?,
        });
    }
    Ok(Trajectory {
        samples,
        drive_frequency: drive,
        steps: solver.steps,
        rejected_steps: solver.rejected,
    })
}

fn spectral_cutoff(traj: &Trajectory) -> f64 {
    let nyquist = std::f64::consts::PI / traj.stride();
    if traj.drive_frequency > 0.0 {
        (0.5 * traj.drive_frequency).min(nyquist)
    } else {
        nyquist
    }
}

/// Dominant angular frequency of one coordinate below half the drive
/// frequency, refined by interpolation between spectral bins.
pub fn secular_frequency(traj: &Trajectory, axis: usize) -> Result<f64> {
    if axis > 2 {
        return Err(Error::invalid("axis must be 0, 1 or 2"));
    }
    if traj.samples.len() < 16 {
        return Err(Error::NoDominantPeak);
    }
    let (dw, power) = power_spectrum(&traj.coordinate(axis), traj.stride(), 4);
    let top = ((spectral_cutoff(traj) / dw).floor() as usize).min(power.len() - 1);
    if top < 3 {
        return Err(Error::NoDominantPeak);
    }
    let (k, &peak) = power[1..=top]
        .iter()
        .enumerate()
        .map(|(i, p)| (i + 1, p))
        .max_by(|a, b| a.1.total_cmp(b.1))
        .ok_or(Error::NoDominantPeak)?;
    let mean = power[1..=top].iter().sum::<f64>() / top as f64;
    if !(peak > 0.0) || peak < 10.0 * mean || k == top {
        return Err(Error::NoDominantPeak);
    }
    let w = (k as f64 + interpolate_peak(&power, k)) * dw;
    if traj.duration() * w / (2.0 * std::f64::consts::PI) < 20.0 {
        return Err(Error::invalid("trajectory spans fewer than 20 secular periods"));
    }
    Ok(w)
}

/// RMS displacement carried by spectral content above half the drive
/// frequency, relative to the content below it, summed over the three axes.
pub fn micromotion_ratio(traj: &Trajectory) -> Result<f64> {
    if traj.samples.len() < 16 {
        return Err(Error::invalid("trajectory too short for spectral analysis"));
    }
    if traj.drive_frequency == 0.0 {
        return Ok(0.0);
    }
    let mut fast = 0.0;
    let mut slow = 0.0;
    for axis in 0..3 {
        let (dw, power) = power_spectrum(&traj.coordinate(axis), traj.stride(), 1);
        let split = 0.5 * traj.drive_frequency;
        for (k, p) in power.iter().enumerate().skip(1) {
            if k as f64 * dw > split {
                fast += p;
            } else {
                slow += p;
            }
        }
    }
    if slow == 0.0 {
        return Err(Error::NoDominantPeak);
    }
    Ok((fast / slow).sqrt())
}

/// Smallest ratio of the Larmor angular frequency to Ω along the path.
pub fn adiabaticity_margin(traj: &Trajectory, sp: &AtomSpecies, omega: f64) -> f64 {
    traj.samples
        .iter()
        .map(|s| {
            larmor_frequency(s.field, sp)
                .map(|f| 2.0 * std::f64::consts::PI * f / omega)
                .unwrap_or(0.0)
        })
        .fold(f64::INFINITY, f64::min)
}

/// Mean energy over the last window minus the first, relative to the
/// initial excitation above `floor`, scaled to 100 secular periods.
pub fn energy_drift(traj: &Trajectory, window: f64, floor: f64, periods: f64) -> f64 {
    let n = ((window / traj.stride()).round() as usize).clamp(1, traj.samples.len());
    let mean = |s: &[Sample]| s.iter().map(|s| s.energy).sum::<f64>() / s.len() as f64;
    let first = mean(&traj.samples[..n]);
    let last = mean(&traj.samples[traj.samples.len() - n..]);
    (last - first) / (first - floor) * (100.0 / periods)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanSettings {
    /// Release offset from the minimum, in units of z₀.
    pub excursion: f64,
    /// Run length in periods of the probed secular frequency.
    pub secular_periods: f64,
    /// Output samples per TOP period.
    pub samples_per_period: usize,
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    /// Escape radius in units of z₀.
    pub escape_radius: f64,
}

impl Default for ScanSettings {
    fn default() -> Self {
        ScanSettings {
            excursion: 0.01,
            secular_periods: 100.0,
            samples_per_period: 16,
            relative_tolerance: 1e-10,
            absolute_tolerance: 1e-12,
            escape_radius: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    /// Ω / ω_max.
    pub ratio: f64,
    /// TOP angular frequency, rad/s.
    pub omega: f64,
    pub bounded: bool,
    /// Probed axis (0 = x, 1 = y).
    pub axis: usize,
    /// Hessian prediction, rad/s.
    pub predicted: f64,
    /// Measured secular frequency, rad/s.
    pub secular: Option<f64>,
    pub secular_deviation: Option<f64>,
    pub micromotion: Option<f64>,
    /// Energy drift per 100 secular periods, relative to the excitation.
    pub energy_drift: Option<f64>,
    pub adiabaticity: Option<f64>,
}

impl ScanRow {
    /// Escape, or energy drift above 1 % per 100 periods.
    pub fn breakdown(&self) -> bool {
        !self.bounded || self.energy_drift.is_none_or(|d| !(d.abs() < 0.01))
    }
}

/// Release atoms in the trap (or guide) at several ratios Ω/ω_max and
/// compare the motion with the averaged-potential prediction. Rows are
/// independent and returned in input order.
pub fn top_ratio_scan(
    base: &CrossTrapSpec,
    mode: TrapMode,
    sp: &AtomSpecies,
    gravity: Vec3,
    ratios: &[f64],
    settings: &ScanSettings,
) -> Result<Vec<Result<ScanRow>>> {
    if let Some(bad) = ratios.iter().find(|r| !(**r >= 2.0)) {
        return Err(Error::invalid(format!("TOP ratios must be at least 2 (got {bad})")));
    }
    let build = |spec: &CrossTrapSpec| match mode {
        TrapMode::Trap => build_cross_trap(spec),
        TrapMode::Guide => build_guide(spec),
    };
    let z0 = base.z0();
    let ep = EffectivePotential::new(build(base)?, AveragingSpec::new(base.omega), sp.clone(), z0)?
        .with_gravity(gravity)
        .with_field_scale(base.beta);
    let minimum = find_minimum(&ep, &Vec3::new(0.0, 0.0, z0))?;
    let modes = frequencies_from_hessian(&hessian(&ep, &minimum)?, sp)?;
    let w_max = modes.iter().map(|m| m.angular_frequency).fold(0.0, f64::max);
    let axis = if mode == TrapMode::Guide { 1 } else { 0 };
    let predicted = axis_frequencies(&modes)[axis];
    let floor = ep.potential_at(&minimum)?;
    Ok(ratios
        .par_iter()
        .map(|&ratio| {
            let omega = ratio * w_max;
            let spec = CrossTrapSpec { omega, ..*base };
            let system = build(&spec)?;
            let mut start = minimum;
            start[axis] += settings.excursion * z0;
            let period = 2.0 * std::f64::consts::PI / omega;
            let duration = settings.secular_periods * 2.0 * std::f64::consts::PI / predicted;
            let mut cfg = TrajectoryConfig::new(start, duration, period / settings.samples_per_period as f64, z0);
            cfg.relative_tolerance = settings.relative_tolerance;
            cfg.absolute_tolerance = settings.absolute_tolerance;
            cfg.gravity = gravity;
            cfg.escape_radius = Some(settings.escape_radius * z0);
            let unbounded = ScanRow {
                ratio,
                omega,
                bounded: false,
                axis,
                predicted,
                secular: None,
                secular_deviation: None,
                micromotion: None,
                energy_drift: None,
                adiabaticity: None,
            };
            let traj = match integrate(&system, sp, &cfg) {
                Ok(t) => t,
                Err(Error::EscapedDomain { .. }) => return Ok(unbounded),
                Err(e) => return Err(e),
            };
            let secular = secular_frequency(&traj, axis).ok();
            Ok(ScanRow {
                bounded: true,
                secular,
                secular_deviation: secular.map(|w| (w - predicted) / predicted),
                micromotion: micromotion_ratio(&traj).ok(),
                energy_drift: Some(energy_drift(
                    &traj,
                    2.0 * std::f64::consts::PI / predicted,
                    floor,
                    settings.secular_periods,
                )),
                adiabaticity: Some(adiabaticity_margin(&traj, sp, omega)),
                ..unbounded
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{gauss, STANDARD_GRAVITY};

    fn synthetic(w: f64, drive: f64) -> Trajectory {
        let dt = 2.0 * std::f64::consts::PI / w / 40.0;
        let samples = (0..4000)
            .map(|k| {
                let t = k as f64 * dt;
                Sample {
                    t,
                    position: Vec3::new(1e-5 * (w * t).cos(), 0.0, 1e-3),
                    velocity: Vec3::zeros(),
                    field: gauss(2.0),
                    energy: 0.0,
                }
            })
            .collect();
        Trajectory {
            samples,
            drive_frequency: drive,
            steps: 0,
            rejected_steps: 0,
        }
    }

    #[test]
    fn synthetic_secular_frequency() {
        let w = 2.0 * std::f64::consts::PI * 180.0;
        let t = synthetic(w, 20.0 * w);
        assert!((secular_frequency(&t, 0).unwrap() / w - 1.0).abs() < 5e-3);
        assert!(micromotion_ratio(&t).unwrap() < 1e-6);
        assert_eq!(micromotion_ratio(&synthetic(w, 0.0)).unwrap(), 0.0);
        assert!(matches!(secular_frequency(&t, 1), Err(Error::NoDominantPeak)));
    }

    #[test]
    fn free_fall() {
        let sys = FieldSystem::new().with_static(Vec3::new(0.0, 0.0, gauss(1.0)));
        let mut cfg = TrajectoryConfig::new(Vec3::new(0.0, 0.0, 1e-3), 0.01, 1e-4, 1e-3);
        cfg.gravity = Vec3::new(0.0, 0.0, STANDARD_GRAVITY);
        cfg.initial_velocity = Vec3::new(0.01, 0.0, -0.02);
        let traj = integrate(&sys, &AtomSpecies::rb87(), &cfg).unwrap();
        for s in &traj.samples {
            let z = 1e-3 - 0.02 * s.t + 0.5 * STANDARD_GRAVITY * s.t * s.t;
            assert!((s.position.z - z).abs() < 1e-12, "{} {}", s.position.z, z);
            assert!((s.position.x - 0.01 * s.t).abs() < 1e-14);
        }
        assert_eq!(traj.samples.len(), 101);
    }

    #[test]
    fn configs_are_validated() {
        let ok = TrajectoryConfig::new(Vec3::zeros(), 1.0, 0.1, 1e-3);
        assert!(ok.validate().is_ok());
        assert!(TrajectoryConfig { duration: 0.0, ..ok }.validate().is_err());
        assert!(TrajectoryConfig {
            relative_tolerance: 0.0,
            ..ok
        }
        .validate()
        .is_err());
        assert!(TrajectoryConfig {
            sample_stride: 2.0,
            ..ok
        }
        .validate()
        .is_err());
    }
}
