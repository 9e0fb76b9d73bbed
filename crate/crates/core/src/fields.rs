//! Instantaneous magnetic field of driven wire primitives and uniform bias
//! fields.
//!
//! Every conductor is evaluated with its closed-form Biot–Savart field. A
//! [`FieldSystem`] pairs each conductor with a sinusoidal [`Drive`] and adds
//! rotating, linearly oscillating and static uniform fields on top.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::MU0;

pub type Vec3 = Vector3<f64>;

/// Closest allowed approach to a conductor, m.
pub const WIRE_GUARD: f64 = 1e-9;

const UNIT_TOL: f64 = 1e-12;
const MU0_OVER_2PI: f64 = MU0 / (2.0 * PI);
const MU0_OVER_4PI: f64 = MU0 / (4.0 * PI);

fn check_unit(v: &Vec3, name: &str) -> Result<()> {
    if (v.norm() - 1.0).abs() > UNIT_TOL {
        return Err(Error::invalid(format!(
            "{name} must have unit norm (|v| = {})",
            v.norm()
        )));
    }
    Ok(())
}

/// Orientation of the current in a semi-infinite lead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeadFlow {
    /// Current leaves `start` and runs off to infinity along `direction`.
    Outward,
    /// Current arrives from infinity (along `-direction`) and ends at `start`.
    Inward,
}

/// A current-carrying conductor. Positions in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WirePrimitive {
    InfiniteThinWire {
        anchor: Vec3,
        direction: Vec3,
    },
    FiniteSegment {
        start: Vec3,
        end: Vec3,
    },
    SemiInfiniteLead {
        start: Vec3,
        direction: Vec3,
        flow: LeadFlow,
    },
    /// Zero-thickness sheet of width `width` centred on `anchor`, carrying a
    /// uniform surface current along `current_dir`.
    InfiniteStrip {
        anchor: Vec3,
        current_dir: Vec3,
        width_dir: Vec3,
        width: f64,
    },
}

impl WirePrimitive {
    pub fn thin_wire(anchor: Vec3, direction: Vec3) -> Result<Self> {
        let w = WirePrimitive::InfiniteThinWire { anchor, direction };
        w.validate()?;
        Ok(w)
    }

    pub fn segment(start: Vec3, end: Vec3) -> Result<Self> {
        let w = WirePrimitive::FiniteSegment { start, end };
        w.validate()?;
        Ok(w)
    }

    pub fn lead(start: Vec3, direction: Vec3, flow: LeadFlow) -> Result<Self> {
        let w = WirePrimitive::SemiInfiniteLead { start, direction, flow };
        w.validate()?;
        Ok(w)
    }

    pub fn strip(anchor: Vec3, current_dir: Vec3, width_dir: Vec3, width: f64) -> Result<Self> {
        let w = WirePrimitive::InfiniteStrip {
            anchor,
            current_dir,
            width_dir,
            width,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            WirePrimitive::InfiniteThinWire { direction, .. } => check_unit(direction, "wire direction"),
            WirePrimitive::FiniteSegment { start, end } => {
                if (end - start).norm() == 0.0 {
                    return Err(Error::invalid("segment start and end coincide"));
                }
                Ok(())
            }
            WirePrimitive::SemiInfiniteLead { direction, .. } => check_unit(direction, "lead direction"),
            WirePrimitive::InfiniteStrip {
                current_dir,
                width_dir,
                width,
                ..
            } => {
                check_unit(current_dir, "strip current direction")?;
                check_unit(width_dir, "strip width direction")?;
                if current_dir.dot(width_dir).abs() > UNIT_TOL {
                    return Err(Error::invalid(
                        "strip width direction must be orthogonal to the current",
                    ));
                }
                if !(*width > 0.0) {
                    return Err(Error::invalid("strip width must be positive"));
                }
                Ok(())
            }
        }
    }

    /// Field (T) produced by a current `current` (A) at `r`.
    pub fn field(&self, current: f64, r: &Vec3) -> Result<Vec3> {
        match self {
            WirePrimitive::InfiniteThinWire { anchor, direction } => thin_wire_field(anchor, direction, current, r),
            WirePrimitive::FiniteSegment { start, end } => field_of_segment(start, end, current, r),
            WirePrimitive::SemiInfiniteLead { start, direction, flow } => {
                lead_field(start, direction, *flow, current, r)
            }
            WirePrimitive::InfiniteStrip {
                anchor,
                current_dir,
                width_dir,
                width,
            } => field_of_strip(anchor, current_dir, width_dir, *width, current, r),
        }
    }

    /// Rotate the primitive about the z axis through the origin.
    pub fn rotated_z(&self, angle: f64) -> Self {
        let rot = rotation_z(angle);
        match self {
            WirePrimitive::InfiniteThinWire { anchor, direction } => WirePrimitive::InfiniteThinWire {
                anchor: rot * anchor,
                direction: rot * direction,
            },
            WirePrimitive::FiniteSegment { start, end } => WirePrimitive::FiniteSegment {
                start: rot * start,
                end: rot * end,
            },
            WirePrimitive::SemiInfiniteLead { start, direction, flow } => WirePrimitive::SemiInfiniteLead {
                start: rot * start,
                direction: rot * direction,
                flow: *flow,
            },
            WirePrimitive::InfiniteStrip {
                anchor,
                current_dir,
                width_dir,
                width,
            } => WirePrimitive::InfiniteStrip {
                anchor: rot * anchor,
                current_dir: rot * current_dir,
                width_dir: rot * width_dir,
                width: *width,
            },
        }
    }

    /// Distance from `r` to the conductor.
    pub fn distance(&self, r: &Vec3) -> f64 {
        match self {
            WirePrimitive::InfiniteThinWire { anchor, direction } => {
                let d = r - anchor;
                (d - direction * d.dot(direction)).norm()
            }
            WirePrimitive::FiniteSegment { start, end } => {
                let l = end - start;
                let s = ((r - start).dot(&l) / l.norm_squared()).clamp(0.0, 1.0);
                (r - (start + l * s)).norm()
            }
            WirePrimitive::SemiInfiniteLead { start, direction, .. } => {
                let d = r - start;
                let s = d.dot(direction).max(0.0);
                (d - direction * s).norm()
            }
            WirePrimitive::InfiniteStrip {
                anchor,
                current_dir,
                width_dir,
                width,
            } => {
                let d = r - anchor;
                let normal = current_dir.cross(width_dir);
                let u = d.dot(width_dir);
                let v = d.dot(&normal);
                let du = (u.abs() - 0.5 * width).max(0.0);
                du.hypot(v)
            }
        }
    }
}

fn rotation_z(angle: f64) -> nalgebra::Matrix3<f64> {
    let (s, c) = angle.sin_cos();
    nalgebra::Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0)
}

fn thin_wire_field(anchor: &Vec3, direction: &Vec3, current: f64, r: &Vec3) -> Result<Vec3> {
    let d = r - anchor;
    let perp = d - direction * d.dot(direction);
    let rho2 = perp.norm_squared();
    if rho2 < WIRE_GUARD * WIRE_GUARD {
        return Err(Error::EvaluationOnWire { distance: rho2.sqrt() });
    }
    Ok(direction.cross(&perp) * (MU0_OVER_2PI * current / rho2))
}

/// Exact Biot–Savart field of a straight segment carrying `current` from
/// `start` to `end`.
pub fn field_of_segment(start: &Vec3, end: &Vec3, current: f64, r: &Vec3) -> Result<Vec3> {
    let l = end - start;
    let len = l.norm();
    if len == 0.0 {
        return Err(Error::invalid("segment start and end coincide"));
    }
    let lhat = l / len;
    let a = r - start;
    let b = r - end;
    let cross = lhat.cross(&a);
    let d2 = cross.norm_squared();
    let on_span = a.dot(&lhat) >= 0.0 && b.dot(&lhat) <= 0.0;
    let an = a.norm();
    let bn = b.norm();
    if an < WIRE_GUARD || bn < WIRE_GUARD || (d2 < WIRE_GUARD * WIRE_GUARD && on_span) {
        return Err(Error::EvaluationOnWire {
            distance: d2.sqrt().min(an).min(bn),
        });
    }
    if d2 == 0.0 {
        // on the axis outside the span: the field vanishes
        return Ok(Vec3::zeros());
    }
    let cos_diff = lhat.dot(&a) / an - lhat.dot(&b) / bn;
    Ok(cross * (MU0_OVER_4PI * current * cos_diff / d2))
}

fn lead_field(start: &Vec3, direction: &Vec3, flow: LeadFlow, current: f64, r: &Vec3) -> Result<Vec3> {
    let a = r - start;
    let an = a.norm();
    let cross = direction.cross(&a);
    let d2 = cross.norm_squared();
    if an < WIRE_GUARD || (d2 < WIRE_GUARD * WIRE_GUARD && a.dot(direction) >= 0.0) {
        return Err(Error::EvaluationOnWire {
            distance: d2.sqrt().min(an),
        });
    }
    if d2 == 0.0 {
        return Ok(Vec3::zeros());
    }
    // outward: current runs start -> infinity, so cos(theta_end) = -1
    let sign = match flow {
        LeadFlow::Outward => 1.0,
        LeadFlow::Inward => -1.0,
    };
    let cos_diff = direction.dot(&a) / an + 1.0;
    Ok(cross * (sign * MU0_OVER_4PI * current * cos_diff / d2))
}

/// Closed-form field of an infinitely long flat strip with uniform sheet
/// current.
///
/// In the strip frame (`u` across the width, `v` along the normal
/// `current_dir × width_dir`) the field is
/// `μ₀K/2π · [½ ln(((u+w/2)² + v²)/((u−w/2)² + v²)) n̂ − Δθ ŵ]`, with
/// `K = I/w` and `Δθ` the angle the strip subtends.
pub fn field_of_strip(
    anchor: &Vec3,
    current_dir: &Vec3,
    width_dir: &Vec3,
    width: f64,
    current: f64,
    r: &Vec3,
) -> Result<Vec3> {
    let d = r - anchor;
    let normal = current_dir.cross(width_dir);
    let u = d.dot(width_dir);
    let v = d.dot(&normal);
    let half = 0.5 * width;
    if v.abs() < WIRE_GUARD && u.abs() <= half + WIRE_GUARD {
        return Err(Error::EvaluationOnWire { distance: v.abs() });
    }
    let up = u + half;
    let um = u - half;
    let log_term = 0.5 * ((up * up + v * v) / (um * um + v * v)).ln();
    // atan(up/v) - atan(um/v), continuous across v = 0 outside the sheet
    let subtended = (width * v).atan2(v * v + up * um);
    let k = MU0_OVER_2PI * current / width;
    Ok((normal * log_term - width_dir * subtended) * k)
}

/// Sinusoidal current drive, I(t) = amplitude · cos(ω t + phase).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub amplitude: f64,
    pub angular_frequency: f64,
    pub phase: f64,
}

impl Drive {
    pub fn new(amplitude: f64, angular_frequency: f64, phase: f64) -> Result<Self> {
        if !(angular_frequency >= 0.0) {
            return Err(Error::invalid("drive angular frequency must be >= 0"));
        }
        Ok(Drive {
            amplitude,
            angular_frequency,
            phase,
        })
    }

    pub fn dc(amplitude: f64) -> Self {
        Drive {
            amplitude,
            angular_frequency: 0.0,
            phase: 0.0,
        }
    }

    #[inline]
    pub fn current(&self, t: f64) -> f64 {
        self.amplitude * (self.angular_frequency * t + self.phase).cos()
    }
}

/// Uniform field rotating in the plane spanned by `u` and `v`:
/// amplitude · [u cos(ω t + phase) + v sin(ω t + phase)].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RotatingBias {
    pub amplitude: f64,
    pub angular_frequency: f64,
    pub phase: f64,
    pub u: Vec3,
    pub v: Vec3,
}

impl RotatingBias {
    pub fn new(amplitude: f64, angular_frequency: f64, phase: f64, u: Vec3, v: Vec3) -> Result<Self> {
        let b = RotatingBias {
            amplitude,
            angular_frequency,
            phase,
            u,
            v,
        };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        check_unit(&self.u, "bias axis u")?;
        check_unit(&self.v, "bias axis v")?;
        if self.u.dot(&self.v).abs() > UNIT_TOL {
            return Err(Error::invalid("bias axes must be orthogonal"));
        }
        if !(self.angular_frequency.is_finite()) {
            return Err(Error::invalid("bias angular frequency must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn field(&self, t: f64) -> Vec3 {
        let (s, c) = (self.angular_frequency * t + self.phase).sin_cos();
        (self.u * c + self.v * s) * self.amplitude
    }
}

/// Linearly polarised uniform field, amplitude · direction · cos(ω t + phase).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatingBias {
    pub amplitude: f64,
    pub angular_frequency: f64,
    pub phase: f64,
    pub direction: Vec3,
}

impl OscillatingBias {
    pub fn new(amplitude: f64, angular_frequency: f64, phase: f64, direction: Vec3) -> Result<Self> {
        check_unit(&direction, "oscillating bias direction")?;
        Ok(OscillatingBias {
            amplitude,
            angular_frequency,
            phase,
            direction,
        })
    }

    #[inline]
    pub fn field(&self, t: f64) -> Vec3 {
        self.direction * (self.amplitude * (self.angular_frequency * t + self.phase).cos())
    }
}

/// A complete set of driven conductors plus uniform fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FieldSystem {
    pub elements: Vec<(WirePrimitive, Drive)>,
    pub biases: Vec<RotatingBias>,
    #[serde(default)]
    pub oscillating: Vec<OscillatingBias>,
    #[serde(default = "Vec3::zeros")]
    pub static_field: Vec3,
}

impl FieldSystem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_element(mut self, wire: WirePrimitive, drive: Drive) -> Self {
        self.elements.push((wire, drive));
        self
    }

    pub fn with_bias(mut self, bias: RotatingBias) -> Self {
        self.biases.push(bias);
        self
    }

    pub fn with_oscillating(mut self, bias: OscillatingBias) -> Self {
        self.oscillating.push(bias);
        self
    }

    pub fn with_static(mut self, field: Vec3) -> Self {
        self.static_field += field;
        self
    }

    /// Instantaneous field (T) at `r` (m), time `t` (s).
    pub fn field_at(&self, r: &Vec3, t: f64) -> Result<Vec3> {
        let mut b = self.static_field;
        for (wire, drive) in &self.elements {
            let i = drive.current(t);
            b += wire.field(i, r)?;
        }
        for bias in &self.biases {
            b += bias.field(t);
        }
        for bias in &self.oscillating {
            b += bias.field(t);
        }
        Ok(b)
    }

    /// Field of the conductors alone.
    pub fn wire_field_at(&self, r: &Vec3, t: f64) -> Result<Vec3> {
        let mut b = Vec3::zeros();
        for (wire, drive) in &self.elements {
            b += wire.field(drive.current(t), r)?;
        }
        Ok(b)
    }

    #[inline]
    pub fn magnitude_at(&self, r: &Vec3, t: f64) -> Result<f64> {
        Ok(self.field_at(r, t)?.norm())
    }

    /// Angular frequencies of every time-dependent contribution, zeros
    /// included.
    pub fn frequencies(&self) -> Vec<f64> {
        self.elements
            .iter()
            .map(|(_, d)| d.angular_frequency)
            .chain(self.biases.iter().map(|b| b.angular_frequency))
            .chain(self.oscillating.iter().map(|b| b.angular_frequency))
            .collect()
    }

    /// Distance from `r` to the nearest conductor.
    pub fn wire_distance(&self, r: &Vec3) -> f64 {
        self.elements
            .iter()
            .map(|(w, _)| w.distance(r))
            .fold(f64::INFINITY, f64::min)
    }

    /// Multiply every drive and bias amplitude by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let mut out = self.clone();
        for (_, d) in &mut out.elements {
            d.amplitude *= s;
        }
        for b in &mut out.biases {
            b.amplitude *= s;
        }
        for b in &mut out.oscillating {
            b.amplitude *= s;
        }
        out.static_field *= s;
        out
    }

    /// The same system rotated rigidly about the z axis.
    pub fn rotated_z(&self, angle: f64) -> Self {
        let rot = rotation_z(angle);
        FieldSystem {
            elements: self.elements.iter().map(|(w, d)| (w.rotated_z(angle), *d)).collect(),
            biases: self
                .biases
                .iter()
                .map(|b| RotatingBias {
                    u: rot * b.u,
                    v: rot * b.v,
                    ..*b
                })
                .collect(),
            oscillating: self
                .oscillating
                .iter()
                .map(|b| OscillatingBias {
                    direction: rot * b.direction,
                    ..*b
                })
                .collect(),
            static_field: rot * self.static_field,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (w, d) in &self.elements {
            w.validate()?;
            if !(d.angular_frequency >= 0.0) {
                return Err(Error::invalid("drive angular frequency must be >= 0"));
            }
        }
        for b in &self.biases {
            b.validate()?;
        }
        for b in &self.oscillating {
            check_unit(&b.direction, "oscillating bias direction")?;
        }
        Ok(())
    }
}

/// How the two cross wires are modelled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WireGeometry {
    /// Infinitely long, infinitely thin wires.
    Thin,
    /// Infinitely long flat strips of the given width (m).
    Strip { width: f64 },
    /// Thin segments of total length `length` (m) centred on the origin,
    /// optionally fed by semi-infinite leads running to −z from each end.
    Finite { length: f64, leads: bool },
}

impl WireGeometry {
    fn validate(&self) -> Result<()> {
        match *self {
            WireGeometry::Thin => Ok(()),
            WireGeometry::Strip { width } if width > 0.0 => Ok(()),
            WireGeometry::Strip { .. } => Err(Error::invalid("strip width must be positive")),
            WireGeometry::Finite { length, .. } if length > 0.0 => Ok(()),
            WireGeometry::Finite { .. } => Err(Error::invalid("wire length must be positive")),
        }
    }

    /// Conductors for one wire of the cross, carrying current along `dir`
    /// (a unit vector in the chip plane).
    fn conductors(&self, dir: Vec3) -> Result<Vec<WirePrimitive>> {
        let origin = Vec3::zeros();
        Ok(match *self {
            WireGeometry::Thin => vec![WirePrimitive::thin_wire(origin, dir)?],
            WireGeometry::Strip { width } => {
                let across = Vec3::z().cross(&dir);
                vec![WirePrimitive::strip(origin, dir, across, width)?]
            }
            WireGeometry::Finite { length, leads } => {
                let start = -dir * (0.5 * length);
                let end = dir * (0.5 * length);
                let mut out = vec![WirePrimitive::segment(start, end)?];
                if leads {
                    let down = -Vec3::z();
                    out.push(WirePrimitive::lead(start, down, LeadFlow::Inward)?);
                    out.push(WirePrimitive::lead(end, down, LeadFlow::Outward)?);
                }
                out
            }
        })
    }
}

/// Drive and bias parameters of the cross trap and guide, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossTrapSpec {
    /// Chip current amplitude, A.
    pub current: f64,
    /// Perpendicular bias amplitude, T.
    pub beta: f64,
    /// Parallel bias amplitude, T.
    pub gamma: f64,
    /// Phase of the γ rotation relative to the chip currents, rad.
    pub phi: f64,
    /// TOP angular frequency, rad/s.
    pub omega: f64,
    /// γ rotation rate offset as a multiple of Ω (0 = synchronous, −1 = static).
    pub gamma_detuning: f64,
    pub geometry: WireGeometry,
}

impl CrossTrapSpec {
    pub fn new(current: f64, beta: f64, gamma: f64, phi: f64, omega: f64, geometry: WireGeometry) -> Self {
        CrossTrapSpec {
            current,
            beta,
            gamma,
            phi,
            omega,
            gamma_detuning: 0.0,
            geometry,
        }
    }

    pub fn with_detuning(mut self, detuning: f64) -> Self {
        self.gamma_detuning = detuning;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0) {
            return Err(Error::invalid("beta must be positive"));
        }
        if !(self.omega > 0.0) {
            return Err(Error::invalid("TOP frequency must be positive"));
        }
        if !(self.gamma >= 0.0) {
            return Err(Error::invalid("gamma must be non-negative"));
        }
        if !self.current.is_finite() || !self.phi.is_finite() || !self.gamma_detuning.is_finite() {
            return Err(Error::invalid("current, phi and detuning must be finite"));
        }
        self.geometry.validate()
    }

    /// Thin-wire trap height μ₀I₀/(2πβ), m.
    pub fn z0(&self) -> f64 {
        MU0_OVER_2PI * self.current / self.beta
    }

    fn gamma_bias(&self) -> Result<RotatingBias> {
        RotatingBias::new(
            self.gamma,
            self.omega * (1.0 + self.gamma_detuning),
            self.phi,
            Vec3::x(),
            Vec3::y(),
        )
        .and_then(|b| {
            if b.angular_frequency < 0.0 {
                // a negative rotation rate is the same field rotating the other way
                RotatingBias::new(b.amplitude, -b.angular_frequency, -b.phase, b.u, -b.v)
            } else {
                Ok(b)
            }
        })
    }
}

/// The full cross trap: x wire driven by cos Ωt, y wire by sin Ωt, the β
/// bias on axes (ŷ, −x̂) and the γ bias on (x̂, ŷ) with phase φ.
pub fn build_cross_trap(spec: &CrossTrapSpec) -> Result<FieldSystem> {
    spec.validate()?;
    let mut sys = FieldSystem::new();
    let x_drive = Drive::new(spec.current, spec.omega, 0.0)?;
    let y_drive = Drive::new(spec.current, spec.omega, -FRAC_PI_2)?;
    for w in spec.geometry.conductors(Vec3::x())? {
        sys.elements.push((w, x_drive));
    }
    for w in spec.geometry.conductors(Vec3::y())? {
        sys.elements.push((w, y_drive));
    }
    sys.biases
        .push(RotatingBias::new(spec.beta, spec.omega, 0.0, Vec3::y(), -Vec3::x())?);
    if spec.gamma > 0.0 {
        sys.biases.push(spec.gamma_bias()?);
    }
    Ok(sys)
}

/// Two-dimensional guide along x: only the x wire is driven, the β bias is
/// linearly polarised along ŷ with cos Ωt, and the γ bias rotates as in the
/// trap.
pub fn build_guide(spec: &CrossTrapSpec) -> Result<FieldSystem> {
    spec.validate()?;
    let mut sys = FieldSystem::new();
    let x_drive = Drive::new(spec.current, spec.omega, 0.0)?;
    for w in spec.geometry.conductors(Vec3::x())? {
        sys.elements.push((w, x_drive));
    }
    sys.oscillating
        .push(OscillatingBias::new(spec.beta, spec.omega, 0.0, Vec3::y())?);
    if spec.gamma > 0.0 {
        sys.biases.push(spec.gamma_bias()?);
    }
    Ok(sys)
}
