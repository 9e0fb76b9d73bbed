//! JSON report assembly. Every number is wrapped as `{"value", "unit"}`.

use serde_json::{json, Value};

use crate::analytic::{depth_scale, larmor_frequency};
use crate::average::AveragingSpec;
use crate::characterize::{depth_averaging, GridPolicy, TrapMode, TrapReport};
use crate::fields::WireGeometry;
use crate::units::{angular_to_hz, joule_to_microkelvin, to_gauss, to_mm, CONSTANTS_VERSION};

use super::config::{Claim, Resolved, RunConfig};

pub fn q(value: f64, unit: &str) -> Value {
    json!({ "value": value, "unit": unit })
}

fn qv(values: &[f64], unit: &str) -> Value {
    json!({ "value": values, "unit": unit })
}

/// A computed claim quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub unit: &'static str,
}

/// Look up a claim quantity; `None` when the run did not compute it.
pub fn quantity(name: &str, trap: &TrapReport, r: &Resolved) -> Option<Quantity> {
    let hz = |i: usize| angular_to_hz(trap.axis_frequencies[i]);
    let (value, unit) = match name {
        "minimum_x_mm" => (to_mm(trap.minimum.x), "mm"),
        "minimum_y_mm" => (to_mm(trap.minimum.y), "mm"),
        "minimum_z_mm" => (to_mm(trap.minimum.z), "mm"),
        "field_at_minimum_g" => (to_gauss(trap.field_at_minimum), "G"),
        "freq_x_hz" => (hz(0), "Hz"),
        "freq_y_hz" => (hz(1), "Hz"),
        "freq_z_hz" => (hz(2), "Hz"),
        "freq_rho_hz" => match trap.mode {
            TrapMode::Trap => (0.5 * (hz(0) + hz(1)), "Hz"),
            TrapMode::Guide => (hz(1), "Hz"),
        },
        "curvature_ratio" => {
            let radial = match trap.mode {
                TrapMode::Trap => hz(0),
                TrapMode::Guide => hz(1),
            };
            ((hz(2) / radial).powi(2), "1")
        }
        "depth_g" => (to_gauss(trap.depth?.depth), "G"),
        "depth_uk" => (joule_to_microkelvin(trap.depth?.energy), "uK"),
        "depth_over_d0" => (trap.depth?.depth / depth_scale(r.spec.beta, r.spec.gamma), "1"),
        "larmor_mhz" => (larmor_frequency(trap.field_at_minimum, &r.species).ok()? / 1e6, "MHz"),
        _ => return None,
    };
    Some(Quantity { value, unit })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClaimRow {
    pub claim: Claim,
    pub computed: Option<Quantity>,
    pub relative_deviation: Option<f64>,
    pub pass: bool,
}

pub fn evaluate_claims(claims: &[Claim], trap: &TrapReport, r: &Resolved) -> Vec<ClaimRow> {
    claims
        .iter()
        .map(|c| {
            let computed = quantity(&c.quantity, trap, r);
            let (dev, pass) = match (computed, c.expected, c.tolerance, c.min, c.max) {
                (Some(v), Some(e), Some(t), _, _) => {
                    let d = (v.value - e) / e;
                    (Some(d), d.abs() <= t)
                }
                (Some(v), None, None, Some(lo), Some(hi)) => {
                    let d = if v.value < lo {
                        (v.value - lo) / lo
                    } else if v.value > hi {
                        (v.value - hi) / hi
                    } else {
                        0.0
                    };
                    (Some(d), (lo..=hi).contains(&v.value))
                }
                _ => (None, false),
            };
            ClaimRow {
                claim: c.clone(),
                computed,
                relative_deviation: dev,
                pass,
            }
        })
        .collect()
}

fn claim_json(row: &ClaimRow) -> Value {
    let unit = row.computed.map_or("1", |q| q.unit);
    let c = &row.claim;
    let mut v = json!({
        "quantity": c.quantity,
        "computed": row.computed.map(|x| q(x.value, x.unit)),
        "relative_deviation": row.relative_deviation.map(|d| q(d, "1")),
        "pass": row.pass,
    });
    if let (Some(e), Some(t)) = (c.expected, c.tolerance) {
        v["reference"] = q(e, unit);
        v["tolerance"] = q(t, "1");
    }
    if let (Some(lo), Some(hi)) = (c.min, c.max) {
        v["reference"] = json!({ "min": lo, "max": hi, "unit": unit });
    }
    v
}

fn averaging_json(a: &AveragingSpec) -> Value {
    json!({
        "base_frequency": q(a.base_frequency, "rad/s"),
        "samples_per_period": q(a.samples_per_period as f64, "1"),
        "relative_tolerance": q(a.relative_tolerance, "1"),
        "max_doublings": q(a.max_doublings as f64, "1"),
    })
}

fn grid_json(g: &GridPolicy, z0: f64) -> Value {
    json!({
        "half_width": q(g.half_width * z0, "m"),
        "z_min": q(g.z_min * z0, "m"),
        "z_max": q(g.z_max * z0, "m"),
        "points": q(g.points as f64, "1"),
        "exclusion": q(g.exclusion * z0, "m"),
    })
}

fn geometry_json(g: &WireGeometry, si: bool) -> Value {
    let len = |v: f64| if si { q(v, "m") } else { q(to_mm(v), "mm") };
    match *g {
        WireGeometry::Thin => json!({ "kind": "thin" }),
        WireGeometry::Strip { width } => json!({ "kind": "strip", "width": len(width) }),
        WireGeometry::Finite { length, leads } => json!({ "kind": "finite", "length": len(length), "leads": leads }),
    }
}

fn mode_name(m: TrapMode) -> &'static str {
    match m {
        TrapMode::Trap => "trap",
        TrapMode::Guide => "guide",
    }
}

/// Resolved configuration in SI and in the customary units.
pub fn config_echo(cfg: &RunConfig, r: &Resolved) -> Value {
    let s = &r.spec;
    let g = r.gravity;
    json!({
        "mode": mode_name(r.mode),
        "si": {
            "geometry": geometry_json(&s.geometry, true),
            "current": q(s.current, "A"),
            "omega": q(s.omega, "rad/s"),
            "beta": q(s.beta, "T"),
            "gamma": q(s.gamma, "T"),
            "phi": q(s.phi, "rad"),
            "gamma_detuning": q(s.gamma_detuning, "1"),
            "z0": q(s.z0(), "m"),
            "gravity": qv(&[g.x, g.y, g.z], "m/s^2"),
            "guess": qv(&[r.guess.x, r.guess.y, r.guess.z], "m"),
        },
        "lab_units": {
            "geometry": geometry_json(&s.geometry, false),
            "current": q(s.current, "A"),
            "omega": q(angular_to_hz(s.omega) / 1e3, "kHz"),
            "beta": q(to_gauss(s.beta), "G"),
            "gamma": q(to_gauss(s.gamma), "G"),
            "phi": q(s.phi, "rad"),
            "gamma_detuning": q(s.gamma_detuning, "1"),
            "z0": q(to_mm(s.z0()), "mm"),
        },
        "species": {
            "name": r.species.name,
            "mass": q(r.species.mass, "kg"),
            "moment": q(r.species.moment, "J/T"),
            "g_factor": q(r.species.g_factor, "1"),
        },
        "gravity_enabled": cfg.gravity.enabled,
    })
}

fn trap_json(t: &TrapReport, r: &Resolved) -> Value {
    let m = t.minimum;
    let modes: Vec<Value> = t
        .modes
        .iter()
        .map(|n| {
            json!({
                "frequency": q(angular_to_hz(n.angular_frequency), "Hz"),
                "curvature": q(n.curvature, "J/m^2"),
                "axis": qv(&[n.axis.x, n.axis.y, n.axis.z], "1"),
            })
        })
        .collect();
    let f = t.axis_frequencies.map(angular_to_hz);
    let depth = t.depth.map(|d| {
        json!({
            "depth": q(to_gauss(d.depth), "G"),
            "energy": q(d.energy, "J"),
            "temperature": q(joule_to_microkelvin(d.energy), "uK"),
            "over_d0": q(d.depth / depth_scale(r.spec.beta, r.spec.gamma), "1"),
            "saddle": qv(&[to_mm(d.saddle.x), to_mm(d.saddle.y), to_mm(d.saddle.z)], "mm"),
            "escape_to_wire": d.escape_to_wire,
        })
    });
    let fit = t.fit.map(|fit| {
        let names = crate::analytic::QuarticCoefficients::NAMES;
        let coeffs: serde_json::Map<String, Value> = names
            .iter()
            .zip(fit.coefficients.to_array())
            .map(|(n, v)| (n.to_string(), q(to_gauss(v), "G")))
            .collect();
        json!({
            "coefficients": coeffs,
            "quadratic": qv(&fit.quadratic.map(to_gauss), "G"),
            "condition": q(fit.condition, "1"),
            "residual": q(to_gauss(fit.residual), "G"),
            "length_scale": q(to_mm(r.spec.z0()), "mm"),
        })
    });
    json!({
        "mode": mode_name(t.mode),
        "minimum": qv(&[to_mm(m.x), to_mm(m.y), to_mm(m.z)], "mm"),
        "field_at_minimum": q(to_gauss(t.field_at_minimum), "G"),
        "potential_offset": q(t.potential_offset, "J"),
        "modes": modes,
        "axis_frequencies": qv(&f, "Hz"),
        "depth": depth,
        "fit": fit,
        "validity": {
            "omega_over_max_frequency": q(t.validity.omega_over_max_frequency, "1"),
            "larmor_over_omega": q(t.validity.larmor_over_omega, "1"),
        },
    })
}

pub fn characterize_report(cfg: &RunConfig, r: &Resolved, trap: &TrapReport, claims: &[ClaimRow]) -> Value {
    json!({
        "provenance": {
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "constants": CONSTANTS_VERSION,
            "averaging": averaging_json(&r.averaging),
            "depth_averaging": averaging_json(&depth_averaging(r.spec.omega)),
            "grid": grid_json(&r.grid, r.spec.z0()),
        },
        "config": config_echo(cfg, r),
        "result": trap_json(trap, r),
        "claims": claims.iter().map(claim_json).collect::<Vec<_>>(),
        "claims_pass": claims.iter().all(|c| c.pass),
        "notes": cfg.notes,
    })
}

/// Paths of numbers in `v` that are not inside an object carrying a
/// `unit` string.
pub fn unitless_numbers(v: &Value) -> Vec<String> {
    fn walk(v: &Value, path: String, has_unit: bool, out: &mut Vec<String>) {
        match v {
            Value::Number(_) if !has_unit => out.push(path),
            Value::Array(a) => {
                for (i, x) in a.iter().enumerate() {
                    walk(x, format!("{path}[{i}]"), has_unit, out);
                }
            }
            Value::Object(m) => {
                let unit = matches!(m.get("unit"), Some(Value::String(_)));
                for (k, x) in m {
                    walk(x, format!("{path}.{k}"), unit, out);
                }
            }
            _ => {}
        }
    }
    let mut out = Vec::new();
    walk(v, String::new(), false, &mut out);
    out
}
