//! JSON run configuration: presets, per-key overrides and validation.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::analytic::AtomSpecies;
use crate::average::AveragingSpec;
use crate::characterize::{GridPolicy, TrapMode};
use crate::error::{Error, Result};
use crate::fields::{CrossTrapSpec, Vec3, WireGeometry};
use crate::units::{gauss, khz_to_angular, mm, STANDARD_GRAVITY};

pub const PRESETS: [(&str, &str); 4] = [
    ("fig2", include_str!("../../presets/fig2.json")),
    ("compressed", include_str!("../../presets/compressed.json")),
    ("loading", include_str!("../../presets/loading.json")),
    ("guide", include_str!("../../presets/guide.json")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub mode: TrapMode,
    pub geometry: GeometryConfig,
    pub drives: DriveConfig,
    pub biases: BiasConfig,
    #[serde(default)]
    pub species: SpeciesConfig,
    #[serde(default)]
    pub gravity: GravityConfig,
    #[serde(default)]
    pub averaging: AveragingConfig,
    #[serde(default)]
    pub grid: GridPolicy,
    #[serde(default)]
    pub characterize: CharacterizeConfig,
    #[serde(default)]
    pub claims: Vec<Claim>,
    #[serde(default)]
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeometryConfig {
    Thin,
    Strip {
        width_mm: f64,
    },
    Finite {
        length_mm: f64,
        #[serde(default = "yes")]
        leads: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveConfig {
    pub current_a: f64,
    /// TOP frequency Ω/2π in kHz.
    pub omega_khz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BiasConfig {
    pub beta_g: f64,
    pub gamma_g: f64,
    #[serde(default)]
    pub phi_rad: f64,
    /// γ rotation offset Δ/Ω, a number or a "p/q" string.
    #[serde(default)]
    pub gamma_detuning: Detuning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Detuning {
    Number(f64),
    Ratio(String),
}

impl Default for Detuning {
    fn default() -> Self {
        Detuning::Number(0.0)
    }
}

impl Detuning {
    pub fn value(&self) -> std::result::Result<f64, String> {
        match self {
            Detuning::Number(v) => Ok(*v),
            Detuning::Ratio(s) => {
                let parse = |t: &str| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| format!("cannot parse `{s}` as p/q"))
                };
                match s.split_once('/') {
                    Some((p, q)) => {
                        let q = parse(q)?;
                        if q == 0.0 {
                            return Err("denominator is zero".into());
                        }
                        Ok(parse(p)? / q)
                    }
                    None => parse(s),
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeciesConfig {
    pub preset: Option<String>,
    pub name: Option<String>,
    pub mass_kg: Option<f64>,
    pub moment_j_per_t: Option<f64>,
    pub g_factor: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GravityConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "up")]
    pub direction: [f64; 3],
    #[serde(default = "standard_gravity")]
    pub magnitude_m_s2: f64,
}

fn up() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

fn standard_gravity() -> f64 {
    STANDARD_GRAVITY
}

impl Default for GravityConfig {
    fn default() -> Self {
        GravityConfig {
            enabled: false,
            direction: up(),
            magnitude_m_s2: STANDARD_GRAVITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AveragingConfig {
    pub samples_per_period: usize,
    pub relative_tolerance: f64,
    pub max_doublings: u32,
}

impl Default for AveragingConfig {
    fn default() -> Self {
        let s = AveragingSpec::new(1.0);
        AveragingConfig {
            samples_per_period: s.samples_per_period,
            relative_tolerance: s.relative_tolerance,
            max_doublings: s.max_doublings,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CharacterizeConfig {
    #[serde(default = "yes")]
    pub depth: bool,
    /// Shell radius of the anharmonic fit in units of z₀; null disables it.
    #[serde(default = "default_shell")]
    pub fit_shell: Option<f64>,
    /// Start of the minimum search, mm; defaults to (0, 0, z₀).
    #[serde(default)]
    pub guess_mm: Option<[f64; 3]>,
}

fn default_shell() -> Option<f64> {
    Some(0.02)
}

impl Default for CharacterizeConfig {
    fn default() -> Self {
        CharacterizeConfig {
            depth: true,
            fit_shell: default_shell(),
            guess_mm: None,
        }
    }
}

/// Quantities a claim may refer to.
pub const CLAIM_QUANTITIES: [&str; 13] = [
    "minimum_x_mm",
    "minimum_y_mm",
    "minimum_z_mm",
    "field_at_minimum_g",
    "freq_x_hz",
    "freq_y_hz",
    "freq_z_hz",
    "freq_rho_hz",
    "curvature_ratio",
    "depth_g",
    "depth_uk",
    "depth_over_d0",
    "larmor_mhz",
];

/// A reference value with a relative tolerance, or an accepted range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Claim {
    pub quantity: String,
    #[serde(default)]
    pub expected: Option<f64>,
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

/// Everything a command needs, in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub mode: TrapMode,
    pub spec: CrossTrapSpec,
    pub species: AtomSpecies,
    pub gravity: Vec3,
    pub averaging: AveragingSpec,
    pub grid: GridPolicy,
    pub guess: Vec3,
}

fn cfg_err(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

pub fn preset(name: &str) -> Result<Value> {
    let text = PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .ok_or_else(|| {
            cfg_err(
                "--preset",
                format!("unknown preset `{name}` (known: fig2, compressed, loading, guide)"),
            )
        })?;
    serde_json::from_str(text).map_err(|e| cfg_err(name, e.to_string()))
}

pub fn parse_document(source: &str, text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| cfg_err(source, format!("line {} column {}: {e}", e.line(), e.column())))
}

/// Recursively overlay `top` onto `base`.
pub fn merge(base: &mut Value, top: Value) {
    match (base, top) {
        (Value::Object(b), Value::Object(t)) => {
            for (k, v) in t {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Apply one `dotted.path=value` override. The value is read as JSON when it
/// parses, otherwise as a string.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| cfg_err(assignment, "override must look like dotted.path=value"))?;
    let path = path.trim();
    if path.is_empty() || path.split('.').any(str::is_empty) {
        return Err(cfg_err(path, "empty path segment in override"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj = match node {
            Value::Object(m) => m,
            _ => {
                return Err(cfg_err(
                    &parts[..i].join("."),
                    "cannot set a field inside a non-object value",
                ))
            }
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj
            .entry(part.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

pub fn from_value(doc: Value) -> Result<RunConfig> {
    let text = serde_json::to_string(&doc).map_err(|e| cfg_err("<config>", e.to_string()))?;
    let mut de = serde_json::Deserializer::from_str(&text);
    let cfg: RunConfig = serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        // positions refer to the merged document, not the user's file
        let message = e.into_inner().to_string();
        let message = match message.rfind(" at line ") {
            Some(i) => message[..i].to_string(),
            None => message,
        };
        cfg_err(&path, message)
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(cfg_err(path, format!("must be positive and finite (got {v})")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        match self.geometry {
            GeometryConfig::Thin => {}
            GeometryConfig::Strip { width_mm } => positive("geometry.width_mm", width_mm)?,
            GeometryConfig::Finite { length_mm, .. } => positive("geometry.length_mm", length_mm)?,
        }
        if !self.drives.current_a.is_finite() {
            return Err(cfg_err("drives.current_a", "must be finite"));
        }
        positive("drives.omega_khz", self.drives.omega_khz)?;
        positive("biases.beta_g", self.biases.beta_g)?;
        if !(self.biases.gamma_g >= 0.0 && self.biases.gamma_g.is_finite()) {
            return Err(cfg_err("biases.gamma_g", "must be non-negative and finite"));
        }
        if !self.biases.phi_rad.is_finite() {
            return Err(cfg_err("biases.phi_rad", "must be finite"));
        }
        let d = self
            .biases
            .gamma_detuning
            .value()
            .map_err(|m| cfg_err("biases.gamma_detuning", m))?;
        if !d.is_finite() {
            return Err(cfg_err("biases.gamma_detuning", "must be finite"));
        }
        self.species()?;
        let g = &self.gravity;
        if !(g.magnitude_m_s2 >= 0.0 && g.magnitude_m_s2.is_finite()) {
            return Err(cfg_err("gravity.magnitude_m_s2", "must be non-negative"));
        }
        let norm = Vec3::from(g.direction).norm();
        if g.enabled && !(norm > 0.0 && norm.is_finite()) {
            return Err(cfg_err("gravity.direction", "must be a non-zero vector"));
        }
        self.averaging_spec()
            .validate()
            .map_err(|e| cfg_err("averaging", e.to_string()))?;
        let grid = &self.grid;
        if grid.points < crate::characterize::MIN_RESOLUTION {
            return Err(cfg_err(
                "grid.points",
                format!("must be at least {}", crate::characterize::MIN_RESOLUTION),
            ));
        }
        positive("grid.half_width", grid.half_width)?;
        positive("grid.z_min", grid.z_min)?;
        if !(grid.z_max > grid.z_min) {
            return Err(cfg_err("grid.z_max", "must exceed grid.z_min"));
        }
        if !(grid.exclusion >= 0.0) {
            return Err(cfg_err("grid.exclusion", "must be non-negative"));
        }
        if let Some(f) = self.characterize.fit_shell {
            if !(f > 0.0 && f <= 0.3) {
                return Err(cfg_err("characterize.fit_shell", "must lie in (0, 0.3]"));
            }
        }
        for (i, c) in self.claims.iter().enumerate() {
            let p = format!("claims[{i}]");
            if !CLAIM_QUANTITIES.contains(&c.quantity.as_str()) {
                return Err(cfg_err(
                    &format!("{p}.quantity"),
                    format!("unknown quantity `{}`", c.quantity),
                ));
            }
            match (c.expected, c.tolerance, c.min, c.max) {
                (Some(_), Some(t), None, None) if t > 0.0 => {}
                (None, None, Some(lo), Some(hi)) if hi >= lo => {}
                _ => return Err(cfg_err(&p, "give either expected + tolerance (> 0) or min <= max")),
            }
        }
        Ok(())
    }

    pub fn species(&self) -> Result<AtomSpecies> {
        let s = &self.species;
        match (&s.preset, s.mass_kg, s.moment_j_per_t, s.g_factor) {
            (None, None, None, None) => Ok(AtomSpecies::rb87()),
            (Some(p), None, None, None) => match p.to_ascii_lowercase().as_str() {
                "rb87" => Ok(AtomSpecies::rb87()),
                other => Err(cfg_err("species.preset", format!("unknown species `{other}`"))),
            },
            (None, Some(m), Some(mu), Some(g)) => {
                AtomSpecies::new(s.name.clone().unwrap_or_else(|| "custom".into()), m, mu, g)
                    .map_err(|e| cfg_err("species", e.to_string()))
            }
            _ => Err(cfg_err(
                "species",
                "give either a preset or all of mass_kg, moment_j_per_t and g_factor",
            )),
        }
    }

    pub fn omega(&self) -> f64 {
        khz_to_angular(self.drives.omega_khz)
    }

    pub fn averaging_spec(&self) -> AveragingSpec {
        AveragingSpec::new(self.omega())
            .with_samples(self.averaging.samples_per_period)
            .with_tolerance(self.averaging.relative_tolerance)
            .with_max_doublings(self.averaging.max_doublings)
    }

    pub fn geometry(&self) -> WireGeometry {
        match self.geometry {
            GeometryConfig::Thin => WireGeometry::Thin,
            GeometryConfig::Strip { width_mm } => WireGeometry::Strip { width: mm(width_mm) },
            GeometryConfig::Finite { length_mm, leads } => WireGeometry::Finite {
                length: mm(length_mm),
                leads,
            },
        }
    }

    pub fn resolve(&self) -> Result<Resolved> {
        self.validate()?;
        let detuning = self
            .biases
            .gamma_detuning
            .value()
            .map_err(|m| cfg_err("biases.gamma_detuning", m))?;
        let spec = CrossTrapSpec::new(
            self.drives.current_a,
            gauss(self.biases.beta_g),
            gauss(self.biases.gamma_g),
            self.biases.phi_rad,
            self.omega(),
            self.geometry(),
        )
        .with_detuning(detuning);
        let gravity = if self.gravity.enabled {
            Vec3::from(self.gravity.direction).normalize() * self.gravity.magnitude_m_s2
        } else {
            Vec3::zeros()
        };
        let guess = match self.characterize.guess_mm {
            Some(g) => Vec3::from(g.map(mm)),
            None => Vec3::new(0.0, 0.0, spec.z0()),
        };
        Ok(Resolved {
            mode: self.mode,
            spec,
            species: self.species()?,
            gravity,
            averaging: self.averaging_spec(),
            grid: self.grid,
            guess,
        })
    }
}
