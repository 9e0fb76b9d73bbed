//! Command-line front end: config loading, command dispatch and report/CSV
//! output.

pub mod config;
pub mod report;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::Value;

use crate::analytic::{guide_expansion, phi_expansion, quartic_expansion, TrapParams};
use crate::average::{Averager, EffectivePotential};
use crate::characterize::{
    axis_frequencies, characterize_trap, depth_curve, find_minimum, finite_length_study, frequencies_from_hessian,
    hessian, strip_width_study, BiasPolicy, CharacterizeOptions, StudyRow, StudySettings, TrapMode, DEPTH_ASYMPTOTES,
};
use crate::dynamics::{integrate, top_ratio_scan, ScanSettings, TrajectoryConfig};
use crate::error::{Error, Result};
use crate::fields::{build_cross_trap, build_guide, FieldSystem, Vec3, WireGeometry};
use crate::units::{angular_to_hz, gauss, mm, to_gauss, to_mm};

use config::{Resolved, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_CLAIM: i32 = 4;

/// Relative tolerance of the finite-geometry claims.
pub const STUDY_THRESHOLD: f64 = 0.10;

#[derive(Debug, Parser)]
#[command(name = "crosstop", version, about = "Cross-wire TOP atom-chip trap calculator")]
pub struct Cli {
    /// JSON config file, merged over the preset.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Built-in configuration: fig2, compressed, loading or guide.
    #[arg(long, global = true)]
    pub preset: Option<String>,
    /// Override one config value, e.g. --set biases.gamma_g=2.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Write output here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Exit with code 4 when a claim misses its tolerance.
    #[arg(long, global = true)]
    pub check: bool,
    /// Worker threads.
    #[arg(long, global = true, env = "CROSSTOP_THREADS")]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimum, normal modes, depth and anharmonicity as a JSON report.
    Characterize,
    /// ⟨B⟩ along a line through (0, 0, z₀) with its expansions.
    PotentialScan(ScanArgs),
    /// D/D₀ against γ/β for the thin-wire trap.
    DepthScan(DepthArgs),
    /// One trajectory in the instantaneous field.
    DynamicsRun(DynamicsArgs),
    /// Trajectories at several Ω/ω_max.
    TopScan(TopArgs),
    /// Finite wire length or strip width against the thin-wire result.
    Studies(StudyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScanAxis {
    X,
    Diag,
    Z,
}

#[derive(Debug, Args)]
pub struct ScanArgs {
    #[arg(long, value_enum, default_value = "x")]
    pub axis: ScanAxis,
    /// Half-range of the scan in units of z₀.
    #[arg(long, default_value_t = 0.5)]
    pub extent: f64,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
}

#[derive(Debug, Args)]
pub struct DepthArgs {
    /// β in gauss; defaults to the config value.
    #[arg(long)]
    pub beta_g: Option<f64>,
    #[arg(long, default_value_t = 0.01)]
    pub min: f64,
    #[arg(long, default_value_t = 30.0)]
    pub max: f64,
    /// Number of log-spaced γ/β values.
    #[arg(long, default_value_t = 8)]
    pub steps: usize,
}

#[derive(Debug, Args)]
pub struct DynamicsArgs {
    /// Release point "x,y,z" in mm; defaults to the minimum plus the excursion.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub start_mm: Option<Vec<f64>>,
    /// Release offset from the minimum in units of z₀ (x for the trap, y for the guide).
    #[arg(long, default_value_t = 0.01)]
    pub excursion: f64,
    /// Run length in secular periods of the probed axis.
    #[arg(long, default_value_t = 20.0)]
    pub periods: f64,
    /// Run length in ms; overrides --periods.
    #[arg(long)]
    pub duration_ms: Option<f64>,
    /// Output samples per TOP period.
    #[arg(long, default_value_t = 16)]
    pub samples_per_period: usize,
}

#[derive(Debug, Args)]
pub struct TopArgs {
    /// Ω / ω_max values.
    #[arg(long, value_delimiter = ',', default_value = "5,10,20,40")]
    pub ratios: Vec<f64>,
    #[arg(long, default_value_t = ScanSettings::default().excursion)]
    pub excursion: f64,
    /// Run length in secular periods.
    #[arg(long, default_value_t = ScanSettings::default().secular_periods)]
    pub periods: f64,
    #[arg(long, default_value_t = ScanSettings::default().samples_per_period)]
    pub samples_per_period: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum StudyKind {
    FiniteLength,
    StripWidth,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    HoldHeight,
    FixedBeta,
}

#[derive(Debug, Args)]
pub struct StudyArgs {
    #[arg(value_enum)]
    pub kind: StudyKind,
    /// L/z₀ (finite-length) or z₀/w (strip-width) values.
    #[arg(long, value_delimiter = ',')]
    pub values: Option<Vec<f64>>,
    #[arg(long, value_enum, default_value = "hold-height")]
    pub policy: PolicyArg,
    /// Strip width in mm; defaults to the config strip width or 0.1.
    #[arg(long)]
    pub width_mm: Option<f64>,
}

/// Output of a command before it is written.
struct Output {
    text: String,
    code: i32,
}

fn exit_code(e: &Error) -> i32 {
    if e.is_configuration() {
        EXIT_CONFIG
    } else {
        EXIT_NUMERICAL
    }
}

/// Float formatting used in every CSV: nine significant digits.
pub fn fmt(v: f64) -> String {
    format!("{v:.8e}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn csv_field(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// Preset, then config file, then `--set` overrides.
pub fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut doc = match &cli.preset {
        Some(name) => config::preset(name)?,
        None => Value::Object(Default::default()),
    };
    if let Some(path) = &cli.config {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: shown.clone(),
            message: e.to_string(),
        })?;
        config::merge(&mut doc, config::parse_document(&shown, &text)?);
    }
    if cli.preset.is_none() && cli.config.is_none() {
        return Err(Error::Config {
            path: "--preset".into(),
            message: "give --preset NAME or --config PATH".into(),
        });
    }
    for s in &cli.set {
        config::apply_override(&mut doc, s)?;
    }
    config::from_value(doc)
}

fn system_for(mode: TrapMode, r: &Resolved) -> Result<FieldSystem> {
    match mode {
        TrapMode::Trap => build_cross_trap(&r.spec),
        TrapMode::Guide => build_guide(&r.spec),
    }
}

fn potential(r: &Resolved) -> Result<EffectivePotential> {
    Ok(
        EffectivePotential::new(system_for(r.mode, r)?, r.averaging, r.species.clone(), r.spec.z0())?
            .with_gravity(r.gravity)
            .with_field_scale(r.spec.beta),
    )
}

fn characterize(cli: &Cli, cfg: &RunConfig, r: &Resolved) -> Result<Output> {
    let ep = potential(r)?;
    let opts = CharacterizeOptions {
        mode: r.mode,
        guess: r.guess,
        omega: r.spec.omega,
        geometry: r.spec.geometry,
        depth: cfg.characterize.depth.then_some(r.grid),
        fit_shell: cfg.characterize.fit_shell,
    };
    let trap = characterize_trap(&ep, &opts)?;
    let claims = report::evaluate_claims(&cfg.claims, &trap, r);
    let doc = report::characterize_report(cfg, r, &trap, &claims);
    let mut text = serde_json::to_string_pretty(&doc).map_err(|e| Error::invalid(e.to_string()))?;
    text.push('\n');
    let failed = claims.iter().any(|c| !c.pass);
    Ok(Output {
        text,
        code: if cli.check && failed { EXIT_CLAIM } else { EXIT_OK },
    })
}

fn potential_scan(a: &ScanArgs, r: &Resolved) -> Result<Output> {
    if !(a.points >= 2) {
        return Err(Error::invalid("--points must be at least 2"));
    }
    if !(a.extent > 0.0 && a.extent.is_finite()) {
        return Err(Error::invalid("--extent must be positive"));
    }
    let s = &r.spec;
    let z0 = s.z0();
    let params = TrapParams::new(s.beta, s.gamma, z0)?.with_phi(s.phi)?;
    let quadratic = match r.mode {
        TrapMode::Trap => phi_expansion(&params)?,
        TrapMode::Guide => guide_expansion(&params)?,
    };
    // the quartic series exists only for the synchronous, φ = 0 trap
    let quartic = (r.mode == TrapMode::Trap && s.phi == 0.0 && s.gamma_detuning == 0.0)
        .then(|| quartic_expansion(&params))
        .transpose()?;
    let averager = Averager::new(system_for(r.mode, r)?, r.averaging)?;
    let n = a.points;
    let rows: Vec<Result<String>> = (0..n)
        .into_par_iter()
        .map(|k| {
            let c = (-1.0 + 2.0 * k as f64 / (n - 1) as f64) * a.extent * z0;
            let p = match a.axis {
                ScanAxis::X => Vec3::new(c, 0.0, z0),
                ScanAxis::Diag => Vec3::new(c, c, 0.0) / std::f64::consts::SQRT_2 + Vec3::new(0.0, 0.0, z0),
                ScanAxis::Z => Vec3::new(0.0, 0.0, z0 + c),
            };
            // rows crossing a field zero of B(t) converge slowly; report the finest estimate
            let b = averager.average_relaxed(&p)?;
            Ok(format!(
                "{},{},{},{}\n",
                fmt(to_mm(c)),
                fmt(to_gauss(b)),
                fmt(to_gauss(quadratic.evaluate(&p))),
                fmt_opt(quartic.map(|q| to_gauss(q.evaluate(&p, z0)))),
            ))
        })
        .collect();
    let mut text = String::from("coordinate_mm,avg_field_g,quadratic_g,quartic_g\n");
    for row in rows {
        text.push_str(&row?);
    }
    Ok(Output { text, code: EXIT_OK })
}

fn depth_scan(a: &DepthArgs, r: &Resolved) -> Result<Output> {
    if !(a.min > 0.0 && a.max >= a.min && a.max.is_finite()) {
        return Err(Error::invalid("need 0 < --min <= --max"));
    }
    if a.steps < 1 || (a.steps == 1 && a.max != a.min) {
        return Err(Error::invalid("--steps must be at least 2 for a range"));
    }
    let beta = a.beta_g.map(gauss).unwrap_or(r.spec.beta);
    let ratios: Vec<f64> = if a.steps == 1 {
        vec![a.min]
    } else {
        let (l0, l1) = (a.min.ln(), a.max.ln());
        (0..a.steps)
            .map(|k| (l0 + (l1 - l0) * k as f64 / (a.steps - 1) as f64).exp())
            .collect()
    };
    let points = depth_curve(beta, r.spec.z0(), r.spec.omega, &ratios, &r.grid)?;
    let mut text = String::from("gamma_over_beta,D_over_D0,source\n");
    let _ = writeln!(text, "{},{},asymptote", fmt(0.0), fmt(DEPTH_ASYMPTOTES.0));
    for p in points {
        let _ = writeln!(text, "{},{},numeric", fmt(p.gamma_over_beta), fmt(p.depth_over_d0));
    }
    let _ = writeln!(text, "inf,{},asymptote", fmt(DEPTH_ASYMPTOTES.1));
    Ok(Output { text, code: EXIT_OK })
}

fn probed_axis(mode: TrapMode) -> usize {
    match mode {
        TrapMode::Trap => 0,
        TrapMode::Guide => 1,
    }
}

fn dynamics_run(a: &DynamicsArgs, r: &Resolved) -> Result<Output> {
    if a.samples_per_period == 0 {
        return Err(Error::invalid("--samples-per-period must be positive"));
    }
    let z0 = r.spec.z0();
    let length = if z0 > 0.0 { z0 } else { 1e-3 };
    let axis = probed_axis(r.mode);
    // the minimum and secular frequency are needed only for defaults
    let secular = || -> Result<(Vec3, f64)> {
        let ep = potential(r)?;
        let m = find_minimum(&ep, &r.guess)?;
        let modes = frequencies_from_hessian(&hessian(&ep, &m)?, &r.species)?;
        Ok((m, axis_frequencies(&modes)[axis]))
    };
    let mut cached = None;
    let mut need = || -> Result<(Vec3, f64)> {
        if cached.is_none() {
            cached = Some(secular()?);
        }
        Ok(cached.unwrap())
    };
    let start = match &a.start_mm {
        Some(v) if v.len() == 3 => Vec3::new(mm(v[0]), mm(v[1]), mm(v[2])),
        Some(_) => {
            return Err(Error::Config {
                path: "--start-mm".into(),
                message: "expected three comma-separated values".into(),
            })
        }
        None => {
            let (mut m, _) = need()?;
            m[axis] += a.excursion * z0;
            m
        }
    };
    let duration = match a.duration_ms {
        Some(ms) => ms * 1e-3,
        None => a.periods * 2.0 * std::f64::consts::PI / need()?.1,
    };
    let stride = 2.0 * std::f64::consts::PI / r.spec.omega / a.samples_per_period as f64;
    let mut cfg = TrajectoryConfig::new(start, duration, stride, length);
    cfg.gravity = r.gravity;
    let traj = integrate(&system_for(r.mode, r)?, &r.species, &cfg)?;
    let mut text = String::from("t,x,y,z,vx,vy,vz,B_inst,E_avg\n");
    for s in &traj.samples {
        let p = s.position;
        let v = s.velocity;
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{}",
            fmt(s.t),
            fmt(p.x),
            fmt(p.y),
            fmt(p.z),
            fmt(v.x),
            fmt(v.y),
            fmt(v.z),
            fmt(s.field),
            fmt(s.energy)
        );
    }
    Ok(Output { text, code: EXIT_OK })
}

fn top_scan(a: &TopArgs, r: &Resolved) -> Result<Output> {
    let settings = ScanSettings {
        excursion: a.excursion,
        secular_periods: a.periods,
        samples_per_period: a.samples_per_period,
        ..ScanSettings::default()
    };
    if !(settings.excursion > 0.0 && settings.secular_periods > 0.0 && settings.samples_per_period > 0) {
        return Err(Error::invalid(
            "--excursion, --periods and --samples-per-period must be positive",
        ));
    }
    let rows = top_ratio_scan(&r.spec, r.mode, &r.species, r.gravity, &a.ratios, &settings)?;
    let mut text = String::from(
        "ratio,omega_khz,axis,predicted_hz,secular_hz,secular_deviation,micromotion,energy_drift,adiabaticity,bounded,breakdown,status\n",
    );
    let mut ok = 0;
    for (ratio, row) in a.ratios.iter().zip(&rows) {
        match row {
            Ok(s) => {
                ok += 1;
                let _ = writeln!(
                    text,
                    "{},{},{},{},{},{},{},{},{},{},{},{}",
                    fmt(s.ratio),
                    fmt(angular_to_hz(s.omega) / 1e3),
                    ["x", "y", "z"][s.axis],
                    fmt(angular_to_hz(s.predicted)),
                    fmt_opt(s.secular.map(angular_to_hz)),
                    fmt_opt(s.secular_deviation),
                    fmt_opt(s.micromotion),
                    fmt_opt(s.energy_drift),
                    fmt_opt(s.adiabaticity),
                    s.bounded,
                    s.breakdown(),
                    if s.bounded { "ok" } else { "escaped" }
                );
            }
            Err(e) => {
                let _ = writeln!(text, "{},,,,,,,,,,,error: {}", fmt(*ratio), csv_field(&e.to_string()));
            }
        }
    }
    Ok(Output {
        text,
        code: if ok > 0 { EXIT_OK } else { EXIT_NUMERICAL },
    })
}

fn studies(a: &StudyArgs, r: &Resolved) -> Result<Output> {
    let s = &r.spec;
    let settings = StudySettings {
        beta: s.beta,
        gamma: s.gamma,
        omega: s.omega,
        species: r.species.clone(),
    };
    let (rows, pass): (Vec<StudyRow>, fn(&StudyRow) -> bool) = match a.kind {
        StudyKind::FiniteLength => {
            let values = a.values.clone().unwrap_or_else(|| vec![2.0, 4.0, 10.0, 40.0]);
            let policy = match a.policy {
                PolicyArg::HoldHeight => BiasPolicy::HoldHeight,
                PolicyArg::FixedBeta => BiasPolicy::FixedBeta,
            };
            (finite_length_study(s.z0(), &values, policy, &settings)?, |row| {
                row.reduction() <= STUDY_THRESHOLD
            })
        }
        StudyKind::StripWidth => {
            let values = a.values.clone().unwrap_or_else(|| vec![1.0, 2.0, 5.0, 20.0]);
            let width = match (a.width_mm, s.geometry) {
                (Some(w), _) => mm(w),
                (None, WireGeometry::Strip { width }) => width,
                (None, _) => mm(0.1),
            };
            (strip_width_study(width, &values, &settings)?, |row| {
                row.dz_over_z0.abs() <= STUDY_THRESHOLD && row.max_abs_d_omega() <= STUDY_THRESHOLD
            })
        }
    };
    let mut text = String::from(
        "parameter,beta_g,z_min_mm,dz_over_z0,freq_x_hz,freq_y_hz,freq_z_hz,ref_x_hz,ref_y_hz,ref_z_hz,d_omega_x,d_omega_y,d_omega_z,claim_threshold,pass\n",
    );
    for row in &rows {
        let f = row.frequencies.map(angular_to_hz);
        let g = row.reference.map(angular_to_hz);
        let d = row.d_omega;
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt(row.parameter),
            fmt(to_gauss(row.beta)),
            fmt(to_mm(row.z_min)),
            fmt(row.dz_over_z0),
            fmt(f[0]),
            fmt(f[1]),
            fmt(f[2]),
            fmt(g[0]),
            fmt(g[1]),
            fmt(g[2]),
            fmt(d[0]),
            fmt(d[1]),
            fmt(d[2]),
            fmt(STUDY_THRESHOLD),
            pass(row)
        );
    }
    Ok(Output { text, code: EXIT_OK })
}

fn dispatch(cli: &Cli) -> Result<Output> {
    let cfg = load_config(cli)?;
    let r = cfg.resolve()?;
    match &cli.command {
        Command::Characterize => characterize(cli, &cfg, &r),
        Command::PotentialScan(a) => potential_scan(a, &r),
        Command::DepthScan(a) => depth_scan(a, &r),
        Command::DynamicsRun(a) => dynamics_run(a, &r),
        Command::TopScan(a) => top_scan(a, &r),
        Command::Studies(a) => studies(a, &r),
    }
}

fn configure_threads(n: Option<usize>) -> Result<()> {
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::Config {
                path: "--threads".into(),
                message: "must be at least 1".into(),
            });
        }
        // a pool that already exists (repeated in-process runs) is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

/// Run the tool with explicit arguments and streams; returns the exit code.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let rendered = e.render().to_string();
            let _ = if e.use_stderr() {
                stderr.write_all(rendered.as_bytes())
            } else {
                stdout.write_all(rendered.as_bytes())
            };
            return code;
        }
    };
    let result = configure_threads(cli.threads).and_then(|_| dispatch(&cli));
    match result {
        Ok(out) => {
            let written = match &cli.out {
                Some(path) => {
                    std::fs::write(path, &out.text).map_err(|e| format!("cannot write {}: {e}", path.display()))
                }
                None => stdout.write_all(out.text.as_bytes()).map_err(|e| e.to_string()),
            };
            match written {
                Ok(()) => out.code,
                Err(msg) => {
                    let _ = writeln!(stderr, "error: {msg}");
                    EXIT_CONFIG
                }
            }
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}
