//! Experiment configuration: a line-oriented `key = value` format grouped in
//! `[section]`s.
//!
//! ```text
//! # comments start with '#'
//! [model]
//! preset = rb87-paper      # base values; every other key overrides them
//! initial_state = minus
//! [physics]
//! kappa_mhz = 1.25
//! ```
//!
//! Keys may also be written as `section.key = value`, or without a section
//! header, since key names are unique. Unknown keys, malformed values and
//! violated invariants are reported with their line number.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::evolution::{EnvelopeSampling, PulseShape, DEFAULT_DT};
use crate::ideal::{IdealParams, ZeemanConfig};
use crate::model::{GroundState, ModelSpec};
use crate::rubidium::{RubidiumParams, ZeroStateMode};
use crate::scan::{uniform_grid, SimulationSettings};

pub const PRESETS: [&str; 2] = ["ideal-paper", "rb87-paper"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: cannot parse `{text}` (expected `key = value` or `[section]`)")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` belongs to section [{expected}], not [{found}]")]
    WrongSection { line: usize, key: String, expected: String, found: String },
    #[error("line {line}: unknown section [{section}]")]
    UnknownSection { line: usize, section: String },
    #[error("line {line}: key `{key}` given twice")]
    Duplicate { line: usize, key: String },
    #[error("line {line}: `{key}` expects {expected}, got `{value}`")]
    Type { line: usize, key: String, expected: &'static str, value: String },
    #[error("{}: `{key}` {message}", line_label(*.line))]
    Invariant { line: usize, key: String, message: String },
    #[error("unknown preset `{0}` (available: ideal-paper, rb87-paper)")]
    UnknownPreset(String),
}

fn line_label(line: usize) -> String {
    if line == 0 {
        "default".into()
    } else {
        format!("line {line}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Ideal,
    Rubidium,
}

/// How the ground-state Zeeman shift Δ_B is specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ZeemanSpec {
    ShiftMhz(f64),
    /// Field in Gauss; Δ_B = |g_F|·μ_B·B/h with `ground_lande`.
    FieldGauss(f64),
}

/// Inclusive uniform grid in MHz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        uniform_grid(self.start, self.stop, self.step)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ModelKind,
    pub initial_state: GroundState,
    pub photon_cutoff: usize,
    pub zero_state: ZeroStateMode,

    pub g_mhz: f64,
    pub omega_peak_mhz: f64,
    pub g0_mhz: f64,
    pub omega0_mhz: f64,
    pub kappa_mhz: f64,
    pub zeeman: ZeemanSpec,
    pub ground_lande: f64,
    pub excited_lande_f1: f64,
    pub hyperfine_f0_f1_mhz: f64,
    pub gamma_mhz: f64,
    pub delta_ca_mhz: f64,
    /// `None`: tuned to the Raman resonance of the initial state.
    pub delta_cp_mhz: Option<f64>,

    pub pulse: PulseShape,

    pub dt_us: f64,
    pub dt_max_us: f64,
    pub tail_lifetimes: f64,
    pub store_every: usize,
    pub sampling: EnvelopeSampling,

    pub cavity_grid: GridSpec,
    pub pump_grid: GridSpec,
    /// Δ_ca of the pump scan; `None` uses `delta_ca_mhz`.
    pub pump_delta_ca_mhz: Option<f64>,

    pub output_dir: String,
    /// Write every this-many-th trajectory row.
    pub trajectory_every: usize,
}

impl ExperimentConfig {
    pub fn preset(name: &str) -> Result<Self, ConfigError> {
        let ideal = IdealParams::paper();
        let rb = RubidiumParams::paper();
        let base = Self {
            kind: ModelKind::Ideal,
            initial_state: GroundState::Plus,
            photon_cutoff: 1,
            zero_state: ZeroStateMode::Sink,
            g_mhz: ideal.g,
            omega_peak_mhz: ideal.omega_peak,
            g0_mhz: rb.g0,
            omega0_mhz: rb.omega0,
            kappa_mhz: ideal.kappa,
            zeeman: ZeemanSpec::ShiftMhz(ideal.delta_b),
            ground_lande: rb.ground_lande,
            excited_lande_f1: rb.excited_lande_f1,
            hyperfine_f0_f1_mhz: rb.hyperfine_f0_f1,
            gamma_mhz: rb.gamma,
            delta_ca_mhz: 0.0,
            delta_cp_mhz: None,
            pulse: PulseShape::sin_squared(1.5),
            dt_us: DEFAULT_DT,
            dt_max_us: DEFAULT_DT,
            tail_lifetimes: 5.0,
            store_every: 10,
            sampling: EnvelopeSampling::StepMidpoint,
            cavity_grid: GridSpec { start: -40.0, stop: 40.0, step: 1.0 },
            pump_grid: GridSpec { start: -50.0, stop: 50.0, step: 0.5 },
            pump_delta_ca_mhz: None,
            output_dir: "out".into(),
            trajectory_every: 1,
        };
        match name {
            "ideal-paper" => Ok(base),
            "rb87-paper" => Ok(Self {
                kind: ModelKind::Rubidium,
                delta_ca_mhz: 63.2,
                cavity_grid: GridSpec { start: -30.0, stop: 100.0, step: 1.0 },
                ..base
            }),
            other => Err(ConfigError::UnknownPreset(other.to_string())),
        }
    }

    pub fn delta_b_mhz(&self) -> f64 {
        match self.zeeman {
            ZeemanSpec::ShiftMhz(d) => d,
            ZeemanSpec::FieldGauss(b) => ZeemanConfig::new(self.ground_lande, b).delta_b(),
        }
    }

    /// Model with the pump set from `delta_ca_mhz` and `delta_cp_mhz`.
    pub fn model(&self) -> ModelSpec {
        let delta_b = self.delta_b_mhz();
        let base = match self.kind {
            ModelKind::Ideal => ModelSpec::Ideal(IdealParams {
                g: self.g_mhz,
                kappa: self.kappa_mhz,
                delta_b,
                delta_p: 0.0,
                delta_cp: 0.0,
                omega_peak: self.omega_peak_mhz,
                initial_state: self.initial_state,
            }),
            ModelKind::Rubidium => ModelSpec::Rubidium(RubidiumParams {
                g0: self.g0_mhz,
                omega0: self.omega0_mhz,
                kappa: self.kappa_mhz,
                delta_b,
                ground_lande: self.ground_lande,
                excited_lande_f1: self.excited_lande_f1,
                hyperfine_f0_f1: self.hyperfine_f0_f1_mhz,
                gamma: self.gamma_mhz,
                zero_state: self.zero_state,
                delta_p: 0.0,
                delta_cp: 0.0,
                initial_state: self.initial_state,
            }),
        };
        let delta_cp = self
            .delta_cp_mhz
            .unwrap_or_else(|| base.raman_resonant_delta_cp(self.initial_state));
        base.with_cavity_and_pump(self.delta_ca_mhz, delta_cp)
    }

    pub fn settings(&self) -> SimulationSettings {
        SimulationSettings {
            pulse: self.pulse.clone(),
            dt: self.dt_us,
            dt_max: self.dt_max_us,
            tail_lifetimes: self.tail_lifetimes,
            photon_cutoff: self.photon_cutoff,
            sampling: self.sampling,
            store_every: self.store_every,
        }
    }

    pub fn pump_scan_delta_ca(&self) -> f64 {
        self.pump_delta_ca_mhz.unwrap_or(self.delta_ca_mhz)
    }

    /// Checks every invariant; `lines` maps keys to the line that set them.
    fn validate_with(&self, lines: &BTreeMap<&'static str, usize>) -> Result<(), ConfigError> {
        let fail = |key: &'static str, message: String| ConfigError::Invariant {
            line: lines.get(key).copied().unwrap_or(0),
            key: key.to_string(),
            message,
        };
        let finite = [
            ("g_mhz", self.g_mhz),
            ("omega_peak_mhz", self.omega_peak_mhz),
            ("g0_mhz", self.g0_mhz),
            ("omega0_mhz", self.omega0_mhz),
            ("kappa_mhz", self.kappa_mhz),
            ("ground_lande", self.ground_lande),
            ("excited_lande_f1", self.excited_lande_f1),
            ("hyperfine_f0_f1_mhz", self.hyperfine_f0_f1_mhz),
            ("gamma_mhz", self.gamma_mhz),
            ("delta_ca_mhz", self.delta_ca_mhz),
            ("dt_us", self.dt_us),
            ("dt_max_us", self.dt_max_us),
            ("tail_lifetimes", self.tail_lifetimes),
        ];
        for (key, v) in finite {
            if !v.is_finite() {
                return Err(fail(key, "must be finite".into()));
            }
        }
        for (key, v) in [("kappa_mhz", self.kappa_mhz), ("g_mhz", self.g_mhz), ("g0_mhz", self.g0_mhz), ("ground_lande", self.ground_lande)] {
            if v <= 0.0 {
                return Err(fail(key, format!("must be positive, got {v}")));
            }
        }
        for (key, v) in [
            ("omega_peak_mhz", self.omega_peak_mhz),
            ("omega0_mhz", self.omega0_mhz),
            ("gamma_mhz", self.gamma_mhz),
            ("tail_lifetimes", self.tail_lifetimes),
        ] {
            if v < 0.0 {
                return Err(fail(key, format!("must be non-negative, got {v}")));
            }
        }
        match self.zeeman {
            ZeemanSpec::ShiftMhz(d) if !(d.is_finite() && d >= 0.0) => {
                return Err(fail("delta_b_mhz", format!("must be non-negative, got {d}")));
            }
            ZeemanSpec::FieldGauss(b) if !(b.is_finite() && b >= 0.0) => {
                return Err(fail("b_field_gauss", format!("must be non-negative, got {b}")));
            }
            _ => {}
        }
        if let Some(d) = self.delta_cp_mhz {
            if !d.is_finite() {
                return Err(fail("delta_cp_mhz", "must be finite or `auto`".into()));
            }
        }
        if self.photon_cutoff == 0 {
            return Err(fail("photon_cutoff", "must be at least 1".into()));
        }
        if let Err(e) = self.pulse.validate() {
            let key = match self.pulse {
                PulseShape::Tabulated { .. } => "values",
                _ => "duration_us",
            };
            return Err(fail(key, e.to_string()));
        }
        if self.dt_max_us <= 0.0 {
            return Err(fail("dt_max_us", "must be positive".into()));
        }
        if !(self.dt_us > 0.0 && self.dt_us <= self.dt_max_us) {
            return Err(fail("dt_us", format!("must lie in (0, dt_max_us = {}]", self.dt_max_us)));
        }
        for (prefix, g) in [("cavity", &self.cavity_grid), ("pump", &self.pump_grid)] {
            let key = if prefix == "cavity" { "cavity_step_mhz" } else { "pump_step_mhz" };
            if !(g.start.is_finite() && g.stop.is_finite() && g.step.is_finite()) || g.step <= 0.0 || g.stop < g.start {
                return Err(fail(key, format!("{prefix} grid needs start ≤ stop and a positive step")));
            }
        }
        if let Some(d) = self.pump_delta_ca_mhz {
            if !d.is_finite() {
                return Err(fail("pump_delta_ca_mhz", "must be finite or `same`".into()));
            }
        }
        if self.trajectory_every == 0 {
            return Err(fail("trajectory_every", "must be at least 1".into()));
        }
        if self.output_dir.trim().is_empty() {
            return Err(fail("dir", "must not be empty".into()));
        }
        self.model().validate().map_err(|e| fail("kind", e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.validate_with(&BTreeMap::new())
    }

    /// Full resolved configuration; parses back to an identical value.
    pub fn to_text(&self) -> String {
        let f = |x: f64| format!("{x:?}");
        let mut out = String::new();
        out.push_str("[model]\n");
        kv(&mut out, "kind", match self.kind {
            ModelKind::Ideal => "ideal".into(),
            ModelKind::Rubidium => "rubidium".into(),
        });
        kv(&mut out, "initial_state", self.initial_state.name().into());
        kv(&mut out, "photon_cutoff", self.photon_cutoff.to_string());
        kv(&mut out, "zero_state", match self.zero_state {
            ZeroStateMode::Sink => "sink".into(),
            ZeroStateMode::Coherent => "coherent".into(),
        });
        out.push_str("\n[physics]\n");
        kv(&mut out, "g_mhz", f(self.g_mhz));
        kv(&mut out, "omega_peak_mhz", f(self.omega_peak_mhz));
        kv(&mut out, "g0_mhz", f(self.g0_mhz));
        kv(&mut out, "omega0_mhz", f(self.omega0_mhz));
        kv(&mut out, "kappa_mhz", f(self.kappa_mhz));
        match self.zeeman {
            ZeemanSpec::ShiftMhz(d) => kv(&mut out, "delta_b_mhz", f(d)),
            ZeemanSpec::FieldGauss(b) => kv(&mut out, "b_field_gauss", f(b)),
        }
        kv(&mut out, "ground_lande", f(self.ground_lande));
        kv(&mut out, "excited_lande_f1", f(self.excited_lande_f1));
        kv(&mut out, "hyperfine_f0_f1_mhz", f(self.hyperfine_f0_f1_mhz));
        kv(&mut out, "gamma_mhz", f(self.gamma_mhz));
        kv(&mut out, "delta_ca_mhz", f(self.delta_ca_mhz));
        kv(&mut out, "delta_cp_mhz", self.delta_cp_mhz.map_or("auto".into(), f));
        out.push_str("\n[pulse]\n");
        match &self.pulse {
            PulseShape::SinSquared { duration } => {
                kv(&mut out, "shape", "sin_squared".into());
                kv(&mut out, "duration_us", f(*duration));
            }
            PulseShape::Constant { duration } => {
                kv(&mut out, "shape", "constant".into());
                kv(&mut out, "duration_us", f(*duration));
            }
            PulseShape::Tabulated { times, values } => {
                let join = |v: &[f64]| v.iter().map(|x| f(*x)).collect::<Vec<_>>().join(", ");
                kv(&mut out, "shape", "tabulated".into());
                kv(&mut out, "times_us", join(times));
                kv(&mut out, "values", join(values));
            }
        }
        out.push_str("\n[numerics]\n");
        kv(&mut out, "dt_us", f(self.dt_us));
        kv(&mut out, "dt_max_us", f(self.dt_max_us));
        kv(&mut out, "tail_lifetimes", f(self.tail_lifetimes));
        kv(&mut out, "store_every", self.store_every.to_string());
        kv(&mut out, "sampling", match self.sampling {
            EnvelopeSampling::StepMidpoint => "midpoint".into(),
            EnvelopeSampling::Continuous => "continuous".into(),
        });
        out.push_str("\n[scan]\n");
        kv(&mut out, "cavity_start_mhz", f(self.cavity_grid.start));
        kv(&mut out, "cavity_stop_mhz", f(self.cavity_grid.stop));
        kv(&mut out, "cavity_step_mhz", f(self.cavity_grid.step));
        kv(&mut out, "pump_start_mhz", f(self.pump_grid.start));
        kv(&mut out, "pump_stop_mhz", f(self.pump_grid.stop));
        kv(&mut out, "pump_step_mhz", f(self.pump_grid.step));
        kv(&mut out, "pump_delta_ca_mhz", self.pump_delta_ca_mhz.map_or("same".into(), f));
        out.push_str("\n[output]\n");
        kv(&mut out, "dir", self.output_dir.clone());
        kv(&mut out, "trajectory_every", self.trajectory_every.to_string());
        out
    }
}

fn kv(out: &mut String, key: &str, value: String) {
    writeln!(out, "{key} = {value}").unwrap();
}

impl fmt::Display for ExperimentConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// `(section, key)` of every accepted key.
const SCHEMA: &[(&str, &str)] = &[
    ("model", "preset"),
    ("model", "kind"),
    ("model", "initial_state"),
    ("model", "photon_cutoff"),
    ("model", "zero_state"),
    ("physics", "g_mhz"),
    ("physics", "omega_peak_mhz"),
    ("physics", "g0_mhz"),
    ("physics", "omega0_mhz"),
    ("physics", "kappa_mhz"),
    ("physics", "delta_b_mhz"),
    ("physics", "b_field_gauss"),
    ("physics", "ground_lande"),
    ("physics", "excited_lande_f1"),
    ("physics", "hyperfine_f0_f1_mhz"),
    ("physics", "gamma_mhz"),
    ("physics", "delta_ca_mhz"),
    ("physics", "delta_cp_mhz"),
    ("pulse", "shape"),
    ("pulse", "duration_us"),
    ("pulse", "times_us"),
    ("pulse", "values"),
    ("numerics", "dt_us"),
    ("numerics", "dt_max_us"),
    ("numerics", "tail_lifetimes"),
    ("numerics", "store_every"),
    ("numerics", "sampling"),
    ("scan", "cavity_start_mhz"),
    ("scan", "cavity_stop_mhz"),
    ("scan", "cavity_step_mhz"),
    ("scan", "pump_start_mhz"),
    ("scan", "pump_stop_mhz"),
    ("scan", "pump_step_mhz"),
    ("scan", "pump_delta_ca_mhz"),
    ("output", "dir"),
    ("output", "trajectory_every"),
];

struct Entry {
    line: usize,
    key: &'static str,
    value: String,
}

impl Entry {
    fn err(&self, expected: &'static str) -> ConfigError {
        ConfigError::Type { line: self.line, key: self.key.into(), expected, value: self.value.clone() }
    }

    fn f64(&self) -> Result<f64, ConfigError> {
        self.value.parse::<f64>().map_err(|_| self.err("a number"))
    }

    fn usize(&self) -> Result<usize, ConfigError> {
        self.value.parse::<usize>().map_err(|_| self.err("a non-negative integer"))
    }

    fn f64_or(&self, word: &str) -> Result<Option<f64>, ConfigError> {
        if self.value == word {
            Ok(None)
        } else {
            self.value.parse::<f64>().map(Some).map_err(|_| self.err("a number or a keyword"))
        }
    }

    fn list(&self) -> Result<Vec<f64>, ConfigError> {
        self.value
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| self.err("a comma-separated list of numbers"))
    }
}

fn lookup(key: &str) -> Option<(&'static str, &'static str)> {
    SCHEMA.iter().find(|(_, k)| *k == key).copied()
}

fn tokenize(text: &str) -> Result<Vec<Entry>, ConfigError> {
    let mut section: Option<String> = None;
    let mut entries: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            let name = name.trim();
            if !SCHEMA.iter().any(|(s, _)| *s == name) {
                return Err(ConfigError::UnknownSection { line, section: name.into() });
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return Err(ConfigError::Syntax { line, text: raw.trim().into() });
        };
        let (k, v) = (k.trim(), v.trim());
        let (explicit, bare) = match k.split_once('.') {
            Some((s, key)) => (Some(s.trim()), key.trim()),
            None => (section.as_deref(), k),
        };
        if bare.is_empty() || v.is_empty() {
            return Err(ConfigError::Syntax { line, text: raw.trim().into() });
        }
        let Some((home, key)) = lookup(bare) else {
            return Err(ConfigError::UnknownKey { line, key: bare.into() });
        };
        if let Some(s) = explicit {
            if s != home {
                return Err(ConfigError::WrongSection { line, key: key.into(), expected: home.into(), found: s.into() });
            }
        }
        if entries.iter().any(|e| e.key == key) {
            return Err(ConfigError::Duplicate { line, key: key.into() });
        }
        entries.push(Entry { line, key, value: v.to_string() });
    }
    Ok(entries)
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let entries = tokenize(text)?;
    let preset = entries.iter().find(|e| e.key == "preset").map_or("ideal-paper", |e| e.value.as_str());
    let mut c = ExperimentConfig::preset(preset).map_err(|_| {
        let e = entries.iter().find(|e| e.key == "preset").unwrap();
        e.err("`ideal-paper` or `rb87-paper`")
    })?;
    let mut lines = BTreeMap::new();
    let (mut shape, mut duration, mut times, mut values) = (None, None, None, None);
    let (mut delta_b, mut b_field) = (None, None);
    for e in &entries {
        lines.insert(e.key, e.line);
        match e.key {
            "preset" => {}
            "kind" => {
                c.kind = match e.value.as_str() {
                    "ideal" => ModelKind::Ideal,
                    "rubidium" | "rb87" => ModelKind::Rubidium,
                    _ => return Err(e.err("`ideal` or `rubidium`")),
                }
            }
            "initial_state" => {
                c.initial_state = match e.value.as_str() {
                    "plus" | "+" => GroundState::Plus,
                    "minus" | "-" => GroundState::Minus,
                    _ => return Err(e.err("`plus` or `minus`")),
                }
            }
            "photon_cutoff" => c.photon_cutoff = e.usize()?,
            "zero_state" => {
                c.zero_state = match e.value.as_str() {
                    "sink" => ZeroStateMode::Sink,
                    "coherent" => ZeroStateMode::Coherent,
                    _ => return Err(e.err("`sink` or `coherent`")),
                }
            }
            "g_mhz" => c.g_mhz = e.f64()?,
            "omega_peak_mhz" => c.omega_peak_mhz = e.f64()?,
            "g0_mhz" => c.g0_mhz = e.f64()?,
            "omega0_mhz" => c.omega0_mhz = e.f64()?,
            "kappa_mhz" => c.kappa_mhz = e.f64()?,
            "delta_b_mhz" => delta_b = Some(e.f64()?),
            "b_field_gauss" => b_field = Some(e.f64()?),
            "ground_lande" => c.ground_lande = e.f64()?,
            "excited_lande_f1" => c.excited_lande_f1 = e.f64()?,
            "hyperfine_f0_f1_mhz" => c.hyperfine_f0_f1_mhz = e.f64()?,
            "gamma_mhz" => c.gamma_mhz = e.f64()?,
            "delta_ca_mhz" => c.delta_ca_mhz = e.f64()?,
            "delta_cp_mhz" => c.delta_cp_mhz = e.f64_or("auto")?,
            "shape" => shape = Some(e),
            "duration_us" => duration = Some(e.f64()?),
            "times_us" => times = Some(e.list()?),
            "values" => values = Some(e.list()?),
            "dt_us" => c.dt_us = e.f64()?,
            "dt_max_us" => c.dt_max_us = e.f64()?,
            "tail_lifetimes" => c.tail_lifetimes = e.f64()?,
            "store_every" => c.store_every = e.usize()?,
            "sampling" => {
                c.sampling = match e.value.as_str() {
                    "midpoint" => EnvelopeSampling::StepMidpoint,
                    "continuous" => EnvelopeSampling::Continuous,
                    _ => return Err(e.err("`midpoint` or `continuous`")),
                }
            }
            "cavity_start_mhz" => c.cavity_grid.start = e.f64()?,
            "cavity_stop_mhz" => c.cavity_grid.stop = e.f64()?,
            "cavity_step_mhz" => c.cavity_grid.step = e.f64()?,
            "pump_start_mhz" => c.pump_grid.start = e.f64()?,
            "pump_stop_mhz" => c.pump_grid.stop = e.f64()?,
            "pump_step_mhz" => c.pump_grid.step = e.f64()?,
            "pump_delta_ca_mhz" => c.pump_delta_ca_mhz = e.f64_or("same")?,
            "dir" => c.output_dir = e.value.clone(),
            "trajectory_every" => c.trajectory_every = e.usize()?,
            other => unreachable!("key `{other}` in schema but not handled"),
        }
    }

    match (delta_b, b_field) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::Invariant {
                line: lines["b_field_gauss"],
                key: "b_field_gauss".into(),
                message: "conflicts with delta_b_mhz; give only one".into(),
            })
        }
        (Some(d), None) => c.zeeman = ZeemanSpec::ShiftMhz(d),
        (None, Some(b)) => c.zeeman = ZeemanSpec::FieldGauss(b),
        (None, None) => {}
    }

    let shape_name = shape.map_or("", |e| e.value.as_str());
    if shape_name != "tabulated" && (times.is_some() || values.is_some()) {
        let key = if times.is_some() { "times_us" } else { "values" };
        return Err(ConfigError::Invariant {
            line: lines[key],
            key: key.into(),
            message: "only applies to `shape = tabulated`".into(),
        });
    }
    let keep = c.pulse.duration();
    c.pulse = match (shape, shape_name) {
        (None, _) => match c.pulse {
            PulseShape::Constant { .. } => PulseShape::Constant { duration: duration.unwrap_or(keep) },
            _ => PulseShape::SinSquared { duration: duration.unwrap_or(keep) },
        },
        (Some(_), "sin_squared") => PulseShape::SinSquared { duration: duration.unwrap_or(keep) },
        (Some(_), "constant") => PulseShape::Constant { duration: duration.unwrap_or(keep) },
        (Some(e), "tabulated") => match (times, values) {
            (Some(times), Some(values)) => PulseShape::Tabulated { times, values },
            _ => {
                return Err(ConfigError::Invariant {
                    line: e.line,
                    key: "shape".into(),
                    message: "`tabulated` needs both times_us and values".into(),
                })
            }
        },
        (Some(e), _) => return Err(e.err("`sin_squared`, `constant` or `tabulated`")),
    };

    c.validate_with(&lines)?;
    log::info!("resolved configuration:\n{}", c.to_text());
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kappa_parses_and_negative_kappa_is_named() {
        let c = parse_config("kappa_mhz = 1.25").unwrap();
        assert_eq!(c.kappa_mhz, 1.25);
        let err = parse_config("[physics]\nkappa_mhz = -1").unwrap_err();
        assert!(matches!(&err, ConfigError::Invariant { line: 2, key, .. } if key == "kappa_mhz"), "{err}");
        assert!(err.to_string().contains("kappa_mhz"));
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = parse_config("[physics]\n\nkapa_mhz = 1").unwrap_err();
        assert_eq!(err, ConfigError::UnknownKey { line: 3, key: "kapa_mhz".into() });
    }

    #[test]
    fn type_and_section_errors() {
        assert!(matches!(parse_config("dt_us = fast"), Err(ConfigError::Type { line: 1, .. })));
        assert!(matches!(parse_config("[pulse]\nkappa_mhz = 1"), Err(ConfigError::WrongSection { line: 2, .. })));
        assert!(matches!(parse_config("[bogus]"), Err(ConfigError::UnknownSection { line: 1, .. })));
        assert!(matches!(parse_config("g_mhz = 1\ng_mhz = 2"), Err(ConfigError::Duplicate { line: 2, .. })));
        assert!(matches!(parse_config("just words"), Err(ConfigError::Syntax { line: 1, .. })));
        assert!(matches!(parse_config("dt_us = 0.002"), Err(ConfigError::Invariant { .. })));
        assert!(matches!(parse_config("duration_us = 0"), Err(ConfigError::Invariant { .. })));
    }

    #[test]
    fn ideal_preset_matches_paper_parameters() {
        let c = ExperimentConfig::preset("ideal-paper").unwrap();
        assert_eq!(c.kind, ModelKind::Ideal);
        assert_eq!((c.g_mhz, c.kappa_mhz, c.delta_b_mhz(), c.omega_peak_mhz), (2.7, 1.25, 15.0, 6.0));
        assert_eq!(c.pulse, PulseShape::sin_squared(1.5));
        let m = c.model();
        assert_eq!((m.delta_p(), m.delta_cp()), (30.0, -30.0));
    }

    #[test]
    fn rb_preset_matches_paper_parameters() {
        let c = parse_config("preset = rb87-paper").unwrap();
        assert_eq!(c.kind, ModelKind::Rubidium);
        assert_eq!((c.g0_mhz, c.omega0_mhz, c.delta_b_mhz(), c.delta_ca_mhz), (6.7, 14.7, 15.0, 63.2));
        assert!((c.model().delta_ca() - 63.2).abs() < 1e-12);
    }

    #[test]
    fn field_spec_converts_to_shift() {
        let c = parse_config("b_field_gauss = 21.4").unwrap();
        assert!((c.delta_b_mhz() - 15.0).abs() / 15.0 < 5e-3);
        assert!(parse_config("b_field_gauss = 21.4\ndelta_b_mhz = 15").is_err());
    }

    #[test]
    fn round_trip_presets_and_variants() {
        for p in PRESETS {
            let c = ExperimentConfig::preset(p).unwrap();
            assert_eq!(parse_config(&c.to_text()).unwrap(), c);
        }
        let text = "physics.delta_cp_mhz = 12.5\n[pulse]\nshape = tabulated\ntimes_us = 0, 0.5, 1\nvalues = 0, 1, 0\n\
                    [model]\ninitial_state = minus\nzero_state = coherent\n[physics]\nb_field_gauss = 10.1\n\
                    [numerics]\nsampling = continuous\n[scan]\npump_delta_ca_mhz = 7.1";
        let c = parse_config(text).unwrap();
        assert_eq!(parse_config(&c.to_text()).unwrap(), c);
        assert_eq!(c.delta_cp_mhz, Some(12.5));
    }

    #[test]
    fn comments_and_blank_lines_ignored() {
        let c = parse_config("# header\n\n[physics]   \ng_mhz = 3.0  # trailing\n").unwrap();
        assert_eq!(c.g_mhz, 3.0);
    }
}
