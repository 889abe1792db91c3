//! Model parameters, dimensionless scaling and the JSON run configuration.
//!
//! A configuration document has three sections:
//!
//! ```json
//! {
//!   "trap":       { "a": 0, "q": 0.4, "omega0": 2.24, "delta": 0, "kbar": 0.29, "gamma": 0 },
//!   "numerics":   { "n_grid": 8192, "x_max": 80, "t_end": "500pi", "window": ["450pi", "500pi"] },
//!   "experiment": { "type": "quantum", "preset": "fig1" }
//! }
//! ```
//!
//! Times may be given as numbers or as multiples of π (`"450pi"`). When a
//! preset is named, the document is merged over the preset table entry.
//! Unknown keys are rejected.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::floquet;
use crate::grid::Basis;

/// Reduced Planck constant in J s.
pub const HBAR: f64 = 1.054_571_817e-34;

/// Caption parameter sets, shipped as data.
pub const PRESETS_JSON: &str = include_str!("presets.json");

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Ion mass in kg.
    pub mass: f64,
    /// Trap drive frequency ω in rad/s.
    pub trap_frequency: f64,
    /// Standing-wave wave number in 1/m.
    pub wave_number: f64,
    pub rabi_frequency: f64,
    pub laser_frequency: f64,
    pub transition_frequency: f64,
    pub decay_rate: f64,
    pub a_raw: f64,
    pub q_raw: f64,
}

/// Dimensionless model parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapParams {
    pub a: f64,
    pub q: f64,
    /// Scaled Rabi frequency Ω₀.
    pub omega0: f64,
    /// Scaled detuning Δ.
    pub delta: f64,
    /// Effective Planck constant k̄.
    pub kbar: f64,
    /// Scaled decay rate γ.
    pub gamma: f64,
}

impl TrapParams {
    pub fn new(a: f64, q: f64, omega0: f64, delta: f64, kbar: f64, gamma: f64) -> Result<Self> {
        let p = Self {
            a,
            q,
            omega0,
            delta,
            kbar,
            gamma,
        };
        p.validate()?;
        Ok(p)
    }

    /// Parameter checks, including stability of the trap.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("trap.a", self.a),
            ("trap.q", self.q),
            ("trap.omega0", self.omega0),
            ("trap.delta", self.delta),
            ("trap.kbar", self.kbar),
            ("trap.gamma", self.gamma),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(name, "must be finite"));
            }
        }
        if self.kbar <= 0.0 {
            return Err(Error::invalid("trap.kbar", "must be positive"));
        }
        if self.gamma < 0.0 {
            return Err(Error::invalid("trap.gamma", "must be non-negative"));
        }
        if self.omega0 < 0.0 {
            return Err(Error::invalid("trap.omega0", "must be non-negative"));
        }
        match floquet::solve_mathieu_sampled(self.a, self.q, 1e-10, 64) {
            Ok(_) => Ok(()),
            Err(Error::UnstableTrap { modulus, .. }) => Err(Error::invalid(
                "trap.q",
                format!(
                    "(a={}, q={}) is outside the Mathieu stability region (|multiplier| = {modulus:.6})",
                    self.a, self.q
                ),
            )),
            Err(e) => Err(Error::invalid("trap.q", e.to_string())),
        }
    }
}

/// Converts laboratory parameters to the dimensionless model.
///
/// Time is scaled as `t = ω t̃ / 2`, so the decay term keeps the form
/// `-i k̄ (γ/2) σ₊σ₋` with `γ = 2 γ̃ / ω`.
pub fn scale_to_dimensionless(phys: &PhysicalParams) -> Result<TrapParams> {
    if !(phys.mass > 0.0) {
        return Err(Error::invalid("mass", "must be positive"));
    }
    if !(phys.trap_frequency > 0.0) {
        return Err(Error::invalid("trap_frequency", "must be positive"));
    }
    if !(phys.wave_number > 0.0) {
        return Err(Error::invalid("wave_number", "must be positive"));
    }
    let w = phys.trap_frequency;
    let kbar = 2.0 * phys.wave_number.powi(2) * HBAR / (phys.mass * w);
    TrapParams::new(
        phys.a_raw,
        phys.q_raw,
        phys.rabi_frequency / w,
        (phys.laser_frequency - phys.transition_frequency) / w,
        kbar,
        2.0 * phys.decay_rate / w,
    )
}

/// Inverse of [`scale_to_dimensionless`] for a given mass, drive frequency,
/// wave number and transition frequency.
pub fn to_physical(
    trap: &TrapParams,
    mass: f64,
    trap_frequency: f64,
    wave_number: f64,
    transition_frequency: f64,
) -> PhysicalParams {
    PhysicalParams {
        mass,
        trap_frequency,
        wave_number,
        rabi_frequency: trap.omega0 * trap_frequency,
        laser_frequency: transition_frequency + trap.delta * trap_frequency,
        transition_frequency,
        decay_rate: 0.5 * trap.gamma * trap_frequency,
        a_raw: trap.a,
        q_raw: trap.q,
    }
}

/// Initial internal state of the ion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InternalState {
    /// `(|g⟩ + |e⟩)/√2`
    Superposition,
    Ground,
    Excited,
}

impl InternalState {
    /// Amplitudes `(c_g, c_e)`.
    pub fn amplitudes(self) -> [f64; 2] {
        match self {
            InternalState::Superposition => [std::f64::consts::FRAC_1_SQRT_2; 2],
            InternalState::Ground => [1.0, 0.0],
            InternalState::Excited => [0.0, 1.0],
        }
    }

    /// Bloch vector `(r1, r2, r3)` with `r3` the inversion.
    pub fn bloch_vector(self) -> [f64; 3] {
        match self {
            InternalState::Superposition => [1.0, 0.0, 0.0],
            InternalState::Ground => [0.0, 0.0, -1.0],
            InternalState::Excited => [0.0, 0.0, 1.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Quantum,
    Classical,
    Mcwf,
    #[serde(alias = "floquet-table")]
    Floquet,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericsConfig {
    pub n_grid: usize,
    pub x_max: f64,
    /// Per-step tolerance of the split-operator step-doubling controller.
    pub tol: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub seed: u64,
    pub runs: usize,
    pub trajectories: usize,
    /// Observable recording interval (time units).
    pub stride: f64,
    pub t_end: f64,
    pub window: (f64, f64),
    /// Relative tolerance of the classical Runge–Kutta integrator.
    pub classical_tol: f64,
    pub bins: usize,
    /// Allowed probability in the outer 1% of nodes.
    pub leak_tol: f64,
}

impl NumericsConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.n_grid.is_power_of_two() {
            return Err(Error::invalid("numerics.n_grid", "must be a power of two"));
        }
        if !(self.x_max > 0.0) {
            return Err(Error::invalid("numerics.x_max", "must be positive"));
        }
        if !(self.tol > 0.0) {
            return Err(Error::invalid("numerics.tol", "must be positive"));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt_max) {
            return Err(Error::invalid(
                "numerics.dt_min",
                "need 0 < dt_min <= dt_max",
            ));
        }
        if !(self.stride > 0.0) {
            return Err(Error::invalid("numerics.stride", "must be positive"));
        }
        if !(self.t_end > 0.0) {
            return Err(Error::invalid("numerics.t_end", "must be positive"));
        }
        let (ta, tb) = self.window;
        if !(ta < tb && tb <= self.t_end * (1.0 + 1e-12)) {
            return Err(Error::invalid(
                "numerics.window",
                format!("need t_a < t_b <= t_end (got [{ta}, {tb}], t_end {})", self.t_end),
            ));
        }
        if self.runs == 0 {
            return Err(Error::invalid("numerics.runs", "must be at least 1"));
        }
        if self.trajectories == 0 {
            return Err(Error::invalid("numerics.trajectories", "must be at least 1"));
        }
        if self.bins == 0 {
            return Err(Error::invalid("numerics.bins", "must be at least 1"));
        }
        if !(self.classical_tol > 0.0) {
            return Err(Error::invalid("numerics.classical_tol", "must be positive"));
        }
        if !(self.leak_tol > 0.0) {
            return Err(Error::invalid("numerics.leak_tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentDescriptor {
    #[serde(rename = "type")]
    pub kind: ExperimentKind,
    pub preset: Option<String>,
    pub sweep: Vec<f64>,
    pub initial_state: InternalState,
    pub basis: Basis,
    /// Largest vibrational number in Floquet tables.
    pub n_max: usize,
    /// Fit window of the diffusion diagnostic; defaults to the averaging window.
    pub fit_window: Option<(f64, f64)>,
    /// Override of the classical momentum width (default `sqrt(k̄)/2`).
    pub classical_width_p: Option<f64>,
    /// Also run the reference evolutions shown next to this one: the
    /// classical ensemble, and for `mcwf` the closed (γ = 0) quantum run.
    pub compare: bool,
}

/// Fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Config {
    pub trap: TrapParams,
    pub numerics: NumericsConfig,
    pub experiment: ExperimentDescriptor,
}

impl Config {
    pub fn to_json(&self) -> Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

// ---------------------------------------------------------------------------
// document schema

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(untagged)]
enum TimeValue {
    Number(f64),
    Text(TimeText),
}

#[derive(Debug, Clone, Copy)]
struct TimeText(f64);

impl<'de> Deserialize<'de> for TimeText {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse_time(&s)
            .map(TimeText)
            .ok_or_else(|| serde::de::Error::custom(format!("cannot read `{s}` as a time")))
    }
}

impl TimeValue {
    fn value(self) -> f64 {
        match self {
            TimeValue::Number(v) => v,
            TimeValue::Text(t) => t.0,
        }
    }
}

/// Reads `"12.5"`, `"450pi"`, `"450*pi"` or `"pi"`.
pub fn parse_time(s: &str) -> Option<f64> {
    let s = s.trim();
    if let Some(head) = s.strip_suffix("pi").or_else(|| s.strip_suffix("π")) {
        let head = head.trim().trim_end_matches('*').trim();
        let factor = if head.is_empty() { 1.0 } else { head.parse::<f64>().ok()? };
        return Some(factor * PI);
    }
    s.parse().ok()
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrapDoc {
    a: f64,
    q: f64,
    omega0: f64,
    delta: f64,
    kbar: f64,
    #[serde(default)]
    gamma: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NumericsDoc {
    n_grid: Option<usize>,
    x_max: Option<f64>,
    tol: Option<f64>,
    dt_min: Option<f64>,
    dt_max: Option<f64>,
    seed: Option<u64>,
    runs: Option<usize>,
    trajectories: Option<usize>,
    stride: Option<TimeValue>,
    t_end: TimeValue,
    window: Option<[TimeValue; 2]>,
    classical_tol: Option<f64>,
    bins: Option<usize>,
    leak_tol: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentDoc {
    #[serde(rename = "type")]
    kind: ExperimentKind,
    preset: Option<String>,
    sweep: Option<SweepDoc>,
    initial_state: Option<InternalState>,
    basis: Option<Basis>,
    n_max: Option<usize>,
    fit_window: Option<[TimeValue; 2]>,
    classical_width_p: Option<f64>,
    compare: Option<bool>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum SweepDoc {
    List(Vec<f64>),
    Range(String),
}

/// Expands `"start:stop:step"` (inclusive of `stop` up to rounding).
pub fn parse_range(s: &str) -> Option<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .ok()?;
    let [start, stop, step] = parts[..] else {
        return None;
    };
    if !(step > 0.0) || stop < start {
        return None;
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Some((0..count).map(|i| start + i as f64 * step).collect())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    trap: TrapDoc,
    numerics: NumericsDoc,
    experiment: ExperimentDoc,
}

const REQUIRED: &[&str] = &[
    "trap.a",
    "trap.q",
    "trap.omega0",
    "trap.delta",
    "trap.kbar",
    "numerics.t_end",
    "experiment.type",
];

fn missing_fields(doc: &Value) -> Vec<String> {
    REQUIRED
        .iter()
        .filter(|path| {
            let mut cur = doc;
            for part in path.split('.') {
                match cur.get(part) {
                    Some(v) => cur = v,
                    None => return true,
                }
            }
            cur.is_null()
        })
        .map(|s| s.to_string())
        .collect()
}

fn merge(base: &mut Value, over: &Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k.clone(), v.clone());
                    }
                }
            }
        }
        (b, o) => *b = o.clone(),
    }
}

/// Names of the shipped presets.
pub fn preset_names() -> Vec<String> {
    let table: Map<String, Value> = serde_json::from_str(PRESETS_JSON).expect("preset table");
    table.keys().cloned().collect()
}

/// Raw preset document.
pub fn preset_document(name: &str) -> Result<Value> {
    let table: Map<String, Value> = serde_json::from_str(PRESETS_JSON).expect("preset table");
    let mut doc = table
        .get(name)
        .cloned()
        .ok_or_else(|| Error::invalid("experiment.preset", format!("unknown preset `{name}`")))?;
    if let Some(exp) = doc.get_mut("experiment").and_then(Value::as_object_mut) {
        exp.insert("preset".into(), Value::String(name.into()));
    }
    Ok(doc)
}

pub fn load_preset(name: &str) -> Result<Config> {
    resolve(preset_document(name)?)
}

/// Parses and validates a configuration document.
pub fn load_config(text: &str) -> Result<Config> {
    let doc: Value = if text.trim().is_empty() {
        Value::Object(Map::new())
    } else {
        serde_json::from_str(text).map_err(|e| Error::ConfigParse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?
    };
    if !doc.is_object() {
        return Err(Error::ConfigParse {
            line: 1,
            column: 1,
            message: "top level must be an object".into(),
        });
    }
    let preset = doc
        .get("experiment")
        .and_then(|e| e.get("preset"))
        .and_then(Value::as_str)
        .map(str::to_owned);
    let doc = match preset {
        Some(name) => {
            let mut base = preset_document(&name)?;
            merge(&mut base, &doc);
            base
        }
        None => doc,
    };
    resolve(doc)
}

fn field_error(e: serde_json::Error) -> Error {
    // serde names the offending key in the message (unknown or mistyped field)
    Error::invalid("config", e.to_string())
}

fn resolve(doc: Value) -> Result<Config> {
    let missing = missing_fields(&doc);
    if !missing.is_empty() {
        return Err(Error::MissingFields(missing));
    }
    let ConfigDoc {
        trap,
        numerics,
        experiment,
    } = serde_json::from_value(doc).map_err(field_error)?;

    let trap = TrapParams::new(
        trap.a,
        trap.q,
        trap.omega0,
        trap.delta,
        trap.kbar,
        trap.gamma,
    )?;

    let t_end = numerics.t_end.value();
    let window = numerics
        .window
        .map(|[a, b]| (a.value(), b.value()))
        .unwrap_or((0.9 * t_end, t_end));
    let dt_max = numerics.dt_max.unwrap_or(0.1);
    let numerics = NumericsConfig {
        n_grid: numerics.n_grid.unwrap_or(8192),
        x_max: numerics.x_max.unwrap_or(80.0),
        tol: numerics.tol.unwrap_or(1e-8),
        dt_min: numerics.dt_min.unwrap_or(1e-9),
        dt_max,
        seed: numerics.seed.unwrap_or(1),
        runs: numerics.runs.unwrap_or(1),
        trajectories: numerics.trajectories.unwrap_or(4096),
        stride: numerics.stride.map(TimeValue::value).unwrap_or(PI / 4.0),
        t_end,
        window,
        classical_tol: numerics.classical_tol.unwrap_or(1e-9),
        bins: numerics.bins.unwrap_or(512),
        leak_tol: numerics.leak_tol.unwrap_or(1e-6),
    };
    numerics.validate()?;

    let fit_window = experiment.fit_window.map(|[a, b]| (a.value(), b.value()));
    if let Some((a, b)) = fit_window {
        if !(a < b) {
            return Err(Error::invalid("experiment.fit_window", "need t_a < t_b"));
        }
    }
    let sweep = match experiment.sweep {
        None => Vec::new(),
        Some(SweepDoc::List(v)) => v,
        Some(SweepDoc::Range(r)) => parse_range(&r).ok_or_else(|| {
            Error::invalid("experiment.sweep", format!("cannot read `{r}` as start:stop:step"))
        })?,
    };
    if experiment.kind == ExperimentKind::Sweep && sweep.is_empty() {
        return Err(Error::invalid("experiment.sweep", "sweep needs at least one detuning"));
    }
    if let Some(w) = experiment.classical_width_p {
        if !(w >= 0.0) {
            return Err(Error::invalid("experiment.classical_width_p", "must be non-negative"));
        }
    }
    let experiment = ExperimentDescriptor {
        kind: experiment.kind,
        preset: experiment.preset,
        sweep,
        initial_state: experiment.initial_state.unwrap_or(InternalState::Superposition),
        basis: experiment.basis.unwrap_or(Basis::GroundExcited),
        n_max: experiment.n_max.unwrap_or(30),
        fit_window,
        classical_width_p: experiment.classical_width_p,
        compare: experiment.compare.unwrap_or(false),
    };
    Ok(Config {
        trap,
        numerics,
        experiment,
    })
}
