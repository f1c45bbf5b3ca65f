//! Run specifications: a flat set of dotted keys (`model.delta`,
//! `run.n_traj`, …) read from TOML, or from the `config` object of a
//! previously written `manifest.json`.
//!
//! Every key is checked against the schema below before anything else, so a
//! misspelled key is reported by name instead of being silently ignored.

use std::collections::BTreeMap;
use std::path::PathBuf;

use num_complex::Complex64;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::OscillatorParams;
use crate::qsd::{uniform_times, InitialState, TrajectoryConfig};
use crate::wigner::GridSpec;

pub type FlatConfig = BTreeMap<String, Value>;

/// Every accepted key.
pub const KNOWN_KEYS: &[&str] = &[
    "command",
    "model.delta",
    "model.chi0",
    "model.chi1",
    "model.mod_freq_chi",
    "model.phase_chi",
    "model.f0",
    "model.f1",
    "model.mod_freq_f",
    "model.gamma",
    "model.nbar",
    "run.n_traj",
    "run.seed",
    "run.dt",
    "run.t_end",
    "run.dim",
    "run.sample_step",
    "run.sample_times",
    "run.rho_times",
    "run.initial",
    "run.alpha0_re",
    "run.alpha0_im",
    "run.fock_n",
    "run.tail_band",
    "run.tail_threshold",
    "wigner.source",
    "wigner.times",
    "wigner.x_min",
    "wigner.x_max",
    "wigner.y_min",
    "wigner.y_max",
    "wigner.nx",
    "wigner.ny",
    "analytic.alpha0_re",
    "analytic.alpha0_im",
    "analytic.dim",
    "analytic.t",
    "poincare.n_points",
    "poincare.t0",
    "poincare.transient",
    "poincare.alpha0_re",
    "poincare.alpha0_im",
    "sweep.f_min",
    "sweep.f_max",
    "sweep.f_step",
    "oracle.n_sigma",
    "output.dir",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Ensemble,
    Wigner,
    Analytic,
    Poincare,
    Sweep,
    OracleCheck,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Ensemble,
        Command::Wigner,
        Command::Analytic,
        Command::Poincare,
        Command::Sweep,
        Command::OracleCheck,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Command::Ensemble => "ensemble",
            Command::Wigner => "wigner",
            Command::Analytic => "analytic",
            Command::Poincare => "poincare",
            Command::Sweep => "sweep",
            Command::OracleCheck => "oracle-check",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WignerSource {
    Ensemble,
    Analytic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SampleGrid {
    Step(f64),
    Times(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSettings {
    pub trajectory: TrajectoryConfig,
    pub n_traj: usize,
    pub samples: SampleGrid,
    pub rho_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerSettings {
    pub source: WignerSource,
    pub times: Vec<f64>,
    pub grid: GridSpec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticSettings {
    pub alpha0: Complex64,
    pub dim: usize,
    /// Evaluation time; the superposition time when absent.
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoincareSettings {
    pub n_points: usize,
    pub t0: f64,
    pub transient: f64,
    pub alpha0: Complex64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub f_min: f64,
    pub f_max: f64,
    pub f_step: f64,
}

impl SweepSettings {
    pub fn values(&self) -> Vec<f64> {
        let n = ((self.f_max - self.f_min) / self.f_step + 1e-9).floor() as usize;
        (0..=n).map(|k| self.f_min + k as f64 * self.f_step).collect()
    }
}

/// A fully resolved, validated run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    pub params: OscillatorParams,
    pub seed: u64,
    pub ensemble: Option<EnsembleSettings>,
    pub wigner: WignerSettings,
    pub analytic: Option<AnalyticSettings>,
    pub poincare: Option<PoincareSettings>,
    pub sweep: Option<SweepSettings>,
    pub oracle_n_sigma: f64,
    pub output_dir: PathBuf,
}

/// Reads the raw key/value pairs of a TOML document or a manifest.
pub fn flatten_document(text: &str) -> Result<FlatConfig> {
    let mut out = FlatConfig::new();
    if text.trim_start().starts_with('{') {
        let doc: Value = serde_json::from_str(text)
            .map_err(|e| Error::config("<document>", format!("malformed manifest JSON: {e}")))?;
        let Some(cfg) = doc.get("config").and_then(Value::as_object) else {
            return Err(Error::config("config", "manifest has no `config` object"));
        };
        for (k, v) in cfg {
            out.insert(k.clone(), v.clone());
        }
        return Ok(out);
    }
    let table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<document>", format!("malformed TOML: {}", e.message())))?;
    flatten_table(&table, "", &mut out)?;
    Ok(out)
}

fn flatten_table(t: &toml::Table, prefix: &str, out: &mut FlatConfig) -> Result<()> {
    for (k, v) in t {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(sub) => flatten_table(sub, &key, out)?,
            other => {
                let json = serde_json::to_value(other)
                    .map_err(|e| Error::config(key.clone(), format!("unsupported value: {e}")))?;
                out.insert(key, json);
            }
        }
    }
    Ok(())
}

struct Keys {
    map: FlatConfig,
}

impl Keys {
    fn has(&self, key: &str) -> bool {
        self.map.contains_key(key)
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(v) => v
                .as_f64()
                .filter(|x| x.is_finite())
                .map(Some)
                .ok_or_else(|| Error::config(key, format!("expected a finite number, got {v}"))),
        }
    }

    fn f64_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.f64(key)?.unwrap_or(default))
    }

    fn req_f64(&mut self, key: &str) -> Result<f64> {
        self.f64(key)?.ok_or_else(|| missing(key))
    }

    fn u64(&mut self, key: &str) -> Result<Option<u64>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(v) => v
                .as_u64()
                .map(Some)
                .ok_or_else(|| Error::config(key, format!("expected a non-negative integer, got {v}"))),
        }
    }

    fn usize(&mut self, key: &str) -> Result<Option<usize>> {
        match self.u64(key)? {
            None => Ok(None),
            Some(v) => usize::try_from(v)
                .map(Some)
                .map_err(|_| Error::config(key, "integer out of range")),
        }
    }

    fn req_usize(&mut self, key: &str) -> Result<usize> {
        self.usize(key)?.ok_or_else(|| missing(key))
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(v) => Err(Error::config(key, format!("expected a string, got {v}"))),
        }
    }

    fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .map(|v| {
                    v.as_f64()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| Error::config(key, format!("expected numbers, got {v}")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(v) => Err(Error::config(key, format!("expected an array of numbers, got {v}"))),
        }
    }
}

fn missing(key: &str) -> Error {
    Error::config(key, "missing required key")
}

/// Parses and validates a run specification. `command` (from the command
/// line) takes precedence over a `command` key in the document.
pub fn parse_config(text: &str, command: Option<Command>) -> Result<RunSpec> {
    resolve(flatten_document(text)?, command)
}

/// Validates already-flattened keys.
pub fn resolve(map: FlatConfig, command: Option<Command>) -> Result<RunSpec> {
    if let Some(unknown) = map.keys().find(|k| !KNOWN_KEYS.contains(&k.as_str())) {
        return Err(Error::config(unknown.clone(), "unknown key"));
    }
    let mut keys = Keys { map };

    let doc_command = match keys.string("command")? {
        Some(s) => Some(Command::parse(&s).ok_or_else(|| Error::config("command", format!("unknown command `{s}`")))?),
        None => None,
    };
    let command = command.or(doc_command).ok_or_else(|| missing("command"))?;

    let params = OscillatorParams {
        delta: keys.f64_or("model.delta", 0.0)?,
        chi0: keys.f64_or("model.chi0", 0.0)?,
        chi1: keys.f64_or("model.chi1", 0.0)?,
        mod_freq_chi: keys.f64_or("model.mod_freq_chi", 0.0)?,
        phase_chi: keys.f64_or("model.phase_chi", 0.0)?,
        f0: keys.f64_or("model.f0", 0.0)?,
        f1: keys.f64_or("model.f1", 0.0)?,
        mod_freq_f: keys.f64_or("model.mod_freq_f", 0.0)?,
        gamma: keys.f64_or("model.gamma", 1.0)?,
        nbar: keys.f64_or("model.nbar", 0.0)?,
    };
    params.validate()?;
    let seed = keys.u64("run.seed")?.unwrap_or(0);

    let source = match keys.string("wigner.source")?.as_deref() {
        None | Some("ensemble") => WignerSource::Ensemble,
        Some("analytic") => WignerSource::Analytic,
        Some(other) => {
            return Err(Error::config("wigner.source", format!("expected `ensemble` or `analytic`, got `{other}`")))
        }
    };
    let needs_ensemble = matches!(command, Command::Ensemble | Command::OracleCheck)
        || (command == Command::Wigner && source == WignerSource::Ensemble);
    let needs_analytic =
        command == Command::Analytic || (command == Command::Wigner && source == WignerSource::Analytic);

    let ensemble = if needs_ensemble || keys.has("run.dim") {
        Some(ensemble_settings(&mut keys, seed)?)
    } else {
        None
    };

    let d = GridSpec::default();
    let grid = GridSpec {
        x_min: keys.f64_or("wigner.x_min", d.x_min)?,
        x_max: keys.f64_or("wigner.x_max", d.x_max)?,
        y_min: keys.f64_or("wigner.y_min", d.y_min)?,
        y_max: keys.f64_or("wigner.y_max", d.y_max)?,
        nx: keys.usize("wigner.nx")?.unwrap_or(d.nx),
        ny: keys.usize("wigner.ny")?.unwrap_or(d.ny),
    };
    grid.validate().map_err(|e| Error::config("wigner", e.to_string()))?;
    let default_times = ensemble
        .as_ref()
        .map(|e| vec![e.trajectory.t_end])
        .unwrap_or_default();
    let wigner_times = keys.f64_list("wigner.times")?.unwrap_or(default_times);
    if let Some(e) = &ensemble {
        if wigner_times.iter().any(|t| *t < 0.0 || *t > e.trajectory.t_end) {
            return Err(Error::config("wigner.times", "times must lie within [0, run.t_end]"));
        }
    }
    let wigner = WignerSettings {
        source,
        times: wigner_times,
        grid,
    };

    let analytic = if needs_analytic || keys.has("analytic.dim") {
        let t = keys.f64("analytic.t")?;
        Some(AnalyticSettings {
            alpha0: Complex64::new(keys.req_f64("analytic.alpha0_re")?, keys.f64_or("analytic.alpha0_im", 0.0)?),
            dim: keys.req_usize("analytic.dim")?,
            t,
        })
    } else {
        None
    };

    let poincare = if command == Command::Poincare || keys.has("poincare.n_points") {
        Some(PoincareSettings {
            n_points: keys.req_usize("poincare.n_points")?,
            t0: keys.f64_or("poincare.t0", 0.0)?,
            transient: keys.f64_or("poincare.transient", 100.0)?,
            alpha0: Complex64::new(
                keys.f64_or("poincare.alpha0_re", 0.0)?,
                keys.f64_or("poincare.alpha0_im", 0.0)?,
            ),
        })
    } else {
        None
    };

    let sweep = if command == Command::Sweep || keys.has("sweep.f_max") {
        let s = SweepSettings {
            f_min: keys.req_f64("sweep.f_min")?,
            f_max: keys.req_f64("sweep.f_max")?,
            f_step: keys.req_f64("sweep.f_step")?,
        };
        if !(s.f_step > 0.0) || s.f_max < s.f_min {
            return Err(Error::config("sweep.f_step", "need f_step > 0 and f_max ≥ f_min"));
        }
        Some(s)
    } else {
        None
    };

    let oracle_n_sigma = keys.f64_or("oracle.n_sigma", 3.0)?;
    if !(oracle_n_sigma > 0.0) {
        return Err(Error::config("oracle.n_sigma", "must be > 0"));
    }
    let output_dir = PathBuf::from(keys.string("output.dir")?.unwrap_or_else(|| "out".into()));

    // Keys that belong to sections the chosen command does not read.
    if let Some(stray) = keys.map.keys().next() {
        return Err(Error::config(
            stray.clone(),
            format!("not used by `{}` with this configuration", command.as_str()),
        ));
    }

    Ok(RunSpec {
        command,
        params,
        seed,
        ensemble,
        wigner,
        analytic,
        poincare,
        sweep,
        oracle_n_sigma,
        output_dir,
    })
}

fn ensemble_settings(keys: &mut Keys, seed: u64) -> Result<EnsembleSettings> {
    let dim = keys.req_usize("run.dim")?;
    let t_end = keys.req_f64("run.t_end")?;
    let n_traj = keys.req_usize("run.n_traj")?;
    if n_traj == 0 {
        return Err(Error::config("run.n_traj", "must be ≥ 1"));
    }
    let samples = match (keys.f64_list("run.sample_times")?, keys.f64("run.sample_step")?) {
        (Some(_), Some(_)) => {
            return Err(Error::config("run.sample_step", "give run.sample_times or run.sample_step, not both"))
        }
        (Some(times), None) => SampleGrid::Times(times),
        (None, step) => {
            let step = step.unwrap_or(0.05);
            if !(step > 0.0) {
                return Err(Error::config("run.sample_step", "must be > 0"));
            }
            SampleGrid::Step(step)
        }
    };
    let sample_times = match &samples {
        SampleGrid::Times(t) => t.clone(),
        SampleGrid::Step(s) => uniform_times(t_end, *s),
    };
    let initial_state = match keys.string("run.initial")?.as_deref() {
        None | Some("vacuum") => InitialState::Vacuum,
        Some("coherent") => InitialState::Coherent(Complex64::new(
            keys.req_f64("run.alpha0_re")?,
            keys.f64_or("run.alpha0_im", 0.0)?,
        )),
        Some("fock") => InitialState::Fock(keys.req_usize("run.fock_n")?),
        Some(other) => {
            return Err(Error::config(
                "run.initial",
                format!("expected `vacuum`, `coherent` or `fock`, got `{other}`"),
            ))
        }
    };
    let mut trajectory = TrajectoryConfig::new(dim, t_end, sample_times);
    trajectory.seed = seed;
    trajectory.initial_state = initial_state;
    trajectory.dt = keys.f64_or("run.dt", trajectory.dt)?;
    trajectory.tail_band = keys.usize("run.tail_band")?.unwrap_or(trajectory.tail_band);
    trajectory.tail_threshold = keys.f64_or("run.tail_threshold", trajectory.tail_threshold)?;
    trajectory.validate()?;
    let rho_times = keys.f64_list("run.rho_times")?.unwrap_or_default();
    if rho_times.iter().any(|t| *t < 0.0 || *t > t_end) {
        return Err(Error::config("run.rho_times", "times must lie within [0, run.t_end]"));
    }
    Ok(EnsembleSettings {
        trajectory,
        n_traj,
        samples,
        rho_times,
    })
}

fn num(x: f64) -> Value {
    Value::from(x)
}

impl RunSpec {
    /// Fully resolved keys, including defaults, such that
    /// `resolve(spec.to_flat(), None)` reproduces `spec`.
    pub fn to_flat(&self) -> FlatConfig {
        let mut m = FlatConfig::new();
        let mut put = |k: &str, v: Value| {
            m.insert(k.to_string(), v);
        };
        put("command", Value::from(self.command.as_str()));
        let p = &self.params;
        put("model.delta", num(p.delta));
        put("model.chi0", num(p.chi0));
        put("model.chi1", num(p.chi1));
        put("model.mod_freq_chi", num(p.mod_freq_chi));
        put("model.phase_chi", num(p.phase_chi));
        put("model.f0", num(p.f0));
        put("model.f1", num(p.f1));
        put("model.mod_freq_f", num(p.mod_freq_f));
        put("model.gamma", num(p.gamma));
        put("model.nbar", num(p.nbar));
        put("run.seed", Value::from(self.seed));
        if let Some(e) = &self.ensemble {
            let t = &e.trajectory;
            put("run.n_traj", Value::from(e.n_traj));
            put("run.dt", num(t.dt));
            put("run.t_end", num(t.t_end));
            put("run.dim", Value::from(t.dim));
            match &e.samples {
                SampleGrid::Step(s) => put("run.sample_step", num(*s)),
                SampleGrid::Times(ts) => put("run.sample_times", Value::from(ts.clone())),
            }
            put("run.rho_times", Value::from(e.rho_times.clone()));
            match t.initial_state {
                InitialState::Vacuum => put("run.initial", Value::from("vacuum")),
                InitialState::Coherent(a) => {
                    put("run.initial", Value::from("coherent"));
                    put("run.alpha0_re", num(a.re));
                    put("run.alpha0_im", num(a.im));
                }
                InitialState::Fock(n) => {
                    put("run.initial", Value::from("fock"));
                    put("run.fock_n", Value::from(n));
                }
            }
            put("run.tail_band", Value::from(t.tail_band));
            put("run.tail_threshold", num(t.tail_threshold));
        }
        let w = &self.wigner;
        put(
            "wigner.source",
            Value::from(match w.source {
                WignerSource::Ensemble => "ensemble",
                WignerSource::Analytic => "analytic",
            }),
        );
        put("wigner.times", Value::from(w.times.clone()));
        put("wigner.x_min", num(w.grid.x_min));
        put("wigner.x_max", num(w.grid.x_max));
        put("wigner.y_min", num(w.grid.y_min));
        put("wigner.y_max", num(w.grid.y_max));
        put("wigner.nx", Value::from(w.grid.nx));
        put("wigner.ny", Value::from(w.grid.ny));
        if let Some(a) = &self.analytic {
            put("analytic.alpha0_re", num(a.alpha0.re));
            put("analytic.alpha0_im", num(a.alpha0.im));
            put("analytic.dim", Value::from(a.dim));
            if let Some(t) = a.t {
                put("analytic.t", num(t));
            }
        }
        if let Some(s) = &self.poincare {
            put("poincare.n_points", Value::from(s.n_points));
            put("poincare.t0", num(s.t0));
            put("poincare.transient", num(s.transient));
            put("poincare.alpha0_re", num(s.alpha0.re));
            put("poincare.alpha0_im", num(s.alpha0.im));
        }
        if let Some(s) = &self.sweep {
            put("sweep.f_min", num(s.f_min));
            put("sweep.f_max", num(s.f_max));
            put("sweep.f_step", num(s.f_step));
        }
        put("oracle.n_sigma", num(self.oracle_n_sigma));
        put("output.dir", Value::from(self.output_dir.to_string_lossy().into_owned()));
        m
    }
}
