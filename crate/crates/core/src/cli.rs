//! Executes a [`RunSpec`] and writes its outputs.
//!
//! Every run writes `manifest.json` first (resolved keys, seed, version) so
//! that `kerrmod <command> --config manifest.json` reproduces it exactly.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::analytic::{superposition_time, unitary_density_matrix, UnitaryKerrSpec};
use crate::check::compare_with_master;
use crate::config::{Command, EnsembleSettings, RunSpec, WignerSource};
use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::qsd::run_ensemble;
use crate::semiclassical::{hysteresis_branches, poincare_section};
use crate::wigner::{negativity, photon_distribution, quadrature_distribution, wigner_from_rho, Axis};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    /// Pass/fail verdict for commands that check something.
    pub passed: Option<bool>,
    /// Short machine-readable summary for stdout.
    pub summary: Value,
}

impl RunSpec {
    /// Overrides the seed everywhere it is used.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        if let Some(e) = &mut self.ensemble {
            e.trajectory.seed = seed;
        }
    }
}

/// File-name fragment for a time value (`6.9` → `t6.9`).
pub fn time_tag(t: f64) -> String {
    format!("t{t}")
}

struct Out {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Out {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path)?;
        self.files.push(path);
        Ok(BufWriter::new(f))
    }

    fn json_line(&mut self, name: &str, v: &Value) -> Result<()> {
        let mut w = self.create(name)?;
        writeln!(w, "{v}")?;
        w.flush()?;
        Ok(())
    }
}

pub fn manifest(spec: &RunSpec) -> Value {
    json!({
        "version": VERSION,
        "command": spec.command.as_str(),
        "seed": spec.seed,
        "config": spec.to_flat(),
    })
}

/// Runs on the current rayon pool.
pub fn run(spec: &RunSpec) -> Result<RunOutcome> {
    fs::create_dir_all(&spec.output_dir)?;
    let mut out = Out {
        dir: spec.output_dir.clone(),
        files: Vec::new(),
    };
    {
        let mut w = out.create("manifest.json")?;
        serde_json::to_writer_pretty(&mut w, &manifest(spec)).map_err(std::io::Error::from)?;
        writeln!(w)?;
        w.flush()?;
    }
    let (passed, summary) = match spec.command {
        Command::Ensemble => run_ensemble_cmd(spec, &mut out)?,
        Command::Wigner => run_wigner_cmd(spec, &mut out)?,
        Command::Analytic => run_analytic_cmd(spec, &mut out)?,
        Command::Poincare => run_poincare_cmd(spec, &mut out)?,
        Command::Sweep => run_sweep_cmd(spec, &mut out)?,
        Command::OracleCheck => run_oracle_cmd(spec, &mut out)?,
    };
    Ok(RunOutcome {
        files: out.files,
        passed,
        summary,
    })
}

fn ensemble_of(spec: &RunSpec) -> Result<&EnsembleSettings> {
    spec.ensemble
        .as_ref()
        .ok_or_else(|| Error::config("run.dim", "this command needs the [run] section"))
}

fn write_rho(out: &mut Out, t: f64, rho: &DensityMatrix) -> Result<()> {
    let mut w = out.create(&format!("rho_{}.ndjson", time_tag(t)))?;
    rho.write_ndjson(&mut w)?;
    w.flush()?;
    Ok(())
}

fn merged_times(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut all: Vec<f64> = a.iter().chain(b).copied().collect();
    all.sort_by(f64::total_cmp);
    all.dedup();
    all
}

fn run_ensemble_cmd(spec: &RunSpec, out: &mut Out) -> Result<(Option<bool>, Value)> {
    let e = ensemble_of(spec)?;
    let res = run_ensemble(e.n_traj, &e.trajectory, &spec.params, &e.rho_times)?;
    let mut w = out.create("stats.csv")?;
    res.stats.write_csv(&mut w)?;
    w.flush()?;
    for (t, rho) in &res.rho {
        write_rho(out, *t, rho)?;
    }
    let s = &res.stats;
    let peak = s.mean_n.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let qmin = s.argmin_q().map(|k| json!({"t": s.times[k], "q": s.q[k]}));
    let qmax = s.argmax_q().map(|k| json!({"t": s.times[k], "q": s.q[k]}));
    Ok((None, json!({"n_traj": s.n_traj, "peak_mean_n": peak, "q_min": qmin, "q_max": qmax})))
}

/// Writes the Wigner grid, its gnuplot block, P(x) and P_n for one state;
/// returns the negativity record.
fn wigner_outputs(spec: &RunSpec, out: &mut Out, t: f64, rho: &DensityMatrix) -> Result<Value> {
    let g = wigner_from_rho(rho, &spec.wigner.grid)?;
    let tag = time_tag(t);
    let mut w = out.create(&format!("wigner_{tag}.csv"))?;
    g.write_csv(&mut w)?;
    w.flush()?;
    let mut w = out.create(&format!("wigner_{tag}.dat"))?;
    g.write_gnuplot(&mut w)?;
    w.flush()?;
    let px = quadrature_distribution(&g, Axis::X);
    if px.truncated_support {
        eprintln!("warning: Wigner grid does not contain the support at t = {t}; P(x) is truncated");
    }
    let mut w = out.create(&format!("px_{tag}.csv"))?;
    writeln!(w, "x,p")?;
    for (x, p) in px.coords.iter().zip(&px.values) {
        writeln!(w, "{x:.16e},{p:.16e}")?;
    }
    w.flush()?;
    let mut w = out.create(&format!("pn_{tag}.csv"))?;
    writeln!(w, "n,p")?;
    for (n, p) in photon_distribution(rho).iter().enumerate() {
        writeln!(w, "{n},{p:.16e}")?;
    }
    w.flush()?;
    let neg = negativity(&g);
    Ok(json!({"min": neg.min, "neg_volume": neg.neg_volume, "t": t}))
}

fn unitary_spec(spec: &RunSpec) -> Result<UnitaryKerrSpec> {
    let a = spec
        .analytic
        .as_ref()
        .ok_or_else(|| Error::config("analytic.dim", "this command needs the [analytic] section"))?;
    Ok(UnitaryKerrSpec {
        alpha0: a.alpha0,
        chi0: spec.params.chi0,
        chi1: spec.params.chi1,
        delta_mod: spec.params.mod_freq_chi,
        phase_chi: spec.params.phase_chi,
        dim: a.dim,
    })
}

fn analytic_time(spec: &RunSpec, u: &UnitaryKerrSpec) -> Result<f64> {
    match spec.analytic.as_ref().and_then(|a| a.t) {
        Some(t) => Ok(t),
        None => superposition_time(u),
    }
}

fn run_wigner_cmd(spec: &RunSpec, out: &mut Out) -> Result<(Option<bool>, Value)> {
    let states: Vec<(f64, DensityMatrix)> = match spec.wigner.source {
        WignerSource::Analytic => {
            let u = unitary_spec(spec)?;
            let t = analytic_time(spec, &u)?;
            vec![(t, unitary_density_matrix(t, &u)?)]
        }
        WignerSource::Ensemble => {
            let e = ensemble_of(spec)?;
            let rho_times = merged_times(&spec.wigner.times, &e.rho_times);
            let res = run_ensemble(e.n_traj, &e.trajectory, &spec.params, &rho_times)?;
            let mut w = out.create("stats.csv")?;
            res.stats.write_csv(&mut w)?;
            w.flush()?;
            for (t, rho) in &res.rho {
                write_rho(out, *t, rho)?;
            }
            res.rho
                .into_iter()
                .filter(|(t, _)| spec.wigner.times.contains(t))
                .collect()
        }
    };
    if spec.wigner.source == WignerSource::Analytic {
        for (t, rho) in &states {
            write_rho(out, *t, rho)?;
        }
    }
    let mut records = Vec::with_capacity(states.len());
    for (t, rho) in &states {
        records.push(wigner_outputs(spec, out, *t, rho)?);
    }
    let most_negative = records
        .iter()
        .min_by(|a, b| a["min"].as_f64().unwrap_or(0.0).total_cmp(&b["min"].as_f64().unwrap_or(0.0)))
        .cloned()
        .unwrap_or_else(|| json!({"min": null, "neg_volume": null, "t": null}));
    out.json_line("negativity.json", &most_negative)?;
    Ok((None, json!({"negativity": most_negative, "times": spec.wigner.times})))
}

fn run_analytic_cmd(spec: &RunSpec, out: &mut Out) -> Result<(Option<bool>, Value)> {
    let u = unitary_spec(spec)?;
    let t_sup = superposition_time(&u).ok();
    let t = analytic_time(spec, &u)?;
    let rho = unitary_density_matrix(t, &u)?;
    write_rho(out, t, &rho)?;
    let record = json!({
        "t": t,
        "phase": crate::analytic::phase_accum(t, &u),
        "superposition_time": t_sup,
    });
    out.json_line("analytic.json", &record)?;
    Ok((None, record))
}

fn run_poincare_cmd(spec: &RunSpec, out: &mut Out) -> Result<(Option<bool>, Value)> {
    let s = spec
        .poincare
        .as_ref()
        .ok_or_else(|| Error::config("poincare.n_points", "this command needs the [poincare] section"))?;
    let sec = poincare_section(s.alpha0, &spec.params, s.n_points, s.t0, s.transient)?;
    let mut w = out.create("poincare.csv")?;
    sec.write_csv(&mut w)?;
    w.flush()?;
    Ok((
        None,
        json!({"points": sec.points.len(), "strobe_period": sec.strobe_period, "bounding_box_area": sec.bounding_box_area()}),
    ))
}

fn run_sweep_cmd(spec: &RunSpec, out: &mut Out) -> Result<(Option<bool>, Value)> {
    let s = spec
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep.f_min", "this command needs the [sweep] section"))?;
    // the sweep reads the stationary part of the model only
    let p = crate::model::OscillatorParams {
        f0: 0.0,
        f1: 0.0,
        chi1: 0.0,
        ..spec.params
    };
    let (up, down) = hysteresis_branches(&p, &s.values())?;
    let mut w = out.create("sweep.csv")?;
    writeln!(w, "f,intensity,branch")?;
    for (branch, pts) in [("up", &up), ("down", &down)] {
        for pt in pts.iter() {
            writeln!(w, "{:.16e},{:.16e},{branch}", pt.f, pt.intensity)?;
        }
    }
    w.flush()?;
    let window = crate::semiclassical::bistable_window(&up, &down, 1e-3);
    Ok((
        None,
        json!({"points": up.len(), "bistable_from": window.first(), "bistable_to": window.last()}),
    ))
}

fn run_oracle_cmd(spec: &RunSpec, out: &mut Out) -> Result<(Option<bool>, Value)> {
    let e = ensemble_of(spec)?;
    let report = compare_with_master(e.n_traj, &e.trajectory, &spec.params, spec.oracle_n_sigma)?;
    let v = serde_json::to_value(&report).map_err(std::io::Error::from)?;
    out.json_line("oracle.json", &v)?;
    let failures = report.failures().count();
    Ok((
        Some(report.pass),
        json!({"pass": report.pass, "failed_times": failures, "rho_max_abs_diff": report.rho_max_abs_diff}),
    ))
}

/// Machine-readable error record written to stderr by the binary.
pub fn error_record(e: &Error) -> Value {
    let mut v = json!({"error": e.kind(), "message": e.to_string()});
    if let Error::Config { key, .. } = e {
        v["key"] = Value::from(key.clone());
    }
    if let Error::Trajectory { index, .. } = e {
        v["trajectory"] = Value::from(*index);
    }
    v
}

/// Reads and parses a config file.
pub fn load_spec(path: &Path, command: Option<Command>) -> Result<RunSpec> {
    let text = fs::read_to_string(path)?;
    crate::config::parse_config(&text, command)
}
