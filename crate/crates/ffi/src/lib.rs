//! C ABI over the `kerrmod` library.
//!
//! Every fallible function returns a [`KmStatus`]; on failure the message is
//! kept per thread and read back with [`km_last_error_message`]. Objects
//! crossing the boundary are opaque handles released with their `_free`
//! function. Panics never unwind into the caller; they map to
//! [`KmStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use kerrmod::analytic::{superposition_time, unitary_density_matrix, UnitaryKerrSpec};
use kerrmod::cli;
use kerrmod::config::{parse_config, Command, RunSpec};
use kerrmod::qsd::{run_ensemble, InitialState, TrajectoryConfig};
use kerrmod::semiclassical::integrate_mean_field;
use kerrmod::wigner::{wigner_from_rho, wigner_point, GridSpec};
use kerrmod::{Complex64, DensityMatrix, Error, OscillatorParams};

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidParameter = 3,
    Config = 4,
    StepFailure = 5,
    TruncationOverflow = 6,
    CorruptedDensity = 7,
    NoSuperpositionTime = 8,
    Stiffness = 9,
    StrobeUndefined = 10,
    Convergence = 11,
    Numerical = 12,
    Io = 13,
    OutOfRange = 14,
    Panic = 15,
}

impl From<&Error> for KmStatus {
    fn from(e: &Error) -> Self {
        match e.kind() {
            "invalid-parameter" | "dimension-guard" => KmStatus::InvalidParameter,
            "config" => KmStatus::Config,
            "step-failure" => KmStatus::StepFailure,
            "truncation-overflow" => KmStatus::TruncationOverflow,
            "corrupted-density" => KmStatus::CorruptedDensity,
            "no-superposition-time" => KmStatus::NoSuperpositionTime,
            "stiffness" => KmStatus::Stiffness,
            "strobe-undefined" => KmStatus::StrobeUndefined,
            "convergence" => KmStatus::Convergence,
            "io" => KmStatus::Io,
            _ => KmStatus::Numerical,
        }
    }
}

/// Oscillator parameters, field for field the library's `OscillatorParams`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct KmParams {
    pub delta: f64,
    pub chi0: f64,
    pub chi1: f64,
    pub mod_freq_chi: f64,
    pub phase_chi: f64,
    pub f0: f64,
    pub f1: f64,
    pub mod_freq_f: f64,
    pub gamma: f64,
    pub nbar: f64,
}

impl From<OscillatorParams> for KmParams {
    fn from(p: OscillatorParams) -> Self {
        KmParams {
            delta: p.delta,
            chi0: p.chi0,
            chi1: p.chi1,
            mod_freq_chi: p.mod_freq_chi,
            phase_chi: p.phase_chi,
            f0: p.f0,
            f1: p.f1,
            mod_freq_f: p.mod_freq_f,
            gamma: p.gamma,
            nbar: p.nbar,
        }
    }
}

impl From<KmParams> for OscillatorParams {
    fn from(p: KmParams) -> Self {
        OscillatorParams {
            delta: p.delta,
            chi0: p.chi0,
            chi1: p.chi1,
            mod_freq_chi: p.mod_freq_chi,
            phase_chi: p.phase_chi,
            f0: p.f0,
            f1: p.f1,
            mod_freq_f: p.mod_freq_f,
            gamma: p.gamma,
            nbar: p.nbar,
        }
    }
}

/// Parsed run specification.
pub struct KmSpec(RunSpec);

/// Density matrix in a truncated Fock basis.
pub struct KmDensity(DensityMatrix);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn fail(status: KmStatus, msg: impl Into<String>) -> KmStatus {
    set_last_error(msg.into());
    status
}

/// Runs `f` with panics contained; maps library errors to status codes.
fn guard(f: impl FnOnce() -> Result<(), KmStatus>) -> KmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error(String::new());
            KmStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            fail(KmStatus::Panic, format!("internal panic: {msg}"))
        }
    }
}

fn lib_err(e: Error) -> KmStatus {
    fail(KmStatus::from(&e), e.to_string())
}

fn null(what: &str) -> KmStatus {
    fail(KmStatus::NullPointer, format!("`{what}` is null"))
}

/// # Safety
/// `s` is null or a NUL-terminated string.
unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, KmStatus> {
    if s.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(s)
        .to_str()
        .map_err(|_| fail(KmStatus::InvalidUtf8, format!("`{what}` is not UTF-8")))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn km_version() -> *const c_char {
    static VERSION: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    VERSION.as_ptr().cast()
}

/// Message of the most recent failure on this thread, or an empty string.
/// The pointer stays valid until the next call into the library from the
/// same thread.
#[no_mangle]
pub extern "C" fn km_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Writes the library defaults (γ = 1, everything else 0) to `out`.
///
/// # Safety
/// `out` is null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn km_params_default(out: *mut KmParams) -> KmStatus {
    if out.is_null() {
        return null("out");
    }
    out.write(OscillatorParams::default().into());
    KmStatus::Ok
}

/// Checks the parameter invariants.
///
/// # Safety
/// `p` is null or points to a valid `KmParams`.
#[no_mangle]
pub unsafe extern "C" fn km_params_validate(p: *const KmParams) -> KmStatus {
    guard(|| {
        let p = p.as_ref().ok_or_else(|| null("p"))?;
        OscillatorParams::from(*p).validate().map_err(lib_err)
    })
}

/// Parses a TOML run specification or a manifest JSON document.
/// `command` may be null to use the document's own `command` key.
///
/// # Safety
/// `text` and a non-null `command` are NUL-terminated strings; `out` is
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn km_spec_parse(text: *const c_char, command: *const c_char, out: *mut *mut KmSpec) -> KmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let text = read_str(text, "text")?;
        let command = if command.is_null() {
            None
        } else {
            let name = read_str(command, "command")?;
            Some(
                Command::parse(name)
                    .ok_or_else(|| fail(KmStatus::Config, format!("unknown command `{name}`")))?,
            )
        };
        let spec = parse_config(text, command).map_err(lib_err)?;
        out.write(Box::into_raw(Box::new(KmSpec(spec))));
        Ok(())
    })
}

/// Copies the spec's oscillator parameters to `out`.
///
/// # Safety
/// `spec` is a live handle from [`km_spec_parse`]; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn km_spec_params(spec: *const KmSpec, out: *mut KmParams) -> KmStatus {
    let (Some(spec), false) = (spec.as_ref(), out.is_null()) else {
        return null("spec or out");
    };
    out.write(spec.0.params.into());
    KmStatus::Ok
}

/// Replaces the master seed.
///
/// # Safety
/// `spec` is a live handle from [`km_spec_parse`].
#[no_mangle]
pub unsafe extern "C" fn km_spec_set_seed(spec: *mut KmSpec, seed: u64) -> KmStatus {
    let Some(spec) = spec.as_mut() else {
        return null("spec");
    };
    spec.0.set_seed(seed);
    KmStatus::Ok
}

/// Executes the spec and writes its output files to `out_dir` (null keeps
/// the spec's own directory). `passed` receives 1 or 0 for commands with a
/// pass/fail verdict and -1 otherwise; it may be null.
///
/// # Safety
/// `spec` is a live handle; `out_dir` is null or NUL-terminated; `passed` is
/// null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn km_spec_run(spec: *const KmSpec, out_dir: *const c_char, passed: *mut i32) -> KmStatus {
    guard(|| {
        let spec = spec.as_ref().ok_or_else(|| null("spec"))?;
        let mut run = spec.0.clone();
        if !out_dir.is_null() {
            run.output_dir = PathBuf::from(read_str(out_dir, "out_dir")?);
        }
        let outcome = cli::run(&run).map_err(lib_err)?;
        if !passed.is_null() {
            passed.write(outcome.passed.map_or(-1, i32::from));
        }
        Ok(())
    })
}

/// # Safety
/// `spec` is null or a handle from [`km_spec_parse`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn km_spec_free(spec: *mut KmSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Ensemble-averaged density matrix at time `t` from `n_traj` stochastic
/// trajectories started in the coherent state `alpha`. Deterministic in
/// `seed`.
///
/// # Safety
/// `p` points to valid parameters; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn km_ensemble_density(
    p: *const KmParams,
    dim: usize,
    n_traj: usize,
    seed: u64,
    alpha_re: f64,
    alpha_im: f64,
    t: f64,
    out: *mut *mut KmDensity,
) -> KmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let p = OscillatorParams::from(*p.as_ref().ok_or_else(|| null("p"))?);
        let mut cfg = TrajectoryConfig::new(dim, t, vec![t]);
        cfg.seed = seed;
        cfg.initial_state = InitialState::Coherent(Complex64::new(alpha_re, alpha_im));
        let ens = run_ensemble(n_traj, &cfg, &p, &[t]).map_err(lib_err)?;
        let rho = ens.rho.into_iter().next().map(|(_, r)| r).ok_or_else(|| {
            fail(KmStatus::Numerical, "ensemble returned no density matrix")
        })?;
        out.write(Box::into_raw(Box::new(KmDensity(rho))));
        Ok(())
    })
}

/// Closed-form density matrix of the lossless, undriven oscillator with a
/// modulated Kerr term, started in the coherent state `alpha`.
///
/// # Safety
/// `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn km_analytic_density(
    alpha_re: f64,
    alpha_im: f64,
    chi0: f64,
    chi1: f64,
    delta_mod: f64,
    phase_chi: f64,
    dim: usize,
    t: f64,
    out: *mut *mut KmDensity,
) -> KmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(ptr::null_mut());
        let spec = UnitaryKerrSpec {
            alpha0: Complex64::new(alpha_re, alpha_im),
            chi0,
            chi1,
            delta_mod,
            phase_chi,
            dim,
        };
        let rho = unitary_density_matrix(t, &spec).map_err(lib_err)?;
        out.write(Box::into_raw(Box::new(KmDensity(rho))));
        Ok(())
    })
}

/// First time at which the accumulated Kerr phase reaches π/2.
///
/// # Safety
/// `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn km_superposition_time(
    chi0: f64,
    chi1: f64,
    delta_mod: f64,
    phase_chi: f64,
    out: *mut f64,
) -> KmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = UnitaryKerrSpec {
            alpha0: Complex64::new(0.0, 0.0),
            chi0,
            chi1,
            delta_mod,
            phase_chi,
            dim: 1,
        };
        out.write(superposition_time(&spec).map_err(lib_err)?);
        Ok(())
    })
}

/// # Safety
/// `rho` is null or a live density handle.
#[no_mangle]
pub unsafe extern "C" fn km_density_dim(rho: *const KmDensity) -> usize {
    rho.as_ref().map_or(0, |r| r.0.dim())
}

/// Reads ρ_nm.
///
/// # Safety
/// `rho` is a live density handle; `re` and `im` are valid for writes.
#[no_mangle]
pub unsafe extern "C" fn km_density_get(rho: *const KmDensity, n: usize, m: usize, re: *mut f64, im: *mut f64) -> KmStatus {
    let Some(rho) = rho.as_ref() else {
        return null("rho");
    };
    if re.is_null() || im.is_null() {
        return null("re or im");
    }
    let dim = rho.0.dim();
    if n >= dim || m >= dim {
        return fail(KmStatus::OutOfRange, format!("index ({n}, {m}) outside dimension {dim}"));
    }
    let z = rho.0.get(n, m);
    re.write(z.re);
    im.write(z.im);
    KmStatus::Ok
}

/// Mean excitation number and Mandel Q (NaN when ⟨n⟩ = 0).
///
/// # Safety
/// `rho` is a live density handle; `mean_n` and `q` are valid for writes.
#[no_mangle]
pub unsafe extern "C" fn km_density_moments(rho: *const KmDensity, mean_n: *mut f64, q: *mut f64) -> KmStatus {
    let Some(rho) = rho.as_ref() else {
        return null("rho");
    };
    if mean_n.is_null() || q.is_null() {
        return null("mean_n or q");
    }
    let (n, n2) = rho.0.moments();
    mean_n.write(n);
    q.write(if n > 0.0 { (n2 - n * n) / n - 1.0 } else { f64::NAN });
    KmStatus::Ok
}

/// # Safety
/// `rho` is null or a density handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn km_density_free(rho: *mut KmDensity) {
    if !rho.is_null() {
        drop(Box::from_raw(rho));
    }
}

/// Wigner function at the phase-space point x + iy.
///
/// # Safety
/// `rho` is a live density handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn km_wigner_point(rho: *const KmDensity, x: f64, y: f64, out: *mut f64) -> KmStatus {
    guard(|| {
        let rho = rho.as_ref().ok_or_else(|| null("rho"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        out.write(wigner_point(&rho.0, x, y).0);
        Ok(())
    })
}

/// Wigner function on an `nx` × `ny` cell-centred grid over
/// [x_min, x_max] × [y_min, y_max]. `out` receives nx·ny values with
/// `out[i * ny + j]` at (x_i, y_j).
///
/// # Safety
/// `rho` is a live density handle; `out` is valid for `nx * ny` writes.
#[no_mangle]
pub unsafe extern "C" fn km_wigner_grid(
    rho: *const KmDensity,
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
    nx: usize,
    ny: usize,
    out: *mut f64,
) -> KmStatus {
    guard(|| {
        let rho = rho.as_ref().ok_or_else(|| null("rho"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let spec = GridSpec {
            x_min,
            x_max,
            y_min,
            y_max,
            nx,
            ny,
        };
        let grid = wigner_from_rho(&rho.0, &spec).map_err(lib_err)?;
        std::slice::from_raw_parts_mut(out, grid.values.len()).copy_from_slice(&grid.values);
        Ok(())
    })
}

/// Integrates the mean-field equation from `alpha` and samples the solution
/// at the `n` ascending `times`.
///
/// # Safety
/// `p` points to valid parameters; `times` is valid for `n` reads;
/// `out_re` and `out_im` are valid for `n` writes.
#[no_mangle]
pub unsafe extern "C" fn km_mean_field(
    p: *const KmParams,
    alpha_re: f64,
    alpha_im: f64,
    times: *const f64,
    n: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> KmStatus {
    guard(|| {
        let p = OscillatorParams::from(*p.as_ref().ok_or_else(|| null("p"))?);
        if times.is_null() || out_re.is_null() || out_im.is_null() {
            return Err(null("times, out_re or out_im"));
        }
        let times = std::slice::from_raw_parts(times, n);
        let path = integrate_mean_field(Complex64::new(alpha_re, alpha_im), times, &p).map_err(lib_err)?;
        for (k, z) in path.iter().enumerate() {
            out_re.add(k).write(z.re);
            out_im.add(k).write(z.im);
        }
        Ok(())
    })
}
