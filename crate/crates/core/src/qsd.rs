//! Quantum-state-diffusion trajectories and their ensemble reduction.
//!
//! Each trajectory obeys the Itô equation
//!
//! ```text
//! d|ψ⟩ = −iH|ψ⟩dt + Σ_j (⟨L_j⁺⟩L_j − ½L_j⁺L_j − ½⟨L_j⁺⟩⟨L_j⟩)|ψ⟩dt
//!        + Σ_j (L_j − ⟨L_j⟩)|ψ⟩ dξ_j
//! ```
//!
//! with complex Wiener increments, E[dξ dξ*] = dt and E[dξ dξ] = 0.
//!
//! The diagonal part of the linear drift, −i(Δn + χ(t)n²) − ½Σ_j L_j⁺L_j,
//! grows with the truncation size and is integrated exactly as an
//! integrating factor. The remaining drift is advanced with classical RK4 in
//! that frame (Lawson scheme) and the diffusion with an Euler–Maruyama
//! increment taken at the start of the step. The state is renormalized after
//! every step. Steps longer than the RK4 stability bound of the remaining
//! off-diagonal generator are subdivided.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::fock::{FockVector, DEFAULT_TAIL_BAND, DEFAULT_TAIL_THRESHOLD};
use crate::model::OscillatorParams;

const NORM_UNDERFLOW: f64 = 1e-8;

/// Target |hλ| for the off-diagonal generator; RK4 is stable up to ≈ 2.8.
const STABILITY_TARGET: f64 = 2.0;
const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Trajectories per block in the ensemble density accumulator.
const RHO_BLOCK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialState {
    Vacuum,
    Coherent(Complex64),
    Fock(usize),
}

impl InitialState {
    pub fn prepare(&self, dim: usize) -> Result<FockVector> {
        match *self {
            InitialState::Vacuum => Ok(FockVector::vacuum(dim)),
            InitialState::Coherent(alpha) => FockVector::coherent(alpha, dim),
            InitialState::Fock(n) => FockVector::basis(n, dim),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    pub dt: f64,
    pub t_end: f64,
    /// Ascending sample grid inside [0, t_end].
    pub sample_times: Vec<f64>,
    pub seed: u64,
    pub initial_state: InitialState,
    pub dim: usize,
    pub tail_band: usize,
    pub tail_threshold: f64,
}

impl TrajectoryConfig {
    pub fn new(dim: usize, t_end: f64, sample_times: Vec<f64>) -> Self {
        Self {
            dt: 1e-3,
            t_end,
            sample_times,
            seed: 0,
            initial_state: InitialState::Vacuum,
            dim,
            tail_band: DEFAULT_TAIL_BAND,
            tail_threshold: DEFAULT_TAIL_THRESHOLD,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= 1e-2) {
            return Err(Error::InvalidParameter(format!(
                "dt = {} must lie in (0, 1e-2]",
                self.dt
            )));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::InvalidParameter(format!("t_end = {} invalid", self.t_end)));
        }
        if self.dim < 2 {
            return Err(Error::InvalidParameter(format!("dim = {} must be ≥ 2", self.dim)));
        }
        check_times(&self.sample_times, self.t_end, "sample_times")?;
        if let InitialState::Fock(n) = self.initial_state {
            if n >= self.dim {
                return Err(Error::InvalidParameter(format!(
                    "initial Fock state {n} ≥ dim {}",
                    self.dim
                )));
            }
        }
        Ok(())
    }
}

fn check_times(times: &[f64], t_end: f64, what: &str) -> Result<()> {
    if times.iter().any(|t| !t.is_finite() || *t < 0.0 || *t > t_end) {
        return Err(Error::InvalidParameter(format!("{what} must lie in [0, {t_end}]")));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(format!("{what} must be strictly ascending")));
    }
    Ok(())
}

/// Uniform grid 0, step, 2·step, … up to and including `t_end` when it
/// falls on the grid.
pub fn uniform_times(t_end: f64, step: f64) -> Vec<f64> {
    let n = (t_end / step + 1e-9).floor() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

/// Stroboscopic grid t* + period·k, k = 0 … count−1.
pub fn strobe_times(t_star: f64, period: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| t_star + period * k as f64).collect()
}

/// Mandel Q = (⟨n²⟩ − ⟨n⟩² − ⟨n⟩)/⟨n⟩.
pub fn mandel_q(mean_n: f64, mean_n2: f64) -> Result<f64> {
    if !(mean_n > 0.0) {
        return Err(Error::UndefinedQ(mean_n));
    }
    Ok((mean_n2 - mean_n * mean_n - mean_n) / mean_n)
}

/// Single QSD integrator bound to one parameter set, with scratch buffers
/// sized for one truncation.
pub struct QsdStepper {
    params: OscillatorParams,
    c1: f64,
    c2: f64,
    sqrt_n: Vec<f64>,
    half: Vec<Complex64>,
    half_inv: Vec<Complex64>,
    full: Vec<Complex64>,
    full_inv: Vec<Complex64>,
    k: [Vec<Complex64>; 4],
    stage: Vec<Complex64>,
    noise_term: Vec<Complex64>,
}

impl QsdStepper {
    pub fn new(params: &OscillatorParams, dim: usize) -> Self {
        let (c1, c2) = params.lindblad_coeffs();
        let buf = || vec![ZERO; dim];
        Self {
            params: *params,
            c1,
            c2,
            sqrt_n: (0..=dim).map(|n| (n as f64).sqrt()).collect(),
            half: buf(),
            half_inv: buf(),
            full: buf(),
            full_inv: buf(),
            k: [buf(), buf(), buf(), buf()],
            stage: buf(),
            noise_term: buf(),
        }
    }

    pub fn params(&self) -> &OscillatorParams {
        &self.params
    }

    /// Whether the thermal channel a⁺ is present.
    pub fn has_thermal_channel(&self) -> bool {
        self.c2 != 0.0
    }

    /// ⟨a⟩ for a possibly unnormalized state.
    fn lowering_expectation(&self, psi: &[Complex64]) -> Complex64 {
        let mut acc = ZERO;
        let mut norm2 = 0.0;
        for n in 0..psi.len() {
            norm2 += psi[n].norm_sqr();
            if n + 1 < psi.len() {
                acc += psi[n].conj() * psi[n + 1] * self.sqrt_n[n + 1];
            }
        }
        if norm2 > 0.0 {
            acc / norm2
        } else {
            ZERO
        }
    }

    /// Drift minus its linear diagonal part, in the lab frame.
    fn drift(&self, psi: &[Complex64], t: f64, out: &mut [Complex64]) {
        let dim = psi.len();
        let f = self.params.drive_at(t);
        let ell = self.lowering_expectation(psi);
        let ell2 = ell.norm_sqr();
        let g1 = self.c1 * self.c1;
        let g2 = self.c2 * self.c2;
        let minus_if = Complex64::new(0.0, -f);
        let down_coef = minus_if + g1 * ell.conj();
        let up_coef = minus_if + g2 * ell;
        let diag = -0.5 * (g1 + g2) * ell2;
        for n in 0..dim {
            let down = if n + 1 < dim {
                psi[n + 1] * self.sqrt_n[n + 1]
            } else {
                ZERO
            };
            let up = if n > 0 { psi[n - 1] * self.sqrt_n[n] } else { ZERO };
            out[n] = down_coef * down + up_coef * up + psi[n] * diag;
        }
    }

    fn diffusion(&self, psi: &[Complex64], noise: [Complex64; 2], out: &mut [Complex64]) {
        let dim = psi.len();
        let ell = self.lowering_expectation(psi);
        let w1 = noise[0] * self.c1;
        let w2 = noise[1] * self.c2;
        for n in 0..dim {
            let down = if n + 1 < dim {
                psi[n + 1] * self.sqrt_n[n + 1]
            } else {
                ZERO
            };
            let up = if n > 0 { psi[n - 1] * self.sqrt_n[n] } else { ZERO };
            out[n] = w1 * (down - ell * psi[n]) + w2 * (up - ell.conj() * psi[n]);
        }
    }

    /// Integrating factor exp(−i(Δnτ + n²Φ) − ½(γ1 n + γ2 (aa⁺)_n)τ) and its
    /// inverse, by recursion on n.
    fn fill_factors(&self, out: &mut [Complex64], inv: &mut [Complex64], tau: f64, phi: f64) {
        let dim = out.len();
        let g1 = self.c1 * self.c1;
        let g2 = self.c2 * self.c2;
        let step = Complex64::from_polar(1.0, -self.params.delta * tau);
        let twice = Complex64::from_polar(1.0, -2.0 * phi);
        let mut q = Complex64::from_polar(1.0, -phi);
        let mut p = Complex64::new(1.0, 0.0);
        let decay = (-0.5 * (g1 + g2) * tau).exp();
        let mut mag = (-0.5 * g2 * tau).exp();
        for n in 0..dim {
            let m = if n + 1 < dim {
                mag
            } else {
                // (aa⁺) vanishes on the top bin
                mag * (0.5 * g2 * (n + 1) as f64 * tau).exp()
            };
            out[n] = p * m;
            inv[n] = p.conj() / m;
            p *= step * q;
            q *= twice;
            mag *= decay;
        }
    }

    /// Largest step for which RK4 on the off-diagonal generator stays
    /// inside its stability region, for any state in this truncation.
    pub fn stable_dt(&self) -> f64 {
        let p = &self.params;
        let dim = self.sqrt_n.len() - 1;
        let root = (dim as f64).sqrt();
        let f_max = p.f0.abs() + p.f1.abs();
        let g = self.c1 * self.c1 + self.c2 * self.c2;
        let lambda = 2.0 * f_max * root + g * root * root;
        if lambda > 0.0 {
            STABILITY_TARGET / lambda
        } else {
            f64::INFINITY
        }
    }

    /// Advances `psi` (unit norm) from t to t + h with the given Wiener
    /// increments and renormalizes it.
    pub fn step(
        &mut self,
        psi: &mut [Complex64],
        t: f64,
        h: f64,
        noise: [Complex64; 2],
    ) -> Result<()> {
        let dim = psi.len();
        debug_assert_eq!(dim, self.stage.len());
        let p = self.params;
        let (mut half, mut half_inv) = (std::mem::take(&mut self.half), std::mem::take(&mut self.half_inv));
        let (mut full, mut full_inv) = (std::mem::take(&mut self.full), std::mem::take(&mut self.full_inv));
        self.fill_factors(&mut half, &mut half_inv, 0.5 * h, p.chi_integral(t, t + 0.5 * h));
        self.fill_factors(&mut full, &mut full_inv, h, p.chi_integral(t, t + h));
        (self.half, self.half_inv, self.full, self.full_inv) = (half, half_inv, full, full_inv);

        let mut k = std::mem::take(&mut self.k);
        let mut scratch = std::mem::take(&mut self.stage);
        let mut noise_term = std::mem::take(&mut self.noise_term);
        let [k1, k2, k3, k4] = &mut k;

        self.drift(psi, t, k1);

        for n in 0..dim {
            scratch[n] = self.half[n] * (psi[n] + k1[n] * (0.5 * h));
        }
        self.drift(&scratch, t + 0.5 * h, k2);
        for n in 0..dim {
            k2[n] *= self.half_inv[n];
            scratch[n] = self.half[n] * (psi[n] + k2[n] * (0.5 * h));
        }
        self.drift(&scratch, t + 0.5 * h, k3);
        for n in 0..dim {
            k3[n] *= self.half_inv[n];
            scratch[n] = self.full[n] * (psi[n] + k3[n] * h);
        }
        self.drift(&scratch, t + h, k4);

        self.diffusion(psi, noise, &mut noise_term);

        let sixth = h / 6.0;
        let mut norm2 = 0.0;
        for n in 0..dim {
            let k4n = k4[n] * self.full_inv[n];
            let z = psi[n] + (k1[n] + (k2[n] + k3[n]) * 2.0 + k4n) * sixth + noise_term[n];
            let z = self.full[n] * z;
            norm2 += z.norm_sqr();
            psi[n] = z;
        }
        self.k = k;
        self.stage = scratch;
        self.noise_term = noise_term;

        let norm = norm2.sqrt();
        if !(norm >= NORM_UNDERFLOW) || !norm.is_finite() {
            return Err(Error::StepFailure { t, norm });
        }
        let inv = 1.0 / norm;
        psi.iter_mut().for_each(|z| *z *= inv);
        Ok(())
    }
}

/// Step size actually used by trajectories: `cfg.dt`, capped by the RK4
/// stability bound of the truncation.
pub fn effective_dt(cfg: &TrajectoryConfig, params: &OscillatorParams) -> f64 {
    cfg.dt.min(QsdStepper::new(params, cfg.dim).stable_dt())
}

/// One QSD step from `s` at time `t` with explicit Wiener increments
/// (dξ_1 for `a`, dξ_2 for `a⁺`).
pub fn qsd_step(
    s: &FockVector,
    t: f64,
    dt: f64,
    noise: [Complex64; 2],
    params: &OscillatorParams,
) -> Result<FockVector> {
    let mut stepper = QsdStepper::new(params, s.dim());
    let mut psi = s.amplitudes().to_vec();
    stepper.step(&mut psi, t, dt, noise)?;
    Ok(FockVector::from_vec_unchecked(psi))
}

/// Draws the complex Wiener increments for one step: independent real and
/// imaginary parts of variance dt/2.
pub fn draw_noise<R: rand::Rng + ?Sized>(rng: &mut R, dt: f64, thermal: bool) -> [Complex64; 2] {
    let s = (0.5 * dt).sqrt();
    let mut draw = || {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        Complex64::new(re * s, im * s)
    };
    let first = draw();
    let second = if thermal { draw() } else { ZERO };
    [first, second]
}

/// Per-trajectory random stream.
pub fn trajectory_rng(seed_base: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed_base.wrapping_add(index))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryOutput {
    pub times: Vec<f64>,
    pub mean_n: Vec<f64>,
    pub mean_n2: Vec<f64>,
    /// State at each sample time, when requested.
    pub states: Option<Vec<FockVector>>,
}

struct RawTrajectory {
    moments: Vec<(f64, f64)>,
    snapshots: Vec<Vec<Complex64>>,
}

/// Integrates one trajectory, recording moments at `cfg.sample_times` and
/// state snapshots at `snapshot_times`.
fn simulate(
    cfg: &TrajectoryConfig,
    params: &OscillatorParams,
    seed: u64,
    snapshot_times: &[f64],
) -> Result<RawTrajectory> {
    let mut psi = cfg.initial_state.prepare(cfg.dim)?.into_amplitudes();
    let mut stepper = QsdStepper::new(params, cfg.dim);
    let thermal = stepper.has_thermal_channel();
    let dt = cfg.dt.min(stepper.stable_dt());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // merged schedule; each entry: (time, is_sample, is_snapshot)
    let mut schedule: Vec<(f64, bool, bool)> = Vec::new();
    let (mut i, mut j) = (0, 0);
    while i < cfg.sample_times.len() || j < snapshot_times.len() {
        let a = cfg.sample_times.get(i).copied().unwrap_or(f64::INFINITY);
        let b = snapshot_times.get(j).copied().unwrap_or(f64::INFINITY);
        if a == b {
            schedule.push((a, true, true));
            i += 1;
            j += 1;
        } else if a < b {
            schedule.push((a, true, false));
            i += 1;
        } else {
            schedule.push((b, false, true));
            j += 1;
        }
    }

    let mut out = RawTrajectory {
        moments: Vec::with_capacity(cfg.sample_times.len()),
        snapshots: Vec::with_capacity(snapshot_times.len()),
    };
    let mut t = 0.0;
    for (target, sample, snapshot) in schedule {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / dt - 1e-9).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for k in 0..steps {
                let tk = t + k as f64 * h;
                let noise = draw_noise(&mut rng, h, thermal);
                stepper.step(&mut psi, tk, h, noise)?;
            }
        }
        t = target;
        let state = FockVector::from_vec_unchecked(psi);
        let tail = state.tail_mass(cfg.tail_band);
        if tail > cfg.tail_threshold {
            return Err(Error::TruncationOverflow {
                t,
                tail_mass: tail,
                threshold: cfg.tail_threshold,
            });
        }
        psi = state.into_amplitudes();
        if sample {
            let s = FockVector::from_vec_unchecked(psi);
            out.moments.push(s.moments());
            psi = s.into_amplitudes();
        }
        if snapshot {
            out.snapshots.push(psi.clone());
        }
    }
    Ok(out)
}

/// Runs a single trajectory seeded with `cfg.seed`. Reruns with the same
/// inputs are bit-identical.
pub fn run_trajectory(
    cfg: &TrajectoryConfig,
    params: &OscillatorParams,
    want_state: bool,
) -> Result<TrajectoryOutput> {
    cfg.validate()?;
    params.validate()?;
    let snaps: &[f64] = if want_state { &cfg.sample_times } else { &[] };
    let raw = simulate(cfg, params, cfg.seed, snaps)?;
    Ok(TrajectoryOutput {
        times: cfg.sample_times.clone(),
        mean_n: raw.moments.iter().map(|m| m.0).collect(),
        mean_n2: raw.moments.iter().map(|m| m.1).collect(),
        states: want_state.then(|| {
            raw.snapshots
                .into_iter()
                .map(FockVector::from_vec_unchecked)
                .collect()
        }),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub times: Vec<f64>,
    pub mean_n: Vec<f64>,
    pub mean_n2: Vec<f64>,
    /// Mandel Q; `None` where ⟨n⟩ = 0.
    pub q: Vec<Option<f64>>,
    /// Standard error of `mean_n`.
    pub se_n: Vec<f64>,
    /// Delta-method standard error of `q`.
    pub se_q: Vec<Option<f64>>,
    pub n_traj: usize,
}

impl EnsembleStats {
    /// CSV with columns `t,mean_n,se_n,q`, 17 significant digits. Missing Q
    /// samples are written as empty fields.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "t,mean_n,se_n,q")?;
        for k in 0..self.times.len() {
            let q = self.q[k].map(|q| format!("{q:.16e}")).unwrap_or_default();
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{}",
                self.times[k], self.mean_n[k], self.se_n[k], q
            )?;
        }
        Ok(())
    }

    /// Index of the smallest defined Q.
    pub fn argmin_q(&self) -> Option<usize> {
        extremum(&self.q, |a, b| a < b)
    }

    pub fn argmax_q(&self) -> Option<usize> {
        extremum(&self.q, |a, b| a > b)
    }
}

fn extremum(q: &[Option<f64>], better: impl Fn(f64, f64) -> bool) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (k, v) in q.iter().enumerate() {
        if let Some(v) = *v {
            if best.map_or(true, |(_, b)| better(v, b)) {
                best = Some((k, v));
            }
        }
    }
    best.map(|(k, _)| k)
}

#[derive(Debug, Clone)]
pub struct EnsembleOutput {
    pub stats: EnsembleStats,
    /// Ensemble density matrix at each requested time.
    pub rho: Vec<(f64, DensityMatrix)>,
}

/// Pairwise (cascade) sum in index order.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        2..=8 => xs.iter().fold(0.0, |a, b| a + b),
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

fn pairwise_rho(blocks: &mut [Vec<DensityMatrix>]) -> Vec<DensityMatrix> {
    match blocks.len() {
        0 => Vec::new(),
        1 => std::mem::take(&mut blocks[0]),
        n => {
            let mid = n / 2;
            let (lo, hi) = blocks.split_at_mut(mid);
            let mut left = pairwise_rho(lo);
            let right = pairwise_rho(hi);
            for (a, b) in left.iter_mut().zip(&right) {
                a.add_assign(b);
            }
            left
        }
    }
}

/// Runs `n_traj` trajectories with seeds `cfg.seed + k` on the current
/// rayon pool and reduces them in trajectory-index order, so the result
/// does not depend on the worker count.
pub fn run_ensemble(
    n_traj: usize,
    cfg: &TrajectoryConfig,
    params: &OscillatorParams,
    rho_times: &[f64],
) -> Result<EnsembleOutput> {
    if n_traj == 0 {
        return Err(Error::InvalidParameter("n_traj must be ≥ 1".into()));
    }
    cfg.validate()?;
    params.validate()?;
    check_times(rho_times, cfg.t_end, "rho_times")?;

    let n_blocks = n_traj.div_ceil(RHO_BLOCK);
    let blocks: Vec<(Vec<Vec<(f64, f64)>>, Vec<DensityMatrix>)> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * RHO_BLOCK;
            let hi = (lo + RHO_BLOCK).min(n_traj);
            let mut moments = Vec::with_capacity(hi - lo);
            let mut rho: Vec<DensityMatrix> =
                rho_times.iter().map(|_| DensityMatrix::zeros(cfg.dim)).collect();
            for k in lo..hi {
                let raw = simulate(cfg, params, cfg.seed.wrapping_add(k as u64), rho_times)
                    .map_err(|e| Error::Trajectory {
                        index: k,
                        source: Box::new(e),
                    })?;
                for (acc, snap) in rho.iter_mut().zip(&raw.snapshots) {
                    acc.add_outer(snap, 1.0);
                }
                moments.push(raw.moments);
            }
            Ok((moments, rho))
        })
        .collect::<Result<_>>()?;

    let mut per_traj: Vec<Vec<(f64, f64)>> = Vec::with_capacity(n_traj);
    let mut rho_blocks = Vec::with_capacity(n_blocks);
    for (m, r) in blocks {
        per_traj.extend(m);
        rho_blocks.push(r);
    }

    let n_samples = cfg.sample_times.len();
    let nt = n_traj as f64;
    let mut stats = EnsembleStats {
        times: cfg.sample_times.clone(),
        mean_n: Vec::with_capacity(n_samples),
        mean_n2: Vec::with_capacity(n_samples),
        q: Vec::with_capacity(n_samples),
        se_n: Vec::with_capacity(n_samples),
        se_q: Vec::with_capacity(n_samples),
        n_traj,
    };
    let mut xs = vec![0.0; n_traj];
    let mut ys = vec![0.0; n_traj];
    for k in 0..n_samples {
        for (i, traj) in per_traj.iter().enumerate() {
            xs[i] = traj[k].0;
            ys[i] = traj[k].1;
        }
        let m1 = pairwise_sum(&xs) / nt;
        let m2 = pairwise_sum(&ys) / nt;
        let (var_x, var_y, cov) = if n_traj > 1 {
            let dx: Vec<f64> = xs.iter().map(|x| (x - m1) * (x - m1)).collect();
            let dy: Vec<f64> = ys.iter().map(|y| (y - m2) * (y - m2)).collect();
            let dxy: Vec<f64> = xs
                .iter()
                .zip(&ys)
                .map(|(x, y)| (x - m1) * (y - m2))
                .collect();
            let d = nt - 1.0;
            (pairwise_sum(&dx) / d, pairwise_sum(&dy) / d, pairwise_sum(&dxy) / d)
        } else {
            (0.0, 0.0, 0.0)
        };
        let q = mandel_q(m1, m2).ok();
        let se_q = q.map(|_| {
            // Q = m2/m1 − m1 − 1
            let gx = -m2 / (m1 * m1) - 1.0;
            let gy = 1.0 / m1;
            let var = gx * gx * var_x + gy * gy * var_y + 2.0 * gx * gy * cov;
            (var.max(0.0) / nt).sqrt()
        });
        stats.mean_n.push(m1);
        stats.mean_n2.push(m2);
        stats.q.push(q);
        stats.se_n.push((var_x / nt).sqrt());
        stats.se_q.push(se_q);
    }

    let mut rho = pairwise_rho(&mut rho_blocks);
    for r in &mut rho {
        r.scale(1.0 / nt);
        r.symmetrize();
    }
    Ok(EnsembleOutput {
        stats,
        rho: rho_times.iter().copied().zip(rho).collect(),
    })
}
