//! Mean-field dynamics of the oscillator amplitude α = ⟨a⟩ with the
//! factorization ⟨a⁺aa⟩ ≈ |α|²α:
//!
//! ```text
//! dα/dt = −(γ/2)α − i(Δ + χ(t)(1 + 2|α|²))α − i f(t)
//! ```
//!
//! plus the tools built on it: stroboscopic Poincaré sections, stationary
//! hysteresis sweeps, and the amplitude-scaling map between parameter sets.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OscillatorParams;

pub fn mean_field_rhs(alpha: Complex64, t: f64, p: &OscillatorParams) -> Complex64 {
    let i = Complex64::i();
    let detune = p.delta + p.chi_at(t) * (1.0 + 2.0 * alpha.norm_sqr());
    -0.5 * p.gamma * alpha - i * detune * alpha - i * p.drive_at(t)
}

/// Step-size control for [`integrate_mean_field`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Step sizes below `h_min · max(1, |t|)` count as a collapse.
    pub h_min: f64,
    pub max_steps: usize,
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-12,
            h_min: 1e-13,
            max_steps: 50_000_000,
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B: [f64; 7] = [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0, 0.0];
// B − B̂ (fifth- minus fourth-order weights).
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive integrator state that carries the last accepted step size
/// across consecutive calls.
struct Dopri<'a> {
    p: &'a OscillatorParams,
    opts: OdeOptions,
    h: f64,
    steps: usize,
}

impl<'a> Dopri<'a> {
    fn new(p: &'a OscillatorParams, opts: OdeOptions) -> Self {
        Self { p, opts, h: 0.0, steps: 0 }
    }

    fn scale(&self, a: f64, b: f64) -> f64 {
        self.opts.atol + self.opts.rtol * a.abs().max(b.abs())
    }

    /// Advances `y` from `t` to exactly `t_end`.
    fn advance(&mut self, y: &mut Complex64, t: f64, t_end: f64) -> Result<()> {
        let span = t_end - t;
        if span <= 0.0 {
            return Ok(());
        }
        let mut t = t;
        if self.h <= 0.0 {
            let f0 = mean_field_rhs(*y, t, self.p);
            let scale = 1.0 + y.norm();
            self.h = (1e-3 * scale / (f0.norm() + 1e-12)).min(span).max(1e-8);
        }
        let mut k = [Complex64::new(0.0, 0.0); 7];
        k[0] = mean_field_rhs(*y, t, self.p);
        while t < t_end {
            let remaining = t_end - t;
            let last = self.h >= remaining;
            let h = if last { remaining } else { self.h };
            for s in 1..7 {
                let mut acc = *y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += h * A[s][j] * kj;
                }
                k[s] = mean_field_rhs(acc, t + C[s] * h, self.p);
            }
            let mut y_new = *y;
            let mut err = Complex64::new(0.0, 0.0);
            for s in 0..7 {
                y_new += h * B[s] * k[s];
                err += h * E[s] * k[s];
            }
            let er = err.re / self.scale(y.re, y_new.re);
            let ei = err.im / self.scale(y.im, y_new.im);
            let norm = (0.5 * (er * er + ei * ei)).sqrt();
            if !norm.is_finite() {
                self.h = h * 0.1;
            } else if norm <= 1.0 {
                t = if last { t_end } else { t + h };
                *y = y_new;
                k[0] = k[6];
                let grow = if norm == 0.0 { 5.0 } else { (0.9 * norm.powf(-0.2)).clamp(0.2, 5.0) };
                // keep the natural step when the last one was clipped to land on t_end
                if !last || h == self.h {
                    self.h = h * grow;
                }
            } else {
                self.h = h * (0.9 * norm.powf(-0.2)).clamp(0.2, 1.0);
            }
            self.steps += 1;
            if self.h < self.opts.h_min * t.abs().max(1.0) || self.steps > self.opts.max_steps {
                return Err(Error::Stiffness { t, h: self.h });
            }
        }
        Ok(())
    }
}

/// α at each time of `t_grid` (ascending, starting at or after 0), starting
/// from `alpha0` at `t_grid[0]`.
pub fn integrate_mean_field(alpha0: Complex64, t_grid: &[f64], p: &OscillatorParams) -> Result<Vec<Complex64>> {
    integrate_mean_field_with(alpha0, t_grid, p, OdeOptions::default())
}

pub fn integrate_mean_field_with(
    alpha0: Complex64,
    t_grid: &[f64],
    p: &OscillatorParams,
    opts: OdeOptions,
) -> Result<Vec<Complex64>> {
    if t_grid.iter().any(|t| !t.is_finite()) || t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("time grid must be finite and ascending".into()));
    }
    if !alpha0.re.is_finite() || !alpha0.im.is_finite() {
        return Err(Error::InvalidParameter("non-finite initial amplitude".into()));
    }
    let mut out = Vec::with_capacity(t_grid.len());
    let Some(&t_start) = t_grid.first() else {
        return Ok(out);
    };
    let mut ode = Dopri::new(p, opts);
    let mut y = alpha0;
    let mut t = t_start;
    for &tn in t_grid {
        ode.advance(&mut y, t, tn)?;
        t = tn;
        out.push(y);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareSection {
    pub points: Vec<(f64, f64)>,
    pub strobe_period: f64,
    pub t0: f64,
    pub discarded_transient: f64,
}

impl PoincareSection {
    /// Area of the axis-aligned bounding box of the points.
    pub fn bounding_box_area(&self) -> f64 {
        let (w, h) = self.extent();
        w * h
    }

    /// Widths of the bounding box along x and y.
    pub fn extent(&self) -> (f64, f64) {
        if self.points.is_empty() {
            return (0.0, 0.0);
        }
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &(x, y) in &self.points {
            lo = (lo.0.min(x), lo.1.min(y));
            hi = (hi.0.max(x), hi.1.max(y));
        }
        (hi.0 - lo.0, hi.1 - lo.1)
    }

    /// Largest distance between any point and the centroid, doubled.
    pub fn diameter_bound(&self) -> f64 {
        let n = self.points.len() as f64;
        if n == 0.0 {
            return 0.0;
        }
        let cx = self.points.iter().map(|p| p.0).sum::<f64>() / n;
        let cy = self.points.iter().map(|p| p.1).sum::<f64>() / n;
        2.0 * self
            .points
            .iter()
            .map(|p| (p.0 - cx).hypot(p.1 - cy))
            .fold(0.0, f64::max)
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y")?;
        for (x, y) in &self.points {
            writeln!(w, "{x:.16e},{y:.16e}")?;
        }
        Ok(())
    }
}

/// Samples (Re α, Im α) at t_n = t0 + T·n for the first `n_points` strobe
/// times not earlier than `transient`, where T is the period of the active
/// modulation.
pub fn poincare_section(
    alpha0: Complex64,
    p: &OscillatorParams,
    n_points: usize,
    t0: f64,
    transient: f64,
) -> Result<PoincareSection> {
    let period = p.modulation_period().ok_or(Error::StrobeUndefined)?;
    if !t0.is_finite() || t0 < 0.0 || !transient.is_finite() {
        return Err(Error::InvalidParameter("t0 must be ≥ 0 and transient finite".into()));
    }
    let first = if transient > t0 { ((transient - t0) / period).ceil() as u64 } else { 0 };
    let mut points = Vec::with_capacity(n_points);
    let mut ode = Dopri::new(p, OdeOptions::default());
    let mut y = alpha0;
    let mut t = 0.0;
    for n in first..first + n_points as u64 {
        let tn = t0 + period * n as f64;
        ode.advance(&mut y, t, tn)?;
        t = tn;
        points.push((y.re, y.im));
    }
    Ok(PoincareSection {
        points,
        strobe_period: period,
        t0,
        discarded_transient: transient,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepDirection {
    Up,
    Down,
}

impl SweepDirection {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepDirection::Up => "up",
            SweepDirection::Down => "down",
        }
    }
}

/// One point of a stationary sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub f: f64,
    pub alpha: Complex64,
    pub intensity: f64,
}

const SS_RHS_TOL: f64 = 1e-8;
const SS_T_MAX: f64 = 200.0;
const SS_CHUNK: f64 = 0.5;
const SS_POLISH_BELOW: f64 = 1e-5;

/// Cubic steady-state condition f² = I[(γ/2)² + (Δ + χ(1 + 2I))²], returned
/// as a residual relative to max(f², 1).
pub fn cubic_residual(f: f64, intensity: f64, p: &OscillatorParams) -> f64 {
    let d = p.delta + p.chi0 * (1.0 + 2.0 * intensity);
    let rhs = intensity * (0.25 * p.gamma * p.gamma + d * d);
    (f * f - rhs).abs() / (f * f).max(1.0)
}

/// Newton iteration on the real 2×2 system rhs(α) = 0 of a stationary model.
fn polish_fixed_point(mut a: Complex64, p: &OscillatorParams) -> Complex64 {
    for _ in 0..20 {
        let r = mean_field_rhs(a, 0.0, p);
        if r.norm() < 1e-15 * (1.0 + a.norm()) {
            break;
        }
        // d rhs / d(x, y) with α = x + iy
        let (x, y) = (a.re, a.im);
        let g = 0.5 * p.gamma;
        let d = p.delta + p.chi0 * (1.0 + 2.0 * (x * x + y * y));
        let c = 4.0 * p.chi0;
        // rhs = (−g x + d y) + i(−g y − d x − f)
        let j11 = -g + c * x * y;
        let j12 = d + c * y * y;
        let j21 = -d - c * x * x;
        let j22 = -g - c * x * y;
        let det = j11 * j22 - j12 * j21;
        if det == 0.0 || !det.is_finite() {
            break;
        }
        let dx = (r.re * j22 - r.im * j12) / det;
        let dy = (j11 * r.im - j21 * r.re) / det;
        let next = Complex64::new(x - dx, y - dy);
        if !next.re.is_finite() || !next.im.is_finite() {
            break;
        }
        a = next;
    }
    a
}

/// Relaxes from `seed` to a stationary point of the unmodulated model with
/// drive `f`.
pub fn relax_to_steady_state(seed: Complex64, p: &OscillatorParams, f: f64) -> Result<Complex64> {
    let q = OscillatorParams { f0: f, f1: 0.0, chi1: 0.0, ..*p };
    let mut ode = Dopri::new(&q, OdeOptions::default());
    let mut y = seed;
    let mut t = 0.0;
    loop {
        let r = mean_field_rhs(y, 0.0, &q).norm();
        if r < SS_RHS_TOL {
            return Ok(y);
        }
        // Near the attractor the adaptive step hovers at its stability limit
        // and the state jitters at the tolerance level, so finish with Newton.
        if r < SS_POLISH_BELOW {
            let polished = polish_fixed_point(y, &q);
            let jump = (polished - y).norm();
            if mean_field_rhs(polished, 0.0, &q).norm() < SS_RHS_TOL && jump < 1e-3 * (1.0 + y.norm()) {
                return Ok(polished);
            }
        }
        if t >= SS_T_MAX / p.gamma {
            return Err(Error::Convergence { f, t_max: SS_T_MAX / p.gamma });
        }
        ode.advance(&mut y, t, t + SS_CHUNK)?;
        t += SS_CHUNK;
    }
}

/// Quasi-static sweep of the stationary drive amplitude. Each point starts
/// from the previous steady state; the first from the vacuum. Points are
/// returned in sweep order.
pub fn hysteresis_sweep(p: &OscillatorParams, f_values: &[f64], direction: SweepDirection) -> Result<Vec<SweepPoint>> {
    p.validate()?;
    if p.f1 != 0.0 || p.chi1 != 0.0 {
        return Err(Error::InvalidParameter("hysteresis sweep needs f1 = 0 and chi1 = 0".into()));
    }
    if f_values.iter().any(|f| !f.is_finite()) || f_values.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidParameter("sweep values must be finite and ascending".into()));
    }
    let order: Vec<f64> = match direction {
        SweepDirection::Up => f_values.to_vec(),
        SweepDirection::Down => f_values.iter().rev().copied().collect(),
    };
    let mut seed = Complex64::new(0.0, 0.0);
    let mut out = Vec::with_capacity(order.len());
    for f in order {
        let a = relax_to_steady_state(seed, p, f)?;
        out.push(SweepPoint { f, alpha: a, intensity: a.norm_sqr() });
        seed = a;
    }
    Ok(out)
}

/// Both sweep directions, run in parallel.
pub fn hysteresis_branches(p: &OscillatorParams, f_values: &[f64]) -> Result<(Vec<SweepPoint>, Vec<SweepPoint>)> {
    let (up, down) = rayon::join(
        || hysteresis_sweep(p, f_values, SweepDirection::Up),
        || hysteresis_sweep(p, f_values, SweepDirection::Down),
    );
    Ok((up?, down?))
}

/// Drive values at which the two sweep branches land on different states.
pub fn bistable_window(up: &[SweepPoint], down: &[SweepPoint], rel_tol: f64) -> Vec<f64> {
    up.iter()
        .filter_map(|u| {
            let d = down.iter().find(|d| d.f == u.f)?;
            let scale = u.intensity.max(d.intensity).max(1.0);
            ((u.intensity - d.intensity).abs() > rel_tol * scale).then_some(u.f)
        })
        .collect()
}

/// Parameters whose mean-field trajectories are those of `p` scaled by λ:
/// Δ′ = Δ + χ0(1 − 1/λ²), χ′ = χ/λ², f′ = λf, channel-wise. The map is exact
/// when χ1 = 0; a Kerr modulation breaks it because the detuning shift only
/// absorbs the mean Kerr strength.
pub fn scale_transform(p: &OscillatorParams, lambda: f64) -> Result<OscillatorParams> {
    if !lambda.is_finite() || lambda <= 0.0 {
        return Err(Error::InvalidParameter(format!("scale factor must be finite and > 0, got {lambda}")));
    }
    let inv2 = 1.0 / (lambda * lambda);
    Ok(OscillatorParams {
        delta: p.delta + p.chi0 * (1.0 - inv2),
        chi0: p.chi0 * inv2,
        chi1: p.chi1 * inv2,
        f0: p.f0 * lambda,
        f1: p.f1 * lambda,
        ..*p
    })
}

/// Strobe period 2π/ω helper for configs that name a frequency.
pub fn period_of(freq: f64) -> Option<f64> {
    (freq > 0.0).then(|| TAU / freq)
}
