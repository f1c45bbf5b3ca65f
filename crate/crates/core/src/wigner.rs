//! Wigner functions from Fock-basis density matrices, plus the negativity,
//! number and quadrature distributions derived from them.
//!
//! In polar phase-space coordinates (x = r cosθ, y = r sinθ)
//!
//! ```text
//! W(r, θ) = Σ_{n,m} ρ_nm W_mn(r, θ)
//! W_mn    = (2/π) (−1)ⁿ √(n!/m!) e^{i(m−n)θ} (2r)^{m−n} e^{−2r²} L_n^{m−n}(4r²),  m ≥ n
//! W_nm    = conj(W_mn)
//! ```
//!
//! The product √(n!/m!)(2r)^k e^{−2r²} L_n^k(4r²) is evaluated as a
//! normalized Laguerre function with its own three-term recurrence and a
//! running log scale, so it neither overflows nor loses the small-n
//! starting values at large r.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::fock::ln_factorial_table;

const RESCALE_ABOVE: f64 = 1e150;
const IMAG_RESIDUE_LIMIT: f64 = 1e-8;

/// Generalized Laguerre polynomial L_n^k(x) by upward recurrence in n.
pub fn laguerre(n: usize, k: usize, x: f64) -> f64 {
    let kf = k as f64;
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = 1.0 + kf - x;
    for j in 1..n {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + kf - x) * cur - (jf + kf) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// Fills `out[n] = √(n!/(n+k)!) x^{k/2} e^{−x/2} L_n^k(x)` for n = 0..out.len().
fn laguerre_functions(k: usize, x: f64, ln_fact_k: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let kf = k as f64;
    let log_start = if k == 0 {
        -0.5 * x
    } else if x > 0.0 {
        0.5 * kf * x.ln() - 0.5 * x - 0.5 * ln_fact_k
    } else {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    };
    let mut scale = log_start.exp();
    let mut log_scale = log_start;
    let mut prev = 0.0;
    let mut cur = 1.0;
    out[0] = scale;
    for n in 0..out.len() - 1 {
        let nf = n as f64;
        let next = ((2.0 * nf + 1.0 + kf - x) * cur - (nf * (nf + kf)).sqrt() * prev)
            / ((nf + 1.0) * (nf + kf + 1.0)).sqrt();
        prev = cur;
        cur = next;
        if cur.abs() > RESCALE_ABOVE {
            prev /= RESCALE_ABOVE;
            cur /= RESCALE_ABOVE;
            log_scale += RESCALE_ABOVE.ln();
            scale = log_scale.exp();
        }
        out[n + 1] = cur * scale;
    }
}

/// W_mn(r, θ).
pub fn wigner_coeff(m: usize, n: usize, r: f64, theta: f64) -> Complex64 {
    let (lo, hi) = if m >= n { (n, m) } else { (m, n) };
    let k = hi - lo;
    let ln_fact = ln_factorial_table(k + 1);
    let mut vals = vec![0.0; lo + 1];
    laguerre_functions(k, 4.0 * r * r, ln_fact[k], &mut vals);
    let sign = if lo % 2 == 0 { 1.0 } else { -1.0 };
    let phase = Complex64::from_polar(1.0, (m as f64 - n as f64) * theta);
    phase * (2.0 / PI * sign * vals[lo])
}

/// Rectangular phase-space grid, sampled at cell centers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn square(half_width: f64, n: usize) -> Self {
        Self {
            x_min: -half_width,
            x_max: half_width,
            y_min: -half_width,
            y_max: half_width,
            nx: n,
            ny: n,
        }
    }

    /// Square grid centered at the origin that reaches `sigmas` vacuum
    /// widths (σ = ½) beyond √⟨n⟩.
    pub fn covering(mean_n: f64, sigmas: f64, n: usize) -> Self {
        Self::square(mean_n.max(0.0).sqrt() + 0.5 * sigmas, n)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [self.x_min, self.x_max, self.y_min, self.y_max]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.x_max <= self.x_min || self.y_max <= self.y_min {
            return Err(Error::InvalidParameter("degenerate Wigner grid bounds".into()));
        }
        if self.nx == 0 || self.ny == 0 {
            return Err(Error::InvalidParameter("Wigner grid needs nx, ny ≥ 1".into()));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_max - self.x_min) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_max - self.y_min) / self.ny as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + (i as f64 + 0.5) * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.y_min + (j as f64 + 0.5) * self.dy()
    }
}

impl Default for GridSpec {
    fn default() -> Self {
        Self::square(5.0, 201)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WignerGrid {
    pub spec: GridSpec,
    /// `values[i * ny + j]` = W(x_i, y_j).
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn dxdy(&self) -> f64 {
        self.spec.dx() * self.spec.dy()
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.spec.ny + j]
    }

    /// Midpoint-rule ∫W dx dy.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dxdy()
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Strict local maxima over the 8-neighborhood whose height is at least
    /// `rel_height` times the global maximum, sorted by decreasing height.
    pub fn local_maxima(&self, rel_height: f64) -> Vec<(f64, f64, f64)> {
        let (nx, ny) = (self.spec.nx, self.spec.ny);
        let floor = rel_height * self.max_value();
        let mut peaks = Vec::new();
        for i in 0..nx {
            for j in 0..ny {
                let v = self.at(i, j);
                if v < floor || v <= 0.0 {
                    continue;
                }
                let mut is_peak = true;
                'nb: for di in -1i64..=1 {
                    for dj in -1i64..=1 {
                        if di == 0 && dj == 0 {
                            continue;
                        }
                        let (a, b) = (i as i64 + di, j as i64 + dj);
                        if a < 0 || b < 0 || a >= nx as i64 || b >= ny as i64 {
                            continue;
                        }
                        if self.at(a as usize, b as usize) >= v {
                            is_peak = false;
                            break 'nb;
                        }
                    }
                }
                if is_peak {
                    peaks.push((self.spec.x(i), self.spec.y(j), v));
                }
            }
        }
        peaks.sort_by(|a, b| b.2.total_cmp(&a.2));
        peaks
    }

    /// Rows `x y w`, x-major.
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "x,y,w")?;
        for i in 0..self.spec.nx {
            for j in 0..self.spec.ny {
                writeln!(
                    w,
                    "{:.16e},{:.16e},{:.16e}",
                    self.spec.x(i),
                    self.spec.y(j),
                    self.at(i, j)
                )?;
            }
        }
        Ok(())
    }

    /// gnuplot `splot ... with pm3d` block: one blank-line separated scan
    /// per x value.
    pub fn write_gnuplot<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        for i in 0..self.spec.nx {
            for j in 0..self.spec.ny {
                writeln!(w, "{:.10e} {:.10e} {:.10e}", self.spec.x(i), self.spec.y(j), self.at(i, j))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Evaluates the Wigner function of `rho` at one phase-space point,
/// returning (real part, imaginary residue).
pub fn wigner_point(rho: &DensityMatrix, x: f64, y: f64) -> (f64, f64) {
    let ln_fact = ln_factorial_table(rho.dim());
    let mut buf = vec![0.0; rho.dim()];
    wigner_point_with(rho, x, y, &ln_fact, &mut buf)
}

fn wigner_point_with(
    rho: &DensityMatrix,
    x: f64,
    y: f64,
    ln_fact: &[f64],
    buf: &mut [f64],
) -> (f64, f64) {
    let dim = rho.dim();
    let r2 = x * x + y * y;
    let arg = 4.0 * r2;
    let theta = y.atan2(x);
    let rot = Complex64::from_polar(1.0, theta);
    let mut phase = Complex64::new(1.0, 0.0);
    let mut acc = Complex64::new(0.0, 0.0);
    for k in 0..dim {
        let len = dim - k;
        laguerre_functions(k, arg, ln_fact[k], &mut buf[..len]);
        let mut part = Complex64::new(0.0, 0.0);
        for n in 0..len {
            let l = if n % 2 == 0 { buf[n] } else { -buf[n] };
            if k == 0 {
                part += rho.get(n, n) * l;
            } else {
                // ρ_{n,n+k} W_{n+k,n} + ρ_{n+k,n} W_{n,n+k}
                part += (rho.get(n, n + k) * phase + rho.get(n + k, n) * phase.conj()) * l;
            }
        }
        acc += part;
        phase *= rot;
    }
    acc *= 2.0 / PI;
    (acc.re, acc.im)
}

/// W on every cell center of `spec`.
pub fn wigner_from_rho(rho: &DensityMatrix, spec: &GridSpec) -> Result<WignerGrid> {
    spec.validate()?;
    let dim = rho.dim();
    let ln_fact = ln_factorial_table(dim.max(1));
    let ny = spec.ny;
    let cells: Vec<(f64, f64)> = (0..spec.nx * ny)
        .into_par_iter()
        .map_init(
            || vec![0.0; dim],
            |buf, idx| {
                let (i, j) = (idx / ny, idx % ny);
                wigner_point_with(rho, spec.x(i), spec.y(j), &ln_fact, buf)
            },
        )
        .collect();
    let mut values = Vec::with_capacity(cells.len());
    for (idx, (re, im)) in cells.into_iter().enumerate() {
        if im.abs() > IMAG_RESIDUE_LIMIT {
            return Err(Error::CorruptedDensity {
                x: spec.x(idx / ny),
                y: spec.y(idx % ny),
                residue: im.abs(),
            });
        }
        values.push(re);
    }
    Ok(WignerGrid { spec: *spec, values })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Negativity {
    pub min: f64,
    pub neg_volume: f64,
}

/// Minimum cell value and Σ |W| dxdy over negative cells.
pub fn negativity(g: &WignerGrid) -> Negativity {
    let min = g.values.iter().copied().fold(f64::INFINITY, f64::min);
    let neg = g.values.iter().filter(|v| **v < 0.0).map(|v| -v).sum::<f64>();
    Negativity {
        min,
        neg_volume: neg * g.dxdy(),
    }
}

/// P_n = Re ρ_nn.
pub fn photon_distribution(rho: &DensityMatrix) -> Vec<f64> {
    (0..rho.dim()).map(|n| rho.get(n, n).re).collect()
}

/// Indices of strict local maxima of a sequence that reach at least
/// `rel_height` of its maximum and are separated from the next such peak by
/// a dip below `dip` times the lower of the two.
pub fn sequence_peaks(p: &[f64], rel_height: f64, dip: f64) -> Vec<usize> {
    let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let floor = rel_height * max;
    let candidates: Vec<usize> = (0..p.len())
        .filter(|&i| {
            let left = if i > 0 { p[i - 1] } else { f64::NEG_INFINITY };
            let right = p.get(i + 1).copied().unwrap_or(f64::NEG_INFINITY);
            p[i] >= floor && p[i] > left && p[i] >= right
        })
        .collect();
    let mut kept: Vec<usize> = Vec::new();
    for c in candidates {
        if let Some(&last) = kept.last() {
            let valley = p[last..=c].iter().copied().fold(f64::INFINITY, f64::min);
            if valley > dip * p[last].min(p[c]) {
                // no real dip: merge, keeping the higher peak
                if p[c] > p[last] {
                    *kept.last_mut().unwrap() = c;
                }
                continue;
            }
        }
        kept.push(c);
    }
    kept
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Marginal {
    pub coords: Vec<f64>,
    pub values: Vec<f64>,
    /// Set when the grid edge still carries more than 1e−6 of the peak.
    pub truncated_support: bool,
}

impl Marginal {
    pub fn integral(&self) -> f64 {
        if self.coords.len() < 2 {
            return self.values.iter().sum();
        }
        let d = self.coords[1] - self.coords[0];
        self.values.iter().sum::<f64>() * d
    }
}

/// Marginal of W along `axis` (P(x) integrates over y).
pub fn quadrature_distribution(g: &WignerGrid, axis: Axis) -> Marginal {
    let s = &g.spec;
    let (coords, values): (Vec<f64>, Vec<f64>) = match axis {
        Axis::X => (0..s.nx)
            .map(|i| (s.x(i), (0..s.ny).map(|j| g.at(i, j)).sum::<f64>() * s.dy()))
            .unzip(),
        Axis::Y => (0..s.ny)
            .map(|j| (s.y(j), (0..s.nx).map(|i| g.at(i, j)).sum::<f64>() * s.dx()))
            .unzip(),
    };
    let peak = g.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let mut edge = 0.0f64;
    for i in 0..s.nx {
        edge = edge.max(g.at(i, 0).abs()).max(g.at(i, s.ny - 1).abs());
    }
    for j in 0..s.ny {
        edge = edge.max(g.at(0, j).abs()).max(g.at(s.nx - 1, j).abs());
    }
    Marginal {
        coords,
        values,
        truncated_support: edge > 1e-6 * peak,
    }
}
