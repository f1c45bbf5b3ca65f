//! Direct dense integration of the Lindblad master equation.
//!
//! Used as the ground-truth oracle for the trajectory ensemble at small
//! truncation sizes. Operators act on ρ through their banded structure, so
//! one derivative evaluation costs O(dim²).

use num_complex::Complex64;

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::model::OscillatorParams;

pub const DEFAULT_DIM_LIMIT: usize = 64;

#[derive(Debug, Clone, Copy)]
pub struct MasterOptions {
    pub dt: f64,
    pub dim_limit: usize,
    pub hermiticity_tol: f64,
    pub trace_tol: f64,
    pub positivity_tol: f64,
}

impl Default for MasterOptions {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            dim_limit: DEFAULT_DIM_LIMIT,
            hermiticity_tol: 1e-9,
            trace_tol: 1e-8,
            positivity_tol: 1e-7,
        }
    }
}

/// dρ/dt = −i[H(t), ρ] + Σ_j (L_j ρ L_j⁺ − ½{L_j⁺L_j, ρ}).
pub fn rho_derivative(rho: &DensityMatrix, t: f64, params: &OscillatorParams) -> DensityMatrix {
    let mut out = DensityMatrix::zeros(rho.dim());
    rho_derivative_into(rho, t, params, &mut out);
    out
}

fn rho_derivative_into(
    rho: &DensityMatrix,
    t: f64,
    params: &OscillatorParams,
    out: &mut DensityMatrix,
) {
    let dim = rho.dim();
    let chi = params.chi_at(t);
    let f = params.drive_at(t);
    let (c1, c2) = params.lindblad_coeffs();
    let (g1, g2) = (c1 * c1, c2 * c2);
    let sq: Vec<f64> = (0..=dim).map(|n| (n as f64).sqrt()).collect();
    let energy: Vec<f64> = (0..dim)
        .map(|n| {
            let nf = n as f64;
            params.delta * nf + chi * nf * nf
        })
        .collect();
    // diagonal of a⁺a and of the truncated a a⁺
    let num = |n: usize| n as f64;
    let anti = |n: usize| if n + 1 < dim { (n + 1) as f64 } else { 0.0 };
    let minus_i = Complex64::new(0.0, -1.0);
    let zero = Complex64::new(0.0, 0.0);
    let r = |n: usize, m: usize| rho.get(n, m);

    for n in 0..dim {
        for m in 0..dim {
            let rnm = r(n, m);
            // [H, ρ]
            let mut comm = rnm * (energy[n] - energy[m]);
            let mut hop = zero;
            if n + 1 < dim {
                hop += r(n + 1, m) * sq[n + 1];
            }
            if n > 0 {
                hop += r(n - 1, m) * sq[n];
            }
            if m + 1 < dim {
                hop -= r(n, m + 1) * sq[m + 1];
            }
            if m > 0 {
                hop -= r(n, m - 1) * sq[m];
            }
            comm += hop * f;

            let mut diss = -0.5 * (g1 * (num(n) + num(m)) + g2 * (anti(n) + anti(m))) * rnm;
            if n + 1 < dim && m + 1 < dim {
                diss += r(n + 1, m + 1) * (g1 * sq[n + 1] * sq[m + 1]);
            }
            if g2 != 0.0 && n > 0 && m > 0 {
                diss += r(n - 1, m - 1) * (g2 * sq[n] * sq[m]);
            }
            out.set(n, m, minus_i * comm + diss);
        }
    }
}

/// Classical RK4 from ρ(0) = `rho0`, returning ρ at each time in `t_grid`
/// (ascending, ≥ 0). Every output is checked for Hermiticity, unit trace
/// and approximate positivity.
pub fn integrate_master(
    rho0: &DensityMatrix,
    t_grid: &[f64],
    params: &OscillatorParams,
    opts: &MasterOptions,
) -> Result<Vec<DensityMatrix>> {
    params.validate()?;
    let dim = rho0.dim();
    if dim > opts.dim_limit {
        return Err(Error::DimensionGuard {
            dim,
            limit: opts.dim_limit,
        });
    }
    if !(opts.dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt = {} must be > 0", opts.dt)));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) || t_grid.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::InvalidParameter("t_grid must be ascending and ≥ 0".into()));
    }

    let mut rho = rho0.clone();
    let mut k = [
        DensityMatrix::zeros(dim),
        DensityMatrix::zeros(dim),
        DensityMatrix::zeros(dim),
        DensityMatrix::zeros(dim),
    ];
    let mut stage = DensityMatrix::zeros(dim);
    let mut t = 0.0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &target in t_grid {
        let span = target - t;
        if span > 0.0 {
            let steps = (span / opts.dt - 1e-9).ceil().max(1.0) as usize;
            let h = span / steps as f64;
            for s in 0..steps {
                let ts = t + s as f64 * h;
                rk4_step(&mut rho, ts, h, params, &mut k, &mut stage);
            }
        }
        t = target;
        check_state(&rho, t, opts)?;
        out.push(rho.clone());
    }
    Ok(out)
}

fn rk4_step(
    rho: &mut DensityMatrix,
    t: f64,
    h: f64,
    params: &OscillatorParams,
    k: &mut [DensityMatrix; 4],
    stage: &mut DensityMatrix,
) {
    let [k1, k2, k3, k4] = k;
    rho_derivative_into(rho, t, params, k1);
    axpy(stage, rho, k1, 0.5 * h);
    rho_derivative_into(stage, t + 0.5 * h, params, k2);
    axpy(stage, rho, k2, 0.5 * h);
    rho_derivative_into(stage, t + 0.5 * h, params, k3);
    axpy(stage, rho, k3, h);
    rho_derivative_into(stage, t + h, params, k4);
    let sixth = h / 6.0;
    for (i, z) in rho.entries_mut().iter_mut().enumerate() {
        *z += (k1.entries()[i]
            + (k2.entries()[i] + k3.entries()[i]) * 2.0
            + k4.entries()[i])
            * sixth;
    }
}

/// out = x + w·y
fn axpy(out: &mut DensityMatrix, x: &DensityMatrix, y: &DensityMatrix, w: f64) {
    for ((o, a), b) in out.entries_mut().iter_mut().zip(x.entries()).zip(y.entries()) {
        *o = a + b * w;
    }
}

fn check_state(rho: &DensityMatrix, t: f64, opts: &MasterOptions) -> Result<()> {
    let herm = rho.hermiticity_error();
    let trace = rho.trace();
    if herm > opts.hermiticity_tol || (trace.re - 1.0).abs() > opts.trace_tol || !herm.is_finite() {
        return Err(Error::PositivityBreach {
            t,
            min_eigenvalue: f64::NAN,
        });
    }
    let min_ev = rho.min_eigenvalue();
    if min_ev < -opts.positivity_tol {
        return Err(Error::PositivityBreach {
            t,
            min_eigenvalue: min_ev,
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockVector;
    use proptest::prelude::*;

    fn projector(n: usize, dim: usize) -> DensityMatrix {
        DensityMatrix::from_pure(&FockVector::basis(n, dim).unwrap())
    }

    #[test]
    fn vacuum_is_steady_under_decay() {
        let p = OscillatorParams {
            delta: 0.7,
            chi0: 0.3,
            ..Default::default()
        };
        let d = rho_derivative(&projector(0, 6), 0.0, &p);
        assert_eq!(d.max_abs(), 0.0);
    }

    #[test]
    fn fock_one_decay_rates() {
        let p = OscillatorParams::default();
        let d = rho_derivative(&projector(1, 5), 0.0, &p);
        assert!((d.get(0, 0).re - 1.0).abs() < 1e-15);
        assert!((d.get(1, 1).re + 1.0).abs() < 1e-15);
        let others: f64 = (0..25)
            .filter(|&i| i != 0 && i != 6)
            .map(|i| d.entries()[i].norm())
            .sum();
        assert_eq!(others, 0.0);
    }

    #[test]
    fn exponential_decay() {
        let p = OscillatorParams::default();
        let times = [0.5, 1.0, 2.0, 4.0];
        let out = integrate_master(&projector(1, 6), &times, &p, &MasterOptions::default()).unwrap();
        for (t, rho) in times.iter().zip(&out) {
            let (n, _) = rho.moments();
            assert!((n - (-t).exp()).abs() < 1e-6, "t={t} n={n}");
        }
    }

    #[test]
    fn thermal_equilibrium() {
        let p = OscillatorParams {
            nbar: 0.5,
            ..Default::default()
        };
        let out =
            integrate_master(&projector(0, 20), &[30.0], &p, &MasterOptions::default()).unwrap();
        let (n, n2) = out[0].moments();
        assert!((n - 0.5).abs() < 1e-4, "{n}");
        // thermal variance N² + N
        assert!((n2 - n * n - 0.75).abs() < 1e-3);
    }

    #[test]
    fn steady_state_has_vanishing_derivative() {
        let p = OscillatorParams {
            delta: 0.4,
            chi0: 0.3,
            f0: 0.8,
            nbar: 0.05,
            ..Default::default()
        };
        let out =
            integrate_master(&projector(0, 14), &[50.0], &p, &MasterOptions::default()).unwrap();
        let d = rho_derivative(&out[0], 50.0, &p);
        assert!(d.max_abs() <= 1e-6, "{}", d.max_abs());
    }

    #[test]
    fn dimension_guard() {
        let p = OscillatorParams::default();
        let rho = projector(0, 70);
        assert!(matches!(
            integrate_master(&rho, &[0.1], &p, &MasterOptions::default()),
            Err(Error::DimensionGuard { dim: 70, limit: 64 })
        ));
        let opts = MasterOptions {
            dim_limit: 80,
            ..Default::default()
        };
        assert!(integrate_master(&rho, &[0.01], &p, &opts).is_ok());
    }

    proptest! {
        #[test]
        fn derivative_is_hermitian_and_traceless(
            amps in proptest::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 3 * 8),
            t in 0.0..5.0f64,
        ) {
            let p = OscillatorParams {
                delta: -0.6, chi0: 0.4, chi1: 0.3, mod_freq_chi: 2.0,
                f0: 1.2, f1: 0.4, mod_freq_f: 1.5, nbar: 0.3,
                ..Default::default()
            };
            let dim = 8;
            let mut rho = DensityMatrix::zeros(dim);
            for v in amps.chunks(dim) {
                let v: Vec<Complex64> = v.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
                rho.add_outer(&v, 1.0);
            }
            let tr = rho.trace().re;
            rho.scale(1.0 / tr);
            let d = rho_derivative(&rho, t, &p);
            prop_assert!(d.hermiticity_error() < 1e-12);
            prop_assert!(d.trace().norm() < 1e-12);
        }
    }
}
