//! Closed-form lossless, undriven evolution under a time-modulated Kerr
//! term.
//!
//! With no drive and no loss the number operator is conserved and each Fock
//! component only picks up the phase e^{−iφ(t)n²}, where φ(t) = ∫₀ᵗ χ(τ)dτ.
//! A coherent input therefore evolves into a known superposition, and at
//! φ(t) = π/2 it is an equal-weight two-component cat.

use std::f64::consts::FRAC_PI_2;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::density::DensityMatrix;
use crate::error::{Error, Result};
use crate::fock::{ln_factorial, FockVector};

const SCAN_POINTS: usize = 10_000;
const ROOT_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitaryKerrSpec {
    pub alpha0: Complex64,
    pub chi0: f64,
    pub chi1: f64,
    pub delta_mod: f64,
    pub phase_chi: f64,
    pub dim: usize,
}

impl UnitaryKerrSpec {
    pub fn validate(&self) -> Result<()> {
        let reals = [self.alpha0.re, self.alpha0.im, self.chi0, self.chi1, self.delta_mod, self.phase_chi];
        if reals.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite unitary spec field".into()));
        }
        if self.chi0 < 0.0 || self.chi1 < 0.0 || self.delta_mod < 0.0 {
            return Err(Error::InvalidParameter("chi0, chi1 and delta_mod must be ≥ 0".into()));
        }
        if self.chi1 > 0.0 && self.delta_mod == 0.0 {
            return Err(Error::InvalidParameter("chi1 > 0 needs a positive modulation frequency".into()));
        }
        if self.dim == 0 {
            return Err(Error::InvalidParameter("dim must be ≥ 1".into()));
        }
        // Poisson tail beyond the basis must be negligible.
        let tail = 1.0 - FockVector::coherent_mass(self.alpha0, self.dim);
        if tail > 1e-10 {
            return Err(Error::InvalidParameter(format!(
                "dim {} leaves {tail:.3e} of the coherent state outside the basis",
                self.dim
            )));
        }
        Ok(())
    }
}

/// φ(t) = χ0 t − (χ1/δ)[cos(δt + φ) − cos φ].
pub fn phase_accum(t: f64, spec: &UnitaryKerrSpec) -> f64 {
    let mut phi = spec.chi0 * t;
    if spec.chi1 != 0.0 {
        let d = spec.delta_mod;
        phi -= spec.chi1 / d * ((d * t + spec.phase_chi).cos() - spec.phase_chi.cos());
    }
    phi
}

/// ln|⟨n|α0⟩| for the untruncated coherent state.
fn ln_coherent_magnitude(r: f64, n: usize, ln_fact_n: f64) -> f64 {
    if n == 0 {
        return -0.5 * r * r;
    }
    -0.5 * r * r + n as f64 * r.ln() - 0.5 * ln_fact_n
}

/// The evolved coherent state, truncated to `spec.dim` levels.
pub fn unitary_state(t: f64, spec: &UnitaryKerrSpec) -> Result<FockVector> {
    spec.validate()?;
    let phi = phase_accum(t, spec);
    let mut v = FockVector::coherent(spec.alpha0, spec.dim)?;
    for (n, c) in v.amplitudes_mut().iter_mut().enumerate() {
        *c *= Complex64::from_polar(1.0, -phi * (n * n) as f64);
    }
    Ok(v)
}

/// ρ_nm(t) = e^{−|α0|²} α0ⁿ conj(α0)ᵐ /√(n!m!) · e^{−iφ(t)(n²−m²)}.
pub fn unitary_density(n: usize, m: usize, t: f64, spec: &UnitaryKerrSpec) -> Result<Complex64> {
    spec.validate()?;
    if n >= spec.dim || m >= spec.dim {
        return Err(Error::InvalidParameter(format!(
            "index ({n}, {m}) outside dimension {}",
            spec.dim
        )));
    }
    let r = spec.alpha0.norm();
    if r == 0.0 {
        let v = if n == 0 && m == 0 { 1.0 } else { 0.0 };
        return Ok(Complex64::new(v, 0.0));
    }
    let mag = (ln_coherent_magnitude(r, n, ln_factorial(n)) + ln_coherent_magnitude(r, m, ln_factorial(m))).exp();
    let phi = phase_accum(t, spec);
    let d = (n * n) as f64 - (m * m) as f64;
    let arg = spec.alpha0.arg() * (n as f64 - m as f64) - phi * d;
    Ok(Complex64::from_polar(mag, arg))
}

pub fn unitary_density_matrix(t: f64, spec: &UnitaryKerrSpec) -> Result<DensityMatrix> {
    Ok(DensityMatrix::from_pure(&unitary_state(t, spec)?))
}

/// Smallest t > 0 with φ(t) = π/2.
pub fn superposition_time(spec: &UnitaryKerrSpec) -> Result<f64> {
    if !(spec.chi0 > 0.0) {
        return Err(Error::InvalidParameter("superposition time needs chi0 > 0".into()));
    }
    let t_max = 10.0 * std::f64::consts::PI / spec.chi0;
    let g = |t: f64| phase_accum(t, spec) - FRAC_PI_2;
    let step = t_max / SCAN_POINTS as f64;
    let mut lo = 0.0;
    let mut g_lo = g(lo);
    for i in 1..=SCAN_POINTS {
        let hi = step * i as f64;
        let g_hi = g(hi);
        if g_hi >= 0.0 && g_lo < 0.0 {
            return Ok(bisect(g, lo, hi));
        }
        lo = hi;
        g_lo = g_hi;
    }
    Err(Error::NoSuperpositionTime { t_max })
}

fn bisect(g: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    while hi - lo > ROOT_TOL * hi.max(1.0) * 1e-3 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn spec(alpha0: f64, chi0: f64, chi1: f64, delta: f64, phase: f64) -> UnitaryKerrSpec {
        UnitaryKerrSpec {
            alpha0: Complex64::new(alpha0, 0.0),
            chi0,
            chi1,
            delta_mod: delta,
            phase_chi: phase,
            dim: 40,
        }
    }

    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
            let m = 0.5 * (a + b);
            let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
            let (flm, frm) = (f(lm), f(rm));
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                return left + right + (left + right - whole) / 15.0;
            }
            rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
        let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    #[test]
    fn phase_examples() {
        let s = spec(1.0, 0.7, 0.0, 0.0, 0.0);
        assert_eq!(phase_accum(0.0, &s), 0.0);
        assert!((phase_accum(2.5, &s) - 1.75).abs() < 1e-15);
        let s = spec(1.0, 1.0, 0.5, 2.0, 0.0);
        assert!((phase_accum(PI, &s) - PI).abs() < 1e-12);
    }

    #[test]
    fn phase_matches_quadrature() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let s = spec(
                1.0,
                rng.random_range(0.0..3.0),
                rng.random_range(0.0..2.0),
                rng.random_range(0.1..5.0),
                rng.random_range(-PI..PI),
            );
            let t = rng.random_range(0.0..10.0);
            let chi = |tau: f64| s.chi0 + s.chi1 * (s.delta_mod * tau + s.phase_chi).sin();
            let q = adaptive_simpson(&chi, 0.0, t, 1e-13);
            assert!((q - phase_accum(t, &s)).abs() < 1e-10, "{q} vs {}", phase_accum(t, &s));
        }
    }

    #[test]
    fn state_at_zero_is_coherent() {
        let s = UnitaryKerrSpec { alpha0: Complex64::new(1.2, -0.4), ..spec(0.0, 1.0, 0.3, 0.5, 0.2) };
        let v = unitary_state(0.0, &s).unwrap();
        let c = FockVector::coherent(s.alpha0, s.dim).unwrap();
        for (a, b) in v.amplitudes().iter().zip(c.amplitudes()) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn number_is_conserved() {
        let s = spec(2.0, 1.0, 0.5, 0.3, 1.0);
        let c = unitary_state(0.0, &s).unwrap();
        for &t in &[0.3, 1.7, 12.0, 250.0] {
            let v = unitary_state(t, &s).unwrap();
            for (a, b) in v.amplitudes().iter().zip(c.amplitudes()) {
                assert!((a.norm() - b.norm()).abs() < 1e-13);
            }
            let (n, _) = v.moments();
            assert!((n - 4.0).abs() < 1e-9, "{n}");
            assert!((v.norm_sqr() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn density_examples() {
        let s = spec(2.0, 1.0, 0.0, 0.0, 0.0);
        let t = FRAC_PI_2; // φ = π/2
        // ⟨1|ρ|0⟩ = ψ₁ψ₀* carries e^{−iφ}; ⟨0|ρ|1⟩ carries e^{+iφ}
        let r10 = unitary_density(1, 0, t, &s).unwrap();
        let r01 = unitary_density(0, 1, t, &s).unwrap();
        let mag = 2.0 * (-4.0f64).exp();
        assert!((r10 - Complex64::new(0.0, -mag)).norm() < 1e-15);
        assert!((r01 - Complex64::new(0.0, mag)).norm() < 1e-15);
        for n in 0..10 {
            let d = unitary_density(n, n, 3.3, &s).unwrap();
            let mut fact = 1.0;
            for k in 1..=n {
                fact *= k as f64;
            }
            assert!((d.re - (-4.0f64).exp() * 4f64.powi(n as i32) / fact).abs() < 1e-15);
            assert_eq!(d.im, 0.0);
        }
    }

    #[test]
    fn density_matches_outer_product() {
        let s = spec(1.5, 0.8, 0.4, 1.3, 0.4);
        for &t in &[0.0, 0.9, 4.2] {
            let rho = unitary_density_matrix(t, &s).unwrap();
            for n in 0..s.dim {
                for m in 0..s.dim {
                    let d = unitary_density(n, m, t, &s).unwrap();
                    assert!((d - rho.get(n, m)).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn superposition_time_examples() {
        let s = spec(2.0, 1.0, 0.0, 0.0, 0.0);
        assert!((superposition_time(&s).unwrap() - FRAC_PI_2).abs() < 1e-9);
        let s = spec(2.0, 1.0, 0.5, 1e-3, FRAC_PI_2);
        let t = superposition_time(&s).unwrap();
        assert!((t - PI / 3.0).abs() < 1e-3, "{t}");
        assert!((phase_accum(t, &s) - FRAC_PI_2).abs() < 1e-10);
        // large χ1 makes φ non-monotone but it still crosses π/2 first
        let s = spec(2.0, 0.2, 3.0, 0.5, -FRAC_PI_2);
        let t = superposition_time(&s).unwrap();
        assert!((phase_accum(t, &s) - FRAC_PI_2).abs() < 1e-10);
        assert!(superposition_time(&spec(2.0, 0.0, 0.0, 0.0, 0.0)).is_err());
    }

    #[test]
    fn no_root_is_reported() {
        // a slow modulation whose negative lobe outweighs χ0 for the
        // whole search window keeps φ below zero
        let s = spec(1.0, 1e-3, 1.0, 5e-5, -FRAC_PI_2);
        let err = superposition_time(&s).unwrap_err();
        assert_eq!(err.kind(), "no-superposition-time");
    }

    #[test]
    fn dim_too_small_is_rejected() {
        let s = UnitaryKerrSpec { dim: 8, ..spec(2.0, 1.0, 0.0, 0.0, 0.0) };
        assert!(unitary_state(1.0, &s).is_err());
    }

    proptest! {
        #[test]
        fn density_is_hermitian(n in 0usize..20, m in 0usize..20, t in 0.0f64..20.0, a in 0.1f64..2.5) {
            let s = spec(a, 1.0, 0.3, 0.7, 0.1);
            let x = unitary_density(n, m, t, &s).unwrap();
            let y = unitary_density(m, n, t, &s).unwrap();
            prop_assert!((x - y.conj()).norm() < 1e-15);
        }
    }
}
