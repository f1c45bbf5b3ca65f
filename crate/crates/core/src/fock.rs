//! Truncated Fock-space vectors and ladder-operator actions.
//!
//! A [`FockVector`] holds amplitudes over |0⟩ … |dim−1⟩. The lowering and
//! raising operators are the truncated matrices: `a` drops nothing, `a⁺`
//! drops whatever would be pushed past the top bin. The two are exact
//! adjoints of each other inside the truncated space.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Width of the top-of-basis band watched for truncation leakage.
pub const DEFAULT_TAIL_BAND: usize = 5;

/// Tail mass above which simulations report a truncation overflow.
pub const DEFAULT_TAIL_THRESHOLD: f64 = 1e-6;

/// `ln(n!)` by direct summation. Exact enough for every n this crate uses.
pub fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Table of `ln(k!)` for `k = 0..len`.
pub fn ln_factorial_table(len: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    let mut acc = 0.0;
    for k in 0..len {
        if k > 1 {
            acc += (k as f64).ln();
        }
        out.push(acc);
    }
    out
}

/// Heuristic truncation size for a run whose excitation number peaks at
/// `peak_n`.
pub fn recommended_dim(peak_n: f64) -> usize {
    let n = peak_n.max(0.0);
    (n + 8.0 * n.sqrt() + 10.0).ceil() as usize
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FockVector {
    amp: Vec<Complex64>,
}

impl FockVector {
    pub fn new(amp: Vec<Complex64>) -> Result<Self> {
        if amp.is_empty() {
            return Err(Error::InvalidParameter("Fock dimension must be ≥ 1".into()));
        }
        if amp.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidParameter("non-finite Fock amplitude".into()));
        }
        Ok(Self { amp })
    }

    pub(crate) fn from_vec_unchecked(amp: Vec<Complex64>) -> Self {
        Self { amp }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            amp: vec![Complex64::new(0.0, 0.0); dim.max(1)],
        }
    }

    /// Number state |n⟩.
    pub fn basis(n: usize, dim: usize) -> Result<Self> {
        if n >= dim {
            return Err(Error::InvalidParameter(format!(
                "Fock state |{n}⟩ outside truncated basis of dimension {dim}"
            )));
        }
        let mut s = Self::zeros(dim);
        s.amp[n] = Complex64::new(1.0, 0.0);
        Ok(s)
    }

    pub fn vacuum(dim: usize) -> Self {
        let mut s = Self::zeros(dim);
        s.amp[0] = Complex64::new(1.0, 0.0);
        s
    }

    /// Coherent state |α0⟩ projected on the truncated basis and renormalized.
    ///
    /// Amplitudes are built in log space so large |α0| does not overflow.
    pub fn coherent(alpha0: Complex64, dim: usize) -> Result<Self> {
        if !alpha0.re.is_finite() || !alpha0.im.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "non-finite coherent amplitude {alpha0}"
            )));
        }
        if dim == 0 {
            return Err(Error::InvalidParameter("Fock dimension must be ≥ 1".into()));
        }
        let r = alpha0.norm();
        if r == 0.0 {
            return Ok(Self::vacuum(dim));
        }
        let ln_r = r.ln();
        let arg = alpha0.arg();
        let mut ln_fact = 0.0;
        let amp = (0..dim)
            .map(|n| {
                if n > 1 {
                    ln_fact += (n as f64).ln();
                }
                let mag = (-0.5 * r * r + n as f64 * ln_r - 0.5 * ln_fact).exp();
                Complex64::from_polar(mag, n as f64 * arg)
            })
            .collect();
        let mut s = Self { amp };
        s.normalize();
        Ok(s)
    }

    /// Poisson weight Σ_{n<dim} e^{−|α0|²}|α0|^{2n}/n! that the untruncated
    /// coherent state puts on the first `dim` levels.
    pub fn coherent_mass(alpha0: Complex64, dim: usize) -> f64 {
        let r2 = alpha0.norm_sqr();
        if r2 == 0.0 {
            return if dim > 0 { 1.0 } else { 0.0 };
        }
        let ln_r2 = r2.ln();
        let mut ln_fact = 0.0;
        let mut total = 0.0;
        for n in 0..dim {
            if n > 1 {
                ln_fact += (n as f64).ln();
            }
            total += (-r2 + n as f64 * ln_r2 - ln_fact).exp();
        }
        total.min(1.0)
    }

    pub fn dim(&self) -> usize {
        self.amp.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amp
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amp
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amp
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amp.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Rescales to unit norm and returns the norm before rescaling.
    pub fn normalize(&mut self) -> f64 {
        let norm = self.norm_sqr().sqrt();
        if norm > 0.0 {
            let inv = 1.0 / norm;
            self.amp.iter_mut().for_each(|z| *z *= inv);
        }
        norm
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &FockVector) -> Complex64 {
        self.amp
            .iter()
            .zip(&other.amp)
            .map(|(u, v)| u.conj() * v)
            .sum()
    }

    /// a|s⟩, not normalized.
    pub fn apply_lowering(&self) -> FockVector {
        let dim = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for n in 0..dim - 1 {
            out[n] = self.amp[n + 1] * ((n + 1) as f64).sqrt();
        }
        FockVector { amp: out }
    }

    /// a⁺|s⟩, not normalized. The component pushed past the top bin is
    /// dropped; [`FockVector::raising_leakage`] reports its weight.
    pub fn apply_raising(&self) -> FockVector {
        let dim = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for n in 0..dim - 1 {
            out[n + 1] = self.amp[n] * ((n + 1) as f64).sqrt();
        }
        FockVector { amp: out }
    }

    /// Squared norm of the component that `apply_raising` discards.
    pub fn raising_leakage(&self) -> f64 {
        let top = self.dim() - 1;
        self.amp[top].norm_sqr() * (top + 1) as f64
    }

    /// Σ_{n ≥ dim−band} |amp_n|².
    pub fn tail_mass(&self, band: usize) -> f64 {
        let start = self.dim().saturating_sub(band);
        self.amp[start..].iter().map(|z| z.norm_sqr()).sum()
    }

    /// (⟨n⟩, ⟨n²⟩) for a normalized state.
    pub fn moments(&self) -> (f64, f64) {
        self.amp
            .iter()
            .enumerate()
            .fold((0.0, 0.0), |(m1, m2), (n, z)| {
                let p = z.norm_sqr();
                let n = n as f64;
                (m1 + n * p, m2 + n * n * p)
            })
    }

    /// ⟨a⟩ for a normalized state.
    pub fn expect_lowering(&self) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for n in 0..self.dim() - 1 {
            acc += self.amp[n].conj() * self.amp[n + 1] * ((n + 1) as f64).sqrt();
        }
        acc
    }
}
