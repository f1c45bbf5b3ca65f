//! The time-modulated Duffing (Kerr) oscillator: parameters, modulation laws,
//! Hamiltonian action and Lindblad couplings.
//!
//! All rates are expressed in units of the decay rate and ħ = 1. The
//! Hamiltonian in the frame rotating at the drive frequency is
//!
//! ```text
//! H(t) = Δ n + χ(t) n² + f(t) (a⁺ + a),     n = a⁺a
//! χ(t) = χ0 + χ1 sin(δ t + φ),   f(t) = f0 + f1 sin(Ω t)
//! ```
//!
//! and the bath enters through `L1 = √((N+1)γ) a`, `L2 = √(Nγ) a⁺`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockVector;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorParams {
    /// Detuning Δ.
    pub delta: f64,
    /// Mean Kerr strength χ0.
    pub chi0: f64,
    /// Kerr modulation depth χ1.
    pub chi1: f64,
    /// Kerr modulation frequency δ.
    pub mod_freq_chi: f64,
    /// Kerr modulation phase φ (radians).
    pub phase_chi: f64,
    /// Mean drive f0.
    pub f0: f64,
    /// Drive modulation depth f1.
    pub f1: f64,
    /// Drive modulation frequency Ω.
    pub mod_freq_f: f64,
    /// Decay rate γ.
    pub gamma: f64,
    /// Thermal occupation N of the bath.
    pub nbar: f64,
}

impl Default for OscillatorParams {
    fn default() -> Self {
        Self {
            delta: 0.0,
            chi0: 0.0,
            chi1: 0.0,
            mod_freq_chi: 0.0,
            phase_chi: 0.0,
            f0: 0.0,
            f1: 0.0,
            mod_freq_f: 0.0,
            gamma: 1.0,
            nbar: 0.0,
        }
    }
}

impl OscillatorParams {
    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("delta", self.delta),
            ("chi0", self.chi0),
            ("chi1", self.chi1),
            ("mod_freq_chi", self.mod_freq_chi),
            ("phase_chi", self.phase_chi),
            ("f0", self.f0),
            ("f1", self.f1),
            ("mod_freq_f", self.mod_freq_f),
            ("gamma", self.gamma),
            ("nbar", self.nbar),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v} is not finite")));
            }
        }
        let non_negative = [
            ("chi0", self.chi0),
            ("chi1", self.chi1),
            ("mod_freq_chi", self.mod_freq_chi),
            ("f0", self.f0),
            ("f1", self.f1),
            ("mod_freq_f", self.mod_freq_f),
            ("nbar", self.nbar),
        ];
        for (name, v) in non_negative {
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be ≥ 0")));
            }
        }
        if self.gamma <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "gamma = {} must be > 0",
                self.gamma
            )));
        }
        Ok(())
    }

    /// χ(t) = χ0 + χ1 sin(δt + φ).
    pub fn chi_at(&self, t: f64) -> f64 {
        self.chi0 + self.chi1 * (self.mod_freq_chi * t + self.phase_chi).sin()
    }

    /// f(t) = f0 + f1 sin(Ωt).
    pub fn drive_at(&self, t: f64) -> f64 {
        self.f0 + self.f1 * (self.mod_freq_f * t).sin()
    }

    /// ∫ χ(τ) dτ over [t0, t1], in closed form.
    pub fn chi_integral(&self, t0: f64, t1: f64) -> f64 {
        let h = t1 - t0;
        let modulated = if self.mod_freq_chi == 0.0 {
            self.chi1 * self.phase_chi.sin() * h
        } else {
            let w = self.mod_freq_chi;
            -(self.chi1 / w) * ((w * t1 + self.phase_chi).cos() - (w * t0 + self.phase_chi).cos())
        };
        self.chi0 * h + modulated
    }

    /// Whether χ or f carries a time dependence.
    pub fn is_time_dependent(&self) -> bool {
        (self.chi1 != 0.0 && self.mod_freq_chi != 0.0) || (self.f1 != 0.0 && self.mod_freq_f != 0.0)
    }

    /// Period of the active modulation channel, if any. The Kerr channel
    /// wins when both are active.
    pub fn modulation_period(&self) -> Option<f64> {
        if self.chi1 != 0.0 && self.mod_freq_chi > 0.0 {
            Some(2.0 * std::f64::consts::PI / self.mod_freq_chi)
        } else if self.f1 != 0.0 && self.mod_freq_f > 0.0 {
            Some(2.0 * std::f64::consts::PI / self.mod_freq_f)
        } else {
            None
        }
    }

    /// Amplitudes (c1, c2) of the Lindblad operators `c1·a` and `c2·a⁺`.
    pub fn lindblad_coeffs(&self) -> (f64, f64) {
        (
            ((self.nbar + 1.0) * self.gamma).sqrt(),
            (self.nbar * self.gamma).sqrt(),
        )
    }

    /// H(t)|s⟩.
    pub fn apply_hamiltonian(&self, s: &FockVector, t: f64) -> FockVector {
        let chi = self.chi_at(t);
        let f = self.drive_at(t);
        let amp = s.amplitudes();
        let dim = amp.len();
        let out = (0..dim)
            .map(|n| {
                let nf = n as f64;
                let mut z = amp[n] * (self.delta * nf + chi * nf * nf);
                if n + 1 < dim {
                    z += amp[n + 1] * (f * ((n + 1) as f64).sqrt());
                }
                if n > 0 {
                    z += amp[n - 1] * (f * nf.sqrt());
                }
                z
            })
            .collect::<Vec<Complex64>>();
        FockVector::from_vec_unchecked(out)
    }
}
