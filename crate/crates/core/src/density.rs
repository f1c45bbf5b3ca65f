//! Dense density matrices over the truncated Fock basis.

use std::io::{BufRead, Write};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fock::FockVector;

/// Row-major dim × dim complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

/// One NDJSON row of a serialized density matrix.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DensityRow {
    pub n: usize,
    pub m: usize,
    pub re: f64,
    pub im: f64,
}

impl DensityMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            entries: vec![Complex64::new(0.0, 0.0); dim * dim],
        }
    }

    pub fn from_entries(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::InvalidParameter(format!(
                "density matrix needs {} entries, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Ok(Self { dim, entries })
    }

    /// |s⟩⟨s|.
    pub fn from_pure(s: &FockVector) -> Self {
        let mut rho = Self::zeros(s.dim());
        rho.add_outer(s.amplitudes(), 1.0);
        rho
    }

    /// ρ += w |v⟩⟨v|.
    pub fn add_outer(&mut self, v: &[Complex64], w: f64) {
        let dim = self.dim;
        for (n, vn) in v.iter().enumerate() {
            let row = &mut self.entries[n * dim..(n + 1) * dim];
            let a = vn * w;
            for (r, vm) in row.iter_mut().zip(v) {
                *r += a * vm.conj();
            }
        }
    }

    pub fn add_assign(&mut self, other: &DensityMatrix) {
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            *a += b;
        }
    }

    pub fn scale(&mut self, w: f64) {
        self.entries.iter_mut().for_each(|z| *z *= w);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn entries_mut(&mut self) -> &mut [Complex64] {
        &mut self.entries
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> Complex64 {
        self.entries[n * self.dim + m]
    }

    #[inline]
    pub fn set(&mut self, n: usize, m: usize, z: Complex64) {
        self.entries[n * self.dim + m] = z;
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|n| self.get(n, n)).sum()
    }

    /// max |ρ_nm − conj(ρ_mn)|.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for n in 0..self.dim {
            for m in n..self.dim {
                worst = worst.max((self.get(n, m) - self.get(m, n).conj()).norm());
            }
        }
        worst
    }

    /// Replaces ρ by (ρ + ρ⁺)/2.
    pub fn symmetrize(&mut self) {
        for n in 0..self.dim {
            for m in n..self.dim {
                let avg = 0.5 * (self.get(n, m) + self.get(m, n).conj());
                self.set(n, m, avg);
                self.set(m, n, avg.conj());
            }
        }
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> f64 {
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// (⟨n⟩, ⟨n²⟩).
    pub fn moments(&self) -> (f64, f64) {
        (0..self.dim).fold((0.0, 0.0), |(m1, m2), n| {
            let p = self.get(n, n).re;
            let nf = n as f64;
            (m1 + nf * p, m2 + nf * nf * p)
        })
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let m = DMatrix::from_fn(self.dim, self.dim, |i, j| {
            0.5 * (self.get(i, j) + self.get(j, i).conj())
        });
        let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    /// Writes one `{"n","m","re","im"}` object per line, row-major.
    pub fn write_ndjson<W: Write>(&self, mut w: W) -> Result<()> {
        for n in 0..self.dim {
            for m in 0..self.dim {
                let z = self.get(n, m);
                let row = DensityRow {
                    n,
                    m,
                    re: z.re,
                    im: z.im,
                };
                serde_json::to_writer(&mut w, &row).map_err(std::io::Error::from)?;
                w.write_all(b"\n")?;
            }
        }
        Ok(())
    }

    pub fn read_ndjson<R: BufRead>(r: R) -> Result<Self> {
        let mut rows = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: DensityRow = serde_json::from_str(&line)
                .map_err(|e| Error::InvalidParameter(format!("bad density row: {e}")))?;
            rows.push(row);
        }
        let dim = (rows.len() as f64).sqrt().round() as usize;
        if dim * dim != rows.len() {
            return Err(Error::InvalidParameter(format!(
                "{} density rows do not form a square matrix",
                rows.len()
            )));
        }
        let mut rho = Self::zeros(dim);
        for row in rows {
            if row.n >= dim || row.m >= dim {
                return Err(Error::InvalidParameter(format!(
                    "density index ({}, {}) out of range",
                    row.n, row.m
                )));
            }
            rho.set(row.n, row.m, Complex64::new(row.re, row.im));
        }
        Ok(rho)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pure_state_projector() {
        let s = FockVector::coherent(Complex64::new(0.8, 0.3), 20).unwrap();
        let rho = DensityMatrix::from_pure(&s);
        assert!((rho.trace().re - 1.0).abs() < 1e-12);
        assert_eq!(rho.hermiticity_error(), 0.0);
        let ev = rho.eigenvalues();
        assert!((ev[ev.len() - 1] - 1.0).abs() < 1e-10);
        assert!(ev[0].abs() < 1e-10);
    }

    #[test]
    fn ndjson_round_trip() {
        let s = FockVector::coherent(Complex64::new(0.4, -0.9), 6).unwrap();
        let rho = DensityMatrix::from_pure(&s);
        let mut buf = Vec::new();
        rho.write_ndjson(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().count(), 36);
        assert!(text.lines().next().unwrap().starts_with("{\"n\":0,\"m\":0,\"re\":"));
        let back = DensityMatrix::read_ndjson(&buf[..]).unwrap();
        assert_eq!(back, rho);
    }
}
