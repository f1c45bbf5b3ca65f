//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use kerrmod::{Complex64, DensityMatrix};

/// W(α) = (2/π²) e^{2|α|²} ∫ d²β ⟨−β|ρ|β⟩ e^{−2(βα* − β*α)}
/// with normalized coherent states, by the trapezoid rule on the square
/// [−half_width, half_width]² with spacing `h`.
pub fn wigner_by_integral(rho: &DensityMatrix, alpha: Complex64, h: f64, half_width: f64) -> f64 {
    let dim = rho.dim();
    let steps = (half_width / h).round() as i64;
    let mut inv_sqrt_fact = vec![1.0; dim];
    for n in 1..dim {
        inv_sqrt_fact[n] = inv_sqrt_fact[n - 1] / (n as f64).sqrt();
    }
    let mut u = vec![Complex64::new(0.0, 0.0); dim];
    let mut v = vec![Complex64::new(0.0, 0.0); dim];
    let mut acc = Complex64::new(0.0, 0.0);
    for i in -steps..=steps {
        for j in -steps..=steps {
            let beta = Complex64::new(i as f64 * h, j as f64 * h);
            let damp = (-beta.norm_sqr()).exp();
            if damp < 1e-300 {
                continue;
            }
            // v_m = β^m/√m!, u_n = (−β)^n/√n! so that ⟨−β|ρ|β⟩ = e^{−|β|²} u†ρv
            let mut pb = Complex64::new(1.0, 0.0);
            for m in 0..dim {
                v[m] = pb * inv_sqrt_fact[m];
                u[m] = if m % 2 == 0 { v[m] } else { -v[m] };
                pb *= beta;
            }
            let mut quad = Complex64::new(0.0, 0.0);
            for n in 0..dim {
                let mut row = Complex64::new(0.0, 0.0);
                for m in 0..dim {
                    row += rho.get(n, m) * v[m];
                }
                quad += u[n].conj() * row;
            }
            let phase = (-2.0 * (beta * alpha.conj() - beta.conj() * alpha)).exp();
            acc += quad * damp * phase;
        }
    }
    let w = acc * (h * h) * (2.0 / (PI * PI)) * (2.0 * alpha.norm_sqr()).exp();
    w.re
}

/// Exact L_n^k(x) as a rational sum, for x given as a rational p/q.
pub fn laguerre_exact(n: u64, k: u64, p: i64, q: i64) -> f64 {
    use num::bigint::BigInt;
    use num::rational::BigRational;
    use num::{One, ToPrimitive, Zero};
    let x = BigRational::new(BigInt::from(p), BigInt::from(q));
    let mut sum = BigRational::zero();
    // L_n^k(x) = Σ_i (−1)^i C(n+k, n−i) x^i / i!
    let mut binom = BigInt::one(); // C(n+k, n), then C(n+k, n−i)
    for j in 1..=n {
        binom = binom * BigInt::from(k + j) / BigInt::from(j);
    }
    let mut xpow_over_fact = BigRational::one();
    for i in 0..=n {
        let term = BigRational::from_integer(binom.clone()) * xpow_over_fact.clone();
        if i % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        if i < n {
            // C(n+k, n−i−1) = C(n+k, n−i)·(n−i)/(k+i+1)
            binom = binom * BigInt::from(n - i) / BigInt::from(k + i + 1);
            xpow_over_fact = xpow_over_fact * x.clone() / BigRational::from_integer(BigInt::from(i + 1));
        }
    }
    sum.to_f64().unwrap()
}

