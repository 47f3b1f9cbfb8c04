//! Quadrature rules, FFT helpers and small dense linear algebra.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Gauss-Legendre nodes and weights on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let (mid, half) = ((a + b) / 2.0, (b - a) / 2.0);
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = mid - half * z;
        x[n - 1 - i] = mid + half * z;
        w[i] = half * wi;
        w[n - 1 - i] = half * wi;
    }
    (x, w)
}

/// Equispaced nodes `2πj/L`, `j = 0..L`, for periodic trapezoid sums on `[-π, π)`.
pub fn periodic_nodes(l: usize) -> Vec<f64> {
    (0..l).map(|j| 2.0 * PI * j as f64 / l as f64).collect()
}

/// Signed frequency of node `j` of an `l`-point periodic grid, mapped into `(-π, π]`.
pub fn signed_frequency(j: usize, l: usize) -> f64 {
    let lam = 2.0 * PI * j as f64 / l as f64;
    if lam > PI {
        lam - 2.0 * PI
    } else {
        lam
    }
}

/// Forward FFT (`Σ x_k e^{-2πijk/L}`) of a complex buffer, in place.
pub fn fft_forward(buf: &mut [Complex64]) {
    plan(buf.len(), true).process(buf);
}

/// Unnormalised inverse FFT (`Σ x_k e^{+2πijk/L}`), in place.
pub fn fft_inverse(buf: &mut [Complex64]) {
    plan(buf.len(), false).process(buf);
}

fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    thread_local! {
        static PLANNER: std::cell::RefCell<FftPlanner<f64>> = std::cell::RefCell::new(FftPlanner::new());
    }
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if forward {
            p.plan_fft_forward(n)
        } else {
            p.plan_fft_inverse(n)
        }
    })
}

/// Fourier coefficients `(1/2π) ∫ g(λ) e^{-ikλ} dλ` for `k = 0..max_lag` of a
/// real, even, `2π`-periodic function sampled on `l` periodic nodes.
pub fn even_fourier_coefficients(samples: &[f64], max_lag: usize) -> Vec<f64> {
    let l = samples.len();
    let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    (0..=max_lag).map(|k| buf[k % l].re / l as f64).collect()
}

/// Solves `A x = b` for symmetric positive definite `A`; errors with the
/// condition number if `A` is singular or indefinite.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let cond = condition_number(a);
    if !cond.is_finite() || cond > 1e13 {
        return Err(Error::Rank { cond });
    }
    match a.clone().cholesky() {
        Some(ch) => Ok(ch.solve(b)),
        None => a.clone().lu().solve(b).ok_or(Error::Rank { cond }),
    }
}

/// Spectral condition number of a symmetric matrix (∞ if singular).
pub fn condition_number(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 1.0;
    }
    let ev = a.clone().symmetric_eigenvalues();
    let max = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
    if min == 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Symmetric Toeplitz matrix with first row `c[0..p]`.
pub fn toeplitz(c: &[f64], p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(p, p, |i, j| c[i.abs_diff(j)])
}

/// Cholesky factorisation of a dense symmetric matrix; returns `log det` and
/// the factor, or `None` if the matrix is not positive definite.
pub fn cholesky_logdet(a: DMatrix<f64>) -> Option<(f64, nalgebra::Cholesky<f64, nalgebra::Dyn>)> {
    let ch = a.cholesky()?;
    let ld = 2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    Some((ld, ch))
}
