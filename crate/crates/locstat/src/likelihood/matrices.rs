//! Covariance matrices `Σ_T(A, A)` of locally stationary processes and the
//! generalized Toeplitz matrices `U_T(φ)` that approximate their inverses.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{arg, Error, Result};
use crate::mc::Executor;
use crate::model::TvModelSpec;
use crate::numeric::{fft_inverse, gauss_legendre, periodic_nodes};

/// Quadrature nodes for the matrix entries.
pub const MATRIX_NODES: usize = 4096;

/// Largest dimension accepted by the dense constructions.
pub const MATRIX_CAP: usize = 2048;

fn nodes_for(t_len: usize) -> usize {
    MATRIX_NODES.max((2 * t_len).next_power_of_two())
}

fn check_dim(t_len: usize) -> Result<()> {
    if t_len == 0 || t_len > MATRIX_CAP {
        return arg(format!("matrix dimension must lie in 1..={MATRIX_CAP}, got {t_len}"));
    }
    Ok(())
}

/// `Σ_rs = (1/2π) ∫ e^{iλ(r-s)} A(r/T, λ) A(s/T, -λ) dλ`, `r, s = 1..T`.
///
/// A transfer function that does not vary in `u` yields a Toeplitz matrix and
/// is computed from a single FFT.
pub fn build_sigma_matrix(transfer: &(dyn Fn(f64, f64) -> Complex64 + Sync), t_len: usize) -> Result<DMatrix<f64>> {
    check_dim(t_len)?;
    let l = nodes_for(t_len);
    let lam = periodic_nodes(l);
    let probe = [0.3, 1.1, 2.9];
    let invariant = probe
        .iter()
        .all(|&x| [0.0, 0.37, 1.0].iter().all(|&u| transfer(u, x) == transfer(0.5, x)));
    if invariant {
        let mut buf: Vec<Complex64> = lam.iter().map(|&x| transfer(0.5, x) * transfer(0.5, -x)).collect();
        fft_inverse(&mut buf);
        let c: Vec<f64> = buf.iter().map(|z| z.re / l as f64).collect();
        return Ok(DMatrix::from_fn(t_len, t_len, |r, s| {
            let k = r as i64 - s as i64;
            c[k.rem_euclid(l as i64) as usize]
        }));
    }
    Ok(dense_sigma(transfer, t_len))
}

fn dense_sigma(transfer: &(dyn Fn(f64, f64) -> Complex64 + Sync), t_len: usize) -> DMatrix<f64> {
    let l = nodes_for(t_len);
    let lam = periodic_nodes(l);
    let tf = t_len as f64;
    // Σ = Re(H Gᵀ)/L with H_rj = A(r/T, λ_j) e^{iλ_j r}, G_sj = A(s/T, -λ_j) e^{-iλ_j s}.
    let rows = Executor::default().map(t_len, |i| {
        let r = (i + 1) as f64;
        let u = r / tf;
        lam.iter()
            .map(|&x| {
                let rot = Complex64::from_polar(1.0, x * r);
                (transfer(u, x) * rot, transfer(u, -x) * rot.conj())
            })
            .collect::<Vec<_>>()
    });
    let hr = DMatrix::from_fn(t_len, l, |i, j| rows[i][j].0.re);
    let hi = DMatrix::from_fn(t_len, l, |i, j| rows[i][j].0.im);
    let gr = DMatrix::from_fn(t_len, l, |i, j| rows[i][j].1.re);
    let gi = DMatrix::from_fn(t_len, l, |i, j| rows[i][j].1.im);
    (&hr * gr.transpose() - &hi * gi.transpose()) / l as f64
}

/// [`build_sigma_matrix`] for the transfer function of a linear model.
pub fn model_sigma_matrix(spec: &TvModelSpec, t_len: usize) -> Result<DMatrix<f64>> {
    spec.transfer(0.5, 0.0)?;
    build_sigma_matrix(&|u, x| spec.transfer(u, x).unwrap_or_default(), t_len)
}

/// `U_rs = ∫ e^{iλ(r-s)} φ(m/T, λ) dλ` with `m = ⌊(r+s)/2⌋`, for real `φ`
/// symmetric in `λ`.
pub fn build_u_matrix(phi: &(dyn Fn(f64, f64) -> f64 + Sync), t_len: usize) -> Result<DMatrix<f64>> {
    check_dim(t_len)?;
    let l = nodes_for(t_len);
    let lam = periodic_nodes(l);
    let tf = t_len as f64;
    // coef[m-1][k] = ∫ e^{iλk} φ(m/T, λ) dλ, k = 0..T-1 (even in k).
    let coef: Vec<Vec<f64>> = Executor::default().map(t_len, |i| {
        let u = (i + 1) as f64 / tf;
        let mut buf: Vec<Complex64> = lam.iter().map(|&x| Complex64::new(phi(u, x), 0.0)).collect();
        fft_inverse(&mut buf);
        buf.iter().take(t_len).map(|z| 2.0 * PI * z.re / l as f64).collect()
    });
    Ok(DMatrix::from_fn(t_len, t_len, |i, j| {
        let m = (i + j + 2) / 2;
        coef[m - 1][i.abs_diff(j)]
    }))
}

/// `(1/T) ‖Σ_T(A, A)⁻¹ - U_T(1/(4π² f))‖²_F` for a linear model with
/// spectral density `f = |A|²/2π`.
pub fn matrix_approximation_gap(spec: &TvModelSpec, t_len: usize) -> Result<f64> {
    let sigma = model_sigma_matrix(spec, t_len)?;
    let inv = sigma
        .cholesky()
        .ok_or_else(|| Error::Definiteness(format!("covariance matrix at T = {t_len}")))?
        .inverse();
    let u = build_u_matrix(
        &|u, x| 1.0 / (4.0 * PI * PI * spec.spectral_density(u, x).unwrap_or(f64::NAN)),
        t_len,
    )?;
    let gap = (inv - u).norm_squared() / t_len as f64;
    if gap.is_finite() {
        Ok(gap)
    } else {
        Err(Error::Domain("spectral density is not positive".into()))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SzegoCheck {
    pub t_len: usize,
    /// `(1/T) log det Σ_T`.
    pub log_det: f64,
    /// `(1/2π) ∫₀¹ ∫ log 2πf(u, λ) dλ du`.
    pub integral: f64,
    pub residual: f64,
}

/// Compares `(1/T) log det Σ_T` with the integrated log spectrum.
pub fn szego_check(spec: &TvModelSpec, t_len: usize) -> Result<SzegoCheck> {
    let sigma = model_sigma_matrix(spec, t_len)?;
    let ch = sigma
        .cholesky()
        .ok_or_else(|| Error::Definiteness(format!("covariance matrix at T = {t_len}")))?;
    let log_det = 2.0 * ch.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() / t_len as f64;
    let (us, ws) = gauss_legendre(64, 0.0, 1.0);
    let l = 1024;
    let lam = periodic_nodes(l);
    let mut integral = 0.0;
    for (u, w) in us.iter().zip(&ws) {
        let inner: f64 = lam
            .iter()
            .map(|&x| (2.0 * PI * spec.spectral_density(*u, x).unwrap_or(f64::NAN)).ln())
            .sum::<f64>()
            / l as f64;
        integral += w * inner;
    }
    if !integral.is_finite() {
        return Err(Error::Domain("spectral density is not positive".into()));
    }
    Ok(SzegoCheck {
        t_len,
        log_det,
        integral,
        residual: log_det - integral,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::ParameterCurve;

    #[test]
    fn u_of_flat_symbol_is_identity() {
        let u = build_u_matrix(&|_, _| 1.0 / (2.0 * PI), 40).unwrap();
        assert!((u - DMatrix::identity(40, 40)).amax() < 1e-13);
    }

    #[test]
    fn sigma_of_constant_transfer() {
        let s = build_sigma_matrix(&|_, _| Complex64::new(1.5, 0.0), 30).unwrap();
        assert!((s - DMatrix::identity(30, 30) * 2.25).amax() < 1e-13);
        // Time-varying white noise goes through the dense route: diagonal σ²(r/T).
        let s = build_sigma_matrix(&|u, _| Complex64::new(1.0 + u, 0.0), 24).unwrap();
        for r in 0..24 {
            assert!((s[(r, r)] - (1.0 + (r + 1) as f64 / 24.0).powi(2)).abs() < 1e-12);
        }
        assert!((s.clone() - DMatrix::from_diagonal(&s.diagonal())).amax() < 1e-12);
    }

    #[test]
    fn stationary_sigma_is_toeplitz_of_covariances() {
        let spec = TvModelSpec::ar1(-0.6, 1.2);
        let s = model_sigma_matrix(&spec, 50).unwrap();
        let c = spec.covariances(0.5, 49).unwrap();
        for r in 0..50 {
            for q in 0..50 {
                assert!((s[(r, q)] - c[r.abs_diff(q)]).abs() < 1e-12);
            }
        }
        // The dense route agrees.
        let dense = dense_sigma(&|_, x| spec.transfer(0.5, x).unwrap(), 50);
        assert!((dense - s).amax() < 1e-12);
    }

    #[test]
    fn ar1_gap_is_corner_mass() {
        // Exact inverse and U differ only in the two corner entries, by α²/σ².
        let (a, sigma) = (0.5, 1.3);
        let spec = TvModelSpec::ar1(a, sigma);
        for t_len in [16, 64] {
            let gap = matrix_approximation_gap(&spec, t_len).unwrap();
            let oracle = 2.0 * a.powi(4) / sigma.powi(4) / t_len as f64;
            assert!((gap - oracle).abs() < 1e-12, "{gap} vs {oracle}");
        }
        assert!(matrix_approximation_gap(&TvModelSpec::white_noise(0.7), 32).unwrap() < 1e-24);
    }

    #[test]
    fn ar1_szego_residual() {
        let spec = TvModelSpec::ar1(0.5, 1.0);
        let c = szego_check(&spec, 128).unwrap();
        assert!((c.residual - (4.0f64 / 3.0).ln() / 128.0).abs() < 1e-10, "{c:?}");
        assert!(c.integral.abs() < 1e-12);
    }

    #[test]
    fn varying_sigma_is_symmetric() {
        let spec = TvModelSpec::tvar(
            vec![ParameterCurve::polynomial(vec![-0.6, 0.8])],
            ParameterCurve::polynomial(vec![1.0, 0.5]),
        );
        let s = model_sigma_matrix(&spec, 40).unwrap();
        assert!((s.clone() - s.transpose()).amax() < 1e-12);
        // Diagonal entries are the local variances at r/T.
        for r in [0usize, 19, 39] {
            let u = (r + 1) as f64 / 40.0;
            assert!((s[(r, r)] - spec.covariance(u, 0).unwrap()).abs() < 1e-10);
        }
    }
}
