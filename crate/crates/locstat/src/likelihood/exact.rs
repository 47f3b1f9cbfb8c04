//! Exact Gaussian likelihood of a curve model.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::whittle::{attach_covariance, generalized_whittle_fit, optimize_with};
use super::{centered, CurveModel, FitResult};
use crate::error::{arg, Error, Result};
use crate::model::ar_root_margin;
use crate::optim::OptimOptions;

/// Default largest sample size for the dense likelihood.
pub const EXACT_CAP: usize = 2048;

/// `Σ_rs = c(⌊(r+s)/2⌋/T, r-s)` from the local covariances of `θ_η`.
pub fn model_covariance_matrix(model: &dyn CurveModel, eta: &[f64], t_len: usize) -> Result<DMatrix<f64>> {
    let c = local_covariance_table(model, eta, t_len)?;
    Ok(DMatrix::from_fn(t_len, t_len, |i, j| c[(i + j + 2) / 2 - 1][i.abs_diff(j)]))
}

/// Row `m-1` holds `c(m/T, 0..=k_m)` for the lags paired with midpoint `m`.
fn local_covariance_table(model: &dyn CurveModel, eta: &[f64], t_len: usize) -> Result<Vec<Vec<f64>>> {
    let tf = t_len as f64;
    (1..=t_len)
        .map(|m| {
            let u = m as f64 / tf;
            let th = model.theta(eta, u);
            if !th.finite() {
                return Err(Error::Domain(format!("inadmissible parameters at u = {u:.4}")));
            }
            // Pairs with ⌊(r+s)/2⌋ = m have |r-s| ≤ 2 min(m-1, T-m) + 1.
            let k_max = (2 * (m - 1).min(t_len - m) + 1).min(t_len - 1);
            th.covariances(k_max).ok_or(Error::Stability {
                u,
                margin: ar_root_margin(&th.alpha),
            })
        })
        .collect()
}

/// In-place Cholesky of a row-major symmetric matrix (lower triangle used);
/// returns `log det`, or `None` if not positive definite.
fn cholesky_in_place(a: &mut [f64], n: usize) -> Option<f64> {
    let mut log_det = 0.0;
    for i in 0..n {
        let (done, rest) = a.split_at_mut(i * n);
        let row_i = &mut rest[..n];
        for j in 0..i {
            let row_j = &done[j * n..j * n + j + 1];
            let dot: f64 = row_i[..j].iter().zip(&row_j[..j]).map(|(x, y)| x * y).sum();
            row_i[j] = (row_i[j] - dot) / row_j[j];
        }
        let d = row_i[i] - row_i[..i].iter().map(|x| x * x).sum::<f64>();
        if !(d > 0.0) {
            return None;
        }
        row_i[i] = d.sqrt();
        log_det += d.ln();
    }
    Some(log_det)
}

/// `y' Σ⁻¹ y` through the factor `L`: `‖L⁻¹ y‖²`.
fn forward_quadratic(l: &[f64], n: usize, y: &[f64]) -> f64 {
    let mut z = vec![0.0; n];
    let mut acc = 0.0;
    for i in 0..n {
        let row = &l[i * n..i * n + i];
        let s: f64 = row.iter().zip(&z[..i]).map(|(a, b)| a * b).sum();
        z[i] = (y[i] - s) / l[i * n + i];
        acc += z[i] * z[i];
    }
    acc
}

/// `½ log 2π + (1/2T) log det Σ_η + (1/2T) (x - μ_η)' Σ_η⁻¹ (x - μ_η)`.
pub fn exact_gaussian_likelihood(x: &[f64], model: &dyn CurveModel, eta: &[f64]) -> Result<f64> {
    exact_with_cap(x, model, eta, EXACT_CAP)
}

pub fn exact_with_cap(x: &[f64], model: &dyn CurveModel, eta: &[f64], cap: usize) -> Result<f64> {
    let t_len = x.len();
    if t_len == 0 || t_len > cap {
        return arg(format!("exact likelihood needs 1 <= T <= {cap}, got {t_len}"));
    }
    if eta.len() != model.dim() {
        return arg(format!("parameter vector has length {}, model needs {}", eta.len(), model.dim()));
    }
    let c = local_covariance_table(model, eta, t_len)?;
    let mut a = vec![0.0; t_len * t_len];
    for i in 0..t_len {
        for j in 0..=i {
            a[i * t_len + j] = c[(i + j + 2) / 2 - 1][i - j];
        }
    }
    let log_det = cholesky_in_place(&mut a, t_len)
        .ok_or_else(|| Error::Definiteness(format!("model covariance matrix at T = {t_len}")))?;
    let y = centered(model, eta, x);
    let quad = forward_quadratic(&a, t_len, &y);
    let tf = t_len as f64;
    Ok(0.5 * (2.0 * PI).ln() + log_det / (2.0 * tf) + quad / (2.0 * tf))
}

/// Exact maximum likelihood, started from the generalized Whittle estimate
/// unless `start` is given.
pub fn exact_mle_fit(x: &[f64], model: &dyn CurveModel, start: Option<&[f64]>) -> Result<FitResult> {
    let t_len = x.len();
    if t_len == 0 || t_len > EXACT_CAP {
        return arg(format!("exact likelihood needs 1 <= T <= {EXACT_CAP}, got {t_len}"));
    }
    let start = match start {
        Some(s) => s.to_vec(),
        None => generalized_whittle_fit(x, model, None)?.eta,
    };
    let objective = |eta: &[f64]| exact_gaussian_likelihood(x, model, eta).unwrap_or(f64::INFINITY);
    // Each evaluation is a dense factorisation; skip the Hessian polish.
    let opts = OptimOptions {
        polish: false,
        ..OptimOptions::default()
    };
    let mut fit = optimize_with("exact-mle", model, &objective, start, t_len, &opts)?;
    attach_covariance(&mut fit, model, t_len);
    Ok(fit)
}
