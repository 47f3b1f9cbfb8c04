//! Parametric curve models and the likelihoods used to fit them.

use std::borrow::Cow;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::curve::ParameterCurve;
use crate::error::{arg, Result};
use crate::local::{local_yule_walker, LocalWindow};
use crate::model::{ar_autocovariances, ar_ma_spectrum, TvModelSpec};
use crate::numeric::{even_fourier_coefficients, periodic_nodes};
use crate::spectral::lag_series_on_grid;
use crate::taper::Taper;

pub mod aic;
pub mod asymptotics;
pub mod conditional;
pub mod exact;
pub mod matrices;
pub mod whittle;

pub use aic::{aic, model_scan, ModelScan, ScanRow};
pub use asymptotics::{
    asymptotic_covariance, fisher_information, kl_divergence_limit, kl_minimizer, AsymptoticCovariance, KlObjective,
    Quadrature,
};
pub use conditional::{local_conditional_fit, ConditionalFamily};
pub use exact::{exact_gaussian_likelihood, exact_mle_fit, model_covariance_matrix, EXACT_CAP};
pub use matrices::{build_sigma_matrix, build_u_matrix, matrix_approximation_gap, szego_check, SzegoCheck};
pub use whittle::{
    block_whittle_closed_form, block_whittle_fit, block_whittle_fit_generic, block_whittle_likelihood,
    generalized_whittle_fit, generalized_whittle_likelihood, generalized_whittle_with, local_generalized_whittle_fit,
    local_whittle_fit, local_whittle_likelihood, whittle_likelihood, BlockWhittleConfig, GwRoute,
};

/// Local parameter vector: AR and MA coefficients and the innovation variance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Theta {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub sigma2: f64,
}

impl Theta {
    pub fn ar(alpha: Vec<f64>, sigma2: f64) -> Self {
        Self {
            alpha,
            beta: Vec::new(),
            sigma2,
        }
    }

    pub fn is_ar(&self) -> bool {
        self.beta.is_empty()
    }

    pub fn spectral_density(&self, lambda: f64) -> f64 {
        ar_ma_spectrum(&self.alpha, &self.beta, self.sigma2, lambda)
    }

    /// `(1/4π) ∫ log 4π² f dλ`, exact through the root moduli of the AR and MA
    /// polynomials.
    pub fn log_term(&self) -> f64 {
        0.5 * ((2.0 * PI * self.sigma2).ln() + log_mean_modulus(&self.beta) - log_mean_modulus(&self.alpha))
    }

    /// `γ_k = Σ_j a_j a_{j+k}`, `a_0 = 1`, so that `|a(e^{iλ})|² = Σ_k γ_k e^{ikλ}`.
    pub fn ar_autocorrelation(&self) -> Vec<f64> {
        let mut a = Vec::with_capacity(self.alpha.len() + 1);
        a.push(1.0);
        a.extend_from_slice(&self.alpha);
        (0..a.len())
            .map(|k| (0..a.len() - k).map(|j| a[j] * a[j + k]).sum())
            .collect()
    }

    /// `(1/4π) ∫ J(λ)/f(λ) dλ` where `J(λ) = (1/2π)[c_0 + 2 Σ_k c_k cos kλ]`.
    pub fn data_term(&self, c: &[f64]) -> f64 {
        if self.is_ar() {
            let g = self.ar_autocorrelation();
            let mut s = c.first().copied().unwrap_or(0.0) * g[0];
            for k in 1..g.len().min(c.len()) {
                s += 2.0 * c[k] * g[k];
            }
            s / (2.0 * self.sigma2)
        } else {
            let l = 1024usize.max((4 * c.len()).next_power_of_two());
            let j = lag_series_on_grid(c, l);
            let sum: f64 = periodic_nodes(l)
                .iter()
                .zip(&j)
                .map(|(&lam, jv)| jv / self.spectral_density(lam))
                .sum();
            sum / (2.0 * l as f64)
        }
    }

    /// `(1/4π) ∫ {log 4π² f + J/f} dλ` for the lag sequence `c`.
    pub fn whittle_term(&self, c: &[f64]) -> f64 {
        self.log_term() + self.data_term(c)
    }

    /// Autocovariances `c(0..=max_lag)`; `None` if the AR part is not stable.
    pub fn covariances(&self, max_lag: usize) -> Option<Vec<f64>> {
        if self.is_ar() {
            return ar_autocovariances(&self.alpha, self.sigma2, max_lag);
        }
        if crate::model::ar_root_margin(&self.alpha) <= 0.0 {
            return None;
        }
        let l = 4096usize.max((2 * max_lag + 2).next_power_of_two());
        let samples: Vec<f64> = periodic_nodes(l).iter().map(|&lam| self.spectral_density(lam)).collect();
        Some(
            even_fourier_coefficients(&samples, max_lag)
                .into_iter()
                .map(|c| 2.0 * PI * c)
                .collect(),
        )
    }

    pub fn finite(&self) -> bool {
        self.sigma2 > 0.0 && self.sigma2.is_finite() && self.alpha.iter().chain(&self.beta).all(|v| v.is_finite())
    }

    /// Positive finite variance and no AR root inside the unit disc. Outside
    /// this region a non-causal AR polynomial describes the same spectrum as a
    /// causal one with smaller variance, which the likelihoods should not
    /// trade on.
    pub fn admissible(&self) -> bool {
        self.finite() && log_mean_modulus(&self.alpha) == 0.0
    }
}

/// `(1/2π) ∫ log |1 + Σ_j c_j e^{ijλ}|² dλ = 2 Σ_i log max(1, |ρ_i|)` over the
/// reciprocal roots `ρ_i`; zero for a polynomial without roots in the unit disc.
pub fn log_mean_modulus(c: &[f64]) -> f64 {
    let log_out = |m: f64| if m > 1.0 { m.ln() } else { 0.0 };
    match c.len() {
        0 => 0.0,
        1 => 2.0 * log_out(c[0].abs()),
        2 => {
            let disc = c[0] * c[0] - 4.0 * c[1];
            if disc < 0.0 {
                // Complex pair with |ρ|² = c_2.
                2.0 * log_out(c[1].sqrt()) * 2.0
            } else {
                let r = disc.sqrt();
                2.0 * (log_out(((-c[0] + r) / 2.0).abs()) + log_out(((-c[0] - r) / 2.0).abs()))
            }
        }
        p => {
            let mut m = DMatrix::<f64>::zeros(p, p);
            for j in 0..p {
                m[(0, j)] = -c[j];
            }
            for i in 1..p {
                m[(i, i - 1)] = 1.0;
            }
            2.0 * m.complex_eigenvalues().iter().map(|z| log_out(z.norm())).sum::<f64>()
        }
    }
}

/// A finite-dimensional parametrisation `η ↦ θ_η(·)` of curve vectors.
pub trait CurveModel: Send + Sync + std::fmt::Debug {
    fn dim(&self) -> usize;

    fn names(&self) -> Vec<String>;

    /// AR order `p`.
    fn order(&self) -> usize;

    fn theta(&self, eta: &[f64], u: f64) -> Theta;

    fn mean(&self, _eta: &[f64], _u: f64) -> f64 {
        0.0
    }

    fn has_mean(&self) -> bool {
        false
    }

    fn is_time_invariant(&self) -> bool;

    /// If `σ²` is constant and `α(u) = B(u) η_α` is linear in the leading
    /// `ncols(B)` entries of `η`, the `p × ncols` basis matrix at `u`.
    fn linear_ar_basis(&self, _u: f64) -> Option<DMatrix<f64>> {
        None
    }

    /// Index of a free constant `σ²` in `η`, if any.
    fn constant_sigma2_index(&self) -> Option<usize> {
        None
    }

    /// Starting value for iterative fits.
    fn warm_start(&self, x: &[f64]) -> Vec<f64>;

    /// Number of free parameters entering AIC.
    fn aic_parameters(&self) -> usize {
        self.dim()
    }

    /// The simulation model with curves `θ_η(·)` and mean `μ_η(·)`.
    fn to_spec(&self, eta: &[f64]) -> Result<TvModelSpec>;

    fn spectral_density(&self, eta: &[f64], u: f64, lambda: f64) -> f64 {
        self.theta(eta, u).spectral_density(lambda)
    }

    /// `∫₀¹ σ²_η(u) du` by the midpoint rule on 200 cells.
    fn average_sigma2(&self, eta: &[f64]) -> f64 {
        let n = 200;
        (0..n).map(|i| self.theta(eta, (i as f64 + 0.5) / n as f64).sigma2).sum::<f64>() / n as f64
    }

    /// Smallest AR root margin over `grid` equispaced points.
    fn stability_margin(&self, eta: &[f64], grid: usize) -> f64 {
        let n = grid.max(2);
        (0..n)
            .map(|i| crate::model::ar_root_margin(&self.theta(eta, i as f64 / (n - 1) as f64).alpha))
            .fold(f64::INFINITY, f64::min)
    }
}

/// `x_t - μ_η(t/T)` when the model carries a mean curve.
pub(crate) fn centered<'a>(model: &dyn CurveModel, eta: &[f64], x: &'a [f64]) -> Cow<'a, [f64]> {
    if !model.has_mean() {
        return Cow::Borrowed(x);
    }
    let tf = x.len() as f64;
    Cow::Owned(
        x.iter()
            .enumerate()
            .map(|(i, v)| v - model.mean(eta, (i + 1) as f64 / tf))
            .collect(),
    )
}

/// tvAR(p) with polynomial curves `α_j(u) = Σ_{k ≤ K_j} b_{jk} u^k`, a
/// polynomial (default constant) `σ²(u)`, and an optional polynomial mean.
///
/// `η` holds the `α` coefficients (curve by curve, ascending powers), then
/// the `σ²` coefficients unless `σ²` is fixed, then the mean coefficients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolyTvAr {
    pub orders: Vec<usize>,
    pub sigma_order: usize,
    pub mean_order: Option<usize>,
    pub fixed_sigma2: Option<f64>,
}

fn poly(c: &[f64], u: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &v| acc * u + v)
}

impl PolyTvAr {
    pub fn new(orders: Vec<usize>) -> Self {
        Self {
            orders,
            sigma_order: 0,
            mean_order: None,
            fixed_sigma2: None,
        }
    }

    /// Time-invariant AR(p).
    pub fn stationary(p: usize) -> Self {
        Self::new(vec![0; p])
    }

    pub fn with_sigma_order(mut self, k: usize) -> Self {
        self.sigma_order = k;
        self
    }

    pub fn with_mean_order(mut self, k: usize) -> Self {
        self.mean_order = Some(k);
        self
    }

    pub fn with_fixed_sigma2(mut self, sigma2: f64) -> Self {
        self.fixed_sigma2 = Some(sigma2);
        self
    }

    fn alpha_len(&self) -> usize {
        self.orders.iter().map(|k| k + 1).sum()
    }

    fn sigma_len(&self) -> usize {
        if self.fixed_sigma2.is_some() {
            0
        } else {
            self.sigma_order + 1
        }
    }

    /// Splits `η` into per-curve coefficient slices, `σ²` and mean parts.
    pub fn split<'a>(&self, eta: &'a [f64]) -> (Vec<&'a [f64]>, &'a [f64], &'a [f64]) {
        let mut at = 0;
        let mut alpha = Vec::with_capacity(self.orders.len());
        for k in &self.orders {
            alpha.push(&eta[at..at + k + 1]);
            at += k + 1;
        }
        let s = &eta[at..at + self.sigma_len()];
        at += self.sigma_len();
        (alpha, s, &eta[at..])
    }

    /// Packs curve coefficients into `η`.
    pub fn pack(&self, alpha: &[Vec<f64>], sigma2: &[f64], mean: &[f64]) -> Vec<f64> {
        let mut eta: Vec<f64> = alpha.iter().flatten().copied().collect();
        eta.extend_from_slice(sigma2);
        eta.extend_from_slice(mean);
        eta
    }
}

impl CurveModel for PolyTvAr {
    fn dim(&self) -> usize {
        self.alpha_len() + self.sigma_len() + self.mean_order.map_or(0, |k| k + 1)
    }

    fn names(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (j, k) in self.orders.iter().enumerate() {
            out.extend((0..=*k).map(|i| format!("alpha{}_{}", j + 1, i)));
        }
        out.extend((0..self.sigma_len()).map(|i| format!("sigma2_{i}")));
        if let Some(k) = self.mean_order {
            out.extend((0..=k).map(|i| format!("mu_{i}")));
        }
        out
    }

    fn order(&self) -> usize {
        self.orders.len()
    }

    fn theta(&self, eta: &[f64], u: f64) -> Theta {
        let (alpha, s, _) = self.split(eta);
        Theta::ar(
            alpha.iter().map(|c| poly(c, u)).collect(),
            self.fixed_sigma2.unwrap_or_else(|| poly(s, u)),
        )
    }

    fn mean(&self, eta: &[f64], u: f64) -> f64 {
        poly(self.split(eta).2, u)
    }

    fn has_mean(&self) -> bool {
        self.mean_order.is_some()
    }

    fn is_time_invariant(&self) -> bool {
        self.orders.iter().all(|&k| k == 0) && self.sigma_order == 0 && self.mean_order.is_none_or(|k| k == 0)
    }

    fn linear_ar_basis(&self, u: f64) -> Option<DMatrix<f64>> {
        if self.sigma_order != 0 || self.mean_order.is_some() {
            return None;
        }
        let p = self.orders.len();
        let mut b = DMatrix::zeros(p, self.alpha_len());
        let mut col = 0;
        for (j, k) in self.orders.iter().enumerate() {
            for i in 0..=*k {
                b[(j, col)] = u.powi(i as i32);
                col += 1;
            }
        }
        Some(b)
    }

    fn constant_sigma2_index(&self) -> Option<usize> {
        (self.fixed_sigma2.is_none() && self.sigma_order == 0).then(|| self.alpha_len())
    }

    fn aic_parameters(&self) -> usize {
        self.orders.len() + 1 + self.orders.iter().sum::<usize>()
    }

    /// Local Yule-Walker estimates on overlapping segments, projected onto
    /// the polynomial bases by least squares.
    fn warm_start(&self, x: &[f64]) -> Vec<f64> {
        let t_len = x.len();
        let p = self.orders.len();
        let var = x.iter().map(|v| v * v).sum::<f64>() / t_len.max(1) as f64;
        let fallback = || {
            let alpha: Vec<Vec<f64>> = self.orders.iter().map(|k| vec![0.0; k + 1]).collect();
            let mut s = vec![0.0; self.sigma_len()];
            if let Some(s0) = s.first_mut() {
                *s0 = var.max(1e-8);
            }
            let mean = vec![0.0; self.mean_order.map_or(0, |k| k + 1)];
            self.pack(&alpha, &s, &mean)
        };
        let n = (t_len / 4).max(4 * p + 8).min(t_len);
        if n <= p || t_len < 8 {
            return fallback();
        }
        let segs = 12usize.min(t_len - n + 1).max(1);
        let mut us = Vec::new();
        let mut thetas = Vec::new();
        let mut means = Vec::new();
        for j in 0..segs {
            let off = if segs == 1 { 0 } else { j * (t_len - n) / (segs - 1) };
            let seg = &x[off..off + n];
            let m = seg.iter().sum::<f64>() / n as f64;
            let u = (off as f64 + n as f64 / 2.0) / t_len as f64;
            let demeaned: Vec<f64> = seg.iter().map(|v| v - m).collect();
            let fit = if p == 0 {
                Some((Vec::new(), demeaned.iter().map(|v| v * v).sum::<f64>() / n as f64))
            } else {
                local_yule_walker(&demeaned, 0.5, p, &LocalWindow::taper(n, Taper::SineSquared))
                    .ok()
                    .map(|f| (f.alpha, f.sigma2))
            };
            if let Some(f) = fit {
                us.push(u);
                thetas.push(f);
                means.push(m);
            }
        }
        if us.is_empty() {
            return fallback();
        }
        let project = |values: &[f64], k: usize| -> Vec<f64> {
            let rows = values.len();
            let cols = k + 1;
            let v = DMatrix::from_fn(rows, cols, |i, j| us[i].powi(j as i32));
            let y = DVector::from_column_slice(values);
            let svd = v.svd(true, true);
            match svd.solve(&y, 1e-10) {
                Ok(c) => c.as_slice().to_vec(),
                Err(_) => {
                    let mut c = vec![0.0; cols];
                    c[0] = values.iter().sum::<f64>() / rows as f64;
                    c
                }
            }
        };
        let alpha: Vec<Vec<f64>> = self
            .orders
            .iter()
            .enumerate()
            .map(|(j, &k)| project(&thetas.iter().map(|t| t.0[j]).collect::<Vec<_>>(), k))
            .collect();
        let s2: Vec<f64> = thetas.iter().map(|t| t.1).collect();
        let mut s = if self.fixed_sigma2.is_some() {
            Vec::new()
        } else {
            project(&s2, self.sigma_order)
        };
        // Keep the starting variance curve positive.
        if !s.is_empty() && (0..=20).any(|i| poly(&s, i as f64 / 20.0) <= 0.0) {
            s.iter_mut().for_each(|v| *v = 0.0);
            s[0] = s2.iter().sum::<f64>() / s2.len() as f64;
        }
        let mean = self.mean_order.map_or(Vec::new(), |k| project(&means, k));
        let mut eta = self.pack(&alpha, &s, &mean);
        // Pull the AR curves away from the stability boundary.
        let n_alpha = self.alpha_len();
        for _ in 0..50 {
            if self.stability_margin(&eta, 41) > 0.02 {
                break;
            }
            eta[..n_alpha].iter_mut().for_each(|v| *v *= 0.9);
        }
        eta
    }

    fn to_spec(&self, eta: &[f64]) -> Result<TvModelSpec> {
        if eta.len() != self.dim() {
            return arg(format!("parameter vector has length {}, model needs {}", eta.len(), self.dim()));
        }
        let (alpha, s, m) = self.split(eta);
        let sigma = match (self.fixed_sigma2, self.sigma_order) {
            (Some(v), _) => ParameterCurve::constant(v.sqrt()),
            (None, 0) => ParameterCurve::constant(s[0].max(0.0).sqrt()),
            (None, _) => {
                let knots: Vec<f64> = (0..=200).map(|i| i as f64 / 200.0).collect();
                let values = knots.iter().map(|&u| poly(s, u).max(0.0).sqrt()).collect();
                ParameterCurve::sampled(knots, values)?
            }
        };
        let spec = TvModelSpec::tvar(alpha.iter().map(|c| ParameterCurve::polynomial(c.to_vec())).collect(), sigma);
        Ok(if m.is_empty() {
            spec
        } else {
            spec.with_mean(ParameterCurve::polynomial(m.to_vec()))
        })
    }
}

/// Outcome of a parametric or local fit.
#[derive(Debug, Clone, Serialize)]
pub struct FitResult {
    pub method: String,
    pub names: Vec<String>,
    pub eta: Vec<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Innovation variance (time average for time-varying `σ²`).
    pub sigma2: Option<f64>,
    pub aic: Option<f64>,
    pub covariance: Option<Vec<Vec<f64>>>,
}

impl FitResult {
    pub fn value(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.eta[i])
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("fit result serialises")
    }
}

pub(crate) fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Numerical identifiability at `η`: the Jacobian of `log f_η` on a probe
/// grid of `(u, λ)` points has full column rank, with smallest singular value
/// above `tol` times the largest.
pub fn identifiable(model: &dyn CurveModel, eta: &[f64], tol: f64) -> bool {
    let q = eta.len();
    let probes: Vec<(f64, f64)> = (0..9)
        .flat_map(|i| (0..16).map(move |j| (i as f64 / 8.0, PI * (j as f64 + 0.5) / 16.0)))
        .collect();
    let mut jac = DMatrix::zeros(probes.len() + if model.has_mean() { 9 } else { 0 }, q);
    let mut e = eta.to_vec();
    for c in 0..q {
        let h = 1e-5 * (1.0 + eta[c].abs());
        e[c] = eta[c] + h;
        let up: Vec<f64> = probes.iter().map(|&(u, l)| model.spectral_density(&e, u, l).ln()).collect();
        let mu_up: Vec<f64> = (0..9).map(|i| model.mean(&e, i as f64 / 8.0)).collect();
        e[c] = eta[c] - h;
        for (r, &(u, l)) in probes.iter().enumerate() {
            jac[(r, c)] = (up[r] - model.spectral_density(&e, u, l).ln()) / (2.0 * h);
        }
        if model.has_mean() {
            for i in 0..9 {
                jac[(probes.len() + i, c)] = (mu_up[i] - model.mean(&e, i as f64 / 8.0)) / (2.0 * h);
            }
        }
        e[c] = eta[c];
    }
    let sv = jac.singular_values();
    let max = sv.iter().fold(0.0f64, |m, v| m.max(*v));
    let min = sv.iter().fold(f64::INFINITY, |m, v| m.min(*v));
    max > 0.0 && min > tol * max
}
