//! Whittle-type likelihoods: local, classical, block and generalized.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::{aic, centered, matrices::build_u_matrix, matrix_rows, CurveModel, FitResult};
use crate::error::{arg, Error, Result};
use crate::numeric::{fft_forward, periodic_nodes, solve_spd};
use crate::optim::{minimize, OptimOptions};
use crate::spectral::{lag_series_on_grid, pre_periodogram_lags, SegmentPeriodogram};
use crate::taper::{Kernel, Taper};

fn grid_size(n: usize) -> usize {
    1024usize.max((2 * n).next_power_of_two())
}

/// `(1/4π) ∫ {log 4π² f + I/f} dλ` as a periodic sum over the grid of `i_grid`.
fn grid_whittle(i_grid: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let l = i_grid.len();
    let mut acc = 0.0;
    for (lam, iv) in periodic_nodes(l).into_iter().zip(i_grid) {
        let fv = f(lam);
        if !(fv > 0.0 && fv.is_finite()) {
            return f64::INFINITY;
        }
        acc += (4.0 * PI * PI * fv).ln() + iv / fv;
    }
    acc / (2.0 * l as f64)
}

fn domain(v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Domain("model spectral density is not positive".into()))
    }
}

fn check_eta(model: &dyn CurveModel, eta: &[f64]) -> Result<()> {
    if eta.len() != model.dim() {
        return arg(format!("parameter vector has length {}, model needs {}", eta.len(), model.dim()));
    }
    Ok(())
}

fn require_time_invariant(model: &dyn CurveModel) -> Result<()> {
    if !model.is_time_invariant() {
        return arg("a time-invariant model is required here");
    }
    Ok(())
}

pub(crate) fn fit_result(
    method: &str,
    model: &dyn CurveModel,
    eta: Vec<f64>,
    objective: f64,
    initial_objective: f64,
    iterations: usize,
    converged: bool,
    t_len: usize,
) -> FitResult {
    let sigma2 = model.average_sigma2(&eta);
    FitResult {
        method: method.into(),
        names: model.names(),
        objective,
        initial_objective,
        iterations,
        converged,
        sigma2: Some(sigma2),
        aic: (sigma2 > 0.0).then(|| aic(sigma2, model.aic_parameters(), t_len)),
        covariance: None,
        eta,
    }
}

pub(crate) fn optimize(
    method: &str,
    model: &dyn CurveModel,
    objective: &dyn Fn(&[f64]) -> f64,
    start: Vec<f64>,
    t_len: usize,
) -> Result<FitResult> {
    optimize_with(method, model, objective, start, t_len, &OptimOptions::default())
}

pub(crate) fn optimize_with(
    method: &str,
    model: &dyn CurveModel,
    objective: &dyn Fn(&[f64]) -> f64,
    start: Vec<f64>,
    t_len: usize,
    opts: &OptimOptions,
) -> Result<FitResult> {
    let f0 = objective(&start);
    if !f0.is_finite() {
        return Err(Error::Domain(format!("{method}: objective is not finite at the starting point")));
    }
    let r = minimize(objective, &start, opts);
    Ok(fit_result(method, model, r.x, r.value, r.initial_value, r.iterations, r.converged, t_len))
}

/// Local Whittle likelihood at `u0` with the tapered segment periodogram of
/// length `n`; the model is evaluated at `u0`.
pub fn local_whittle_likelihood(
    x: &[f64],
    u0: f64,
    model: &dyn CurveModel,
    eta: &[f64],
    n: usize,
    taper: &Taper,
) -> Result<f64> {
    check_eta(model, eta)?;
    let y = centered(model, eta, x);
    let seg = SegmentPeriodogram::new(&y, u0, n, taper)?;
    let i_grid = seg.on_grid(grid_size(n));
    domain(grid_whittle(&i_grid, |l| model.spectral_density(eta, u0, l)))
}

/// Minimiser of [`local_whittle_likelihood`] over a time-invariant model.
/// Starts from `start`, or from the model's warm start on the segment.
pub fn local_whittle_fit(
    x: &[f64],
    u0: f64,
    model: &dyn CurveModel,
    n: usize,
    taper: &Taper,
    start: Option<&[f64]>,
) -> Result<FitResult> {
    require_time_invariant(model)?;
    let l = grid_size(n);
    // Without a mean curve the periodogram does not depend on η.
    let fixed = if model.has_mean() {
        None
    } else {
        Some(SegmentPeriodogram::new(x, u0, n, taper)?.on_grid(l))
    };
    let objective = |eta: &[f64]| match &fixed {
        _ if !model.theta(eta, u0).admissible() => f64::INFINITY,
        Some(g) => grid_whittle(g, |lam| model.spectral_density(eta, u0, lam)),
        None => local_whittle_likelihood(x, u0, model, eta, n, taper).unwrap_or(f64::INFINITY),
    };
    let start = match start {
        Some(s) => {
            check_eta(model, s)?;
            s.to_vec()
        }
        None => {
            let off = crate::local::segment_offset(x.len(), u0, n).max(0) as usize;
            let end = (off + n).min(x.len());
            model.warm_start(&x[off.min(end.saturating_sub(1))..end])
        }
    };
    optimize("local-whittle", model, &objective, start, n)
}

/// Classical Whittle likelihood `(1/4π) ∫ {log 4π² f + I/f} dλ` with the
/// full-sample periodogram, for a time-invariant model.
pub fn whittle_likelihood(x: &[f64], model: &dyn CurveModel, eta: &[f64]) -> Result<f64> {
    require_time_invariant(model)?;
    check_eta(model, eta)?;
    let y = centered(model, eta, x);
    let t_len = y.len();
    let l = grid_size(t_len);
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    for (b, v) in buf.iter_mut().zip(y.iter()) {
        b.re = *v;
    }
    fft_forward(&mut buf);
    let i_grid: Vec<f64> = buf.iter().map(|z| z.norm_sqr() / (2.0 * PI * t_len as f64)).collect();
    domain(grid_whittle(&i_grid, |lam| model.spectral_density(eta, 0.5, lam)))
}

/// Evaluation route for the generalized Whittle likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GwRoute {
    /// Lag-domain sums of pre-periodogram products against `1/f`.
    Lags,
    /// Summation of the pre-periodogram over a Fourier grid.
    Grid,
    /// Quadratic form in the generalized Toeplitz matrix `U_T(1/f)`.
    Matrix,
}

/// Pre-periodogram lags `P_t(0..=k_max)`, zero beyond the sample.
fn truncated_lags(y: &[f64], t: usize, k_max: usize) -> Vec<f64> {
    let t_len = y.len();
    (0..=k_max)
        .map(|k| {
            let m = k / 2;
            let hi = t + m + k % 2;
            let lo = t as i64 - m as i64;
            if hi > t_len || lo < 1 {
                0.0
            } else {
                y[hi - 1] * y[(lo - 1) as usize]
            }
        })
        .collect()
}

fn gw_lags(model: &dyn CurveModel, eta: &[f64], lags: &[Vec<f64>]) -> f64 {
    let t_len = lags.len();
    let mut acc = 0.0;
    for (i, c) in lags.iter().enumerate() {
        let th = model.theta(eta, (i + 1) as f64 / t_len as f64);
        if !th.admissible() {
            return f64::INFINITY;
        }
        acc += th.whittle_term(c);
    }
    acc / t_len as f64
}

fn gw_lag_table(model: &dyn CurveModel, eta: &[f64], y: &[f64]) -> Vec<Vec<f64>> {
    let probe = model.theta(eta, 0.5);
    (1..=y.len())
        .map(|t| {
            if probe.is_ar() {
                truncated_lags(y, t, model.order())
            } else {
                pre_periodogram_lags(y, t)
            }
        })
        .collect()
}

/// Generalized Whittle likelihood
/// `(1/T) Σ_t (1/4π) ∫ {log 4π² f_η(t/T, λ) + J(t/T, λ)/f_η(t/T, λ)} dλ`.
pub fn generalized_whittle_likelihood(x: &[f64], model: &dyn CurveModel, eta: &[f64]) -> Result<f64> {
    generalized_whittle_with(x, model, eta, GwRoute::Lags)
}

pub fn generalized_whittle_with(x: &[f64], model: &dyn CurveModel, eta: &[f64], route: GwRoute) -> Result<f64> {
    check_eta(model, eta)?;
    if x.is_empty() {
        return arg("empty series");
    }
    let y = centered(model, eta, x);
    let t_len = y.len();
    let tf = t_len as f64;
    let v = match route {
        GwRoute::Lags => gw_lags(model, eta, &gw_lag_table(model, eta, &y)),
        GwRoute::Grid => {
            let l = 256usize.max((2 * t_len).next_power_of_two());
            let mut acc = 0.0;
            for t in 1..=t_len {
                let j = lag_series_on_grid(&pre_periodogram_lags(&y, t), l);
                let u = t as f64 / tf;
                acc += grid_whittle(&j, |lam| model.spectral_density(eta, u, lam));
            }
            acc / tf
        }
        GwRoute::Matrix => {
            let u_mat = build_u_matrix(&|u, lam| 1.0 / model.spectral_density(eta, u, lam), t_len)?;
            let yv = DVector::from_column_slice(&y);
            let quad = yv.dot(&(&u_mat * &yv));
            let log: f64 = (1..=t_len).map(|t| model.theta(eta, t as f64 / tf).log_term()).sum();
            log / tf + quad / (8.0 * PI * PI * tf)
        }
    };
    domain(v)
}

/// Closed-form minimiser of the generalized Whittle likelihood over models
/// with linear AR curves and constant `σ²`, ignoring the root-modulus term.
fn gw_linear_start(model: &dyn CurveModel, x: &[f64]) -> Option<Vec<f64>> {
    let t_len = x.len();
    let p = model.order();
    let lags: Vec<Vec<f64>> = (1..=t_len).map(|t| truncated_lags(x, t, p)).collect();
    let bases: Vec<DMatrix<f64>> = (1..=t_len)
        .map(|t| model.linear_ar_basis(t as f64 / t_len as f64))
        .collect::<Option<_>>()?;
    let sol = linear_ar_solve(&bases, &lags)?;
    assemble_linear(model, sol)
}

/// Solves `(Σ B'R B) b = -Σ B'r` where `R`, `r` are the Toeplitz blocks of
/// each lag vector; returns `b` and the mean residual variance.
fn linear_ar_solve(bases: &[DMatrix<f64>], lags: &[Vec<f64>]) -> Option<(Vec<f64>, f64)> {
    let q = bases.first()?.ncols();
    let p = bases[0].nrows();
    let mut a = DMatrix::<f64>::zeros(q, q);
    let mut rhs = DVector::<f64>::zeros(q);
    for (b, c) in bases.iter().zip(lags) {
        let r_mat = DMatrix::from_fn(p, p, |i, j| c[i.abs_diff(j)]);
        let r_vec = DVector::from_fn(p, |i, _| c[i + 1]);
        a += b.transpose() * &r_mat * b;
        rhs -= b.transpose() * &r_vec;
    }
    let sol = solve_spd(&a, &rhs).ok()?;
    let mut s2 = 0.0;
    for (b, c) in bases.iter().zip(lags) {
        let alpha = b * &sol;
        let r_mat = DMatrix::from_fn(p, p, |i, j| c[i.abs_diff(j)]);
        let r_vec = DVector::from_fn(p, |i, _| c[i + 1]);
        s2 += c[0] + 2.0 * alpha.dot(&r_vec) + alpha.dot(&(&r_mat * &alpha));
    }
    Some((sol.as_slice().to_vec(), s2 / lags.len() as f64))
}

fn assemble_linear(model: &dyn CurveModel, (b, s2): (Vec<f64>, f64)) -> Option<Vec<f64>> {
    let mut eta = b;
    if let Some(idx) = model.constant_sigma2_index() {
        if idx != eta.len() {
            return None;
        }
        eta.push(s2);
    }
    (eta.len() == model.dim()).then_some(eta)
}

/// Minimiser of the generalized Whittle likelihood.
pub fn generalized_whittle_fit(x: &[f64], model: &dyn CurveModel, start: Option<&[f64]>) -> Result<FitResult> {
    let t_len = x.len();
    let fixed = (!model.has_mean()).then(|| {
        let eta0 = vec![0.0; model.dim()];
        gw_lag_table(model, &eta0, x)
    });
    let objective = |eta: &[f64]| match &fixed {
        Some(lags) => gw_lags(model, eta, lags),
        None => generalized_whittle_likelihood(x, model, eta).unwrap_or(f64::INFINITY),
    };
    let start = match start {
        Some(s) => {
            check_eta(model, s)?;
            s.to_vec()
        }
        None => gw_linear_start(model, x)
            .filter(|s| objective(s).is_finite())
            .unwrap_or_else(|| model.warm_start(x)),
    };
    optimize("generalized-whittle", model, &objective, start, t_len)
}

/// Kernel-weighted local version at `u0`:
/// `(1/bT) Σ_t K((u0 - t/T)/b) ℓ*_t(θ)` over a time-invariant model, where
/// `ℓ*_t` is the local Whittle term built from the pre-periodogram at `t`.
pub fn local_generalized_whittle_fit(
    x: &[f64],
    u0: f64,
    b: f64,
    kernel: &Kernel,
    model: &dyn CurveModel,
    start: Option<&[f64]>,
) -> Result<FitResult> {
    require_time_invariant(model)?;
    let t_len = x.len();
    let tf = t_len as f64;
    if !(b > 0.0 && b <= 1.0) || b * tf < 2.0 {
        return Err(Error::Window(format!("bandwidth {b} unusable at T = {t_len}")));
    }
    let weights: Vec<(usize, f64)> = (1..=t_len)
        .map(|t| (t, kernel.value((u0 - t as f64 / tf) / b)))
        .filter(|(_, w)| *w != 0.0)
        .collect();
    let mass: f64 = weights.iter().map(|(_, w)| w).sum();
    let edge = u0 - b / 2.0 < 0.0 || u0 + b / 2.0 > 1.0;
    let norm = if edge { mass } else { b * tf };
    if norm <= 0.0 {
        return Err(Error::Window(format!("no kernel mass inside the sample at u0 = {u0}")));
    }
    let ar = model.theta(&vec![0.0; model.dim()], u0).is_ar();
    let weighted = |y: &[f64]| {
        let k_max = if ar { model.order() } else { t_len - 1 };
        let mut c = vec![0.0; k_max + 1];
        for &(t, w) in &weights {
            for (ck, pk) in c.iter_mut().zip(truncated_lags(y, t, k_max)) {
                *ck += w * pk / norm;
            }
        }
        c
    };
    let fixed = (!model.has_mean()).then(|| weighted(x));
    let objective = |eta: &[f64]| {
        let th = model.theta(eta, u0);
        if !th.admissible() {
            return f64::INFINITY;
        }
        let c = match &fixed {
            Some(c) => c.clone(),
            None => weighted(&centered(model, eta, x)),
        };
        let v = th.log_term() * mass / norm + th.data_term(&c);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let start = match start {
        Some(s) => s.to_vec(),
        None => {
            let lo = ((u0 - b / 2.0) * tf).floor().max(0.0) as usize;
            let hi = (((u0 + b / 2.0) * tf).ceil() as usize).min(t_len);
            model.warm_start(&x[lo.min(hi.saturating_sub(1))..hi])
        }
    };
    let mut fit = optimize("local-generalized-whittle", model, &objective, start, (b * tf) as usize)?;
    fit.aic = None;
    Ok(fit)
}

/// Segmentation for the block Whittle likelihood.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockWhittleConfig {
    /// Segment length `N`.
    pub n: usize,
    /// Shift `S` between segments.
    pub s: usize,
    pub taper: Taper,
    /// Adds half-length periodograms covering each end of the sample.
    pub edge_segments: bool,
}

impl BlockWhittleConfig {
    pub fn new(n: usize, s: usize) -> Self {
        Self {
            n,
            s,
            taper: Taper::SineSquared,
            edge_segments: false,
        }
    }

    pub fn with_taper(mut self, taper: Taper) -> Self {
        self.taper = taper;
        self
    }

    pub fn with_edge_segments(mut self, on: bool) -> Self {
        self.edge_segments = on;
        self
    }

    /// Segments `(offset, length, u)`; segment `j` covers times
    /// `offset+1..=offset+length` and sits at `u_j = (offset + length/2)/T`.
    pub fn segments(&self, t_len: usize) -> Result<Vec<(usize, usize, f64)>> {
        let (n, s) = (self.n, self.s);
        if n < 2 || n > t_len {
            return Err(Error::Segmentation(format!("segment length N = {n} must lie in 2..={t_len}")));
        }
        let tf = t_len as f64;
        let mut out = Vec::new();
        if n == t_len {
            out.push((0, n, (n / 2) as f64 / tf));
        } else {
            if s == 0 || (t_len - n) % s != 0 {
                return Err(Error::Segmentation(format!(
                    "T = {t_len} is not of the form S(M-1) + N with N = {n}, S = {s}"
                )));
            }
            let m = (t_len - n) / s + 1;
            out.extend((0..m).map(|j| (j * s, n, (j * s + n / 2) as f64 / tf)));
        }
        if self.edge_segments && n >= 4 && n < t_len {
            let h = n / 2;
            out.insert(0, (0, h, (h / 2) as f64 / tf));
            out.push((t_len - h, h, (t_len - h + h / 2) as f64 / tf));
        }
        Ok(out)
    }
}

/// Tapered lag products `(1/H) Σ_s h(s/N) h((s+k)/N) y y` on one segment.
fn segment_lags(y: &[f64], off: usize, n: usize, taper: &Taper, k_max: usize) -> Vec<f64> {
    let nf = n as f64;
    let hw: Vec<f64> = (1..=n).map(|s| taper.value(s as f64 / nf)).collect();
    let h_norm: f64 = hw.iter().map(|h| h * h).sum();
    let z: Vec<f64> = (0..n).map(|i| hw[i] * y[off + i]).collect();
    (0..=k_max.min(n - 1))
        .map(|k| (0..n - k).map(|i| z[i] * z[i + k]).sum::<f64>() / h_norm)
        .collect()
}

struct BlockData {
    segments: Vec<(usize, usize, f64)>,
    lags: Vec<Vec<f64>>,
}

fn block_data(model: &dyn CurveModel, eta: &[f64], y: &[f64], cfg: &BlockWhittleConfig) -> Result<BlockData> {
    let segments = cfg.segments(y.len())?;
    let ar = model.theta(eta, 0.5).is_ar();
    let lags = segments
        .iter()
        .map(|&(off, n, _)| segment_lags(y, off, n, &cfg.taper, if ar { model.order() } else { n - 1 }))
        .collect();
    Ok(BlockData { segments, lags })
}

fn block_value(model: &dyn CurveModel, eta: &[f64], data: &BlockData) -> f64 {
    let mut acc = 0.0;
    for (&(_, _, u), c) in data.segments.iter().zip(&data.lags) {
        let th = model.theta(eta, u);
        if !th.admissible() {
            return f64::INFINITY;
        }
        acc += th.whittle_term(c);
    }
    let v = acc / data.segments.len() as f64;
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

/// Block Whittle likelihood: the average of local Whittle likelihoods on the
/// segments of `cfg`.
pub fn block_whittle_likelihood(x: &[f64], model: &dyn CurveModel, eta: &[f64], cfg: &BlockWhittleConfig) -> Result<f64> {
    check_eta(model, eta)?;
    let y = centered(model, eta, x);
    let data = block_data(model, eta, &y, cfg)?;
    domain(block_value(model, eta, &data))
}

/// Block Whittle fit by weighted least squares on the segment Yule-Walker
/// systems; needs linear AR curves and constant `σ²`.
pub fn block_whittle_closed_form(x: &[f64], model: &dyn CurveModel, cfg: &BlockWhittleConfig) -> Result<FitResult> {
    let segments = cfg.segments(x.len())?;
    let p = model.order();
    if p == 0 {
        return Err(Error::Capability("closed form needs at least one AR curve".into()));
    }
    let bases: Vec<DMatrix<f64>> = segments
        .iter()
        .map(|&(_, _, u)| model.linear_ar_basis(u))
        .collect::<Option<_>>()
        .ok_or_else(|| Error::Capability("closed form needs linear AR curves and constant innovation variance".into()))?;
    let lags: Vec<Vec<f64>> = segments
        .iter()
        .map(|&(off, n, _)| segment_lags(x, off, n, &cfg.taper, p))
        .collect();
    if lags.iter().any(|c| c.len() <= p) {
        return Err(Error::Segmentation(format!("segments are too short for order {p}")));
    }
    let (b, s2) = linear_ar_solve(&bases, &lags).ok_or_else(|| {
        Error::Rank {
            cond: f64::INFINITY,
        }
    })?;
    let eta = assemble_linear(model, (b, s2))
        .ok_or_else(|| Error::Capability("model parameter layout does not support the closed form".into()))?;
    // At the solution the data term is 1/2; the log term assumes causal curves.
    let objective = block_whittle_likelihood(x, model, &eta, cfg).unwrap_or(0.5 * ((2.0 * PI * s2).ln() + 1.0));
    let mut fit = fit_result("block-whittle", model, eta, objective, objective, 0, true, x.len());
    fit.sigma2 = Some(s2);
    fit.aic = (s2 > 0.0).then(|| aic(s2, model.aic_parameters(), x.len()));
    Ok(fit)
}

/// Block Whittle fit by quasi-Newton iteration from `start` (default: the
/// closed form when available, else the model's warm start).
pub fn block_whittle_fit_generic(
    x: &[f64],
    model: &dyn CurveModel,
    cfg: &BlockWhittleConfig,
    start: Option<&[f64]>,
) -> Result<FitResult> {
    let eta0 = vec![0.0; model.dim()];
    let fixed = if model.has_mean() {
        None
    } else {
        Some(block_data(model, &eta0, x, cfg)?)
    };
    cfg.segments(x.len())?;
    let objective = |eta: &[f64]| match &fixed {
        Some(d) => block_value(model, eta, d),
        None => block_whittle_likelihood(x, model, eta, cfg).unwrap_or(f64::INFINITY),
    };
    let start = match start {
        Some(s) => {
            check_eta(model, s)?;
            s.to_vec()
        }
        None => match block_whittle_closed_form(x, model, cfg) {
            Ok(f) => f.eta,
            Err(_) => model.warm_start(x),
        },
    };
    let mut fit = optimize("block-whittle", model, &objective, start, x.len())?;
    if let Some(s2) = fit.sigma2 {
        fit.aic = (s2 > 0.0).then(|| aic(s2, model.aic_parameters(), x.len()));
    }
    Ok(fit)
}

/// Block Whittle fit: closed form when the model allows it, iterative otherwise.
pub fn block_whittle_fit(x: &[f64], model: &dyn CurveModel, cfg: &BlockWhittleConfig) -> Result<FitResult> {
    match block_whittle_closed_form(x, model, cfg) {
        Ok(f) => Ok(f),
        Err(Error::Capability(_)) => block_whittle_fit_generic(x, model, cfg, None),
        Err(e) => Err(e),
    }
}

/// Attaches the model-based covariance `Γ(η̂)⁻¹ / T` to a fit.
pub fn attach_covariance(fit: &mut FitResult, model: &dyn CurveModel, t_len: usize) {
    if let Ok(g) = super::fisher_information(model, &fit.eta) {
        if let Some(inv) = g.try_inverse() {
            fit.covariance = Some(matrix_rows(&(inv / t_len as f64)));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::likelihood::PolyTvAr;
    use crate::local::{local_yule_walker, LocalWindow};
    use crate::model::{simulate, TvModelSpec};
    use crate::ParameterCurve;

    fn fig1(t_len: usize, seed: u64) -> Vec<f64> {
        simulate(&TvModelSpec::oscillating_ar2(), t_len, seed).unwrap().values
    }

    #[test]
    fn local_whittle_is_yule_walker() {
        let x = fig1(128, 5);
        let model = PolyTvAr::stationary(2);
        for &u0 in &[0.3, 0.5, 0.7] {
            let yw = local_yule_walker(&x, u0, 2, &LocalWindow::taper(64, Taper::SineSquared)).unwrap();
            let fit = local_whittle_fit(&x, u0, &model, 64, &Taper::SineSquared, Some(&[0.0, 0.0, 1.0])).unwrap();
            assert!(fit.converged);
            for j in 0..2 {
                assert!((fit.eta[j] - yw.alpha[j]).abs() < 1e-8, "u0 {u0}: {:?} vs {:?}", fit.eta, yw.alpha);
            }
            assert!((fit.eta[2] / yw.sigma2 - 1.0).abs() < 1e-8, "{} vs {}", fit.eta[2], yw.sigma2);
        }
    }

    #[test]
    fn white_noise_whittle_variance_is_periodogram_mass() {
        let x = fig1(128, 2);
        let model = PolyTvAr::stationary(0);
        let n = 32;
        let fit = local_whittle_fit(&x, 0.5, &model, n, &Taper::Rectangular, Some(&[1.0])).unwrap();
        // ∫ I dλ is the lag-zero tapered covariance.
        let c0 = crate::local::tapered_local_covariance(&x, 0.5, 0, n, &Taper::Rectangular).unwrap().value;
        assert!((fit.eta[0] - c0).abs() < 1e-8 * c0);
    }

    #[test]
    fn stationary_reduction() {
        let model = PolyTvAr::stationary(2);
        let eta = [-0.4, 0.2, 1.3];
        let cfg = BlockWhittleConfig::new(200, 1).with_taper(Taper::Rectangular);
        for seed in 0..3 {
            let x = simulate(&TvModelSpec::ar1(0.5, 1.0), 200, seed).unwrap().values;
            let w = whittle_likelihood(&x, &model, &eta).unwrap();
            let gw = generalized_whittle_likelihood(&x, &model, &eta).unwrap();
            let bw = block_whittle_likelihood(&x, &model, &eta, &cfg).unwrap();
            assert!((w - gw).abs() < 1e-10, "{w} {gw}");
            assert!((w - bw).abs() < 1e-10, "{w} {bw}");
        }
    }

    #[test]
    fn gw_routes_agree() {
        let mut rng = crate::mc::rng(9);
        let x: Vec<f64> = (0..96).map(|_| rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng)).collect();
        let model = PolyTvAr::new(vec![2, 1]).with_sigma_order(1).with_mean_order(1);
        let eta = [-0.5, 0.3, -0.4, 0.2, 0.1, 1.1, 0.4, 0.1, -0.2];
        let a = generalized_whittle_with(&x, &model, &eta, GwRoute::Lags).unwrap();
        let b = generalized_whittle_with(&x, &model, &eta, GwRoute::Grid).unwrap();
        let c = generalized_whittle_with(&x, &model, &eta, GwRoute::Matrix).unwrap();
        assert!((a - b).abs() < 1e-8 && (a - c).abs() < 1e-8, "{a} {b} {c}");
    }

    #[test]
    fn segmentation() {
        let cfg = BlockWhittleConfig::new(64, 32);
        let segs = cfg.segments(128).unwrap();
        assert_eq!(segs.len(), 3);
        assert_eq!(segs[0], (0, 64, 0.25));
        assert_eq!(segs[2].0 + segs[2].1, 128);
        assert!(matches!(BlockWhittleConfig::new(64, 30).segments(128), Err(Error::Segmentation(_))));
        assert_eq!(BlockWhittleConfig::new(16, 8).segments(128).unwrap()[0].2, 0.0625);
        let e = BlockWhittleConfig::new(16, 8).with_edge_segments(true).segments(128).unwrap();
        assert_eq!(e.len(), 17);
        assert_eq!(e[0], (0, 8, 4.0 / 128.0));
    }

    #[test]
    fn block_closed_form_matches_iterative() {
        let x = fig1(256, 4);
        let model = PolyTvAr::new(vec![2, 0]);
        let cfg = BlockWhittleConfig::new(32, 16);
        let closed = block_whittle_closed_form(&x, &model, &cfg).unwrap();
        let var = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        let start = [0.0, 0.0, 0.0, 0.0, var];
        let iter = block_whittle_fit_generic(&x, &model, &cfg, Some(&start)).unwrap();
        let diff = closed.eta.iter().zip(&iter.eta).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        assert!(diff < 1e-6, "{:?} vs {:?}", closed.eta, iter.eta);
        assert!(closed.objective <= iter.objective + 1e-12);
    }

    #[test]
    fn scaling_invariance() {
        let x = fig1(256, 8);
        let xs: Vec<f64> = x.iter().map(|v| 3.0 * v).collect();
        let model = PolyTvAr::new(vec![2, 0]);
        let cfg = BlockWhittleConfig::new(32, 16);
        let a = block_whittle_closed_form(&x, &model, &cfg).unwrap();
        let b = block_whittle_closed_form(&xs, &model, &cfg).unwrap();
        for j in 0..4 {
            assert!((a.eta[j] - b.eta[j]).abs() < 1e-12);
        }
        assert!((b.eta[4] / a.eta[4] - 9.0).abs() < 1e-10);
        let ga = generalized_whittle_fit(&x, &model, None).unwrap();
        let gb = generalized_whittle_fit(&xs, &model, None).unwrap();
        for j in 0..4 {
            assert!((ga.eta[j] - gb.eta[j]).abs() < 1e-8, "{:?} {:?}", ga.eta, gb.eta);
        }
        assert!((gb.eta[4] / ga.eta[4] - 9.0).abs() < 1e-7);
    }

    #[test]
    fn local_gw_tracks_truth() {
        let spec = TvModelSpec::tvar(
            vec![ParameterCurve::polynomial(vec![-0.8, 1.0])],
            ParameterCurve::constant(1.0),
        );
        let x = simulate(&spec, 4096, 1).unwrap().values;
        let fit = local_generalized_whittle_fit(&x, 0.5, 0.2, &Kernel::CanonicalQuadratic, &PolyTvAr::stationary(1), None)
            .unwrap();
        assert!((fit.eta[0] + 0.3).abs() < 0.08, "{:?}", fit.eta);
        assert!((fit.eta[1] - 1.0).abs() < 0.15);
    }
}
