//! Local covariance and Yule-Walker estimation with their asymptotic bias,
//! variance and optimal bandwidths.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{arg, Error, Result};
use crate::model::{Family, TvModelSpec};
use crate::numeric::{condition_number, solve_spd, toeplitz};
use crate::taper::{Kernel, Taper};

/// Step for central second differences in `u`.
pub const CURVATURE_STEP: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    Tapered,
    KernelCentered,
    KernelLagged,
}

#[derive(Debug, Clone, Serialize)]
pub struct LocalEstimate {
    pub u0: f64,
    pub value: f64,
    pub bandwidth: f64,
    pub estimator: Estimator,
    pub stderr: Option<f64>,
    /// Window was clipped at the sample boundary.
    pub edge: bool,
    /// Effective window in rescaled time.
    pub window: (f64, f64),
}

/// How lagged products are located for kernel estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelForm {
    /// Weight at the pair midpoint `t + k/2`.
    #[default]
    Centered,
    /// Weight at the regression time `t` of `X_{t-i} X_{t-j}`.
    Lagged,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LocalWindow {
    Taper { n: usize, taper: Taper },
    Kernel { b: f64, kernel: Kernel, form: KernelForm },
}

impl LocalWindow {
    pub fn taper(n: usize, taper: Taper) -> Self {
        Self::Taper { n, taper }
    }

    pub fn kernel(b: f64, kernel: Kernel) -> Self {
        Self::Kernel {
            b,
            kernel,
            form: KernelForm::Centered,
        }
    }

    pub fn lagged(b: f64, kernel: Kernel) -> Self {
        Self::Kernel {
            b,
            kernel,
            form: KernelForm::Lagged,
        }
    }

    pub fn bandwidth(&self, t_len: usize) -> f64 {
        match self {
            Self::Taper { n, .. } => *n as f64 / t_len as f64,
            Self::Kernel { b, .. } => *b,
        }
    }
}

/// Segment `[u0 T] - N/2 + s`, `s = 1..N`: returns the time of `s = 0`.
pub(crate) fn segment_offset(t_len: usize, u0: f64, n: usize) -> i64 {
    (u0 * t_len as f64).floor() as i64 - (n / 2) as i64
}

fn check_u0(u0: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&u0) {
        return arg(format!("u0 must lie in [0, 1], got {u0}"));
    }
    Ok(())
}

fn check_segment(t_len: usize, n: usize) -> Result<()> {
    if n == 0 || n > t_len {
        return arg(format!("segment length must satisfy 1 <= N <= T = {t_len}, got {n}"));
    }
    Ok(())
}

fn check_bandwidth(t_len: usize, b: f64) -> Result<()> {
    if !(b > 0.0 && b <= 1.0) {
        return arg(format!("bandwidth must lie in (0, 1], got {b}"));
    }
    if b * (t_len as f64) < 2.0 {
        return Err(Error::Window(format!("b T = {:.3} is below 2", b * t_len as f64)));
    }
    Ok(())
}

/// Tapered covariance on the segment about `u0`. Out-of-range segment points
/// are dropped and the normaliser is summed over the retained points.
pub fn tapered_local_covariance(x: &[f64], u0: f64, k: i64, n: usize, taper: &Taper) -> Result<LocalEstimate> {
    let t_len = x.len();
    check_u0(u0)?;
    check_segment(t_len, n)?;
    let lag = k.unsigned_abs() as usize;
    if lag >= n {
        return arg(format!("|k| = {lag} must be below the segment length {n}"));
    }
    let off = segment_offset(t_len, u0, n);
    let inside = |s: usize| {
        let t = off + s as i64;
        t >= 1 && t <= t_len as i64
    };
    let nf = n as f64;
    let h_norm: f64 = (1..=n).filter(|&s| inside(s)).map(|s| taper.value(s as f64 / nf).powi(2)).sum();
    if h_norm == 0.0 {
        return Err(Error::Window(format!("segment about u0 = {u0} is empty")));
    }
    let mut acc = 0.0;
    for s in 1..=n - lag {
        if inside(s) && inside(s + lag) {
            let a = (off + s as i64 - 1) as usize;
            acc += taper.value(s as f64 / nf) * taper.value((s + lag) as f64 / nf) * x[a] * x[a + lag];
        }
    }
    let first = (off + 1).max(1);
    let last = (off + n as i64).min(t_len as i64);
    Ok(LocalEstimate {
        u0,
        value: acc / h_norm,
        bandwidth: nf / t_len as f64,
        estimator: Estimator::Tapered,
        stderr: None,
        edge: off + 1 < 1 || off + n as i64 > t_len as i64,
        window: (first as f64 / t_len as f64, last as f64 / t_len as f64),
    })
}

fn window_bounds(u0: f64, b: f64) -> ((f64, f64), bool) {
    let lo = u0 - b / 2.0;
    let hi = u0 + b / 2.0;
    ((lo.max(0.0), hi.min(1.0)), lo < 0.0 || hi > 1.0)
}

/// Kernel weight sum and weighted sum of `X_{t-i} X_{t-j}` over all `t` whose
/// lagged indices lie in the sample, with weights at `(t - shift)/T`.
fn weighted_products(x: &[f64], u0: f64, b: f64, kernel: &Kernel, i: i64, j: i64, shift: f64) -> (f64, f64) {
    let t_len = x.len() as i64;
    let tf = t_len as f64;
    // Weight nonzero only for |u0 - (t - shift)/T| <= b/2.
    let t_lo = ((u0 - b / 2.0) * tf + shift).ceil() as i64;
    let t_hi = ((u0 + b / 2.0) * tf + shift).floor() as i64;
    let lo = t_lo.max(1 + i.max(j));
    let hi = t_hi.min(t_len + i.min(j));
    let (mut w_sum, mut acc) = (0.0, 0.0);
    for t in lo..=hi {
        let w = kernel.value((u0 - (t as f64 - shift) / tf) / b);
        w_sum += w;
        acc += w * x[(t - i - 1) as usize] * x[(t - j - 1) as usize];
    }
    (w_sum, acc)
}

fn kernel_estimate(
    x: &[f64],
    u0: f64,
    b: f64,
    kernel: &Kernel,
    (i, j): (i64, i64),
    shift: f64,
    estimator: Estimator,
) -> Result<LocalEstimate> {
    check_u0(u0)?;
    check_bandwidth(x.len(), b)?;
    let (w_sum, acc) = weighted_products(x, u0, b, kernel, i, j, shift);
    let (window, edge) = window_bounds(u0, b);
    let norm = if edge { w_sum } else { b * x.len() as f64 };
    if norm <= 0.0 {
        return Err(Error::Window(format!("no kernel mass inside the sample at u0 = {u0}")));
    }
    Ok(LocalEstimate {
        u0,
        value: acc / norm,
        bandwidth: b,
        estimator,
        stderr: None,
        edge,
        window,
    })
}

/// Kernel covariance with weights at pair midpoints:
/// `(1/bT) Σ_t K((u0 - (t + k/2)/T)/b) X_t X_{t+k}`. Windows reaching past the
/// sample are renormalised by the kernel mass inside it.
pub fn kernel_local_covariance(x: &[f64], u0: f64, k: i64, b: f64, kernel: &Kernel) -> Result<LocalEstimate> {
    let k = k.abs();
    // X_t X_{t+k} = X_{s-i} X_{s-j} with s = t + k, i = k, j = 0, weight at s - k/2.
    kernel_estimate(x, u0, b, kernel, (k, 0), k as f64 / 2.0, Estimator::KernelCentered)
}

/// Regression-form kernel moment `(1/bT) Σ_t K((u0 - t/T)/b) X_{t-i} X_{t-j}`.
pub fn kernel_lagged_covariance(x: &[f64], u0: f64, i: i64, j: i64, b: f64, kernel: &Kernel) -> Result<LocalEstimate> {
    kernel_estimate(x, u0, b, kernel, (i, j), 0.0, Estimator::KernelLagged)
}

/// Kernel-weighted moment matrix `M[i][j] = Σ_t w_t X_{t-i} X_{t-j}`,
/// `i, j = 0..=p`, over the common range `t = p+1..=T`, with the weight sum.
pub(crate) fn lagged_moment_matrix(x: &[f64], u0: f64, b: f64, kernel: &Kernel, p: usize) -> (DMatrix<f64>, f64) {
    let t_len = x.len();
    let tf = t_len as f64;
    let t_lo = (((u0 - b / 2.0) * tf).ceil() as i64).max(p as i64 + 1);
    let t_hi = (((u0 + b / 2.0) * tf).floor() as i64).min(t_len as i64);
    let mut m = DMatrix::<f64>::zeros(p + 1, p + 1);
    let mut w_sum = 0.0;
    for t in t_lo..=t_hi {
        let w = kernel.value((u0 - t as f64 / tf) / b);
        if w == 0.0 {
            continue;
        }
        w_sum += w;
        let t = t as usize;
        for i in 0..=p {
            let xi = w * x[t - 1 - i];
            for j in i..=p {
                m[(i, j)] += xi * x[t - 1 - j];
            }
        }
    }
    for i in 0..=p {
        for j in 0..i {
            m[(i, j)] = m[(j, i)];
        }
    }
    (m, w_sum)
}

#[derive(Debug, Clone, Serialize)]
pub struct YuleWalkerFit {
    pub u0: f64,
    pub alpha: Vec<f64>,
    pub sigma2: f64,
    pub bandwidth: f64,
    pub edge: bool,
    /// Condition number of the estimated covariance matrix.
    pub condition: f64,
}

/// Local covariances `ĉ(u0, 0..=p)` under a taper or centered-kernel window.
pub fn local_covariances(x: &[f64], u0: f64, max_lag: usize, window: &LocalWindow) -> Result<(Vec<f64>, bool)> {
    let mut edge = false;
    let c = (0..=max_lag as i64)
        .map(|k| {
            let e = match window {
                LocalWindow::Taper { n, taper } => tapered_local_covariance(x, u0, k, *n, taper)?,
                LocalWindow::Kernel { b, kernel, .. } => kernel_local_covariance(x, u0, k, *b, kernel)?,
            };
            edge |= e.edge;
            Ok(e.value)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((c, edge))
}

/// Yule-Walker solve `α = -R⁻¹ r`, `σ² = c0 + α'r`.
pub fn yule_walker_solve(r_mat: &DMatrix<f64>, r_vec: &DVector<f64>, c0: f64) -> Result<(Vec<f64>, f64, f64)> {
    let cond = condition_number(r_mat);
    let alpha = -solve_spd(r_mat, r_vec)?;
    let sigma2 = c0 + alpha.dot(r_vec);
    Ok((alpha.as_slice().to_vec(), sigma2, cond))
}

/// Local Yule-Walker estimate of a tvAR(p) at `u0`. Taper and centered-kernel
/// windows use the Toeplitz matrix of local covariances; the lagged-kernel
/// window uses the regression moment matrix over a common time range.
pub fn local_yule_walker(x: &[f64], u0: f64, p: usize, window: &LocalWindow) -> Result<YuleWalkerFit> {
    if p == 0 {
        return arg("order p must be at least 1");
    }
    check_u0(u0)?;
    let t_len = x.len();
    let (r_mat, r_vec, c0, edge) = match window {
        LocalWindow::Kernel {
            b,
            kernel,
            form: KernelForm::Lagged,
        } => {
            check_bandwidth(t_len, *b)?;
            let (m, w_sum) = lagged_moment_matrix(x, u0, *b, kernel, p);
            let (_, edge) = window_bounds(u0, *b);
            let norm = if edge { w_sum } else { b * t_len as f64 };
            if norm <= 0.0 {
                return Err(Error::Window(format!("no kernel mass inside the sample at u0 = {u0}")));
            }
            let m = m / norm;
            let r_mat = m.view((1, 1), (p, p)).into_owned();
            let r_vec = DVector::from_fn(p, |i, _| m[(i + 1, 0)]);
            (r_mat, r_vec, m[(0, 0)], edge)
        }
        _ => {
            if let LocalWindow::Taper { n, .. } = window {
                if p >= *n {
                    return arg("order must be below the segment length");
                }
            }
            let (c, edge) = local_covariances(x, u0, p, window)?;
            (toeplitz(&c, p), DVector::from_fn(p, |i, _| c[i + 1]), c[0], edge)
        }
    };
    let (alpha, sigma2, condition) = yule_walker_solve(&r_mat, &r_vec, c0)?;
    Ok(YuleWalkerFit {
        u0,
        alpha,
        sigma2,
        bandwidth: window.bandwidth(t_len),
        edge,
        condition,
    })
}

fn second_difference(f: impl Fn(f64) -> Result<f64>, u0: f64) -> Result<f64> {
    let h = CURVATURE_STEP;
    Ok((f(u0 + h)? - 2.0 * f(u0)? + f(u0 - h)?) / (h * h))
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct MseComponents {
    /// `∂²/∂u² c(u0, k)`.
    pub mu: f64,
    /// `Σ_ℓ c(u0, ℓ)[c(u0, ℓ) + c(u0, ℓ + 2k)]`.
    pub tau: f64,
}

/// Curvature and variance factors of the local covariance MSE at lag `k`.
pub fn covariance_mse_components(spec: &TvModelSpec, u0: f64, k: i64) -> Result<MseComponents> {
    check_u0(u0)?;
    let mu = second_difference(|u| spec.covariance(u, k), u0)?;
    let k = k.unsigned_abs() as usize;
    let mut lags = 64;
    let c = loop {
        let c = spec.covariances(u0, lags + 2 * k)?;
        let scale = c[0].abs().max(f64::MIN_POSITIVE);
        if c[lags].abs() * scale < 1e-12 || lags >= 1 << 16 {
            break c;
        }
        lags *= 2;
    };
    let cov = |l: i64| c[l.unsigned_abs() as usize];
    let l = lags as i64;
    let tau = (-l..=l).map(|ell| cov(ell) * (cov(ell) + cov(ell + 2 * k as i64))).sum();
    Ok(MseComponents { mu, tau })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BandwidthChoice {
    pub b: f64,
    /// Asymptotic MSE at the returned bandwidth.
    pub mse: f64,
    /// The unconstrained optimum exceeded 1.
    pub clipped: bool,
}

/// MSE-optimal bandwidth `C(K)^{1/5} (τ/μ²)^{1/5} T^{-1/5}`, clipped to 1.
pub fn optimal_bandwidth(mu: f64, tau: f64, kernel: &Kernel, t_len: usize) -> Result<BandwidthChoice> {
    if mu == 0.0 || !mu.is_finite() {
        return Err(Error::NearStationary(format!("curvature μ = {mu}")));
    }
    if !(tau > 0.0) {
        return arg(format!("variance factor must be positive, got {tau}"));
    }
    let tf = t_len as f64;
    let (d, v) = (kernel.second_moment(), kernel.squared_norm());
    let raw = (v / (d * d)).powf(0.2) * (tau / (mu * mu)).powf(0.2) * tf.powf(-0.2);
    let b = raw.min(1.0);
    let mse = b.powi(4) / 4.0 * d * d * mu * mu + v * tau / (b * tf);
    Ok(BandwidthChoice { b, mse, clipped: raw > 1.0 })
}

/// Closed-form optimal MSE `(5/4) c(K)^{4/5} μ^{2/5} τ^{4/5} T^{-4/5}`.
pub fn optimal_mse(mu: f64, tau: f64, kernel: &Kernel, t_len: usize) -> f64 {
    1.25 * kernel.mse_constant().powf(0.8) * (mu * mu).powf(0.2) * tau.powf(0.8) * (t_len as f64).powf(-0.8)
}

/// Bandwidth for estimating the intercept of a tvARCH(0) model
/// `X_t = α₀(t/T)^{1/2} Z_t` by local means of `X_t²`.
pub fn arch0_bandwidth(spec: &TvModelSpec, u0: f64, kernel: &Kernel, t_len: usize) -> Result<BandwidthChoice> {
    let a0 = match (&spec.family, &spec.arch_intercept) {
        (Family::TvArch, Some(a0)) if spec.alpha.iter().all(|c| c.is_constant() && c.value(0.0) == 0.0) => a0,
        _ => return arg("model must be tvARCH(0)"),
    };
    let curv = a0
        .derivative(u0, 2)
        .map_or_else(|| second_difference(|u| Ok(a0.value(u)), u0), Ok)?;
    let var = (2.0 + spec.innovations.effective_kappa4()) * a0.value(u0).powi(2);
    optimal_bandwidth(curv, var, kernel, t_len)
}

/// Model-implied bias and variance factors of the local Yule-Walker estimate.
#[derive(Debug, Clone)]
pub struct YwAsymptotics {
    /// `R⁻¹ [R'' α + r'']`; the bias is `-(b²/2) d_K` times this.
    pub bias_factor: Vec<f64>,
    pub alpha: Vec<f64>,
    pub sigma2: f64,
    pub r_inverse: DMatrix<f64>,
    /// `σ² tr R⁻¹`.
    pub tau: f64,
}

impl YwAsymptotics {
    pub fn bias(&self, kernel: &Kernel, b: f64) -> Vec<f64> {
        let s = -b * b / 2.0 * kernel.second_moment();
        self.bias_factor.iter().map(|m| s * m).collect()
    }

    /// `v_K σ² R⁻¹ / (bT)`.
    pub fn variance(&self, kernel: &Kernel, b: f64, t_len: usize) -> DMatrix<f64> {
        &self.r_inverse * (kernel.squared_norm() * self.sigma2 / (b * t_len as f64))
    }

    pub fn optimal_bandwidth(&self, kernel: &Kernel, t_len: usize) -> Result<BandwidthChoice> {
        let norm = self.bias_factor.iter().map(|m| m * m).sum::<f64>().sqrt();
        optimal_bandwidth(norm, self.tau, kernel, t_len)
    }
}

fn yw_system(c: &[f64], p: usize) -> (DMatrix<f64>, DVector<f64>) {
    (toeplitz(c, p), DVector::from_fn(p, |i, _| c[i + 1]))
}

pub fn yw_asymptotics(spec: &TvModelSpec, u0: f64, p: usize) -> Result<YwAsymptotics> {
    if p == 0 {
        return arg("order p must be at least 1");
    }
    check_u0(u0)?;
    let h = CURVATURE_STEP;
    let c: Vec<Vec<f64>> = [u0 - h, u0, u0 + h]
        .iter()
        .map(|&u| spec.covariances(u, p))
        .collect::<Result<_>>()?;
    let (r0, v0) = yw_system(&c[1], p);
    let (rm, vm) = yw_system(&c[0], p);
    let (rp, vp) = yw_system(&c[2], p);
    let r2 = (&rp - &r0 * 2.0 + &rm) / (h * h);
    let v2 = (&vp - &v0 * 2.0 + &vm) / (h * h);
    let cond = condition_number(&r0);
    let r_inv = r0.clone().try_inverse().ok_or(Error::Rank { cond })?;
    if cond > 1e13 {
        return Err(Error::Rank { cond });
    }
    let alpha = -&r_inv * &v0;
    let sigma2 = c[1][0] + alpha.dot(&v0);
    let mu = &r_inv * (r2 * &alpha + v2);
    Ok(YwAsymptotics {
        bias_factor: mu.as_slice().to_vec(),
        alpha: alpha.as_slice().to_vec(),
        sigma2,
        tau: sigma2 * r_inv.trace(),
        r_inverse: r_inv,
    })
}

/// Optimal segment length from local covariances `c(t, 0..=p)` at `t0`,
/// `t0 - 1` and `t0 - 2` of a non-rescaled process. `scale` is the length used
/// to move into rescaled time; it cancels.
pub fn optimal_segment_length_nonrescaled(triplet: [&[f64]; 3], kernel: &Kernel, scale: f64) -> Result<f64> {
    let p = triplet[0].len().checked_sub(1).filter(|&p| p >= 1).ok_or(Error::Argument(
        "each covariance vector needs lags 0..=p with p >= 1".into(),
    ))?;
    if triplet.iter().any(|c| c.len() != p + 1) {
        return arg("covariance vectors must have equal length");
    }
    if !(scale > 0.0) {
        return arg("scale must be positive");
    }
    let (r0, v0) = yw_system(triplet[0], p);
    let (r1, v1) = yw_system(triplet[1], p);
    let (r2, v2) = yw_system(triplet[2], p);
    let alpha = -solve_spd(&r0, &v0)?;
    let sigma2 = triplet[0][0] + alpha.dot(&v0);
    let cond = condition_number(&r0);
    let r_inv = r0.clone().try_inverse().ok_or(Error::Rank { cond })?;
    let tau = sigma2 * r_inv.trace();
    let t2 = scale * scale;
    let dr = (&r0 - &r1 * 2.0 + &r2) * t2;
    let dv = (&v0 - &v1 * 2.0 + &v2) * t2;
    let mu = &r_inv * (dr * &alpha + dv);
    let norm = mu.norm();
    if norm == 0.0 {
        return Err(Error::NearStationary("second difference of the local covariances is zero".into()));
    }
    let b = kernel.bandwidth_constant().powf(0.2) * (tau / (norm * norm)).powf(0.2) * scale.powf(-0.2);
    Ok(b * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::ParameterCurve;
    use crate::mc;
    use crate::model::{simulate, TvModelSpec};
    use std::f64::consts::PI;

    #[test]
    fn tapered_hand_example() {
        let x = [1.0, -1.0, 1.0, -1.0];
        let e = tapered_local_covariance(&x, 0.5, 1, 4, &Taper::Rectangular).unwrap();
        assert!((e.value + 0.75).abs() < 1e-15);
        assert!(!e.edge);
        let e0 = tapered_local_covariance(&[1.0, 2.0, 3.0, 4.0], 0.5, 0, 4, &Taper::Rectangular).unwrap();
        assert!((e0.value - 7.5).abs() < 1e-15);
    }

    #[test]
    fn tapered_clips_edges() {
        let x = [2.0; 10];
        let e = tapered_local_covariance(&x, 0.0, 0, 6, &Taper::Rectangular).unwrap();
        assert!(e.edge);
        assert!((e.value - 4.0).abs() < 1e-14);
        assert!(tapered_local_covariance(&x, 0.5, 6, 6, &Taper::Rectangular).is_err());
    }

    #[test]
    fn kernel_estimates_of_zero_data() {
        let x = vec![0.0; 100];
        let e = kernel_local_covariance(&x, 0.5, 2, 0.2, &Kernel::CanonicalQuadratic).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(matches!(
            kernel_local_covariance(&x, 0.5, 0, 0.01, &Kernel::CanonicalQuadratic),
            Err(Error::Window(_))
        ));
    }

    #[test]
    fn centered_and_lagged_forms_share_pairs() {
        let x = simulate(&TvModelSpec::oscillating_ar2(), 500, 3).unwrap().values;
        let kern = Kernel::CanonicalQuadratic;
        for &k in &[0i64, 2, 4, 6] {
            for &u0 in &[0.3, 0.5, 0.77] {
                let a = kernel_local_covariance(&x, u0, k, 0.25, &kern).unwrap().value;
                let b = kernel_lagged_covariance(&x, u0, k / 2, -k / 2, 0.25, &kern).unwrap().value;
                assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()), "k={k} u0={u0}");
            }
        }
    }

    #[test]
    fn taper_and_matching_kernel_agree_on_white_noise() {
        let x = simulate(&TvModelSpec::white_noise(1.0), 4096, 17).unwrap().values;
        let n = 410;
        let a = tapered_local_covariance(&x, 0.5, 0, n, &Taper::SineSquared).unwrap().value;
        let b = kernel_local_covariance(&x, 0.5, 0, n as f64 / 4096.0, &Taper::SineSquared.induced_kernel())
            .unwrap()
            .value;
        assert!((a - b).abs() < 0.02, "{a} vs {b}");
    }

    #[test]
    fn ar1_local_covariance_and_yule_walker() {
        let m = TvModelSpec::ar1(-0.5, 1.0);
        let reps = 200;
        let est: Vec<(f64, f64)> = mc::replicate(reps, 5, |seed| {
            let x = simulate(&m, 1024, seed).unwrap().values;
            let c = tapered_local_covariance(&x, 0.5, 0, 512, &Taper::SineSquared).unwrap().value;
            let yw = local_yule_walker(&x, 0.5, 1, &LocalWindow::taper(1024, Taper::SineSquared)).unwrap();
            (c, yw.alpha[0])
        });
        let (cm, cv) = mc::mean_var(&est.iter().map(|e| e.0).collect::<Vec<_>>());
        assert!((cm - 4.0 / 3.0).abs() < 3.0 * (cv / reps as f64).sqrt(), "{cm}");
        let (am, av) = mc::mean_var(&est.iter().map(|e| e.1).collect::<Vec<_>>());
        assert!((am + 0.5).abs() < 3.0 * (av / reps as f64).sqrt(), "{am}");
    }

    #[test]
    fn yule_walker_order_one_is_ratio() {
        let x = simulate(&TvModelSpec::oscillating_ar2(), 256, 8).unwrap().values;
        let w = LocalWindow::taper(64, Taper::SineSquared);
        let yw = local_yule_walker(&x, 0.4, 1, &w).unwrap();
        let c0 = tapered_local_covariance(&x, 0.4, 0, 64, &Taper::SineSquared).unwrap().value;
        let c1 = tapered_local_covariance(&x, 0.4, 1, 64, &Taper::SineSquared).unwrap().value;
        assert!((yw.alpha[0] + c1 / c0).abs() < 1e-14);
    }

    #[test]
    fn tapered_yule_walker_is_positive_definite() {
        let x = simulate(&TvModelSpec::oscillating_ar2(), 128, 1).unwrap().values;
        let yw = local_yule_walker(&x, 0.5, 2, &LocalWindow::taper(64, Taper::SineSquared)).unwrap();
        assert!(yw.sigma2 > 0.0);
        assert!(yw.condition.is_finite() && yw.condition > 0.0);
        let (c, _) = local_covariances(&x, 0.5, 2, &LocalWindow::taper(64, Taper::SineSquared)).unwrap();
        assert!(toeplitz(&c, 3).cholesky().is_some());
    }

    #[test]
    fn yule_walker_rank_error() {
        let x = vec![0.0; 200];
        assert!(matches!(
            local_yule_walker(&x, 0.5, 2, &LocalWindow::taper(50, Taper::Rectangular)),
            Err(Error::Rank { .. })
        ));
    }

    #[test]
    fn mse_components_closed_forms() {
        let wn = TvModelSpec::white_noise(1.0);
        let c = covariance_mse_components(&wn, 0.4, 0).unwrap();
        assert!(c.mu.abs() < 1e-9);
        assert!((c.tau - 2.0).abs() < 1e-10);
        let ar = TvModelSpec::ar1(-0.5, 1.0);
        assert!(covariance_mse_components(&ar, 0.4, 1).unwrap().mu.abs() < 1e-6);
        // AR(1) with a = 0.5: Σ_ℓ c(ℓ)² = c0² (1 + a²)/(1 - a²).
        let tau0 = covariance_mse_components(&ar, 0.4, 0).unwrap().tau;
        assert!((tau0 - 2.0 * (16.0 / 9.0) * (1.25 / 0.75)).abs() < 1e-9);
    }

    #[test]
    fn curvature_matches_analytic_second_derivative() {
        let m = TvModelSpec::tvar(vec![ParameterCurve::polynomial(vec![-0.5, 0.0, -0.2])], ParameterCurve::constant(1.0));
        for &u in &[0.2f64, 0.5, 0.8] {
            // c(u, 0) = g(a(u)) with g(a) = 1/(1 - a²).
            let a = -0.5 - 0.2 * u * u;
            let (da, dda) = (-0.4 * u, -0.4);
            let g1 = 2.0 * a / (1.0 - a * a).powi(2);
            let g2 = (2.0 + 6.0 * a * a) / (1.0 - a * a).powi(3);
            let want = g2 * da * da + g1 * dda;
            let got = covariance_mse_components(&m, u, 0).unwrap().mu;
            assert!((got - want).abs() < 1e-4, "u={u}: {got} vs {want}");
        }
    }

    #[test]
    fn bandwidth_formula_and_rate() {
        let k = Kernel::CanonicalQuadratic;
        let b = optimal_bandwidth(2.0, 3.0, &k, 1000).unwrap();
        let want = 480f64.powf(0.2) * (3.0f64 / 4.0).powf(0.2) * 1000f64.powf(-0.2);
        assert!((b.b - want).abs() < 1e-12);
        assert!((480f64.powf(0.2) - 3.4376).abs() < 1e-4);
        assert!((b.mse - optimal_mse(2.0, 3.0, &k, 1000)).abs() < 1e-12 * b.mse);
        let b2 = optimal_bandwidth(2.0, 3.0, &k, 2000).unwrap();
        assert!((b2.b / b.b - 2f64.powf(-0.2)).abs() < 1e-12);
        assert!(matches!(optimal_bandwidth(0.0, 1.0, &k, 100), Err(Error::NearStationary(_))));
        assert!(optimal_bandwidth(1e-6, 1.0, &k, 100).unwrap().clipped);
    }

    #[test]
    fn arch0_bandwidth_closed_form() {
        let a0 = ParameterCurve::polynomial(vec![1.0, 0.0, 2.0]);
        let m = TvModelSpec::tvarch(a0, vec![]);
        let k = Kernel::CanonicalQuadratic;
        let b = arch0_bandwidth(&m, 0.5, &k, 10_000).unwrap().b;
        let want = (2.0 * 1.2 / 0.0025f64).powf(0.2) * (1.5f64 / 4.0).powf(0.4) * 10_000f64.powf(-0.2);
        assert!((b - want).abs() < 1e-12, "{b} vs {want}");
    }

    #[test]
    fn yw_asymptotics_constant_and_scalar() {
        let m = TvModelSpec::ar1(-0.5, 1.0);
        let a = yw_asymptotics(&m, 0.5, 1).unwrap();
        assert!(a.bias_factor[0].abs() < 1e-6);
        let k = Kernel::CanonicalQuadratic;
        let v = a.variance(&k, 0.1, 1000);
        assert!((v[(0, 0)] - 1.2 * 1.0 / (0.1 * 1000.0 * (4.0 / 3.0))).abs() < 1e-12);
        assert!((a.alpha[0] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn nonrescaled_segment_length() {
        let m = TvModelSpec::tvar(vec![ParameterCurve::cosine(-0.5, -0.2, 2.0 * PI, 0.0)], ParameterCurve::constant(1.0));
        let t_len = 2000.0;
        let t0 = 700.0;
        let c: Vec<Vec<f64>> = (0..3).map(|d| m.covariances((t0 - d as f64) / t_len, 1).unwrap()).collect();
        let k = Kernel::CanonicalQuadratic;
        let trip = [&c[0][..], &c[1][..], &c[2][..]];
        let n1 = optimal_segment_length_nonrescaled(trip, &k, 1000.0).unwrap();
        let n2 = optimal_segment_length_nonrescaled(trip, &k, 2000.0).unwrap();
        assert!((n1 / n2 - 1.0).abs() < 1e-9);
        let rescaled = yw_asymptotics(&m, t0 / t_len, 1).unwrap().optimal_bandwidth(&k, 2000).unwrap();
        assert!((n1 / (rescaled.b * t_len) - 1.0).abs() < 0.01, "{n1} vs {}", rescaled.b * t_len);
        let flat = [&c[0][..], &c[0][..], &c[0][..]];
        assert!(matches!(
            optimal_segment_length_nonrescaled(flat, &k, 100.0),
            Err(Error::NearStationary(_))
        ));
    }

    #[test]
    fn empirical_mse_argmin_near_optimal_bandwidth() {
        let m = TvModelSpec::tvar(vec![ParameterCurve::cosine(-0.5, -0.2, 2.0 * PI, 0.0)], ParameterCurve::constant(1.0));
        let (u0, t_len) = (0.5, 4096);
        let k = Kernel::CanonicalQuadratic;
        let comp = covariance_mse_components(&m, u0, 0).unwrap();
        let b_opt = optimal_bandwidth(comp.mu, comp.tau, &k, t_len).unwrap().b;
        let truth = m.covariance(u0, 0).unwrap();
        let grid: Vec<f64> = (0..12).map(|i| 0.05 * 1.25f64.powi(i)).filter(|b| *b <= 1.0).collect();
        let reps = 300;
        let errs: Vec<Vec<f64>> = mc::replicate(reps, 77, |seed| {
            let x = simulate(&m, t_len, seed).unwrap().values;
            grid.iter()
                .map(|&b| (kernel_local_covariance(&x, u0, 0, b, &k).unwrap().value - truth).powi(2))
                .collect()
        });
        let mse: Vec<f64> = (0..grid.len()).map(|i| errs.iter().map(|e| e[i]).sum::<f64>()).collect();
        let best = (0..grid.len()).min_by(|&a, &b| mse[a].total_cmp(&mse[b])).unwrap();
        let ratio = grid[best] / b_opt;
        assert!((0.5..=2.0).contains(&ratio), "argmin {} vs b_opt {b_opt}", grid[best]);
    }
}
