//! Empirical spectral measures `F_T(φ)` built from the pre-periodogram, their
//! limits, and a sup-type test of constancy of the spectrum in time.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::curve::ParameterCurve;
use crate::error::{arg, Error, Result};
use crate::mc;
use crate::model::{simulate, TvModelSpec};
use crate::numeric::{even_fourier_coefficients, fft_forward, gauss_legendre, periodic_nodes, signed_frequency, toeplitz};
use crate::spectral::{pre_periodogram_lags, taper_series};
use crate::taper::Taper;
use num_complex::Complex64;

type Eval = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, PartialEq)]
pub enum IndexKind {
    Analytic,
    /// Values on `u × λ` (row-major), `λ` in `[0, π]`, extended evenly to `[-π, 0)`.
    Sampled { u: Vec<f64>, lambda: Vec<f64>, values: Vec<f64> },
}

/// Index function `φ(u, λ)` on `[0, 1] × [-π, π]`, with an optional data taper.
#[derive(Clone)]
pub struct IndexFunction {
    eval: Eval,
    kind: IndexKind,
    time_invariant: bool,
    taper: Option<Taper>,
}

impl fmt::Debug for IndexFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("IndexFunction")
            .field("kind", &self.kind)
            .field("time_invariant", &self.time_invariant)
            .field("taper", &self.taper)
            .finish()
    }
}

impl IndexFunction {
    pub fn analytic(phi: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(phi),
            kind: IndexKind::Analytic,
            time_invariant: false,
            taper: None,
        }
    }

    /// `φ(u, λ) = ψ(λ)`.
    pub fn frequency(psi: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            eval: Arc::new(move |_, l| psi(l)),
            kind: IndexKind::Analytic,
            time_invariant: true,
            taper: None,
        }
    }

    /// Bilinear interpolation of `values[i * lambda.len() + j] = φ(u_i, λ_j)`;
    /// constant beyond the end points. A single `u` row gives a time-invariant function.
    pub fn sampled(u: Vec<f64>, lambda: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if u.is_empty() || lambda.is_empty() || values.len() != u.len() * lambda.len() {
            return arg("sampled index function needs a non-empty grid and one value per node");
        }
        let increasing = |g: &[f64]| g.windows(2).all(|w| w[0] < w[1]);
        if !increasing(&u) || !increasing(&lambda) {
            return arg("grid nodes must be strictly increasing");
        }
        if u[0] < 0.0 || u[u.len() - 1] > 1.0 || lambda[0] < 0.0 || lambda[lambda.len() - 1] > PI {
            return arg("grid must lie in [0, 1] x [0, pi]");
        }
        if values.iter().any(|v| !v.is_finite()) {
            return arg("index function values must be finite");
        }
        let (gu, gl, gv) = (u.clone(), lambda.clone(), values.clone());
        let eval = move |x: f64, l: f64| bilinear(&gu, &gl, &gv, x, l.abs());
        Ok(Self {
            time_invariant: u.len() == 1,
            eval: Arc::new(eval),
            kind: IndexKind::Sampled { u, lambda, values },
            taper: None,
        })
    }

    pub fn with_taper(mut self, taper: Taper) -> Self {
        self.taper = Some(taper);
        self
    }

    pub fn value(&self, u: f64, lambda: f64) -> f64 {
        (self.eval)(u, lambda)
    }

    pub fn kind(&self) -> &IndexKind {
        &self.kind
    }

    pub fn taper(&self) -> Option<&Taper> {
        self.taper.as_ref()
    }

    pub fn is_time_invariant(&self) -> bool {
        self.time_invariant
    }

    fn h(&self, u: f64) -> f64 {
        self.taper.as_ref().map_or(1.0, |t| t.value(u))
    }
}

fn bracket(g: &[f64], x: f64) -> (usize, usize, f64) {
    if g.len() == 1 || x <= g[0] {
        return (0, 0, 0.0);
    }
    let n = g.len();
    if x >= g[n - 1] {
        return (n - 1, n - 1, 0.0);
    }
    let hi = g.partition_point(|v| *v <= x);
    let lo = hi - 1;
    (lo, hi, (x - g[lo]) / (g[hi] - g[lo]))
}

fn bilinear(gu: &[f64], gl: &[f64], v: &[f64], u: f64, l: f64) -> f64 {
    let m = gl.len();
    let (i0, i1, a) = bracket(gu, u);
    let (j0, j1, b) = bracket(gl, l);
    let at = |i: usize, j: usize| v[i * m + j];
    (1.0 - a) * ((1.0 - b) * at(i0, j0) + b * at(i0, j1)) + a * ((1.0 - b) * at(i1, j0) + b * at(i1, j1))
}

/// Frequency nodes for the cosine coefficients of `φ`.
fn coefficient_nodes(t_len: usize) -> usize {
    256usize.max((2 * t_len).next_power_of_two())
}

/// Cosine coefficients `a_t(k) = (1/2π) ∫ φ(t/T, λ) cos kλ dλ` for a fixed `T`,
/// so that `∫ φ J_T = P_t(0) a_t(0) + 2 Σ_k P_t(k) a_t(k)`.
#[derive(Debug, Clone)]
pub struct PreparedIndex {
    t_len: usize,
    /// One row when `φ` is time-invariant, otherwise row `t-1` for time `t`.
    coefs: Vec<Vec<f64>>,
    taper: Option<Taper>,
}

impl PreparedIndex {
    pub fn new(phi: &IndexFunction, t_len: usize) -> Result<Self> {
        if t_len == 0 {
            return arg("sample size T must be positive");
        }
        let l = coefficient_nodes(t_len);
        let row = |u: f64, max_lag: usize| {
            let samples: Vec<f64> = (0..l).map(|j| phi.value(u, signed_frequency(j, l))).collect();
            even_fourier_coefficients(&samples, max_lag)
        };
        let coefs = if phi.time_invariant {
            vec![row(0.5, t_len - 1)]
        } else {
            let tf = t_len as f64;
            mc::Executor::default().map(t_len, |i| {
                let t = i + 1;
                row(t as f64 / tf, max_pre_lag(t, t_len))
            })
        };
        if coefs.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("index function is not finite on the grid".into()));
        }
        Ok(Self {
            t_len,
            coefs,
            taper: phi.taper.clone(),
        })
    }

    /// `F_T(φ)` for data of the prepared length.
    pub fn apply(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.t_len {
            return arg(format!("prepared for T = {}, got {} values", self.t_len, x.len()));
        }
        let tapered;
        let y = match &self.taper {
            Some(h) => {
                tapered = taper_series(x, h);
                &tapered[..]
            }
            None => x,
        };
        let mut acc = 0.0;
        for t in 1..=self.t_len {
            let a = if self.coefs.len() == 1 { &self.coefs[0] } else { &self.coefs[t - 1] };
            let p = pre_periodogram_lags(y, t);
            let mut s = p[0] * a[0];
            for k in 1..p.len() {
                s += 2.0 * p[k] * a[k];
            }
            acc += s;
        }
        Ok(acc / self.t_len as f64)
    }
}

/// Largest lag `k` with both pre-periodogram indices of time `t` in `1..=T`.
fn max_pre_lag(t: usize, t_len: usize) -> usize {
    let even = 2 * (t - 1).min(t_len - t);
    let odd = if t < t_len { 2 * (t - 1).min(t_len - t - 1) + 1 } else { 0 };
    even.max(odd)
}

/// `F_T(φ) = (1/T) Σ_t ∫ φ(t/T, λ) J_T(t/T, λ) dλ`, with `J_T` taken from the
/// tapered data `h(t/T) X_t` when `φ` carries a taper.
pub fn empirical_spectral_measure(x: &[f64], phi: &IndexFunction) -> Result<f64> {
    PreparedIndex::new(phi, x.len())?.apply(x)
}

/// `∫ ψ(λ) I_T(λ) dλ` by a periodic sum of the full-sample periodogram; equals
/// [`empirical_spectral_measure`] for time-invariant `φ`.
pub fn weighted_periodogram(x: &[f64], phi: &IndexFunction) -> Result<f64> {
    if !phi.time_invariant {
        return arg("weighted periodogram needs a time-invariant index function");
    }
    let t_len = x.len();
    if t_len == 0 {
        return arg("sample size T must be positive");
    }
    let y = match &phi.taper {
        Some(h) => taper_series(x, h),
        None => x.to_vec(),
    };
    let l = coefficient_nodes(t_len);
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    for (b, v) in buf.iter_mut().zip(&y) {
        b.re = *v;
    }
    fft_forward(&mut buf);
    let scale = 1.0 / (2.0 * PI * t_len as f64);
    let sum: f64 = buf
        .iter()
        .enumerate()
        .map(|(j, z)| phi.value(0.5, signed_frequency(j, l)) * z.norm_sqr() * scale)
        .sum();
    Ok(sum * 2.0 * PI / l as f64)
}

/// Tensor quadrature on `[0, 1] × [-π, π)`: `(u, weight)` and `(λ, weight)`.
fn tensor_grid() -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let (us, wu) = gauss_legendre(64, 0.0, 1.0);
    let n_l = 256;
    let wl = 2.0 * PI / n_l as f64;
    let lam = periodic_nodes(n_l).into_iter().map(|l| (if l > PI { l - 2.0 * PI } else { l }, wl));
    (us.into_iter().zip(wu).collect(), lam.collect())
}

/// `F(φ) = ∫₀¹ h²(u) ∫ φ(u, λ) f(u, λ) dλ du`.
pub fn theoretical_spectral_measure(truth: &TvModelSpec, phi: &IndexFunction) -> Result<f64> {
    let (us, lams) = tensor_grid();
    let mut acc = 0.0;
    for &(u, wu) in &us {
        let h2 = phi.h(u).powi(2);
        if h2 == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for &(l, wl) in &lams {
            inner += wl * phi.value(u, l) * truth.spectral_density(u, l)?;
        }
        acc += wu * h2 * inner;
    }
    Ok(acc)
}

/// `ρ₂(φ) = (∫₀¹ h⁴(u) ∫ φ(u, λ)² dλ du)^{1/2}`.
pub fn rho2(phi: &IndexFunction) -> f64 {
    let (us, lams) = tensor_grid();
    let mut acc = 0.0;
    for &(u, wu) in &us {
        let h4 = phi.h(u).powi(4);
        let inner: f64 = lams.iter().map(|&(l, wl)| wl * phi.value(u, l).powi(2)).sum();
        acc += wu * h4 * inner;
    }
    acc.sqrt()
}

/// Limit of `T cov(F_T(φ_j), F_T(φ_k))`: a `2π ∫h⁴ ∫ φ_j [φ_k(λ) + φ_k(-λ)] f²`
/// term plus `κ₄ ∫h⁴ (∫φ_j f)(∫φ_k f)`. The taper of `φ_j` is used.
pub fn limit_covariance(truth: &TvModelSpec, phi_j: &IndexFunction, phi_k: &IndexFunction) -> Result<f64> {
    let kappa4 = truth.innovations.effective_kappa4();
    let (us, lams) = tensor_grid();
    let mut acc = 0.0;
    for &(u, wu) in &us {
        let h4 = phi_j.h(u).powi(4);
        if h4 == 0.0 {
            continue;
        }
        let (mut quad, mut mj, mut mk) = (0.0, 0.0, 0.0);
        for &(l, wl) in &lams {
            let f = truth.spectral_density(u, l)?;
            let (a, b) = (phi_j.value(u, l), phi_k.value(u, l));
            quad += wl * a * (b + phi_k.value(u, -l)) * f * f;
            mj += wl * a * f;
            mk += wl * b * f;
        }
        acc += wu * h4 * (2.0 * PI * quad + kappa4 * mj * mk);
    }
    Ok(acc)
}

/// Sup statistic `√T max |F_T(u, λ) - u F_T(1, λ)|` over a grid, with
/// `F_T(u, λ) = (1/T) Σ_{t ≤ [uT]} ∫₀^λ J_T(t/T, μ) dμ`.
///
/// Uses `∫₀^λ J_T(t/T, μ) dμ = (1/2π)[P_t(0) λ + 2 Σ_k P_t(k) sin(kλ)/k]`: the
/// lagged products are accumulated into bins over time and the sine sums are
/// one matrix product per grid. When every `λ` is a multiple of `π/m`, lags
/// are folded modulo `2m` first.
#[derive(Debug, Clone)]
pub struct StatisticEngine {
    t_len: usize,
    u_grid: Vec<f64>,
    lambda_grid: Vec<f64>,
    /// `(bin, weight)` of lag `2m` and of lag `2m + 1`, indexed by `m`; lags
    /// that drop out go to a spare bin past the basis rows.
    even: Vec<(usize, f64)>,
    odd: Vec<(usize, f64)>,
    /// `bins × n_λ` sine basis; the last row carries the lag-0 term `λ_j`.
    basis: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SupValue {
    pub value: f64,
    pub u: f64,
    pub lambda: f64,
}

/// `m` with every `λ` an integer multiple of `π/m`, if a small one exists.
fn common_frequency_step(lambda: &[f64]) -> Option<usize> {
    let smallest = lambda.iter().copied().filter(|l| *l > 0.0).fold(f64::INFINITY, f64::min);
    if !smallest.is_finite() {
        return None;
    }
    let base = (PI / smallest).round() as usize;
    (1..=4).map(|mult| base * mult).find(|&m| {
        m > 0 && lambda.iter().all(|l| {
            let q = l * m as f64 / PI;
            (q - q.round()).abs() < 1e-9
        })
    })
}

impl StatisticEngine {
    pub fn new(t_len: usize, u_grid: &[f64], lambda_grid: &[f64]) -> Result<Self> {
        if t_len < 2 {
            return arg("stationarity statistic needs T >= 2");
        }
        if u_grid.is_empty() || lambda_grid.is_empty() {
            return arg("u and lambda grids must be non-empty");
        }
        if u_grid.iter().any(|u| !(0.0..=1.0).contains(u)) || lambda_grid.iter().any(|l| !(0.0..=PI).contains(l)) {
            return arg("grids must lie in [0, 1] x [0, pi]");
        }
        let n_l = lambda_grid.len();
        let mut bin = vec![usize::MAX; t_len];
        let mut weight = vec![0.0; t_len];
        let basis = match common_frequency_step(lambda_grid).filter(|m| 2 * m < t_len) {
            Some(m) => {
                // sin(kπq/m) depends on k mod 2m and flips sign under r -> 2m - r.
                for k in 1..t_len {
                    let r = k % (2 * m);
                    if r != 0 && r != m {
                        let (b, s) = if r < m { (r - 1, 1.0) } else { (2 * m - r - 1, -1.0) };
                        bin[k] = b;
                        weight[k] = 2.0 * s / k as f64;
                    }
                }
                DMatrix::from_fn(m, n_l, |r, j| {
                    let l = lambda_grid[j];
                    if r + 1 == m {
                        l
                    } else {
                        ((r + 1) as f64 * l).sin()
                    }
                })
            }
            None => {
                for k in 1..t_len {
                    bin[k] = k - 1;
                    weight[k] = 1.0;
                }
                DMatrix::from_fn(t_len, n_l, |r, j| {
                    let l = lambda_grid[j];
                    if r + 1 == t_len {
                        l
                    } else {
                        2.0 * ((r + 1) as f64 * l).sin() / (r + 1) as f64
                    }
                })
            }
        };
        let spare = basis.nrows();
        let slot = |k: usize| if k < t_len && bin[k] != usize::MAX { (bin[k], weight[k]) } else { (spare, 0.0) };
        Ok(Self {
            t_len,
            u_grid: u_grid.to_vec(),
            lambda_grid: lambda_grid.to_vec(),
            even: (0..=t_len / 2).map(|m| slot(2 * m)).collect(),
            odd: (0..=t_len / 2).map(|m| slot(2 * m + 1)).collect(),
            basis,
        })
    }

    pub fn statistic(&self, x: &[f64]) -> Result<SupValue> {
        let t_len = self.t_len;
        if x.len() != t_len {
            return arg(format!("engine built for T = {t_len}, got {} values", x.len()));
        }
        let bins = self.basis.nrows();
        let lag0 = bins - 1;
        // Running bins over t, snapshotted at t = [u_i T].
        let counts: Vec<usize> = self.u_grid.iter().map(|u| ((u * t_len as f64).floor() as usize).min(t_len)).collect();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by_key(|&i| counts[i]);
        // Lag sums by parity: even[m] over lag 2m, odd[m] over lag 2m + 1.
        let half = t_len / 2 + 1;
        let mut even = vec![0.0; half];
        let mut odd = vec![0.0; half];
        let fold = |even: &[f64], odd: &[f64]| {
            let mut out = vec![0.0; bins + 1];
            out[lag0] = even[0];
            for (m, (e, o)) in even.iter().zip(odd).enumerate() {
                if m > 0 {
                    let (b, w) = self.even[m];
                    out[b] += w * e;
                }
                let (b, w) = self.odd[m];
                out[b] += w * o;
            }
            out.truncate(bins);
            out
        };
        let mut delta = DMatrix::<f64>::zeros(self.u_grid.len(), bins);
        let mut next = 0;
        let mut snap = |n: usize, even: &[f64], odd: &[f64]| {
            if next < order.len() && counts[order[next]] == n {
                let row = fold(even, odd);
                while next < order.len() && counts[order[next]] == n {
                    let i = order[next];
                    for (b, v) in row.iter().enumerate() {
                        delta[(i, b)] = *v;
                    }
                    next += 1;
                }
            }
        };
        snap(0, &even, &odd);
        // X reversed, so that X_{t-m}, m = 0, 1, ... is a forward slice.
        let rev: Vec<f64> = x.iter().rev().copied().collect();
        for t in 1..=t_len {
            // Lag 2m pairs X_{t+m} with X_{t-m}; lag 2m+1 pairs X_{t+m+1} with X_{t-m}.
            let back = &rev[t_len - t..];
            for ((acc, lo), hi) in even.iter_mut().zip(back).zip(&x[t - 1..]) {
                *acc += lo * hi;
            }
            for ((acc, lo), hi) in odd.iter_mut().zip(back).zip(&x[t..]) {
                *acc += lo * hi;
            }
            snap(t, &even, &odd);
        }
        let running = fold(&even, &odd);
        for (i, &u) in self.u_grid.iter().enumerate() {
            for (b, total) in running[..bins].iter().enumerate() {
                delta[(i, b)] -= u * total;
            }
        }
        let g = delta * &self.basis;
        let scale = (t_len as f64).sqrt() / (2.0 * PI * t_len as f64);
        let (mut best, mut at) = (0.0, (self.u_grid[0], self.lambda_grid[0]));
        for i in 0..g.nrows() {
            for j in 0..g.ncols() {
                let v = g[(i, j)].abs() * scale;
                if v > best {
                    best = v;
                    at = (self.u_grid[i], self.lambda_grid[j]);
                }
            }
        }
        Ok(SupValue {
            value: best,
            u: at.0,
            lambda: at.1,
        })
    }
}

/// Grid `i/n`, `i = 1..=n`, and `πj/m`, `j = 1..=m`.
pub fn default_grids(n_u: usize, n_lambda: usize) -> (Vec<f64>, Vec<f64>) {
    (
        (1..=n_u).map(|i| i as f64 / n_u as f64).collect(),
        (1..=n_lambda).map(|j| PI * j as f64 / n_lambda as f64).collect(),
    )
}

#[derive(Debug, Clone)]
pub struct StationarityConfig {
    pub u_grid: Vec<f64>,
    pub lambda_grid: Vec<f64>,
    /// Null replications, at least 100.
    pub reps: usize,
    pub levels: Vec<f64>,
    pub seed: u64,
    /// Largest AR order considered for the null fit.
    pub p_max: usize,
}

impl Default for StationarityConfig {
    fn default() -> Self {
        let (u_grid, lambda_grid) = default_grids(50, 64);
        Self {
            u_grid,
            lambda_grid,
            reps: 500,
            levels: vec![0.10, 0.05, 0.01],
            seed: 0,
            p_max: 10,
        }
    }
}

impl StationarityConfig {
    pub fn with_grid(mut self, n_u: usize, n_lambda: usize) -> Self {
        (self.u_grid, self.lambda_grid) = default_grids(n_u, n_lambda);
        self
    }

    pub fn with_reps(mut self, reps: usize) -> Self {
        self.reps = reps;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Stationary AR null fitted to the data.
#[derive(Debug, Clone, Serialize)]
pub struct NullCalibration {
    pub method: String,
    pub replications: usize,
    pub seed: u64,
    pub order: usize,
    /// `α_1..α_p` in `X_t + Σ α_j X_{t-j} = σ ε_t`.
    pub alpha: Vec<f64>,
    pub sigma2: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    pub t_len: usize,
    pub statistic: f64,
    pub argmax_u: f64,
    pub argmax_lambda: f64,
    pub grid_u: usize,
    pub grid_lambda: usize,
    /// Keyed by level.
    pub critical_values: BTreeMap<String, f64>,
    /// `true` where the statistic exceeds the critical value.
    pub reject: BTreeMap<String, bool>,
    pub p_value: f64,
    /// `ρ₂` of `(1[0,u](v) - u) 1[0,λ](μ)` at the maximiser.
    pub rho2_at_argmax: f64,
    pub calibration: NullCalibration,
}

impl StationarityReport {
    /// Plain-text verdict table.
    pub fn verdict_table(&self) -> String {
        let mut s = format!(
            "statistic {:.6} at u = {:.4}, lambda = {:.4} (T = {}, p-value {:.4})\n",
            self.statistic, self.argmax_u, self.argmax_lambda, self.t_len, self.p_value
        );
        s.push_str(&format!("{:>8} {:>14} {:>16}\n", "level", "critical", "verdict"));
        for (level, cv) in self.critical_values.iter().rev() {
            let verdict = if self.reject[level] { "reject" } else { "fail to reject" };
            s.push_str(&format!("{level:>8} {cv:>14.6} {verdict:>16}\n"));
        }
        s.push_str(&format!(
            "null: AR({}) sigma2 = {:.5}, {} simulated replications, seed {}\n",
            self.calibration.order, self.calibration.sigma2, self.calibration.replications, self.calibration.seed
        ));
        s
    }
}

fn level_key(level: f64) -> String {
    format!("{level}")
}

/// Full-sample Yule-Walker AR fit with the order chosen by AIC over `0..=p_max`.
/// Returns `(α, σ²)`.
pub fn aic_ar_fit(x: &[f64], p_max: usize) -> Result<(Vec<f64>, f64)> {
    let t_len = x.len();
    let tf = t_len as f64;
    let p_max = p_max.min(t_len.saturating_sub(1));
    let c: Vec<f64> = (0..=p_max)
        .map(|k| x[..t_len - k].iter().zip(&x[k..]).map(|(a, b)| a * b).sum::<f64>() / tf)
        .collect();
    if !(c[0] > 0.0) {
        return Ok((Vec::new(), 0.0));
    }
    let mut best = (Vec::new(), c[0], c[0].ln() + 2.0 / tf);
    for p in 1..=p_max {
        let r = toeplitz(&c, p);
        let rv = nalgebra::DVector::from_fn(p, |i, _| c[i + 1]);
        let Ok((alpha, s2, _)) = crate::local::yule_walker_solve(&r, &rv, c[0]) else {
            break;
        };
        if !(s2 > 0.0) {
            break;
        }
        let aic = s2.ln() + 2.0 * (p + 1) as f64 / tf;
        if aic < best.2 {
            best = (alpha, s2, aic);
        }
    }
    Ok((best.0, best.1))
}

fn demeaned(x: &[f64]) -> Vec<f64> {
    let m = x.iter().sum::<f64>() / x.len() as f64;
    x.iter().map(|v| v - m).collect()
}

/// Sup statistic of the demeaned data on the given grids.
pub fn stationarity_statistic(x: &[f64], u_grid: &[f64], lambda_grid: &[f64]) -> Result<SupValue> {
    StatisticEngine::new(x.len(), u_grid, lambda_grid)?.statistic(&demeaned(x))
}

/// Sup statistic with critical values simulated from a stationary AR fit to
/// the data (order by AIC); the data and the null draws are demeaned alike.
pub fn stationarity_test(x: &[f64], cfg: &StationarityConfig) -> Result<StationarityReport> {
    if cfg.reps < 100 {
        return arg(format!("null calibration needs at least 100 replications, got {}", cfg.reps));
    }
    if cfg.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
        return arg("levels must lie in (0, 1)");
    }
    let t_len = x.len();
    let engine = StatisticEngine::new(t_len, &cfg.u_grid, &cfg.lambda_grid)?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("data contain non-finite values".into()));
    }
    let y = demeaned(x);
    let observed = engine.statistic(&y)?;
    let (alpha, sigma2) = aic_ar_fit(&y, cfg.p_max)?;
    let null_stats: Vec<f64> = if sigma2 > 0.0 {
        let null = TvModelSpec::tvar(
            alpha.iter().map(|a| ParameterCurve::constant(*a)).collect(),
            ParameterCurve::constant(sigma2.sqrt()),
        );
        null.validate()?;
        let draws = mc::replicate(cfg.reps, cfg.seed, |s| {
            simulate(&null, t_len, s).and_then(|r| engine.statistic(&demeaned(&r.values)).map(|v| v.value))
        });
        draws.into_iter().collect::<Result<Vec<_>>>()?
    } else {
        vec![0.0; cfg.reps]
    };
    let mut critical_values = BTreeMap::new();
    let mut reject = BTreeMap::new();
    for &level in &cfg.levels {
        let cv = mc::quantile(&null_stats, 1.0 - level);
        critical_values.insert(level_key(level), cv);
        reject.insert(level_key(level), observed.value > cv);
    }
    let exceed = null_stats.iter().filter(|s| **s >= observed.value).count();
    let p_value = (1 + exceed) as f64 / (cfg.reps + 1) as f64;
    let (u0, l0) = (observed.u, observed.lambda);
    let indicator = IndexFunction::analytic(move |v, m| {
        let a = if v <= u0 { 1.0 - u0 } else { -u0 };
        if (0.0..=l0).contains(&m) {
            a
        } else {
            0.0
        }
    });
    Ok(StationarityReport {
        t_len,
        statistic: observed.value,
        argmax_u: u0,
        argmax_lambda: l0,
        grid_u: cfg.u_grid.len(),
        grid_lambda: cfg.lambda_grid.len(),
        critical_values,
        reject,
        p_value,
        rho2_at_argmax: rho2(&indicator),
        calibration: NullCalibration {
            method: "parametric simulation from a stationary AR fit".into(),
            replications: cfg.reps,
            seed: cfg.seed,
            order: alpha.len(),
            alpha,
            sigma2,
        },
    })
}
