//! Time-varying AR, ARMA and ARCH models: simulation, stationary
//! approximations, derivative processes, spectra and covariances.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::curve::ParameterCurve;
use crate::error::{arg, Error, Result};
use crate::mc;
use crate::numeric;

/// Pre-sample steps run with curves frozen at `u = 0`.
pub const BURN_IN: usize = 500;
/// Default number of `u` values on which stability is checked.
pub const STABILITY_GRID: usize = 201;
/// Default required root margin `δ` (all roots satisfy `|z| > 1 + δ`).
pub const STABILITY_DELTA: f64 = 1e-3;
/// Periodic quadrature nodes for covariances of non-AR models.
pub const COVARIANCE_NODES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    TvAr,
    TvArma,
    TvArch,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::TvAr => "tvAR",
            Family::TvArma => "tvARMA",
            Family::TvArch => "tvARCH",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InnovationLaw {
    #[default]
    StandardGaussian,
    /// Mean 0, variance 1 and the requested fourth cumulant. Positive `kappa4`
    /// uses a normal scale mixture with an atom at zero, negative `kappa4`
    /// (down to -2) mixes a Rademacher and a normal variable.
    IidWithMoments,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct InnovationSpec {
    #[serde(default)]
    pub law: InnovationLaw,
    #[serde(default)]
    pub kappa4: f64,
}

impl InnovationSpec {
    pub fn gaussian() -> Self {
        Self::default()
    }

    pub fn with_kappa4(kappa4: f64) -> Result<Self> {
        if !(kappa4 >= -2.0) || !kappa4.is_finite() {
            return arg(format!("fourth cumulant must be finite and at least -2, got {kappa4}"));
        }
        Ok(Self {
            law: InnovationLaw::IidWithMoments,
            kappa4,
        })
    }

    /// Fourth cumulant of the law actually drawn.
    pub fn effective_kappa4(&self) -> f64 {
        match self.law {
            InnovationLaw::StandardGaussian => 0.0,
            InnovationLaw::IidWithMoments => self.kappa4,
        }
    }

    fn draw(&self, rng: &mut mc::Rng) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        match self.law {
            InnovationLaw::StandardGaussian => z,
            InnovationLaw::IidWithMoments if self.kappa4 == 0.0 => z,
            InnovationLaw::IidWithMoments if self.kappa4 > 0.0 => {
                let keep = 3.0 / (3.0 + self.kappa4);
                if rng.random::<f64>() < keep {
                    z / keep.sqrt()
                } else {
                    0.0
                }
            }
            InnovationLaw::IidWithMoments => {
                let w = (-self.kappa4 / 2.0).sqrt();
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                w.sqrt() * sign + (1.0 - w).sqrt() * z
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TvModelSpec {
    pub family: Family,
    /// AR coefficient curves `α_1..α_p` (ARCH: lag coefficients `α_1..α_p`).
    pub alpha: Vec<ParameterCurve>,
    /// MA coefficient curves `β_1..β_q` (tvARMA only).
    pub beta: Vec<ParameterCurve>,
    pub sigma: ParameterCurve,
    pub mu: ParameterCurve,
    /// ARCH intercept `α_0(u)`.
    pub arch_intercept: Option<ParameterCurve>,
    pub innovations: InnovationSpec,
}

impl TvModelSpec {
    pub fn tvar(alpha: Vec<ParameterCurve>, sigma: ParameterCurve) -> Self {
        Self {
            family: Family::TvAr,
            alpha,
            beta: Vec::new(),
            sigma,
            mu: ParameterCurve::constant(0.0),
            arch_intercept: None,
            innovations: InnovationSpec::gaussian(),
        }
    }

    pub fn tvarma(alpha: Vec<ParameterCurve>, beta: Vec<ParameterCurve>, sigma: ParameterCurve) -> Self {
        Self {
            family: Family::TvArma,
            beta,
            ..Self::tvar(alpha, sigma)
        }
    }

    pub fn tvarch(intercept: ParameterCurve, alpha: Vec<ParameterCurve>) -> Self {
        Self {
            family: Family::TvArch,
            arch_intercept: Some(intercept),
            ..Self::tvar(alpha, ParameterCurve::constant(1.0))
        }
    }

    pub fn white_noise(sigma: f64) -> Self {
        Self::tvar(Vec::new(), ParameterCurve::constant(sigma))
    }

    /// Stationary AR(1) `X_t + a X_{t-1} = σ ε_t`.
    pub fn ar1(a: f64, sigma: f64) -> Self {
        Self::tvar(vec![ParameterCurve::constant(a)], ParameterCurve::constant(sigma))
    }

    /// tvAR(2) with roots `(1/0.9) e^{±i(1.5 - cos 4πu)}` and unit innovation
    /// variance; its spectral peak sits at frequency `1.5 - cos 4πu`.
    pub fn oscillating_ar2() -> Self {
        Self::tvar(
            vec![
                ParameterCurve::nested_cosine(-1.8, 1.5, -1.0, 4.0 * PI),
                ParameterCurve::constant(0.81),
            ],
            ParameterCurve::constant(1.0),
        )
    }

    /// Peak frequency of [`Self::oscillating_ar2`] at rescaled time `u`.
    pub fn oscillating_ar2_peak(u: f64) -> f64 {
        1.5 - (4.0 * PI * u).cos()
    }

    pub fn with_mean(mut self, mu: ParameterCurve) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_innovations(mut self, innovations: InnovationSpec) -> Self {
        self.innovations = innovations;
        self
    }

    pub fn p(&self) -> usize {
        self.alpha.len()
    }

    pub fn q(&self) -> usize {
        self.beta.len()
    }

    /// True if every curve is constant in `u`.
    pub fn is_time_invariant(&self) -> bool {
        self.alpha.iter().chain(&self.beta).all(ParameterCurve::is_constant)
            && self.sigma.is_constant()
            && self.mu.is_constant()
            && self.arch_intercept.as_ref().is_none_or(ParameterCurve::is_constant)
    }

    pub fn ar_coefficients(&self, u: f64) -> Vec<f64> {
        self.alpha.iter().map(|c| c.value(u)).collect()
    }

    pub fn ma_coefficients(&self, u: f64) -> Vec<f64> {
        self.beta.iter().map(|c| c.value(u)).collect()
    }

    pub fn sigma2(&self, u: f64) -> f64 {
        self.sigma.value(u).powi(2)
    }

    /// The same model with every curve frozen at `u0`.
    pub fn frozen(&self, u0: f64) -> Self {
        let fix = |c: &ParameterCurve| ParameterCurve::constant(c.value(u0));
        Self {
            family: self.family,
            alpha: self.alpha.iter().map(fix).collect(),
            beta: self.beta.iter().map(fix).collect(),
            sigma: fix(&self.sigma),
            mu: fix(&self.mu),
            arch_intercept: self.arch_intercept.as_ref().map(fix),
            innovations: self.innovations,
        }
    }

    /// Smallest root modulus of `1 + Σ α_j(u) z^j` minus one (`∞` for p = 0).
    pub fn root_margin_at(&self, u: f64) -> f64 {
        ar_root_margin(&self.ar_coefficients(u))
    }

    /// Minimum of [`Self::root_margin_at`] over `grid_size` equispaced `u`
    /// values. For tvARCH the value is `1 - sup_u Σ_j α_j(u)`.
    pub fn stability_margin(&self, grid_size: usize) -> f64 {
        self.worst_margin(grid_size).1
    }

    fn worst_margin(&self, grid_size: usize) -> (f64, f64) {
        // Constant curves need a single evaluation.
        let n = if self.is_time_invariant() { 2 } else { grid_size.max(2) };
        (0..n)
            .map(|i| {
                let u = i as f64 / (n - 1) as f64;
                let m = match self.family {
                    Family::TvArch => 1.0 - self.alpha.iter().map(|c| c.value(u)).sum::<f64>(),
                    _ => self.root_margin_at(u),
                };
                (u, m)
            })
            .fold((0.0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
    }

    /// Checks the stability / positivity invariants on the default grid.
    pub fn validate(&self) -> Result<()> {
        self.validate_with(STABILITY_GRID, STABILITY_DELTA)
    }

    pub fn validate_with(&self, grid_size: usize, delta: f64) -> Result<()> {
        if self.family != Family::TvArma && !self.beta.is_empty() {
            return arg("MA curves are only allowed for the tvARMA family");
        }
        match self.family {
            Family::TvArch => {
                let Some(a0) = &self.arch_intercept else {
                    return arg("tvARCH model needs an intercept curve");
                };
                let n = grid_size.max(2);
                for i in 0..n {
                    let u = i as f64 / (n - 1) as f64;
                    if !(a0.value(u) > 0.0) {
                        return arg(format!("ARCH intercept must be positive, violated at u = {u:.4}"));
                    }
                    if self.alpha.iter().any(|c| c.value(u) < 0.0) {
                        return arg(format!("ARCH coefficients must be nonnegative, violated at u = {u:.4}"));
                    }
                }
                let (u, margin) = self.worst_margin(grid_size);
                if margin <= 0.0 {
                    return Err(Error::Stability { u, margin });
                }
            }
            _ => {
                let (u, margin) = self.worst_margin(grid_size);
                if margin < delta {
                    return Err(Error::Stability { u, margin });
                }
            }
        }
        Ok(())
    }

    fn require_linear(&self) -> Result<()> {
        if self.family == Family::TvArch {
            Err(Error::UnsupportedFamily(self.family.name().into()))
        } else {
            Ok(())
        }
    }

    /// Transfer function `A(u, λ)` with `f(u, λ) = |A(u, λ)|² / 2π`.
    pub fn transfer(&self, u: f64, lambda: f64) -> Result<Complex64> {
        self.require_linear()?;
        let e = |j: usize| Complex64::from_polar(1.0, -(j as f64) * lambda);
        let ar = self
            .alpha
            .iter()
            .enumerate()
            .fold(Complex64::new(1.0, 0.0), |acc, (j, c)| acc + c.value(u) * e(j + 1));
        let ma = self
            .beta
            .iter()
            .enumerate()
            .fold(Complex64::new(1.0, 0.0), |acc, (k, c)| acc + c.value(u) * e(k + 1));
        Ok(self.sigma.value(u) * ma / ar)
    }

    /// Time-varying spectral density `f(u, λ)`.
    pub fn spectral_density(&self, u: f64, lambda: f64) -> Result<f64> {
        self.require_linear()?;
        Ok(ar_ma_spectrum(&self.ar_coefficients(u), &self.ma_coefficients(u), self.sigma2(u), lambda))
    }

    /// Local covariance `c(u, k) = ∫ e^{ikλ} f(u, λ) dλ`.
    pub fn covariance(&self, u: f64, k: i64) -> Result<f64> {
        let lag = k.unsigned_abs() as usize;
        Ok(self.covariances(u, lag)?[lag])
    }

    /// `c(u, 0..=max_lag)`. Exact for tvAR; periodic trapezoid on
    /// [`COVARIANCE_NODES`] (or more) nodes otherwise.
    pub fn covariances(&self, u: f64, max_lag: usize) -> Result<Vec<f64>> {
        self.require_linear()?;
        let alpha = self.ar_coefficients(u);
        if self.beta.is_empty() {
            return ar_autocovariances(&alpha, self.sigma2(u), max_lag).ok_or(Error::Stability {
                u,
                margin: ar_root_margin(&alpha),
            });
        }
        let beta = self.ma_coefficients(u);
        let s2 = self.sigma2(u);
        let l = COVARIANCE_NODES.max((2 * max_lag + 2).next_power_of_two());
        let samples: Vec<f64> = numeric::periodic_nodes(l)
            .iter()
            .map(|&lam| ar_ma_spectrum(&alpha, &beta, s2, lam))
            .collect();
        Ok(numeric::even_fourier_coefficients(&samples, max_lag)
            .into_iter()
            .map(|c| 2.0 * PI * c)
            .collect())
    }
}

/// `σ²/(2π) |Σ β_k e^{iλk}|² / |Σ α_j e^{iλj}|²` with `α_0 = β_0 = 1`.
pub fn ar_ma_spectrum(alpha: &[f64], beta: &[f64], sigma2: f64, lambda: f64) -> f64 {
    let poly = |c: &[f64]| {
        let (mut re, mut im) = (1.0, 0.0);
        for (j, &a) in c.iter().enumerate() {
            let x = (j + 1) as f64 * lambda;
            re += a * x.cos();
            im += a * x.sin();
        }
        re * re + im * im
    };
    sigma2 / (2.0 * PI) * poly(beta) / poly(alpha)
}

/// Smallest root modulus of `1 + Σ α_j z^j` minus one.
pub fn ar_root_margin(alpha: &[f64]) -> f64 {
    let p = alpha.len();
    match p {
        0 => f64::INFINITY,
        1 => {
            if alpha[0] == 0.0 {
                f64::INFINITY
            } else {
                1.0 / alpha[0].abs() - 1.0
            }
        }
        _ => {
            // Reciprocal roots are the eigenvalues of the companion matrix of
            // w^p + α_1 w^{p-1} + ... + α_p.
            let mut c = DMatrix::<f64>::zeros(p, p);
            for j in 0..p {
                c[(0, j)] = -alpha[j];
            }
            for i in 1..p {
                c[(i, i - 1)] = 1.0;
            }
            let rmax = c.complex_eigenvalues().iter().fold(0.0f64, |m, z| m.max(z.norm()));
            if rmax == 0.0 {
                f64::INFINITY
            } else {
                1.0 / rmax - 1.0
            }
        }
    }
}

/// Autocovariances `c(0..=max_lag)` of the stationary AR(p) process
/// `X_t + Σ α_j X_{t-j} = σ ε_t`; `None` on a unit or explosive root.
pub fn ar_autocovariances(alpha: &[f64], sigma2: f64, max_lag: usize) -> Option<Vec<f64>> {
    let p = alpha.len();
    let mut c = vec![0.0; max_lag.max(p) + 1];
    if p == 0 {
        c[0] = sigma2;
    } else if p == 1 {
        let a = alpha[0];
        if a.abs() >= 1.0 {
            return None;
        }
        c[0] = sigma2 / (1.0 - a * a);
    } else {
        if ar_root_margin(alpha) <= 0.0 {
            return None;
        }
        // c_k + Σ_j α_j c_{|k-j|} = σ² δ_{k0}, k = 0..p.
        let mut m = DMatrix::<f64>::zeros(p + 1, p + 1);
        for k in 0..=p {
            m[(k, k)] += 1.0;
            for j in 1..=p {
                m[(k, k.abs_diff(j))] += alpha[j - 1];
            }
        }
        let mut rhs = DVector::<f64>::zeros(p + 1);
        rhs[0] = sigma2;
        let sol = m.lu().solve(&rhs)?;
        c[..=p].copy_from_slice(sol.as_slice());
    }
    for k in 1..c.len() {
        if p == 0 || (p > 1 && k <= p) {
            continue;
        }
        c[k] = -(1..=p).map(|j| alpha[j - 1] * c[k.abs_diff(j)]).sum::<f64>();
    }
    c.truncate(max_lag + 1);
    Some(c)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Origin {
    Simulated { seed: u64 },
    Ingested,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub values: Vec<f64>,
    pub origin: Origin,
}

impl Realization {
    pub fn ingested(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return arg("empty series");
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return arg(format!("non-finite value at position {}", i + 1));
        }
        Ok(Self {
            values,
            origin: Origin::Ingested,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `X_t` with the 1-based time index used throughout.
    pub fn at(&self, t: usize) -> f64 {
        self.values[t - 1]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn demeaned(&self) -> Self {
        let m = self.mean();
        Self {
            values: self.values.iter().map(|v| v - m).collect(),
            origin: self.origin.clone(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * c).collect(),
            origin: self.origin.clone(),
        }
    }
}

/// Innovations `ε_t` for `t = 1 - back ..= n`, returned in time order so that
/// entry `i` holds `ε_{i + 1 - back}`. Forward (`t ≥ 1`) and backward
/// (`t ≤ 0`) draws come from separate streams, so the values at a given `t`
/// do not depend on `back`.
pub fn innovations(spec: &InnovationSpec, seed: u64, back: usize, n: usize) -> Vec<f64> {
    let mut fwd = mc::rng_stream(seed, 0);
    let mut bwd = mc::rng_stream(seed, 1);
    let mut past: Vec<f64> = (0..back).map(|_| spec.draw(&mut bwd)).collect();
    past.reverse();
    past.extend((0..n).map(|_| spec.draw(&mut fwd)));
    past
}

fn check_length(t_len: usize) -> Result<()> {
    if t_len == 0 {
        return arg("sample size T must be positive");
    }
    Ok(())
}

/// Simulates `X_{1..T,T}` by running the defining recursion exactly, after a
/// [`BURN_IN`]-step pre-sample with curves frozen at `u = 0` from a zero state.
pub fn simulate(spec: &TvModelSpec, t_len: usize, seed: u64) -> Result<Realization> {
    check_length(t_len)?;
    spec.validate()?;
    let values = run_recursion(spec, t_len, seed, |t| t as f64 / t_len as f64);
    Ok(Realization {
        values,
        origin: Origin::Simulated { seed },
    })
}

/// Frozen-coefficient stationary process `X̃_t(u0)`, `t = 1..T`, driven by the
/// same innovations as [`simulate`] with the same seed.
pub fn stationary_approximation(spec: &TvModelSpec, u0: f64, t_len: usize, seed: u64) -> Result<Realization> {
    check_length(t_len)?;
    if !(0.0..=1.0).contains(&u0) {
        return arg(format!("u0 must lie in [0, 1], got {u0}"));
    }
    spec.validate()?;
    let values = run_recursion(spec, t_len, seed, |_| u0);
    Ok(Realization {
        values,
        origin: Origin::Simulated { seed },
    })
}

/// Runs the model recursion for `t = 1 - BURN_IN ..= T`, evaluating curves at
/// `time(t)` (curves clamp negative arguments to their value at 0).
fn run_recursion(spec: &TvModelSpec, t_len: usize, seed: u64, time: impl Fn(i64) -> f64) -> Vec<f64> {
    let p = spec.p();
    let q = spec.q();
    let back = BURN_IN + q;
    let eps = innovations(&spec.innovations, seed, back, t_len);
    let eps_at = |t: i64| eps[(t + back as i64 - 1) as usize];
    let total = BURN_IN + t_len;
    let mut x = vec![0.0; total];
    let first = 1 - BURN_IN as i64;
    for i in 0..total {
        let t = first + i as i64;
        let u = time(t);
        let lag = |j: usize| if i >= j { x[i - j] } else { 0.0 };
        x[i] = match spec.family {
            Family::TvAr => {
                let ar: f64 = spec.alpha.iter().enumerate().map(|(j, c)| c.value(u) * lag(j + 1)).sum();
                -ar + spec.sigma.value(u) * eps_at(t)
            }
            Family::TvArma => {
                let ar: f64 = spec.alpha.iter().enumerate().map(|(j, c)| c.value(u) * lag(j + 1)).sum();
                let mut ma = spec.sigma.value(u) * eps_at(t);
                for (k, c) in spec.beta.iter().enumerate() {
                    let tk = t - (k as i64 + 1);
                    ma += c.value(u) * spec.sigma.value(time(tk)) * eps_at(tk);
                }
                -ar + ma
            }
            Family::TvArch => {
                let a0 = spec.arch_intercept.as_ref().map_or(1.0, |c| c.value(u));
                let s2 = a0
                    + spec
                        .alpha
                        .iter()
                        .enumerate()
                        .map(|(j, c)| c.value(u) * lag(j + 1).powi(2))
                        .sum::<f64>();
                s2.sqrt() * eps_at(t)
            }
        };
        let _ = p;
    }
    x[BURN_IN..]
        .iter()
        .enumerate()
        .map(|(i, v)| v + spec.mu.value(time(i as i64 + 1)))
        .collect()
}

/// Output of [`derivative_process_tvar1`].
#[derive(Debug, Clone)]
pub struct DerivativeProcess {
    pub values: Vec<f64>,
    /// Moving-average truncation lag `J`.
    pub truncation: usize,
    /// `Σ_{j>J} j ρ^{j-1}` with `ρ = |α_1(u0)|`.
    pub tail_bound: f64,
}

/// Truncation lag `⌈log(1e-10) / log ρ⌉` used when none is given.
pub fn default_truncation(rho: f64) -> usize {
    if rho <= 0.0 {
        1
    } else {
        ((1e-10f64).ln() / rho.ln()).ceil().max(1.0) as usize
    }
}

/// `∂X̃_t(u)/∂u` at `u0` for a tvAR(1) model, from its moving-average form
/// truncated at lag `J`, sharing innovations with [`simulate`].
pub fn derivative_process_tvar1(
    spec: &TvModelSpec,
    u0: f64,
    t_len: usize,
    seed: u64,
    truncation: Option<usize>,
) -> Result<DerivativeProcess> {
    check_length(t_len)?;
    if spec.family != Family::TvAr || spec.p() != 1 {
        return arg("derivative process is available for tvAR(1) models only");
    }
    let a_curve = &spec.alpha[0];
    let (Some(da), Some(ds), Some(dm)) = (
        a_curve.derivative(u0, 1),
        spec.sigma.derivative(u0, 1),
        spec.mu.derivative(u0, 1),
    ) else {
        return Err(Error::Capability(
            "curves need an analytic first derivative for the derivative process".into(),
        ));
    };
    let a = a_curve.value(u0);
    let rho = a.abs();
    if rho >= 1.0 {
        return Err(Error::Stability {
            u: u0,
            margin: ar_root_margin(&[a]),
        });
    }
    let j_max = match truncation {
        Some(0) => return arg("truncation lag must be at least 1"),
        Some(j) => j,
        None => default_truncation(rho),
    };
    let s = spec.sigma.value(u0);
    // ∂/∂u of σ(u) (-α(u))^j.
    let coef: Vec<f64> = (0..=j_max)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            let dpow = if j == 0 { 0.0 } else { j as f64 * a.powi(j as i32 - 1) * da };
            sign * (s * dpow + ds * a.powi(j as i32))
        })
        .collect();
    let eps = innovations(&spec.innovations, seed, j_max, t_len);
    let values = (1..=t_len)
        .map(|t| {
            let base = t + j_max - 1;
            dm + coef.iter().enumerate().map(|(j, c)| c * eps[base - j]).sum::<f64>()
        })
        .collect();
    let tail_bound = if rho == 0.0 {
        0.0
    } else {
        let jf = j_max as f64;
        ((jf + 1.0) * rho.powi(j_max as i32) - jf * rho.powi(j_max as i32 + 1)) / (1.0 - rho).powi(2)
    };
    Ok(DerivativeProcess {
        values,
        truncation: j_max,
        tail_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn white_noise_spectrum_and_covariances() {
        let wn = TvModelSpec::white_noise(1.0);
        for &(u, l) in &[(0.1, 0.3), (0.9, -2.0)] {
            assert!((wn.spectral_density(u, l).unwrap() - 1.0 / (2.0 * PI)).abs() < 1e-15);
        }
        let c = wn.covariances(0.5, 3).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-10);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn ar1_spectrum_and_covariances() {
        let m = TvModelSpec::ar1(-0.5, 1.0);
        assert!((m.spectral_density(0.3, 0.0).unwrap() - 2.0 / PI).abs() < 1e-14);
        assert!((m.covariance(0.3, 0).unwrap() - 4.0 / 3.0).abs() < 1e-8);
        assert!((m.covariance(0.3, 1).unwrap() - 2.0 / 3.0).abs() < 1e-8);
        assert_eq!(m.covariance(0.3, 3).unwrap(), m.covariance(0.3, -3).unwrap());
    }

    #[test]
    fn ar_covariances_match_quadrature() {
        // Independent route: integrate the spectral density numerically.
        let m = TvModelSpec::oscillating_ar2();
        for &u in &[0.1, 0.45, 0.8] {
            let exact = m.covariances(u, 6).unwrap();
            let n = 8192;
            for (k, ck) in exact.iter().enumerate() {
                let quad: f64 = (0..n)
                    .map(|j| {
                        let lam = -PI + 2.0 * PI * j as f64 / n as f64;
                        m.spectral_density(u, lam).unwrap() * (k as f64 * lam).cos()
                    })
                    .sum::<f64>()
                    * 2.0
                    * PI
                    / n as f64;
                assert!((ck - quad).abs() < 1e-8 * (1.0 + quad.abs()), "u={u} k={k}");
            }
        }
    }

    #[test]
    fn arma_covariances_match_ma_closed_form() {
        // MA(1): c0 = σ²(1 + b²), c1 = σ² b.
        let m = TvModelSpec::tvarma(vec![], vec![ParameterCurve::constant(0.4)], ParameterCurve::constant(1.5));
        let c = m.covariances(0.5, 2).unwrap();
        assert!((c[0] - 2.25 * 1.16).abs() < 1e-10);
        assert!((c[1] - 2.25 * 0.4).abs() < 1e-10);
        assert!(c[2].abs() < 1e-10);
    }

    #[test]
    fn spectrum_integrates_to_variance() {
        let m = TvModelSpec::tvarma(
            vec![ParameterCurve::constant(-0.6)],
            vec![ParameterCurve::constant(0.3)],
            ParameterCurve::constant(1.0),
        );
        let n = 4096;
        let integral: f64 = (0..n)
            .map(|j| m.spectral_density(0.5, -PI + 2.0 * PI * j as f64 / n as f64).unwrap())
            .sum::<f64>()
            * 2.0
            * PI
            / n as f64;
        assert!((integral - m.covariance(0.5, 0).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn arch_spectrum_is_unsupported() {
        let m = TvModelSpec::tvarch(ParameterCurve::constant(1.0), vec![ParameterCurve::constant(0.3)]);
        assert!(matches!(m.spectral_density(0.5, 0.1), Err(Error::UnsupportedFamily(_))));
    }

    #[test]
    fn peak_of_oscillating_model() {
        let m = TvModelSpec::oscillating_ar2();
        for i in 1..=9 {
            let u = i as f64 / 10.0;
            let n = 4000;
            let (arg, _) = (0..=n)
                .map(|j| {
                    let l = PI * j as f64 / n as f64;
                    (l, m.spectral_density(u, l).unwrap())
                })
                .fold((0.0, 0.0), |b, c| if c.1 > b.1 { c } else { b });
            assert!((arg - TvModelSpec::oscillating_ar2_peak(u)).abs() < 0.05, "u={u}");
        }
    }

    #[test]
    fn stability_margins() {
        assert!((TvModelSpec::ar1(-0.5, 1.0).stability_margin(201) - 1.0).abs() < 1e-12);
        assert!((TvModelSpec::oscillating_ar2().stability_margin(201) - (1.0 / 0.9 - 1.0)).abs() < 1e-9);
        assert!(TvModelSpec::ar1(-1.0, 1.0).stability_margin(201).abs() < 1e-12);
        let explosive = TvModelSpec::tvar(vec![ParameterCurve::polynomial(vec![0.0, -1.5])], ParameterCurve::constant(1.0));
        match simulate(&explosive, 10, 1) {
            Err(Error::Stability { u, .. }) => assert!(u > 0.6),
            other => panic!("expected stability error, got {other:?}"),
        }
    }

    #[test]
    fn simulate_errors_and_zero_series() {
        assert!(matches!(simulate(&TvModelSpec::ar1(0.2, 1.0), 0, 1), Err(Error::Argument(_))));
        let silent = TvModelSpec::ar1(-0.5, 0.0);
        assert!(simulate(&silent, 50, 3).unwrap().values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn ar1_sample_variance() {
        let m = TvModelSpec::ar1(-0.5, 1.0);
        let x = simulate(&m, 100_000, 11).unwrap();
        let v = x.values.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
        // Var of the sample second moment: (2/n) Σ_k c(k)² = (2/n) (16/9)(1.25/0.75).
        let se = (2.0f64 / 1e5 * (16.0 / 9.0) * (1.25 / 0.75)).sqrt();
        assert!((v - 4.0 / 3.0).abs() < 3.0 * se, "{v}");
    }

    #[test]
    fn constant_model_matches_stationary_approximation() {
        let m = TvModelSpec::tvar(
            vec![ParameterCurve::constant(-0.4), ParameterCurve::constant(0.2)],
            ParameterCurve::constant(1.3),
        );
        let a = simulate(&m, 300, 5).unwrap();
        let b = stationary_approximation(&m, 0.37, 300, 5).unwrap();
        assert_eq!(a.values, b.values);
        assert_eq!(simulate(&m, 300, 5).unwrap(), a);
        assert_ne!(simulate(&m, 300, 6).unwrap().values, a.values);
    }

    #[test]
    fn stationary_approximation_is_local() {
        // Mean over seeds of the largest gap near u0 and over the whole sample.
        let m = TvModelSpec::oscillating_ar2();
        let gaps = |t_len: usize, half_width: f64| {
            let (mut near, mut all) = (0.0, 0.0);
            for seed in 0..50 {
                let x = simulate(&m, t_len, seed).unwrap();
                let y = stationary_approximation(&m, 0.5, t_len, seed).unwrap();
                let (mut n1, mut a1) = (0.0f64, 0.0f64);
                for t in 1..=t_len {
                    let d = (x.at(t) - y.at(t)).abs();
                    a1 = a1.max(d);
                    if (t as f64 / t_len as f64 - 0.5).abs() <= half_width {
                        n1 = n1.max(d);
                    }
                }
                near += n1 / 50.0;
                all += a1 / 50.0;
            }
            (near, all)
        };
        let (near, all) = gaps(128, 0.05);
        assert!(near * 2.5 < all, "near {near} all {all}");
        let (near, all) = gaps(1024, 0.01);
        assert!(near * 10.0 < all, "near {near} all {all}");
    }

    #[test]
    fn arch_frozen_recursion_replays() {
        let m = TvModelSpec::tvarch(
            ParameterCurve::polynomial(vec![0.5, 0.5]),
            vec![ParameterCurve::constant(0.3), ParameterCurve::cosine(0.2, 0.1, 3.0, 0.0)],
        );
        let (u0, t_len, seed) = (0.4, 200, 9);
        let x = stationary_approximation(&m, u0, t_len, seed).unwrap();
        let z = innovations(&m.innovations, seed, 0, t_len);
        let a0 = m.arch_intercept.as_ref().unwrap().value(u0);
        let a = m.ar_coefficients(u0);
        for t in 3..=t_len {
            let s2 = a0 + a[0] * x.at(t - 1).powi(2) + a[1] * x.at(t - 2).powi(2);
            assert!((x.at(t) - s2.sqrt() * z[t - 1]).abs() < 1e-12);
        }
        let bad = TvModelSpec::tvarch(ParameterCurve::constant(1.0), vec![ParameterCurve::constant(1.2)]);
        assert!(bad.validate().is_err());
    }

    fn tvar1(alpha: ParameterCurve, sigma: ParameterCurve) -> TvModelSpec {
        TvModelSpec::tvar(vec![alpha], sigma)
    }

    #[test]
    fn derivative_process_of_constant_model_vanishes() {
        let m = TvModelSpec::ar1(0.6, 2.0);
        let d = derivative_process_tvar1(&m, 0.3, 100, 1, None).unwrap();
        assert!(d.values.iter().all(|&v| v == 0.0));
        let sampled = tvar1(
            ParameterCurve::sampled(vec![0.0, 1.0], vec![0.1, 0.2]).unwrap(),
            ParameterCurve::constant(1.0),
        );
        assert!(matches!(
            derivative_process_tvar1(&sampled, 0.5, 10, 1, None),
            Err(Error::Capability(_))
        ));
    }

    #[test]
    fn derivative_process_satisfies_differentiated_recursion() {
        let m = tvar1(
            ParameterCurve::cosine(-0.5, -0.2, 2.0 * PI, 0.0),
            ParameterCurve::polynomial(vec![1.0, 0.5]),
        );
        let (u0, t_len, seed) = (0.3, 400, 21);
        let d = derivative_process_tvar1(&m, u0, t_len, seed, None).unwrap();
        let x = stationary_approximation(&m, u0, t_len, seed).unwrap();
        let eps = innovations(&m.innovations, seed, 0, t_len);
        let a = m.alpha[0].value(u0);
        let da = m.alpha[0].derivative(u0, 1).unwrap();
        let ds = m.sigma.derivative(u0, 1).unwrap();
        let emax = eps.iter().fold(0.0f64, |m, e| m.max(e.abs()));
        let scale = (m.sigma.value(u0) * da.abs() + ds.abs()) * emax;
        for t in 2..=t_len {
            let r = d.values[t - 1] + a * d.values[t - 2] + da * x.at(t - 1) - ds * eps[t - 1];
            assert!(r.abs() <= 1e-8 + scale * d.tail_bound, "t={t} r={r}");
        }
        assert_eq!(d.truncation, default_truncation(a.abs()));
    }

    #[test]
    fn taylor_remainder_scales_quadratically() {
        let m = tvar1(ParameterCurve::polynomial(vec![-0.2, -0.6, 0.4]), ParameterCurve::constant(1.0));
        let (u0, t_len) = (0.5, 4000);
        let deltas = [0.2, 0.1, 0.05];
        let reps = 200;
        let mut rms = [0.0; 3];
        for seed in 0..reps {
            let x = simulate(&m, t_len, seed).unwrap();
            let y = stationary_approximation(&m, u0, t_len, seed).unwrap();
            let d = derivative_process_tvar1(&m, u0, t_len, seed, None).unwrap();
            for (i, &delta) in deltas.iter().enumerate() {
                let mut worst = 0.0f64;
                for t in 1..=t_len {
                    let s = t as f64 / t_len as f64 - u0;
                    if s.abs() <= delta {
                        worst = worst.max((x.at(t) - y.at(t) - s * d.values[t - 1]).abs());
                    }
                }
                rms[i] += worst / reps as f64;
            }
        }
        let lx: Vec<f64> = deltas.iter().map(|d| d.ln()).collect();
        let ly: Vec<f64> = rms.iter().map(|r| r.ln()).collect();
        let mx = lx.iter().sum::<f64>() / 3.0;
        let my = ly.iter().sum::<f64>() / 3.0;
        let slope = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
        assert!((1.6..=2.4).contains(&slope), "slope {slope}, remainders {rms:?}");
    }

    #[test]
    fn innovation_moments() {
        for &k4 in &[-1.5, 0.0, 2.0, 6.0] {
            let spec = InnovationSpec::with_kappa4(k4).unwrap();
            let e = innovations(&spec, 3, 0, 200_000);
            let n = e.len() as f64;
            let m2 = e.iter().map(|v| v * v).sum::<f64>() / n;
            let m4 = e.iter().map(|v| v.powi(4)).sum::<f64>() / n;
            assert!((m2 - 1.0).abs() < 0.02, "k4={k4} m2={m2}");
            assert!((m4 - 3.0 - k4).abs() < 0.1 * (3.0 + k4), "k4={k4} m4={m4}");
        }
        assert!(InnovationSpec::with_kappa4(-3.0).is_err());
    }

    #[test]
    fn innovation_stream_is_prefix_stable() {
        let s = InnovationSpec::gaussian();
        let a = innovations(&s, 4, 10, 20);
        let b = innovations(&s, 4, 30, 20);
        assert_eq!(a[..], b[20..]);
    }

    proptest! {
        #[test]
        fn spectrum_even_periodic_nonnegative(a1 in -0.9f64..0.9, a2 in -0.5f64..0.5, b in -0.8f64..0.8,
                                              lam in -PI..PI) {
            let m = TvModelSpec::tvarma(
                vec![ParameterCurve::constant(a1), ParameterCurve::constant(a2 * (1.0 - a1.abs()))],
                vec![ParameterCurve::constant(b)],
                ParameterCurve::constant(1.0),
            );
            let f = m.spectral_density(0.5, lam).unwrap();
            prop_assert!(f >= 0.0);
            prop_assert!((f - m.spectral_density(0.5, -lam).unwrap()).abs() <= 1e-12 * f.max(1.0));
            prop_assert!((f - m.spectral_density(0.5, lam + 2.0 * PI).unwrap()).abs() <= 1e-10 * f.max(1.0));
        }

        #[test]
        fn covariance_is_even(a in -0.95f64..0.95, k in 0i64..20) {
            let m = TvModelSpec::ar1(a, 1.0);
            prop_assert_eq!(m.covariance(0.5, k).unwrap(), m.covariance(0.5, -k).unwrap());
        }
    }
}
