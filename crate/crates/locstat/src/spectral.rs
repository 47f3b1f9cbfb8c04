//! Segment periodograms, the pre-periodogram and smoothed time-varying
//! spectral estimates.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{arg, Error, Result};
use crate::local::segment_offset;
use crate::mc::Executor;
use crate::model::TvModelSpec;
use crate::numeric::{fft_forward, periodic_nodes};
use crate::taper::{Kernel, Taper};

/// Taper-weighted segment about `u0`, ready for Fourier evaluation.
#[derive(Debug, Clone)]
pub struct SegmentPeriodogram {
    /// `h(s/N) X_{offset+s}` for `s = 1..=N` (zero where the segment leaves the sample).
    weighted: Vec<f64>,
    h_norm: f64,
    pub edge: bool,
}

impl SegmentPeriodogram {
    pub fn new(x: &[f64], u0: f64, n: usize, taper: &Taper) -> Result<Self> {
        let t_len = x.len();
        if !(0.0..=1.0).contains(&u0) {
            return arg(format!("u0 must lie in [0, 1], got {u0}"));
        }
        if n == 0 || n > t_len {
            return arg(format!("segment length must satisfy 1 <= N <= T = {t_len}, got {n}"));
        }
        let off = segment_offset(t_len, u0, n);
        let mut weighted = vec![0.0; n];
        let mut h_norm = 0.0;
        let mut edge = false;
        for s in 1..=n {
            let t = off + s as i64;
            if t < 1 || t > t_len as i64 {
                edge = true;
                continue;
            }
            let h = taper.value(s as f64 / n as f64);
            h_norm += h * h;
            weighted[s - 1] = h * x[(t - 1) as usize];
        }
        if h_norm == 0.0 {
            return Err(Error::Window(format!("segment about u0 = {u0} is empty")));
        }
        Ok(Self { weighted, h_norm, edge })
    }

    pub fn len(&self) -> usize {
        self.weighted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weighted.is_empty()
    }

    /// `I(λ) = |Σ_s h(s/N) X e^{-iλs}|² / (2π H_N)` at a single frequency.
    pub fn eval(&self, lambda: f64) -> f64 {
        let (mut re, mut im) = (0.0, 0.0);
        for (s, w) in self.weighted.iter().enumerate() {
            let a = lambda * (s + 1) as f64;
            re += w * a.cos();
            im -= w * a.sin();
        }
        (re * re + im * im) / (2.0 * PI * self.h_norm)
    }

    /// Values at `2πj/L`, `j = 0..L`, by a zero-padded FFT (`L ≥ N`).
    pub fn on_grid(&self, l: usize) -> Vec<f64> {
        assert!(l >= self.len(), "grid must have at least N points");
        let mut buf = vec![Complex64::new(0.0, 0.0); l];
        for (b, w) in buf.iter_mut().zip(&self.weighted) {
            b.re = *w;
        }
        fft_forward(&mut buf);
        buf.iter().map(|z| z.norm_sqr() / (2.0 * PI * self.h_norm)).collect()
    }
}

/// Periodogram of the segment of length `N` about `u0` at each `lambda`.
pub fn segment_periodogram(x: &[f64], u0: f64, n: usize, taper: &Taper, lambdas: &[f64]) -> Result<Vec<f64>> {
    let seg = SegmentPeriodogram::new(x, u0, n, taper)?;
    Ok(lambdas.iter().map(|&l| seg.eval(l)).collect())
}

/// Full-sample untapered periodogram `|Σ X_r e^{-iλr}|² / (2πT)`.
pub fn periodogram(x: &[f64], lambdas: &[f64]) -> Vec<f64> {
    let seg = SegmentPeriodogram {
        weighted: x.to_vec(),
        h_norm: x.len() as f64,
        edge: false,
    };
    lambdas.iter().map(|&l| seg.eval(l)).collect()
}

/// Lagged products `P_t(k) = X_{[t+1/2+k/2]} X_{[t+1/2-k/2]}` for
/// `k = 0..=k_max(t)`, where `k_max` is the largest lag with both indices in
/// the sample. `P_t(-k) = P_t(k)`, so the pre-periodogram is real.
pub fn pre_periodogram_lags(x: &[f64], t: usize) -> Vec<f64> {
    let t_len = x.len();
    let mut out = Vec::with_capacity(2 * t.min(t_len - t + 1));
    let mut k = 0usize;
    loop {
        // Even k = 2m: (t+m, t-m); odd k = 2m+1: (t+m+1, t-m).
        let m = k / 2;
        let (hi, lo) = if k % 2 == 0 { (t + m, t as i64 - m as i64) } else { (t + m + 1, t as i64 - m as i64) };
        if hi > t_len || lo < 1 {
            break;
        }
        out.push(x[hi - 1] * x[(lo - 1) as usize]);
        k += 1;
    }
    out
}

/// Pre-periodogram `J(t/T, λ) = (1/2π)[P(0) + 2 Σ_k P(k) cos kλ]`, `1 <= t <= T`.
pub fn pre_periodogram(x: &[f64], t: usize, lambdas: &[f64]) -> Result<Vec<f64>> {
    if t == 0 || t > x.len() {
        return arg(format!("time index must lie in 1..={}, got {t}", x.len()));
    }
    let p = pre_periodogram_lags(x, t);
    Ok(lambdas.iter().map(|&l| lag_series_value(&p, l)).collect())
}

/// Same as [`pre_periodogram`] on a tapered copy `h(t/T) X_t` of the data.
pub fn tapered_pre_periodogram(x: &[f64], t: usize, taper: &Taper, lambdas: &[f64]) -> Result<Vec<f64>> {
    pre_periodogram(&taper_series(x, taper), t, lambdas)
}

pub(crate) fn taper_series(x: &[f64], taper: &Taper) -> Vec<f64> {
    let tf = x.len() as f64;
    x.iter().enumerate().map(|(i, v)| taper.value((i + 1) as f64 / tf) * v).collect()
}

/// `(1/2π)[c(0) + 2 Σ_{k≥1} c(k) cos kλ]`.
pub(crate) fn lag_series_value(c: &[f64], lambda: f64) -> f64 {
    let mut s = c.first().copied().unwrap_or(0.0);
    for (k, ck) in c.iter().enumerate().skip(1) {
        s += 2.0 * ck * (k as f64 * lambda).cos();
    }
    s / (2.0 * PI)
}

/// `(1/2π)[c(0) + 2 Σ c(k) cos kλ]` on the `l`-point grid `2πj/l` by FFT.
pub(crate) fn lag_series_on_grid(c: &[f64], l: usize) -> Vec<f64> {
    let mut buf = vec![Complex64::new(0.0, 0.0); l];
    for (k, ck) in c.iter().enumerate() {
        if k == 0 {
            buf[0].re += ck;
        } else {
            buf[k % l].re += ck;
            buf[(l - k % l) % l].re += ck;
        }
    }
    fft_forward(&mut buf);
    buf.iter().map(|z| z.re / (2.0 * PI)).collect()
}

/// `max_λ |(1/T) Σ_t J(t/T, λ) - I(λ)|` over the given frequencies.
pub fn periodogram_identity_check(x: &[f64], lambdas: &[f64]) -> f64 {
    let t_len = x.len();
    let mut avg = vec![0.0; lambdas.len()];
    for t in 1..=t_len {
        let p = pre_periodogram_lags(x, t);
        for (a, &l) in avg.iter_mut().zip(lambdas) {
            *a += lag_series_value(&p, l);
        }
    }
    let i_t = periodogram(x, lambdas);
    avg.iter()
        .zip(&i_t)
        .map(|(a, i)| (a / t_len as f64 - i).abs())
        .fold(0.0, f64::max)
}

/// Fourier frequencies `2πj/T` in `[0, π]`.
pub fn fourier_frequencies(t_len: usize) -> Vec<f64> {
    (0..=t_len / 2).map(|j| 2.0 * PI * j as f64 / t_len as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralForm {
    /// Frequency-smoothed tapered segment periodogram.
    #[default]
    Segment,
    /// Pre-periodogram smoothed with a time kernel and a frequency kernel.
    PrePeriodogram,
}

#[derive(Debug, Clone, Serialize)]
pub struct SmoothingConfig {
    /// Time bandwidth; the segment form uses `N = round(b_t T)`.
    pub b_t: f64,
    /// Frequency bandwidth in radians, `0 < b_f < π`.
    pub b_f: f64,
    pub taper: Taper,
    /// Time kernel for the pre-periodogram form.
    pub time_kernel: Kernel,
    pub freq_kernel: Kernel,
    pub form: SpectralForm,
}

impl SmoothingConfig {
    pub fn segment(b_t: f64, b_f: f64) -> Self {
        Self {
            b_t,
            b_f,
            taper: Taper::SineSquared,
            time_kernel: Taper::SineSquared.induced_kernel(),
            freq_kernel: Kernel::CanonicalQuadratic,
            form: SpectralForm::Segment,
        }
    }

    pub fn pre_periodogram(b_t: f64, b_f: f64) -> Self {
        Self {
            form: SpectralForm::PrePeriodogram,
            ..Self::segment(b_t, b_f)
        }
    }

    pub fn segment_length(&self, t_len: usize) -> usize {
        ((self.b_t * t_len as f64).round() as usize).clamp(1, t_len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridKind {
    Estimate,
    Truth,
    PrePeriodogram,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralGrid {
    pub kind: GridKind,
    pub u: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `values[i][j]` at `(u[i], lambda[j])`.
    pub values: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub smoothing: Option<SmoothingConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<usize>,
}

#[derive(Serialize)]
struct GridHeader<'a> {
    kind: GridKind,
    n_u: usize,
    n_lambda: usize,
    u_range: (f64, f64),
    lambda_range: (f64, f64),
    sample_size: Option<usize>,
    smoothing: Option<&'a SmoothingConfig>,
}

impl SpectralGrid {
    fn check(u: &[f64], lambda: &[f64]) -> Result<()> {
        if u.is_empty() || lambda.is_empty() {
            return arg("grid needs at least one u and one lambda node");
        }
        if u.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return arg("u nodes must lie in [0, 1]");
        }
        if u.windows(2).any(|w| w[1] <= w[0]) || lambda.windows(2).any(|w| w[1] <= w[0]) {
            return arg("grid nodes must be strictly increasing");
        }
        Ok(())
    }

    /// `f(u, λ)` of a model on the grid.
    pub fn truth(spec: &TvModelSpec, u: &[f64], lambda: &[f64]) -> Result<Self> {
        Self::check(u, lambda)?;
        let values = u
            .iter()
            .map(|&ui| lambda.iter().map(|&l| spec.spectral_density(ui, l)).collect())
            .collect::<Result<_>>()?;
        Ok(Self {
            kind: GridKind::Truth,
            u: u.to_vec(),
            lambda: lambda.to_vec(),
            values,
            smoothing: None,
            sample_size: None,
        })
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    /// `λ` maximising each row.
    pub fn ridge(&self) -> Vec<f64> {
        self.values
            .iter()
            .map(|row| {
                let j = (0..row.len()).max_by(|&a, &b| row[a].total_cmp(&row[b])).unwrap_or(0);
                self.lambda[j]
            })
            .collect()
    }

    /// Long-format CSV `u,lambda,value` with optional extra columns.
    pub fn write_csv(&self, w: &mut impl Write, extra: &[(&str, &SpectralGrid)]) -> Result<()> {
        write!(w, "u,lambda,value")?;
        for (name, _) in extra {
            write!(w, ",{name}")?;
        }
        writeln!(w)?;
        for (i, u) in self.u.iter().enumerate() {
            for (j, l) in self.lambda.iter().enumerate() {
                write!(w, "{u},{l},{}", self.values[i][j])?;
                for (_, g) in extra {
                    write!(w, ",{}", g.values[i][j])?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }

    pub fn header_json(&self) -> serde_json::Value {
        serde_json::to_value(GridHeader {
            kind: self.kind,
            n_u: self.u.len(),
            n_lambda: self.lambda.len(),
            u_range: (self.u[0], self.u[self.u.len() - 1]),
            lambda_range: (self.lambda[0], self.lambda[self.lambda.len() - 1]),
            sample_size: self.sample_size,
            smoothing: self.smoothing.as_ref(),
        })
        .expect("grid header is serialisable")
    }
}

/// Circular frequency smoothing of values on the periodic grid `2πj/L`,
/// evaluated at `lambda`; discrete weights are normalised to sum to one.
fn smooth_frequency(values: &[f64], kernel: &Kernel, b_f: f64, lambda: f64) -> f64 {
    let l = values.len();
    let (mut num, mut den) = (0.0, 0.0);
    // Only nodes within b_f/2 of lambda carry weight.
    let step = 2.0 * PI / l as f64;
    let reach = (b_f / 2.0 / step).ceil() as i64 + 1;
    let centre = (lambda / step).round() as i64;
    for jj in centre - reach..=centre + reach {
        let j = jj.rem_euclid(l as i64) as usize;
        let w = kernel.value((lambda - jj as f64 * step) / b_f);
        num += w * values[j];
        den += w;
    }
    if den > 0.0 {
        num / den
    } else {
        values[centre.rem_euclid(l as i64) as usize]
    }
}

/// Smoothed time-varying spectral estimate on a `(u, λ)` grid. The data
/// should have mean zero (see [`crate::model::Realization::demeaned`]).
pub fn smoothed_tv_spectrum(x: &[f64], u: &[f64], lambda: &[f64], cfg: &SmoothingConfig) -> Result<SpectralGrid> {
    smoothed_tv_spectrum_with(x, u, lambda, cfg, Executor::default())
}

pub fn smoothed_tv_spectrum_with(
    x: &[f64],
    u: &[f64],
    lambda: &[f64],
    cfg: &SmoothingConfig,
    exec: Executor,
) -> Result<SpectralGrid> {
    SpectralGrid::check(u, lambda)?;
    let t_len = x.len();
    if !(cfg.b_f > 0.0 && cfg.b_f < PI) {
        return Err(Error::Window(format!("frequency bandwidth must lie in (0, π), got {}", cfg.b_f)));
    }
    if !(cfg.b_t > 0.0 && cfg.b_t <= 1.0) || cfg.b_t * (t_len as f64) < 2.0 {
        return Err(Error::Window(format!("time bandwidth {} is degenerate for T = {t_len}", cfg.b_t)));
    }
    let rows: Vec<Result<Vec<f64>>> = match cfg.form {
        SpectralForm::Segment => {
            let n = cfg.segment_length(t_len);
            let l = (2 * n).max(512);
            exec.map(u.len(), |i| {
                let seg = SegmentPeriodogram::new(x, u[i], n, &cfg.taper)?;
                let per = seg.on_grid(l);
                Ok(lambda.iter().map(|&lam| smooth_frequency(&per, &cfg.freq_kernel, cfg.b_f, lam)).collect())
            })
        }
        SpectralForm::PrePeriodogram => {
            let l = (2 * t_len).max(512);
            exec.map(u.len(), |i| {
                let c = time_smoothed_lags(x, u[i], cfg.b_t, &cfg.time_kernel)?;
                let j = lag_series_on_grid(&c, l);
                Ok(lambda.iter().map(|&lam| smooth_frequency(&j, &cfg.freq_kernel, cfg.b_f, lam)).collect())
            })
        }
    };
    Ok(SpectralGrid {
        kind: GridKind::Estimate,
        u: u.to_vec(),
        lambda: lambda.to_vec(),
        values: rows.into_iter().collect::<Result<_>>()?,
        smoothing: Some(cfg.clone()),
        sample_size: Some(t_len),
    })
}

/// `(1/T) Σ_t b⁻¹ K((u - t/T)/b) P_t(k)` for all lags, renormalised by the
/// kernel mass inside the sample when the window is clipped.
fn time_smoothed_lags(x: &[f64], u0: f64, b: f64, kernel: &Kernel) -> Result<Vec<f64>> {
    let t_len = x.len();
    let tf = t_len as f64;
    let t_lo = (((u0 - b / 2.0) * tf).ceil() as i64).max(1) as usize;
    let t_hi = (((u0 + b / 2.0) * tf).floor() as i64).min(t_len as i64) as usize;
    let mut acc: Vec<f64> = Vec::new();
    let mut w_sum = 0.0;
    for t in t_lo..=t_hi {
        let w = kernel.value((u0 - t as f64 / tf) / b);
        if w == 0.0 {
            continue;
        }
        w_sum += w;
        let p = pre_periodogram_lags(x, t);
        if acc.len() < p.len() {
            acc.resize(p.len(), 0.0);
        }
        for (a, v) in acc.iter_mut().zip(&p) {
            *a += w * v;
        }
    }
    if w_sum == 0.0 {
        return Err(Error::Window(format!("no kernel mass inside the sample at u = {u0}")));
    }
    let edge = u0 - b / 2.0 < 0.0 || u0 + b / 2.0 > 1.0;
    let norm = if edge { w_sum } else { b * tf };
    Ok(acc.into_iter().map(|a| a / norm).collect())
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SpectralBandwidths {
    pub b_t: f64,
    pub b_f: f64,
    /// Values before clipping `b_t` to `(0, 1]` and `b_f` to `(0, π)`.
    pub b_t_raw: f64,
    pub b_f_raw: f64,
    /// `b_t T`.
    pub segment_length: f64,
    /// Exponent of `T` in the optimal relative MSE.
    pub rate: f64,
}

/// Optimal bandwidth pair from relative curvatures `Δ_u = ∂²_u f / f` and
/// `Δ_λ = ∂²_λ f / f`; magnitudes are used.
pub fn spectral_bandwidths_from_curvature(delta_u: f64, delta_l: f64, t_len: usize) -> Result<SpectralBandwidths> {
    const FLAT: f64 = 1e-8;
    if !(delta_u.abs() > FLAT) {
        return Err(Error::NearFlat("time".into()));
    }
    if !(delta_l.abs() > FLAT) {
        return Err(Error::NearFlat("frequency".into()));
    }
    let (du, dl) = (delta_u.abs(), delta_l.abs());
    let c = (t_len as f64).powf(-1.0 / 6.0) * (576.0 * PI).powf(1.0 / 6.0);
    let b_t_raw = c * (dl / du.powi(5)).powf(1.0 / 12.0);
    let b_f_raw = c * (du / dl.powi(5)).powf(1.0 / 12.0);
    let b_t = b_t_raw.min(1.0);
    Ok(SpectralBandwidths {
        b_t,
        b_f: b_f_raw.min(PI * (1.0 - 1e-9)),
        b_t_raw,
        b_f_raw,
        segment_length: b_t * t_len as f64,
        rate: -2.0 / 3.0,
    })
}

/// Optimal `(b_t, b_f)` at `(u, λ)` for a model, from central second
/// differences of `f` (step `1e-3` in both directions).
pub fn optimal_spectral_bandwidths(spec: &TvModelSpec, u: f64, lambda: f64, t_len: usize) -> Result<SpectralBandwidths> {
    let h = 1e-3;
    let f = spec.spectral_density(u, lambda)?;
    let du = (spec.spectral_density(u + h, lambda)? - 2.0 * f + spec.spectral_density(u - h, lambda)?) / (h * h);
    let dl = (spec.spectral_density(u, lambda + h)? - 2.0 * f + spec.spectral_density(u, lambda - h)?) / (h * h);
    spectral_bandwidths_from_curvature(du / f, dl / f, t_len)
}

/// Equispaced nodes in `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![(lo + hi) / 2.0],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Nodes `2πj/L` mapped into `[-π, π)`, increasing.
pub fn symmetric_fourier_grid(l: usize) -> Vec<f64> {
    let mut g: Vec<f64> = periodic_nodes(l).into_iter().map(|v| if v >= PI { v - 2.0 * PI } else { v }).collect();
    g.sort_by(f64::total_cmp);
    g
}
