//! Kernel-weighted conditional likelihoods with local polynomial curves.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::FitResult;
use crate::error::{arg, Error, Result};
use crate::numeric::solve_spd;
use crate::optim::{minimize, OptimOptions};
use crate::taper::Kernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConditionalFamily {
    /// `X_t + Σ_j α_j X_{t-j} = σ ε_t`.
    TvAr { p: usize },
    /// `X_t = σ_t ε_t`, `σ_t² = a_0 + Σ_j a_j X²_{t-j}`.
    TvArch { p: usize },
}

impl ConditionalFamily {
    fn p(self) -> usize {
        match self {
            Self::TvAr { p } | Self::TvArch { p } => p,
        }
    }
}

/// Kernel weights `K((u0 - t/T)/b)` over `t = p+1..=T` with nonzero weight,
/// the rescaled offsets `t/T - u0`, and the normaliser (`bT`, or the
/// in-sample mass when the window is clipped).
struct Window {
    times: Vec<usize>,
    weights: Vec<f64>,
    offsets: Vec<f64>,
    norm: f64,
}

fn window(t_len: usize, u0: f64, b: f64, kernel: &Kernel, p: usize) -> Result<Window> {
    let tf = t_len as f64;
    let (mut times, mut weights, mut offsets) = (Vec::new(), Vec::new(), Vec::new());
    for t in p + 1..=t_len {
        let w = kernel.value((u0 - t as f64 / tf) / b);
        if w > 0.0 {
            times.push(t);
            weights.push(w);
            offsets.push(t as f64 / tf - u0);
        }
    }
    let mass: f64 = weights.iter().sum();
    let edge = u0 - b / 2.0 < 0.0 || u0 + b / 2.0 > 1.0;
    let norm = if edge { mass } else { b * tf };
    if !(norm > 0.0) {
        return Err(Error::Window(format!("no kernel mass inside the sample at u0 = {u0}")));
    }
    Ok(Window {
        times,
        weights,
        offsets,
        norm,
    })
}

/// Local polynomial (degree `d`) fit at `u0` of the kernel-weighted
/// conditional Gaussian likelihood.
///
/// Parameters are ordered by power of `(t/T - u0)`: the level coefficients
/// come first, then the first-derivative coefficients, and so on. For tvAR the
/// level block is `α_1..α_p, σ²` and each higher block holds `α` slopes only
/// (`σ²` is kept locally constant). For tvARCH every block is `a_0..a_p`.
pub fn local_conditional_fit(
    x: &[f64],
    u0: f64,
    b: f64,
    kernel: &Kernel,
    family: ConditionalFamily,
    d: usize,
) -> Result<FitResult> {
    let t_len = x.len();
    if !(0.0..=1.0).contains(&u0) {
        return arg(format!("u0 must lie in [0, 1], got {u0}"));
    }
    if !(b > 0.0 && b <= 1.0) {
        return arg(format!("bandwidth must lie in (0, 1], got {b}"));
    }
    if b * (t_len as f64) < 4.0 * (d + 1) as f64 {
        return Err(Error::Window(format!(
            "b T = {:.2} is below 4(d + 1) = {}",
            b * t_len as f64,
            4 * (d + 1)
        )));
    }
    let p = family.p();
    let win = window(t_len, u0, b, kernel, p)?;
    match family {
        ConditionalFamily::TvAr { p } => tvar_fit(x, &win, p, d),
        ConditionalFamily::TvArch { p } => tvarch_fit(x, &win, p, d),
    }
}

fn tvar_fit(x: &[f64], win: &Window, p: usize, d: usize) -> Result<FitResult> {
    if p == 0 {
        return arg("tvAR conditional fit needs p >= 1");
    }
    let q = p * (d + 1);
    let regressors = |i: usize| {
        let t = win.times[i];
        let mut z = Vec::with_capacity(q);
        for l in 0..=d {
            let s = win.offsets[i].powi(l as i32);
            z.extend((1..=p).map(|j| x[t - 1 - j] * s));
        }
        z
    };
    let mut a = DMatrix::<f64>::zeros(q, q);
    let mut rhs = DVector::<f64>::zeros(q);
    for (i, &w) in win.weights.iter().enumerate() {
        let z = DVector::from_vec(regressors(i));
        a.ger(w, &z, &z, 1.0);
        rhs.axpy(w * x[win.times[i] - 1], &z, 1.0);
    }
    let beta = solve_spd(&a, &rhs)?;
    let mass: f64 = win.weights.iter().sum();
    let rss: f64 = win
        .weights
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let z = regressors(i);
            let e = x[win.times[i] - 1] - z.iter().zip(beta.iter()).map(|(a, b)| a * b).sum::<f64>();
            w * e * e
        })
        .sum();
    let sigma2 = rss / mass;
    // Coefficients of the AR polynomial are the negated regression slopes.
    let mut eta: Vec<f64> = beta.iter().take(p).map(|v| -v).collect();
    eta.push(sigma2);
    eta.extend(beta.iter().skip(p).map(|v| -v));
    let mut names: Vec<String> = (1..=p).map(|j| format!("alpha{j}")).collect();
    names.push("sigma2".into());
    for l in 1..=d {
        names.extend((1..=p).map(|j| format!("alpha{j}_d{l}")));
    }
    let objective = (mass / win.norm) * 0.5 * ((2.0 * PI * sigma2).ln() + 1.0);
    Ok(FitResult {
        method: "local-conditional".into(),
        names,
        eta,
        objective,
        initial_objective: objective,
        iterations: 0,
        converged: true,
        sigma2: Some(sigma2),
        aic: None,
        covariance: None,
    })
}

fn tvarch_fit(x: &[f64], win: &Window, p: usize, d: usize) -> Result<FitResult> {
    let k = p + 1;
    let x2: Vec<f64> = x.iter().map(|v| v * v).collect();
    let mass: f64 = win.weights.iter().sum();
    let level = win.weights.iter().zip(&win.times).map(|(w, &t)| w * x2[t - 1]).sum::<f64>() / mass;
    let names: Vec<String> = (0..=d)
        .flat_map(|l| {
            (0..k).map(move |j| if l == 0 { format!("a{j}") } else { format!("a{j}_d{l}") })
        })
        .collect();
    let objective = |eta: &[f64]| {
        let mut acc = 0.0;
        for (i, (&w, &t)) in win.weights.iter().zip(&win.times).enumerate() {
            let mut s2 = 0.0;
            for l in 0..=d {
                let s = win.offsets[i].powi(l as i32);
                let c = &eta[l * k..(l + 1) * k];
                s2 += s * (c[0] + (1..=p).map(|j| c[j] * x2[t - 1 - j]).sum::<f64>());
            }
            if !(s2 > 0.0) {
                return f64::INFINITY;
            }
            acc += w * (s2.ln() + x2[t - 1] / s2);
        }
        0.5 * acc / win.norm
    };
    if p == 0 && d == 0 {
        // Closed form: the weighted mean of the squares.
        let v = objective(&[level]);
        return Ok(FitResult {
            method: "local-conditional".into(),
            names,
            eta: vec![level],
            objective: v,
            initial_objective: v,
            iterations: 0,
            converged: true,
            sigma2: None,
            aic: None,
            covariance: None,
        });
    }
    let mut start = vec![0.0; k * (d + 1)];
    start[0] = level * if p > 0 { 0.8 } else { 1.0 };
    for j in 1..=p {
        start[j] = 0.2 / p as f64;
    }
    if !objective(&start).is_finite() {
        return Err(Error::Domain("conditional variance is not positive at the start".into()));
    }
    let r = minimize(&objective, &start, &OptimOptions::default());
    Ok(FitResult {
        method: "local-conditional".into(),
        names,
        eta: r.x,
        objective: r.value,
        initial_objective: r.initial_value,
        iterations: r.iterations,
        converged: r.converged,
        sigma2: None,
        aic: None,
        covariance: None,
    })
}
