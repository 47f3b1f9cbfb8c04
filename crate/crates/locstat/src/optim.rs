//! Quasi-Newton minimisation with finite-difference derivatives.
//!
//! Objectives signal an inadmissible point by returning `+∞` (or NaN); the
//! line search then backtracks.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

#[derive(Debug, Clone, Copy)]
pub struct OptimOptions {
    pub max_iter: usize,
    /// Stop when `‖∇f‖∞ < grad_tol`.
    pub grad_tol: f64,
    /// Stop when the accepted step is below `step_tol` (max norm) and the
    /// gradient is within `stall_grad_tol`.
    pub step_tol: f64,
    pub stall_grad_tol: f64,
    /// Newton refinement with a finite-difference Hessian after BFGS stops.
    pub polish: bool,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-7,
            step_tol: 1e-9,
            stall_grad_tol: 1e-5,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OptimResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub initial_value: f64,
    pub iterations: usize,
    pub converged: bool,
    pub grad_norm: f64,
}

fn finite(v: f64) -> f64 {
    if v.is_nan() {
        f64::INFINITY
    } else {
        v
    }
}

fn step_size(x: f64) -> f64 {
    1e-6 * (1.0 + x.abs())
}

/// Central differences with step `1e-6 (1 + |x_i|)`; falls back to a one-sided
/// difference next to the barrier.
pub fn gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64], fx: f64) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut y = x.to_vec();
    for i in 0..x.len() {
        let h = step_size(x[i]);
        y[i] = x[i] + h;
        let fp = finite(f(&y));
        y[i] = x[i] - h;
        let fm = finite(f(&y));
        y[i] = x[i];
        g[i] = match (fp.is_finite(), fm.is_finite()) {
            (true, true) => (fp - fm) / (2.0 * h),
            (true, false) => (fp - fx) / h,
            (false, true) => (fx - fm) / h,
            (false, false) => 0.0,
        };
    }
    g
}

/// Symmetric finite-difference Hessian with step `h_i = scale (1 + |x_i|)`.
pub fn hessian(f: &dyn Fn(&[f64]) -> f64, x: &[f64], scale: f64) -> DMatrix<f64> {
    let n = x.len();
    let h: Vec<f64> = x.iter().map(|v| scale * (1.0 + v.abs())).collect();
    let mut y = x.to_vec();
    let f0 = f(x);
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        y[i] = x[i] + h[i];
        let fp = f(&y);
        y[i] = x[i] - h[i];
        let fm = f(&y);
        y[i] = x[i];
        out[(i, i)] = (fp - 2.0 * f0 + fm) / (h[i] * h[i]);
        for j in 0..i {
            let mut eval = |si: f64, sj: f64| {
                y[i] = x[i] + si * h[i];
                y[j] = x[j] + sj * h[j];
                let v = f(&y);
                y[i] = x[i];
                y[j] = x[j];
                v
            };
            let v = (eval(1.0, 1.0) - eval(1.0, -1.0) - eval(-1.0, 1.0) + eval(-1.0, -1.0)) / (4.0 * h[i] * h[j]);
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

fn max_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// BFGS from `x0` with backtracking Armijo steps, optionally followed by a few
/// Newton steps on a finite-difference Hessian.
pub fn minimize(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], opts: &OptimOptions) -> OptimResult {
    let n = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut fx = finite(f(x.as_slice()));
    let initial_value = fx;
    if n == 0 || !fx.is_finite() {
        return OptimResult {
            x: x0.to_vec(),
            value: fx,
            initial_value,
            iterations: 0,
            converged: n == 0 && fx.is_finite(),
            grad_norm: 0.0,
        };
    }
    let mut g = gradient(f, x.as_slice(), fx);
    let mut h_inv = DMatrix::<f64>::identity(n, n);
    let mut iterations = 0;
    let mut converged = false;
    let mut fresh = true;
    while iterations < opts.max_iter {
        if max_norm(&g) < opts.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let mut dir = -(&h_inv * &g);
        let mut slope = g.dot(&dir);
        if !(slope < 0.0) {
            h_inv = DMatrix::identity(n, n);
            dir = -g.clone();
            slope = -g.norm_squared();
        }
        if fresh {
            // Keep the first trial step modest relative to the current point.
            let scale = x.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let len = max_norm(&dir);
            if len > scale {
                dir *= scale / len;
                slope *= scale / len;
            }
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial = &x + t * &dir;
            let ft = finite(f(trial.as_slice()));
            if ft.is_finite() && ft <= fx + 1e-4 * t * slope {
                accepted = Some((trial, ft));
                break;
            }
            t *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if fresh {
                converged = max_norm(&g) < opts.stall_grad_tol;
                break;
            }
            h_inv = DMatrix::identity(n, n);
            fresh = true;
            continue;
        };
        let s = &x_new - &x;
        let g_new = gradient(f, x_new.as_slice(), f_new);
        let y = &g_new - &g;
        let sy = s.dot(&y);
        if sy > 1e-14 * s.norm() * y.norm() {
            if fresh {
                // Shanno-Phua scaling of the initial inverse Hessian.
                h_inv = DMatrix::identity(n, n) * (sy / y.norm_squared());
            }
            let rho = 1.0 / sy;
            let hy = &h_inv * &y;
            let yhy = y.dot(&hy);
            h_inv += (rho * rho * yhy + rho) * &s * s.transpose() - rho * (&hy * s.transpose() + &s * hy.transpose());
            fresh = false;
        }
        let small_step = max_norm(&s) < opts.step_tol;
        x = x_new;
        fx = f_new;
        g = g_new;
        if small_step && max_norm(&g) < opts.stall_grad_tol {
            converged = true;
            break;
        }
    }
    if opts.polish {
        for _ in 0..3 {
            let hess = hessian(f, x.as_slice(), 1e-4);
            let Some(step) = hess.clone().cholesky().map(|c| c.solve(&g)) else {
                break;
            };
            let trial = &x - step;
            let ft = finite(f(trial.as_slice()));
            // Near the optimum value changes drown in rounding; judge by the gradient.
            if !(ft.is_finite() && ft <= fx + 1e-12 * (1.0 + fx.abs())) {
                break;
            }
            let g_trial = gradient(f, trial.as_slice(), ft);
            if max_norm(&g_trial) >= max_norm(&g) && ft >= fx {
                break;
            }
            x = trial;
            fx = ft;
            g = g_trial;
            if max_norm(&g) < opts.grad_tol {
                converged = true;
            }
        }
    }
    OptimResult {
        x: x.as_slice().to_vec(),
        value: fx,
        initial_value,
        iterations,
        converged,
        grad_norm: max_norm(&g),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = minimize(&f, &[-1.2, 1.0], &OptimOptions::default());
        assert!(r.converged, "{r:?}");
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{r:?}");
        assert!(r.value <= r.initial_value);
    }

    #[test]
    fn respects_barrier() {
        // Minimum of x - log x at 1; undefined for x <= 0.
        let f = |x: &[f64]| if x[0] > 0.0 { x[0] - x[0].ln() } else { f64::INFINITY };
        let r = minimize(&f, &[20.0], &OptimOptions::default());
        assert!((r.x[0] - 1.0).abs() < 1e-7, "{r:?}");
    }

    #[test]
    fn quadratic_is_exact() {
        let f = |x: &[f64]| 3.0 * (x[0] - 0.3).powi(2) + (x[0] - 0.3) * (x[1] + 2.0) + 2.0 * (x[1] + 2.0).powi(2);
        let r = minimize(&f, &[5.0, 5.0], &OptimOptions::default());
        assert!((r.x[0] - 0.3).abs() < 1e-9 && (r.x[1] + 2.0).abs() < 1e-9, "{r:?}");
    }
}
