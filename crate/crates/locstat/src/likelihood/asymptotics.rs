//! Large-sample limits: the Kullback-Leibler objective of the Whittle-type
//! likelihoods and the covariance of their minimisers.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::whittle::optimize;
use super::{CurveModel, FitResult};
use crate::error::{Error, Result};
use crate::model::TvModelSpec;
use crate::numeric::{gauss_legendre, periodic_nodes};

/// Tensor grid: Gauss-Legendre in `u`, periodic nodes in `λ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Quadrature {
    pub n_u: usize,
    pub n_lambda: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { n_u: 64, n_lambda: 256 }
    }
}

impl Quadrature {
    /// `(u, λ, weight)` with weights summing to `2π` (the measure `dλ du`).
    fn points(&self) -> Vec<(f64, f64, f64)> {
        let (us, wu) = gauss_legendre(self.n_u, 0.0, 1.0);
        let lam = periodic_nodes(self.n_lambda);
        let wl = 2.0 * PI / self.n_lambda as f64;
        us.iter()
            .zip(&wu)
            .flat_map(|(&u, &w)| lam.iter().map(move |&l| (u, l, w * wl)))
            .collect()
    }

    fn u_points(&self) -> Vec<(f64, f64)> {
        let (us, wu) = gauss_legendre(self.n_u, 0.0, 1.0);
        us.into_iter().zip(wu).collect()
    }
}

const GRAD_STEP: f64 = 1e-5;
const HESS_STEP: f64 = 1e-4;

/// `L(η) = (1/4π) ∫∫ {log 4π² f_η + f/f_η} dλ du + (1/4π) ∫ (μ_η - μ)²/f_η(u, 0) du`
/// with the truth tabulated once on the grid.
#[derive(Debug)]
pub struct KlObjective<'a> {
    model: &'a dyn CurveModel,
    points: Vec<(f64, f64, f64)>,
    truth_f: Vec<f64>,
    u_points: Vec<(f64, f64)>,
    truth_mu: Vec<f64>,
}

impl<'a> KlObjective<'a> {
    pub fn new(model: &'a dyn CurveModel, truth: &TvModelSpec, quad: Quadrature) -> Result<Self> {
        let points = quad.points();
        let truth_f = points
            .iter()
            .map(|&(u, l, _)| truth.spectral_density(u, l))
            .collect::<Result<Vec<_>>>()?;
        if truth_f.iter().any(|f| !(*f > 0.0)) {
            return Err(Error::Domain("true spectral density is not positive".into()));
        }
        let u_points = quad.u_points();
        let truth_mu = u_points.iter().map(|&(u, _)| truth.mu.value(u)).collect();
        Ok(Self {
            model,
            points,
            truth_f,
            u_points,
            truth_mu,
        })
    }

    pub fn value(&self, eta: &[f64]) -> Result<f64> {
        let mut acc = 0.0;
        for (&(u, l, w), f) in self.points.iter().zip(&self.truth_f) {
            let fm = self.model.spectral_density(eta, u, l);
            if !(fm > 0.0 && fm.is_finite()) {
                return Err(Error::Domain(format!("model spectral density is not positive at u = {u:.3}")));
            }
            acc += w * ((4.0 * PI * PI * fm).ln() + f / fm);
        }
        let mut mean = 0.0;
        if self.model.has_mean() || self.truth_mu.iter().any(|m| *m != 0.0) {
            for (&(u, w), mu) in self.u_points.iter().zip(&self.truth_mu) {
                let d = self.model.mean(eta, u) - mu;
                mean += w * d * d / self.model.spectral_density(eta, u, 0.0);
            }
        }
        Ok((acc + mean) / (4.0 * PI))
    }
}

/// The limit of the Whittle-type likelihoods under `truth`.
pub fn kl_divergence_limit(model: &dyn CurveModel, eta: &[f64], truth: &TvModelSpec) -> Result<f64> {
    KlObjective::new(model, truth, Quadrature::default())?.value(eta)
}

/// Numerical minimiser of [`kl_divergence_limit`] over `η`.
pub fn kl_minimizer(model: &dyn CurveModel, truth: &TvModelSpec, start: &[f64]) -> Result<FitResult> {
    let obj = KlObjective::new(model, truth, Quadrature::default())?;
    let f = |eta: &[f64]| obj.value(eta).unwrap_or(f64::INFINITY);
    let mut fit = optimize("kl-limit", model, &f, start.to_vec(), 1)?;
    fit.aic = None;
    Ok(fit)
}

/// Central-difference gradient of `g` at `eta`.
fn grad(g: &dyn Fn(&[f64]) -> f64, eta: &[f64]) -> Vec<f64> {
    let mut e = eta.to_vec();
    (0..eta.len())
        .map(|i| {
            let h = GRAD_STEP * (1.0 + eta[i].abs());
            e[i] = eta[i] + h;
            let up = g(&e);
            e[i] = eta[i] - h;
            let down = g(&e);
            e[i] = eta[i];
            (up - down) / (2.0 * h)
        })
        .collect()
}

fn hess(g: &dyn Fn(&[f64]) -> f64, eta: &[f64]) -> DMatrix<f64> {
    crate::optim::hessian(g, eta, HESS_STEP)
}

/// `(1/4π) ∫∫ ∇log f_η ∇log f_η' dλ du + (1/2π) ∫ ∇μ_η ∇μ_η' / f_η(u, 0) du`.
pub fn fisher_information(model: &dyn CurveModel, eta: &[f64]) -> Result<DMatrix<f64>> {
    let q = eta.len();
    let quad = Quadrature::default();
    let mut out = DMatrix::zeros(q, q);
    for (u, l, w) in quad.points() {
        let g = grad(&|e: &[f64]| model.spectral_density(e, u, l).ln(), eta);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("model spectral density is not positive".into()));
        }
        add_outer(&mut out, &g, &g, w / (4.0 * PI));
    }
    if model.has_mean() {
        for (u, w) in quad.u_points() {
            let g = grad(&|e: &[f64]| model.mean(e, u), eta);
            add_outer(&mut out, &g, &g, w / (2.0 * PI * model.spectral_density(eta, u, 0.0)));
        }
    }
    Ok(out)
}

fn add_outer(m: &mut DMatrix<f64>, a: &[f64], b: &[f64], w: f64) {
    for i in 0..a.len() {
        for j in 0..b.len() {
            m[(i, j)] += w * a[i] * b[j];
        }
    }
}

/// Curvature `Γ`, score variance `V` and the sandwich `Γ⁻¹ V Γ⁻¹` of the
/// Whittle-type estimators at `η₀` under `truth`.
#[derive(Debug, Clone)]
pub struct AsymptoticCovariance {
    pub gamma: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub sandwich: DMatrix<f64>,
}

/// `Γ = (1/4π) ∫∫ (f - f_η) ∇²f_η⁻¹ + (1/4π) ∫∫ ∇log f_η ∇log f_η'` and
/// `V = (1/4π) ∫∫ f² ∇f_η⁻¹ ∇f_η⁻¹'`; a mean curve adds its Fisher term to both.
pub fn asymptotic_covariance(model: &dyn CurveModel, eta0: &[f64], truth: &TvModelSpec) -> Result<AsymptoticCovariance> {
    let q = eta0.len();
    let quad = Quadrature::default();
    let mut gamma = DMatrix::zeros(q, q);
    let mut v = DMatrix::zeros(q, q);
    for (u, l, w) in quad.points() {
        let f = truth.spectral_density(u, l)?;
        let fm = model.spectral_density(eta0, u, l);
        if !(fm > 0.0 && f > 0.0) {
            return Err(Error::Domain("spectral density is not positive".into()));
        }
        let inv = |e: &[f64]| 1.0 / model.spectral_density(e, u, l);
        let g_inv = grad(&inv, eta0);
        // ∇log f_η = -f_η ∇f_η⁻¹.
        let g_log: Vec<f64> = g_inv.iter().map(|d| -fm * d).collect();
        add_outer(&mut gamma, &g_log, &g_log, w / (4.0 * PI));
        add_outer(&mut v, &g_inv, &g_inv, w * f * f / (4.0 * PI));
        if (f - fm).abs() > 1e-12 * f {
            gamma += hess(&inv, eta0) * (w * (f - fm) / (4.0 * PI));
        }
    }
    if model.has_mean() {
        for (u, w) in quad.u_points() {
            let g = grad(&|e: &[f64]| model.mean(e, u), eta0);
            let s = w / (2.0 * PI * model.spectral_density(eta0, u, 0.0));
            add_outer(&mut gamma, &g, &g, s);
            add_outer(&mut v, &g, &g, s);
        }
    }
    let gamma_inv = gamma.clone().try_inverse().ok_or(Error::Rank { cond: f64::INFINITY })?;
    let sandwich = &gamma_inv * &v * &gamma_inv;
    Ok(AsymptoticCovariance { gamma, v, sandwich })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::ParameterCurve;
    use crate::likelihood::PolyTvAr;

    #[test]
    fn ar1_information() {
        let phi = 0.6;
        let model = PolyTvAr::stationary(1).with_fixed_sigma2(1.0);
        let g = fisher_information(&model, &[-phi]).unwrap();
        assert!((g[(0, 0)] - 1.0 / (1.0 - phi * phi)).abs() < 1e-8, "{}", g[(0, 0)]);
        let truth = TvModelSpec::ar1(-phi, 1.0);
        let ac = asymptotic_covariance(&model, &[-phi], &truth).unwrap();
        assert!((ac.gamma[(0, 0)] - 1.0 / (1.0 - phi * phi)).abs() < 1e-6);
        assert!((ac.v[(0, 0)] - ac.gamma[(0, 0)]).abs() < 1e-6);
    }

    #[test]
    fn correctly_specified_v_equals_gamma() {
        let model = PolyTvAr::new(vec![1]).with_sigma_order(1).with_mean_order(0);
        let eta = [-0.5, 0.6, 1.0, 0.4, 0.3];
        let truth = model.to_spec(&eta).unwrap();
        let ac = asymptotic_covariance(&model, &eta, &truth).unwrap();
        assert!((&ac.v - &ac.gamma).amax() < 1e-6, "{} vs {}", ac.v, ac.gamma);
        let fi = fisher_information(&model, &eta).unwrap();
        assert!((&fi - &ac.gamma).amax() < 1e-6);
    }

    #[test]
    fn kl_minimum_at_truth() {
        let model = PolyTvAr::new(vec![1]);
        let eta = [-0.7, 0.9, 1.3];
        let truth = model.to_spec(&eta).unwrap();
        let obj = KlObjective::new(&model, &truth, Quadrature::default()).unwrap();
        let at = obj.value(&eta).unwrap();
        for d in [[0.05, 0.0, 0.0], [0.0, -0.05, 0.0], [0.0, 0.0, 0.1], [0.03, 0.03, -0.1]] {
            let e: Vec<f64> = eta.iter().zip(d).map(|(a, b)| a + b).collect();
            assert!(obj.value(&e).unwrap() > at);
        }
        let fit = kl_minimizer(&model, &truth, &[0.0, 0.0, 1.0]).unwrap();
        for (a, b) in fit.eta.iter().zip(eta) {
            assert!((a - b).abs() < 1e-4, "{:?}", fit.eta);
        }
    }

    #[test]
    fn stationary_mean_fits_average_level() {
        let truth = TvModelSpec::ar1(-0.4, 1.0).with_mean(ParameterCurve::polynomial(vec![1.0, 2.0, -3.0]));
        let model = PolyTvAr::stationary(1).with_mean_order(0);
        let fit = kl_minimizer(&model, &truth, &[0.0, 1.0, 0.0]).unwrap();
        // ∫₀¹ (1 + 2u - 3u²) du = 1.
        assert!((fit.eta[2] - 1.0).abs() < 1e-5, "{:?}", fit.eta);
    }
}
