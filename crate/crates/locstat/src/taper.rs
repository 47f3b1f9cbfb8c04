//! Data tapers on `[0, 1]` and smoothing kernels on `[-1/2, 1/2]`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::numeric::gauss_legendre;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Taper {
    /// `h ≡ 1` on `(0, 1]`.
    Rectangular,
    /// `h(x) = sin²(πx)`.
    #[default]
    SineSquared,
    /// Piecewise linear through `(knots[i], values[i])`, mirrored to be symmetric.
    Sampled { knots: Vec<f64>, values: Vec<f64> },
}

impl Taper {
    pub fn sampled(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_sampled(&knots, &values, 0.0, 1.0)?;
        let t = Self::Sampled { knots, values };
        for i in 0..=20 {
            let x = i as f64 / 20.0;
            if (t.value(x) - t.value(1.0 - x)).abs() > 1e-12 {
                return arg("taper must satisfy h(x) = h(1 - x)");
            }
        }
        if t.squared_integral() == 0.0 {
            return arg("taper is identically zero");
        }
        Ok(t)
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "rectangular" | "rect" | "none" => Ok(Self::Rectangular),
            "sine-squared" | "sine2" | "hanning" | "hann" => Ok(Self::SineSquared),
            _ => arg(format!("unknown taper '{name}' (rectangular, sine-squared)")),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Rectangular => "rectangular",
            Self::SineSquared => "sine-squared",
            Self::Sampled { .. } => "sampled",
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::Rectangular => {
                if x > 0.0 && x <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Self::SineSquared => {
                if (0.0..=1.0).contains(&x) {
                    (PI * x).sin().powi(2)
                } else {
                    0.0
                }
            }
            Self::Sampled { knots, values } => piecewise_linear(knots, values, x),
        }
    }

    /// `∫₀¹ h(x)² dx`.
    pub fn squared_integral(&self) -> f64 {
        match self {
            Self::Rectangular => 1.0,
            Self::SineSquared => 0.375,
            Self::Sampled { knots, .. } => integrate(|x| self.value(x).powi(2), knots, 0.0, 1.0),
        }
    }

    /// Time kernel `K(x) = h(x + 1/2)² / ∫h²` induced by the taper.
    pub fn induced_kernel(&self) -> Kernel {
        Kernel::InducedFromTaper(self.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Kernel {
    /// `K ≡ 1` on `[-1/2, 1/2]`.
    Rectangular,
    /// `K(x) = 6(1/4 - x²)`, the MSE-optimal kernel.
    #[default]
    CanonicalQuadratic,
    InducedFromTaper(Taper),
    /// Piecewise linear on `[-1/2, 1/2]`, rescaled to unit mass.
    Sampled { knots: Vec<f64>, values: Vec<f64> },
}

impl Kernel {
    /// Builds a sampled kernel; values are rescaled so that `∫K = 1`.
    pub fn sampled(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_sampled(&knots, &values, -0.5, 0.5)?;
        let raw = Self::Sampled {
            knots: knots.clone(),
            values: values.clone(),
        };
        for i in 0..=20 {
            let x = i as f64 / 40.0;
            if (raw.value(x) - raw.value(-x)).abs() > 1e-12 {
                return arg("kernel must be symmetric");
            }
        }
        let mass = raw.integrate(|_| 1.0);
        if !(mass > 0.0) {
            return arg("kernel has zero mass");
        }
        Ok(Self::Sampled {
            knots,
            values: values.iter().map(|v| v / mass).collect(),
        })
    }

    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "rectangular" | "rect" | "uniform" => Ok(Self::Rectangular),
            "quadratic" | "epanechnikov" | "canonical" | "optimal" => Ok(Self::CanonicalQuadratic),
            "sine-squared" | "hann" => Ok(Self::InducedFromTaper(Taper::SineSquared)),
            _ => arg(format!("unknown kernel '{name}' (rectangular, quadratic, hann)")),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Rectangular => "rectangular",
            Self::CanonicalQuadratic => "quadratic",
            Self::InducedFromTaper(Taper::SineSquared) => "hann",
            Self::InducedFromTaper(_) => "induced",
            Self::Sampled { .. } => "sampled",
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        if !(-0.5..=0.5).contains(&x) {
            return 0.0;
        }
        match self {
            Self::Rectangular => 1.0,
            Self::CanonicalQuadratic => 6.0 * (0.25 - x * x),
            Self::InducedFromTaper(h) => h.value(x + 0.5).powi(2) / h.squared_integral(),
            Self::Sampled { knots, values } => piecewise_linear(knots, values, x),
        }
    }

    /// `∫ g(x) K(x) dx` over the support, exact for piecewise polynomials of
    /// moderate degree.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        let breaks: &[f64] = match self {
            Self::Sampled { knots, .. } => knots,
            Self::InducedFromTaper(Taper::Sampled { knots, .. }) => knots,
            _ => &[],
        };
        let shifted: Vec<f64> = match self {
            Self::InducedFromTaper(_) => breaks.iter().map(|k| k - 0.5).collect(),
            _ => breaks.to_vec(),
        };
        integrate(|x| g(x) * self.value(x), &shifted, -0.5, 0.5)
    }

    /// `d_K = ∫ x² K(x) dx`.
    pub fn second_moment(&self) -> f64 {
        self.integrate(|x| x * x)
    }

    /// `v_K = ∫ K(x)² dx`.
    pub fn squared_norm(&self) -> f64 {
        self.integrate(|x| self.value(x))
    }

    /// `C(K) = v_K / d_K²`, the bandwidth constant.
    pub fn bandwidth_constant(&self) -> f64 {
        self.squared_norm() / self.second_moment().powi(2)
    }

    /// `c(K) = v_K d_K^{1/2}`, the MSE constant.
    pub fn mse_constant(&self) -> f64 {
        self.squared_norm() * self.second_moment().sqrt()
    }
}

fn check_sampled(knots: &[f64], values: &[f64], lo: f64, hi: f64) -> Result<()> {
    if knots.len() != values.len() || knots.len() < 2 {
        return arg("sampled weight needs at least two knots and one value per knot");
    }
    if knots.windows(2).any(|w| w[1] <= w[0]) {
        return arg("knots must be strictly increasing");
    }
    if knots[0] < lo || knots[knots.len() - 1] > hi {
        return arg(format!("knots must lie in [{lo}, {hi}]"));
    }
    if values.iter().any(|v| !(*v >= 0.0)) {
        return arg("weights must be nonnegative");
    }
    Ok(())
}

/// Linear interpolation, zero outside the knot range.
fn piecewise_linear(knots: &[f64], values: &[f64], x: f64) -> f64 {
    let last = knots.len() - 1;
    if x < knots[0] || x > knots[last] {
        return 0.0;
    }
    if x == knots[last] {
        return values[last];
    }
    let i = knots.partition_point(|&k| k <= x) - 1;
    let w = (x - knots[i]) / (knots[i + 1] - knots[i]);
    values[i] * (1.0 - w) + values[i + 1] * w
}

/// Composite Gauss-Legendre over `[lo, hi]`, split at `breaks` and into at
/// least 16 panels.
fn integrate(f: impl Fn(f64) -> f64, breaks: &[f64], lo: f64, hi: f64) -> f64 {
    let mut cuts: Vec<f64> = (0..=16).map(|i| lo + (hi - lo) * i as f64 / 16.0).collect();
    cuts.extend(breaks.iter().copied().filter(|b| *b > lo && *b < hi));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let (x, w) = gauss_legendre(16, -1.0, 1.0);
    cuts.windows(2)
        .map(|c| {
            let (mid, half) = ((c[0] + c[1]) / 2.0, (c[1] - c[0]) / 2.0);
            x.iter().zip(&w).map(|(xi, wi)| wi * half * f(mid + half * xi)).sum::<f64>()
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_kernel_constants() {
        let k = Kernel::CanonicalQuadratic;
        assert!((k.integrate(|_| 1.0) - 1.0).abs() < 1e-14);
        assert!((k.second_moment() - 0.05).abs() < 1e-14);
        assert!((k.squared_norm() - 1.2).abs() < 1e-14);
        assert!((k.bandwidth_constant() - 480.0).abs() < 1e-9);
    }

    #[test]
    fn rectangular_constants() {
        let k = Kernel::Rectangular;
        assert!((k.second_moment() - 1.0 / 12.0).abs() < 1e-14);
        assert!((k.squared_norm() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn induced_kernel_is_cos4() {
        let k = Taper::SineSquared.induced_kernel();
        for &x in &[-0.4, -0.1, 0.0, 0.2, 0.45] {
            let want = 8.0 / 3.0 * (PI * x).cos().powi(4);
            assert!((k.value(x) - want).abs() < 1e-13);
        }
        assert!((k.integrate(|_| 1.0) - 1.0).abs() < 1e-12);
        // ∫ (8/3)² cos⁸(πx) dx = (64/9)(35/128).
        assert!((k.squared_norm() - 64.0 / 9.0 * 35.0 / 128.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_kernel_is_normalised() {
        let k = Kernel::sampled(vec![-0.5, 0.0, 0.5], vec![0.0, 3.0, 0.0]).unwrap();
        assert!((k.integrate(|_| 1.0) - 1.0).abs() < 1e-13);
        assert!((k.value(0.0) - 2.0).abs() < 1e-13);
        // Triangle on [-1/2, 1/2]: d_K = 1/24.
        assert!((k.second_moment() - 1.0 / 24.0).abs() < 1e-13);
        assert!(Kernel::sampled(vec![-0.5, 0.0, 0.5], vec![0.0, 3.0, 1.0]).is_err());
    }

    #[test]
    fn taper_symmetry_and_norms() {
        let h = Taper::SineSquared;
        assert!((h.value(0.2) - h.value(0.8)).abs() < 1e-15);
        let t = Taper::sampled(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert!((t.squared_integral() - 1.0 / 3.0).abs() < 1e-13);
        assert!(Taper::sampled(vec![0.0, 1.0], vec![0.0, 1.0]).is_err());
        assert!(Taper::sampled(vec![0.0, 1.0], vec![0.0, 0.0]).is_err());
    }
}
