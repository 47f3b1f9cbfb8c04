//! Parameter curves on rescaled time `u ∈ [0, 1]`.
//!
//! Every curve is extended outside the unit interval by holding its endpoint
//! value, so `value(-0.3) == value(0.0)` and derivatives vanish there.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParameterCurve {
    Constant {
        value: f64,
    },
    /// `Σ coeffs[k] u^k`.
    Polynomial {
        coeffs: Vec<f64>,
    },
    /// `offset + amplitude * cos(phase + slope*u + inner_amplitude * cos(freq*u + inner_phase))`.
    Trig {
        offset: f64,
        amplitude: f64,
        phase: f64,
        #[serde(default)]
        slope: f64,
        #[serde(default)]
        inner_amplitude: f64,
        #[serde(default)]
        freq: f64,
        #[serde(default)]
        inner_phase: f64,
    },
    /// `start + G(u) (end - start)` with `G(u) = 1 / (1 + exp(-gamma (u - location)))`.
    Logistic {
        start: f64,
        end: f64,
        gamma: f64,
        location: f64,
    },
    /// Piecewise linear through `(knots[i], values[i])`; knots strictly increasing.
    Sampled {
        knots: Vec<f64>,
        values: Vec<f64>,
    },
}

impl ParameterCurve {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn polynomial(coeffs: Vec<f64>) -> Self {
        Self::Polynomial { coeffs }
    }

    /// `offset + amplitude * cos(freq*u + phase)`.
    pub fn cosine(offset: f64, amplitude: f64, freq: f64, phase: f64) -> Self {
        Self::Trig {
            offset,
            amplitude,
            phase,
            slope: freq,
            inner_amplitude: 0.0,
            freq: 0.0,
            inner_phase: 0.0,
        }
    }

    /// `amplitude * cos(phase + inner_amplitude * cos(freq*u))`.
    pub fn nested_cosine(amplitude: f64, phase: f64, inner_amplitude: f64, freq: f64) -> Self {
        Self::Trig {
            offset: 0.0,
            amplitude,
            phase,
            slope: 0.0,
            inner_amplitude,
            freq,
            inner_phase: 0.0,
        }
    }

    pub fn sampled(knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() || knots.is_empty() {
            return arg("sampled curve needs equally many (non-zero) knots and values");
        }
        if knots.windows(2).any(|w| w[1] <= w[0]) {
            return arg("sampled curve knots must be strictly increasing");
        }
        Ok(Self::Sampled { knots, values })
    }

    /// Highest derivative order with an analytic evaluator.
    pub fn derivative_order(&self) -> usize {
        match self {
            Self::Sampled { .. } => 0,
            _ => 2,
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Self::Constant { .. } => true,
            Self::Polynomial { coeffs } => coeffs.iter().skip(1).all(|&c| c == 0.0),
            Self::Trig {
                amplitude,
                slope,
                inner_amplitude,
                freq,
                ..
            } => *amplitude == 0.0 || (*slope == 0.0 && (*inner_amplitude == 0.0 || *freq == 0.0)),
            Self::Logistic { start, end, .. } => start == end,
            Self::Sampled { values, .. } => values.iter().all(|&v| v == values[0]),
        }
    }

    pub fn value(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        match self {
            Self::Constant { value } => *value,
            Self::Polynomial { coeffs } => coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c),
            Self::Trig {
                offset,
                amplitude,
                phase,
                slope,
                inner_amplitude,
                freq,
                inner_phase,
            } => {
                let arg = phase + slope * u + inner_amplitude * (freq * u + inner_phase).cos();
                offset + amplitude * arg.cos()
            }
            Self::Logistic {
                start,
                end,
                gamma,
                location,
            } => start + logistic(u, *gamma, *location) * (end - start),
            Self::Sampled { knots, values } => interpolate(knots, values, u),
        }
    }

    /// Analytic derivative of order `order`; `None` if not available.
    /// Outside `(0, 1)` the derivative of the constant extension is returned.
    pub fn derivative(&self, u: f64, order: usize) -> Option<f64> {
        if order == 0 {
            return Some(self.value(u));
        }
        if order > self.derivative_order() {
            return None;
        }
        if !(0.0..=1.0).contains(&u) {
            return Some(0.0);
        }
        let d = match self {
            Self::Constant { .. } => 0.0,
            Self::Polynomial { coeffs } => coeffs
                    .iter()
                    .enumerate()
                    .skip(order)
                    .map(|(k, &c)| {
                        let falling: f64 = (0..order).map(|i| (k - i) as f64).product();
                        c * falling * u.powi((k - order) as i32)
                    })
                    .sum(),
            Self::Trig {
                amplitude,
                phase,
                slope,
                inner_amplitude,
                freq,
                inner_phase,
                ..
            } => {
                let inner = freq * u + inner_phase;
                let arg = phase + slope * u + inner_amplitude * inner.cos();
                let d1 = slope - inner_amplitude * freq * inner.sin();
                if order == 1 {
                    -amplitude * arg.sin() * d1
                } else {
                    let d2 = -inner_amplitude * freq * freq * inner.cos();
                    -amplitude * (arg.cos() * d1 * d1 + arg.sin() * d2)
                }
            }
            Self::Logistic {
                start,
                end,
                gamma,
                location,
            } => {
                let g = logistic(u, *gamma, *location);
                let g1 = gamma * g * (1.0 - g);
                let dg = if order == 1 { g1 } else { gamma * g1 * (1.0 - 2.0 * g) };
                dg * (end - start)
            }
            Self::Sampled { .. } => unreachable!(),
        };
        Some(d)
    }
}

fn logistic(u: f64, gamma: f64, location: f64) -> f64 {
    1.0 / (1.0 + (-gamma * (u - location)).exp())
}

fn interpolate(knots: &[f64], values: &[f64], u: f64) -> f64 {
    if u <= knots[0] {
        return values[0];
    }
    let last = knots.len() - 1;
    if u >= knots[last] {
        return values[last];
    }
    let i = knots.partition_point(|&k| k <= u) - 1;
    let w = (u - knots[i]) / (knots[i + 1] - knots[i]);
    values[i] * (1.0 - w) + values[i + 1] * w
}

/// Smooth transition from `start` at `u = 0` to `end` at `u = 1`, centred at `location`.
pub fn logistic_transition_curve(start: f64, end: f64, gamma: f64, location: f64) -> Result<ParameterCurve> {
    if !(gamma > 0.0) {
        return arg(format!("transition slope must be positive, got {gamma}"));
    }
    if !(0.0..=1.0).contains(&location) {
        return arg(format!("transition location must lie in [0, 1], got {location}"));
    }
    if start == end {
        return Ok(ParameterCurve::constant(start));
    }
    Ok(ParameterCurve::Logistic {
        start,
        end,
        gamma,
        location,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn finite_difference(c: &ParameterCurve, u: f64, order: usize) -> f64 {
        let h = 1e-4;
        match order {
            1 => (c.value(u + h) - c.value(u - h)) / (2.0 * h),
            _ => (c.value(u + h) - 2.0 * c.value(u) + c.value(u - h)) / (h * h),
        }
    }

    fn sample_curves() -> Vec<ParameterCurve> {
        vec![
            ParameterCurve::polynomial(vec![0.3, -0.2, 0.5, 0.1]),
            ParameterCurve::nested_cosine(-1.8, 1.5, -1.0, 4.0 * std::f64::consts::PI),
            ParameterCurve::cosine(-0.5, -0.2, 2.0 * std::f64::consts::PI, 0.0),
            logistic_transition_curve(-0.4, 0.6, 12.0, 0.4).unwrap(),
        ]
    }

    #[test]
    fn analytic_derivatives_match_differences() {
        for c in sample_curves() {
            for &u in &[0.13, 0.5, 0.77] {
                for order in 1..=2 {
                    let a = c.derivative(u, order).unwrap();
                    let fd = finite_difference(&c, u, order);
                    assert!((a - fd).abs() < 1e-4 * (1.0 + a.abs()), "{c:?} u={u} order={order}: {a} vs {fd}");
                }
            }
        }
    }

    #[test]
    fn extension_is_constant_outside() {
        for c in sample_curves() {
            assert_eq!(c.value(-0.5), c.value(0.0));
            assert_eq!(c.value(1.7), c.value(1.0));
            assert_eq!(c.derivative(-0.1, 1), Some(0.0));
        }
    }

    #[test]
    fn logistic_midpoint_and_ends() {
        let c = logistic_transition_curve(1.0, 3.0, 5.0, 0.3).unwrap();
        assert!((c.value(0.3) - 2.0).abs() < 1e-15);
        let steep = logistic_transition_curve(-0.7, 0.2, 100.0, 0.5).unwrap();
        assert!((steep.value(0.0) + 0.7).abs() < 1e-10);
        assert!((steep.value(1.0) - 0.2).abs() < 1e-10);
        assert!(logistic_transition_curve(0.0, 1.0, 0.0, 0.5).is_err());
        assert!(logistic_transition_curve(0.0, 1.0, 1.0, 1.5).is_err());
        let flat = logistic_transition_curve(0.4, 0.4, 3.0, 0.5).unwrap();
        assert!(flat.is_constant());
    }

    #[test]
    fn sampled_interpolates() {
        let c = ParameterCurve::sampled(vec![0.0, 0.5, 1.0], vec![0.0, 1.0, 0.0]).unwrap();
        assert!((c.value(0.25) - 0.5).abs() < 1e-15);
        assert_eq!(c.derivative(0.25, 1), None);
        assert!(ParameterCurve::sampled(vec![0.0, 0.0], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn json_shape() {
        let c = ParameterCurve::polynomial(vec![1.0, 2.0]);
        let s = serde_json::to_string(&c).unwrap();
        assert_eq!(s, r#"{"kind":"polynomial","coeffs":[1.0,2.0]}"#);
    }

    proptest! {
        #[test]
        fn logistic_stays_between_endpoints(start in -2.0f64..2.0, end in -2.0f64..2.0,
                                            gamma in 0.1f64..200.0, loc in 0.0f64..1.0, u in -1.0f64..2.0) {
            let c = logistic_transition_curve(start, end, gamma, loc).unwrap();
            let v = c.value(u);
            prop_assert!(v >= start.min(end) - 1e-12 && v <= start.max(end) + 1e-12);
        }
    }
}
