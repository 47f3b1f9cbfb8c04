//! Order and basis selection by AIC over polynomial tvAR models.

use std::io::Write;

use serde::Serialize;

use super::whittle::{block_whittle_fit, BlockWhittleConfig};
use super::PolyTvAr;
use crate::error::Result;

/// `ln σ² + 2k/T`.
pub fn aic(sigma2: f64, n_params: usize, t_len: usize) -> f64 {
    sigma2.ln() + 2.0 * n_params as f64 / t_len as f64
}

#[derive(Debug, Clone, Serialize)]
pub struct ScanRow {
    pub p: usize,
    /// Polynomial order of `α_1`.
    pub k1: usize,
    /// Common polynomial order of `α_2..α_p`.
    pub k_rest: usize,
    pub sigma2: Option<f64>,
    pub aic: Option<f64>,
    /// Reason the fit failed, if it did.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ModelScan {
    pub rows: Vec<ScanRow>,
    /// Index of the row with the smallest AIC.
    pub best: Option<usize>,
}

impl ModelScan {
    pub fn best_row(&self) -> Option<&ScanRow> {
        self.best.map(|i| &self.rows[i])
    }

    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "p,k1,k_rest,sigma2,aic,selected")?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.10}"));
        for (i, r) in self.rows.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.p,
                r.k1,
                r.k_rest,
                opt(r.sigma2),
                opt(r.aic),
                u8::from(self.best == Some(i))
            )?;
        }
        Ok(())
    }
}

/// Block Whittle fits of `α_1` of order `k1 ≤ k1_max` and `α_2..α_p` of a
/// common order `k_rest ≤ k_rest_max`, for `p ≤ p_max`, with constant `σ²`.
/// Rows whose fit fails (for instance a singular design) are kept and marked.
pub fn model_scan(x: &[f64], p_max: usize, k1_max: usize, k_rest_max: usize, cfg: &BlockWhittleConfig) -> ModelScan {
    let mut candidates = vec![(0, 0, 0)];
    for p in 1..=p_max {
        for k1 in 0..=k1_max {
            let rest = if p == 1 { 0 } else { k_rest_max };
            candidates.extend((0..=rest).map(|kr| (p, k1, kr)));
        }
    }
    let t_len = x.len();
    let rows: Vec<ScanRow> = candidates
        .into_iter()
        .map(|(p, k1, k_rest)| {
            let orders: Vec<usize> = (0..p).map(|j| if j == 0 { k1 } else { k_rest }).collect();
            let model = PolyTvAr::new(orders);
            let k = p + 1 + k1 + k_rest * p.saturating_sub(1);
            match block_whittle_fit(x, &model, cfg) {
                Ok(fit) => {
                    let s2 = fit.sigma2.filter(|s| *s > 0.0);
                    ScanRow {
                        p,
                        k1,
                        k_rest,
                        sigma2: s2,
                        aic: s2.map(|s| aic(s, k, t_len)),
                        skipped: s2.is_none().then(|| "non-positive variance".into()),
                    }
                }
                Err(e) => ScanRow {
                    p,
                    k1,
                    k_rest,
                    sigma2: None,
                    aic: None,
                    skipped: Some(e.to_string()),
                },
            }
        })
        .collect();
    let best = rows
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.aic.map(|a| (i, a)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| i);
    ModelScan { rows, best }
}
