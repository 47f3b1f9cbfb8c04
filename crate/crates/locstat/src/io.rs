//! Plain-text series files and versioned model JSON.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::curve::ParameterCurve;
use crate::error::{Error, Result};
use crate::model::{Family, InnovationSpec, Realization, TvModelSpec};

pub const MODEL_SCHEMA: u32 = 1;

/// One value per line; blank lines are skipped and a non-numeric first line
/// is taken as a header.
pub fn parse_series(text: &str) -> Result<Realization> {
    let mut values = Vec::new();
    let mut seen_first = false;
    for (i, line) in text.lines().enumerate() {
        let field = line.trim();
        if field.is_empty() {
            continue;
        }
        match field.parse::<f64>() {
            Ok(v) => values.push(v),
            Err(_) if !seen_first => {}
            Err(_) => return Err(Error::Parse(format!("line {}: '{field}' is not a number", i + 1))),
        }
        seen_first = true;
    }
    Realization::ingested(values).map_err(|e| Error::Parse(e.to_string()))
}

pub fn read_series(path: &Path) -> Result<Realization> {
    parse_series(&std::fs::read_to_string(path)?)
}

/// Writes `values` one per line in shortest round-trip form, after an
/// optional `x` header.
pub fn write_series(w: &mut impl Write, values: &[f64], header: bool) -> Result<()> {
    if header {
        writeln!(w, "x")?;
    }
    for v in values {
        writeln!(w, "{v}")?;
    }
    Ok(())
}

/// On-disk form of a [`TvModelSpec`]. `sigma` defaults to 1 and `mu` to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema: u32,
    pub family: Family,
    #[serde(default)]
    pub alpha: Vec<ParameterCurve>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beta: Vec<ParameterCurve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<ParameterCurve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<ParameterCurve>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arch_intercept: Option<ParameterCurve>,
    #[serde(default)]
    pub innovations: InnovationSpec,
    /// Simulation metadata, kept so a run can be replayed from its own output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, rename = "T", skip_serializing_if = "Option::is_none")]
    pub t_len: Option<usize>,
}

impl ModelFile {
    pub fn from_spec(spec: &TvModelSpec) -> Self {
        Self {
            schema: MODEL_SCHEMA,
            family: spec.family,
            alpha: spec.alpha.clone(),
            beta: spec.beta.clone(),
            sigma: (spec.family != Family::TvArch).then(|| spec.sigma.clone()),
            mu: (spec.mu != ParameterCurve::constant(0.0)).then(|| spec.mu.clone()),
            arch_intercept: spec.arch_intercept.clone(),
            innovations: spec.innovations,
            seed: None,
            t_len: None,
        }
    }

    /// Builds and validates the model.
    pub fn to_spec(&self) -> Result<TvModelSpec> {
        if self.schema != MODEL_SCHEMA {
            return Err(Error::Parse(format!(
                "unsupported model schema {} (expected {MODEL_SCHEMA})",
                self.schema
            )));
        }
        let sigma = self.sigma.clone().unwrap_or(ParameterCurve::constant(1.0));
        let mut spec = match self.family {
            Family::TvAr => {
                if !self.beta.is_empty() {
                    return Err(Error::Parse("'beta' is only allowed for the tvarma family".into()));
                }
                TvModelSpec::tvar(self.alpha.clone(), sigma)
            }
            Family::TvArma => TvModelSpec::tvarma(self.alpha.clone(), self.beta.clone(), sigma),
            Family::TvArch => {
                let Some(a0) = self.arch_intercept.clone() else {
                    return Err(Error::Parse("tvarch model needs 'arch_intercept'".into()));
                };
                if self.sigma.is_some() {
                    return Err(Error::Parse("'sigma' is not used by the tvarch family".into()));
                }
                TvModelSpec::tvarch(a0, self.alpha.clone())
            }
        };
        if self.family != Family::TvArch && self.arch_intercept.is_some() {
            return Err(Error::Parse("'arch_intercept' is only allowed for the tvarch family".into()));
        }
        if let Some(mu) = &self.mu {
            spec = spec.with_mean(mu.clone());
        }
        if self.innovations.kappa4 != 0.0 {
            spec = spec.with_innovations(InnovationSpec::with_kappa4(self.innovations.kappa4)?);
        }
        spec.innovations.law = self.innovations.law;
        spec.validate()?;
        Ok(spec)
    }
}

pub fn model_from_json(text: &str) -> Result<ModelFile> {
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("model JSON: {e}")))
}

pub fn read_model(path: &Path) -> Result<ModelFile> {
    model_from_json(&std::fs::read_to_string(path)?)
}

pub fn model_to_json(model: &ModelFile) -> String {
    serde_json::to_string_pretty(model).expect("model files serialize")
}
