//! Environmental and computational-cost metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CostProfile, TrainingStats};
use crate::scalar::Scalar;

/// Power/emission assumptions for the CO2e estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmissionContext {
    pub device_power_watts: f64,
    /// Datacenter power usage effectiveness (>= 1).
    pub pue: f64,
    pub carbon_intensity_kg_per_kwh: f64,
    pub region_label: String,
}

impl Default for EmissionContext {
    fn default() -> Self {
        EmissionContext {
            device_power_watts: 300.0,
            pue: 1.58,
            carbon_intensity_kg_per_kwh: 0.432,
            region_label: "configurable".into(),
        }
    }
}

impl EmissionContext {
    pub fn validate(&self) -> Result<()> {
        if self.device_power_watts <= 0.0 || self.carbon_intensity_kg_per_kwh <= 0.0 {
            return Err(Error::Config(
                "power and carbon intensity must be positive".into(),
            ));
        }
        if self.pue < 1.0 {
            return Err(Error::Config("PUE must be >= 1".into()));
        }
        Ok(())
    }
}

/// kWh-style emission estimate:
/// `kW * hours * PUE * carbon intensity`.
pub fn estimate_co2e(stats: &TrainingStats, ctx: &EmissionContext) -> Result<f64> {
    ctx.validate()?;
    if stats.wall_clock_seconds < 0.0 {
        return Err(Error::Config("wall_clock_seconds must be >= 0".into()));
    }
    Ok((ctx.device_power_watts / 1000.0)
        * (stats.wall_clock_seconds / 3600.0)
        * ctx.pue
        * ctx.carbon_intensity_kg_per_kwh)
}

/// Raw and normalized sustainability values for one cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SustainabilityReport {
    pub kg_co2e: f64,
    pub cost: CostProfile,
}

/// Max-norm inversion: `score_i = 1 - value_i / max(values)`.
///
/// The pool maximum scores exactly 0. An all-zero pool maps to all-1 scores
/// with the flag set (nothing to compare against).
pub fn max_norm_invert<S: Scalar>(values: &[S]) -> Result<(Vec<S>, bool)> {
    if let Some(bad) = values.iter().find(|v| **v < S::zero() || !v.is_finite()) {
        return Err(Error::Normalization {
            metric: "max_norm_invert".into(),
            value: bad.to_f64_c(),
        });
    }
    let max = values.iter().copied().fold(S::zero(), S::max);
    if max == S::zero() {
        return Ok((vec![S::one(); values.len()], true));
    }
    Ok((values.iter().map(|&v| S::one() - v / max).collect(), false))
}
