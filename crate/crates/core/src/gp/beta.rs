use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Growth model for the information gain `γ_n`, used where a closed form is
/// needed without a fitted model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum GammaSchedule {
    /// `γ_n = scale · ln(1 + n)^power`.
    Logarithmic { scale: f64, power: f64 },
}

impl Default for GammaSchedule {
    fn default() -> Self {
        GammaSchedule::Logarithmic { scale: 1.0, power: 1.0 }
    }
}

impl GammaSchedule {
    pub fn value(&self, n: u64) -> f64 {
        match *self {
            GammaSchedule::Logarithmic { scale, power } => scale * (1.0 + n as f64).ln().powf(power),
        }
    }
}

/// Confidence scale `β_n(δ)`; every variant is nondecreasing in `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BetaSchedule {
    Constant {
        value: f64,
    },
    /// `β_n = base + scale · ln(1 + n)`.
    Logarithmic {
        base: f64,
        scale: f64,
    },
    /// `β_n = B + sqrt(2 (γ_n + ln(1/δ)))`.
    InformationGain {
        rkhs_bound: f64,
        gamma: GammaSchedule,
    },
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule::Constant { value: 2.0 }
    }
}

impl BetaSchedule {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            BetaSchedule::Constant { value } => *value >= 0.0,
            BetaSchedule::Logarithmic { base, scale } => *base >= 0.0 && *scale >= 0.0,
            BetaSchedule::InformationGain { rkhs_bound, gamma } => {
                let GammaSchedule::Logarithmic { scale, power } = gamma;
                *rkhs_bound >= 0.0 && *scale >= 0.0 && *power >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("beta schedule {self:?} has negative parameters")))
        }
    }

    /// `β_n(δ)` for episode index `n`.
    pub fn value(&self, n: u64, delta: f64) -> f64 {
        match self {
            BetaSchedule::Constant { value } => *value,
            BetaSchedule::Logarithmic { base, scale } => base + scale * (1.0 + n as f64).ln(),
            BetaSchedule::InformationGain { rkhs_bound, gamma } => {
                let log_term = (1.0 / delta.clamp(f64::MIN_POSITIVE, 1.0)).ln();
                rkhs_bound + (2.0 * (gamma.value(n) + log_term)).sqrt()
            }
        }
    }
}

/// `β_n(δ)` under the given schedule.
pub fn calibration_beta(schedule: &BetaSchedule, n: u64, delta: f64) -> f64 {
    schedule.value(n, delta)
}
