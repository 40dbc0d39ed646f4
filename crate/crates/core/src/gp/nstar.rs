//! Episode count after which the expansion phase is guaranteed to have
//! converged: the smallest `n` with
//!
//! `n / (γ_n β_n⁴) ≥ (H + 1) T⁶ C⁴ · (d_s σ_0² / ln(1 + σ⁻² σ_0²)) / ε²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default search limit.
pub const DEFAULT_LIMIT: u64 = 1_000_000_000;

/// Two published normalizations of the constant `C`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ConstantReading {
    /// `C = (1 + √d_s) · max{C_max, R_max, σ_0}`.
    #[default]
    Theorem,
    /// `C = (1 + √d_s) · max{R_max, C_max, σ_0} / σ`.
    Appendix,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SampleComplexityInputs {
    /// Number of safe-set expansions `H`.
    pub expansions: u64,
    /// Episode horizon `T`.
    pub horizon: u64,
    pub cost_max: f64,
    pub reward_max: f64,
    /// Kernel signal std `σ_0`.
    pub signal_std: f64,
    /// Process noise std `σ`.
    pub noise_std: f64,
    pub state_dim: u64,
    pub epsilon: f64,
    pub reading: ConstantReading,
    /// Overrides the computed `C` when set.
    pub constant_override: Option<f64>,
}

impl SampleComplexityInputs {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidInput("epsilon must be positive".into()));
        }
        if !(self.signal_std > 0.0) || !(self.noise_std > 0.0) {
            return Err(Error::InvalidInput("signal and noise std must be positive".into()));
        }
        if self.state_dim == 0 || self.horizon == 0 {
            return Err(Error::InvalidInput("state_dim and horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn constant(&self) -> f64 {
        if let Some(c) = self.constant_override {
            return c;
        }
        let base = (1.0 + (self.state_dim as f64).sqrt()) * self.cost_max.max(self.reward_max).max(self.signal_std);
        match self.reading {
            ConstantReading::Theorem => base,
            ConstantReading::Appendix => base / self.noise_std,
        }
    }

    /// Right-hand side of the inequality.
    pub fn threshold(&self) -> f64 {
        let s0sq = self.signal_std * self.signal_std;
        let info = self.state_dim as f64 * s0sq / (1.0 + s0sq / (self.noise_std * self.noise_std)).ln();
        let c = self.constant();
        (self.expansions as f64 + 1.0) * (self.horizon as f64).powi(6) * c.powi(4) * info
            / (self.epsilon * self.epsilon)
    }
}

/// `n / (γ_n β_n⁴)`; a vanishing denominator counts as `+∞`.
pub fn ratio(n: u64, beta: &dyn Fn(u64) -> f64, gamma: &dyn Fn(u64) -> f64) -> f64 {
    let denom = gamma(n) * beta(n).powi(4);
    if denom <= 0.0 {
        f64::INFINITY
    } else {
        n as f64 / denom
    }
}

/// Smallest `n ∈ [1, limit]` satisfying the inequality, by exhaustive scan.
/// Exact for arbitrary schedules.
pub fn sample_complexity_n_star(
    inputs: &SampleComplexityInputs,
    beta: &dyn Fn(u64) -> f64,
    gamma: &dyn Fn(u64) -> f64,
    limit: u64,
) -> Result<u64> {
    inputs.validate()?;
    let rhs = inputs.threshold();
    (1..=limit)
        .find(|&n| ratio(n, beta, gamma) >= rhs)
        .ok_or(Error::Unbounded { limit })
}

/// Same answer as [`sample_complexity_n_star`] when `n / (γ_n β_n⁴)` is
/// nondecreasing, found by galloping plus bisection in `O(log n)` steps.
pub fn sample_complexity_n_star_monotone(
    inputs: &SampleComplexityInputs,
    beta: &dyn Fn(u64) -> f64,
    gamma: &dyn Fn(u64) -> f64,
    limit: u64,
) -> Result<u64> {
    inputs.validate()?;
    let rhs = inputs.threshold();
    let holds = |n: u64| ratio(n, beta, gamma) >= rhs;
    if limit == 0 {
        return Err(Error::Unbounded { limit });
    }
    if holds(1) {
        return Ok(1);
    }
    // Invariant: holds(lo) is false, holds(hi) is true.
    let mut lo = 1u64;
    let mut hi = 2u64;
    loop {
        let probe = hi.min(limit);
        if holds(probe) {
            hi = probe;
            break;
        }
        if probe == limit {
            return Err(Error::Unbounded { limit });
        }
        lo = probe;
        hi = probe.saturating_mul(2);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if holds(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
