//! Ground-truth simulators and episode rollouts.
//!
//! States are stored in observation coordinates: angles appear as
//! `(cos, sin)` pairs so that every component is a smooth function of the
//! physical configuration. Pendulum states are `[cos θ, sin θ, ω]`, Cartpole
//! states are `[p, v, cos θ, sin θ, ω]`; `θ = 0` is upright in both systems.

mod cartpole;
mod pendulum;
mod rollout;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub use cartpole::CartpoleParams;
pub use pendulum::PendulumParams;
pub use rollout::{rollout_true, Policy, RolloutError, Trajectory};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    Pendulum,
    Cartpole,
}

impl EnvKind {
    pub fn name(self) -> &'static str {
        match self {
            EnvKind::Pendulum => "pendulum",
            EnvKind::Cartpole => "cartpole",
        }
    }
}

impl std::str::FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pendulum" | "pendulumswingup" => Ok(EnvKind::Pendulum),
            "cartpole" | "cartpoleswingup" => Ok(EnvKind::Cartpole),
            other => Err(Error::Config(format!("unknown environment `{other}`"))),
        }
    }
}

/// A point in observation space.
#[derive(Clone, Debug, PartialEq)]
pub struct SystemState<T: Real>(pub DVector<T>);

/// A control input.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlAction<T: Real>(pub DVector<T>);

impl<T: Real> SystemState<T> {
    pub fn from_slice(values: &[T]) -> Self {
        Self(DVector::from_column_slice(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[T] {
        self.0.as_slice()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.finite())
    }
}

impl<T: Real> ControlAction<T> {
    pub fn from_slice(values: &[T]) -> Self {
        Self(DVector::from_column_slice(values))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DVector::zeros(dim))
    }

    pub fn as_slice(&self) -> &[T] {
        self.0.as_slice()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Physics<T: Real> {
    Pendulum(PendulumParams<T>),
    Cartpole(CartpoleParams<T>),
}

/// Immutable description of one environment instance.
#[derive(Clone, Debug, PartialEq)]
pub struct EnvSpec<T: Real> {
    pub physics: Physics<T>,
    /// Episode length `T`.
    pub horizon: usize,
    /// Control interval in seconds.
    pub dt: T,
    /// Integrator substeps per control interval.
    pub substeps: usize,
    /// Standard deviation of the additive process noise.
    pub noise_std: T,
    /// Episode cost budget `d`.
    pub cost_threshold: T,
    pub action_low: Vec<T>,
    pub action_high: Vec<T>,
}

impl<T: Real> EnvSpec<T> {
    /// Pendulum swing-up: `dt = 0.05`, `T = 200`, `σ = 0.01`, `d = 0`, `|u| ≤ 2`.
    pub fn pendulum() -> Self {
        let params = PendulumParams::default();
        let bound = params.torque_bound;
        Self {
            physics: Physics::Pendulum(params),
            horizon: 200,
            dt: T::lit(0.05),
            substeps: 10,
            noise_std: T::lit(0.01),
            cost_threshold: T::zero(),
            action_low: vec![-bound],
            action_high: vec![bound],
        }
    }

    /// Cartpole swing-up: `dt = 0.02`, `T = 200`, `σ = 0.01`, `d = 0.75`, `|u| ≤ 10`.
    pub fn cartpole() -> Self {
        let params = CartpoleParams::default();
        let bound = params.force_bound;
        Self {
            physics: Physics::Cartpole(params),
            horizon: 200,
            dt: T::lit(0.02),
            substeps: 1,
            noise_std: T::lit(0.01),
            cost_threshold: T::lit(0.75),
            action_low: vec![-bound],
            action_high: vec![bound],
        }
    }

    pub fn of_kind(kind: EnvKind) -> Self {
        match kind {
            EnvKind::Pendulum => Self::pendulum(),
            EnvKind::Cartpole => Self::cartpole(),
        }
    }

    pub fn kind(&self) -> EnvKind {
        match self.physics {
            Physics::Pendulum(_) => EnvKind::Pendulum,
            Physics::Cartpole(_) => EnvKind::Cartpole,
        }
    }

    pub fn state_dim(&self) -> usize {
        match self.physics {
            Physics::Pendulum(_) => 3,
            Physics::Cartpole(_) => 5,
        }
    }

    pub fn action_dim(&self) -> usize {
        self.action_low.len()
    }

    /// Checks the structural invariants of the spec.
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        if self.substeps == 0 {
            return Err(Error::Config("substeps must be at least 1".into()));
        }
        if !(self.dt > T::zero()) || !self.dt.finite() {
            return Err(Error::Config("dt must be positive".into()));
        }
        if !(self.noise_std >= T::zero()) {
            return Err(Error::Config("noise_std must be nonnegative".into()));
        }
        if !(self.cost_threshold >= T::zero()) {
            return Err(Error::Config("cost_threshold must be nonnegative".into()));
        }
        if self.action_low.len() != self.action_high.len() || self.action_low.is_empty() {
            return Err(Error::Config("action bounds must have matching, nonzero length".into()));
        }
        if self.action_low.iter().zip(&self.action_high).any(|(lo, hi)| !(lo < hi)) {
            return Err(Error::Config("action bounds need low < high".into()));
        }
        match &self.physics {
            Physics::Pendulum(p) => p.validate(),
            Physics::Cartpole(p) => p.validate(),
        }
    }

    /// Resting state with the pole hanging down.
    pub fn rest_state(&self) -> SystemState<T> {
        match self.physics {
            Physics::Pendulum(_) => SystemState::from_slice(&[-T::one(), T::zero(), T::zero()]),
            Physics::Cartpole(_) => SystemState::from_slice(&[T::zero(), T::zero(), -T::one(), T::zero(), T::zero()]),
        }
    }

    /// Builds a state from physical coordinates: `(θ, ω)` for the pendulum,
    /// `(p, v, θ, ω)` for the cartpole.
    pub fn state_from_physical(&self, physical: &[T]) -> Result<SystemState<T>> {
        let expected = self.state_dim() - 1;
        if physical.len() != expected {
            return Err(Error::Dimension {
                what: "physical state",
                expected,
                got: physical.len(),
            });
        }
        Ok(match self.physics {
            Physics::Pendulum(_) => {
                let (th, om) = (physical[0], physical[1]);
                SystemState::from_slice(&[th.cos(), th.sin(), om])
            }
            Physics::Cartpole(_) => {
                let (p, v, th, om) = (physical[0], physical[1], physical[2], physical[3]);
                SystemState::from_slice(&[p, v, th.cos(), th.sin(), om])
            }
        })
    }

    /// Index of the `cos` component of the pole angle.
    pub fn angle_index(&self) -> usize {
        match self.physics {
            Physics::Pendulum(_) => 0,
            Physics::Cartpole(_) => 2,
        }
    }

    /// Pole angle `θ ∈ [-π, π)` read from a state (`θ = 0` upright).
    pub fn angle(&self, state: &SystemState<T>) -> T {
        let i = self.angle_index();
        let v = state.as_slice();
        v[i + 1].atan2(v[i])
    }

    /// Projects the `(cos, sin)` pair back onto the unit circle. Other
    /// components are left untouched. A degenerate pair maps to the rest angle.
    pub fn canonicalize(&self, state: &mut SystemState<T>) {
        let i = self.angle_index();
        let v = state.0.as_mut_slice();
        let norm = (v[i] * v[i] + v[i + 1] * v[i + 1]).sqrt();
        if norm > T::lit(1e-12) && norm.finite() {
            v[i] /= norm;
            v[i + 1] /= norm;
        } else {
            v[i] = -T::one();
            v[i + 1] = T::zero();
        }
    }

    pub fn action_in_bounds(&self, action: &ControlAction<T>) -> bool {
        action
            .as_slice()
            .iter()
            .zip(self.action_low.iter().zip(&self.action_high))
            .all(|(a, (lo, hi))| a >= lo && a <= hi)
    }

    /// Clamps an action into the box; returns whether anything changed.
    pub fn clip_action(&self, action: &mut ControlAction<T>) -> bool {
        let mut clipped = false;
        for (a, (lo, hi)) in action.0.iter_mut().zip(self.action_low.iter().zip(&self.action_high)) {
            if !a.finite() {
                *a = T::zero().clamp(*lo, *hi);
                clipped = true;
            } else if *a < *lo {
                *a = *lo;
                clipped = true;
            } else if *a > *hi {
                *a = *hi;
                clipped = true;
            }
        }
        clipped
    }

    /// Deterministic part `f*(s, a)` of the transition.
    pub fn mean_step(&self, state: &SystemState<T>, action: &ControlAction<T>) -> Result<SystemState<T>> {
        self.check_inputs(state, action)?;
        let mut next = match &self.physics {
            Physics::Pendulum(p) => p.step(state, action, self.dt, self.substeps),
            Physics::Cartpole(p) => p.step(state, action, self.dt, self.substeps),
        };
        self.canonicalize(&mut next);
        if !next.is_finite() {
            return Err(Error::InvalidState("integration produced a non-finite state".into()));
        }
        Ok(next)
    }

    /// One true transition `f*(s, a) + w` for a given noise draw `w`.
    ///
    /// The noise is added in observation coordinates and the angle pair is
    /// re-projected onto the unit circle afterwards.
    pub fn true_step(&self, state: &SystemState<T>, action: &ControlAction<T>, noise: &[T]) -> Result<SystemState<T>> {
        if noise.len() != self.state_dim() {
            return Err(Error::Dimension {
                what: "process noise",
                expected: self.state_dim(),
                got: noise.len(),
            });
        }
        let mut next = self.mean_step(state, action)?;
        for (x, w) in next.0.iter_mut().zip(noise) {
            *x += *w;
        }
        self.canonicalize(&mut next);
        self.enforce_bounds(&mut next);
        Ok(next)
    }

    fn enforce_bounds(&self, state: &mut SystemState<T>) {
        match &self.physics {
            Physics::Pendulum(p) => p.enforce_bounds(state),
            Physics::Cartpole(p) => p.enforce_bounds(state),
        }
    }

    fn check_inputs(&self, state: &SystemState<T>, action: &ControlAction<T>) -> Result<()> {
        if state.dim() != self.state_dim() {
            return Err(Error::Dimension {
                what: "state",
                expected: self.state_dim(),
                got: state.dim(),
            });
        }
        if action.as_slice().len() != self.action_dim() {
            return Err(Error::Dimension {
                what: "action",
                expected: self.action_dim(),
                got: action.as_slice().len(),
            });
        }
        if !state.is_finite() {
            return Err(Error::InvalidState(format!("non-finite state {:?}", state.as_slice())));
        }
        if action.as_slice().iter().any(|a| !a.finite()) {
            return Err(Error::InvalidInput("non-finite action".into()));
        }
        Ok(())
    }

    /// Running reward. Always `≤ 0`; zero only upright and at rest.
    pub fn reward(&self, state: &SystemState<T>, action: &ControlAction<T>) -> T {
        let theta_err = crate::scalar::wrap_angle(self.angle(state));
        let u = action.as_slice()[0];
        let v = state.as_slice();
        match self.physics {
            Physics::Pendulum(_) => {
                let om = v[2];
                -(theta_err * theta_err + T::lit(0.1) * om * om + T::lit(0.02) * u * u)
            }
            Physics::Cartpole(_) => {
                let (p, vel, om) = (v[0], v[1], v[4]);
                -(theta_err * theta_err + p * p + T::lit(0.1) * (vel * vel + om * om)) - T::lit(0.01) * u * u
            }
        }
    }

    /// Running cost: angular speed above 6 rad/s for the pendulum, cart
    /// excursion beyond 0.5 for the cartpole.
    pub fn cost(&self, state: &SystemState<T>, _action: &ControlAction<T>) -> T {
        let v = state.as_slice();
        match self.physics {
            Physics::Pendulum(_) => (v[2].abs() - T::lit(6.0)).max(T::zero()),
            Physics::Cartpole(_) => (v[0].abs() - T::lit(0.5)).max(T::zero()),
        }
    }

    /// Upper bound on the running cost implied by the state bounds.
    pub fn cost_max(&self) -> T {
        match &self.physics {
            Physics::Pendulum(p) => (p.max_speed - T::lit(6.0)).max(T::zero()),
            Physics::Cartpole(p) => (p.max_position - T::lit(0.5)).max(T::zero()),
        }
    }

    /// Return of staying at rest for a whole episode, `T · r(s_rest, 0)`.
    /// Used as the zero point when normalizing task performance.
    pub fn rest_return(&self) -> T {
        let r = self.reward(&self.rest_state(), &ControlAction::zeros(self.action_dim()));
        r * T::from_usize_lossy(self.horizon)
    }

    /// Total mechanical energy per unit mass (pendulum only).
    pub fn pendulum_energy(&self, state: &SystemState<T>) -> Option<T> {
        match &self.physics {
            Physics::Pendulum(p) => Some(p.energy(state)),
            Physics::Cartpole(_) => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn a(u: f64) -> ControlAction<f64> {
        ControlAction::from_slice(&[u])
    }

    #[test]
    fn pendulum_rest_is_fixed_point() {
        let spec = EnvSpec::<f64>::pendulum();
        let s = spec.rest_state();
        let next = spec.true_step(&s, &a(0.0), &[0.0; 3]).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn cartpole_rest_is_fixed_point() {
        let spec = EnvSpec::<f64>::cartpole();
        let s = spec.rest_state();
        let next = spec.true_step(&s, &a(0.0), &[0.0; 5]).unwrap();
        assert_eq!(next, s);
    }

    #[test]
    fn pendulum_rewards_match_formula() {
        let spec = EnvSpec::<f64>::pendulum();
        let up = spec.state_from_physical(&[0.0, 0.0]).unwrap();
        assert_eq!(spec.reward(&up, &a(0.0)), 0.0);
        let spinning = spec.state_from_physical(&[0.0, 1.0]).unwrap();
        assert!((spec.reward(&spinning, &a(1.0)) + 0.12).abs() < 1e-12);
    }

    #[test]
    fn cartpole_reward_position_term() {
        let spec = EnvSpec::<f64>::cartpole();
        let s = spec.state_from_physical(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((spec.reward(&s, &a(0.0)) + 1.0).abs() < 1e-12);
    }

    #[test]
    fn costs_match_thresholds() {
        let spec = EnvSpec::<f64>::pendulum();
        let fast = spec.state_from_physical(&[0.3, 7.0]).unwrap();
        let slow = spec.state_from_physical(&[0.3, 3.0]).unwrap();
        assert!((spec.cost(&fast, &a(0.0)) - 1.0).abs() < 1e-12);
        assert_eq!(spec.cost(&slow, &a(0.0)), 0.0);
        let neg = spec.state_from_physical(&[0.3, -7.5]).unwrap();
        assert!((spec.cost(&neg, &a(0.0)) - 1.5).abs() < 1e-12);

        let cp = EnvSpec::<f64>::cartpole();
        let far = cp.state_from_physical(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert!((cp.cost(&far, &a(0.0)) - 0.5).abs() < 1e-12);
        assert_eq!(cp.cost_threshold, 0.75);
        assert_eq!(spec.cost_threshold, 0.0);
    }

    #[test]
    fn reward_is_invariant_to_full_turns() {
        let spec = EnvSpec::<f64>::pendulum();
        for &th in &[0.1, 1.3, -2.9, 3.1] {
            let s1 = spec.state_from_physical(&[th, 0.7]).unwrap();
            let s2 = spec.state_from_physical(&[th + 2.0 * PI, 0.7]).unwrap();
            assert!((spec.reward(&s1, &a(0.5)) - spec.reward(&s2, &a(0.5))).abs() < 1e-12);
        }
    }

    #[test]
    fn non_finite_state_is_rejected() {
        let spec = EnvSpec::<f64>::pendulum();
        let s = SystemState::from_slice(&[f64::NAN, 0.0, 0.0]);
        assert!(matches!(
            spec.true_step(&s, &a(0.0), &[0.0; 3]),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn noise_dimension_is_checked() {
        let spec = EnvSpec::<f64>::pendulum();
        let s = spec.rest_state();
        assert!(matches!(
            spec.true_step(&s, &a(0.0), &[0.0; 2]),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn clipping_counts_changes() {
        let spec = EnvSpec::<f64>::pendulum();
        let mut act = a(3.0);
        assert!(spec.clip_action(&mut act));
        assert_eq!(act.as_slice()[0], 2.0);
        let mut ok = a(-1.0);
        assert!(!spec.clip_action(&mut ok));
    }

    #[test]
    fn validate_rejects_bad_specs() {
        let mut spec = EnvSpec::<f64>::pendulum();
        assert!(spec.validate().is_ok());
        spec.horizon = 0;
        assert!(spec.validate().is_err());
        let mut spec = EnvSpec::<f64>::cartpole();
        spec.action_low = vec![1.0];
        spec.action_high = vec![1.0];
        assert!(spec.validate().is_err());
        let mut spec = EnvSpec::<f64>::pendulum();
        spec.noise_std = -0.1;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn rest_return_is_horizon_times_rest_reward() {
        let spec = EnvSpec::<f64>::pendulum();
        assert!((spec.rest_return() + 200.0 * PI * PI).abs() < 1e-9);
    }

    #[test]
    fn f32_pendulum_steps() {
        let spec = EnvSpec::<f32>::pendulum();
        let s = spec.state_from_physical(&[1.0, 0.0]).unwrap();
        let n = spec
            .true_step(&s, &ControlAction::from_slice(&[0.0]), &[0.0; 3])
            .unwrap();
        assert!(n.is_finite());
    }
}
