use rand::Rng;
use rand_distr::StandardNormal;

use super::{ControlAction, EnvSpec, SystemState};
use crate::scalar::Real;

/// State-feedback policy.
pub trait Policy<T: Real> {
    fn act(&mut self, state: &SystemState<T>) -> ControlAction<T>;
}

impl<T: Real, F> Policy<T> for F
where
    F: FnMut(&SystemState<T>) -> ControlAction<T>,
{
    fn act(&mut self, state: &SystemState<T>) -> ControlAction<T> {
        self(state)
    }
}

/// One episode on the true system.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<T: Real> {
    /// `T + 1` states, starting with `s_0`.
    pub states: Vec<SystemState<T>>,
    pub actions: Vec<ControlAction<T>>,
    /// `r(s_t, a_t)` for `t < T`.
    pub rewards: Vec<T>,
    /// `c(s_t, a_t)` for `t < T`.
    pub costs: Vec<T>,
    /// Number of policy outputs that had to be clamped into the action box.
    pub clipped_actions: usize,
}

impl<T: Real> Trajectory<T> {
    pub fn start(s0: SystemState<T>) -> Self {
        Self {
            states: vec![s0],
            actions: Vec::new(),
            rewards: Vec::new(),
            costs: Vec::new(),
            clipped_actions: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// `J_r = Σ r_t`.
    pub fn total_reward(&self) -> T {
        self.rewards.iter().fold(T::zero(), |acc, r| acc + *r)
    }

    /// `J_c = Σ c_t`.
    pub fn total_cost(&self) -> T {
        self.costs.iter().fold(T::zero(), |acc, c| acc + *c)
    }

    pub fn last_state(&self) -> &SystemState<T> {
        self.states.last().expect("trajectory always holds s_0")
    }
}

#[derive(Debug, thiserror::Error)]
#[error("rollout failed at step {step}: {reason}")]
pub struct RolloutError<T: Real> {
    pub step: usize,
    pub reason: String,
    pub partial: Trajectory<T>,
}

/// Draws one `N(0, σ² I)` noise vector.
pub(crate) fn sample_noise<T: Real, R: Rng + ?Sized>(spec: &EnvSpec<T>, rng: &mut R) -> Vec<T> {
    (0..spec.state_dim())
        .map(|_| {
            let z: f64 = rng.sample(StandardNormal);
            spec.noise_std * T::lit(z)
        })
        .collect()
}

/// Executes `policy` for `spec.horizon` steps from `s0`.
///
/// Noise is drawn i.i.d. from `rng`, so a seeded generator makes the result
/// bit-reproducible. Out-of-bounds actions are clamped and counted.
#[allow(clippy::result_large_err)]
pub fn rollout_true<T, P, R>(
    spec: &EnvSpec<T>,
    policy: &mut P,
    s0: SystemState<T>,
    rng: &mut R,
) -> Result<Trajectory<T>, RolloutError<T>>
where
    T: Real,
    P: Policy<T> + ?Sized,
    R: Rng + ?Sized,
{
    let mut traj = Trajectory::start(s0);
    for step in 0..spec.horizon {
        let state = traj.last_state().clone();
        let mut action = policy.act(&state);
        if spec.clip_action(&mut action) {
            traj.clipped_actions += 1;
            log::debug!("clipped out-of-bounds action at step {step}");
        }
        let noise = sample_noise(spec, rng);
        let next = match spec.true_step(&state, &action, &noise) {
            Ok(next) if next.is_finite() => next,
            Ok(_) => {
                return Err(RolloutError {
                    step,
                    reason: "non-finite state".into(),
                    partial: traj,
                })
            }
            Err(e) => {
                return Err(RolloutError {
                    step,
                    reason: e.to_string(),
                    partial: traj,
                })
            }
        };
        traj.rewards.push(spec.reward(&state, &action));
        traj.costs.push(spec.cost(&state, &action));
        traj.actions.push(action);
        traj.states.push(next);
    }
    if traj.clipped_actions > 0 {
        log::warn!("{} actions clipped to bounds during rollout", traj.clipped_actions);
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_rest_rollout_is_constant() {
        let mut spec = EnvSpec::<f64>::pendulum();
        spec.noise_std = 0.0;
        let mut zero = |_: &SystemState<f64>| ControlAction::from_slice(&[0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let traj = rollout_true(&spec, &mut zero, spec.rest_state(), &mut rng).unwrap();
        assert_eq!(traj.states.len(), spec.horizon + 1);
        assert!(traj.states.iter().all(|s| *s == spec.rest_state()));
        let r0 = spec.reward(&spec.rest_state(), &ControlAction::from_slice(&[0.0]));
        assert!((traj.total_reward() - r0 * spec.horizon as f64).abs() < 1e-9);
        assert_eq!(traj.total_cost(), 0.0);
    }

    #[test]
    fn seeded_rollouts_are_bit_identical() {
        let spec = EnvSpec::<f64>::cartpole();
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(11);
            let mut pol = |s: &SystemState<f64>| ControlAction::from_slice(&[-3.0 * s.as_slice()[4]]);
            rollout_true(&spec, &mut pol, spec.rest_state(), &mut rng).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn costs_are_nonnegative_and_sum_to_total() {
        let spec = EnvSpec::<f64>::pendulum();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut bang =
            |s: &SystemState<f64>| ControlAction::from_slice(&[if s.as_slice()[2] >= 0.0 { 2.0 } else { -2.0 }]);
        let traj = rollout_true(&spec, &mut bang, spec.rest_state(), &mut rng).unwrap();
        assert!(traj.costs.iter().all(|c| *c >= 0.0 && *c <= spec.cost_max()));
        let sum: f64 = traj.costs.iter().sum();
        assert_eq!(sum, traj.total_cost());
        // Energy pumping reaches the unsafe speed band.
        assert!(traj.total_cost() > 0.0);
    }

    #[test]
    fn out_of_bounds_actions_are_clipped() {
        let spec = EnvSpec::<f64>::pendulum();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut wild = |_: &SystemState<f64>| ControlAction::from_slice(&[50.0]);
        let traj = rollout_true(&spec, &mut wild, spec.rest_state(), &mut rng).unwrap();
        assert_eq!(traj.clipped_actions, spec.horizon);
        assert!(traj.actions.iter().all(|a| spec.action_in_bounds(a)));
    }

    #[test]
    fn diverging_state_returns_partial_trajectory() {
        let spec = EnvSpec::<f64>::pendulum();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut zero = |_: &SystemState<f64>| ControlAction::from_slice(&[0.0]);
        let bad = SystemState::from_slice(&[f64::NAN, 0.0, 0.0]);
        let err = rollout_true(&spec, &mut zero, bad, &mut rng).unwrap_err();
        assert_eq!(err.step, 0);
        assert_eq!(err.partial.states.len(), 1);
    }
}
