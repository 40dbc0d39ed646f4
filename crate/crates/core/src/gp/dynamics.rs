use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::exact::{ExactGp, STD_FLOOR};
use super::kernel::KernelParams;
use crate::envs::{ControlAction, SystemState, Trajectory};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Largest dataset the exact model accepts.
pub const MAX_POINTS: usize = 4000;

/// What the GP regresses on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TargetMode {
    /// Next state directly; prior mean is zero.
    NextState,
    /// State increment `s' − s`; prior mean of the next state is `s`.
    #[default]
    Delta,
}

/// A single observed transition `(s, a) → s'`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition<T: Real> {
    pub state: SystemState<T>,
    pub action: ControlAction<T>,
    pub next_state: SystemState<T>,
}

/// Transitions accumulated across episodes.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset<T: Real> {
    transitions: Vec<Transition<T>>,
}

impl<T: Real> Dataset<T> {
    pub fn new() -> Self {
        Self {
            transitions: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn push(&mut self, t: Transition<T>) {
        self.transitions.push(t);
    }

    /// Appends all `T` transitions of an episode.
    pub fn extend_from_trajectory(&mut self, traj: &Trajectory<T>) {
        for (i, action) in traj.actions.iter().enumerate() {
            self.transitions.push(Transition {
                state: traj.states[i].clone(),
                action: action.clone(),
                next_state: traj.states[i + 1].clone(),
            });
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &Transition<T>> {
        self.transitions.iter()
    }
}

/// Posterior over the next state at one input `z = (s, a)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PosteriorEval<T: Real> {
    pub mean: DVector<T>,
    pub std: DVector<T>,
}

/// Everything needed to condition a dynamics model besides the data.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSettings<T: Real> {
    pub kernel: KernelParams<T>,
    /// Observation noise variance `σ²` on every output.
    pub noise_var: T,
    /// Confidence scale `β_n` for the current episode.
    pub beta: T,
    /// Confidence level `δ`.
    pub delta: T,
    pub target_mode: TargetMode,
}

impl<T: Real> ModelSettings<T> {
    /// Unit-lengthscale SE kernel over `input_dim` inputs, `σ_0 = 1`,
    /// `β = 2`, `δ = 0.1`, increment targets.
    pub fn with_defaults(input_dim: usize, noise_var: T) -> Self {
        Self {
            kernel: KernelParams::isotropic(super::KernelKind::SquaredExponential, input_dim, T::one(), T::one()),
            noise_var,
            beta: T::lit(2.0),
            delta: T::lit(0.1),
            target_mode: TargetMode::Delta,
        }
    }
}

/// Multi-output GP over `z = (s, a)` with calibration scale `β`.
#[derive(Clone, Debug)]
pub struct GpDynamicsModel<T: Real> {
    gp: ExactGp<T>,
    state_dim: usize,
    action_dim: usize,
    target_mode: TargetMode,
    pub beta: T,
    pub delta: T,
}

impl<T: Real> GpDynamicsModel<T> {
    /// Fits the exact posterior to every transition in `data`.
    pub fn fit(settings: &ModelSettings<T>, data: &Dataset<T>, state_dim: usize, action_dim: usize) -> Result<Self> {
        let ModelSettings {
            kernel,
            noise_var,
            beta,
            delta,
            target_mode,
        } = settings.clone();
        if kernel.input_dim() != state_dim + action_dim {
            return Err(Error::Dimension {
                what: "kernel lengthscales",
                expected: state_dim + action_dim,
                got: kernel.input_dim(),
            });
        }
        if data.len() > MAX_POINTS {
            return Err(Error::TooManyPoints {
                n: data.len(),
                cap: MAX_POINTS,
            });
        }
        if !(beta >= T::zero()) || !(delta > T::zero() && delta <= T::one()) {
            return Err(Error::Config("beta must be >= 0 and delta in (0, 1]".into()));
        }
        let n = data.len();
        let d = state_dim + action_dim;
        let mut inputs = DMatrix::zeros(n, d);
        let mut targets = DMatrix::zeros(n, state_dim);
        for (i, t) in data.iter().enumerate() {
            if t.state.dim() != state_dim || t.next_state.dim() != state_dim || t.action.as_slice().len() != action_dim
            {
                return Err(Error::Dimension {
                    what: "transition",
                    expected: d,
                    got: t.state.dim() + t.action.as_slice().len(),
                });
            }
            for j in 0..state_dim {
                inputs[(i, j)] = t.state.0[j];
                targets[(i, j)] = match target_mode {
                    TargetMode::NextState => t.next_state.0[j],
                    TargetMode::Delta => t.next_state.0[j] - t.state.0[j],
                };
            }
            for j in 0..action_dim {
                inputs[(i, state_dim + j)] = t.action.0[j];
            }
        }
        let gp = ExactGp::fit(kernel, inputs, targets, noise_var)?;
        Ok(Self {
            gp,
            state_dim,
            action_dim,
            target_mode,
            beta,
            delta,
        })
    }

    /// Model conditioned on no data.
    pub fn prior(settings: &ModelSettings<T>, state_dim: usize, action_dim: usize) -> Result<Self> {
        Self::fit(settings, &Dataset::new(), state_dim, action_dim)
    }

    pub fn len(&self) -> usize {
        self.gp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gp.is_empty()
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn action_dim(&self) -> usize {
        self.action_dim
    }

    pub fn target_mode(&self) -> TargetMode {
        self.target_mode
    }

    pub fn gp(&self) -> &ExactGp<T> {
        &self.gp
    }

    pub fn kernel(&self) -> &KernelParams<T> {
        self.gp.kernel()
    }

    /// `σ_0`, the prior std of every output dimension.
    pub fn signal_std(&self) -> T {
        self.gp.kernel().signal_std
    }

    /// Posterior over the next state at `z = (s, a)`.
    pub fn posterior(&self, z: &[T]) -> Result<PosteriorEval<T>> {
        let (mut mean, var) = self.gp.predict(z)?;
        if self.target_mode == TargetMode::Delta {
            for j in 0..self.state_dim {
                mean[j] += z[j];
            }
        }
        let std = var.sqrt().max(T::lit(STD_FLOOR));
        Ok(PosteriorEval {
            mean,
            std: DVector::from_element(self.state_dim, std),
        })
    }

    /// Batched posterior. `inputs` holds one `(s, a)` row per query; returns
    /// next-state means (`m × d_s`) and the shared per-query std, unfloored.
    pub fn predict_batch(&self, inputs: &DMatrix<T>) -> (DMatrix<T>, DVector<T>) {
        let (mut mean, var) = self.gp.predict_batch(inputs);
        if self.target_mode == TargetMode::Delta {
            for j in 0..self.state_dim {
                for i in 0..inputs.nrows() {
                    mean[(i, j)] += inputs[(i, j)];
                }
            }
        }
        let std = var.map(|v| v.sqrt());
        (mean, std)
    }

    /// One TS1 draw from `N(μ_n(z), diag σ_n(z)²)`. A numerically zero std
    /// returns the mean exactly.
    pub fn ts1_step<R: Rng + ?Sized>(&self, z: &[T], rng: &mut R) -> Result<SystemState<T>> {
        let post = self.posterior(z)?;
        let mut out = post.mean;
        for j in 0..self.state_dim {
            let eps: f64 = rng.sample(StandardNormal);
            let s = post.std[j];
            if s > T::lit(STD_FLOOR) {
                out[j] += s * T::lit(eps);
            }
        }
        Ok(SystemState(out))
    }

    /// Realized information gain `½ log det(I + σ⁻² K_n)` of the data.
    pub fn information_gain(&self) -> T {
        self.gp.information_gain()
    }
}

/// Concatenates a state and an action into a GP input.
pub fn model_input<T: Real>(state: &SystemState<T>, action: &ControlAction<T>) -> Vec<T> {
    state.as_slice().iter().chain(action.as_slice()).copied().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn kernel(d: usize) -> KernelParams<f64> {
        KernelParams::isotropic(KernelKind::SquaredExponential, d, 1.0, 1.0)
    }

    fn settings(d: usize, noise_var: f64, mode: TargetMode) -> ModelSettings<f64> {
        ModelSettings {
            kernel: kernel(d),
            noise_var,
            beta: 2.0,
            delta: 0.1,
            target_mode: mode,
        }
    }

    fn small_dataset() -> Dataset<f64> {
        let mut data = Dataset::new();
        for i in 0..5 {
            let x = i as f64 * 0.3;
            data.push(Transition {
                state: SystemState::from_slice(&[x, -x]),
                action: ControlAction::from_slice(&[0.1 * x]),
                next_state: SystemState::from_slice(&[x + 0.1, -x * 0.9]),
            });
        }
        data
    }

    #[test]
    fn prior_model_next_state_mode_is_zero_mean() {
        let m = GpDynamicsModel::prior(&settings(3, 1e-4, TargetMode::NextState), 2, 1).unwrap();
        let p = m.posterior(&[0.5, 0.1, -1.0]).unwrap();
        assert_eq!(p.mean, DVector::from_vec(vec![0.0, 0.0]));
        assert_eq!(p.std, DVector::from_vec(vec![1.0, 1.0]));
    }

    #[test]
    fn prior_model_delta_mode_keeps_state() {
        let m = GpDynamicsModel::prior(&settings(3, 1e-4, TargetMode::Delta), 2, 1).unwrap();
        let p = m.posterior(&[0.5, 0.1, -1.0]).unwrap();
        assert_eq!(p.mean, DVector::from_vec(vec![0.5, 0.1]));
    }

    #[test]
    fn far_queries_revert_to_prior_std() {
        let m = GpDynamicsModel::fit(&settings(3, 1e-4, TargetMode::Delta), &small_dataset(), 2, 1).unwrap();
        let p = m.posterior(&[20.0, 20.0, 20.0]).unwrap();
        assert!(p.std.iter().all(|s| (s - 1.0).abs() < 1e-6));
    }

    #[test]
    fn training_point_std_is_small() {
        let m = GpDynamicsModel::fit(&settings(3, 1e-6, TargetMode::Delta), &small_dataset(), 2, 1).unwrap();
        let p = m.posterior(&[0.3, -0.3, 0.03]).unwrap();
        assert!(p.std.iter().all(|s| *s <= 2e-3), "{:?}", p.std);
    }

    #[test]
    fn ts1_is_deterministic_and_degenerate_when_certain() {
        let m = GpDynamicsModel::fit(&settings(3, 1e-4, TargetMode::Delta), &small_dataset(), 2, 1).unwrap();
        let z = [0.2, 0.4, 0.0];
        let a = m.ts1_step(&z, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = m.ts1_step(&z, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);

        // Interpolating model with duplicated data: std collapses to ~0.
        let mut data = Dataset::new();
        for _ in 0..1 {
            data.push(Transition {
                state: SystemState::from_slice(&[0.0, 0.0]),
                action: ControlAction::from_slice(&[0.0]),
                next_state: SystemState::from_slice(&[0.5, 0.5]),
            });
        }
        let exact = GpDynamicsModel::fit(&settings(3, 1e-30, TargetMode::NextState), &data, 2, 1).unwrap();
        let mean = exact.posterior(&[0.0, 0.0, 0.0]).unwrap().mean;
        let draw = exact
            .ts1_step(&[0.0, 0.0, 0.0], &mut ChaCha8Rng::seed_from_u64(1))
            .unwrap();
        assert_eq!(draw.0, mean);
    }

    #[test]
    fn cap_and_dimension_errors() {
        assert!(GpDynamicsModel::fit(&settings(4, 1e-4, TargetMode::Delta), &small_dataset(), 2, 1).is_err());
        let mut big = Dataset::new();
        for i in 0..=MAX_POINTS {
            big.push(Transition {
                state: SystemState::from_slice(&[i as f64]),
                action: ControlAction::from_slice(&[0.0]),
                next_state: SystemState::from_slice(&[0.0]),
            });
        }
        assert!(matches!(
            GpDynamicsModel::fit(&settings(2, 1e-4, TargetMode::Delta), &big, 1, 1),
            Err(Error::TooManyPoints { .. })
        ));
    }

    #[test]
    fn batch_matches_single_queries() {
        let m = GpDynamicsModel::fit(&settings(3, 1e-4, TargetMode::Delta), &small_dataset(), 2, 1).unwrap();
        let q = DMatrix::from_row_slice(2, 3, &[0.1, 0.2, 0.3, -1.0, 0.5, 0.0]);
        let (mean, std) = m.predict_batch(&q);
        for i in 0..2 {
            let z: Vec<f64> = q.row(i).iter().copied().collect();
            let p = m.posterior(&z).unwrap();
            for j in 0..2 {
                assert!((mean[(i, j)] - p.mean[j]).abs() < 1e-12);
                assert!((std[i] - p.std[j]).abs() < 1e-12);
            }
        }
    }
}
