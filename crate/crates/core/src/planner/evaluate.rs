//! Scoring of action sequences by particle rollouts through the GP model.
//!
//! Every candidate is propagated as a particle set made of one nominal
//! particle (the posterior mean is followed exactly) and `P` TS1 particles
//! (a fresh draw from `N(μ_n, σ_n²)` at every step). All candidates scored
//! within one planning call share the same standard-normal draws, so a
//! sequence's score is a deterministic function of its actions and the
//! comparison between candidates is not blurred by sampling noise.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::envs::{ControlAction, EnvSpec, SystemState};
use crate::gp::{GpDynamicsModel, STD_FLOOR};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ObjectiveMode {
    /// Sum of `‖σ_n(s_t, a_t)‖` along the particle path.
    #[default]
    Intrinsic,
    /// Sum of the task reward `r(s_{t+1}, a_t)`.
    Extrinsic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ConstraintMode {
    /// Worst cumulative cost over the particle set.
    #[default]
    Pessimistic,
    /// Cumulative cost of the nominal (mean) particle only.
    MeanOnly,
    /// No constraint; the estimate is `−∞`.
    Off,
}

/// How particle objectives are combined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Optimism {
    #[default]
    Max,
    Mean,
}

/// Score of one action sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation<T: Real> {
    pub objective: T,
    pub constraint: T,
    pub score: T,
}

impl<T: Real> Evaluation<T> {
    pub fn rejected() -> Self {
        Self {
            objective: T::neg_infinity(),
            constraint: T::infinity(),
            score: T::neg_infinity(),
        }
    }

    pub fn is_rejected(&self) -> bool {
        !self.objective.finite()
    }
}

/// `objective − λ · max{constraint − d, 0}`.
pub fn penalized_score<T: Real>(objective: T, constraint: T, threshold: T, penalty: T) -> T {
    if penalty == T::zero() {
        return objective;
    }
    let excess = (constraint - threshold).max(T::zero());
    if excess == T::zero() {
        objective
    } else {
        objective - penalty * excess
    }
}

/// `‖σ_n(z)‖`, the exploration reward.
pub fn intrinsic_reward<T: Real>(model: &GpDynamicsModel<T>, z: &[T]) -> crate::Result<T> {
    let post = model.posterior(z)?;
    Ok(post.std.norm())
}

/// Standard-normal draws shared by all candidates of one planning call,
/// indexed `[particle][step][state dim]`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleNoise {
    particles: usize,
    horizon: usize,
    dim: usize,
    draws: Vec<f64>,
}

impl ParticleNoise {
    pub fn draw<R: Rng + ?Sized>(particles: usize, horizon: usize, dim: usize, rng: &mut R) -> Self {
        let draws = (0..particles * horizon * dim)
            .map(|_| rng.sample(StandardNormal))
            .collect();
        Self {
            particles,
            horizon,
            dim,
            draws,
        }
    }

    pub fn particles(&self) -> usize {
        self.particles
    }

    #[inline]
    pub fn get(&self, particle: usize, step: usize, dim: usize) -> f64 {
        self.draws[(particle * self.horizon + step) * self.dim + dim]
    }
}

/// Settings that fix how a candidate is turned into an [`Evaluation`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalSettings<T: Real> {
    pub objective: ObjectiveMode,
    pub constraint: ConstraintMode,
    pub optimism: Optimism,
    /// Cost budget for the planning window.
    pub threshold: T,
    pub penalty: T,
}

/// Per-particle sums for one candidate; index 0 is the nominal particle.
#[derive(Clone, Debug, PartialEq)]
pub struct ParticleReturns<T: Real> {
    pub objective: Vec<T>,
    pub cost: Vec<T>,
    pub finite: bool,
}

/// Propagates every candidate's particle set through the model.
///
/// `candidates[c]` is an `H × d_a` action matrix with `H ≤` the noise
/// horizon. States are projected back onto the angle manifold after every
/// model step.
pub fn particle_returns<T: Real>(
    model: &GpDynamicsModel<T>,
    spec: &EnvSpec<T>,
    s0: &SystemState<T>,
    candidates: &[DMatrix<T>],
    noise: &ParticleNoise,
    objective: ObjectiveMode,
) -> Vec<ParticleReturns<T>> {
    let ds = spec.state_dim();
    let da = spec.action_dim();
    let per = noise.particles() + 1;
    let rows = candidates.len() * per;
    let horizon = candidates.first().map_or(0, |c| c.nrows());
    let sqrt_ds = T::from_usize_lossy(ds).sqrt();
    let floor = T::lit(STD_FLOOR);

    let mut states = DMatrix::<T>::zeros(rows, ds);
    for r in 0..rows {
        for j in 0..ds {
            states[(r, j)] = s0.0[j];
        }
    }
    let mut out: Vec<ParticleReturns<T>> = candidates
        .iter()
        .map(|_| ParticleReturns {
            objective: vec![T::zero(); per],
            cost: vec![T::zero(); per],
            finite: true,
        })
        .collect();
    let mut inputs = DMatrix::<T>::zeros(rows, ds + da);
    let mut scratch = SystemState(DVector::zeros(ds));
    let mut action = ControlAction(DVector::zeros(da));

    for t in 0..horizon {
        for (c, cand) in candidates.iter().enumerate() {
            for p in 0..per {
                let r = c * per + p;
                for j in 0..ds {
                    inputs[(r, j)] = states[(r, j)];
                }
                for k in 0..da {
                    inputs[(r, ds + k)] = cand[(t, k)];
                }
            }
        }
        let (mean, std) = model.predict_batch(&inputs);
        for (c, cand) in candidates.iter().enumerate() {
            if !out[c].finite {
                continue;
            }
            for k in 0..da {
                action.0[k] = cand[(t, k)];
            }
            for p in 0..per {
                let r = c * per + p;
                let sd = std[r];
                if objective == ObjectiveMode::Intrinsic {
                    out[c].objective[p] += sqrt_ds * sd.max(floor);
                }
                for j in 0..ds {
                    let mut v = mean[(r, j)];
                    if p > 0 && sd > floor {
                        v += sd * T::lit(noise.get(p - 1, t, j));
                    }
                    scratch.0[j] = v;
                }
                if !scratch.is_finite() {
                    out[c].finite = false;
                    break;
                }
                spec.canonicalize(&mut scratch);
                if objective == ObjectiveMode::Extrinsic {
                    out[c].objective[p] += spec.reward(&scratch, &action);
                }
                out[c].cost[p] += spec.cost(&scratch, &action);
                for j in 0..ds {
                    states[(r, j)] = scratch.0[j];
                }
            }
        }
    }
    out
}

/// Collapses particle sums into objective and constraint estimates.
pub fn summarize<T: Real>(returns: &ParticleReturns<T>, settings: &EvalSettings<T>) -> Evaluation<T> {
    if !returns.finite || returns.objective.iter().chain(&returns.cost).any(|v| !v.finite()) {
        return Evaluation::rejected();
    }
    let objective = match settings.optimism {
        Optimism::Max => returns
            .objective
            .iter()
            .copied()
            .fold(T::neg_infinity(), |a, b| a.max(b)),
        Optimism::Mean => {
            returns.objective.iter().fold(T::zero(), |a, b| a + *b) / T::from_usize_lossy(returns.objective.len())
        }
    };
    let constraint = match settings.constraint {
        ConstraintMode::Pessimistic => returns.cost.iter().copied().fold(T::neg_infinity(), |a, b| a.max(b)),
        ConstraintMode::MeanOnly => returns.cost[0],
        ConstraintMode::Off => T::neg_infinity(),
    };
    Evaluation {
        objective,
        constraint,
        score: penalized_score(objective, constraint, settings.threshold, settings.penalty),
    }
}

/// Scores a batch of candidates against shared particle noise.
pub fn evaluate_batch<T: Real>(
    model: &GpDynamicsModel<T>,
    spec: &EnvSpec<T>,
    s0: &SystemState<T>,
    candidates: &[DMatrix<T>],
    noise: &ParticleNoise,
    settings: &EvalSettings<T>,
) -> Vec<Evaluation<T>> {
    particle_returns(model, spec, s0, candidates, noise, settings.objective)
        .iter()
        .map(|r| summarize(r, settings))
        .collect()
}

/// Scores one action sequence with `particles` fresh TS1 particles drawn
/// from `rng`. Returns `(objective, constraint)`.
pub fn evaluate_candidate<T: Real, R: Rng + ?Sized>(
    model: &GpDynamicsModel<T>,
    spec: &EnvSpec<T>,
    s0: &SystemState<T>,
    actions: &DMatrix<T>,
    particles: usize,
    rng: &mut R,
    settings: &EvalSettings<T>,
) -> (T, T) {
    let noise = ParticleNoise::draw(particles, actions.nrows(), spec.state_dim(), rng);
    let eval = evaluate_batch(model, spec, s0, std::slice::from_ref(actions), &noise, settings)[0];
    (eval.objective, eval.constraint)
}
