//! Receding-horizon planning with iCEM on particle rollouts through the
//! learned model.

mod evaluate;
mod icem;
mod noise;

pub use evaluate::{
    evaluate_batch, evaluate_candidate, intrinsic_reward, particle_returns, penalized_score, summarize, ConstraintMode,
    EvalSettings, Evaluation, ObjectiveMode, Optimism, ParticleNoise, ParticleReturns,
};
pub use icem::{shift_plan, CandidateEvaluator, CandidatePlan, Icem, PlannerConfig};
pub use noise::ColoredNoise;

use nalgebra::DMatrix;
use rand::Rng;

use crate::envs::{EnvSpec, SystemState};
use crate::error::Result;
use crate::gp::GpDynamicsModel;
use crate::scalar::Real;

/// Scores candidates on a GP model with noise fixed for one planning call.
pub struct ModelEvaluator<'a, T: Real> {
    pub model: &'a GpDynamicsModel<T>,
    pub spec: &'a EnvSpec<T>,
    pub s0: &'a SystemState<T>,
    pub noise: ParticleNoise,
    pub settings: EvalSettings<T>,
}

impl<T: Real> CandidateEvaluator<T> for ModelEvaluator<'_, T> {
    fn evaluate(&mut self, candidates: &[DMatrix<T>]) -> Vec<Evaluation<T>> {
        evaluate_batch(self.model, self.spec, self.s0, candidates, &self.noise, &self.settings)
    }

    fn threshold(&self) -> T {
        self.settings.threshold
    }
}

/// Settings derived from a planner config and a cost budget.
pub fn eval_settings<T: Real>(config: &PlannerConfig, threshold: T) -> EvalSettings<T> {
    EvalSettings {
        objective: config.objective,
        constraint: config.constraint,
        optimism: config.optimism,
        threshold,
        penalty: T::lit(config.penalty),
    }
}

/// One planning call from `s0` with cost budget `threshold`.
pub fn plan<T: Real, R: Rng + ?Sized>(
    model: &GpDynamicsModel<T>,
    spec: &EnvSpec<T>,
    s0: &SystemState<T>,
    config: &PlannerConfig,
    threshold: T,
    warm_start: Option<DMatrix<T>>,
    rng: &mut R,
) -> Result<CandidatePlan<T>> {
    let icem = Icem::new(config.clone(), spec.action_low.clone(), spec.action_high.clone())?;
    let noise = ParticleNoise::draw(config.particles, config.horizon, spec.state_dim(), rng);
    let mut evaluator = ModelEvaluator {
        model,
        spec,
        s0,
        noise,
        settings: eval_settings(config, threshold),
    };
    Ok(icem.optimize(&mut evaluator, warm_start, rng))
}

/// Stateful receding-horizon wrapper that warm-starts each call from the
/// previous plan shifted by one step.
#[derive(Clone, Debug)]
pub struct IcemPlanner<T: Real> {
    pub config: PlannerConfig,
    warm: Option<DMatrix<T>>,
}

impl<T: Real> IcemPlanner<T> {
    pub fn new(config: PlannerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config, warm: None })
    }

    pub fn reset(&mut self) {
        self.warm = None;
    }

    pub fn plan<R: Rng + ?Sized>(
        &mut self,
        model: &GpDynamicsModel<T>,
        spec: &EnvSpec<T>,
        s0: &SystemState<T>,
        threshold: T,
        rng: &mut R,
    ) -> Result<CandidatePlan<T>> {
        let out = plan(model, spec, s0, &self.config, threshold, self.warm.take(), rng)?;
        self.warm = (!out.fallback).then(|| shift_plan(&out.actions));
        Ok(out)
    }
}

/// Scores candidates by noiseless rollouts of the true dynamics. A
/// reference planner for what a perfect model would allow.
pub struct TrueDynamicsEvaluator<'a, T: Real> {
    pub spec: &'a EnvSpec<T>,
    pub s0: &'a SystemState<T>,
    pub settings: EvalSettings<T>,
}

impl<T: Real> CandidateEvaluator<T> for TrueDynamicsEvaluator<'_, T> {
    fn evaluate(&mut self, candidates: &[DMatrix<T>]) -> Vec<Evaluation<T>> {
        candidates
            .iter()
            .map(|cand| {
                let mut s = self.s0.clone();
                let mut ret = ParticleReturns {
                    objective: vec![T::zero()],
                    cost: vec![T::zero()],
                    finite: true,
                };
                for t in 0..cand.nrows() {
                    let a = crate::envs::ControlAction(cand.row(t).transpose());
                    match self.spec.mean_step(&s, &a) {
                        Ok(next) if next.is_finite() => s = next,
                        _ => {
                            ret.finite = false;
                            break;
                        }
                    }
                    if self.settings.objective == ObjectiveMode::Extrinsic {
                        ret.objective[0] += self.spec.reward(&s, &a);
                    }
                    ret.cost[0] += self.spec.cost(&s, &a);
                }
                summarize(&ret, &self.settings)
            })
            .collect()
    }

    fn threshold(&self) -> T {
        self.settings.threshold
    }
}
