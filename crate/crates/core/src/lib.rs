//! Safe active exploration of unknown dynamical systems.
//!
//! An agent learns a Gaussian-process model of the dynamics, explores by
//! maximizing the model's epistemic uncertainty while keeping a pessimistic
//! estimate of the cumulative cost under budget, and afterwards plans for a
//! known task reward on the learned model.
//!
//! The numerical core is generic over [`Real`] (`f32`/`f64`); the aliases
//! below pin the common `f64` instantiations.

// Negated comparisons double as NaN rejection.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agent;
pub mod checks;
pub mod envs;
pub mod error;
pub mod experiment;
pub mod gp;
pub mod planner;
pub mod scalar;
pub mod seeding;
pub mod theory;

pub use error::{Error, Result};
pub use scalar::Real;

pub type EnvSpec = envs::EnvSpec<f64>;
pub type SystemState = envs::SystemState<f64>;
pub type ControlAction = envs::ControlAction<f64>;
pub type Trajectory = envs::Trajectory<f64>;
pub type KernelParams = gp::KernelParams<f64>;
pub type ExactGp = gp::ExactGp<f64>;
pub type GpDynamicsModel = gp::GpDynamicsModel<f64>;
pub type GpDynamicsModelF32 = gp::GpDynamicsModel<f32>;
pub type Dataset = gp::Dataset<f64>;
pub type ModelSettings = gp::ModelSettings<f64>;
pub type CandidatePlan = planner::CandidatePlan<f64>;
pub use planner::PlannerConfig;
pub type EpisodeRecord = agent::EpisodeRecord<f64>;
pub type AgentRun = agent::AgentRun<f64>;
pub use agent::{AgentConfig, AgentMode, ModelConfig, Phase};
