//! Gaussian-process dynamics model and the quantities derived from it.

mod beta;
mod dynamics;
mod exact;
mod kernel;
pub mod nstar;

pub use beta::{calibration_beta, BetaSchedule, GammaSchedule};
pub use dynamics::{
    model_input, Dataset, GpDynamicsModel, ModelSettings, PosteriorEval, TargetMode, Transition, MAX_POINTS,
};
pub use exact::{ExactGp, JITTER_LADDER, STD_FLOOR};
pub use kernel::{KernelKind, KernelParams};
pub use nstar::{sample_complexity_n_star, sample_complexity_n_star_monotone, ConstantReading, SampleComplexityInputs};
