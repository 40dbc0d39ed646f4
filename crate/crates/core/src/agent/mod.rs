//! Two-phase learning loop: uncertainty-driven expansion under a
//! pessimistic cost constraint, then reward-driven exploitation on the
//! learned model. Ablation and baseline agents share the same loop.

use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::envs::{rollout_true, ControlAction, EnvSpec, SystemState, Trajectory};
use crate::error::{Error, Result};
use crate::gp::{BetaSchedule, Dataset, GpDynamicsModel, KernelKind, KernelParams, ModelSettings, TargetMode};
use crate::planner::{CandidatePlan, ConstraintMode, IcemPlanner, ObjectiveMode, PlannerConfig};
use crate::scalar::Real;
use crate::seeding::{substream, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AgentMode {
    /// Intrinsic objective, particle-max cost constraint.
    #[default]
    Actsafe,
    /// Intrinsic objective, cost of the mean model only.
    NoPessimism,
    /// Intrinsic objective, no constraint.
    Opax,
    /// Task reward from the first episode, particle-max constraint.
    Greedy,
    /// Uniform random actions, no planner.
    Uniform,
}

impl AgentMode {
    pub const ALL: [AgentMode; 5] = [
        AgentMode::Actsafe,
        AgentMode::NoPessimism,
        AgentMode::Opax,
        AgentMode::Greedy,
        AgentMode::Uniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentMode::Actsafe => "actsafe",
            AgentMode::NoPessimism => "no-pessimism",
            AgentMode::Opax => "opax",
            AgentMode::Greedy => "greedy",
            AgentMode::Uniform => "uniform",
        }
    }

    /// Constraint estimator used while collecting data.
    pub fn constraint(self) -> ConstraintMode {
        match self {
            AgentMode::Actsafe | AgentMode::Greedy | AgentMode::Uniform => ConstraintMode::Pessimistic,
            AgentMode::NoPessimism => ConstraintMode::MeanOnly,
            AgentMode::Opax => ConstraintMode::Off,
        }
    }

    /// Objective for a given phase; `None` means no planner is used.
    pub fn objective(self, phase: Phase) -> Option<ObjectiveMode> {
        match (self, phase) {
            (AgentMode::Uniform, _) | (_, Phase::Warmup) => None,
            (AgentMode::Greedy, _) | (_, Phase::Exploitation) => Some(ObjectiveMode::Extrinsic),
            (_, Phase::Expansion) => Some(ObjectiveMode::Intrinsic),
        }
    }
}

impl std::str::FromStr for AgentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AgentMode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown agent mode `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    Warmup,
    Expansion,
    Exploitation,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Warmup => "warmup",
            Phase::Expansion => "expansion",
            Phase::Exploitation => "exploitation",
        }
    }
}

/// GP hyperparameters; fixed for a run.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub kernel: KernelKind,
    /// One value per input, or a single value shared by all inputs.
    pub lengthscales: Vec<f64>,
    pub signal_std: f64,
    /// Observation noise variance; `None` uses `max(σ², 1e-6)`.
    pub noise_var: Option<f64>,
    pub beta: BetaSchedule,
    pub delta: f64,
    pub target: TargetMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            kernel: KernelKind::SquaredExponential,
            lengthscales: vec![1.0],
            signal_std: 1.0,
            noise_var: None,
            beta: BetaSchedule::default(),
            delta: 0.1,
            target: TargetMode::Delta,
        }
    }
}

impl ModelConfig {
    /// Settings for the model used during episode `n` (0-based count of
    /// completed learning episodes).
    pub fn settings<T: Real>(&self, spec: &EnvSpec<T>, n: u64) -> Result<ModelSettings<T>> {
        let dim = spec.state_dim() + spec.action_dim();
        let lengthscales = match self.lengthscales.len() {
            1 => vec![T::lit(self.lengthscales[0]); dim],
            l if l == dim => self.lengthscales.iter().map(|v| T::lit(*v)).collect(),
            l => {
                return Err(Error::Dimension {
                    what: "lengthscales",
                    expected: dim,
                    got: l,
                })
            }
        };
        self.beta.validate()?;
        let noise_std = spec.noise_std.as_f64();
        let noise_var = self.noise_var.unwrap_or((noise_std * noise_std).max(1e-6));
        if !(noise_var > 0.0) {
            return Err(Error::Config("model noise variance must be positive".into()));
        }
        Ok(ModelSettings {
            kernel: KernelParams::new(self.kernel, lengthscales, T::lit(self.signal_std))?,
            noise_var: T::lit(noise_var),
            beta: T::lit(self.beta.value(n, self.delta)),
            delta: T::lit(self.delta),
            target_mode: self.target,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AgentConfig {
    pub mode: AgentMode,
    /// Number of expansion episodes.
    pub n_star: usize,
    pub total_episodes: usize,
    pub planner: PlannerConfig,
    pub model: ModelConfig,
    /// Prepend one small-amplitude random episode whose cost is not counted.
    pub warmup: bool,
    /// Add exploitation-phase data to the model.
    pub exploit_updates: bool,
    /// Zero-shot evaluation episodes run after the last episode.
    pub eval_episodes: usize,
    /// Planner for zero-shot evaluation; defaults to `planner`.
    pub eval_planner: Option<PlannerConfig>,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            mode: AgentMode::Actsafe,
            n_star: 10,
            total_episodes: 10,
            planner: PlannerConfig::default(),
            model: ModelConfig::default(),
            warmup: false,
            exploit_updates: false,
            eval_episodes: 1,
            eval_planner: None,
        }
    }
}

impl AgentConfig {
    pub fn validate<T: Real>(&self, spec: &EnvSpec<T>) -> Result<()> {
        spec.validate()?;
        self.planner.validate()?;
        if let Some(p) = &self.eval_planner {
            p.validate()?;
        }
        if self.n_star > self.total_episodes {
            return Err(Error::Config("n_star must not exceed total_episodes".into()));
        }
        if self.planner.horizon > spec.horizon {
            return Err(Error::Config("planning horizon exceeds the episode horizon".into()));
        }
        if !(self.model.delta > 0.0 && self.model.delta <= 1.0) {
            return Err(Error::Config("delta must be in (0, 1]".into()));
        }
        self.model.settings(spec, 0)?;
        Ok(())
    }

    pub fn phase(&self, episode: usize) -> Phase {
        if episode <= self.n_star {
            Phase::Expansion
        } else {
            Phase::Exploitation
        }
    }

    /// Planner settings for one phase, or `None` for planner-free episodes.
    pub fn planner_for(&self, phase: Phase) -> Option<PlannerConfig> {
        let objective = self.mode.objective(phase)?;
        Some(PlannerConfig {
            objective,
            constraint: self.mode.constraint(),
            ..self.planner.clone()
        })
    }
}

/// Aggregates over the planner calls of one episode.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlannerDiagnostics {
    pub objective_mode: Option<ObjectiveMode>,
    pub constraint_mode: Option<ConstraintMode>,
    pub calls: usize,
    pub mean_objective: f64,
    /// Calls whose best plan exceeded the remaining budget.
    pub infeasible_calls: usize,
    /// Calls that fell back to the zero action.
    pub fallback_calls: usize,
}

impl PlannerDiagnostics {
    fn record<T: Real>(&mut self, plan: &CandidatePlan<T>) {
        self.calls += 1;
        if plan.fallback {
            self.fallback_calls += 1;
        } else {
            let k = self.calls as f64;
            self.mean_objective += (plan.objective.as_f64() - self.mean_objective) / k;
        }
        if !plan.feasible {
            self.infeasible_calls += 1;
        }
    }
}

/// Mean and standard error of zero-shot returns.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZeroShotSummary {
    pub episodes: usize,
    pub mean_reward: f64,
    pub mean_cost: f64,
    pub se_reward: f64,
    pub se_cost: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeRecord<T: Real> {
    /// 1-based; the warmup episode is 0.
    pub episode: usize,
    pub phase: Phase,
    pub trajectory: Trajectory<T>,
    pub j_r: T,
    pub j_c: T,
    /// Sum of `J_c` over counted episodes so far.
    pub cumulative_cost: T,
    pub planner: PlannerDiagnostics,
    pub zero_shot: Option<ZeroShotSummary>,
    pub wall_ms: u64,
    pub error: Option<String>,
}

/// Everything a run produced, including an error that cut it short.
#[derive(Clone, Debug)]
pub struct AgentRun<T: Real> {
    pub records: Vec<EpisodeRecord<T>>,
    pub model: GpDynamicsModel<T>,
    pub dataset: Dataset<T>,
    pub failure: Option<String>,
}

/// Budget left after the costs incurred so far in an episode.
fn remaining_budget<T: Real>(spec: &EnvSpec<T>, incurred: T) -> T {
    (spec.cost_threshold - incurred).max(T::zero())
}

fn uniform_action<T: Real, R: Rng + ?Sized>(spec: &EnvSpec<T>, scale: T, rng: &mut R) -> ControlAction<T> {
    let two = T::lit(2.0);
    ControlAction(DVector::from_iterator(
        spec.action_dim(),
        spec.action_low.iter().zip(&spec.action_high).map(|(lo, hi)| {
            let u: f64 = rng.random();
            let mid = (*lo + *hi) / two;
            mid + scale * (*lo + (*hi - *lo) * T::lit(u) - mid)
        }),
    ))
}

/// Executes one episode of `phase` on the true system.
///
/// `planner` is `None` for uniform and warmup episodes, which never query
/// the model. Returns the trajectory (partial on error) and the record.
pub fn run_episode<T: Real>(
    model: &GpDynamicsModel<T>,
    spec: &EnvSpec<T>,
    planner: Option<&PlannerConfig>,
    phase: Phase,
    episode: usize,
    seed: u64,
) -> Result<(Trajectory<T>, PlannerDiagnostics, Option<String>)> {
    let mut env_rng = substream(seed, Purpose::Environment, episode as u64);
    let mut diag = PlannerDiagnostics::default();
    let s0 = spec.rest_state();
    let result = match planner {
        None => {
            let mut rng = substream(seed, Purpose::Uniform, episode as u64);
            let scale = if phase == Phase::Warmup { T::lit(0.1) } else { T::one() };
            let mut policy = |_: &SystemState<T>| uniform_action(spec, scale, &mut rng);
            rollout_true(spec, &mut policy, s0, &mut env_rng)
        }
        Some(cfg) => {
            let mut mpc = IcemPlanner::new(cfg.clone())?;
            diag.objective_mode = Some(cfg.objective);
            diag.constraint_mode = Some(cfg.constraint);
            let mut rng = substream(seed, Purpose::Planner, episode as u64);
            let zero = ControlAction::zeros(spec.action_dim());
            let mut incurred = T::zero();
            let mut failure: Option<Error> = None;
            let mut policy = |s: &SystemState<T>| {
                incurred += spec.cost(s, &zero);
                let budget = remaining_budget(spec, incurred);
                match mpc.plan(model, spec, s, budget, &mut rng) {
                    Ok(plan) => {
                        diag.record(&plan);
                        ControlAction(plan.actions.row(0).transpose())
                    }
                    Err(e) => {
                        failure.get_or_insert(e);
                        zero.clone()
                    }
                }
            };
            let out = rollout_true(spec, &mut policy, s0, &mut env_rng);
            if let Some(e) = failure {
                return Err(e);
            }
            out
        }
    };
    Ok(match result {
        Ok(traj) => (traj, diag, None),
        Err(e) => {
            let msg = e.to_string();
            (e.partial, diag, Some(msg))
        }
    })
}

/// Plans for the task reward on `model` without updating it.
///
/// Returns `None` when `episodes == 0`.
pub fn zero_shot_eval<T: Real>(
    model: &GpDynamicsModel<T>,
    spec: &EnvSpec<T>,
    planner: &PlannerConfig,
    episodes: usize,
    seed: u64,
) -> Result<Option<ZeroShotSummary>> {
    if episodes == 0 {
        return Ok(None);
    }
    let cfg = PlannerConfig {
        objective: ObjectiveMode::Extrinsic,
        constraint: ConstraintMode::Pessimistic,
        ..planner.clone()
    };
    let eval_seed = substream(seed, Purpose::Evaluation, 0).random::<u64>();
    let mut rewards = Vec::with_capacity(episodes);
    let mut costs = Vec::with_capacity(episodes);
    for k in 0..episodes {
        let (traj, _, err) = run_episode(model, spec, Some(&cfg), Phase::Exploitation, k, eval_seed)?;
        if let Some(msg) = err {
            return Err(Error::Rollout {
                step: traj.len(),
                reason: msg,
            });
        }
        rewards.push(traj.total_reward().as_f64());
        costs.push(traj.total_cost().as_f64());
    }
    let (mean_reward, se_reward) = mean_se(&rewards);
    let (mean_cost, se_cost) = mean_se(&costs);
    Ok(Some(ZeroShotSummary {
        episodes,
        mean_reward,
        mean_cost,
        se_reward,
        se_cost,
    }))
}

/// Sample mean and standard error (zero for a single value).
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs the full loop with `observer` called after each refit.
pub fn run_agent_with<T, F>(spec: &EnvSpec<T>, config: &AgentConfig, seed: u64, mut observer: F) -> Result<AgentRun<T>>
where
    T: Real,
    F: FnMut(&EpisodeRecord<T>, &GpDynamicsModel<T>),
{
    config.validate(spec)?;
    let (ds, da) = (spec.state_dim(), spec.action_dim());
    let mut dataset = Dataset::new();
    let mut learned = 0u64;
    let mut model = GpDynamicsModel::prior(&config.model.settings(spec, 0)?, ds, da)?;
    let mut records = Vec::new();
    let mut cumulative = T::zero();

    let first = if config.warmup { 0 } else { 1 };
    for episode in first..=config.total_episodes {
        let started = Instant::now();
        let phase = if episode == 0 {
            Phase::Warmup
        } else {
            config.phase(episode)
        };
        let planner = config.planner_for(phase);
        let (traj, diag, error) = match run_episode(&model, spec, planner.as_ref(), phase, episode, seed) {
            Ok(out) => out,
            Err(e) => {
                return Ok(AgentRun {
                    records,
                    model,
                    dataset,
                    failure: Some(format!("episode {episode}: {e}")),
                })
            }
        };
        let j_r = traj.total_reward();
        let j_c = traj.total_cost();
        if phase != Phase::Warmup {
            cumulative += j_c;
        }
        let learns = phase != Phase::Exploitation || config.exploit_updates;
        if learns {
            dataset.extend_from_trajectory(&traj);
            learned += 1;
        }
        let mut record = EpisodeRecord {
            episode,
            phase,
            trajectory: traj,
            j_r,
            j_c,
            cumulative_cost: cumulative,
            planner: diag,
            zero_shot: None,
            wall_ms: 0,
            error,
        };
        if learns {
            let refit = config
                .model
                .settings(spec, learned)
                .and_then(|s| GpDynamicsModel::fit(&s, &dataset, ds, da));
            match refit {
                Ok(m) => model = m,
                Err(e) => {
                    record.wall_ms = started.elapsed().as_millis() as u64;
                    records.push(record);
                    return Ok(AgentRun {
                        records,
                        model,
                        dataset,
                        failure: Some(format!("refit after episode {episode}: {e}")),
                    });
                }
            }
        }
        if episode == config.total_episodes && config.eval_episodes > 0 {
            match zero_shot_eval(
                &model,
                spec,
                config.eval_planner.as_ref().unwrap_or(&config.planner),
                config.eval_episodes,
                seed,
            ) {
                Ok(z) => record.zero_shot = z,
                Err(e) => {
                    record.error.get_or_insert(format!("zero-shot evaluation: {e}"));
                }
            }
        }
        record.wall_ms = started.elapsed().as_millis() as u64;
        observer(&record, &model);
        let failed = record.error.clone();
        records.push(record);
        if let Some(msg) = failed {
            return Ok(AgentRun {
                records,
                model,
                dataset,
                failure: Some(format!("episode {episode}: {msg}")),
            });
        }
    }
    Ok(AgentRun {
        records,
        model,
        dataset,
        failure: None,
    })
}

pub fn run_agent<T: Real>(spec: &EnvSpec<T>, config: &AgentConfig, seed: u64) -> Result<AgentRun<T>> {
    run_agent_with(spec, config, seed, |_, _| {})
}
