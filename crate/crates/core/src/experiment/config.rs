use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{AgentConfig, AgentMode, ModelConfig};
use crate::envs::{EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::gp::{BetaSchedule, GammaSchedule, KernelKind, TargetMode};
use crate::planner::{Optimism, PlannerConfig};

/// Environment variable naming the default output root.
pub const OUTPUT_ROOT_VAR: &str = "SAFE_EXPLORE_OUT";

/// Output root used when neither the config nor the environment sets one.
pub const DEFAULT_OUTPUT_ROOT: &str = "runs";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum BetaKind {
    #[default]
    Constant,
    Logarithmic,
    InformationGain,
}

/// One experiment: an environment, an agent mode and a list of seeds.
///
/// Every key is optional in the file. Environment keys left unset take the
/// environment's own defaults, which [`ExperimentConfig::resolved`] writes
/// back so the echoed config is complete.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub env: EnvKind,
    pub mode: AgentMode,
    pub seeds: Vec<u64>,
    /// Empty means `$SAFE_EXPLORE_OUT/<env>-<mode>`.
    pub output_dir: String,

    pub episodes: usize,
    pub n_star: usize,
    pub eval_episodes: usize,
    pub warmup: bool,
    pub exploit_updates: bool,
    /// Write measured wall-clock times instead of zeros to `metrics.csv`.
    pub record_timing: bool,

    pub horizon: Option<usize>,
    pub dt: Option<f64>,
    pub substeps: Option<usize>,
    pub noise_std: Option<f64>,
    pub cost_threshold: Option<f64>,

    pub plan_horizon: usize,
    pub particles: usize,
    pub population: usize,
    pub elites: usize,
    pub iterations: usize,
    pub noise_exponent: f64,
    pub init_std: f64,
    pub momentum: f64,
    pub penalty: f64,
    pub keep_elites: f64,
    pub optimism: Optimism,

    pub eval_plan_horizon: Option<usize>,
    pub eval_particles: Option<usize>,
    pub eval_population: Option<usize>,
    pub eval_elites: Option<usize>,
    pub eval_iterations: Option<usize>,

    pub kernel: KernelKind,
    pub lengthscales: Vec<f64>,
    pub signal_std: f64,
    pub noise_var: Option<f64>,
    pub target: TargetMode,
    pub beta: BetaKind,
    pub beta_value: f64,
    pub beta_base: f64,
    pub beta_scale: f64,
    pub rkhs_bound: f64,
    pub gamma_scale: f64,
    pub gamma_power: f64,
    pub delta: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let planner = PlannerConfig::default();
        let model = ModelConfig::default();
        Self {
            env: EnvKind::Pendulum,
            mode: AgentMode::Actsafe,
            seeds: vec![0, 1, 2, 3, 4],
            output_dir: String::new(),
            episodes: 10,
            n_star: 10,
            eval_episodes: 1,
            warmup: false,
            exploit_updates: false,
            record_timing: false,
            horizon: None,
            dt: None,
            substeps: None,
            noise_std: None,
            cost_threshold: None,
            plan_horizon: planner.horizon,
            particles: planner.particles,
            population: planner.population,
            elites: planner.elites,
            iterations: planner.iterations,
            noise_exponent: planner.noise_exponent,
            init_std: planner.init_std,
            momentum: planner.momentum,
            penalty: planner.penalty,
            keep_elites: planner.keep_elites,
            optimism: planner.optimism,
            eval_plan_horizon: None,
            eval_particles: None,
            eval_population: None,
            eval_elites: None,
            eval_iterations: None,
            kernel: model.kernel,
            lengthscales: model.lengthscales,
            signal_std: model.signal_std,
            noise_var: None,
            target: model.target,
            beta: BetaKind::Constant,
            beta_value: 2.0,
            beta_base: 2.0,
            beta_scale: 0.0,
            rkhs_bound: 1.0,
            gamma_scale: 1.0,
            gamma_power: 1.0,
            delta: model.delta,
        }
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rfind('\n').map_or(before.len(), |i| before.len() - i - 1) + 1;
    (line, column)
}

impl ExperimentConfig {
    /// Parses and validates config text.
    pub fn parse(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| {
            let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
            Error::Parse {
                line,
                column,
                message: e.message().trim().to_string(),
            }
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds: `seeds` must list at least one seed".into()));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::Config("seeds must be distinct".into()));
        }
        self.agent_config().validate(&self.env_spec())
    }

    pub fn env_spec(&self) -> EnvSpec<f64> {
        let mut spec = EnvSpec::of_kind(self.env);
        if let Some(h) = self.horizon {
            spec.horizon = h;
        }
        if let Some(dt) = self.dt {
            spec.dt = dt;
        }
        if let Some(s) = self.substeps {
            spec.substeps = s;
        }
        if let Some(n) = self.noise_std {
            spec.noise_std = n;
        }
        if let Some(d) = self.cost_threshold {
            spec.cost_threshold = d;
        }
        spec
    }

    pub fn planner(&self) -> PlannerConfig {
        PlannerConfig {
            horizon: self.plan_horizon,
            particles: self.particles,
            population: self.population,
            elites: self.elites,
            iterations: self.iterations,
            noise_exponent: self.noise_exponent,
            init_std: self.init_std,
            momentum: self.momentum,
            penalty: self.penalty,
            keep_elites: self.keep_elites,
            optimism: self.optimism,
            ..PlannerConfig::default()
        }
    }

    fn eval_planner(&self) -> Option<PlannerConfig> {
        let overrides = [
            self.eval_plan_horizon,
            self.eval_particles,
            self.eval_population,
            self.eval_elites,
            self.eval_iterations,
        ];
        if overrides.iter().all(Option::is_none) {
            return None;
        }
        let base = self.planner();
        Some(PlannerConfig {
            horizon: self.eval_plan_horizon.unwrap_or(base.horizon),
            particles: self.eval_particles.unwrap_or(base.particles),
            population: self.eval_population.unwrap_or(base.population),
            elites: self.eval_elites.unwrap_or(base.elites),
            iterations: self.eval_iterations.unwrap_or(base.iterations),
            ..base
        })
    }

    pub fn beta_schedule(&self) -> BetaSchedule {
        match self.beta {
            BetaKind::Constant => BetaSchedule::Constant { value: self.beta_value },
            BetaKind::Logarithmic => BetaSchedule::Logarithmic {
                base: self.beta_base,
                scale: self.beta_scale,
            },
            BetaKind::InformationGain => BetaSchedule::InformationGain {
                rkhs_bound: self.rkhs_bound,
                gamma: GammaSchedule::Logarithmic {
                    scale: self.gamma_scale,
                    power: self.gamma_power,
                },
            },
        }
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            mode: self.mode,
            n_star: self.n_star,
            total_episodes: self.episodes,
            planner: self.planner(),
            model: ModelConfig {
                kernel: self.kernel,
                lengthscales: self.lengthscales.clone(),
                signal_std: self.signal_std,
                noise_var: self.noise_var,
                beta: self.beta_schedule(),
                delta: self.delta,
                target: self.target,
            },
            warmup: self.warmup,
            exploit_updates: self.exploit_updates,
            eval_episodes: self.eval_episodes,
            eval_planner: self.eval_planner(),
        }
    }

    /// Copy with every environment- and model-dependent default filled in.
    pub fn resolved(&self) -> Self {
        let spec = self.env_spec();
        let noise = spec.noise_std;
        Self {
            horizon: Some(spec.horizon),
            dt: Some(spec.dt),
            substeps: Some(spec.substeps),
            noise_std: Some(noise),
            cost_threshold: Some(spec.cost_threshold),
            noise_var: Some(self.noise_var.unwrap_or((noise * noise).max(1e-6))),
            ..self.clone()
        }
    }

    /// Canonical TOML form of [`ExperimentConfig::resolved`].
    pub fn canonical(&self) -> String {
        toml::to_string(&self.resolved()).expect("config serializes")
    }

    /// Output directory: `override_dir`, else `output_dir`, else
    /// `$SAFE_EXPLORE_OUT/<env>-<mode>`.
    pub fn output_path(&self, override_dir: Option<&Path>) -> PathBuf {
        if let Some(p) = override_dir {
            return p.to_path_buf();
        }
        if !self.output_dir.is_empty() {
            return PathBuf::from(&self.output_dir);
        }
        let root = std::env::var_os(OUTPUT_ROOT_VAR)
            .filter(|v| !v.is_empty())
            .map_or_else(|| PathBuf::from(DEFAULT_OUTPUT_ROOT), PathBuf::from);
        root.join(format!("{}-{}", self.env.name(), self.mode.name()))
    }

    /// Reduced-scale profile that fits a single-core time budget: 10 s
    /// pendulum episodes at 5 Hz with a short iCEM planner.
    pub fn pendulum_desk(mode: AgentMode) -> Self {
        Self {
            env: EnvKind::Pendulum,
            mode,
            horizon: Some(50),
            dt: Some(0.2),
            substeps: Some(40),
            plan_horizon: 10,
            particles: 10,
            population: 32,
            elites: 5,
            iterations: 3,
            ..Self::default()
        }
    }

    /// Reduced-scale cartpole profile: 5 s episodes at 10 Hz, a
    /// small-amplitude warm-up episode, and lengthscales matched to the
    /// input ranges `(p, v, cos θ, sin θ, ω, u)`.
    pub fn cartpole_desk(mode: AgentMode) -> Self {
        Self {
            env: EnvKind::Cartpole,
            mode,
            horizon: Some(50),
            dt: Some(0.1),
            substeps: Some(5),
            warmup: true,
            plan_horizon: 10,
            particles: 10,
            population: 32,
            elites: 5,
            iterations: 3,
            lengthscales: vec![1.0, 2.0, 1.0, 1.0, 3.0, 5.0],
            ..Self::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_all_defaults() {
        let c = ExperimentConfig::parse("").unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!(c.seeds.len(), 5);
    }

    #[test]
    fn canonical_form_round_trips() {
        let c = ExperimentConfig::parse("env = \"cartpole\"\nmode = \"opax\"\nseeds = [3, 1]\ndt = 0.05\n").unwrap();
        let text = c.canonical();
        let back = ExperimentConfig::parse(&text).unwrap();
        assert_eq!(back, c.resolved());
        assert_eq!(back.canonical(), text);
        assert_eq!(back.cost_threshold, Some(0.75));
        assert_eq!(back.dt, Some(0.05));
    }

    #[test]
    fn errors_carry_line_and_column() {
        let err = ExperimentConfig::parse("seeds = [1]\nparticles = \"ten\"\n").unwrap_err();
        match err {
            Error::Parse { line, column, .. } => assert_eq!((line, column), (2, 13)),
            other => panic!("unexpected {other:?}"),
        }
        let err = ExperimentConfig::parse("seeds = [1]\n\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, column: 1, .. }), "{err:?}");
    }

    #[test]
    fn empty_seed_list_is_rejected() {
        let err = ExperimentConfig::parse("seeds = []").unwrap_err();
        assert!(err.to_string().contains("no seeds"), "{err}");
        assert!(ExperimentConfig::parse("seeds = [1, 1]").is_err());
    }

    #[test]
    fn eval_overrides_build_a_separate_planner() {
        let c = ExperimentConfig::parse("eval_population = 64").unwrap();
        let a = c.agent_config();
        assert_eq!(a.eval_planner.as_ref().unwrap().population, 64);
        assert_eq!(a.eval_planner.unwrap().horizon, a.planner.horizon);
        assert!(ExperimentConfig::default().agent_config().eval_planner.is_none());
    }

    #[test]
    fn output_path_precedence() {
        let c = ExperimentConfig {
            output_dir: "x".into(),
            ..ExperimentConfig::default()
        };
        assert_eq!(c.output_path(Some(Path::new("y"))), PathBuf::from("y"));
        assert_eq!(c.output_path(None), PathBuf::from("x"));
        let d = ExperimentConfig::default().output_path(None);
        assert!(d.ends_with("pendulum-actsafe"));
    }

    #[test]
    fn desk_profiles_validate() {
        for mode in AgentMode::ALL {
            ExperimentConfig::pendulum_desk(mode).validate().unwrap();
            ExperimentConfig::cartpole_desk(mode).validate().unwrap();
        }
    }
}
