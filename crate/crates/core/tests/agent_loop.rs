use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use safe_explore::agent::{run_agent, AgentConfig, AgentMode, Phase};
use safe_explore::envs::{rollout_true, ControlAction, EnvSpec, SystemState};
use safe_explore::planner::{
    eval_settings, shift_plan, ConstraintMode, Icem, ObjectiveMode, PlannerConfig, TrueDynamicsEvaluator,
};

fn tiny_spec() -> EnvSpec<f64> {
    EnvSpec {
        horizon: 8,
        dt: 0.2,
        ..EnvSpec::pendulum()
    }
}

fn tiny_config(mode: AgentMode, episodes: usize, n_star: usize) -> AgentConfig {
    AgentConfig {
        mode,
        n_star,
        total_episodes: episodes,
        planner: PlannerConfig {
            horizon: 3,
            particles: 2,
            population: 8,
            elites: 2,
            iterations: 2,
            ..PlannerConfig::default()
        },
        ..AgentConfig::default()
    }
}

#[test]
fn uniform_mode_never_plans() {
    let run = run_agent(&tiny_spec(), &tiny_config(AgentMode::Uniform, 3, 3), 1).unwrap();
    assert!(run.failure.is_none());
    assert_eq!(run.records.len(), 3);
    for r in &run.records[..2] {
        assert_eq!(r.planner.calls, 0);
        assert!(r.planner.objective_mode.is_none());
    }
}

#[test]
fn exploration_modes_share_the_objective_and_differ_in_constraint() {
    let spec = tiny_spec();
    let mut seen = Vec::new();
    for mode in [AgentMode::Actsafe, AgentMode::Opax, AgentMode::NoPessimism] {
        let run = run_agent(&spec, &tiny_config(mode, 1, 1), 4).unwrap();
        let d = &run.records[0].planner;
        assert_eq!(d.objective_mode, Some(ObjectiveMode::Intrinsic));
        assert_eq!(d.calls, spec.horizon);
        seen.push(d.constraint_mode.unwrap());
    }
    assert_eq!(
        seen,
        [
            ConstraintMode::Pessimistic,
            ConstraintMode::Off,
            ConstraintMode::MeanOnly
        ]
    );
}

#[test]
fn phases_follow_n_star() {
    let spec = tiny_spec();
    let all = run_agent(&spec, &tiny_config(AgentMode::Actsafe, 3, 3), 0).unwrap();
    assert!(all.records.iter().all(|r| r.phase == Phase::Expansion));
    assert_eq!(all.dataset.len(), 3 * spec.horizon);

    let split = run_agent(&spec, &tiny_config(AgentMode::Actsafe, 3, 1), 0).unwrap();
    let phases: Vec<Phase> = split.records.iter().map(|r| r.phase).collect();
    assert_eq!(phases, [Phase::Expansion, Phase::Exploitation, Phase::Exploitation]);
    assert_eq!(split.records[1].planner.objective_mode, Some(ObjectiveMode::Extrinsic));
    // Exploitation data is not learned from by default.
    assert_eq!(split.dataset.len(), spec.horizon);

    let learning = AgentConfig {
        exploit_updates: true,
        ..tiny_config(AgentMode::Actsafe, 3, 1)
    };
    assert_eq!(run_agent(&spec, &learning, 0).unwrap().dataset.len(), 3 * spec.horizon);
}

#[test]
fn runs_are_deterministic_per_seed() {
    let spec = tiny_spec();
    let cfg = tiny_config(AgentMode::Actsafe, 2, 2);
    let a = run_agent(&spec, &cfg, 9).unwrap();
    let b = run_agent(&spec, &cfg, 9).unwrap();
    let c = run_agent(&spec, &cfg, 10).unwrap();
    let strip = |run: &safe_explore::AgentRun| {
        run.records
            .iter()
            .map(|r| (r.trajectory.clone(), r.j_r, r.j_c, r.zero_shot))
            .collect::<Vec<_>>()
    };
    assert_eq!(strip(&a), strip(&b));
    assert_ne!(strip(&a), strip(&c));
}

#[test]
fn cumulative_cost_is_a_running_sum() {
    let mut spec = tiny_spec();
    spec.horizon = 12;
    let cfg = tiny_config(AgentMode::Opax, 4, 4);
    let run = run_agent(&spec, &cfg, 3).unwrap();
    let mut total = 0.0;
    for r in &run.records {
        total += r.j_c;
        assert_eq!(r.cumulative_cost, total);
        assert_eq!(r.j_c, r.trajectory.costs.iter().sum::<f64>());
    }
}

#[test]
fn zero_shot_appears_only_after_the_last_episode() {
    let spec = tiny_spec();
    let run = run_agent(&spec, &tiny_config(AgentMode::Actsafe, 2, 2), 5).unwrap();
    assert!(run.records[0].zero_shot.is_none());
    let z = run.records[1].zero_shot.unwrap();
    assert_eq!(z.episodes, 1);
    assert_eq!(z.se_reward, 0.0);

    let none = AgentConfig {
        eval_episodes: 0,
        ..tiny_config(AgentMode::Actsafe, 2, 2)
    };
    assert!(run_agent(&spec, &none, 5)
        .unwrap()
        .records
        .iter()
        .all(|r| r.zero_shot.is_none()));
}

#[test]
fn warmup_cost_is_not_counted() {
    let cfg = AgentConfig {
        warmup: true,
        ..tiny_config(AgentMode::Uniform, 2, 2)
    };
    let run = run_agent(&tiny_spec(), &cfg, 2).unwrap();
    assert_eq!(run.records[0].episode, 0);
    assert_eq!(run.records[0].phase, Phase::Warmup);
    assert_eq!(run.records[0].cumulative_cost, 0.0);
    assert_eq!(run.records.len(), 3);
}

#[test]
fn planning_on_the_true_dynamics_is_safe_and_beats_resting() {
    let spec = EnvSpec {
        horizon: 30,
        dt: 0.2,
        substeps: 40,
        noise_std: 0.0,
        ..EnvSpec::pendulum()
    };
    let config = PlannerConfig {
        horizon: 10,
        population: 32,
        elites: 5,
        iterations: 3,
        objective: ObjectiveMode::Extrinsic,
        constraint: ConstraintMode::Pessimistic,
        ..PlannerConfig::default()
    };
    let icem = Icem::new(config.clone(), spec.action_low.clone(), spec.action_high.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut env_rng = ChaCha8Rng::seed_from_u64(1);
    let mut warm: Option<DMatrix<f64>> = None;
    let mut policy = |s: &SystemState<f64>| {
        let mut evaluator = TrueDynamicsEvaluator {
            spec: &spec,
            s0: s,
            settings: eval_settings(&config, 0.0),
        };
        let plan = icem.optimize(&mut evaluator, warm.take(), &mut rng);
        warm = Some(shift_plan(&plan.actions));
        ControlAction(plan.actions.row(0).transpose())
    };
    let traj = rollout_true(&spec, &mut policy, spec.rest_state(), &mut env_rng).unwrap();
    assert_eq!(traj.total_cost(), 0.0);
    assert!(traj.total_reward() > spec.rest_return(), "{}", traj.total_reward());
}
