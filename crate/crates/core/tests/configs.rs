use safe_explore::experiment::ExperimentConfig;
use safe_explore::AgentMode;

#[test]
fn shipped_configs_match_the_presets() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let pendulum = ExperimentConfig::load(&dir.join("pendulum-desk.toml")).unwrap();
    assert_eq!(pendulum, ExperimentConfig::pendulum_desk(AgentMode::Actsafe));
    let cartpole = ExperimentConfig::load(&dir.join("cartpole-desk.toml")).unwrap();
    assert_eq!(cartpole, ExperimentConfig::cartpole_desk(AgentMode::Actsafe));
}
