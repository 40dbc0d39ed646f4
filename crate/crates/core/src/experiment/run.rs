use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::agent::{run_agent, AgentRun, EpisodeRecord, Phase};
use crate::envs::EnvSpec;
use crate::error::Result;

pub const METRICS_FILE: &str = "metrics.csv";
pub const TRAJECTORIES_FILE: &str = "trajectories.jsonl";
pub const CONFIG_FILE: &str = "config.resolved";
pub const META_FILE: &str = "run.meta";

/// One line of `metrics.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub seed: u64,
    pub episode: usize,
    pub phase: String,
    #[serde(rename = "J_r")]
    pub j_r: f64,
    #[serde(rename = "J_c")]
    pub j_c: f64,
    pub cumulative_cost: f64,
    #[serde(rename = "zero_shot_J_r")]
    pub zero_shot_j_r: Option<f64>,
    #[serde(rename = "zero_shot_J_c")]
    pub zero_shot_j_c: Option<f64>,
    pub wall_ms: u64,
}

impl MetricsRow {
    fn from_record(seed: u64, r: &EpisodeRecord<f64>, record_timing: bool) -> Self {
        Self {
            seed,
            episode: r.episode,
            phase: r.phase.name().to_string(),
            j_r: r.j_r,
            j_c: r.j_c,
            cumulative_cost: r.cumulative_cost,
            zero_shot_j_r: r.zero_shot.map(|z| z.mean_reward),
            zero_shot_j_c: r.zero_shot.map(|z| z.mean_cost),
            wall_ms: if record_timing { r.wall_ms } else { 0 },
        }
    }
}

/// One line of `trajectories.jsonl`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLine {
    pub seed: u64,
    pub episode: usize,
    pub phase: String,
    /// Observation-space states `s_0 … s_T`.
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub costs: Vec<f64>,
}

impl TrajectoryLine {
    fn from_record(seed: u64, r: &EpisodeRecord<f64>) -> Self {
        let t = &r.trajectory;
        Self {
            seed,
            episode: r.episode,
            phase: r.phase.name().to_string(),
            states: t.states.iter().map(|s| s.as_slice().to_vec()).collect(),
            actions: t.actions.iter().map(|a| a.as_slice().to_vec()).collect(),
            rewards: t.rewards.clone(),
            costs: t.costs.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub seeds: Vec<u64>,
    pub version: String,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub failures: Vec<SeedFailure>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedFailure {
    pub seed: u64,
    pub message: String,
}

/// What a run wrote.
#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub rows: usize,
    pub failures: Vec<SeedFailure>,
}

impl RunOutcome {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis())
}

/// Runs every seed on up to `jobs` worker threads and returns the runs in
/// seed order. A seed whose agent could not start yields an `Err`.
pub fn run_seeds(spec: &EnvSpec<f64>, config: &ExperimentConfig, jobs: usize) -> Vec<(u64, Result<AgentRun<f64>>)> {
    let agent = config.agent_config();
    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(u64, Result<AgentRun<f64>>)>> = Mutex::new(Vec::with_capacity(seeds.len()));
    let workers = jobs.clamp(1, seeds.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&seed) = seeds.get(i) else { break };
                log::info!("seed {seed}: starting");
                let run = run_agent(spec, &agent, seed);
                results.lock().expect("no poisoned workers").push((seed, run));
            });
        }
    });
    let mut out = results.into_inner().expect("no poisoned workers");
    out.sort_by_key(|(seed, _)| *seed);
    out
}

/// Runs the experiment and writes its artifacts into `dir`.
///
/// Seeds that fail keep the episodes they completed; the failures are
/// listed in the outcome and in `run.meta`.
pub fn run_experiment(config: &ExperimentConfig, dir: &Path, jobs: usize) -> Result<RunOutcome> {
    config.validate()?;
    let started = unix_ms();
    let spec = config.env_spec();
    fs::create_dir_all(dir)?;
    fs::write(dir.join(CONFIG_FILE), config.canonical())?;

    let runs = run_seeds(&spec, config, jobs);

    let mut metrics = csv::Writer::from_path(dir.join(METRICS_FILE))?;
    let mut traj = BufWriter::new(File::create(dir.join(TRAJECTORIES_FILE))?);
    let mut rows = 0usize;
    let mut failures = Vec::new();
    for (seed, run) in &runs {
        let run = match run {
            Ok(r) => r,
            Err(e) => {
                failures.push(SeedFailure {
                    seed: *seed,
                    message: e.to_string(),
                });
                continue;
            }
        };
        for record in &run.records {
            serde_json::to_writer(&mut traj, &TrajectoryLine::from_record(*seed, record))?;
            traj.write_all(b"\n")?;
            if record.phase != Phase::Warmup {
                metrics.serialize(MetricsRow::from_record(*seed, record, config.record_timing))?;
                rows += 1;
            }
        }
        if let Some(msg) = &run.failure {
            failures.push(SeedFailure {
                seed: *seed,
                message: msg.clone(),
            });
        }
    }
    metrics.flush()?;
    traj.flush()?;
    // Header-only file when no rows were produced.
    if rows == 0 {
        let mut w = csv::Writer::from_path(dir.join(METRICS_FILE))?;
        w.write_record(METRICS_HEADER)?;
        w.flush()?;
    }

    let mut seeds = config.seeds.clone();
    seeds.sort_unstable();
    let meta = RunMeta {
        seeds,
        version: env!("CARGO_PKG_VERSION").to_string(),
        started_unix_ms: started,
        finished_unix_ms: unix_ms(),
        failures: failures.clone(),
    };
    fs::write(dir.join(META_FILE), serde_json::to_string_pretty(&meta)? + "\n")?;
    Ok(RunOutcome {
        dir: dir.to_path_buf(),
        rows,
        failures,
    })
}

/// Column names of `metrics.csv`.
pub const METRICS_HEADER: [&str; 9] = [
    "seed",
    "episode",
    "phase",
    "J_r",
    "J_c",
    "cumulative_cost",
    "zero_shot_J_r",
    "zero_shot_J_c",
    "wall_ms",
];

/// Reads `metrics.csv`.
pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    if header != METRICS_HEADER {
        return Err(crate::error::Error::InvalidInput(format!(
            "{} has header {header:?}",
            path.display()
        )));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(crate::error::Error::from))
        .collect()
}
