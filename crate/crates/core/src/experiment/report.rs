use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::run::{read_metrics, MetricsRow, CONFIG_FILE, META_FILE, METRICS_FILE, TRAJECTORIES_FILE};
use crate::agent::{mean_se, AgentMode};
use crate::error::{Error, Result};

pub const SUMMARY_FILE: &str = "summary.csv";

const ARTIFACTS: [&str; 4] = [METRICS_FILE, TRAJECTORIES_FILE, CONFIG_FILE, META_FILE];

/// One line of `summary.csv`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: String,
    pub seeds: usize,
    pub final_cumulative_cost_median: f64,
    pub final_cumulative_cost_se: f64,
    pub zero_shot_j_r_mean: Option<f64>,
    pub normalized_zero_shot_median: Option<f64>,
    pub normalized_zero_shot_se: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub modes: Vec<ModeSummary>,
    /// Return of resting for a whole episode; the zero of the normalized scale.
    pub rest_return: f64,
    /// Mode with the highest mean zero-shot return; the one of the scale.
    pub best_mode: Option<String>,
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Maps returns onto the scale where resting scores 0 and the best mode's
/// mean scores 1. A degenerate scale maps everything to 1.
pub fn normalize(value: f64, rest: f64, best: f64) -> f64 {
    let span = best - rest;
    if span.abs() < 1e-12 {
        1.0
    } else {
        (value - rest) / span
    }
}

fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    let has_any = |d: &Path| ARTIFACTS.iter().any(|a| d.join(a).exists());
    if has_any(dir) {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut out = Vec::new();
    if dir.is_dir() {
        for entry in std::fs::read_dir(dir)? {
            let path = entry?.path();
            if path.is_dir() && has_any(&path) {
                out.push(path);
            }
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Error::MissingArtifacts(vec![dir
            .join(METRICS_FILE)
            .display()
            .to_string()]));
    }
    Ok(out)
}

struct SeedResult {
    final_cost: f64,
    zero_shot: Option<f64>,
}

fn per_seed(rows: &[MetricsRow]) -> BTreeMap<u64, SeedResult> {
    let mut out: BTreeMap<u64, (usize, SeedResult)> = BTreeMap::new();
    for r in rows {
        let entry = out.entry(r.seed).or_insert((
            0,
            SeedResult {
                final_cost: 0.0,
                zero_shot: None,
            },
        ));
        if r.episode >= entry.0 {
            entry.0 = r.episode;
            entry.1.final_cost = r.cumulative_cost;
        }
        if r.zero_shot_j_r.is_some() {
            entry.1.zero_shot = r.zero_shot_j_r;
        }
    }
    out.into_iter().map(|(k, (_, v))| (k, v)).collect()
}

/// Aggregates every run under `dir` (the directory itself or its
/// immediate subdirectories) by agent mode.
pub fn build_report(dir: &Path) -> Result<Report> {
    let dirs = run_dirs(dir)?;
    let missing: Vec<String> = dirs
        .iter()
        .flat_map(|d| ARTIFACTS.iter().map(move |a| d.join(a)))
        .filter(|p| !p.exists())
        .map(|p| p.display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingArtifacts(missing));
    }

    let mut spec = None;
    let mut by_mode: BTreeMap<String, Vec<SeedResult>> = BTreeMap::new();
    for d in &dirs {
        let config = ExperimentConfig::load(&d.join(CONFIG_FILE))?;
        let env = config.env_spec();
        match &spec {
            None => spec = Some(env),
            Some(s) if *s != env => {
                return Err(Error::InvalidInput(format!(
                    "{} uses a different environment than the other runs",
                    d.display()
                )))
            }
            Some(_) => {}
        }
        let rows = read_metrics(&d.join(METRICS_FILE))?;
        by_mode
            .entry(config.mode.name().to_string())
            .or_default()
            .extend(per_seed(&rows).into_values());
    }
    let rest = spec.expect("at least one run").rest_return();

    let means: BTreeMap<&String, f64> = by_mode
        .iter()
        .filter_map(|(mode, seeds)| {
            let zs: Vec<f64> = seeds.iter().filter_map(|s| s.zero_shot).collect();
            (!zs.is_empty()).then(|| (mode, mean_se(&zs).0))
        })
        .collect();
    let best = means
        .iter()
        .max_by(|a, b| a.1.total_cmp(b.1).then_with(|| b.0.cmp(a.0)))
        .map(|(m, v)| ((*m).clone(), *v));

    let order = |name: &str| {
        AgentMode::ALL
            .iter()
            .position(|m| m.name() == name)
            .unwrap_or(usize::MAX)
    };
    let mut modes: Vec<ModeSummary> = by_mode
        .iter()
        .map(|(mode, seeds)| {
            let costs: Vec<f64> = seeds.iter().map(|s| s.final_cost).collect();
            let zs: Vec<f64> = seeds.iter().filter_map(|s| s.zero_shot).collect();
            let normalized: Vec<f64> = match &best {
                Some((_, b)) => zs.iter().map(|z| normalize(*z, rest, *b)).collect(),
                None => Vec::new(),
            };
            let has_zs = !normalized.is_empty();
            ModeSummary {
                mode: mode.clone(),
                seeds: seeds.len(),
                final_cumulative_cost_median: median(&costs),
                final_cumulative_cost_se: mean_se(&costs).1,
                zero_shot_j_r_mean: has_zs.then(|| mean_se(&zs).0),
                normalized_zero_shot_median: has_zs.then(|| median(&normalized)),
                normalized_zero_shot_se: has_zs.then(|| mean_se(&normalized).1),
            }
        })
        .collect();
    modes.sort_by_key(|m| order(&m.mode));
    Ok(Report {
        modes,
        rest_return: rest,
        best_mode: best.map(|(m, _)| m),
    })
}

impl Report {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for m in &self.modes {
            w.serialize(m)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Human-readable table with the normalization spelled out.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.3}"));
        let _ = writeln!(
            s,
            "{:<14}{:>6}{:>14}{:>10}{:>14}{:>12}{:>10}",
            "mode", "seeds", "cost median", "cost se", "zero-shot J_r", "norm median", "norm se"
        );
        for m in &self.modes {
            let _ = writeln!(
                s,
                "{:<14}{:>6}{:>14.3}{:>10.3}{:>14}{:>12}{:>10}",
                m.mode,
                m.seeds,
                m.final_cumulative_cost_median,
                m.final_cumulative_cost_se,
                opt(m.zero_shot_j_r_mean),
                opt(m.normalized_zero_shot_median),
                opt(m.normalized_zero_shot_se),
            );
        }
        let _ = writeln!(
            s,
            "normalized zero-shot J_r = (J_r - rest) / (best - rest), rest = {:.3} (resting for an episode), best = mean of `{}`",
            self.rest_return,
            self.best_mode.as_deref().unwrap_or("-")
        );
        s
    }
}

/// Builds the report for `dir` and writes `summary.csv` into it.
pub fn report_command(dir: &Path) -> Result<Report> {
    let report = build_report(dir)?;
    report.write_csv(&dir.join(SUMMARY_FILE))?;
    Ok(report)
}
