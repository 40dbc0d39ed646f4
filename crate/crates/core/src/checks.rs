//! Runtime check suites: each returns JSON-serializable [`CheckReport`]s,
//! and a suite passes when every report outside the negative controls
//! passes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::envs::{rollout_true, ControlAction, EnvSpec, SystemState};
use crate::error::{Error, Result};
use crate::gp::{
    calibration_beta, BetaSchedule, Dataset, ExactGp, GpDynamicsModel, KernelKind, KernelParams, ModelSettings,
    TargetMode,
};
use crate::planner::{
    particle_returns, summarize, ConstraintMode, EvalSettings, Icem, ModelEvaluator, ObjectiveMode, Optimism,
    ParticleNoise, PlannerConfig,
};
use crate::seeding::{substream, Purpose};
use crate::theory::{calibration_grid, check_calibration, lemma_suite, CheckReport, NEGATIVE_CONTROL};

pub const SUITES: [&str; 5] = ["gp-oracle", "calibration", "lemmas", "planner-props", "all"];

/// Relative tolerance of the GP oracle comparison.
pub const GP_ORACLE_TOLERANCE: f64 = 1e-8;

/// True when every gating report passes.
pub fn all_pass(reports: &[CheckReport]) -> bool {
    reports
        .iter()
        .filter(|r| !r.name.starts_with(NEGATIVE_CONTROL))
        .all(|r| r.pass)
}

/// Runs a named suite.
pub fn run_suite(name: &str, seed: u64) -> Result<Vec<CheckReport>> {
    match name {
        "gp-oracle" => Ok(gp_oracle_suite(seed, 100)),
        "calibration" => calibration_suite(seed),
        "lemmas" => Ok(lemma_suite(seed, 20, 4000, 20_000)),
        "planner-props" => planner_property_suite(seed, 200),
        "all" => {
            let mut out = Vec::new();
            for s in &SUITES[..4] {
                out.extend(run_suite(s, seed)?);
            }
            Ok(out)
        }
        other => Err(Error::Config(format!(
            "unknown suite `{other}` (expected one of {})",
            SUITES.join(", ")
        ))),
    }
}

fn oracle_kernel(kind: KernelKind, ls: &[f64], s0: f64, a: &[f64], b: &[f64]) -> f64 {
    let r2: f64 = a.iter().zip(b).zip(ls).map(|((x, y), l)| ((x - y) / l).powi(2)).sum();
    match kind {
        KernelKind::SquaredExponential => s0 * s0 * (-0.5 * r2).exp(),
        KernelKind::Matern52 => {
            let r = r2.sqrt();
            s0 * s0 * (1.0 + 5f64.sqrt() * r + 5.0 * r2 / 3.0) * (-(5f64.sqrt()) * r).exp()
        }
    }
}

/// Posterior mean (`m × outputs`) and variance by an LU solve of the
/// dense system `(K + σ² I) W = [Y, K_*]`.
pub fn dense_posterior_oracle(
    kind: KernelKind,
    lengthscales: &[f64],
    signal_std: f64,
    noise_var: f64,
    x: &DMatrix<f64>,
    y: &DMatrix<f64>,
    queries: &DMatrix<f64>,
) -> Option<(DMatrix<f64>, DVector<f64>)> {
    let (n, m) = (x.nrows(), queries.nrows());
    let row = |mat: &DMatrix<f64>, i: usize| mat.row(i).iter().copied().collect::<Vec<_>>();
    let xs: Vec<Vec<f64>> = (0..n).map(|i| row(x, i)).collect();
    let qs: Vec<Vec<f64>> = (0..m).map(|i| row(queries, i)).collect();
    let mut a = DMatrix::from_fn(n, n, |i, j| {
        oracle_kernel(kind, lengthscales, signal_std, &xs[i], &xs[j])
    });
    for i in 0..n {
        a[(i, i)] += noise_var;
    }
    let kstar = DMatrix::from_fn(n, m, |i, j| {
        oracle_kernel(kind, lengthscales, signal_std, &xs[i], &qs[j])
    });
    let lu = a.lu();
    let alpha = lu.solve(y)?;
    let v = lu.solve(&kstar)?;
    let mean = kstar.transpose() * alpha;
    let var = DVector::from_fn(m, |j, _| {
        let prior = oracle_kernel(kind, lengthscales, signal_std, &qs[j], &qs[j]);
        prior - kstar.column(j).dot(&v.column(j))
    });
    Some((mean, var))
}

fn relative_error(got: f64, want: f64, scale: f64) -> f64 {
    (got - want).abs() / want.abs().max(scale)
}

/// Compares [`ExactGp`] with the dense oracle on `datasets` random
/// problems with `n ≤ 50` points and at most five inputs.
pub fn gp_oracle_suite(seed: u64, datasets: usize) -> Vec<CheckReport> {
    let mut rng = substream(seed, Purpose::Check, 1);
    let mut worst = 0.0f64;
    let mut failures = 0usize;
    let mut out = Vec::with_capacity(datasets + 1);
    for k in 0..datasets {
        let dim = rng.random_range(1..=5);
        let n = rng.random_range(1..=50);
        let outputs = rng.random_range(1..=3);
        let m = 20;
        let kind = if rng.random_bool(0.5) {
            KernelKind::SquaredExponential
        } else {
            KernelKind::Matern52
        };
        let ls: Vec<f64> = (0..dim).map(|_| rng.random_range(0.3..2.0)).collect();
        let s0 = rng.random_range(0.5..2.0);
        let noise_var = 10f64.powf(rng.random_range(-3.0..-1.0));
        let x = DMatrix::from_fn(n, dim, |_, _| rng.random_range(-2.0..2.0));
        let y = DMatrix::from_fn(n, outputs, |_, _| rng.random_range(-3.0..3.0));
        let q = DMatrix::from_fn(m, dim, |_, _| rng.random_range(-2.5..2.5));

        let kernel = KernelParams::new(kind, ls.clone(), s0).expect("valid kernel");
        let err = match (
            ExactGp::fit(kernel, x.clone(), y.clone(), noise_var),
            dense_posterior_oracle(kind, &ls, s0, noise_var, &x, &y, &q),
        ) {
            (Ok(gp), Some((mean_o, var_o))) => {
                let (mean, var) = gp.predict_batch(&q);
                let y_scale = y.amax().max(1e-12) * 1e-6;
                let v_scale = s0 * s0 * 1e-6;
                let em = mean
                    .iter()
                    .zip(mean_o.iter())
                    .map(|(a, b)| relative_error(*a, *b, y_scale))
                    .fold(0.0, f64::max);
                let ev = var
                    .iter()
                    .zip(var_o.iter())
                    .map(|(a, b)| relative_error(*a, b.max(0.0), v_scale))
                    .fold(0.0, f64::max);
                em.max(ev)
            }
            _ => f64::INFINITY,
        };
        let pass = err <= GP_ORACLE_TOLERANCE;
        if !pass {
            failures += 1;
        }
        worst = worst.max(err);
        out.push(CheckReport::new(
            format!("gp-oracle/dataset/{k}"),
            err,
            GP_ORACLE_TOLERANCE,
            pass,
        ));
    }
    out.push(CheckReport::new(
        "gp-oracle/worst",
        worst,
        GP_ORACLE_TOLERANCE,
        failures == 0,
    ));
    out
}

fn random_episodes(spec: &EnvSpec<f64>, episodes: usize, seed: u64) -> Result<Dataset<f64>> {
    let mut data = Dataset::new();
    for e in 0..episodes as u64 {
        let mut act_rng = substream(seed, Purpose::Uniform, e);
        let mut env_rng = substream(seed, Purpose::Environment, e);
        let (lo, hi) = (spec.action_low[0], spec.action_high[0]);
        let mut policy = |_: &SystemState<f64>| ControlAction::from_slice(&[act_rng.random_range(lo..hi)]);
        let traj = rollout_true(spec, &mut policy, spec.rest_state(), &mut env_rng).map_err(|e| Error::Rollout {
            step: e.step,
            reason: e.reason,
        })?;
        data.extend_from_trajectory(&traj);
    }
    Ok(data)
}

/// Coverage of the `β`-band on the 1000-point pendulum grid for a model
/// fitted to random-action episodes. The `β = 0` band is a negative
/// control.
pub fn calibration_suite(seed: u64) -> Result<Vec<CheckReport>> {
    let spec = EnvSpec::<f64> {
        horizon: 50,
        dt: 0.2,
        substeps: 40,
        ..EnvSpec::pendulum()
    };
    let grid = calibration_grid(&spec, 10);
    let mut settings = ModelSettings::with_defaults(4, 1e-4);
    let beta = calibration_beta(&BetaSchedule::default(), 0, 0.1);
    let mut out = Vec::new();
    for episodes in [0usize, 1, 3] {
        let data = random_episodes(&spec, episodes, seed)?;
        settings.beta = beta;
        let model = GpDynamicsModel::fit(&settings, &data, 3, 1)?;
        let cov = check_calibration(&model, &spec, &grid, beta);
        out.push(CheckReport::new(
            format!("calibration/random-episodes/{episodes}"),
            cov.fraction,
            0.9,
            cov.fraction >= 0.9,
        ));
        if episodes > 0 {
            let none = check_calibration(&model, &spec, &grid, 0.0);
            out.push(CheckReport::new(
                format!("{NEGATIVE_CONTROL}calibration/zero-beta/{episodes}"),
                none.fraction,
                0.9,
                none.fraction >= 0.9,
            ));
        }
    }
    Ok(out)
}

/// A small random planning problem on a pendulum model.
pub struct PlannerInstance {
    pub spec: EnvSpec<f64>,
    pub model: GpDynamicsModel<f64>,
    pub config: PlannerConfig,
    pub s0: SystemState<f64>,
    pub threshold: f64,
}

/// Draws a random model (fitted to a few random transitions), start state
/// and iCEM configuration.
pub fn random_planner_instance<R: Rng + ?Sized>(rng: &mut R) -> PlannerInstance {
    let spec = EnvSpec::<f64> {
        horizon: 20,
        dt: 0.1,
        ..EnvSpec::pendulum()
    };
    let mut data = Dataset::new();
    let points = rng.random_range(0..15);
    for _ in 0..points {
        let s = spec
            .state_from_physical(&[rng.random_range(-3.1..3.1), rng.random_range(-6.0..6.0)])
            .expect("finite");
        let a = ControlAction::from_slice(&[rng.random_range(-2.0..2.0)]);
        let next = spec.mean_step(&s, &a).expect("valid step");
        data.push(crate::gp::Transition {
            state: s,
            action: a,
            next_state: next,
        });
    }
    let settings = ModelSettings {
        kernel: KernelParams::isotropic(KernelKind::SquaredExponential, 4, rng.random_range(0.5..2.0), 1.0),
        noise_var: 1e-4,
        beta: 2.0,
        delta: 0.1,
        target_mode: TargetMode::Delta,
    };
    let model = GpDynamicsModel::fit(&settings, &data, 3, 1).expect("small fit");
    let s0 = spec
        .state_from_physical(&[rng.random_range(-3.1..3.1), rng.random_range(-5.0..5.0)])
        .expect("finite");
    let population = rng.random_range(4..24);
    let config = PlannerConfig {
        horizon: rng.random_range(1..6),
        particles: rng.random_range(1..5),
        population,
        elites: rng.random_range(1..=population.min(6)),
        iterations: rng.random_range(1..5),
        noise_exponent: rng.random_range(0.0..3.0),
        init_std: rng.random_range(0.1..1.0),
        momentum: rng.random_range(0.0..0.9),
        penalty: rng.random_range(0.0..100.0),
        keep_elites: rng.random_range(0.05..1.0),
        objective: if rng.random_bool(0.5) {
            ObjectiveMode::Intrinsic
        } else {
            ObjectiveMode::Extrinsic
        },
        constraint: ConstraintMode::Pessimistic,
        optimism: if rng.random_bool(0.5) {
            Optimism::Max
        } else {
            Optimism::Mean
        },
    };
    PlannerInstance {
        spec,
        model,
        config,
        s0,
        threshold: rng.random_range(0.0..2.0),
    }
}

/// Outcome of the three planner properties on one instance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlannerProperties {
    /// Best score per iteration never decreases while elites are carried.
    pub monotone: bool,
    /// Particle-max cost ≥ nominal-particle cost on shared noise.
    pub pessimism_dominates: bool,
    /// Every planned action lies inside the box.
    pub in_bounds: bool,
    /// Largest decrease of the iteration-best score (0 when monotone).
    pub worst_drop: f64,
}

pub fn planner_properties<R: Rng + ?Sized>(inst: &PlannerInstance, rng: &mut R) -> Result<PlannerProperties> {
    let icem = Icem::new(
        inst.config.clone(),
        inst.spec.action_low.clone(),
        inst.spec.action_high.clone(),
    )?;
    let noise = ParticleNoise::draw(inst.config.particles, inst.config.horizon, inst.spec.state_dim(), rng);
    let settings = crate::planner::eval_settings(&inst.config, inst.threshold);
    let mut evaluator = ModelEvaluator {
        model: &inst.model,
        spec: &inst.spec,
        s0: &inst.s0,
        noise,
        settings,
    };
    let plan = icem.optimize(&mut evaluator, None, rng);
    let worst_drop = plan
        .iteration_best
        .windows(2)
        .map(|w| w[0] - w[1])
        .fold(0.0f64, f64::max);
    let in_bounds = plan.actions.row_iter().all(|r| {
        r.iter()
            .zip(inst.spec.action_low.iter().zip(&inst.spec.action_high))
            .all(|(a, (lo, hi))| a >= lo && a <= hi)
    });

    let returns = particle_returns(
        &inst.model,
        &inst.spec,
        &inst.s0,
        std::slice::from_ref(&plan.actions),
        &evaluator.noise,
        inst.config.objective,
    );
    let with = |constraint| EvalSettings {
        constraint,
        ..evaluator.settings
    };
    let pess = summarize(&returns[0], &with(ConstraintMode::Pessimistic));
    let mean = summarize(&returns[0], &with(ConstraintMode::MeanOnly));
    let pessimism_dominates = pess.is_rejected() || pess.constraint >= mean.constraint;
    Ok(PlannerProperties {
        monotone: worst_drop <= 0.0,
        pessimism_dominates,
        in_bounds,
        worst_drop,
    })
}

/// Runs [`planner_properties`] over `instances` random instances.
pub fn planner_property_suite(seed: u64, instances: usize) -> Result<Vec<CheckReport>> {
    let mut rng = substream(seed, Purpose::Check, 2);
    let mut counts = [0usize; 3];
    for _ in 0..instances {
        let inst = random_planner_instance(&mut rng);
        let p = planner_properties(&inst, &mut rng)?;
        counts[0] += usize::from(!p.monotone);
        counts[1] += usize::from(!p.pessimism_dominates);
        counts[2] += usize::from(!p.in_bounds);
    }
    let names = ["elite-monotonicity", "pessimism-dominance", "action-bounds"];
    let mut out: Vec<CheckReport> = names
        .iter()
        .zip(counts)
        .map(|(n, c)| CheckReport::new(format!("planner-props/{n}"), c as f64, 0.0, c == 0))
        .collect();
    out.push(CheckReport::new(
        "planner-props/instances",
        instances as f64,
        200.0,
        instances >= 200,
    ));
    Ok(out)
}
