use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::evaluate::{ConstraintMode, Evaluation, ObjectiveMode, Optimism};
use super::noise::ColoredNoise;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// iCEM settings plus the objective and constraint estimators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub horizon: usize,
    pub particles: usize,
    pub population: usize,
    pub elites: usize,
    pub iterations: usize,
    /// Exponent of the `1/f^β` action-noise spectrum.
    pub noise_exponent: f64,
    /// Initial sampling std as a fraction of each action range.
    pub init_std: f64,
    /// Weight of the previous distribution in the elite refit.
    pub momentum: f64,
    pub penalty: f64,
    /// Fraction of elites carried into the next iteration.
    pub keep_elites: f64,
    pub objective: ObjectiveMode,
    pub constraint: ConstraintMode,
    pub optimism: Optimism,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            horizon: 40,
            particles: 10,
            population: 256,
            elites: 32,
            iterations: 5,
            noise_exponent: 2.0,
            init_std: 0.5,
            momentum: 0.1,
            penalty: 1000.0,
            keep_elites: 0.3,
            objective: ObjectiveMode::Intrinsic,
            constraint: ConstraintMode::Pessimistic,
            optimism: Optimism::Max,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("planner: {m}")));
        if self.horizon == 0 || self.particles == 0 || self.population == 0 || self.iterations == 0 {
            return fail("horizon, particles, population and iterations must be positive");
        }
        if self.elites == 0 || self.elites > self.population {
            return fail("elites must be in 1..=population");
        }
        if !(self.noise_exponent >= 0.0) || !self.noise_exponent.is_finite() {
            return fail("noise_exponent must be a nonnegative number");
        }
        if !(self.init_std > 0.0) || !self.init_std.is_finite() {
            return fail("init_std must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail("momentum must be in [0, 1)");
        }
        if !(self.penalty >= 0.0) {
            return fail("penalty must be nonnegative");
        }
        if !(0.0..=1.0).contains(&self.keep_elites) {
            return fail("keep_elites must be in [0, 1]");
        }
        Ok(())
    }

    /// Number of elites carried over between iterations; at least the best
    /// one whenever carrying is enabled.
    pub fn kept_elites(&self) -> usize {
        if self.keep_elites <= 0.0 {
            0
        } else {
            ((self.keep_elites * self.elites as f64).ceil() as usize).clamp(1, self.elites)
        }
    }
}

/// An optimized action sequence with its estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct CandidatePlan<T: Real> {
    /// `H × d_a`, inside the action bounds.
    pub actions: DMatrix<T>,
    pub objective: T,
    pub constraint: T,
    pub score: T,
    /// The constraint estimate is within budget.
    pub feasible: bool,
    /// Every candidate was rejected and `actions` is the zero fallback.
    pub fallback: bool,
    /// Best score in each iteration's population.
    pub iteration_best: Vec<T>,
}

/// Scores batches of `H × d_a` action sequences.
pub trait CandidateEvaluator<T: Real> {
    fn evaluate(&mut self, candidates: &[DMatrix<T>]) -> Vec<Evaluation<T>>;

    /// Budget used to set [`CandidatePlan::feasible`].
    fn threshold(&self) -> T;
}

/// Box-constrained iCEM over action sequences.
#[derive(Clone, Debug)]
pub struct Icem<T: Real> {
    pub config: PlannerConfig,
    pub low: Vec<T>,
    pub high: Vec<T>,
}

#[derive(Clone)]
struct Scored<T: Real> {
    actions: DMatrix<T>,
    eval: Evaluation<T>,
}

impl<T: Real> Icem<T> {
    pub fn new(config: PlannerConfig, low: Vec<T>, high: Vec<T>) -> Result<Self> {
        config.validate()?;
        if low.len() != high.len() || low.is_empty() {
            return Err(Error::Dimension {
                what: "action bounds",
                expected: low.len().max(1),
                got: high.len(),
            });
        }
        if low.iter().zip(&high).any(|(l, h)| !(*l < *h)) {
            return Err(Error::Config("action bounds need low < high".into()));
        }
        Ok(Self { config, low, high })
    }

    pub fn action_dim(&self) -> usize {
        self.low.len()
    }

    /// Center of the action box, repeated over the horizon.
    pub fn center(&self) -> DMatrix<T> {
        let two = T::lit(2.0);
        DMatrix::from_fn(self.config.horizon, self.action_dim(), |_, k| {
            (self.low[k] + self.high[k]) / two
        })
    }

    fn zero_plan(&self) -> DMatrix<T> {
        DMatrix::from_fn(self.config.horizon, self.action_dim(), |_, k| {
            T::zero().clamp(self.low[k], self.high[k])
        })
    }

    fn clip(&self, m: &mut DMatrix<T>) {
        for k in 0..m.ncols() {
            for t in 0..m.nrows() {
                let v = m[(t, k)];
                m[(t, k)] = if v.finite() {
                    v.clamp(self.low[k], self.high[k])
                } else {
                    T::zero().clamp(self.low[k], self.high[k])
                };
            }
        }
    }

    /// Runs the optimizer from `mean` (defaults to the box center).
    pub fn optimize<E, R>(&self, evaluator: &mut E, mean: Option<DMatrix<T>>, rng: &mut R) -> CandidatePlan<T>
    where
        E: CandidateEvaluator<T> + ?Sized,
        R: Rng + ?Sized,
    {
        let cfg = &self.config;
        let h = cfg.horizon;
        let da = self.action_dim();
        let mut mean = mean.unwrap_or_else(|| self.center());
        assert_eq!(mean.shape(), (h, da), "warm start shape");
        let mut std = DMatrix::from_fn(h, da, |_, k| T::lit(cfg.init_std) * (self.high[k] - self.low[k]));
        let momentum = T::lit(cfg.momentum);
        let noise = ColoredNoise::new(cfg.noise_exponent, h);
        let keep = cfg.kept_elites();

        let mut carried: Vec<Scored<T>> = Vec::new();
        let mut best: Option<Scored<T>> = None;
        let mut iteration_best = Vec::with_capacity(cfg.iterations);

        for iter in 0..cfg.iterations {
            let last = iter + 1 == cfg.iterations;
            let fresh_count = cfg.population.saturating_sub(carried.len()).max(1);
            let mut fresh: Vec<DMatrix<T>> = Vec::with_capacity(fresh_count + 1);
            for _ in 0..fresh_count {
                let mut cand = mean.clone();
                for k in 0..da {
                    let seq = noise.sample(rng);
                    for t in 0..h {
                        cand[(t, k)] += std[(t, k)] * T::lit(seq[t]);
                    }
                }
                self.clip(&mut cand);
                fresh.push(cand);
            }
            if last {
                let mut m = mean.clone();
                self.clip(&mut m);
                fresh.push(m);
            }
            let evals = evaluator.evaluate(&fresh);
            let mut population: Vec<Scored<T>> = carried
                .drain(..)
                .chain(
                    fresh
                        .into_iter()
                        .zip(evals)
                        .map(|(actions, eval)| Scored { actions, eval }),
                )
                .collect();
            // Stable sort: ties keep their sampling order.
            population.sort_by(|a, b| {
                b.eval
                    .score
                    .partial_cmp(&a.eval.score)
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
            let top = &population[0];
            iteration_best.push(top.eval.score);
            if best.as_ref().is_none_or(|b| top.eval.score > b.eval.score) {
                best = Some(top.clone());
            }

            let n_elite = cfg.elites.min(population.len());
            let elites = &population[..n_elite];
            let inv = T::one() / T::from_usize_lossy(n_elite);
            for k in 0..da {
                for t in 0..h {
                    let mu = elites.iter().fold(T::zero(), |a, e| a + e.actions[(t, k)]) * inv;
                    let var = elites.iter().fold(T::zero(), |a, e| {
                        let d = e.actions[(t, k)] - mu;
                        a + d * d
                    }) * inv;
                    mean[(t, k)] = momentum * mean[(t, k)] + (T::one() - momentum) * mu;
                    std[(t, k)] = momentum * std[(t, k)] + (T::one() - momentum) * var.sqrt();
                }
            }
            carried = population.into_iter().take(keep.min(n_elite)).collect();
        }

        let best = best.expect("at least one iteration");
        if best.eval.is_rejected() || !best.eval.score.finite() {
            return CandidatePlan {
                actions: self.zero_plan(),
                objective: T::neg_infinity(),
                constraint: T::infinity(),
                score: T::neg_infinity(),
                feasible: false,
                fallback: true,
                iteration_best,
            };
        }
        CandidatePlan {
            feasible: best.eval.constraint <= evaluator.threshold(),
            actions: best.actions,
            objective: best.eval.objective,
            constraint: best.eval.constraint,
            score: best.eval.score,
            fallback: false,
            iteration_best,
        }
    }
}

/// Shifts a plan one step forward, repeating the final row.
pub fn shift_plan<T: Real>(plan: &DMatrix<T>) -> DMatrix<T> {
    let h = plan.nrows();
    DMatrix::from_fn(h, plan.ncols(), |t, k| plan[((t + 1).min(h - 1), k)])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// `−Σ_t (a_t − target)²`, unconstrained.
    struct Quadratic {
        target: f64,
        calls: usize,
    }

    impl CandidateEvaluator<f64> for Quadratic {
        fn evaluate(&mut self, candidates: &[DMatrix<f64>]) -> Vec<Evaluation<f64>> {
            self.calls += candidates.len();
            candidates
                .iter()
                .map(|c| {
                    let v = -c.iter().map(|a| (a - self.target).powi(2)).sum::<f64>();
                    Evaluation {
                        objective: v,
                        constraint: f64::NEG_INFINITY,
                        score: v,
                    }
                })
                .collect()
        }

        fn threshold(&self) -> f64 {
            0.0
        }
    }

    fn small() -> PlannerConfig {
        PlannerConfig {
            horizon: 5,
            population: 64,
            elites: 8,
            iterations: 6,
            ..PlannerConfig::default()
        }
    }

    #[test]
    fn quadratic_optimum_is_found() {
        let icem = Icem::new(small(), vec![-2.0], vec![2.0]).unwrap();
        let mut q = Quadratic { target: 0.7, calls: 0 };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let plan = icem.optimize(&mut q, None, &mut rng);
        assert!((plan.actions[(0, 0)] - 0.7).abs() < 0.05, "{}", plan.actions);
        assert!(plan.feasible && !plan.fallback);
        for w in plan.iteration_best.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn optimum_outside_box_is_clipped() {
        let icem = Icem::new(small(), vec![-1.0], vec![1.0]).unwrap();
        let mut q = Quadratic { target: 5.0, calls: 0 };
        let plan = icem.optimize(&mut q, None, &mut ChaCha8Rng::seed_from_u64(0));
        assert!(plan.actions.iter().all(|a| (-1.0..=1.0).contains(a)));
        assert!((plan.actions[(0, 0)] - 1.0).abs() < 0.05);
    }

    #[test]
    fn population_equal_to_elites_returns_argmax() {
        let cfg = PlannerConfig {
            population: 10,
            elites: 10,
            iterations: 1,
            keep_elites: 0.0,
            ..small()
        };
        let icem = Icem::new(cfg, vec![-1.0], vec![1.0]).unwrap();
        let mut q = Quadratic { target: 0.0, calls: 0 };
        let plan = icem.optimize(&mut q, None, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(q.calls, 11);
        assert_eq!(plan.score, plan.iteration_best[0]);
    }

    #[test]
    fn seeded_runs_are_identical() {
        let icem = Icem::new(small(), vec![-2.0], vec![2.0]).unwrap();
        let a = icem.optimize(
            &mut Quadratic { target: 0.3, calls: 0 },
            None,
            &mut ChaCha8Rng::seed_from_u64(5),
        );
        let b = icem.optimize(
            &mut Quadratic { target: 0.3, calls: 0 },
            None,
            &mut ChaCha8Rng::seed_from_u64(5),
        );
        assert_eq!(a, b);
    }

    #[test]
    fn all_rejected_gives_zero_fallback() {
        struct Reject;
        impl CandidateEvaluator<f64> for Reject {
            fn evaluate(&mut self, c: &[DMatrix<f64>]) -> Vec<Evaluation<f64>> {
                vec![Evaluation::rejected(); c.len()]
            }
            fn threshold(&self) -> f64 {
                0.0
            }
        }
        let icem = Icem::new(small(), vec![0.5], vec![2.0]).unwrap();
        let plan = icem.optimize(&mut Reject, None, &mut ChaCha8Rng::seed_from_u64(1));
        assert!(plan.fallback && !plan.feasible);
        assert!(plan.actions.iter().all(|a| *a == 0.5));
    }

    #[test]
    fn config_validation() {
        assert!(PlannerConfig::default().validate().is_ok());
        let bad = PlannerConfig {
            elites: 300,
            ..PlannerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = PlannerConfig {
            momentum: 1.0,
            ..PlannerConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(PlannerConfig::default().kept_elites(), 10);
    }

    #[test]
    fn shift_repeats_last_row() {
        let m = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        assert_eq!(shift_plan(&m).as_slice(), &[2.0, 3.0, 3.0]);
    }
}
