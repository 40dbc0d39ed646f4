//! Numerical checks of the analytic claims behind the algorithm: model
//! calibration, the policy-distance cost bound and the
//! performance-difference identity.

mod calibration;
mod toy;

pub use calibration::{calibration_grid, check_calibration, Coverage};
pub use toy::{empirical_lipschitz, rollout, LinearPolicy, LipschitzConstants, PolicyPair, ToySystem};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seeding::{substream, Purpose};

/// One line of a check report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub estimate: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(name: impl Into<String>, estimate: f64, tolerance: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            estimate,
            tolerance,
            pass,
        }
    }
}

/// Name prefix of checks that are reported but never gate.
pub const NEGATIVE_CONTROL: &str = "negative-control/";

/// Monte-Carlo mean with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Self {
        let (mean, se) = crate::agent::mean_se(xs);
        Self { mean, se }
    }

    /// `self − other` for independent estimates.
    pub fn minus(self, other: Estimate) -> Estimate {
        Estimate {
            mean: self.mean - other.mean,
            se: self.se.hypot(other.se),
        }
    }
}

/// Summand of the policy distance for one action gap.
pub fn distance_term(gap: f64, c: &LipschitzConstants) -> f64 {
    if gap == 0.0 {
        return 0.0;
    }
    let horizon = c.horizon as f64;
    let dynamics = if c.sigma > 0.0 {
        (c.l_f * gap / c.sigma).min(1.0)
    } else {
        1.0
    };
    (c.l_c * gap).min(2.0 * c.c_max) + horizon * c.c_max * dynamics
}

/// `D(π, π′)`: expected sum of distance terms along trajectories of `π′`.
pub fn policy_distance_d(pair: &PolicyPair, toy: &ToySystem, constants: &LipschitzConstants, seed: u64) -> Estimate {
    let mut rng = substream(seed, Purpose::Check, 1);
    let samples: Vec<f64> = (0..pair.samples.max(1))
        .map(|_| {
            let states = rollout(toy, &pair.pi_prime, toy.s0, toy.horizon, &mut rng);
            states[..toy.horizon]
                .iter()
                .map(|&s| distance_term((pair.pi_prime.act(s) - pair.pi.act(s)).abs(), constants))
                .sum()
        })
        .collect();
    Estimate::from_samples(&samples)
}

/// Expected return of `policy` under `signal`, summed over the horizon.
pub fn expected_return<R: Rng + ?Sized>(
    toy: &ToySystem,
    policy: &LinearPolicy,
    samples: usize,
    signal: impl Fn(f64, f64) -> f64,
    rng: &mut R,
) -> Estimate {
    let xs: Vec<f64> = (0..samples.max(1))
        .map(|_| {
            let states = rollout(toy, policy, toy.s0, toy.horizon, rng);
            states[..toy.horizon].iter().map(|&s| signal(s, policy.act(s))).sum()
        })
        .collect();
    Estimate::from_samples(&xs)
}

/// Both sides of `J_c(π) − J_c(π′) ≤ D(π, π′)` and the verdict at three
/// combined standard errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CostComparison {
    pub cost_gap: Estimate,
    pub distance: Estimate,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn check_cost_comparison(
    pair: &PolicyPair,
    toy: &ToySystem,
    constants: &LipschitzConstants,
    seed: u64,
) -> CostComparison {
    let mut rng = substream(seed, Purpose::Check, 2);
    let cost = |s: f64, u: f64| toy.cost(s, u);
    let jc_pi = expected_return(toy, &pair.pi, pair.samples, cost, &mut rng);
    let jc_prime = expected_return(toy, &pair.pi_prime, pair.samples, cost, &mut rng);
    let cost_gap = jc_pi.minus(jc_prime);
    let distance = policy_distance_d(pair, toy, constants, seed);
    let tolerance = 3.0 * cost_gap.se.hypot(distance.se);
    CostComparison {
        cost_gap,
        distance,
        tolerance,
        pass: cost_gap.mean <= distance.mean + tolerance,
    }
}

/// Single-rollout estimate of `J_{r,k}(π, s)` for the remaining
/// `horizon − k` steps.
fn value_sample<R: Rng + ?Sized>(toy: &ToySystem, policy: &LinearPolicy, s: f64, k: usize, rng: &mut R) -> f64 {
    let steps = toy.horizon - k;
    let states = rollout(toy, policy, s, steps, rng);
    states[..steps].iter().map(|&x| toy.reward(x, policy.act(x))).sum()
}

/// `J_r(π′) − J_r(π)` against the expected advantage sum along `π′`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerformanceDifference {
    pub lhs: Estimate,
    pub rhs: Estimate,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn check_performance_difference(pair: &PolicyPair, toy: &ToySystem, seed: u64) -> PerformanceDifference {
    let mut rng = substream(seed, Purpose::Check, 3);
    let reward = |s: f64, u: f64| toy.reward(s, u);
    let j_prime = expected_return(toy, &pair.pi_prime, pair.samples, reward, &mut rng);
    let j_pi = expected_return(toy, &pair.pi, pair.samples, reward, &mut rng);
    let lhs = j_prime.minus(j_pi);
    let horizon = toy.horizon;
    let samples: Vec<f64> = (0..pair.samples.max(1))
        .map(|_| {
            let states = rollout(toy, &pair.pi_prime, toy.s0, horizon, &mut rng);
            (0..horizon)
                .map(|t| {
                    let s = states[t];
                    let next = states[t + 1];
                    let a = pair.pi_prime.act(s);
                    let ahead = if t + 1 < horizon {
                        value_sample(toy, &pair.pi, next, t + 1, &mut rng)
                    } else {
                        0.0
                    };
                    toy.reward(s, a) + ahead - value_sample(toy, &pair.pi, s, t, &mut rng)
                })
                .sum()
        })
        .collect();
    let rhs = Estimate::from_samples(&samples);
    let tolerance = 3.0 * lhs.se.hypot(rhs.se);
    PerformanceDifference {
        lhs,
        rhs,
        tolerance,
        pass: (lhs.mean - rhs.mean).abs() <= tolerance,
    }
}

/// Both sides of the identity on the noiseless system, computed by direct
/// recursion. Returns `(lhs, rhs)`.
pub fn exact_performance_difference(pair: &PolicyPair, toy: &ToySystem) -> (f64, f64) {
    let horizon = toy.horizon;
    let value = |policy: &LinearPolicy, mut s: f64, k: usize| {
        let mut total = 0.0;
        for _ in k..horizon {
            let u = policy.act(s);
            total += toy.reward(s, u);
            s = toy.mean(s, u);
        }
        total
    };
    let lhs = value(&pair.pi_prime, toy.s0, 0) - value(&pair.pi, toy.s0, 0);
    let mut rhs = 0.0;
    let mut s = toy.s0;
    for t in 0..horizon {
        let a = pair.pi_prime.act(s);
        let next = toy.mean(s, a);
        rhs += toy.reward(s, a) + value(&pair.pi, next, t + 1) - value(&pair.pi, s, t);
        s = next;
    }
    (lhs, rhs)
}

/// `count` random pairs with `samples` Monte-Carlo draws each.
pub fn random_pairs(toy: &ToySystem, count: usize, samples: usize, seed: u64) -> Vec<PolicyPair> {
    let mut rng = substream(seed, Purpose::Check, 4);
    (0..count)
        .map(|_| PolicyPair {
            pi: LinearPolicy::random(toy.action_bound, &mut rng),
            pi_prime: LinearPolicy::random(toy.action_bound, &mut rng),
            samples,
        })
        .collect()
}

/// The lemma suite: cost comparison on random pairs, the same with
/// zero Lipschitz constants (so `D = 0`) as a negative control, the performance-difference
/// identity by Monte Carlo and by exact recursion, and `D(π, π) = 0`.
pub fn lemma_suite(seed: u64, pairs: usize, samples: usize, identity_samples: usize) -> Vec<CheckReport> {
    let toy = ToySystem::default();
    let constants = toy.lipschitz();
    let mut out = Vec::new();
    for (i, pair) in random_pairs(&toy, pairs, samples, seed).iter().enumerate() {
        let valid = check_cost_comparison(pair, &toy, &constants, seed.wrapping_add(i as u64));
        out.push(CheckReport::new(
            format!("lemmas/cost-comparison/{i}"),
            valid.cost_gap.mean - valid.distance.mean,
            valid.tolerance,
            valid.pass,
        ));
        let zero = check_cost_comparison(pair, &toy, &constants.scaled(0.0), seed.wrapping_add(i as u64));
        out.push(CheckReport::new(
            format!("{NEGATIVE_CONTROL}lemmas/cost-comparison-zero-distance/{i}"),
            zero.cost_gap.mean - zero.distance.mean,
            zero.tolerance,
            zero.pass,
        ));
    }
    let pair = random_pairs(&toy, 1, identity_samples, seed ^ 0x5eed)[0];
    let mc_toy = ToySystem { horizon: 3, ..toy };
    let pd = check_performance_difference(&pair, &mc_toy, seed);
    out.push(CheckReport::new(
        "lemmas/performance-difference/monte-carlo",
        pd.lhs.mean - pd.rhs.mean,
        pd.tolerance,
        pd.pass,
    ));
    let exact_toy = ToySystem {
        sigma: 0.0,
        horizon: 2,
        ..toy
    };
    let (lhs, rhs) = exact_performance_difference(&pair, &exact_toy);
    out.push(CheckReport::new(
        "lemmas/performance-difference/exact",
        lhs - rhs,
        1e-12,
        (lhs - rhs).abs() <= 1e-12,
    ));
    let same = PolicyPair {
        pi_prime: pair.pi,
        ..pair
    };
    let d = policy_distance_d(&same, &toy, &constants, seed);
    out.push(CheckReport::new("lemmas/distance-self", d.mean, 0.0, d.mean == 0.0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(samples: usize) -> PolicyPair {
        PolicyPair {
            pi: LinearPolicy {
                gain: -0.8,
                offset: 0.1,
                bound: 1.0,
            },
            pi_prime: LinearPolicy {
                gain: 0.3,
                offset: -0.2,
                bound: 1.0,
            },
            samples,
        }
    }

    #[test]
    fn analytic_constants_dominate_grid_slopes() {
        let toy = ToySystem::default();
        let (lf, lc) = empirical_lipschitz(&toy, 5.0, 41);
        let c = toy.lipschitz();
        assert!(lf <= c.l_f + 1e-12 && lc <= c.l_c + 1e-12, "{lf} {lc}");
        assert!(lf > 0.99 * c.l_f && lc > 0.99 * c.l_c);
    }

    #[test]
    fn distance_to_itself_is_zero() {
        let toy = ToySystem::default();
        let p = pair(100);
        let same = PolicyPair { pi_prime: p.pi, ..p };
        assert_eq!(policy_distance_d(&same, &toy, &toy.lipschitz(), 1).mean, 0.0);
        let cmp = check_cost_comparison(&same, &toy, &toy.lipschitz(), 1);
        assert!(cmp.pass);
    }

    #[test]
    fn saturated_distance() {
        let toy = ToySystem::default();
        let far = PolicyPair {
            pi: LinearPolicy {
                gain: 0.0,
                offset: -1e6,
                bound: 1e9,
            },
            pi_prime: LinearPolicy {
                gain: 0.0,
                offset: 1e6,
                bound: 1e9,
            },
            samples: 20,
        };
        let c = toy.lipschitz();
        let d = policy_distance_d(&far, &toy, &c, 0);
        let t = toy.horizon as f64;
        let expected = t * (2.0 * c.c_max + t * c.c_max);
        assert!((d.mean - expected).abs() < 1e-9, "{} vs {expected}", d.mean);
        assert_eq!(d.se, 0.0);
    }

    #[test]
    fn noiseless_identity_is_exact() {
        let toy = ToySystem {
            sigma: 0.0,
            horizon: 2,
            ..ToySystem::default()
        };
        let (lhs, rhs) = exact_performance_difference(&pair(1), &toy);
        assert!((lhs - rhs).abs() <= 1e-12, "{lhs} {rhs}");
        assert!(lhs != 0.0);
    }

    #[test]
    fn identity_against_itself_is_zero() {
        let toy = ToySystem {
            horizon: 3,
            ..ToySystem::default()
        };
        let p = pair(2000);
        let same = PolicyPair { pi_prime: p.pi, ..p };
        let pd = check_performance_difference(&same, &toy, 4);
        assert!(pd.pass);
        let (lhs, rhs) = exact_performance_difference(&same, &ToySystem { sigma: 0.0, ..toy });
        assert_eq!(lhs, 0.0);
        assert!(rhs.abs() < 1e-12);
    }

    #[test]
    fn lemma_suite_gates_pass() {
        let reports = lemma_suite(11, 4, 2000, 4000);
        for r in &reports {
            if !r.name.starts_with(NEGATIVE_CONTROL) {
                assert!(r.pass, "{r:?}");
            }
        }
    }
}
