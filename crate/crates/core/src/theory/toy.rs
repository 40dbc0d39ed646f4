use rand::Rng;
use rand_distr::StandardNormal;

/// Scalar linear-Gaussian system `s' = a s + b u + w`, `w ~ N(0, σ²)`,
/// with reward `−(s² + ρ u²)` and bounded cost
/// `c(s, u) = min{C_max, max{|s| − s_safe, 0} + κ |u|}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ToySystem {
    pub a: f64,
    pub b: f64,
    pub sigma: f64,
    pub horizon: usize,
    pub s0: f64,
    pub action_bound: f64,
    pub reward_weight: f64,
    pub safe_radius: f64,
    pub cost_slope: f64,
    pub cost_max: f64,
}

impl Default for ToySystem {
    fn default() -> Self {
        Self {
            a: 0.9,
            b: 0.5,
            sigma: 0.2,
            horizon: 5,
            s0: 0.5,
            action_bound: 1.0,
            reward_weight: 0.1,
            safe_radius: 0.6,
            cost_slope: 0.5,
            cost_max: 1.0,
        }
    }
}

impl ToySystem {
    pub fn mean(&self, s: f64, u: f64) -> f64 {
        self.a * s + self.b * u
    }

    pub fn step<R: Rng + ?Sized>(&self, s: f64, u: f64, rng: &mut R) -> f64 {
        let w: f64 = rng.sample(StandardNormal);
        self.mean(s, u) + self.sigma * w
    }

    pub fn reward(&self, s: f64, u: f64) -> f64 {
        -(s * s + self.reward_weight * u * u)
    }

    pub fn cost(&self, s: f64, u: f64) -> f64 {
        ((s.abs() - self.safe_radius).max(0.0) + self.cost_slope * u.abs()).min(self.cost_max)
    }

    /// Lipschitz constants of the mean dynamics and of the cost with
    /// respect to the action.
    pub fn lipschitz(&self) -> LipschitzConstants {
        LipschitzConstants {
            l_f: self.b.abs(),
            l_c: self.cost_slope.abs(),
            c_max: self.cost_max,
            sigma: self.sigma,
            horizon: self.horizon,
        }
    }
}

/// Constants entering the policy distance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LipschitzConstants {
    pub l_f: f64,
    pub l_c: f64,
    pub c_max: f64,
    pub sigma: f64,
    pub horizon: usize,
}

impl LipschitzConstants {
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            l_f: self.l_f * factor,
            l_c: self.l_c * factor,
            ..self
        }
    }
}

/// Largest finite-difference slopes of `f` and `c` in the action over a
/// grid of states and action pairs. Valid constants must dominate these.
pub fn empirical_lipschitz(toy: &ToySystem, state_range: f64, points: usize) -> (f64, f64) {
    let grid = |lo: f64, hi: f64| (0..points).map(move |i| lo + (hi - lo) * i as f64 / (points - 1) as f64);
    let ub = toy.action_bound;
    let (mut lf, mut lc) = (0.0f64, 0.0f64);
    for s in grid(-state_range, state_range) {
        for u in grid(-ub, ub) {
            for v in grid(-ub, ub) {
                let du = (u - v).abs();
                if du == 0.0 {
                    continue;
                }
                lf = lf.max((toy.mean(s, u) - toy.mean(s, v)).abs() / du);
                lc = lc.max((toy.cost(s, u) - toy.cost(s, v)).abs() / du);
            }
        }
    }
    (lf, lc)
}

/// `u = clip(k s + m, −bound, bound)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinearPolicy {
    pub gain: f64,
    pub offset: f64,
    pub bound: f64,
}

impl LinearPolicy {
    pub fn act(&self, s: f64) -> f64 {
        (self.gain * s + self.offset).clamp(-self.bound, self.bound)
    }

    pub fn random<R: Rng + ?Sized>(bound: f64, rng: &mut R) -> Self {
        Self {
            gain: rng.random_range(-1.5..1.5),
            offset: rng.random_range(-0.5 * bound..0.5 * bound),
            bound,
        }
    }
}

/// `(π, π′)` plus the Monte-Carlo sample count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PolicyPair {
    pub pi: LinearPolicy,
    pub pi_prime: LinearPolicy,
    pub samples: usize,
}

/// States visited by one rollout, `T + 1` entries.
pub fn rollout<R: Rng + ?Sized>(
    toy: &ToySystem,
    policy: &LinearPolicy,
    s0: f64,
    steps: usize,
    rng: &mut R,
) -> Vec<f64> {
    let mut states = Vec::with_capacity(steps + 1);
    let mut s = s0;
    states.push(s);
    for _ in 0..steps {
        s = toy.step(s, policy.act(s), rng);
        states.push(s);
    }
    states
}
