use super::{ControlAction, SystemState};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Point-mass pendulum, `θ = 0` upright:
/// `m l² θ̈ = m g l sin θ + u − b θ̇`.
#[derive(Clone, Debug, PartialEq)]
pub struct PendulumParams<T: Real> {
    pub mass: T,
    pub length: T,
    pub gravity: T,
    pub damping: T,
    pub torque_bound: T,
    /// Angular speed is saturated at this magnitude.
    pub max_speed: T,
}

impl<T: Real> Default for PendulumParams<T> {
    fn default() -> Self {
        Self {
            mass: T::one(),
            length: T::one(),
            gravity: T::lit(9.81),
            damping: T::zero(),
            torque_bound: T::lit(2.0),
            max_speed: T::lit(12.0),
        }
    }
}

impl<T: Real> PendulumParams<T> {
    pub(super) fn validate(&self) -> Result<()> {
        let positive = [self.mass, self.length, self.gravity, self.torque_bound, self.max_speed];
        if positive.iter().any(|v| !(*v > T::zero())) || !(self.damping >= T::zero()) {
            return Err(Error::Config(
                "pendulum parameters must be positive (damping >= 0)".into(),
            ));
        }
        Ok(())
    }

    /// Kick-drift-kick leapfrog over `substeps` sub-intervals, a symmetric
    /// pair of semi-implicit Euler half steps. The angle is advanced by
    /// rotating the `(cos, sin)` pair, so a state with `sin θ = 0` and
    /// `ω = 0` is reproduced exactly.
    pub(super) fn step(
        &self,
        state: &SystemState<T>,
        action: &ControlAction<T>,
        dt: T,
        substeps: usize,
    ) -> SystemState<T> {
        let v = state.as_slice();
        let (mut c, mut s, mut om) = (v[0], v[1], v[2]);
        let u = action.as_slice()[0];
        let h = dt / T::from_usize_lossy(substeps);
        let half = h / T::lit(2.0);
        let inertia = self.mass * self.length * self.length;
        let acc = |s: T, om: T| self.gravity / self.length * s + (u - self.damping * om) / inertia;
        for _ in 0..substeps {
            om += half * acc(s, om);
            let (dc, ds) = ((h * om).cos(), (h * om).sin());
            let nc = c * dc - s * ds;
            let ns = s * dc + c * ds;
            c = nc;
            s = ns;
            om += half * acc(s, om);
        }
        om = om.clamp(-self.max_speed, self.max_speed);
        SystemState::from_slice(&[c, s, om])
    }

    pub(super) fn enforce_bounds(&self, state: &mut SystemState<T>) {
        let om = &mut state.0[2];
        *om = om.clamp(-self.max_speed, self.max_speed);
    }

    pub(super) fn energy(&self, state: &SystemState<T>) -> T {
        let v = state.as_slice();
        let (c, om) = (v[0], v[2]);
        T::lit(0.5) * self.mass * self.length * self.length * om * om + self.mass * self.gravity * self.length * c
    }
}

#[cfg(test)]
mod tests {
    use crate::envs::{ControlAction, EnvSpec};

    /// RK4 on `(θ, ω)` with a tiny step, independent of the production
    /// integrator and of the `(cos, sin)` rotation trick.
    fn rk4_reference(theta: f64, omega: f64, u: f64, dt: f64) -> (f64, f64) {
        let f = |th: f64, om: f64| (om, 9.81 * th.sin() + u);
        let n = 10_000;
        let h = dt / n as f64;
        let (mut th, mut om) = (theta, omega);
        for _ in 0..n {
            let (k1a, k1b) = f(th, om);
            let (k2a, k2b) = f(th + 0.5 * h * k1a, om + 0.5 * h * k1b);
            let (k3a, k3b) = f(th + 0.5 * h * k2a, om + 0.5 * h * k2b);
            let (k4a, k4b) = f(th + h * k3a, om + h * k3b);
            th += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
            om += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
        }
        (th, om)
    }

    #[test]
    fn gravity_pulls_horizontal_pendulum_down() {
        let spec = EnvSpec::<f64>::pendulum();
        let zero = ControlAction::from_slice(&[0.0]);
        // θ = π/2: gravity accelerates towards θ = π, so ω grows.
        let s = spec.state_from_physical(&[std::f64::consts::FRAC_PI_2, 0.0]).unwrap();
        let next = spec.true_step(&s, &zero, &[0.0; 3]).unwrap();
        let (_, om_ref) = rk4_reference(std::f64::consts::FRAC_PI_2, 0.0, 0.0, 0.05);
        assert!(next.as_slice()[2] > 0.0);
        assert!(
            (next.as_slice()[2] - om_ref).abs() < 1e-3,
            "{} vs {om_ref}",
            next.as_slice()[2]
        );
        // Mirror image: θ = -π/2 makes ω decrease.
        let s = spec.state_from_physical(&[-std::f64::consts::FRAC_PI_2, 0.0]).unwrap();
        let next = spec.true_step(&s, &zero, &[0.0; 3]).unwrap();
        assert!(next.as_slice()[2] < 0.0);
    }

    #[test]
    fn substeps_converge_to_reference() {
        let spec = EnvSpec::<f64>::pendulum();
        let s = spec.state_from_physical(&[2.0, -1.5]).unwrap();
        let act = ControlAction::from_slice(&[1.2]);
        let next = spec.mean_step(&s, &act).unwrap();
        let (th, om) = rk4_reference(2.0, -1.5, 1.2, 0.05);
        assert!((spec.angle(&next) - th).abs() < 1e-4);
        assert!((next.as_slice()[2] - om).abs() < 1e-4);
    }

    #[test]
    fn energy_is_nonincreasing_without_input() {
        let mut spec = EnvSpec::<f64>::pendulum();
        spec.noise_std = 0.0;
        let zero = ControlAction::from_slice(&[0.0]);
        for &(th, om) in &[(2.5, 0.0), (1.0, 2.0), (3.0, -4.0), (0.01, 7.0)] {
            let mut s = spec.state_from_physical(&[th, om]).unwrap();
            let e0 = spec.pendulum_energy(&s).unwrap();
            let mut prev = e0;
            for _ in 0..400 {
                s = spec.true_step(&s, &zero, &[0.0; 3]).unwrap();
                let e = spec.pendulum_energy(&s).unwrap();
                assert!(e <= prev + 1e-3, "{e} > {prev}");
                prev = e;
            }
            assert!((prev - e0).abs() < 1e-2);
        }
    }
}
