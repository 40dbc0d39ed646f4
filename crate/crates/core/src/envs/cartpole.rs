use super::{ControlAction, SystemState};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Cart with a hinged pole, `θ = 0` upright. `pole_length` is the distance
/// from the hinge to the pole's centre of mass.
#[derive(Clone, Debug, PartialEq)]
pub struct CartpoleParams<T: Real> {
    pub cart_mass: T,
    pub pole_mass: T,
    pub pole_length: T,
    pub gravity: T,
    pub force_bound: T,
    /// The cart stops dead at `|p| = max_position`.
    pub max_position: T,
}

impl<T: Real> Default for CartpoleParams<T> {
    fn default() -> Self {
        Self {
            cart_mass: T::one(),
            pole_mass: T::lit(0.1),
            pole_length: T::lit(0.5),
            gravity: T::lit(9.81),
            force_bound: T::lit(10.0),
            max_position: T::lit(10.0),
        }
    }
}

impl<T: Real> CartpoleParams<T> {
    pub(super) fn validate(&self) -> Result<()> {
        let positive = [
            self.cart_mass,
            self.pole_mass,
            self.pole_length,
            self.gravity,
            self.force_bound,
            self.max_position,
        ];
        if positive.iter().any(|v| !(*v > T::zero())) {
            return Err(Error::Config("cartpole parameters must be positive".into()));
        }
        Ok(())
    }

    fn accelerations(&self, s: T, c: T, om: T, force: T) -> (T, T) {
        let total = self.cart_mass + self.pole_mass;
        let ml = self.pole_mass * self.pole_length;
        let temp = (force + ml * om * om * s) / total;
        let denom = self.pole_length * (T::lit(4.0 / 3.0) - self.pole_mass * c * c / total);
        let theta_acc = (self.gravity * s - c * temp) / denom;
        let x_acc = temp - ml * theta_acc * c / total;
        (x_acc, theta_acc)
    }

    pub(super) fn step(
        &self,
        state: &SystemState<T>,
        action: &ControlAction<T>,
        dt: T,
        substeps: usize,
    ) -> SystemState<T> {
        let v = state.as_slice();
        let (mut p, mut vel, mut c, mut s, mut om) = (v[0], v[1], v[2], v[3], v[4]);
        let force = action.as_slice()[0];
        let h = dt / T::from_usize_lossy(substeps);
        for _ in 0..substeps {
            let (x_acc, th_acc) = self.accelerations(s, c, om, force);
            vel += h * x_acc;
            p += h * vel;
            om += h * th_acc;
            let (dc, ds) = ((h * om).cos(), (h * om).sin());
            let nc = c * dc - s * ds;
            let ns = s * dc + c * ds;
            c = nc;
            s = ns;
            if p.abs() >= self.max_position {
                p = p.clamp(-self.max_position, self.max_position);
                vel = T::zero();
            }
        }
        SystemState::from_slice(&[p, vel, c, s, om])
    }

    pub(super) fn enforce_bounds(&self, state: &mut SystemState<T>) {
        let p = state.0[0];
        if p.abs() > self.max_position {
            state.0[0] = p.clamp(-self.max_position, self.max_position);
            state.0[1] = T::zero();
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::envs::{ControlAction, EnvSpec};

    #[test]
    fn pushing_right_moves_cart_right_and_tips_pole() {
        let spec = EnvSpec::<f64>::cartpole();
        let s = spec.rest_state();
        let next = spec.mean_step(&s, &ControlAction::from_slice(&[10.0])).unwrap();
        let v = next.as_slice();
        assert!(v[1] > 0.0 && v[0] > 0.0);
        // Hanging pole lags behind the cart: the angle moves away from π
        // in the direction opposite to the upright-frame convention.
        assert!(v[4] != 0.0);
    }

    #[test]
    fn wall_stops_cart() {
        let mut spec = EnvSpec::<f64>::cartpole();
        if let crate::envs::Physics::Cartpole(p) = &mut spec.physics {
            p.max_position = 0.2;
        }
        let mut s = spec.rest_state();
        for _ in 0..100 {
            s = spec.mean_step(&s, &ControlAction::from_slice(&[10.0])).unwrap();
        }
        assert!(s.as_slice()[0] <= 0.2 + 1e-12);
        assert!(spec.cost_max() < 1e-12);
    }
}
