//! Scalar abstraction shared by the numerical core.
//!
//! Everything that does arithmetic (simulators, GP regression, the planner,
//! the lemma checks) is generic over [`Real`]. `f64` is the working type;
//! `f32` is supported for fast, lower-precision planning experiments.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the core: `f32` or `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Converts an `f64` literal. Never fails for the IEEE types.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal must be representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::lit(n as f64)
    }

    #[inline]
    fn infinity() -> Self {
        Self::lit(f64::INFINITY)
    }

    #[inline]
    fn neg_infinity() -> Self {
        Self::lit(f64::NEG_INFINITY)
    }

    #[inline]
    fn finite(self) -> bool {
        self.as_f64().is_finite()
    }

    /// Largest finite value of the type, as used for saturation.
    fn max_finite() -> Self;
}

impl Real for f64 {
    fn max_finite() -> Self {
        f64::MAX
    }
}

impl Real for f32 {
    fn max_finite() -> Self {
        f32::MAX
    }
}

/// Wraps an angle to `[-pi, pi)`.
pub fn wrap_angle<T: Real>(angle: T) -> T {
    let two_pi = T::two_pi();
    let shifted = angle + T::pi();
    let wrapped = shifted - two_pi * (shifted / two_pi).floor();
    wrapped - T::pi()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        for k in -20..20 {
            let a = 0.3 + k as f64 * std::f64::consts::TAU;
            assert!((wrap_angle(a) - 0.3).abs() < 1e-9);
        }
        let w = wrap_angle(std::f64::consts::PI);
        assert!((w + std::f64::consts::PI).abs() < 1e-12);
        assert!((wrap_angle(1.0f32) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn literal_roundtrip() {
        assert_eq!(<f32 as Real>::lit(0.5), 0.5f32);
        assert!(<f64 as Real>::infinity().is_infinite());
        assert!(!<f64 as Real>::neg_infinity().finite());
    }
}
