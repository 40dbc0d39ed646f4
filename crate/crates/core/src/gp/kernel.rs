use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    #[default]
    SquaredExponential,
    Matern52,
}

/// Stationary ARD kernel with `k(z, z) = σ_0²`.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelParams<T: Real> {
    pub kind: KernelKind,
    pub lengthscales: Vec<T>,
    pub signal_std: T,
}

impl<T: Real> KernelParams<T> {
    pub fn new(kind: KernelKind, lengthscales: Vec<T>, signal_std: T) -> Result<Self> {
        let k = Self {
            kind,
            lengthscales,
            signal_std,
        };
        k.validate()?;
        Ok(k)
    }

    /// Unit lengthscales and unit signal std over `dim` inputs.
    pub fn isotropic(kind: KernelKind, dim: usize, lengthscale: T, signal_std: T) -> Self {
        Self {
            kind,
            lengthscales: vec![lengthscale; dim],
            signal_std,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lengthscales.is_empty() {
            return Err(Error::Config("kernel needs at least one lengthscale".into()));
        }
        if self.lengthscales.iter().any(|l| !(*l > T::zero()) || !l.finite()) {
            return Err(Error::Config("lengthscales must be positive".into()));
        }
        if !(self.signal_std > T::zero()) || !self.signal_std.finite() {
            return Err(Error::Config("signal std must be positive".into()));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// `σ_0²`.
    pub fn prior_variance(&self) -> T {
        self.signal_std * self.signal_std
    }

    #[inline]
    fn eval_sq_dist(&self, r2: T) -> T {
        let var = self.prior_variance();
        match self.kind {
            KernelKind::SquaredExponential => var * (-T::lit(0.5) * r2).exp(),
            KernelKind::Matern52 => {
                let r = r2.max(T::zero()).sqrt();
                let s5r = T::lit(5f64.sqrt()) * r;
                var * (T::one() + s5r + T::lit(5.0 / 3.0) * r2) * (-s5r).exp()
            }
        }
    }

    /// Scaled squared distance `Σ ((a_i − b_i)/ℓ_i)²`.
    #[inline]
    fn sq_dist(&self, a: &[T], b: &[T]) -> T {
        let mut acc = T::zero();
        for ((x, y), l) in a.iter().zip(b).zip(&self.lengthscales) {
            let d = (*x - *y) / *l;
            acc += d * d;
        }
        acc
    }

    pub fn eval(&self, a: &[T], b: &[T]) -> T {
        self.eval_sq_dist(self.sq_dist(a, b))
    }

    /// Gram matrix of the rows of `x`.
    pub fn gram(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let n = x.nrows();
        let rows = row_vectors(x);
        let mut k = DMatrix::zeros(n, n);
        for i in 0..n {
            k[(i, i)] = self.prior_variance();
            for j in 0..i {
                let v = self.eval(&rows[i], &rows[j]);
                k[(i, j)] = v;
                k[(j, i)] = v;
            }
        }
        k
    }

    /// Inputs divided by the lengthscales, column by column.
    pub fn scale_inputs(&self, x: &DMatrix<T>) -> DMatrix<T> {
        let mut out = x.clone();
        for (mut col, l) in out.column_iter_mut().zip(&self.lengthscales) {
            col /= *l;
        }
        out
    }

    /// `K[i, j] = k(x_i, q_j)` from inputs already passed through
    /// [`KernelParams::scale_inputs`]: training points down the rows,
    /// queries across the columns.
    pub fn cross_scaled(&self, x_scaled: &DMatrix<T>, q_scaled: &DMatrix<T>) -> DMatrix<T> {
        let n = x_scaled.nrows();
        let m = q_scaled.nrows();
        let mut k = DMatrix::zeros(n, m);
        if n == 0 {
            return k;
        }
        let xs = x_scaled.as_slice();
        for (j, col) in k.as_mut_slice().chunks_exact_mut(n).enumerate() {
            for (d, xd) in xs.chunks_exact(n).enumerate() {
                let q = q_scaled[(j, d)];
                for (acc, x) in col.iter_mut().zip(xd) {
                    let diff = *x - q;
                    *acc += diff * diff;
                }
            }
            for v in col.iter_mut() {
                *v = self.eval_sq_dist(*v);
            }
        }
        k
    }

    /// `K[i, j] = k(x_i, q_j)` for raw inputs.
    pub fn cross_transposed(&self, x: &DMatrix<T>, queries: &DMatrix<T>) -> DMatrix<T> {
        self.cross_scaled(&self.scale_inputs(x), &self.scale_inputs(queries))
    }
}

pub(crate) fn row_vectors<T: Real>(x: &DMatrix<T>) -> Vec<Vec<T>> {
    (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
}
