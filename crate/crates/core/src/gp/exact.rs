//! Exact GP regression with a shared kernel across output dimensions.
//!
//! With `A = K_n + σ² I = L Lᵀ`:
//!
//! `μ_j(x) = k_n(x)ᵀ A⁻¹ y_j`
//!
//! `σ²(x) = k(x, x) − ‖L⁻¹ k_n(x)‖²`
//!
//! The factor inverse `L⁻¹` is formed once per fit so that batched variance
//! queries reduce to one matrix product.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::kernel::KernelParams;
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Diagonal jitter tried in order when the Gram matrix fails to factor.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-8, 1e-6, 1e-4];

/// Floor applied to reported posterior standard deviations.
pub const STD_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct ExactGp<T: Real> {
    kernel: KernelParams<T>,
    inputs: DMatrix<T>,
    scaled_inputs: DMatrix<T>,
    targets: DMatrix<T>,
    noise_var: T,
    jitter: T,
    factor: DMatrix<T>,
    factor_inv: DMatrix<T>,
    alpha: DMatrix<T>,
}

impl<T: Real> ExactGp<T> {
    /// Conditions the prior on `inputs` (`n × d`) and `targets` (`n × m`).
    pub fn fit(kernel: KernelParams<T>, inputs: DMatrix<T>, targets: DMatrix<T>, noise_var: T) -> Result<Self> {
        kernel.validate()?;
        if !(noise_var > T::zero()) || !noise_var.finite() {
            return Err(Error::InvalidInput("noise variance must be positive".into()));
        }
        let n = inputs.nrows();
        if targets.nrows() != n {
            return Err(Error::Dimension {
                what: "targets rows",
                expected: n,
                got: targets.nrows(),
            });
        }
        if n > 0 && inputs.ncols() != kernel.input_dim() {
            return Err(Error::Dimension {
                what: "input columns",
                expected: kernel.input_dim(),
                got: inputs.ncols(),
            });
        }
        if inputs.iter().chain(targets.iter()).any(|v| !v.finite()) {
            return Err(Error::InvalidInput("non-finite training data".into()));
        }

        let gram = kernel.gram(&inputs);
        let mut chosen = None;
        for &jit in JITTER_LADDER.iter() {
            let jitter = T::lit(jit);
            let mut a = gram.clone();
            for i in 0..n {
                a[(i, i)] += noise_var + jitter;
            }
            if let Some(chol) = Cholesky::<T, Dyn>::new(a) {
                chosen = Some((chol, jitter));
                break;
            }
            log::debug!("gram factorization failed at jitter {jit:e}; escalating");
        }
        let (chol, jitter) = chosen.ok_or(Error::Factorization {
            max_jitter: JITTER_LADDER[JITTER_LADDER.len() - 1],
        })?;

        let factor = chol.l();
        let factor_inv = factor
            .solve_lower_triangular(&DMatrix::identity(n, n))
            .ok_or(Error::Factorization {
                max_jitter: jit_f64(jitter),
            })?;
        let alpha = chol.solve(&targets);
        let scaled_inputs = kernel.scale_inputs(&inputs);
        Ok(Self {
            kernel,
            inputs,
            scaled_inputs,
            targets,
            noise_var,
            jitter,
            factor,
            factor_inv,
            alpha,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kernel(&self) -> &KernelParams<T> {
        &self.kernel
    }

    pub fn inputs(&self) -> &DMatrix<T> {
        &self.inputs
    }

    pub fn targets(&self) -> &DMatrix<T> {
        &self.targets
    }

    pub fn noise_var(&self) -> T {
        self.noise_var
    }

    /// Jitter that had to be added on top of the noise variance.
    pub fn jitter(&self) -> T {
        self.jitter
    }

    /// Lower Cholesky factor of `K_n + (σ² + jitter) I`.
    pub fn gram_factor(&self) -> &DMatrix<T> {
        &self.factor
    }

    /// `(K_n + σ² I)⁻¹ Y`, one column per output dimension.
    pub fn solved_weights(&self) -> &DMatrix<T> {
        &self.alpha
    }

    pub fn output_dim(&self) -> usize {
        self.targets.ncols()
    }

    fn check_query(&self, z: &[T]) -> Result<()> {
        if z.len() != self.kernel.input_dim() {
            return Err(Error::Dimension {
                what: "query",
                expected: self.kernel.input_dim(),
                got: z.len(),
            });
        }
        if z.iter().any(|v| !v.finite()) {
            return Err(Error::InvalidInput("non-finite query".into()));
        }
        Ok(())
    }

    /// Posterior mean per output dimension and the shared posterior variance
    /// (before flooring).
    pub fn predict(&self, z: &[T]) -> Result<(DVector<T>, T)> {
        self.check_query(z)?;
        let q = DMatrix::from_row_slice(1, z.len(), z);
        let (mean, var) = self.predict_batch(&q);
        Ok((mean.row(0).transpose(), var[0]))
    }

    /// Batched posterior for the rows of `queries` (`m × d`). Returns the
    /// `m × outputs` mean matrix and the `m` shared variances. Inputs are
    /// assumed finite; use [`ExactGp::predict`] for checked single queries.
    pub fn predict_batch(&self, queries: &DMatrix<T>) -> (DMatrix<T>, DVector<T>) {
        let m = queries.nrows();
        let prior = self.kernel.prior_variance();
        if self.is_empty() {
            return (
                DMatrix::zeros(m, self.output_dim().max(self.targets.ncols())),
                DVector::from_element(m, prior),
            );
        }
        let cross = self
            .kernel
            .cross_scaled(&self.scaled_inputs, &self.kernel.scale_inputs(queries));
        let mean = cross.tr_mul(&self.alpha);
        let whitened = lower_triangular_mul(&self.factor_inv, &cross);
        let var = DVector::from_iterator(
            m,
            whitened.column_iter().map(|col| {
                let reduction = col.norm_squared();
                (prior - reduction).max(T::zero())
            }),
        );
        (mean, var)
    }

    /// `½ log det(I + σ⁻² K_n)` for the factored noise level.
    pub fn information_gain(&self) -> T {
        let n = self.len();
        if n == 0 {
            return T::zero();
        }
        let s2 = self.noise_var + self.jitter;
        let log_det: T = self.factor.diagonal().iter().fold(T::zero(), |acc, d| acc + d.ln());
        (log_det - T::lit(0.5) * T::from_usize_lossy(n) * s2.ln()).max(T::zero())
    }
}

/// `L · B` for lower-triangular `L`, skipping the zero upper blocks.
pub(crate) fn lower_triangular_mul<T: Real>(l: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    const BLOCK: usize = 96;
    let n = l.nrows();
    let mut out = DMatrix::zeros(n, b.ncols());
    let mut start = 0;
    while start < n {
        let len = BLOCK.min(n - start);
        let width = start + len;
        out.rows_mut(start, len).gemm(
            T::one(),
            &l.view((start, 0), (len, width)),
            &b.rows(0, width),
            T::zero(),
        );
        start = width;
    }
    out
}

fn jit_f64<T: Real>(x: T) -> f64 {
    x.as_f64()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gp::KernelKind;

    fn toy(n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
        let x = DMatrix::from_fn(n, 2, |i, j| ((i * 7 + j * 3) % 11) as f64 / 5.0 - 1.0);
        let y = DMatrix::from_fn(n, 1, |i, _| (x[(i, 0)] * 2.0).sin() + x[(i, 1)]);
        (x, y)
    }

    #[test]
    fn blocked_triangular_product_matches_dense() {
        for n in [1, 5, 96, 97, 250] {
            let l = DMatrix::<f64>::from_fn(n, n, |i, j| {
                if j <= i {
                    ((i * 31 + j * 17) % 13) as f64 - 6.0
                } else {
                    0.0
                }
            });
            let b = DMatrix::<f64>::from_fn(n, 7, |i, j| ((i * 5 + j * 3) % 11) as f64 * 0.5 - 2.0);
            let fast = lower_triangular_mul(&l, &b);
            assert_eq!(fast, &l * &b);
        }
    }

    #[test]
    fn empty_model_is_prior() {
        let k = KernelParams::<f64>::isotropic(KernelKind::SquaredExponential, 2, 1.0, 1.3);
        let gp = ExactGp::<f64>::fit(k, DMatrix::zeros(0, 2), DMatrix::zeros(0, 3), 0.01).unwrap();
        let (mean, var) = gp.predict(&[0.4, -2.0]).unwrap();
        assert_eq!(mean.len(), 3);
        assert!(mean.iter().all(|m| *m == 0.0));
        assert!((var - 1.69).abs() < 1e-14);
        assert_eq!(gp.information_gain(), 0.0);
    }

    #[test]
    fn factor_reproduces_gram() {
        let (x, y) = toy(30);
        let k = KernelParams::<f64>::isotropic(KernelKind::Matern52, 2, 0.8, 1.0);
        let gp = ExactGp::<f64>::fit(k.clone(), x.clone(), y, 1e-3).unwrap();
        let mut a = k.gram(&x);
        for i in 0..30 {
            a[(i, i)] += 1e-3 + gp.jitter();
        }
        let l = gp.gram_factor();
        let rel = (l * l.transpose() - &a).norm() / a.norm();
        assert!(rel < 1e-8, "{rel}");
    }

    #[test]
    fn duplicate_points_need_jitter_only_when_noise_is_tiny() {
        let x = DMatrix::from_row_slice(3, 1, &[0.5, 0.5, 0.5]);
        let y = DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 1.0]);
        let k = KernelParams::<f64>::isotropic(KernelKind::SquaredExponential, 1, 1.0, 1.0);
        let gp = ExactGp::<f64>::fit(k, x, y, 1e-20).unwrap();
        assert!(gp.jitter() > 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        let k = KernelParams::<f64>::isotropic(KernelKind::SquaredExponential, 1, 1.0, 1.0);
        let x = DMatrix::from_row_slice(1, 1, &[f64::NAN]);
        let y = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert!(ExactGp::<f64>::fit(k.clone(), x, y.clone(), 0.1).is_err());
        let x = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert!(ExactGp::<f64>::fit(k.clone(), x.clone(), y.clone(), 0.0).is_err());
        let gp = ExactGp::<f64>::fit(k, x, y, 0.1).unwrap();
        assert!(gp.predict(&[f64::INFINITY]).is_err());
        assert!(gp.predict(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn interpolates_with_tiny_noise() {
        let k = KernelParams::<f64>::isotropic(KernelKind::SquaredExponential, 1, 1.0, 1.0);
        let x = DMatrix::from_row_slice(1, 1, &[0.3]);
        let y = DMatrix::from_row_slice(1, 1, &[0.7]);
        let gp = ExactGp::<f64>::fit(k, x, y, 1e-10).unwrap();
        let (mean, var) = gp.predict(&[0.3]).unwrap();
        assert!((mean[0] - 0.7).abs() < 1e-8);
        assert!(var < 1e-8);
    }

    #[test]
    fn single_point_information_gain() {
        let k = KernelParams::<f64>::isotropic(KernelKind::SquaredExponential, 1, 1.0, 2.0);
        let x = DMatrix::from_row_slice(1, 1, &[0.0]);
        let y = DMatrix::from_row_slice(1, 1, &[1.0]);
        let gp = ExactGp::<f64>::fit(k, x, y, 0.25).unwrap();
        let expected = 0.5 * (1.0f64 + 4.0 / 0.25).ln();
        assert!((gp.information_gain() - expected).abs() < 1e-12);
    }
}
