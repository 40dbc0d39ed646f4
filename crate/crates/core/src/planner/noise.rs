use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

/// Unit-variance Gaussian sequences with power spectrum `∝ 1/f^β`.
///
/// `β = 0` is white noise; larger exponents put more power into low
/// frequencies, which yields smoother action sequences.
pub struct ColoredNoise {
    len: usize,
    exponent: f64,
    scale: Vec<f64>,
    sigma: f64,
    fft: Option<Arc<dyn Fft<f64>>>,
}

impl std::fmt::Debug for ColoredNoise {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ColoredNoise")
            .field("len", &self.len)
            .field("exponent", &self.exponent)
            .finish()
    }
}

impl ColoredNoise {
    pub fn new(exponent: f64, len: usize) -> Self {
        if len < 2 || exponent == 0.0 {
            return Self {
                len,
                exponent,
                scale: Vec::new(),
                sigma: 1.0,
                fft: None,
            };
        }
        let half = len / 2 + 1;
        // rfft frequencies k / len; the DC bin borrows the lowest nonzero one.
        let mut scale: Vec<f64> = (0..half).map(|k| k as f64 / len as f64).collect();
        scale[0] = scale[1];
        for s in scale.iter_mut() {
            *s = s.powf(-exponent / 2.0);
        }
        let mut w: Vec<f64> = scale[1..].to_vec();
        if let Some(last) = w.last_mut() {
            *last *= (1 + len % 2) as f64 / 2.0;
        }
        let sigma = 2.0 * w.iter().map(|x| x * x).sum::<f64>().sqrt() / len as f64;
        let fft = FftPlanner::new().plan_fft_inverse(len);
        Self {
            len,
            exponent,
            scale,
            sigma,
            fft: Some(fft),
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let Some(fft) = &self.fft else {
            return (0..self.len).map(|_| rng.sample(StandardNormal)).collect();
        };
        let n = self.len;
        let half = self.scale.len();
        let mut coeffs: Vec<Complex<f64>> = self
            .scale
            .iter()
            .map(|s| {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                Complex::new(re * s, im * s)
            })
            .collect();
        coeffs[0].im = 0.0;
        coeffs[0].re *= std::f64::consts::SQRT_2;
        if n.is_multiple_of(2) {
            coeffs[half - 1].im = 0.0;
            coeffs[half - 1].re *= std::f64::consts::SQRT_2;
        }
        let mut spectrum = vec![Complex::new(0.0, 0.0); n];
        for (k, c) in coeffs.iter().enumerate() {
            spectrum[k] = *c;
            if k > 0 && n - k >= half {
                spectrum[n - k] = c.conj();
            }
        }
        fft.process(&mut spectrum);
        spectrum.iter().map(|c| c.re / n as f64 / self.sigma).collect()
    }
}
