use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// ARD-RBF kernel hyperparameters plus the Gaussian observation noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelHyperparams {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl KernelHyperparams {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        let h = Self { lengthscales, signal_variance, noise_variance };
        h.validate()?;
        Ok(h)
    }

    /// Isotropic starting point used before the first fit.
    pub fn isotropic(dim: usize, lengthscale: f64) -> Self {
        Self { lengthscales: vec![lengthscale; dim], signal_variance: 1.0, noise_variance: 1e-4 }
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    /// Lengthscales and signal variance must be positive; zero noise is tolerated
    /// (the factorization jitter keeps the system definite).
    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if self.lengthscales.is_empty() || !self.lengthscales.iter().all(|&l| ok(l)) {
            return Err(Error::InvalidArgument(format!("bad lengthscales {:?}", self.lengthscales)));
        }
        if !ok(self.signal_variance) {
            return Err(Error::InvalidArgument(format!("bad signal variance {}", self.signal_variance)));
        }
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::InvalidArgument(format!("bad noise variance {}", self.noise_variance)));
        }
        Ok(())
    }

    /// `[log ℓ_1, …, log ℓ_d, log σ_f², log η²]`
    pub fn to_log(&self) -> Vec<f64> {
        self.lengthscales
            .iter()
            .map(|l| l.ln())
            .chain([self.signal_variance.ln(), self.noise_variance.ln()])
            .collect()
    }

    pub fn from_log(theta: &[f64]) -> Self {
        let d = theta.len() - 2;
        Self {
            lengthscales: theta[..d].iter().map(|t| t.exp()).collect(),
            signal_variance: theta[d].exp(),
            noise_variance: theta[d + 1].exp(),
        }
    }

    pub fn mean_lengthscale(&self) -> f64 {
        self.lengthscales.iter().sum::<f64>() / self.dim() as f64
    }

    /// Kernel value without dimension checks.
    #[inline]
    pub(crate) fn k(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut r2 = 0.0;
        for ((x, y), l) in a.iter().zip(b).zip(&self.lengthscales) {
            let t = (x - y) / l;
            r2 += t * t;
        }
        self.signal_variance * (-0.5 * r2).exp()
    }

    /// `∂k(x, b)/∂x` added into `grad` with weight `w`, given `k(x, b)`.
    #[inline]
    pub(crate) fn add_k_grad(&self, x: &[f64], b: &[f64], kval: f64, w: f64, grad: &mut [f64]) {
        for (j, g) in grad.iter_mut().enumerate() {
            let l = self.lengthscales[j];
            *g -= w * kval * (x[j] - b[j]) / (l * l);
        }
    }
}

/// `σ_f² · exp(−½ Σ_j ((x1_j − x2_j)/ℓ_j)²)`
pub fn kernel_eval(h: &KernelHyperparams, x1: &[f64], x2: &[f64]) -> Result<f64> {
    check_dim(h.dim(), x1.len())?;
    check_dim(h.dim(), x2.len())?;
    Ok(h.k(x1, x2))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_examples() {
        let h = KernelHyperparams::new(vec![1.0, 1.0], 1.0, 1e-6).unwrap();
        assert_eq!(kernel_eval(&h, &[0.3, 0.7], &[0.3, 0.7]).unwrap(), 1.0);
        let v = kernel_eval(&h, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((v - (-1.0f64).exp()).abs() < 1e-15);
        assert!((v - 0.367879).abs() < 1e-6);

        let h = KernelHyperparams::new(vec![0.5, 2.0], 2.0, 1e-6).unwrap();
        let v = kernel_eval(&h, &[0.0, 0.0], &[1.0, 1.0]).unwrap();
        assert!((v - 2.0 * (-2.125f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn kernel_symmetric_and_checks_dims() {
        let h = KernelHyperparams::new(vec![0.3, 0.8, 2.0], 1.7, 0.0).unwrap();
        let a = [0.1, 0.9, 0.4];
        let b = [0.6, 0.2, 0.5];
        assert_eq!(kernel_eval(&h, &a, &b).unwrap(), kernel_eval(&h, &b, &a).unwrap());
        assert!(matches!(kernel_eval(&h, &a, &b[..2]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn rejects_nonpositive_parameters() {
        assert!(KernelHyperparams::new(vec![0.0], 1.0, 0.1).is_err());
        assert!(KernelHyperparams::new(vec![1.0], -1.0, 0.1).is_err());
        assert!(KernelHyperparams::new(vec![1.0], 1.0, -0.1).is_err());
    }

    #[test]
    fn log_roundtrip() {
        let h = KernelHyperparams::new(vec![0.2, 3.0], 0.7, 1e-3).unwrap();
        let back = KernelHyperparams::from_log(&h.to_log());
        for (a, b) in h.lengthscales.iter().zip(&back.lengthscales) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!((h.noise_variance - back.noise_variance).abs() < 1e-17);
    }
}
