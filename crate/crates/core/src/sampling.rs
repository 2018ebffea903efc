//! Quasi-random initialization, multivariate-normal draws and pathwise
//! posterior function samples.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::gp::{GpModel, KernelHyperparams};
use crate::linalg;

/// The first 100 primes, the Halton bases.
const PRIMES: [u64; 100] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97, 101, 103, 107,
    109, 113, 127, 131, 137, 139, 149, 151, 157, 163, 167, 173, 179, 181, 191, 193, 197, 199, 211, 223, 227, 229,
    233, 239, 241, 251, 257, 263, 269, 271, 277, 281, 283, 293, 307, 311, 313, 317, 331, 337, 347, 349, 353, 359,
    367, 373, 379, 383, 389, 397, 401, 409, 419, 421, 431, 433, 439, 443, 449, 457, 461, 463, 467, 479, 487, 491,
    499, 503, 509, 521, 523, 541,
];

pub const MAX_HALTON_DIM: usize = PRIMES.len();

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

/// Unperturbed Halton points with indices `1..=count` (index 0 is the origin
/// and is skipped).
pub fn halton_sequence(count: usize, d: usize) -> Result<Vec<Vec<f64>>> {
    if d == 0 || d > MAX_HALTON_DIM {
        return Err(Error::UnsupportedDimension(d, MAX_HALTON_DIM));
    }
    Ok((1..=count as u64).map(|i| PRIMES[..d].iter().map(|&p| radical_inverse(i, p)).collect()).collect())
}

/// Halton points shifted by one uniform vector modulo 1 (Cranley-Patterson
/// rotation). All coordinates lie in `[0, 1)`.
pub fn halton_points(count: usize, d: usize, rng: &mut impl Rng) -> Result<Vec<Vec<f64>>> {
    let mut pts = halton_sequence(count, d)?;
    let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    for p in &mut pts {
        for (v, s) in p.iter_mut().zip(&shift) {
            let mut t = *v + s;
            if t >= 1.0 {
                t -= 1.0;
            }
            *v = t;
        }
    }
    Ok(pts)
}

/// `count` draws of `mean + L z` with `L Lᵀ = cov` (semi-definite tolerant).
pub fn mvn_sample(mean: &DVector<f64>, cov: &DMatrix<f64>, count: usize, rng: &mut impl Rng) -> Result<Vec<DVector<f64>>> {
    let m = mean.len();
    if cov.nrows() != m || cov.ncols() != m {
        return Err(Error::DimensionMismatch { expected: m, got: cov.nrows() });
    }
    let l = linalg::psd_factor(cov)?;
    Ok((0..count)
        .map(|_| {
            let z = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
            mean + &l * z
        })
        .collect())
}

/// One posterior function sample: a random-Fourier-feature prior draw plus the
/// pathwise data update.
#[derive(Debug, Clone)]
pub struct PathSample {
    dim: usize,
    /// Row-major `num_features × d`, already divided by the lengthscales.
    frequencies: Vec<f64>,
    phases: Vec<f64>,
    /// Feature weights times the feature amplitude `√(2σ_f²/M)`.
    weights: Vec<f64>,
    inputs: Vec<Vec<f64>>,
    update: Vec<f64>,
    hyper: KernelHyperparams,
}

/// Draws a posterior path from `model` with `num_features` random features.
pub fn draw_posterior_path(model: &GpModel, num_features: usize, rng: &mut impl Rng) -> Result<PathSample> {
    if num_features == 0 {
        return Err(Error::InvalidArgument("need at least one random feature".into()));
    }
    let h = model.hyper().clone();
    let d = model.dim();
    let mut frequencies = Vec::with_capacity(num_features * d);
    for _ in 0..num_features {
        for l in &h.lengthscales {
            let z: f64 = rng.sample(StandardNormal);
            frequencies.push(z / l);
        }
    }
    let phases: Vec<f64> = (0..num_features).map(|_| rng.random::<f64>() * std::f64::consts::TAU).collect();
    let amp = (2.0 * h.signal_variance / num_features as f64).sqrt();
    let weights: Vec<f64> = (0..num_features).map(|_| amp * rng.sample::<f64, _>(StandardNormal)).collect();

    let mut path = PathSample {
        dim: d,
        frequencies,
        phases,
        weights,
        inputs: model.data().inputs().to_vec(),
        update: Vec::new(),
        hyper: h,
    };
    let n = model.len();
    if n > 0 {
        // v = (K + (η² + jitter) I)⁻¹ (y − f(X) − ε), ε ~ N(0, η² + jitter)
        let noise_sd = (path.hyper.noise_variance + model.jitter()).sqrt();
        let resid = DVector::from_fn(n, |i, _| {
            let eps: f64 = rng.sample(StandardNormal);
            model.data().outputs_std()[i] - path.prior_value(&path.inputs[i]) - noise_sd * eps
        });
        path.update = linalg::cholesky_solve(model.chol(), &resid).as_slice().to_vec();
    }
    Ok(path)
}

impl PathSample {
    pub fn dim(&self) -> usize {
        self.dim
    }

    fn prior_value(&self, x: &[f64]) -> f64 {
        let d = self.dim;
        self.weights
            .iter()
            .zip(&self.phases)
            .zip(self.frequencies.chunks_exact(d))
            .map(|((w, b), om)| w * (om.iter().zip(x).map(|(o, v)| o * v).sum::<f64>() + b).cos())
            .sum()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let data_term: f64 = self.inputs.iter().zip(&self.update).map(|(xi, v)| v * self.hyper.k(x, xi)).sum();
        self.prior_value(x) + data_term
    }

    pub fn eval_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let d = self.dim;
        let mut g = vec![0.0; d];
        let mut value = 0.0;
        for ((w, b), om) in self.weights.iter().zip(&self.phases).zip(self.frequencies.chunks_exact(d)) {
            let arg = om.iter().zip(x).map(|(o, v)| o * v).sum::<f64>() + b;
            let (s, c) = arg.sin_cos();
            value += w * c;
            for j in 0..d {
                g[j] -= w * s * om[j];
            }
        }
        for (xi, v) in self.inputs.iter().zip(&self.update) {
            let k = self.hyper.k(x, xi);
            value += v * k;
            self.hyper.add_k_grad(x, xi, k, *v, &mut g);
        }
        (value, g)
    }
}

pub fn eval_path(path: &PathSample, x: &[f64]) -> f64 {
    path.eval(x)
}
