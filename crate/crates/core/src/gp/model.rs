use nalgebra::{DMatrix, DVector};

use super::{Dataset, KernelHyperparams};
use crate::error::{check_dim, Error, Result};
use crate::linalg;

/// Relative size of the initial diagonal jitter (times the mean kernel diagonal).
const BASE_JITTER: f64 = 1e-8;

/// GP posterior over a [`Dataset`], factorized once and immutable afterwards.
#[derive(Debug, Clone)]
pub struct GpModel {
    data: Dataset,
    hyper: KernelHyperparams,
    /// Lower Cholesky factor of `K_XX + (η² + jitter) I`.
    chol: DMatrix<f64>,
    /// `(K_XX + (η² + jitter) I)⁻¹ y_std`
    alpha: DVector<f64>,
    jitter: f64,
}

/// Posterior mean and variance together with their input gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionWithGrad {
    pub mean: f64,
    pub var: f64,
    pub mean_grad: Vec<f64>,
    pub var_grad: Vec<f64>,
}

/// Factorizes `K_XX + η²I` (plus jitter) for `data` under fixed hyperparameters.
///
/// An empty dataset yields the prior.
pub fn fit_posterior(data: &Dataset, h: &KernelHyperparams) -> Result<GpModel> {
    h.validate()?;
    check_dim(data.dim(), h.dim())?;
    let kmat = kernel_matrix(h, data.inputs(), h.noise_variance);
    // The RBF diagonal is constant, so its mean is the signal variance.
    let (chol, jitter) = linalg::cholesky_with_jitter(&kmat, BASE_JITTER * h.signal_variance)?;
    let y = DVector::from_column_slice(data.outputs_std());
    let alpha = linalg::cholesky_solve(&chol, &y);
    Ok(GpModel { data: data.clone(), hyper: h.clone(), chol, alpha, jitter })
}

/// `K_XX + noise·I`, without jitter.
pub(crate) fn kernel_matrix(h: &KernelHyperparams, xs: &[Vec<f64>], noise: f64) -> DMatrix<f64> {
    let n = xs.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = h.signal_variance + noise;
        for j in 0..i {
            let v = h.k(&xs[i], &xs[j]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

impl GpModel {
    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn hyper(&self) -> &KernelHyperparams {
        &self.hyper
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    /// Incumbent y* in standardized units.
    pub fn best_std(&self) -> Option<f64> {
        self.data.best_std()
    }

    /// `k(X, x)`
    pub fn cross_cov(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.data.inputs().iter().map(|xi| self.hyper.k(x, xi)))
    }

    /// Posterior mean and variance (standardized units).
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        check_dim(self.dim(), x.len())?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> (f64, f64) {
        let sv = self.hyper.signal_variance;
        if self.is_empty() {
            return (0.0, sv);
        }
        let mut k = self.cross_cov(x);
        let mean = k.dot(&self.alpha);
        linalg::forward_solve(&self.chol, &mut k);
        let var = (sv - k.norm_squared()).clamp(0.0, sv);
        (mean, var)
    }

    /// Batched [`predict`](Self::predict) for candidate screening.
    pub fn predict_many(&self, xs: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
        const CHUNK: usize = 512;
        let sv = self.hyper.signal_variance;
        let n = self.len();
        let mut means = Vec::with_capacity(xs.len());
        let mut vars = Vec::with_capacity(xs.len());
        if n == 0 {
            return (vec![0.0; xs.len()], vec![sv; xs.len()]);
        }
        for chunk in xs.chunks(CHUNK) {
            let mut kc = DMatrix::<f64>::zeros(n, chunk.len());
            for (c, x) in chunk.iter().enumerate() {
                for (i, xi) in self.data.inputs().iter().enumerate() {
                    kc[(i, c)] = self.hyper.k(x, xi);
                }
                means.push(kc.column(c).dot(&self.alpha));
            }
            linalg::forward_solve_matrix(&self.chol, &mut kc);
            for c in 0..chunk.len() {
                vars.push((sv - kc.column(c).norm_squared()).clamp(0.0, sv));
            }
        }
        (means, vars)
    }

    /// Gradient of the posterior mean, `Σ_i α_i ∂k(x, x_i)/∂x`.
    pub fn mean_grad(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        for (xi, &a) in self.data.inputs().iter().zip(self.alpha.iter()) {
            let kv = self.hyper.k(x, xi);
            self.hyper.add_k_grad(x, xi, kv, a, &mut g);
        }
        g
    }

    /// Mean, variance and their gradients in one pass. The variance is not
    /// clamped here so that it stays differentiable.
    pub fn predict_with_grad(&self, x: &[f64]) -> PredictionWithGrad {
        let d = self.dim();
        let sv = self.hyper.signal_variance;
        if self.is_empty() {
            return PredictionWithGrad { mean: 0.0, var: sv, mean_grad: vec![0.0; d], var_grad: vec![0.0; d] };
        }
        let k = self.cross_cov(x);
        let mean = k.dot(&self.alpha);
        let mut v = k.clone();
        linalg::forward_solve(&self.chol, &mut v);
        let var = sv - v.norm_squared();
        let mut w = v;
        linalg::backward_solve(&self.chol, &mut w);
        let mut mean_grad = vec![0.0; d];
        let mut var_grad = vec![0.0; d];
        for (i, xi) in self.data.inputs().iter().enumerate() {
            self.hyper.add_k_grad(x, xi, k[i], self.alpha[i], &mut mean_grad);
            self.hyper.add_k_grad(x, xi, k[i], -2.0 * w[i], &mut var_grad);
        }
        PredictionWithGrad { mean, var, mean_grad, var_grad }
    }

    /// Joint posterior over `xq`: mean vector and symmetrized covariance.
    pub fn predict_joint(&self, xq: &[Vec<f64>]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        if xq.is_empty() {
            return Err(Error::InvalidArgument("predict_joint needs at least one point".into()));
        }
        for x in xq {
            check_dim(self.dim(), x.len())?;
        }
        let m = xq.len();
        let n = self.len();
        let mut cov = kernel_matrix(&self.hyper, xq, 0.0);
        let mut mean = DVector::zeros(m);
        if n > 0 {
            let mut kxq = DMatrix::<f64>::zeros(n, m);
            for (c, x) in xq.iter().enumerate() {
                for (i, xi) in self.data.inputs().iter().enumerate() {
                    kxq[(i, c)] = self.hyper.k(x, xi);
                }
                mean[c] = kxq.column(c).dot(&self.alpha);
            }
            linalg::forward_solve_matrix(&self.chol, &mut kxq);
            cov -= kxq.transpose() * &kxq;
        }
        let sym = (&cov + cov.transpose()) * 0.5;
        Ok((mean, sym))
    }

    /// Posterior after observing `yb` (standardized) at `xb`, hyperparameters
    /// frozen. Uses a block update of the existing factor.
    pub fn condition_on_fantasies(&self, xb: &[Vec<f64>], yb: &[f64]) -> Result<GpModel> {
        if xb.is_empty() {
            return Err(Error::InvalidArgument("no fantasy locations".into()));
        }
        let data = self.data.with_fantasies(xb, yb)?;
        let n = self.len();
        let b = xb.len();
        let h = &self.hyper;

        let mut cross = DMatrix::<f64>::zeros(n, b);
        for (c, x) in xb.iter().enumerate() {
            for (i, xi) in self.data.inputs().iter().enumerate() {
                cross[(i, c)] = h.k(x, xi);
            }
        }
        linalg::forward_solve_matrix(&self.chol, &mut cross);
        let mut schur = kernel_matrix(h, xb, h.noise_variance + self.jitter);
        if n > 0 {
            schur -= cross.transpose() * &cross;
        }
        let Some(l22) = linalg::cholesky_in_place(schur) else {
            // Near-duplicate fantasies: refactor from scratch with escalating jitter.
            return fit_posterior(&data, h);
        };

        let mut chol = DMatrix::<f64>::zeros(n + b, n + b);
        chol.view_mut((0, 0), (n, n)).copy_from(&self.chol);
        chol.view_mut((n, 0), (b, n)).copy_from(&cross.transpose());
        chol.view_mut((n, n), (b, b)).copy_from(&l22);
        let y = DVector::from_column_slice(data.outputs_std());
        let alpha = linalg::cholesky_solve(&chol, &y);
        Ok(GpModel { data, hyper: h.clone(), chol, alpha, jitter: self.jitter })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> (Dataset, KernelHyperparams) {
        let xs = vec![vec![0.1, 0.2], vec![0.5, 0.9], vec![0.8, 0.3], vec![0.35, 0.55]];
        let ys = vec![0.3, -1.2, 0.8, 0.1];
        (
            Dataset::from_observations(2, xs, ys).unwrap(),
            KernelHyperparams::new(vec![0.3, 0.5], 1.3, 1e-3).unwrap(),
        )
    }

    #[test]
    fn single_point_factor() {
        let data = Dataset::from_observations(1, vec![vec![0.4]], vec![2.0]).unwrap();
        let h = KernelHyperparams::new(vec![0.7], 1.5, 0.01).unwrap();
        let m = fit_posterior(&data, &h).unwrap();
        let expect = (1.5f64 + 0.01 + m.jitter()).sqrt();
        assert!((m.chol()[(0, 0)] - expect).abs() < 1e-15);
        assert!((m.jitter() - 1.5e-8).abs() < 1e-20);
    }

    #[test]
    fn empty_data_is_prior() {
        let h = KernelHyperparams::new(vec![0.7, 0.2], 1.5, 0.01).unwrap();
        let m = fit_posterior(&Dataset::new(2), &h).unwrap();
        assert_eq!(m.predict(&[0.3, 0.3]).unwrap(), (0.0, 1.5));
    }

    #[test]
    fn duplicated_inputs_factor_with_noise() {
        let data =
            Dataset::from_observations(1, vec![vec![0.5], vec![0.5], vec![0.5]], vec![1.0, 1.1, 0.9]).unwrap();
        let h = KernelHyperparams::new(vec![0.2], 1.0, 1e-4).unwrap();
        let m = fit_posterior(&data, &h).unwrap();
        assert!(m.jitter() <= 1e-8);
    }

    #[test]
    fn interpolates_training_points_with_tiny_noise() {
        let (data, mut h) = toy();
        h.noise_variance = 1e-12;
        let m = fit_posterior(&data, &h).unwrap();
        for (x, y) in data.inputs().iter().zip(data.outputs_std()) {
            let (mu, var) = m.predict(x).unwrap();
            assert!((mu - y).abs() < 1e-4, "{mu} vs {y}");
            assert!(var <= 1e-6);
        }
    }

    #[test]
    fn predict_many_matches_predict() {
        let (data, h) = toy();
        let m = fit_posterior(&data, &h).unwrap();
        let xs: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64 / 19.0, 1.0 - i as f64 / 23.0]).collect();
        let (mus, vars) = m.predict_many(&xs);
        for (i, x) in xs.iter().enumerate() {
            let (mu, var) = m.predict(x).unwrap();
            assert!((mu - mus[i]).abs() < 1e-13);
            assert!((var - vars[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let (data, h) = toy();
        let m = fit_posterior(&data, &h).unwrap();
        let x = [0.42, 0.61];
        let p = m.predict_with_grad(&x);
        let step = 1e-6;
        for j in 0..2 {
            let mut hi = x;
            let mut lo = x;
            hi[j] += step;
            lo[j] -= step;
            let (mh, vh) = m.predict(&hi).unwrap();
            let (ml, vl) = m.predict(&lo).unwrap();
            assert!((p.mean_grad[j] - (mh - ml) / (2.0 * step)).abs() < 1e-6);
            assert!((p.var_grad[j] - (vh - vl) / (2.0 * step)).abs() < 1e-6);
        }
        assert_eq!(m.mean_grad(&x), p.mean_grad);
    }

    #[test]
    fn joint_single_point_matches_predict() {
        let (data, h) = toy();
        let m = fit_posterior(&data, &h).unwrap();
        let x = vec![0.6, 0.2];
        let (mu, cov) = m.predict_joint(std::slice::from_ref(&x)).unwrap();
        let (pm, pv) = m.predict(&x).unwrap();
        assert!((mu[0] - pm).abs() < 1e-12);
        assert!((cov[(0, 0)] - pv).abs() < 1e-12);
    }

    #[test]
    fn joint_prior_duplicate_points_rank_one() {
        let h = KernelHyperparams::new(vec![0.3], 2.0, 1e-6).unwrap();
        let m = fit_posterior(&Dataset::new(1), &h).unwrap();
        let (_, cov) = m.predict_joint(&[vec![0.4], vec![0.4]]).unwrap();
        let det = cov[(0, 0)] * cov[(1, 1)] - cov[(0, 1)] * cov[(1, 0)];
        assert!(det.abs() < 1e-12);
        assert!((cov[(0, 1)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn fantasy_update_matches_refit() {
        let (data, h) = toy();
        let m = fit_posterior(&data, &h).unwrap();
        let xb = vec![vec![0.7, 0.7], vec![0.2, 0.8]];
        let yb = vec![0.4, -0.3];
        let cond = m.condition_on_fantasies(&xb, &yb).unwrap();
        let refit = fit_posterior(&data.with_fantasies(&xb, &yb).unwrap(), &h).unwrap();
        for x in [[0.1, 0.1], [0.5, 0.5], [0.9, 0.2], [0.7, 0.7]] {
            let (a, av) = cond.predict(&x).unwrap();
            let (b, bv) = refit.predict(&x).unwrap();
            assert!((a - b).abs() < 1e-10 && (av - bv).abs() < 1e-10);
        }
    }

    #[test]
    fn fantasy_on_empty_model() {
        let h = KernelHyperparams::new(vec![0.3], 1.0, 1e-6).unwrap();
        let m = fit_posterior(&Dataset::new(1), &h).unwrap();
        let cond = m.condition_on_fantasies(&[vec![0.5]], &[1.0]).unwrap();
        let (mu, var) = cond.predict(&[0.5]).unwrap();
        assert!((mu - 1.0).abs() < 1e-4);
        assert!(var < 1e-5);
    }
}
