mod common;

use asyncbo::gp::{
    fit_hyperparameters, fit_posterior, kernel_eval, log_marginal_likelihood, Dataset, FitConfig, KernelHyperparams,
    LengthscalePrior,
};
use asyncbo::rng::{Purpose, RngStream};
use asyncbo::sampling::mvn_sample;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

use common::{dense_predict, random_instance, rel};

#[test]
fn posterior_matches_dense_solve() {
    let stream = RngStream::new(11, Purpose::Custom(10));
    for case in 0..100 {
        let mut rng = stream.at(case);
        let (data, h) = random_instance(&mut rng, 50, 10);
        let model = fit_posterior(&data, &h).unwrap();
        for _ in 0..5 {
            let x: Vec<f64> = (0..data.dim()).map(|_| rng.random::<f64>()).collect();
            let (m, v) = model.predict(&x).unwrap();
            let (om, ov) = dense_predict(&model, &x);
            assert!(rel(m, om) < 1e-8, "case {case}: mean {m} vs {om}");
            assert!(rel(v, ov.max(0.0)) < 1e-8, "case {case}: var {v} vs {ov}");
        }
    }
}

#[test]
fn joint_prediction_matches_dense_solve() {
    let stream = RngStream::new(12, Purpose::Custom(10));
    for case in 0..20 {
        let mut rng = stream.at(case);
        let (data, h) = random_instance(&mut rng, 30, 5);
        let model = fit_posterior(&data, &h).unwrap();
        let xq: Vec<Vec<f64>> = (0..4).map(|_| (0..data.dim()).map(|_| rng.random::<f64>()).collect()).collect();
        let (mean, cov) = model.predict_joint(&xq).unwrap();
        for (i, x) in xq.iter().enumerate() {
            let (om, ov) = dense_predict(&model, x);
            assert!(rel(mean[i], om) < 1e-8);
            assert!(rel(cov[(i, i)], ov) < 1e-8);
        }
        // Off-diagonal by the dense route: k(a,b) − k_aᵀ K⁻¹ k_b.
        let n = data.len();
        let k = DMatrix::from_fn(n, n, |i, j| {
            kernel_eval(&h, &data.inputs()[i], &data.inputs()[j]).unwrap()
                + if i == j { h.noise_variance + model.jitter() } else { 0.0 }
        });
        let lu = k.lu();
        let ka = DVector::from_fn(n, |i, _| kernel_eval(&h, &xq[0], &data.inputs()[i]).unwrap());
        let kb = DVector::from_fn(n, |i, _| kernel_eval(&h, &xq[1], &data.inputs()[i]).unwrap());
        let expect = kernel_eval(&h, &xq[0], &xq[1]).unwrap() - ka.dot(&lu.solve(&kb).unwrap());
        assert!(rel(cov[(0, 1)], expect) < 1e-8);
    }
}

#[test]
fn log_mll_gradient_matches_central_differences() {
    let stream = RngStream::new(13, Purpose::Custom(10));
    for case in 0..100 {
        let mut rng = stream.at(case);
        let d = rng.random_range(1..=5);
        let n = rng.random_range(5..=30);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let data = Dataset::from_observations(d, xs, ys).unwrap();
        let ls = (0..d).map(|_| rng.random_range(0.2..1.0)).collect();
        let h = KernelHyperparams::new(ls, rng.random_range(0.5..2.0), rng.random_range(1e-2..1e-1)).unwrap();
        let (_, grad) = log_marginal_likelihood(&data, &h).unwrap();
        let theta = h.to_log();
        for j in 0..theta.len() {
            let eval = |delta: f64| {
                let mut t = theta.clone();
                t[j] += delta;
                log_marginal_likelihood(&data, &KernelHyperparams::from_log(&t)).unwrap().0
            };
            let fd = (eval(1e-5) - eval(-1e-5)) / 2e-5;
            assert!(rel(grad[j], fd) < 1e-4, "case {case} param {j}: {} vs {fd}", grad[j]);
        }
    }
}

#[test]
fn log_mll_gradient_with_large_weights() {
    // Rough data under a long lengthscale gives large K⁻¹y, which magnifies
    // every diagonal term of the gradient, jitter included.
    let xs: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 29.0]).collect();
    let ys: Vec<f64> = (0..30).map(|i| (i % 2) as f64).collect();
    let data = Dataset::from_observations(1, xs, ys).unwrap();
    let h = KernelHyperparams::new(vec![0.8], 1.5, 1e-2).unwrap();
    let (_, grad) = log_marginal_likelihood(&data, &h).unwrap();
    let theta = h.to_log();
    for j in 0..theta.len() {
        let eval = |delta: f64| {
            let mut t = theta.clone();
            t[j] += delta;
            log_marginal_likelihood(&data, &KernelHyperparams::from_log(&t)).unwrap().0
        };
        let fd = (eval(1e-5) - eval(-1e-5)) / 2e-5;
        assert!(rel(grad[j], fd) < 1e-6, "param {j}: {} vs {fd}", grad[j]);
    }
}

#[test]
fn single_point_log_mll_closed_form() {
    let data = Dataset::from_observations(1, vec![vec![0.5]], vec![0.0]).unwrap();
    let h = KernelHyperparams::new(vec![1.0], 1.0, 1e-6).unwrap();
    let model = fit_posterior(&data, &h).unwrap();
    let (v, _) = log_marginal_likelihood(&data, &h).unwrap();
    let total = 1.0 + 1e-6 + model.jitter();
    let expect = -0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * total.ln();
    assert!((v - expect).abs() < 1e-12);
}

#[test]
fn fantasies_at_posterior_mean_keep_mean() {
    let mut rng = RngStream::new(14, Purpose::Custom(10)).at(0);
    let (data, h) = random_instance(&mut rng, 20, 3);
    let model = fit_posterior(&data, &h).unwrap();
    let d = data.dim();
    let xb: Vec<Vec<f64>> = (0..4).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let (mu_b, _) = model.predict_joint(&xb).unwrap();
    let kb = model.condition_on_fantasies(&xb, mu_b.as_slice()).unwrap();
    for _ in 0..200 {
        let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let (m0, _) = model.predict(&x).unwrap();
        let (m1, _) = kb.predict(&x).unwrap();
        assert!((m0 - m1).abs() < 1e-8);
    }
    for x in &xb {
        assert!(kb.predict(x).unwrap().1 < model.predict(x).unwrap().1);
    }
}

#[test]
fn fantasy_update_equals_refit() {
    let mut rng = RngStream::new(15, Purpose::Custom(10)).at(0);
    let (data, h) = random_instance(&mut rng, 15, 2);
    let model = fit_posterior(&data, &h).unwrap();
    let xb = vec![vec![0.2, 0.7][..data.dim()].to_vec(), vec![0.9, 0.1][..data.dim()].to_vec()];
    let yb = [0.3, -1.1];
    let updated = model.condition_on_fantasies(&xb, &yb).unwrap();
    let refit = fit_posterior(&data.with_fantasies(&xb, &yb).unwrap(), &h).unwrap();
    for _ in 0..50 {
        let x: Vec<f64> = (0..data.dim()).map(|_| rng.random::<f64>()).collect();
        let (a, va) = updated.predict(&x).unwrap();
        let (b, vb) = refit.predict(&x).unwrap();
        assert!((a - b).abs() < 1e-8 && (va - vb).abs() < 1e-8);
    }
}

#[test]
fn fit_recovers_lengthscale_from_synthetic_data() {
    let truth = KernelHyperparams::new(vec![0.2], 1.0, 1e-4).unwrap();
    let xs: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 / 39.0]).collect();
    let mut hits = 0;
    for seed in 0..5u64 {
        let mut rng = RngStream::new(seed, Purpose::Custom(11)).at(0);
        let prior = fit_posterior(&Dataset::new(1), &truth).unwrap();
        let (mean, cov) = prior.predict_joint(&xs).unwrap();
        let y = &mvn_sample(&mean, &cov, 1, &mut rng).unwrap()[0];
        let data = Dataset::from_observations(1, xs.clone(), y.iter().copied().collect()).unwrap();
        let init = KernelHyperparams::new(vec![1.0], 1.0, 1e-2).unwrap();
        let mut hrng = RngStream::new(seed, Purpose::HyperRestarts).at(0);
        let fit = fit_hyperparameters(&data, &init, &LengthscalePrior::dimension_scaled(1), &FitConfig::default(), &mut hrng)
            .unwrap();
        let ratio = fit.hyper.lengthscales[0] / 0.2;
        if (1.0 / 1.5..=1.5).contains(&ratio) {
            hits += 1;
        }
    }
    assert!(hits >= 4, "recovered in {hits}/5 draws");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn variance_at_added_point_never_grows(seed in 0u64..10_000, y in -5.0f64..5.0, px in 0.0f64..1.0, py in 0.0f64..1.0) {
        let mut rng = RngStream::new(seed, Purpose::Custom(12)).at(0);
        let xs: Vec<Vec<f64>> = (0..8).map(|_| vec![rng.random::<f64>(), rng.random::<f64>()]).collect();
        let ys: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let data = Dataset::from_observations(2, xs, ys).unwrap();
        let h = KernelHyperparams::new(vec![0.3, 0.6], 1.0, 1e-3).unwrap();
        let before = fit_posterior(&data, &h).unwrap();
        let x = vec![px, py];
        let after = before.condition_on_fantasies(&[x.clone()], &[y]).unwrap();
        prop_assert!(after.predict(&x).unwrap().1 <= before.predict(&x).unwrap().1 + 1e-10);
    }

    #[test]
    fn log_mll_finite_after_adding_points(seed in 0u64..10_000, n in 1usize..30) {
        let mut rng = RngStream::new(seed, Purpose::Custom(13)).at(0);
        let xs: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random::<f64>()]).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 10.0).collect();
        let data = Dataset::from_observations(1, xs, ys).unwrap();
        let h = KernelHyperparams::new(vec![rng.random_range(1e-3..10.0)], 1.0, 1e-6).unwrap();
        let (v, g) = log_marginal_likelihood(&data, &h).unwrap();
        prop_assert!(v.is_finite());
        prop_assert!(g.iter().all(|x| x.is_finite()));
    }
}
