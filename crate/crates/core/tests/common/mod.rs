//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use asyncbo::gp::{kernel_eval, Dataset, GpModel, KernelHyperparams};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// Random data of size ≤ `max_n` in dimension ≤ `max_d` with random hyperparameters.
pub fn random_instance(rng: &mut impl Rng, max_n: usize, max_d: usize) -> (Dataset, KernelHyperparams) {
    let d = rng.random_range(1..=max_d);
    let n = rng.random_range(1..=max_n);
    let xs: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random::<f64>()).collect()).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x.iter().map(|v| (5.0 * v).sin()).sum::<f64>() + rng.random::<f64>()).collect();
    let ls = (0..d).map(|_| rng.random_range(0.1..1.5)).collect();
    let h = KernelHyperparams::new(ls, rng.random_range(0.5..2.0), rng.random_range(1e-3..1e-1)).unwrap();
    (Dataset::from_observations(d, xs, ys).unwrap(), h)
}

/// Mean and variance by an LU solve of the dense system with the model's jitter.
pub fn dense_predict(model: &GpModel, x: &[f64]) -> (f64, f64) {
    let data = model.data();
    let h = model.hyper();
    let n = data.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        let mut v = kernel_eval(h, &data.inputs()[i], &data.inputs()[j]).unwrap();
        if i == j {
            v += h.noise_variance + model.jitter();
        }
        v
    });
    let kx = DVector::from_fn(n, |i, _| kernel_eval(h, x, &data.inputs()[i]).unwrap());
    let y = DVector::from_column_slice(data.outputs_std());
    let lu = k.lu();
    let a = lu.solve(&y).unwrap();
    let b = lu.solve(&kx).unwrap();
    (kx.dot(&a), kernel_eval(h, x, x).unwrap() - kx.dot(&b))
}

/// `|a − b| / max(|b|, 1)`.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

/// Two-sided Mann-Whitney p-value by enumerating every split of the pooled
/// sample and counting pairwise wins directly.
pub fn enumerated_p(a: &[f64], b: &[f64]) -> f64 {
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let n = pooled.len();
    let na = a.len();
    let u_of = |mask: u32| {
        let mut u = 0.0;
        for i in (0..n).filter(|i| mask & (1 << i) != 0) {
            for j in (0..n).filter(|j| mask & (1 << j) == 0) {
                u += match pooled[i].partial_cmp(&pooled[j]).unwrap() {
                    std::cmp::Ordering::Greater => 1.0,
                    std::cmp::Ordering::Equal => 0.5,
                    std::cmp::Ordering::Less => 0.0,
                };
            }
        }
        u
    };
    let observed = u_of((1u32 << na) - 1);
    let (mut total, mut lower, mut upper) = (0.0, 0.0, 0.0);
    for mask in (0u32..(1 << n)).filter(|m| m.count_ones() as usize == na) {
        let u = u_of(mask);
        total += 1.0;
        if u <= observed + 1e-9 {
            lower += 1.0;
        }
        if u >= observed - 1e-9 {
            upper += 1.0;
        }
    }
    (2.0 * f64::min(lower, upper) / total).min(1.0)
}
