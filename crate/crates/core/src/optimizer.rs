//! Bounded quasi-Newton minimization and the shared multi-start maximizer
//! used for acquisition surfaces.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::sampling::halton_points;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiNewtonConfig {
    pub max_iters: usize,
    /// Stop when the projected gradient's max-norm falls below this.
    pub grad_tol: f64,
    /// Stop when an accepted step improves `f` by less than `ftol·max(|f|, 1)`.
    pub ftol: f64,
    /// Number of curvature pairs kept.
    pub memory: usize,
}

impl Default for QuasiNewtonConfig {
    fn default() -> Self {
        Self { max_iters: 100, grad_tol: 1e-8, ftol: 1e-15, memory: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Projected limited-memory BFGS with Armijo backtracking along the projected
/// path. `f` returns `None` where the objective is undefined; such points are
/// rejected by the line search. Returns `None` only if `f(x0)` is undefined.
pub fn minimize_bounded<F>(f: &F, x0: &[f64], lo: &[f64], hi: &[f64], cfg: &QuasiNewtonConfig) -> Option<Minimum>
where
    F: Fn(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let (mut fx, mut g) = f(&x)?;
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let free: Vec<bool> = (0..n)
            .map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0)))
            .collect();
        let pg: Vec<f64> = (0..n).map(|i| if free[i] { g[i] } else { 0.0 }).collect();
        let pg_norm = pg.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if pg_norm < cfg.grad_tol {
            converged = true;
            break;
        }

        // Two-loop recursion on the free subspace.
        let mut q = pg.clone();
        let mut alphas = Vec::with_capacity(memory.len());
        for (s, y, rho) in memory.iter().rev() {
            let a = rho * dot(s, &q);
            for i in 0..n {
                q[i] -= a * y[i];
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = memory.back() {
            let gamma = dot(s, y) / dot(y, y);
            for v in &mut q {
                *v *= gamma;
            }
        }
        for ((s, y, rho), a) in memory.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for i in 0..n {
                q[i] += s[i] * (a - b);
            }
        }
        let mut dir: Vec<f64> = (0..n).map(|i| if free[i] { -q[i] } else { 0.0 }).collect();
        if dot(&dir, &pg) >= 0.0 {
            dir = pg.iter().map(|v| -v).collect();
            memory.clear();
        }

        let mut t = if memory.is_empty() { (1.0 / pg_norm).min(1.0) } else { 1.0 };
        let mut accepted = None;
        for _ in 0..50 {
            let mut xn: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            project(&mut xn, lo, hi);
            let step: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            if step.iter().all(|v| *v == 0.0) {
                break;
            }
            if let Some((fn_, gn)) = f(&xn) {
                if fn_ <= fx + 1e-4 * dot(&g, &step) {
                    accepted = Some((xn, fn_, gn, step));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((xn, fn_, gn, s)) = accepted else {
            if memory.is_empty() {
                break;
            }
            memory.clear();
            continue;
        };

        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if memory.len() == cfg.memory {
                memory.pop_front();
            }
            memory.push_back((s, y, 1.0 / sy));
        }
        let decrease = fx - fn_;
        x = xn;
        g = gn;
        fx = fn_;
        if decrease <= cfg.ftol * fx.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    Some(Minimum { x, f: fx, iterations, converged })
}

/// A scalar field on `[0,1]^d` to be maximized.
pub trait Surface {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Batched evaluation for candidate screening.
    fn values(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        xs.iter().map(|x| self.value(x)).collect()
    }

    /// Value and analytic gradient, when the surface has one.
    fn value_grad(&self, _x: &[f64]) -> Option<(f64, Vec<f64>)> {
        None
    }

    /// Values that mark regions where the surface carries no information.
    fn is_sentinel(&self, v: f64) -> bool {
        !v.is_finite()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub num_candidates_per_dim: usize,
    pub num_restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub finite_diff_step: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { num_candidates_per_dim: 1000, num_restarts: 10, max_iters: 100, grad_tol: 1e-8, finite_diff_step: 1e-6 }
    }
}

impl OptimizerConfig {
    pub fn num_candidates(&self, dim: usize) -> usize {
        self.num_candidates_per_dim * dim
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Maximum {
    pub x: Vec<f64>,
    pub value: f64,
    /// No restart could be refined; `x` is the best raw candidate.
    pub degraded: bool,
}

/// Screens `num_candidates_per_dim · d` perturbed-Halton candidates and refines
/// the best `num_restarts` of them.
pub fn maximize(surface: &dyn Surface, cfg: &OptimizerConfig, rng: &mut impl Rng) -> Maximum {
    let d = surface.dim();
    let candidates = halton_points(cfg.num_candidates(d).max(1), d, rng).expect("dimension within prime table");
    maximize_from(surface, &candidates, cfg)
}

/// As [`maximize`], with a caller-supplied candidate set.
pub fn maximize_from(surface: &dyn Surface, candidates: &[Vec<f64>], cfg: &OptimizerConfig) -> Maximum {
    let values = surface.values(candidates);
    maximize_screened(surface, candidates, &values, cfg)
}

/// As [`maximize_from`], when the candidate values are already known.
pub fn maximize_screened(surface: &dyn Surface, candidates: &[Vec<f64>], values: &[f64], cfg: &OptimizerConfig) -> Maximum {
    let d = surface.dim();
    assert!(!candidates.is_empty(), "need at least one candidate");

    let mut order: Vec<usize> = (0..candidates.len()).filter(|&i| !surface.is_sentinel(values[i])).collect();
    // Stable sort: ties keep the lowest candidate index first.
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let best_raw = order.first().copied().unwrap_or(0);
    let mut best = Maximum { x: candidates[best_raw].clone(), value: values[best_raw], degraded: false };
    if order.is_empty() {
        return best;
    }

    let lo = vec![0.0; d];
    let hi = vec![1.0; d];
    let qn = QuasiNewtonConfig { max_iters: cfg.max_iters, grad_tol: cfg.grad_tol, ..Default::default() };
    let objective = |x: &[f64]| -> Option<(f64, Vec<f64>)> {
        let (v, g) = match surface.value_grad(x) {
            Some(vg) => vg,
            None => {
                let v = surface.value(x);
                (v, central_difference(surface, x, v, cfg.finite_diff_step))
            }
        };
        if surface.is_sentinel(v) || g.iter().any(|c| !c.is_finite()) {
            return None;
        }
        Some((-v, g.iter().map(|c| -c).collect()))
    };

    let mut refined_any = false;
    for &idx in order.iter().take(cfg.num_restarts.max(1)) {
        let Some(m) = minimize_bounded(&objective, &candidates[idx], &lo, &hi, &qn) else {
            continue;
        };
        refined_any = true;
        let value = -m.f;
        if value > best.value {
            best = Maximum { x: m.x, value, degraded: false };
        }
    }
    best.degraded = !refined_any;
    best
}

const FD_GRAD_CLAMP: f64 = 1e8;

/// Central differences, shortened one-sidedly at the box boundary.
fn central_difference(surface: &dyn Surface, x: &[f64], fx: f64, step: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let up = (x[j] + step).min(1.0);
        let down = (x[j] - step).max(0.0);
        probe[j] = up;
        let fu = if up == x[j] { fx } else { surface.value(&probe) };
        probe[j] = down;
        let fd = if down == x[j] { fx } else { surface.value(&probe) };
        probe[j] = x[j];
        let gj = (fu - fd) / (up - down);
        g[j] = if gj.is_nan() { f64::NAN } else { gj.clamp(-FD_GRAD_CLAMP, FD_GRAD_CLAMP) };
    }
    g
}
