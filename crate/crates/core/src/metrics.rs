//! Regret curves, query-distance and lengthscale diagnostics, cross-seed
//! aggregation, win-rates and the Mann-Whitney U test.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::simulator::RunTrace;

/// Regrets below this are floored before taking the logarithm.
pub const REGRET_FLOOR: f64 = 1e-12;

/// Default number of grid points for aggregated curves.
pub const GRID_POINTS: usize = 200;

/// `ln max(|f* − y*|, 1e−12)` for each incumbent.
pub fn log_regret_values(incumbents: &[f64], optimum: f64) -> Vec<f64> {
    incumbents.iter().map(|y| (optimum - y).abs().max(REGRET_FLOOR).ln()).collect()
}

/// Log simple regret at every record of `trace`.
pub fn log_regret(trace: &RunTrace) -> Vec<f64> {
    let inc: Vec<f64> = trace.records.iter().map(|r| r.incumbent).collect();
    log_regret_values(&inc, trace.meta.optimum)
}

/// Euclidean distance from `x` to the nearest point of `busy`.
pub fn busy_distance(x: &[f64], busy: &[Vec<f64>]) -> Result<f64> {
    busy.iter()
        .map(|b| b.iter().zip(x).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt())
        .min_by(f64::total_cmp)
        .ok_or(Error::EmptyBusySet)
}

/// `(query index, Δ)` for every completion whose proposal had a distance.
/// The index counts completions, starting at 0.
pub fn distance_series(trace: &RunTrace) -> Vec<(usize, f64)> {
    trace.completions().iter().enumerate().filter(|(_, r)| !r.delta.is_nan()).map(|(i, r)| (i, r.delta)).collect()
}

/// Mean lengthscale and mean absolute change from the previous snapshot.
/// The first change is NaN.
pub fn lengthscale_stats_from(snapshots: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(snapshots.len());
    for (i, ls) in snapshots.iter().enumerate() {
        let d = ls.len() as f64;
        let mean = ls.iter().sum::<f64>() / d;
        let change = match i {
            0 => f64::NAN,
            _ => snapshots[i - 1].iter().zip(ls).map(|(a, b)| (a - b).abs()).sum::<f64>() / d,
        };
        out.push((mean, change));
    }
    out
}

/// Lengthscale diagnostics over the completions of `trace`.
pub fn lengthscale_stats(trace: &RunTrace) -> Vec<(f64, f64)> {
    let snaps: Vec<Vec<f64>> = trace.completions().iter().map(|r| r.lengthscales.clone()).collect();
    lengthscale_stats_from(&snaps)
}

/// `n` evenly spaced points over `[0, t]`.
pub fn time_grid(t: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![t],
        _ => (0..n).map(|i| t * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Value of a step function (last value at or before `t`; the first value
/// before the first time).
pub fn step_value(times: &[f64], values: &[f64], t: f64) -> f64 {
    let idx = times.partition_point(|&s| s <= t);
    values[idx.saturating_sub(1)]
}

/// Quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegretCurve {
    pub grid: Vec<f64>,
    /// `per_seed[s][g]`: seed `s` at grid point `g`.
    pub per_seed: Vec<Vec<f64>>,
    pub median: Vec<f64>,
    pub q1: Vec<f64>,
    pub q3: Vec<f64>,
}

/// Puts every `(times, values)` series on `grid` by step interpolation and
/// takes pointwise quartiles.
pub fn aggregate(curves: &[(Vec<f64>, Vec<f64>)], grid: &[f64]) -> Result<RegretCurve> {
    if curves.is_empty() {
        return Err(Error::InvalidArgument("aggregate needs at least one series".into()));
    }
    for (t, v) in curves {
        if t.len() != v.len() {
            return Err(Error::LengthMismatch(t.len(), v.len()));
        }
        if t.is_empty() {
            return Err(Error::InvalidArgument("empty series".into()));
        }
    }
    let per_seed: Vec<Vec<f64>> =
        curves.iter().map(|(t, v)| grid.iter().map(|&g| step_value(t, v, g)).collect()).collect();
    let mut median = Vec::with_capacity(grid.len());
    let mut q1 = Vec::with_capacity(grid.len());
    let mut q3 = Vec::with_capacity(grid.len());
    for g in 0..grid.len() {
        let mut col: Vec<f64> = per_seed.iter().map(|s| s[g]).collect();
        col.sort_by(f64::total_cmp);
        median.push(quantile(&col, 0.5));
        q1.push(quantile(&col, 0.25));
        q3.push(quantile(&col, 0.75));
    }
    Ok(RegretCurve { grid: grid.to_vec(), per_seed, median, q1, q3 })
}

/// Fraction of paired seeds where `a` has the lower final regret; ties
/// count one half.
pub fn win_rate(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("win rate of empty samples".into()));
    }
    let score: f64 = a
        .iter()
        .zip(b)
        .map(|(x, y)| match x.total_cmp(y) {
            std::cmp::Ordering::Less => 1.0,
            std::cmp::Ordering::Equal => 0.5,
            std::cmp::Ordering::Greater => 0.0,
        })
        .sum();
    Ok(score / a.len() as f64)
}

/// Largest sample size for which the exact null distribution is used.
pub const MWU_EXACT_MAX: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MannWhitney {
    /// `U` of the first sample: pairs where it is larger, ties counting ½.
    pub u: f64,
    /// Two-sided p-value.
    pub p: f64,
    pub exact: bool,
}

/// Midranks (1-based) of `values`.
fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Two-sided Mann-Whitney U test. Uses the exact permutation distribution
/// (ties included) when both samples have at most [`MWU_EXACT_MAX`] values,
/// otherwise the tie-corrected normal approximation with continuity
/// correction.
pub fn mann_whitney_u(a: &[f64], b: &[f64]) -> Result<MannWhitney> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidArgument("Mann-Whitney U needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("Mann-Whitney U got NaN".into()));
    }
    let (na, nb) = (a.len(), b.len());
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let ra: f64 = ranks[..na].iter().sum();
    let u = ra - (na * (na + 1)) as f64 / 2.0;
    if pooled.iter().all(|v| *v == pooled[0]) {
        return Ok(MannWhitney { u, p: 1.0, exact: na <= MWU_EXACT_MAX && nb <= MWU_EXACT_MAX });
    }
    if na <= MWU_EXACT_MAX && nb <= MWU_EXACT_MAX {
        return Ok(MannWhitney { u, p: exact_p(&ranks, na, ra), exact: true });
    }
    let n = (na + nb) as f64;
    let mean = (na * nb) as f64 / 2.0;
    let ties: f64 = tie_sizes(&pooled).iter().map(|&t| t * t * t - t).sum();
    let var = (na * nb) as f64 / 12.0 * ((n + 1.0) - ties / (n * (n - 1.0)));
    let z = ((u - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let p = erfc(z / std::f64::consts::SQRT_2).min(1.0);
    Ok(MannWhitney { u, p, exact: false })
}

fn tie_sizes(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut out = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let j = v[i..].iter().take_while(|x| **x == v[i]).count();
        out.push(j as f64);
        i += j;
    }
    out
}

/// Exact two-sided p for the rank sum `ra` of the first `na` entries:
/// subset-sum counts over doubled midranks (integers), then twice the
/// smaller tail.
fn exact_p(ranks: &[f64], na: usize, ra: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max_sum: usize = doubled.iter().sum();
    // counts[k][s]: subsets of size k with doubled rank sum s.
    let mut counts = vec![vec![0f64; max_sum + 1]; na + 1];
    counts[0][0] = 1.0;
    for &r in &doubled {
        for k in (1..=na).rev() {
            for s in (r..=max_sum).rev() {
                counts[k][s] += counts[k - 1][s - r];
            }
        }
    }
    let dist = &counts[na];
    let total: f64 = dist.iter().sum();
    let obs = (2.0 * ra).round() as usize;
    let lower: f64 = dist[..=obs].iter().sum();
    let upper: f64 = dist[obs..].iter().sum();
    (2.0 * lower.min(upper) / total).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn regret_examples() {
        let v = log_regret_values(&[10.0, 10.0, 1.0, 0.0], 0.0);
        assert!((v[0] - 10f64.ln()).abs() < 1e-15);
        assert_eq!(v[2], 0.0);
        assert_eq!(v[3], REGRET_FLOOR.ln());
    }

    #[test]
    fn distance_examples() {
        let b = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        assert_eq!(busy_distance(&[1.0, 0.0], &b).unwrap(), 1.0);
        assert_eq!(busy_distance(&[1.0, 1.0], &b).unwrap(), 0.0);
        assert_eq!(busy_distance(&[1.0, 1.0], &[]), Err(Error::EmptyBusySet));
    }

    #[test]
    fn lengthscale_example() {
        let s = lengthscale_stats_from(&[vec![2.0, 2.0], vec![1.0, 3.0], vec![1.0, 3.0]]);
        assert!(s[0].1.is_nan());
        assert_eq!(s[1], (2.0, 1.0));
        assert_eq!(s[2], (2.0, 0.0));
    }

    #[test]
    fn aggregate_examples() {
        let grid = time_grid(10.0, GRID_POINTS);
        assert_eq!(grid.len(), 200);
        assert_eq!(grid[199], 10.0);
        let one = aggregate(&[(vec![0.0, 3.0], vec![5.0, 1.0])], &grid).unwrap();
        assert_eq!(one.median, one.q1);
        assert_eq!(one.median, one.q3);
        assert_eq!(step_value(&[0.0, 3.0], &[5.0, 1.0], 2.99), 5.0);
        assert_eq!(step_value(&[0.0, 3.0], &[5.0, 1.0], 3.0), 1.0);
        assert_eq!(step_value(&[1.0, 3.0], &[5.0, 1.0], 0.5), 5.0);
        let curves: Vec<(Vec<f64>, Vec<f64>)> = [3.0, 1.0, 2.0].iter().map(|c| (vec![0.0], vec![*c])).collect();
        let agg = aggregate(&curves, &grid).unwrap();
        assert!(agg.median.iter().all(|m| *m == 2.0));
        let mut rev = curves.clone();
        rev.reverse();
        let agg2 = aggregate(&rev, &grid).unwrap();
        assert_eq!(agg.median, agg2.median);
        assert_eq!(agg.q1, agg2.q1);
    }

    #[test]
    fn win_rate_examples() {
        assert_eq!(win_rate(&[1.0, 3.0, 2.0], &[2.0, 2.0, 2.0]).unwrap(), 0.5);
        assert_eq!(win_rate(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.5);
        assert_eq!(win_rate(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert!(matches!(win_rate(&[1.0], &[1.0, 2.0]), Err(Error::LengthMismatch(1, 2))));
    }

    #[test]
    fn mwu_examples() {
        let r = mann_whitney_u(&[1.0, 2.0], &[3.0, 4.0]).unwrap();
        assert_eq!(r.u, 0.0);
        assert!((r.p - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(mann_whitney_u(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap().p, 1.0);
        assert_eq!(mann_whitney_u(&[5.0; 12], &[5.0; 12]).unwrap().p, 1.0);
        let a: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let b: Vec<f64> = (0..20).map(|i| 100.0 + i as f64).collect();
        let r = mann_whitney_u(&a, &b).unwrap();
        assert!(!r.exact && r.p < 1e-4, "{r:?}");
        assert_eq!(r.p, mann_whitney_u(&b, &a).unwrap().p);
    }

    #[test]
    fn midranks_with_ties() {
        assert_eq!(midranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }
}
