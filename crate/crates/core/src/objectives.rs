//! Synthetic test functions on their native boxes, unit-cube normalization
//! and the simulated evaluation-time model.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Ackley,
    Hartmann,
    Eggholder,
    Michalewicz,
    Rosenbrock,
    Powell,
    Branin,
}

impl Family {
    pub const ALL: [Family; 7] = [
        Family::Ackley,
        Family::Hartmann,
        Family::Eggholder,
        Family::Michalewicz,
        Family::Rosenbrock,
        Family::Powell,
        Family::Branin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Ackley => "ackley",
            Family::Hartmann => "hartmann",
            Family::Eggholder => "eggholder",
            Family::Michalewicz => "michalewicz",
            Family::Rosenbrock => "rosenbrock",
            Family::Powell => "powell",
            Family::Branin => "branin",
        }
    }

    /// Human-readable description of the supported dimensions.
    pub fn dims_help(self) -> &'static str {
        match self {
            Family::Ackley => "any d >= 1",
            Family::Hartmann => "3 or 6",
            Family::Eggholder | Family::Branin => "2",
            Family::Michalewicz => "2, 5 or 10",
            Family::Rosenbrock => "any d >= 2",
            Family::Powell => "multiples of 4",
        }
    }
}

const MICHALEWICZ_M: i32 = 10;

const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
const HARTMANN3_A: [[f64; 3]; 4] = [[3.0, 10.0, 30.0], [0.1, 10.0, 35.0], [3.0, 10.0, 30.0], [0.1, 10.0, 35.0]];
const HARTMANN3_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
];
const HARTMANN6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];
const HARTMANN6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

/// A test function with its native box and known optimum. All functions are
/// minimization problems; [`Objective::evaluate_max`] gives the negated value
/// used by the optimization loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub name: String,
    pub family: Family,
    pub dim: usize,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub optimum: f64,
    pub optimizers: Vec<Vec<f64>>,
    pub minimize: bool,
}

impl Objective {
    pub fn new(family: Family, dim: usize) -> Result<Self> {
        let bad = || Error::InvalidArgument(format!("{} supports d = {}, got {dim}", family.name(), family.dims_help()));
        let cube = |lo: f64, hi: f64| (vec![lo; dim], vec![hi; dim]);
        let (lower, upper, optimum, optimizers) = match family {
            Family::Ackley => {
                if dim == 0 {
                    return Err(bad());
                }
                let (l, u) = cube(-32.768, 32.768);
                (l, u, 0.0, vec![vec![0.0; dim]])
            }
            Family::Hartmann => {
                let (l, u) = cube(0.0, 1.0);
                match dim {
                    3 => (l, u, -3.86277978733266, vec![vec![0.114614, 0.555649, 0.852547]]),
                    6 => (
                        l,
                        u,
                        -3.32236801141551,
                        vec![vec![0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573]],
                    ),
                    _ => return Err(bad()),
                }
            }
            Family::Eggholder => {
                if dim != 2 {
                    return Err(bad());
                }
                let (l, u) = cube(-512.0, 512.0);
                (l, u, -959.640662720851, vec![vec![512.0, 404.2319]])
            }
            Family::Michalewicz => {
                let (l, u) = cube(0.0, PI);
                let x5 = [2.202906, 1.570796, 1.284992, 1.923058, 1.720470];
                match dim {
                    2 => (l, u, -1.80130341009855, vec![vec![2.20290552, 1.57079633]]),
                    5 => (l, u, -4.68765817908815, vec![x5.to_vec()]),
                    10 => {
                        let mut x = x5.to_vec();
                        x.extend([1.570796, 1.454414, 1.756087, 1.655717, 1.570796]);
                        (l, u, -9.66015171564133, vec![x])
                    }
                    _ => return Err(bad()),
                }
            }
            Family::Rosenbrock => {
                if dim < 2 {
                    return Err(bad());
                }
                let (l, u) = cube(-5.0, 10.0);
                (l, u, 0.0, vec![vec![1.0; dim]])
            }
            Family::Powell => {
                if dim == 0 || dim % 4 != 0 {
                    return Err(bad());
                }
                let (l, u) = cube(-4.0, 5.0);
                (l, u, 0.0, vec![vec![0.0; dim]])
            }
            Family::Branin => {
                if dim != 2 {
                    return Err(bad());
                }
                (
                    vec![-5.0, 0.0],
                    vec![10.0, 15.0],
                    0.397887357729738,
                    vec![vec![-PI, 12.275], vec![PI, 2.275], vec![9.42478, 2.475]],
                )
            }
        };
        Ok(Self {
            name: format!("{}-{dim}", family.name()),
            family,
            dim,
            lower,
            upper,
            optimum,
            optimizers,
            minimize: true,
        })
    }

    /// Parses registry names of the form `family-d`, e.g. `ackley-10`.
    pub fn from_name(name: &str) -> Result<Self> {
        let unknown = || Error::UnknownName {
            kind: "objective",
            name: name.to_string(),
            valid: Family::ALL.iter().map(|f| format!("{}-<d>", f.name())).collect::<Vec<_>>().join(", "),
        };
        let (fam, d) = name.rsplit_once('-').ok_or_else(unknown)?;
        let family = Family::ALL.into_iter().find(|f| f.name() == fam).ok_or_else(unknown)?;
        let dim: usize = d.parse().map_err(|_| unknown())?;
        Self::new(family, dim)
    }

    pub fn denormalize(&self, x_unit: &[f64]) -> Vec<f64> {
        x_unit.iter().zip(self.lower.iter().zip(&self.upper)).map(|(u, (lo, hi))| lo + u * (hi - lo)).collect()
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.lower.iter().zip(&self.upper)).map(|(v, (lo, hi))| (v - lo) / (hi - lo)).collect()
    }

    /// Value of the standard formula at a point in native coordinates.
    pub fn evaluate_native(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.dim, x.len())?;
        let v = match self.family {
            Family::Ackley => ackley(x),
            Family::Hartmann if self.dim == 3 => hartmann(x, &HARTMANN3_A, &HARTMANN3_P),
            Family::Hartmann => hartmann(x, &HARTMANN6_A, &HARTMANN6_P),
            Family::Eggholder => eggholder(x),
            Family::Michalewicz => michalewicz(x),
            Family::Rosenbrock => rosenbrock(x),
            Family::Powell => powell(x),
            Family::Branin => branin(x),
        };
        if v.is_nan() {
            return Err(Error::Evaluation(format!("{} returned NaN at {x:?}", self.name)));
        }
        Ok(v)
    }

    /// Native function value at a point of the unit cube.
    pub fn evaluate(&self, x_unit: &[f64]) -> Result<f64> {
        check_dim(self.dim, x_unit.len())?;
        if let Some(v) = x_unit.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidArgument(format!("input coordinate {v} outside [0, 1]")));
        }
        self.evaluate_native(&self.denormalize(x_unit))
    }

    /// The value in maximization convention.
    pub fn evaluate_max(&self, x_unit: &[f64]) -> Result<f64> {
        let v = self.evaluate(x_unit)?;
        Ok(if self.minimize { -v } else { v })
    }

    /// Whether native value `a` is better than `b`.
    pub fn better(&self, a: f64, b: f64) -> bool {
        if self.minimize {
            a < b
        } else {
            a > b
        }
    }

    /// Simple regret `|f_best − f*|` measured in the improving direction.
    pub fn regret(&self, best: f64) -> f64 {
        if self.minimize {
            best - self.optimum
        } else {
            self.optimum - best
        }
    }
}

fn ackley(x: &[f64]) -> f64 {
    let d = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / d;
    let cs = x.iter().map(|v| (2.0 * PI * v).cos()).sum::<f64>() / d;
    -20.0 * (-0.2 * sq.sqrt()).exp() - cs.exp() + 20.0 + std::f64::consts::E
}

fn hartmann<const D: usize>(x: &[f64], a: &[[f64; D]; 4], p: &[[f64; D]; 4]) -> f64 {
    -(0..4)
        .map(|i| {
            let s: f64 = (0..D).map(|j| a[i][j] * (x[j] - p[i][j]).powi(2)).sum();
            HARTMANN_ALPHA[i] * (-s).exp()
        })
        .sum::<f64>()
}

fn eggholder(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    -(x2 + 47.0) * (x2 + x1 / 2.0 + 47.0).abs().sqrt().sin() - x1 * (x1 - (x2 + 47.0)).abs().sqrt().sin()
}

fn michalewicz(x: &[f64]) -> f64 {
    -x.iter()
        .enumerate()
        .map(|(i, v)| v.sin() * ((i + 1) as f64 * v * v / PI).sin().powi(2 * MICHALEWICZ_M))
        .sum::<f64>()
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2).map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (w[0] - 1.0).powi(2)).sum()
}

fn powell(x: &[f64]) -> f64 {
    x.chunks_exact(4)
        .map(|c| {
            (c[0] + 10.0 * c[1]).powi(2)
                + 5.0 * (c[2] - c[3]).powi(2)
                + (c[1] - 2.0 * c[2]).powi(4)
                + 10.0 * (c[0] - c[3]).powi(4)
        })
        .sum()
}

fn branin(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    let b = 5.1 / (4.0 * PI * PI);
    let c = 5.0 / PI;
    let t = 1.0 / (8.0 * PI);
    (x2 - b * x1 * x1 + c * x1 - 6.0).powi(2) + 10.0 * (1.0 - t) * x1.cos() + 10.0
}

/// Half-normal evaluation times `|z|·θ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DurationModel {
    pub theta: f64,
}

impl Default for DurationModel {
    /// Scale `√(π/2)`, which makes the mean duration exactly 1.
    fn default() -> Self {
        Self { theta: (PI / 2.0).sqrt() }
    }
}

impl DurationModel {
    pub fn new(theta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidArgument(format!("duration scale must be positive, got {theta}")));
        }
        Ok(Self { theta })
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        rng.sample::<f64, _>(StandardNormal).abs() * self.theta
    }
}

pub fn sample_duration(m: &DurationModel, rng: &mut impl Rng) -> f64 {
    m.sample(rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{Purpose, RngStream};

    fn all() -> Vec<Objective> {
        [
            "ackley-1", "ackley-10", "hartmann-3", "hartmann-6", "eggholder-2", "michalewicz-2", "michalewicz-5",
            "michalewicz-10", "rosenbrock-2", "rosenbrock-7", "powell-4", "powell-8", "branin-2",
        ]
        .iter()
        .map(|n| Objective::from_name(n).unwrap())
        .collect()
    }

    #[test]
    fn optimizers_attain_optimum() {
        for obj in all() {
            for x in &obj.optimizers {
                let v = obj.evaluate_native(x).unwrap();
                assert!((v - obj.optimum).abs() < 1e-6, "{}: {v} vs {}", obj.name, obj.optimum);
            }
        }
    }

    #[test]
    fn known_values() {
        let ack = Objective::from_name("ackley-3").unwrap();
        assert!(ack.evaluate(&[0.5; 3]).unwrap().abs() < 1e-12);
        let h6 = Objective::from_name("hartmann-6").unwrap();
        let x = [0.20169, 0.150011, 0.476874, 0.275332, 0.311652, 0.6573];
        assert!((h6.evaluate(&x).unwrap() + 3.32237).abs() < 1e-4);
        assert!((h6.evaluate_max(&x).unwrap() - 3.32237).abs() < 1e-4);
        let r = Objective::from_name("rosenbrock-4").unwrap();
        assert_eq!(r.evaluate_native(&[1.0; 4]).unwrap(), 0.0);
        assert_eq!(r.evaluate_native(&[0.0; 4]).unwrap(), 3.0);
    }

    #[test]
    fn normalization_roundtrip() {
        let mut rng = RngStream::new(1, Purpose::Custom(0)).at(0);
        for obj in all() {
            for _ in 0..100 {
                let u: Vec<f64> = (0..obj.dim).map(|_| rng.random::<f64>()).collect();
                let back = obj.normalize(&obj.denormalize(&u));
                assert!(u.iter().zip(&back).all(|(a, b)| (a - b).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn random_search_never_beats_optimum() {
        let mut rng = RngStream::new(2, Purpose::Custom(0)).at(0);
        for obj in all() {
            for _ in 0..20_000 {
                let u: Vec<f64> = (0..obj.dim).map(|_| rng.random::<f64>()).collect();
                assert!(obj.evaluate(&u).unwrap() >= obj.optimum - 1e-9, "{}", obj.name);
            }
        }
    }

    #[test]
    fn registry_errors() {
        assert!(matches!(Objective::from_name("foo-2"), Err(Error::UnknownName { .. })));
        assert!(matches!(Objective::from_name("ackley"), Err(Error::UnknownName { .. })));
        assert!(matches!(Objective::from_name("hartmann-4"), Err(Error::InvalidArgument(_))));
        assert!(matches!(Objective::from_name("powell-6"), Err(Error::InvalidArgument(_))));
        assert_eq!(Objective::from_name("ackley-10").unwrap().name, "ackley-10");
    }

    #[test]
    fn rejects_points_outside_cube() {
        let obj = Objective::from_name("branin-2").unwrap();
        assert!(obj.evaluate(&[0.5, 1.1]).is_err());
        assert!(obj.evaluate(&[0.5]).is_err());
        assert!(obj.evaluate(&[f64::NAN, 0.5]).is_err());
    }

    #[test]
    fn durations() {
        let m = DurationModel::default();
        let mut rng = RngStream::new(3, Purpose::Durations).at(0);
        let draws: Vec<f64> = (0..100_000).map(|_| sample_duration(&m, &mut rng)).collect();
        assert!(draws.iter().all(|&v| v >= 0.0));
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
        assert!(DurationModel::new(0.0).is_err());
    }
}
