use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Affine map between raw and standardized outputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: f64,
    pub stddev: f64,
}

impl Standardizer {
    pub const IDENTITY: Standardizer = Standardizer { mean: 0.0, stddev: 1.0 };

    /// Sample mean and (n−1) standard deviation; falls back to unit scale when
    /// there is fewer than two points or no spread.
    pub fn fit(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::IDENTITY;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stddev = if n < 2 {
            1.0
        } else {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        };
        let stddev = if stddev > 0.0 && stddev.is_finite() { stddev } else { 1.0 };
        Self { mean, stddev }
    }

    pub fn forward(&self, raw: f64) -> f64 {
        (raw - self.mean) / self.stddev
    }

    pub fn inverse(&self, std: f64) -> f64 {
        std * self.stddev + self.mean
    }
}

/// Completed observations in the unit cube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    dim: usize,
    inputs: Vec<Vec<f64>>,
    outputs_raw: Vec<f64>,
    outputs_std: Vec<f64>,
    standardizer: Standardizer,
}

impl Dataset {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            inputs: Vec::new(),
            outputs_raw: Vec::new(),
            outputs_std: Vec::new(),
            standardizer: Standardizer::IDENTITY,
        }
    }

    pub fn from_observations(dim: usize, inputs: Vec<Vec<f64>>, outputs: Vec<f64>) -> Result<Self> {
        if inputs.len() != outputs.len() {
            return Err(Error::LengthMismatch(inputs.len(), outputs.len()));
        }
        for x in &inputs {
            validate_point(dim, x)?;
        }
        let mut data = Self {
            dim,
            inputs,
            outputs_raw: outputs,
            outputs_std: Vec::new(),
            standardizer: Standardizer::IDENTITY,
        };
        data.restandardize();
        Ok(data)
    }

    /// Appends an observation and recomputes the standardization.
    pub fn push(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        validate_point(self.dim, &x)?;
        if !y.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite output {y}")));
        }
        self.inputs.push(x);
        self.outputs_raw.push(y);
        self.restandardize();
        Ok(())
    }

    /// Copy extended by hypothesized observations given in standardized units.
    /// The standardizer is kept frozen so existing outputs do not move.
    pub fn with_fantasies(&self, xb: &[Vec<f64>], yb_std: &[f64]) -> Result<Self> {
        if xb.len() != yb_std.len() {
            return Err(Error::LengthMismatch(xb.len(), yb_std.len()));
        }
        let mut out = self.clone();
        for (x, &y) in xb.iter().zip(yb_std) {
            validate_point(self.dim, x)?;
            out.inputs.push(x.clone());
            out.outputs_std.push(y);
            out.outputs_raw.push(self.standardizer.inverse(y));
        }
        Ok(out)
    }

    fn restandardize(&mut self) {
        self.standardizer = Standardizer::fit(&self.outputs_raw);
        let s = self.standardizer;
        self.outputs_std = self.outputs_raw.iter().map(|&y| s.forward(y)).collect();
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[Vec<f64>] {
        &self.inputs
    }

    pub fn outputs_raw(&self) -> &[f64] {
        &self.outputs_raw
    }

    pub fn outputs_std(&self) -> &[f64] {
        &self.outputs_std
    }

    pub fn standardizer(&self) -> Standardizer {
        self.standardizer
    }

    /// Best (largest) standardized output, the incumbent y*.
    pub fn best_std(&self) -> Option<f64> {
        self.outputs_std.iter().copied().reduce(f64::max)
    }
}

fn validate_point(dim: usize, x: &[f64]) -> Result<()> {
    check_dim(dim, x.len())?;
    if x.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidArgument(format!("input {x:?} outside the unit cube")));
    }
    Ok(())
}
