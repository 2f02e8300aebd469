use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Uniform grid on `[0, max]` with `points` nodes (endpoints included).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub max: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(max: f64, points: usize) -> Result<Self> {
        if !(max > 0.0) || points < 3 {
            return Err(Error::domain(format!("bad grid: max={max}, points={points}")));
        }
        Ok(Self { max, points })
    }

    pub fn step(&self) -> f64 {
        self.max / (self.points - 1) as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        let h = self.step();
        (0..self.points).map(|i| i as f64 * h).collect()
    }

    /// Same spacing, twice as many intervals.
    pub fn refined(&self) -> Self {
        Self { max: self.max, points: 2 * (self.points - 1) + 1 }
    }
}

/// Linear interpolation on a uniform grid starting at 0; clamps outside.
pub fn interp_uniform(values: &[f64], h: f64, x: f64) -> f64 {
    let n = values.len();
    if x <= 0.0 {
        return values[0];
    }
    let f = x / h;
    let i = f.floor() as usize;
    if i + 1 >= n {
        return values[n - 1];
    }
    let w = f - i as f64;
    values[i] * (1.0 - w) + values[i + 1] * w
}
