//! Uniform-grid tabulated functions with linear interpolation.
//!
//! Self-convolved mollifiers are evaluated millions of times inside
//! Hamiltonians; they are precomputed once on a uniform grid and interpolated
//! linearly, returning 0 outside the tabulated range (compact support).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Tabulated1d {
    x0: f64,
    dx: f64,
    values: Vec<f64>,
}

impl Tabulated1d {
    pub fn new(x0: f64, dx: f64, values: Vec<f64>) -> Self {
        assert!(dx > 0.0 && values.len() >= 2);
        Self { x0, dx, values }
    }

    /// Tabulates `f` on `n+1` uniform nodes covering `[a, b]`.
    pub fn from_fn(a: f64, b: f64, n: usize, f: impl Fn(f64) -> f64) -> Self {
        let dx = (b - a) / n as f64;
        let values = (0..=n).map(|i| f(a + i as f64 * dx)).collect();
        Self { x0: a, dx, values }
    }

    pub fn x_min(&self) -> f64 {
        self.x0
    }

    pub fn x_max(&self) -> f64 {
        self.x0 + self.dx * (self.values.len() - 1) as f64
    }

    /// Linear interpolation; 0 outside the grid.
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        let s = (x - self.x0) / self.dx;
        if s < 0.0 {
            return 0.0;
        }
        let k = s as usize;
        if k + 1 >= self.values.len() {
            // x_max itself still evaluates; beyond it the support is over.
            if s <= (self.values.len() - 1) as f64 {
                return self.values[self.values.len() - 1];
            }
            return 0.0;
        }
        let w = s - k as f64;
        self.values[k] * (1.0 - w) + self.values[k + 1] * w
    }

    /// Trapezoid integral over the tabulated range.
    pub fn integral(&self) -> f64 {
        let n = self.values.len();
        let inner: f64 = self.values[1..n - 1].iter().sum();
        self.dx * (0.5 * (self.values[0] + self.values[n - 1]) + inner)
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }
}
