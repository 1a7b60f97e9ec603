//! Uniform 1D grids and trapezoid quadrature.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WvaError};

/// Number of points used by default for tabulated densities.
pub const DEFAULT_POINTS: usize = 4096;

/// Half-width of default grids in units of the distribution's standard deviation.
pub const DEFAULT_HALF_WIDTH_SIGMAS: f64 = 8.0;

/// A uniform grid `start, start + step, ..., end` with `len` points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid1D {
    pub start: f64,
    pub end: f64,
    pub len: usize,
}

impl Grid1D {
    pub fn new(start: f64, end: f64, len: usize) -> Result<Self> {
        if !(start.is_finite() && end.is_finite()) || end <= start {
            return Err(WvaError::param(
                "grid",
                format!("bounds must be finite and increasing (got [{start}, {end}])"),
            ));
        }
        if len < 2 {
            return Err(WvaError::param("grid", "need at least 2 points"));
        }
        Ok(Self { start, end, len })
    }

    /// Grid centred on `center` spanning `center ± half_width`.
    pub fn centered(center: f64, half_width: f64, len: usize) -> Result<Self> {
        Self::new(center - half_width, center + half_width, len)
    }

    pub fn step(&self) -> f64 {
        (self.end - self.start) / (self.len - 1) as f64
    }

    pub fn point(&self, i: usize) -> f64 {
        // Pin the last point exactly to `end`.
        if i + 1 == self.len {
            self.end
        } else {
            self.start + i as f64 * self.step()
        }
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len).map(move |i| self.point(i))
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.points().collect()
    }

    /// Whether two grids share every point (to rounding).
    pub fn matches(&self, other: &Grid1D) -> bool {
        let tol = 1e-12 * (self.end - self.start).abs().max(1.0);
        self.len == other.len
            && (self.start - other.start).abs() <= tol
            && (self.end - other.end).abs() <= tol
    }
}

/// Trapezoid rule on a uniform grid.
pub fn trapezoid(step: f64, values: &[f64]) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let interior: f64 = pairwise_sum(&values[1..n - 1]);
            step * (interior + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Pairwise summation; keeps rounding error at O(log n) and makes the
/// result independent of how work was split across threads.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 64;
    if values.len() <= BLOCK {
        values.iter().sum()
    } else {
        let mid = values.len() / 2;
        pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
    }
}

/// Zeroth, first and second central moments of a tabulated density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub norm: f64,
    pub mean: f64,
    pub variance: f64,
}

pub fn moments(grid: &Grid1D, density: &[f64]) -> Moments {
    let h = grid.step();
    let norm = trapezoid(h, density);
    if norm <= 0.0 {
        return Moments {
            norm,
            mean: f64::NAN,
            variance: f64::NAN,
        };
    }
    let first: Vec<f64> = grid.points().zip(density).map(|(x, d)| x * d).collect();
    let mean = trapezoid(h, &first) / norm;
    let second: Vec<f64> = grid
        .points()
        .zip(density)
        .map(|(x, d)| (x - mean) * (x - mean) * d)
        .collect();
    let variance = trapezoid(h, &second) / norm;
    Moments {
        norm,
        mean,
        variance,
    }
}
