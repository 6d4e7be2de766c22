//! Functions of time sampled on a uniform grid, plus the composite
//! trapezoid integrals every module shares.

use crate::error::{Error, Result};
use crate::model::TimeGrid;

/// `out[i] = int_{t_0}^{t_i} f` by the composite trapezoid rule.
pub fn cumulative_from_start(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * dt * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// `out[i] = int_{t_i}^{t_N} f` by the composite trapezoid rule.
pub fn cumulative_to_end(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for i in (0..n.saturating_sub(1)).rev() {
        acc += 0.5 * dt * (values[i] + values[i + 1]);
        out[i] = acc;
    }
    out
}

/// Composite trapezoid integral over the whole grid.
pub fn trapezoid(values: &[f64], dt: f64) -> f64 {
    cumulative_from_start(values, dt).last().copied().unwrap_or(0.0)
}

/// Grid function with optional derivative values.
///
/// With a derivative attached, [`Path::eval`] interpolates with cubic
/// Hermite polynomials; otherwise linearly.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    grid: TimeGrid,
    values: Vec<f64>,
    derivative: Option<Vec<f64>>,
}

impl Path {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Path {
            grid,
            values,
            derivative: None,
        })
    }

    pub fn with_derivative(grid: TimeGrid, values: Vec<f64>, derivative: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() || derivative.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(Path {
            grid,
            values,
            derivative: Some(derivative),
        })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().into_iter().map(f).collect();
        Path {
            grid,
            values,
            derivative: None,
        }
    }

    pub fn constant(grid: TimeGrid, value: f64) -> Self {
        Path {
            grid,
            values: vec![value; grid.len()],
            derivative: Some(vec![0.0; grid.len()]),
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn derivative(&self) -> Option<&[f64]> {
        self.derivative.as_deref()
    }

    pub fn require_derivative(&self) -> Result<&[f64]> {
        self.derivative().ok_or(Error::MissingDerivative)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn at(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn last(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub fn without_derivative(mut self) -> Self {
        self.derivative = None;
        self
    }

    /// Value at an arbitrary time in `[0, T]` (clamped outside).
    pub fn eval(&self, t: f64) -> f64 {
        if let Some(i) = self.grid.index_of(t) {
            return self.values[i];
        }
        let dt = self.grid.dt();
        let i = self.grid.cell(t);
        let s = ((t - dt * i as f64) / dt).clamp(0.0, 1.0);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        match &self.derivative {
            None => y0 + s * (y1 - y0),
            Some(d) => {
                let (d0, d1) = (d[i] * dt, d[i + 1] * dt);
                let s2 = s * s;
                let s3 = s2 * s;
                (2.0 * s3 - 3.0 * s2 + 1.0) * y0
                    + (s3 - 2.0 * s2 + s) * d0
                    + (-2.0 * s3 + 3.0 * s2) * y1
                    + (s3 - s2) * d1
            }
        }
    }

    /// Derivative at an arbitrary time: Hermite derivative when attached,
    /// otherwise the slope of the linear interpolant.
    pub fn eval_derivative(&self, t: f64) -> f64 {
        let dt = self.grid.dt();
        let i = self.grid.cell(t);
        let s = ((t - dt * i as f64) / dt).clamp(0.0, 1.0);
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        match &self.derivative {
            None => (y1 - y0) / dt,
            Some(d) => {
                if let Some(j) = self.grid.index_of(t) {
                    return d[j];
                }
                let (d0, d1) = (d[i] * dt, d[i + 1] * dt);
                let s2 = s * s;
                ((6.0 * s2 - 6.0 * s) * y0
                    + (3.0 * s2 - 4.0 * s + 1.0) * d0
                    + (-6.0 * s2 + 6.0 * s) * y1
                    + (3.0 * s2 - 2.0 * s) * d1)
                    / dt
            }
        }
    }

    /// Sup norm over the grid nodes.
    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    /// Sup distance to another path on the same grid.
    pub fn sup_distance(&self, other: &Path) -> Result<f64> {
        self.check_grid(other)?;
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn check_grid(&self, other: &Path) -> Result<()> {
        if self.grid == other.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `alpha * self + beta * other`, combining derivatives when both carry one.
    pub fn combine(&self, alpha: f64, other: &Path, beta: f64) -> Result<Path> {
        self.check_grid(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| alpha * x + beta * y)
            .collect();
        let derivative = match (&self.derivative, &other.derivative) {
            (Some(dx), Some(dy)) => Some(dx.iter().zip(dy).map(|(x, y)| alpha * x + beta * y).collect()),
            _ => None,
        };
        Ok(Path {
            grid: self.grid,
            values,
            derivative,
        })
    }

    /// Pointwise affine image `scale * self + shift`.
    pub fn affine(&self, scale: f64, shift: f64) -> Path {
        Path {
            grid: self.grid,
            values: self.values.iter().map(|v| scale * v + shift).collect(),
            derivative: self
                .derivative
                .as_ref()
                .map(|d| d.iter().map(|v| scale * v).collect()),
        }
    }

    /// `|v(T) - v(0) - int v'|`, zero up to quadrature error for a consistent derivative.
    pub fn derivative_consistency(&self) -> Result<f64> {
        let d = self.require_derivative()?;
        let integral = trapezoid(d, self.grid.dt());
        Ok((self.last() - self.values[0] - integral).abs())
    }
}

pub(crate) fn sup_norm(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}
