//! Closed-form quadratic coefficient `A_p(t)` of the value function and the
//! exponential weight `h_p(t)`.
//!
//! `A_p` solves the scalar Riccati equation
//!
//! ```text
//! A'(t) = c^2 A^2 + (2a + rho c - int (z^2 - 2z) nu) A + rho^2/4 - beta,   A(T) = gamma
//! ```
//!
//! whose characteristic roots `delta_plus > 0 > delta_minus` give the
//! closed form. `h_p(t) = exp(-int_t^T (a + c^2 A + int z nu + rho c / 2))`
//! is integrated with the trapezoid rule on the shared grid.

use crate::error::{Error, Result};
use crate::model::{JumpMeasure, ModelParams, NeuronType, TimeGrid};
use crate::path::{cumulative_to_end, Path};

/// Discriminant and characteristic roots for one type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiConstants {
    pub r: f64,
    pub delta_plus: f64,
    pub delta_minus: f64,
}

impl RiccatiConstants {
    /// `a + rho c / 2 - (1/2) int (z^2 - 2z) nu`, minus half the root sum.
    pub fn half_trace(&self) -> f64 {
        -0.5 * (self.delta_plus + self.delta_minus)
    }
}

pub fn riccati_constants(p: &NeuronType, params: &ModelParams, nu: &JumpMeasure) -> RiccatiConstants {
    let x = p.a + 0.5 * params.rho * p.c - 0.5 * nu.compensated_moment();
    let r = x * x - p.c * p.c * params.cost_discriminant();
    let root = r.sqrt();
    RiccatiConstants {
        r,
        delta_plus: -x + root,
        delta_minus: -x - root,
    }
}

/// Closed-form evaluator for `A_p` on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiccatiSolution {
    pub constants: RiccatiConstants,
    c2: f64,
    gamma: f64,
    q: f64,
    horizon: f64,
}

impl RiccatiSolution {
    pub fn new(p: &NeuronType, params: &ModelParams, nu: &JumpMeasure) -> Self {
        RiccatiSolution {
            constants: riccati_constants(p, params, nu),
            c2: p.c * p.c,
            gamma: params.gamma,
            q: params.cost_discriminant(),
            horizon: params.horizon,
        }
    }

    /// `A_p(t)`. The closed form is multiplied through by
    /// `exp(-(delta_plus - delta_minus)(T - t))` so it never overflows.
    pub fn value(&self, t: f64) -> f64 {
        let RiccatiConstants {
            delta_plus: dp,
            delta_minus: dm,
            ..
        } = self.constants;
        let decay = (-(dp - dm) * (self.horizon - t)).exp();
        let num = self.q * (1.0 - decay) - self.gamma * (dp - dm * decay);
        let den = dm - dp * decay - self.c2 * self.gamma * (1.0 - decay);
        num / den
    }
}

/// `A_p(t)` for `t` in `[0, T]`.
pub fn a_of_t(p: &NeuronType, params: &ModelParams, nu: &JumpMeasure, t: f64) -> Result<f64> {
    if !(0.0..=params.horizon).contains(&t) {
        return Err(Error::Domain {
            t,
            horizon: params.horizon,
        });
    }
    if t == params.horizon {
        return Ok(params.gamma);
    }
    Ok(RiccatiSolution::new(p, params, nu).value(t))
}

/// Right-hand side of the Riccati equation at the value `a_value`.
pub fn riccati_ode_rhs(p: &NeuronType, params: &ModelParams, nu: &JumpMeasure, a_value: f64) -> f64 {
    p.c * p.c * a_value * a_value
        + (2.0 * p.a + params.rho * p.c - nu.compensated_moment()) * a_value
        + params.cost_discriminant()
}

/// Integrand of `-log h_p`: `a + c^2 A + int z nu + rho c / 2`.
pub fn discount_rate(p: &NeuronType, params: &ModelParams, nu: &JumpMeasure, a_value: f64) -> f64 {
    p.a + p.c * p.c * a_value + nu.m1() + 0.5 * params.rho * p.c
}

/// `h_p` at every node of `grid`.
pub fn h_of_t(p: &NeuronType, params: &ModelParams, nu: &JumpMeasure, grid: &TimeGrid) -> Vec<f64> {
    let sol = RiccatiSolution::new(p, params, nu);
    let rates: Vec<f64> = grid
        .nodes()
        .into_iter()
        .enumerate()
        .map(|(i, t)| {
            let a = if i == grid.n_steps() { params.gamma } else { sol.value(t) };
            discount_rate(p, params, nu, a)
        })
        .collect();
    log_h_from_rates(&rates, grid.dt()).into_iter().map(f64::exp).collect()
}

fn log_h_from_rates(rates: &[f64], dt: f64) -> Vec<f64> {
    cumulative_to_end(rates, dt).into_iter().map(|v| -v).collect()
}

/// `A_p`, `A_p'` and `h_p` tabulated on the shared grid for one type.
#[derive(Debug, Clone)]
pub struct CoefficientTable {
    pub ty: NeuronType,
    pub grid: TimeGrid,
    pub solution: RiccatiSolution,
    pub a: Vec<f64>,
    pub a_prime: Vec<f64>,
    pub h: Vec<f64>,
    pub log_h: Vec<f64>,
}

impl CoefficientTable {
    pub fn build(p: &NeuronType, params: &ModelParams, nu: &JumpMeasure, grid: &TimeGrid) -> Self {
        let solution = RiccatiSolution::new(p, params, nu);
        let n = grid.n_steps();
        let a: Vec<f64> = grid
            .nodes()
            .into_iter()
            .enumerate()
            .map(|(i, t)| if i == n { params.gamma } else { solution.value(t) })
            .collect();
        let a_prime = a.iter().map(|&v| riccati_ode_rhs(p, params, nu, v)).collect();
        let rates: Vec<f64> = a.iter().map(|&v| discount_rate(p, params, nu, v)).collect();
        let log_h = log_h_from_rates(&rates, grid.dt());
        let h = log_h.iter().map(|v| v.exp()).collect();
        CoefficientTable {
            ty: *p,
            grid: *grid,
            solution,
            a,
            a_prime,
            h,
            log_h,
        }
    }

    /// `A_p` as a Hermite-interpolated path.
    pub fn a_path(&self) -> Path {
        Path::with_derivative(self.grid, self.a.clone(), self.a_prime.clone()).expect("table lengths match grid")
    }

    /// `h_p`, linearly interpolated between nodes.
    pub fn h_path(&self) -> Path {
        Path::new(self.grid, self.h.clone()).expect("table lengths match grid")
    }
}
