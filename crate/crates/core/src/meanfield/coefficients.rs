//! Linear and constant coefficients of the quadratic value function, and the
//! feedback law they induce.

use super::operator::TypeProblem;
use crate::error::Result;
use crate::path::{cumulative_to_end, Path};

/// `B(t) = 2 h(t) int_t^T (A/h)(-m' + m_phi + m (m2 - m1))`, with the
/// derivative from `B' = g B + 2A m' - 2A m_phi - 2A m (m2 - m1)`.
pub fn b_coeff(problem: &TypeProblem<'_>, m_u: &Path, m_phi: &Path) -> Result<Path> {
    m_u.check_grid(m_phi)?;
    let tables = problem.tables;
    let grid = *problem.grid();
    let dm = m_u.require_derivative()?;
    let spread = problem.nu.m2() - problem.nu.m1();
    let source: Vec<f64> = (0..grid.len())
        .map(|i| -dm[i] + m_phi.at(i) + m_u.at(i) * spread)
        .collect();
    let weighted: Vec<f64> = source
        .iter()
        .zip(tables.a.iter().zip(&tables.h))
        .map(|(s, (a, h))| a / h * s)
        .collect();
    let tail = cumulative_to_end(&weighted, grid.dt());
    let values: Vec<f64> = (0..grid.len()).map(|i| 2.0 * tables.h[i] * tail[i]).collect();
    let ty = problem.ty();
    let base = ty.a + problem.nu.m1() + 0.5 * problem.params.rho * ty.c;
    let c2 = ty.c * ty.c;
    let derivative = (0..grid.len())
        .map(|i| (base + c2 * tables.a[i]) * values[i] - 2.0 * tables.a[i] * source[i])
        .collect();
    Path::with_derivative(grid, values, derivative)
}

/// `C(t) = int_t^T { A m2 m^2 - c^2 B^2 / 4 - B m' + B (m_phi - m1 m) }`,
/// the constant term that makes the quadratic ansatz solve the HJB equation.
pub fn c_coeff(problem: &TypeProblem<'_>, m_u: &Path, m_phi: &Path, b: &Path) -> Result<Path> {
    m_u.check_grid(m_phi)?;
    m_u.check_grid(b)?;
    let grid = *problem.grid();
    let dm = m_u.require_derivative()?;
    let (m1, m2) = (problem.nu.m1(), problem.nu.m2());
    let c2 = problem.ty().c * problem.ty().c;
    let a = &problem.tables.a;
    let integrand: Vec<f64> = (0..grid.len())
        .map(|i| {
            let (m, bv) = (m_u.at(i), b.at(i));
            a[i] * m2 * m * m - 0.25 * c2 * bv * bv - bv * dm[i] + bv * (m_phi.at(i) - m1 * m)
        })
        .collect();
    let values = cumulative_to_end(&integrand, grid.dt());
    let derivative = integrand.iter().map(|v| -v).collect();
    Path::with_derivative(grid, values, derivative)
}

/// Quadratic value function and its minimizing feedback for one type,
/// centred on that type's equilibrium mean path.
#[derive(Debug, Clone)]
pub struct FeedbackLaw {
    pub rho: f64,
    pub c: f64,
    pub a: Path,
    pub b: Path,
    pub c_coef: Path,
    pub m_u: Path,
    pub m_phi: Path,
}

impl FeedbackLaw {
    pub fn build(problem: &TypeProblem<'_>, m_u: &Path, m_phi: &Path) -> Result<Self> {
        let b = b_coeff(problem, m_u, m_phi)?;
        let c_coef = c_coeff(problem, m_u, m_phi, &b)?;
        Ok(FeedbackLaw {
            rho: problem.params.rho,
            c: problem.ty().c,
            a: problem.tables.a_path(),
            b,
            c_coef,
            m_u: m_u.clone(),
            m_phi: m_phi.clone(),
        })
    }

    /// `V(t, x) = A (x - m)^2 + B (x - m) + C`.
    pub fn value_function(&self, t: f64, x: f64) -> f64 {
        let y = x - self.m_u.eval(t);
        self.a.eval(t) * y * y + self.b.eval(t) * y + self.c_coef.eval(t)
    }

    /// `dV/dx`.
    pub fn value_gradient(&self, t: f64, x: f64) -> f64 {
        2.0 * self.a.eval(t) * (x - self.m_u.eval(t)) + self.b.eval(t)
    }

    /// `theta = (-c A - rho/2)(x - m) - (c/2) B`.
    pub fn optimal_feedback(&self, t: f64, x: f64) -> f64 {
        let (slope, intercept) = self.affine(t);
        slope * x + intercept
    }

    /// Feedback as `slope * x + intercept`.
    pub fn affine(&self, t: f64) -> (f64, f64) {
        let slope = -self.c * self.a.eval(t) - 0.5 * self.rho;
        let intercept = -slope * self.m_u.eval(t) - 0.5 * self.c * self.b.eval(t);
        (slope, intercept)
    }

    /// HJB residual at node `i` and state `x`, with a central difference in
    /// time (one-sided at the ends) and the exact atom sum for the jumps.
    pub fn hjb_residual(&self, problem: &TypeProblem<'_>, i: usize, x: f64) -> f64 {
        let grid = problem.grid();
        let (lo, hi) = (i.saturating_sub(1), (i + 1).min(grid.n_steps()));
        let v_t = (self.value_function(grid.node(hi), x) - self.value_function(grid.node(lo), x))
            / (grid.node(hi) - grid.node(lo));
        let t = grid.node(i);
        let y = x - self.m_u.at(i);
        let theta = self.optimal_feedback(t, x);
        let v = self.value_function(t, x);
        let ty = problem.ty();
        let p = problem.params;
        let drift = -ty.a * y + self.m_phi.at(i) + ty.c * theta;
        let jumps = problem.nu.integrate(|z| self.value_function(t, x * (1.0 - z)) - v);
        v_t + self.value_gradient(t, x) * drift + theta * theta + p.rho * theta * y + p.beta * y * y + jumps
    }
}
