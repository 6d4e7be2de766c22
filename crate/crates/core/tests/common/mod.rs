//! Independent oracles, written from the model definition without calling
//! the library's numerical kernels.

#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use neuromfg::meanfield::{FeedbackLaw, SolverOptions, solve_equilibrium, EquilibriumBundle};
use neuromfg::model::{JumpMeasure, Model, ModelParams, NeuronType, TimeGrid, TypeDistribution};

pub fn demo_params() -> ModelParams {
    ModelParams::new(0.5, 1.0, 1.0, 0.5, 0.5, 1.0).unwrap()
}

pub fn demo_type() -> NeuronType {
    NeuronType::new(1.0, 1.0, 1.0).unwrap()
}

pub fn demo_jump(rate: f64) -> JumpMeasure {
    JumpMeasure::new(rate, vec![(0.5, 1.0)]).unwrap()
}

pub fn demo_model(rate: f64, n_steps: usize) -> Model {
    Model::new(demo_params(), demo_jump(rate), TypeDistribution::single(demo_type()), n_steps).unwrap()
}

pub fn demo_bundle(rate: f64, n_steps: usize) -> EquilibriumBundle {
    solve_equilibrium(&demo_model(rate, n_steps), &SolverOptions::default()).unwrap()
}

/// `(int z nu, int z^2 nu)` summed over the atoms.
pub fn moments(nu: &JumpMeasure) -> (f64, f64) {
    nu.atoms().iter().fold((0.0, 0.0), |(m1, m2), &(z, q)| {
        (m1 + nu.rate() * q * z, m2 + nu.rate() * q * z * z)
    })
}

/// Backward RK4 of the Riccati equation for the quadratic coefficient,
/// `substeps` steps per grid cell, sampled at the grid nodes.
pub fn riccati_rk4(ty: &NeuronType, p: &ModelParams, nu: &JumpMeasure, grid: &TimeGrid, substeps: usize) -> Vec<f64> {
    let (m1, m2) = moments(nu);
    let lin = 2.0 * ty.a + p.rho * ty.c - (m2 - 2.0 * m1);
    let q = p.rho * p.rho / 4.0 - p.beta;
    let f = |a: f64| ty.c * ty.c * a * a + lin * a + q;
    let n = grid.n_steps();
    let h = -grid.dt() / substeps as f64;
    let mut out = vec![0.0; n + 1];
    let mut a = p.gamma;
    out[n] = a;
    for i in (0..n).rev() {
        for _ in 0..substeps {
            let k1 = f(a);
            let k2 = f(a + 0.5 * h * k1);
            let k3 = f(a + 0.5 * h * k2);
            let k4 = f(a + h * k3);
            a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
        out[i] = a;
    }
    out
}

/// Trapezoid weights of nodes `lo..=hi` on a uniform grid.
fn trapezoid_weights(lo: usize, hi: usize, dt: f64) -> impl Iterator<Item = (usize, f64)> {
    (lo..=hi).filter(move |_| hi > lo).map(move |j| {
        let w = if j == lo || j == hi { 0.5 * dt } else { dt };
        (j, w)
    })
}

/// Assemble the discretised consistency map as `m = P m + r` (trapezoid
/// rule for every time integral) and solve `(I - P) m = r` by dense LU.
pub fn dense_fixed_point(ty: &NeuronType, p: &ModelParams, nu: &JumpMeasure, grid: &TimeGrid) -> Vec<f64> {
    let n = grid.n_steps();
    let dt = grid.dt();
    let (m1, _) = moments(nu);
    let c2 = ty.c * ty.c;
    let a = riccati_rk4(ty, p, nu, grid, 5);
    let rate: Vec<f64> = a.iter().map(|&av| ty.a + c2 * av + m1 + 0.5 * p.rho * ty.c).collect();
    let h: Vec<f64> = (0..=n)
        .map(|i| (-trapezoid_weights(i, n, dt).map(|(j, w)| w * rate[j]).sum::<f64>()).exp())
        .collect();
    let offset = p.ell * nu.rate();
    let kappa = ty.a + 0.5 * p.rho * ty.c + p.k * m1;
    let q = p.rho * p.rho / 4.0 - p.beta;
    let feedback = (p.k - 1.0) * m1;

    // H_k = sum_j hc[k][j] m_j + h0[k]
    let mut hc = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut h0 = vec![0.0; n + 1];
    for k in 0..=n {
        hc[(k, n)] -= c2 * p.gamma * h[k];
        hc[(k, k)] += c2 * a[k];
        for (j, w) in trapezoid_weights(k, n, dt) {
            hc[(k, j)] += c2 * h[k] * w * (kappa * a[j] + q) / h[j];
            h0[k] += c2 * h[k] * offset * w * a[j] / h[j];
        }
    }

    // Phi_i = u + sum_j pm[i][j] m_j + r[i], built by cumulative trapezoid.
    let mut pm = DMatrix::<f64>::zeros(n + 1, n + 1);
    let mut r = DVector::<f64>::from_element(n + 1, ty.u);
    for i in 1..=n {
        for j in 0..=n {
            let prev = pm[(i - 1, j)];
            pm[(i, j)] = prev - 0.5 * dt * (hc[(i - 1, j)] + hc[(i, j)]);
        }
        pm[(i, i - 1)] += 0.5 * dt * feedback;
        pm[(i, i)] += 0.5 * dt * feedback;
        r[i] = r[i - 1] - 0.5 * dt * (h0[i - 1] + h0[i]) + offset * dt;
    }
    let system = DMatrix::<f64>::identity(n + 1, n + 1) - pm;
    system.lu().solve(&r).expect("consistency system is nonsingular").iter().copied().collect()
}

/// HJB residual of the quadratic value function of `law` at node `i` and
/// state `x`: central differences in `t` (one-sided at the ends) and in `x`,
/// minimisation over the control in closed form, exact atom sum for jumps.
pub fn hjb_residual(law: &FeedbackLaw, ty: &NeuronType, p: &ModelParams, nu: &JumpMeasure, grid: &TimeGrid, i: usize, x: f64) -> f64 {
    let v = |t: f64, x: f64| law.value_function(t, x);
    let t = grid.node(i);
    let (lo, hi) = (i.saturating_sub(1), (i + 1).min(grid.n_steps()));
    let v_t = (v(grid.node(hi), x) - v(grid.node(lo), x)) / (grid.node(hi) - grid.node(lo));
    let dx = 1e-3;
    let v_x = (v(t, x + dx) - v(t, x - dx)) / (2.0 * dx);
    let y = x - law.m_u.values()[i];
    let theta = -(ty.c * v_x + p.rho * y) / 2.0;
    let drift = -ty.a * y + law.m_phi.values()[i] + ty.c * theta;
    let jumps: f64 = nu
        .atoms()
        .iter()
        .map(|&(z, q)| nu.rate() * q * (v(t, x * (1.0 - z)) - v(t, x)))
        .sum();
    v_t + v_x * drift + theta * theta + p.rho * theta * y + p.beta * y * y + jumps
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(0.0, |w, (x, y)| w.max((x - y).abs()))
}
