//! Invariant suite run by the `verify` experiment.

use serde::Serialize;

use crate::error::Result;
use crate::game::{consistency_report, McSettings};
use crate::meanfield::{b_coeff, c_coeff, EquilibriumBundle};
use crate::model::{JumpMeasure, TimeGrid};
use crate::path::Path;
use crate::riccati::riccati_ode_rhs;
use crate::sim::{poisson_chi_square, simulate_representative, McOptions, Representative, ZeroControl};

/// How a check's value is compared with its tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Comparison {
    /// value <= tolerance
    AtMost,
    /// value > tolerance
    Above,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub atom: usize,
    pub value: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
}

impl Check {
    fn at_most(name: &str, atom: usize, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            atom,
            value,
            tolerance,
            comparison: Comparison::AtMost,
        }
    }

    fn above(name: &str, atom: usize, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            atom,
            value,
            tolerance,
            comparison: Comparison::Above,
        }
    }

    pub fn pass(&self) -> bool {
        match self.comparison {
            Comparison::AtMost => self.value <= self.tolerance,
            Comparison::Above => self.value > self.tolerance,
        }
    }
}

pub const RICCATI_TOL: f64 = 1e-6;
pub const B_VS_H_TOL: f64 = 1e-7;
pub const HJB_TOL: f64 = 1e-4;
pub const Z_TOL: f64 = 3.0;
pub const CHI_SQUARE_P: f64 = 1e-3;
pub const RELAXATION_TOL: f64 = 1e-10;
const RELAXATION_STEPS: usize = 1000;
const PERTURBATION: f64 = 1.05;

/// Sup distance between `values` and backward RK4 of the Riccati equation
/// from `A(T) = gamma` on `grid`.
pub fn riccati_rk4_error(bundle: &EquilibriumBundle, atom: usize, grid: &TimeGrid, values: &[f64]) -> f64 {
    let model = &bundle.model;
    let ty = bundle.types[atom].ty;
    let f = |a: f64| riccati_ode_rhs(&ty, &model.params, &model.jump, a);
    let h = -grid.dt();
    let mut a = model.params.gamma;
    let mut worst = (values[grid.n_steps()] - a).abs();
    for i in (0..grid.n_steps()).rev() {
        let k1 = f(a);
        let k2 = f(a + 0.5 * h * k1);
        let k3 = f(a + 0.5 * h * k2);
        let k4 = f(a + h * k3);
        a += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        worst = worst.max((values[i] - a).abs());
    }
    worst
}

/// Maximum HJB residual over interior nodes at states spread around the mean path.
pub fn max_hjb_residual(bundle: &EquilibriumBundle, atom: usize) -> f64 {
    let te = &bundle.types[atom];
    let problem = bundle.problem(atom);
    let n = problem.grid().n_steps();
    let spread = 1.0 + te.ty.u.abs();
    let mut worst: f64 = 0.0;
    for i in 1..n {
        let m = te.law.m_u.at(i);
        for s in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            worst = worst.max(te.law.hjb_residual(&problem, i, m + s * spread).abs());
        }
    }
    worst
}

/// Run the whole suite. Monte Carlo checks use `mc`; `checkpoints` must be
/// nodes of the simulation grid.
pub fn run_suite(bundle: &EquilibriumBundle, checkpoints: &[f64], tol: f64, mc: &McSettings) -> Result<Vec<Check>> {
    let model = &bundle.model;
    let params = &model.params;
    let mut checks = Vec::new();
    for (atom, te) in bundle.types.iter().enumerate() {
        let problem = bundle.problem(atom);
        let grid = *problem.grid();
        let c2 = te.ty.c * te.ty.c;

        checks.push(Check::at_most(
            "riccati_rk4_sup",
            atom,
            riccati_rk4_error(bundle, atom, &grid, &te.tables.a),
            RICCATI_TOL,
        ));
        checks.push(Check::at_most(
            "riccati_terminal",
            atom,
            (te.tables.a[grid.n_steps()] - params.gamma).abs(),
            0.0,
        ));
        checks.push(Check::at_most(
            "fixed_point_residual",
            atom,
            problem.residual(&te.solution.path),
            tol,
        ));

        let b = b_coeff(&problem, &te.law.m_u, &te.law.m_phi)?;
        let c = c_coeff(&problem, &te.law.m_u, &te.law.m_phi, &b)?;
        checks.push(Check::at_most("b_terminal", atom, b.last().abs(), 0.0));
        checks.push(Check::at_most("c_terminal", atom, c.last().abs(), 0.0));
        let h = problem.h_values(&te.law.m_u);
        let b_vs_h = h
            .iter()
            .enumerate()
            .fold(0.0f64, |w, (i, hv)| w.max((0.5 * c2 * b.at(i) - hv).abs()));
        checks.push(Check::at_most("b_vs_h_sup", atom, b_vs_h, B_VS_H_TOL));
        checks.push(Check::at_most("hjb_residual_max", atom, max_hjb_residual(bundle, atom), HJB_TOL));

        let report = consistency_report(bundle, atom, checkpoints, None, mc)?;
        checks.push(Check::at_most("consistency_max_abs_z", atom, report.max_abs_z(), Z_TOL));
        let perturbed = te.law.m_u.affine(PERTURBATION, 0.0);
        let flagged = consistency_report(bundle, atom, checkpoints, Some(&perturbed), mc)?;
        checks.push(Check::above("perturbation_max_abs_z", atom, flagged.max_abs_z(), Z_TOL));

        let ens = &report.ensemble;
        if model.jump.rate() > 0.0 {
            let test = poisson_chi_square(&ens.jump_counts, model.jump.rate() * params.horizon)?;
            checks.push(Check::above("jump_count_chi_square_p", atom, test.p_value, CHI_SQUARE_P));
        }

        let kappa = params.coercivity();
        let slack = ens.costs[0]
            .iter()
            .zip(&ens.control_energy[0])
            .fold(f64::INFINITY, |w, (cost, energy)| w.min(cost - kappa * energy));
        checks.push(Check::above("coercivity_min_slack", atom, slack, -1e-12));

        let (j, se) = ens.cost_estimate(0);
        let v = te.law.value_function(0.0, te.ty.u);
        let z = if se > 0.0 { (j - v).abs() / se } else { 0.0 };
        let value_check = if se > 0.0 {
            Check::at_most("value_function_abs_z", atom, z, Z_TOL)
        } else {
            Check::at_most("value_function_abs_error", atom, (j - v).abs(), 1e-6)
        };
        checks.push(value_check);

        checks.push(Check::at_most(
            "relaxation_sup_error",
            atom,
            relaxation_error(bundle, atom, mc.seed)?,
            RELAXATION_TOL,
        ));
    }
    Ok(checks)
}

/// Sup error of the uncontrolled, spike-free representative against
/// `U(t) = M + (u - M) e^{-a t}` for a constant level `M` away from `u`.
pub fn relaxation_error(bundle: &EquilibriumBundle, atom: usize, seed: u64) -> Result<f64> {
    let model = &bundle.model;
    let te = &bundle.types[atom];
    let grid = TimeGrid::new(model.params.horizon, RELAXATION_STEPS)?;
    let target = te.ty.u - 1.0 - te.ty.u.abs();
    let m = Path::constant(grid, target);
    let zero = Path::constant(grid, 0.0);
    let silent = JumpMeasure::silent();
    let rep = Representative {
        ty: te.ty,
        params: &model.params,
        nu: &silent,
        controller: &ZeroControl,
        m_u: &m,
        m_phi: &zero,
        neuron_stream: 0,
    };
    let ens = simulate_representative(&rep, &grid, &McOptions::new(2, seed))?;
    let mut worst: f64 = 0.0;
    for t in grid.nodes() {
        let exact = target + (te.ty.u - target) * (-te.ty.a * t).exp();
        worst = worst.max((ens.marginal_mean(t)?.0 - exact).abs());
    }
    Ok(worst)
}
