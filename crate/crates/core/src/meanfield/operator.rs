//! The affine consistency map `Phi` whose fixed point is the equilibrium mean
//! membrane potential of one type, and the drift correction `H` it integrates.

use crate::error::Result;
use crate::model::{income_offset, JumpMeasure, ModelParams, NeuronType, TimeGrid};
use crate::path::{cumulative_from_start, cumulative_to_end, sup_norm, Path};
use crate::riccati::CoefficientTable;

/// One type's view of the model: everything `H` and `Phi` depend on.
#[derive(Debug, Clone, Copy)]
pub struct TypeProblem<'a> {
    pub params: &'a ModelParams,
    pub nu: &'a JumpMeasure,
    pub tables: &'a CoefficientTable,
}

/// Lipschitz bookkeeping for `Phi` on a horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionBound {
    /// Lipschitz constant of `H` in the sup norm.
    pub m1: f64,
    /// Lipschitz constant of `Phi` in the sup norm.
    pub m: f64,
    pub horizon: f64,
}

impl<'a> TypeProblem<'a> {
    pub fn new(params: &'a ModelParams, nu: &'a JumpMeasure, tables: &'a CoefficientTable) -> Self {
        TypeProblem { params, nu, tables }
    }

    pub fn ty(&self) -> &NeuronType {
        &self.tables.ty
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.tables.grid
    }

    /// Mean spike income offset `ell * nu([0, 1])`.
    pub fn income_offset(&self) -> f64 {
        income_offset(self.params, self.nu)
    }

    /// Net mean-field drift coefficient on `m_U` from spikes: `(k - 1) int z nu`.
    pub fn spike_feedback(&self) -> f64 {
        (self.params.k - 1.0) * self.nu.m1()
    }

    /// `a + rho c / 2 + k int z nu`.
    fn kappa(&self) -> f64 {
        let p = self.ty();
        p.a + 0.5 * self.params.rho * p.c + self.params.k * self.nu.m1()
    }

    /// `H(t_i, m)` at every node, trapezoid rule for the two `t`-to-`T` integrals.
    pub fn h_values(&self, m: &Path) -> Vec<f64> {
        let t = self.tables;
        let dt = t.grid.dt();
        let c2 = t.ty.c * t.ty.c;
        let kappa = self.kappa();
        let q = self.params.cost_discriminant();
        let a_over_h: Vec<f64> = t.a.iter().zip(&t.h).map(|(a, h)| a / h).collect();
        let weighted: Vec<f64> = t
            .a
            .iter()
            .zip(&t.h)
            .zip(m.values())
            .map(|((a, h), mv)| (kappa * a + q) / h * mv)
            .collect();
        let tail_offset = cumulative_to_end(&a_over_h, dt);
        let tail_state = cumulative_to_end(&weighted, dt);
        let terminal = self.params.gamma * m.last();
        let offset = self.income_offset();
        (0..t.a.len())
            .map(|i| {
                c2 * (-terminal * t.h[i] + t.a[i] * m.at(i) + t.h[i] * (offset * tail_offset[i] + tail_state[i]))
            })
            .collect()
    }

    /// `H(t_i, m)` at a single node.
    pub fn h_eval(&self, i: usize, m: &Path) -> f64 {
        self.h_values(m)[i]
    }

    /// `Phi(m)(t_i) = u - int_0^{t_i} H + (k-1) m1 int_0^{t_i} m + offset t_i`.
    pub fn phi_values(&self, m: &Path) -> Vec<f64> {
        let grid = self.grid();
        let dt = grid.dt();
        let h_int = cumulative_from_start(&self.h_values(m), dt);
        let m_int = cumulative_from_start(m.values(), dt);
        let feedback = self.spike_feedback();
        let offset = self.income_offset();
        let u = self.ty().u;
        (0..grid.len())
            .map(|i| {
                if i == 0 {
                    u
                } else {
                    u - h_int[i] + feedback * m_int[i] + offset * grid.node(i)
                }
            })
            .collect()
    }

    pub fn phi_map(&self, m: &Path) -> Path {
        Path::new(*self.grid(), self.phi_values(m)).expect("phi keeps the grid")
    }

    /// `m'(t) = -H(t, m) + (k-1) m1 m(t) + offset`, the time derivative of `Phi(m)`.
    pub fn consistency_derivative(&self, m: &Path) -> Vec<f64> {
        let feedback = self.spike_feedback();
        let offset = self.income_offset();
        self.h_values(m)
            .into_iter()
            .zip(m.values())
            .map(|(h, mv)| -h + feedback * mv + offset)
            .collect()
    }

    /// Attach the analytic derivative to `m`.
    pub fn with_consistency_derivative(&self, m: &Path) -> Result<Path> {
        let d = self.consistency_derivative(m);
        Path::with_derivative(*self.grid(), m.values().to_vec(), d)
    }

    /// Sup-norm residual `||Phi(m) - m||`.
    pub fn residual(&self, m: &Path) -> f64 {
        self.phi_values(m)
            .iter()
            .zip(m.values())
            .fold(0.0, |acc, (p, v)| acc.max((p - v).abs()))
    }

    /// Lipschitz constants of `H` and `Phi` for a horizon `horizon <= T`,
    /// with sup norms taken over the grid nodes.
    pub fn contraction_bound(&self, horizon: f64) -> ContractionBound {
        let t = self.tables;
        let c2 = t.ty.c * t.ty.c;
        let kappa = self.kappa();
        let q = self.params.cost_discriminant();
        let h_norm = sup_norm(&t.h);
        let a_norm = sup_norm(&t.a);
        let ratio: Vec<f64> = t.a.iter().zip(&t.h).map(|(a, h)| (kappa * a + q) / h).collect();
        let m1 = self.params.gamma * c2 * h_norm + c2 * a_norm + h_norm * c2 * sup_norm(&ratio) * horizon;
        let m = m1 * horizon + self.spike_feedback().abs() * horizon;
        ContractionBound { m1, m, horizon }
    }

    /// Largest horizon (bisection to 1e-6 relative) whose bound `M` does not exceed `target`.
    pub fn contraction_horizon(&self, target: f64) -> f64 {
        let horizon = self.params.horizon;
        if self.contraction_bound(horizon).m <= target {
            return horizon;
        }
        let (mut lo, mut hi) = (0.0, horizon);
        while hi - lo > 1e-6 * horizon {
            let mid = 0.5 * (lo + hi);
            if self.contraction_bound(mid).m <= target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }
}
