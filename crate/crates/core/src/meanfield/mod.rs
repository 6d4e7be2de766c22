//! Conditional mean field equilibrium: per-type fixed points of the
//! consistency map, value-function coefficients and the aggregated mean field.

mod coefficients;
mod fixed_point;
mod operator;

pub use coefficients::{b_coeff, c_coeff, FeedbackLaw};
pub use fixed_point::{solve_fixed_point, FixedPointSolution, SolveMethod, SolverMode, SolverOptions};
pub use operator::{ContractionBound, TypeProblem};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{income_offset, JumpMeasure, Model, ModelParams, NeuronType, TypeDistribution};
use crate::path::Path;
use crate::riccati::CoefficientTable;

/// `m* = sum_m w_m m^(p_m)` and `m_phi* = k m1 m* + ell nu([0, 1])`.
pub fn aggregate_mean_field(
    dist: &TypeDistribution,
    per_type: &[Path],
    params: &ModelParams,
    nu: &JumpMeasure,
) -> Result<(Path, Path)> {
    if per_type.len() != dist.len() || per_type.is_empty() {
        return Err(Error::GridMismatch);
    }
    let mut total = per_type[0].affine(dist.atoms()[0].1, 0.0);
    for (path, (_, w)) in per_type.iter().zip(dist.atoms()).skip(1) {
        total = total.combine(1.0, path, *w)?;
    }
    let phi = total.affine(params.k * nu.m1(), income_offset(params, nu));
    Ok((total, phi))
}

/// Everything known about one type at equilibrium.
#[derive(Debug, Clone)]
pub struct TypeEquilibrium {
    pub ty: NeuronType,
    pub weight: f64,
    pub tables: CoefficientTable,
    pub solution: FixedPointSolution,
    /// Feedback law centred on this type's own mean path.
    pub law: FeedbackLaw,
    pub contraction: ContractionBound,
    /// Sub-intervals of length with `M <= 0.5` needed to cover `[0, T]`.
    pub sub_intervals: usize,
}

impl TypeEquilibrium {
    pub fn m_u(&self) -> &Path {
        &self.solution.path
    }
}

#[derive(Debug, Clone)]
pub struct EquilibriumBundle {
    pub model: Model,
    pub types: Vec<TypeEquilibrium>,
    pub m_u_star: Path,
    pub m_phi_star: Path,
}

impl EquilibriumBundle {
    pub fn problem(&self, index: usize) -> TypeProblem<'_> {
        TypeProblem::new(&self.model.params, &self.model.jump, &self.types[index].tables)
    }

    /// Feedback laws in type order.
    pub fn laws(&self) -> Vec<FeedbackLaw> {
        self.types.iter().map(|t| t.law.clone()).collect()
    }
}

/// Solve every type's fixed point (in parallel over types) and assemble the bundle.
pub fn solve_equilibrium(model: &Model, opts: &SolverOptions) -> Result<EquilibriumBundle> {
    let types: Vec<TypeEquilibrium> = model
        .types
        .atoms()
        .par_iter()
        .map(|&(ty, weight)| solve_type(model, ty, weight, opts))
        .collect::<Result<_>>()?;
    let per_type: Vec<Path> = types.iter().map(|t| t.solution.path.clone()).collect();
    let (m_u_star, m_phi_star) = aggregate_mean_field(&model.types, &per_type, &model.params, &model.jump)?;
    Ok(EquilibriumBundle {
        model: model.clone(),
        types,
        m_u_star,
        m_phi_star,
    })
}

fn solve_type(model: &Model, ty: NeuronType, weight: f64, opts: &SolverOptions) -> Result<TypeEquilibrium> {
    let tables = CoefficientTable::build(&ty, &model.params, &model.jump, &model.grid);
    let problem = TypeProblem::new(&model.params, &model.jump, &tables);
    let solution = solve_fixed_point(&problem, opts)?;
    let m_phi = solution
        .path
        .affine(model.params.k * model.jump.m1(), problem.income_offset());
    let law = FeedbackLaw::build(&problem, &solution.path, &m_phi)?;
    let contraction = problem.contraction_bound(model.params.horizon);
    let delta = problem.contraction_horizon(0.5);
    let sub_intervals = (model.params.horizon / delta).ceil().max(1.0) as usize;
    Ok(TypeEquilibrium {
        ty,
        weight,
        tables,
        solution,
        law,
        contraction,
        sub_intervals,
    })
}
