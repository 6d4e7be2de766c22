use super::operator::TypeProblem;
use crate::error::{Error, Result};
use crate::path::Path;

/// Which iteration `solve_fixed_point` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolverMode {
    /// Global Picard, switching to block continuation when Picard stalls.
    #[default]
    Auto,
    PicardOnly,
    Continuation,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub tol: f64,
    /// Budget of `Phi` evaluations.
    pub max_iter: usize,
    pub mode: SolverMode,
    /// Starting path; the constant `u` when absent.
    pub initial: Option<Path>,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 10_000,
            mode: SolverMode::Auto,
            initial: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolveMethod {
    Picard,
    Continuation { blocks: usize },
}

#[derive(Debug, Clone)]
pub struct FixedPointSolution {
    /// The fixed point, carrying its analytic time derivative.
    pub path: Path,
    pub iterations: usize,
    pub residual: f64,
    pub method: SolveMethod,
}

/// Picard ratio above which an iteration counts as stalled.
const STALL_RATIO: f64 = 0.95;
/// Consecutive stalled iterations before switching to continuation.
const STALL_COUNT: usize = 5;
/// Target contraction constant per continuation block.
const BLOCK_CONTRACTION: f64 = 0.5;

/// Fixed point of `Phi` for one type, to sup-norm residual `opts.tol`.
pub fn solve_fixed_point(problem: &TypeProblem<'_>, opts: &SolverOptions) -> Result<FixedPointSolution> {
    let grid = *problem.grid();
    let start = match &opts.initial {
        Some(p) => {
            if *p.grid() != grid {
                return Err(Error::GridMismatch);
            }
            p.clone().without_derivative()
        }
        None => Path::constant(grid, problem.ty().u).without_derivative(),
    };
    let (path, iterations, residual, method) = match opts.mode {
        SolverMode::Continuation => continuation(problem, start, opts.tol, opts.max_iter, 0)?,
        SolverMode::PicardOnly | SolverMode::Auto => picard(problem, start, opts)?,
    };
    Ok(FixedPointSolution {
        path: problem.with_consistency_derivative(&path)?,
        iterations,
        residual,
        method,
    })
}

fn picard(problem: &TypeProblem<'_>, start: Path, opts: &SolverOptions) -> Result<(Path, usize, f64, SolveMethod)> {
    let mut m = start;
    let mut previous = f64::INFINITY;
    let mut stalled = 0;
    for iter in 0..opts.max_iter {
        let next = problem.phi_map(&m);
        let residual = next.sup_distance(&m)?;
        if !residual.is_finite() {
            break;
        }
        if residual < opts.tol {
            return Ok((m, iter, residual, SolveMethod::Picard));
        }
        if opts.mode == SolverMode::Auto {
            stalled = if residual > STALL_RATIO * previous { stalled + 1 } else { 0 };
            if stalled >= STALL_COUNT {
                return continuation(problem, m, opts.tol, opts.max_iter, iter + 1);
            }
        }
        previous = residual;
        m = next;
    }
    Err(Error::NonConvergence {
        residual: problem.residual(&m),
        iterations: opts.max_iter,
    })
}

/// Block Gauss-Seidel sweeps. Blocks are sized so the `Phi` bound on each
/// block's length is at most `BLOCK_CONTRACTION`; each block is relaxed with
/// everything else held fixed, then the global residual is checked.
fn continuation(
    problem: &TypeProblem<'_>,
    start: Path,
    tol: f64,
    max_iter: usize,
    spent: usize,
) -> Result<(Path, usize, f64, SolveMethod)> {
    let grid = *problem.grid();
    let delta = problem.contraction_horizon(BLOCK_CONTRACTION);
    let per_block = ((delta / grid.dt()).floor() as usize).clamp(1, grid.n_steps());
    let blocks: Vec<(usize, usize)> = (1..=grid.n_steps())
        .step_by(per_block)
        .map(|s| (s, (s + per_block - 1).min(grid.n_steps())))
        .collect();
    let mut values = start.values().to_vec();
    values[0] = problem.ty().u;
    let mut evals = spent;
    loop {
        let current = Path::new(grid, values.clone())?;
        let residual = problem.residual(&current);
        evals += 1;
        if residual < tol {
            return Ok((current, evals, residual, SolveMethod::Continuation { blocks: blocks.len() }));
        }
        if evals >= max_iter || !residual.is_finite() {
            return Err(Error::NonConvergence {
                residual,
                iterations: evals,
            });
        }
        for &(lo, hi) in &blocks {
            loop {
                let next = problem.phi_values(&Path::new(grid, values.clone())?);
                evals += 1;
                let mut change: f64 = 0.0;
                for i in lo..=hi {
                    change = change.max((next[i] - values[i]).abs());
                    values[i] = next[i];
                }
                if change < 0.1 * tol || evals >= max_iter || !change.is_finite() {
                    break;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{JumpMeasure, ModelParams, NeuronType, TimeGrid};
    use crate::riccati::CoefficientTable;

    fn tables(c: f64, n: usize) -> (ModelParams, JumpMeasure, CoefficientTable) {
        let params = ModelParams::new(0.5, 1.0, 1.0, 0.5, 0.5, 1.0).unwrap();
        let nu = JumpMeasure::new(1.0, vec![(0.5, 1.0)]).unwrap();
        let ty = NeuronType { u: 1.0, a: 1.0, c };
        let grid = TimeGrid::new(1.0, n).unwrap();
        let t = CoefficientTable::build(&ty, &params, &nu, &grid);
        (params, nu, t)
    }

    #[test]
    fn picard_and_continuation_agree() {
        let (params, nu, t) = tables(1.0, 200);
        let prob = TypeProblem::new(&params, &nu, &t);
        let picard = solve_fixed_point(
            &prob,
            &SolverOptions {
                mode: SolverMode::PicardOnly,
                ..Default::default()
            },
        )
        .unwrap();
        let blocks = solve_fixed_point(
            &prob,
            &SolverOptions {
                mode: SolverMode::Continuation,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(picard.method, SolveMethod::Picard);
        assert!(matches!(blocks.method, SolveMethod::Continuation { .. }));
        assert!(picard.residual < 1e-10 && blocks.residual < 1e-10);
        assert!(picard.path.sup_distance(&blocks.path).unwrap() < 1e-9);
    }

    #[test]
    fn fixed_point_without_control_is_explicit() {
        let (params, nu, t) = tables(0.0, 400);
        let prob = TypeProblem::new(&params, &nu, &t);
        let sol = solve_fixed_point(&prob, &SolverOptions::default()).unwrap();
        let rate = prob.spike_feedback();
        let offset = prob.income_offset();
        for (i, tt) in t.grid.nodes().into_iter().enumerate() {
            let exact = (1.0 + offset / rate) * (rate * tt).exp() - offset / rate;
            assert!((sol.path.at(i) - exact).abs() < 1e-5);
        }
    }

    #[test]
    fn budget_exhaustion_reports_non_convergence() {
        let (params, nu, t) = tables(1.0, 50);
        let prob = TypeProblem::new(&params, &nu, &t);
        let err = solve_fixed_point(
            &prob,
            &SolverOptions {
                max_iter: 2,
                mode: SolverMode::PicardOnly,
                ..Default::default()
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::NonConvergence { iterations: 2, .. }));
    }

    #[test]
    fn derivative_attached() {
        let (params, nu, t) = tables(1.0, 400);
        let prob = TypeProblem::new(&params, &nu, &t);
        let sol = solve_fixed_point(&prob, &SolverOptions::default()).unwrap();
        assert!(sol.path.derivative_consistency().unwrap() < 1e-9);
    }
}
