//! Cost estimation and certification of the mean-field strategies in the
//! finite game: consistency of the mean path, law-of-large-numbers decay of
//! the empirical average, and the epsilon-Nash gap with a deviation sweep.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::meanfield::{EquilibriumBundle, FeedbackLaw};
use crate::model::{assign_types, TimeGrid};
use crate::path::Path;
use crate::sim::{
    simulate_n_player, simulate_representative, FeedbackStrategy, McOptions, Population, Representative, Retargeted,
    RunningStats, Scaled, SharedStrategy, Shifted, SimEnsemble, ZeroControl,
};

/// Monte Carlo budget and simulation grid resolution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McSettings {
    pub n_paths: usize,
    pub seed: u64,
    pub sim_steps: usize,
    /// Keep sample paths of representative runs.
    pub store_paths: bool,
}

impl McSettings {
    pub fn grid(&self, horizon: f64) -> Result<TimeGrid> {
        TimeGrid::new(horizon, self.sim_steps)
    }

    pub fn new(n_paths: usize, seed: u64, sim_steps: usize) -> Self {
        McSettings {
            n_paths,
            seed,
            sim_steps,
            store_paths: false,
        }
    }

    pub fn options(&self) -> McOptions {
        McOptions {
            store_paths: self.store_paths,
            ..McOptions::new(self.n_paths, self.seed)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Functional {
    /// Cost of a neuron in the finite game, centred on the empirical average.
    NPlayer,
    /// Cost in the decoupled limit problem, centred on the mean path.
    Limit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub se: f64,
    pub n_paths: usize,
    pub functional: Functional,
}

impl CostEstimate {
    fn from_samples(samples: &[f64], functional: Functional) -> Self {
        let s = RunningStats::from_slice(samples);
        CostEstimate {
            mean: s.mean(),
            se: s.standard_error(),
            n_paths: samples.len(),
            functional,
        }
    }
}

/// Paired mean and standard error of `a - b`.
pub fn paired_difference(a: &[f64], b: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let s = RunningStats::from_slice(&d);
    (s.mean(), s.standard_error())
}

/// Monte Carlo cost of probe neuron `probe` of a population.
pub fn cost_nplayer(
    probe: usize,
    pop: &Population,
    bundle: &EquilibriumBundle,
    mc: &McSettings,
) -> Result<CostEstimate> {
    let pop = Population {
        probes: vec![probe],
        ..pop.clone()
    };
    let model = &bundle.model;
    let ens = simulate_n_player(&pop, &model.params, &model.jump, &mc.grid(model.params.horizon)?, &mc.options())?;
    Ok(CostEstimate::from_samples(&ens.costs[0], Functional::NPlayer))
}

/// Feedback law of type `index` centred on the aggregated mean field.
pub fn aggregated_law(bundle: &EquilibriumBundle, index: usize) -> Result<FeedbackLaw> {
    FeedbackLaw::build(&bundle.problem(index), &bundle.m_u_star, &bundle.m_phi_star)
}

/// `V(0, u)` of type `index` in the limit problem.
pub fn limiting_optimum(bundle: &EquilibriumBundle, index: usize) -> Result<f64> {
    let law = aggregated_law(bundle, index)?;
    Ok(law.value_function(0.0, bundle.types[index].ty.u))
}

/// Simulate the limit problem of type `index` under `controller`, driving
/// the spikes with neuron substream `neuron_stream`.
pub fn simulate_limit(
    bundle: &EquilibriumBundle,
    index: usize,
    controller: &dyn FeedbackStrategy,
    neuron_stream: u64,
    mc: &McSettings,
) -> Result<SimEnsemble> {
    let model = &bundle.model;
    let rep = Representative {
        ty: bundle.types[index].ty,
        params: &model.params,
        nu: &model.jump,
        controller,
        m_u: &bundle.m_u_star,
        m_phi: &bundle.m_phi_star,
        neuron_stream,
    };
    simulate_representative(&rep, &mc.grid(model.params.horizon)?, &mc.options())
}

/// The declared deviation family around an equilibrium law, with labels.
/// The first member is the law itself.
pub fn deviation_family(law: &FeedbackLaw) -> Vec<(String, SharedStrategy)> {
    let star: SharedStrategy = Arc::new(law.clone());
    let mut out: Vec<(String, SharedStrategy)> = vec![("theta_star".into(), star.clone())];
    for factor in [0.9, 1.1, 0.75, 1.25] {
        out.push((
            format!("scaled_{factor}"),
            Arc::new(Scaled {
                inner: star.clone(),
                factor,
            }),
        ));
    }
    for sign in [1.0, -1.0] {
        let shift = sign * 0.1 * law.c;
        out.push((
            format!("shifted_{shift:+}"),
            Arc::new(Shifted {
                inner: star.clone(),
                shift,
            }),
        ));
    }
    out.push(("zero".into(), Arc::new(ZeroControl)));
    out.push(("retargeted".into(), Arc::new(Retargeted(law.clone()))));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationOutcome {
    pub label: String,
    /// `J_i(theta*) - J_i(deviation)`, common random numbers.
    pub improvement: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRecord {
    pub n: usize,
    pub atom: usize,
    pub neuron: usize,
    pub j_star: CostEstimate,
    pub v_limit: f64,
    /// `J_i(theta*) - V`, estimated as the paired difference between the
    /// finite-game cost and the limit-problem cost on the same spikes.
    pub gap: f64,
    pub gap_se: f64,
    pub deviations: Vec<DeviationOutcome>,
}

impl GapRecord {
    pub fn best_deviation(&self) -> &DeviationOutcome {
        self.deviations
            .iter()
            .max_by(|a, b| a.improvement.total_cmp(&b.improvement))
            .expect("deviation family is non-empty")
    }

    /// No deviation improves by more than the gap plus three combined standard errors.
    pub fn certificate_holds(&self) -> bool {
        self.deviations
            .iter()
            .all(|d| d.improvement <= self.gap + 3.0 * self.gap_se.hypot(d.se))
    }
}

/// Per-neuron types, equilibrium strategies and probe (lowest index per atom).
fn equilibrium_population(bundle: &EquilibriumBundle, n: usize) -> (Population, Vec<usize>) {
    let dist = &bundle.model.types;
    let assignment = dist.assignment(n);
    let types = assign_types(dist, n);
    let strategies: Vec<SharedStrategy> = bundle
        .types
        .iter()
        .map(|t| Arc::new(t.law.clone()) as SharedStrategy)
        .collect();
    let probes: Vec<usize> = (0..dist.len())
        .filter_map(|m| assignment.iter().position(|&a| a == m))
        .collect();
    (
        Population {
            types,
            strategies,
            assignment,
            probes: probes.clone(),
        },
        probes,
    )
}

/// Gap records for every `n` and every type atom present at that `n`.
pub fn nash_gap_curve(bundle: &EquilibriumBundle, n_list: &[usize], mc: &McSettings) -> Result<Vec<GapRecord>> {
    let model = &bundle.model;
    let grid = mc.grid(model.params.horizon)?;
    let opts = mc.options();
    let mut records = Vec::new();
    for &n in n_list {
        let (pop, probes) = equilibrium_population(bundle, n);
        let base = simulate_n_player(&pop, &model.params, &model.jump, &grid, &opts)?;
        for (k, &neuron) in probes.iter().enumerate() {
            let atom = pop.assignment[neuron];
            let law = &bundle.types[atom].law;
            let limit = simulate_limit(bundle, atom, law, neuron as u64, mc)?;
            let (gap, gap_se) = paired_difference(&base.costs[k], &limit.costs[0]);
            let mut deviations = Vec::new();
            for (label, strategy) in deviation_family(law) {
                let mut strategies = pop.strategies.clone();
                strategies.push(strategy);
                let mut assignment = pop.assignment.clone();
                assignment[neuron] = strategies.len() - 1;
                let deviated = Population {
                    types: pop.types.clone(),
                    strategies,
                    assignment,
                    probes: vec![neuron],
                };
                let ens = simulate_n_player(&deviated, &model.params, &model.jump, &grid, &opts)?;
                let (improvement, se) = paired_difference(&base.costs[k], &ens.costs[0]);
                deviations.push(DeviationOutcome { label, improvement, se });
            }
            records.push(GapRecord {
                n,
                atom,
                neuron,
                j_star: CostEstimate::from_samples(&base.costs[k], Functional::NPlayer),
                v_limit: limiting_optimum(bundle, atom)?,
                gap,
                gap_se,
                deviations,
            });
        }
    }
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LlnRecord {
    pub n: usize,
    pub t: f64,
    /// Monte Carlo `E |U_bar_t - m*(t)|^2`.
    pub metric: f64,
    pub mean_bar: f64,
}

/// Squared deviation of the empirical average from the aggregated mean path.
pub fn lln_check(bundle: &EquilibriumBundle, n_list: &[usize], t_list: &[f64], mc: &McSettings) -> Result<Vec<LlnRecord>> {
    let model = &bundle.model;
    let grid = mc.grid(model.params.horizon)?;
    let mut out = Vec::new();
    for &n in n_list {
        let (mut pop, _) = equilibrium_population(bundle, n);
        pop.probes.clear();
        let ens = simulate_n_player(&pop, &model.params, &model.jump, &grid, &mc.options())?;
        for &t in t_list {
            let i = grid.index_of(t).ok_or(Error::Domain {
                t,
                horizon: grid.horizon(),
            })?;
            let stats = &ens.node_stats[0][i];
            out.push(LlnRecord {
                n,
                t,
                metric: stats.mean_square_about(bundle.m_u_star.eval(t)),
                mean_bar: stats.mean(),
            });
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConsistencyRow {
    pub t: f64,
    pub mc_mean: f64,
    pub se: f64,
    pub reference: f64,
    pub z: f64,
    /// `k m1 E_MC[U_t] + ell nu([0,1])` against the equilibrium `m_phi(t)`.
    pub m_phi_mc: f64,
    pub m_phi: f64,
}

/// Deterministic-case tolerance when the Monte Carlo error vanishes.
const DETERMINISTIC_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub atom: usize,
    pub rows: Vec<ConsistencyRow>,
    /// The underlying representative ensemble (costs, jump counts, paths).
    #[serde(skip)]
    pub ensemble: SimEnsemble,
}

impl ConsistencyReport {
    /// First row whose z-score exceeds 3.
    pub fn violation(&self) -> Option<&ConsistencyRow> {
        self.rows.iter().find(|r| r.z.abs() > 3.0)
    }

    /// The report, or `ConsistencyViolation` at the first offending checkpoint.
    pub fn check(self) -> Result<Self> {
        match self.violation() {
            Some(r) => Err(Error::ConsistencyViolation { t: r.t, z: r.z }),
            None => Ok(self),
        }
    }

    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.z.abs()))
    }
}

/// Simulate type `atom` under its equilibrium law and compare the Monte
/// Carlo mean at `checkpoints` with `reference` (the equilibrium mean path
/// when `None`).
pub fn consistency_report(
    bundle: &EquilibriumBundle,
    atom: usize,
    checkpoints: &[f64],
    reference: Option<&Path>,
    mc: &McSettings,
) -> Result<ConsistencyReport> {
    let model = &bundle.model;
    let te = &bundle.types[atom];
    let law = &te.law;
    let rep = Representative {
        ty: te.ty,
        params: &model.params,
        nu: &model.jump,
        controller: law,
        m_u: &law.m_u,
        m_phi: &law.m_phi,
        neuron_stream: 0,
    };
    let ens = simulate_representative(&rep, &mc.grid(model.params.horizon)?, &mc.options())?;
    let target = reference.unwrap_or(&law.m_u);
    let slope = model.params.k * model.jump.m1();
    let offset = model.income_offset();
    let rows = checkpoints
        .iter()
        .map(|&t| {
            let (mc_mean, se) = ens.marginal_mean(t)?;
            let reference = target.eval(t);
            let diff = mc_mean - reference;
            let z = if se > 0.0 {
                diff / se
            } else if diff.abs() <= DETERMINISTIC_TOL {
                0.0
            } else {
                f64::INFINITY.copysign(diff)
            };
            Ok(ConsistencyRow {
                t,
                mc_mean,
                se,
                reference,
                z,
                m_phi_mc: slope * mc_mean + offset,
                m_phi: law.m_phi.eval(t),
            })
        })
        .collect::<Result<_>>()?;
    Ok(ConsistencyReport {
        atom,
        rows,
        ensemble: ens,
    })
}

/// Consistency report that fails with `ConsistencyViolation` beyond 3 standard errors.
pub fn consistency_check(
    bundle: &EquilibriumBundle,
    atom: usize,
    checkpoints: &[f64],
    mc: &McSettings,
) -> Result<ConsistencyReport> {
    consistency_report(bundle, atom, checkpoints, None, mc)?.check()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::{solve_equilibrium, SolverOptions};
    use crate::model::{JumpMeasure, Model, ModelParams, NeuronType, TypeDistribution};

    fn bundle(rate: f64, n_steps: usize) -> EquilibriumBundle {
        let params = ModelParams::new(0.5, 1.0, 1.0, 0.5, 0.5, 1.0).unwrap();
        let nu = JumpMeasure::new(rate, vec![(0.5, 1.0)]).unwrap();
        let ty = NeuronType::new(1.0, 1.0, 1.0).unwrap();
        let model = Model::new(params, nu, TypeDistribution::single(ty), n_steps).unwrap();
        solve_equilibrium(&model, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn silent_equilibrium_is_deterministically_consistent() {
        let b = bundle(0.0, 2000);
        let mc = McSettings::new(2, 1, 200);
        let checkpoints: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let report = consistency_check(&b, 0, &checkpoints, &mc).unwrap();
        assert!(report.rows.iter().all(|r| r.se == 0.0 && r.z == 0.0));
        let bumped = b.m_u_star.affine(1.05, 0.0);
        let bad = consistency_report(&b, 0, &checkpoints, Some(&bumped), &mc).unwrap();
        assert!(bad.check().is_err());
    }

    #[test]
    fn theta_star_member_has_zero_improvement() {
        let b = bundle(1.0, 400);
        let mc = McSettings::new(64, 3, 50);
        let records = nash_gap_curve(&b, &[4], &mc).unwrap();
        assert_eq!(records.len(), 1);
        let r = &records[0];
        assert_eq!(r.deviations[0].label, "theta_star");
        assert_eq!(r.deviations[0].improvement, 0.0);
        assert_eq!(r.deviations.len(), 9);
        assert!(r.gap.is_finite() && r.gap_se > 0.0);
    }

    #[test]
    fn single_neuron_zero_control_costs_nothing() {
        let b = bundle(1.0, 400);
        let pop = Population {
            types: vec![b.types[0].ty],
            strategies: vec![Arc::new(ZeroControl)],
            assignment: vec![0],
            probes: vec![],
        };
        let mc = McSettings::new(32, 0, 20);
        let est = cost_nplayer(0, &pop, &b, &mc).unwrap();
        assert_eq!((est.mean, est.se), (0.0, 0.0));
    }

    #[test]
    fn paired_difference_of_identical_samples() {
        let a = [1.0, 2.0, 5.0];
        assert_eq!(paired_difference(&a, &a), (0.0, 0.0));
    }
}
