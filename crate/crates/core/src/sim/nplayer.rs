//! Coupled finite population.
//!
//! Neurons sharing a type and a strategy obey the same affine ODE between
//! events, so each such group is tracked by one reference trajectory `R_g`
//! and one log-propagator `L_g`; member `i` is `R_g + exp(L_g) e_i` with a
//! per-neuron offset `e_i` that changes only when neuron `i` spikes. Spike
//! income to every other neuron shifts all references at once. Each event
//! therefore costs `O(groups)` rather than `O(n)`.

use super::{
    march, run_ensemble, sample_jumps, Affine, Event, JumpRecord, McOptions, PathOutput, SamplePath, SharedStrategy,
    SimEnsemble,
};
use crate::error::{Error, Result};
use crate::model::{JumpMeasure, ModelParams, NeuronType, TimeGrid};

/// Finite population: per-neuron types and strategy indices, plus the
/// probe neurons whose costs are recorded.
#[derive(Clone)]
pub struct Population {
    pub types: Vec<NeuronType>,
    pub strategies: Vec<SharedStrategy>,
    /// Strategy index of every neuron.
    pub assignment: Vec<usize>,
    pub probes: Vec<usize>,
}

impl Population {
    pub fn n(&self) -> usize {
        self.types.len()
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 || self.assignment.len() != n {
            return Err(Error::invalid("population", "needs one type and one strategy index per neuron"));
        }
        if self.assignment.iter().any(|&s| s >= self.strategies.len()) {
            return Err(Error::invalid("population", "strategy index out of range"));
        }
        if self.probes.iter().any(|&p| p >= n) {
            return Err(Error::invalid("population", "probe index out of range"));
        }
        Ok(())
    }
}

#[derive(Clone)]
struct Group {
    ty: NeuronType,
    strategy: usize,
    size: f64,
}

/// Partition neurons into groups of equal (type, strategy); probes are singletons.
#[allow(clippy::needless_range_loop)]
fn build_groups(pop: &Population) -> (Vec<Group>, Vec<usize>) {
    let mut groups: Vec<Group> = Vec::new();
    let mut keys: Vec<Option<([u64; 3], usize)>> = Vec::new();
    let mut of = vec![0; pop.n()];
    for i in 0..pop.n() {
        let ty = pop.types[i];
        let key = ([ty.u.to_bits(), ty.a.to_bits(), ty.c.to_bits()], pop.assignment[i]);
        let slot = if pop.probes.contains(&i) {
            None
        } else {
            keys.iter().position(|k| *k == Some(key))
        };
        let g = match slot {
            Some(g) => g,
            None => {
                keys.push((!pop.probes.contains(&i)).then_some(key));
                groups.push(Group {
                    ty,
                    strategy: pop.assignment[i],
                    size: 0.0,
                });
                groups.len() - 1
            }
        };
        groups[g].size += 1.0;
        of[i] = g;
    }
    (groups, of)
}

/// Simulate the coupled system: drift `-a_i (U_i - U_bar) + c_i theta_i`,
/// own spikes `U_j <- U_j (1 - z)` and income `(k z U_j(t-) + ell) / n` to
/// every other neuron. Series 0 is `U_bar`; series `1 + k` is probe `k`.
/// Costs are centred on `U_bar`.
pub fn simulate_n_player(
    pop: &Population,
    params: &ModelParams,
    nu: &JumpMeasure,
    grid: &TimeGrid,
    mc: &McOptions,
) -> Result<SimEnsemble> {
    pop.validate()?;
    let n = pop.n();
    let nf = n as f64;
    let (groups, group_of) = build_groups(pop);
    let g_count = groups.len();
    let probe_groups: Vec<usize> = pop.probes.iter().map(|&i| group_of[i]).collect();
    let n_probes = probe_groups.len();
    let horizon = grid.horizon();
    run_ensemble(*grid, 1 + n_probes, mc, |path| {
        let mut jumps: Vec<(f64, usize, f64)> = Vec::new();
        for j in 0..n {
            let mut rng = mc.rng.stream(path, j as u64);
            jumps.extend(
                sample_jumps(&mut rng, nu, horizon)
                    .into_iter()
                    .map(|(t, atom)| (t, j, nu.atoms()[atom].0)),
            );
        }
        jumps.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut offsets = vec![0.0; n];
        let mut node_values = vec![vec![0.0; grid.len()]; 1 + n_probes];
        let mut stored = mc.store_paths.then(SamplePath::default);
        let mut records = Vec::new();

        // y = [R_g.., L_g.., S_g.., cost_k.., energy_k..] where S_g is the
        // group's offset sum, constant between events.
        let (l0, s0, c0) = (g_count, 2 * g_count, 3 * g_count);
        let e0 = c0 + n_probes;
        let mut y = vec![0.0; 3 * g_count + 2 * n_probes];
        for (g, group) in groups.iter().enumerate() {
            y[g] = group.ty.u;
        }
        let average = |y: &[f64]| -> f64 {
            groups
                .iter()
                .enumerate()
                .map(|(g, gr)| gr.size * y[g] + y[l0 + g].exp() * y[s0 + g])
                .sum::<f64>()
                / nf
        };
        let member = |y: &[f64], g: usize, e: f64| y[g] + y[l0 + g].exp() * e;
        let mut affines = vec![Affine { slope: 0.0, intercept: 0.0 }; g_count];

        march(
            grid,
            &jumps,
            &mut y,
            path,
            |t, y, d| {
                let bar = average(y);
                for (g, gr) in groups.iter().enumerate() {
                    let aff = pop.strategies[gr.strategy].affine(t, bar);
                    affines[g] = aff;
                    let alpha = -gr.ty.a + gr.ty.c * aff.slope;
                    d[g] = alpha * y[g] + gr.ty.a * bar + gr.ty.c * aff.intercept;
                    d[l0 + g] = alpha;
                    d[s0 + g] = 0.0;
                }
                for (k, &g) in probe_groups.iter().enumerate() {
                    let x = member(y, g, y[s0 + g]);
                    let theta = affines[g].eval(x);
                    let dev = x - bar;
                    d[c0 + k] = theta * theta + params.rho * theta * dev + params.beta * dev * dev;
                    d[e0 + k] = theta * theta;
                }
            },
            |event, t, y| {
                match event {
                    Event::Jump { neuron, z } => {
                        let g = group_of[neuron];
                        let before = member(y, g, offsets[neuron]);
                        let after = before * (1.0 - z);
                        if n > 1 {
                            let income = (params.k * z * before + params.ell) / nf;
                            for r in y[..g_count].iter_mut() {
                                *r += income;
                            }
                        }
                        let e = (after - y[g]) / y[l0 + g].exp();
                        y[s0 + g] += e - offsets[neuron];
                        offsets[neuron] = e;
                        if stored.is_some() {
                            records.push(JumpRecord {
                                time: t,
                                neuron,
                                z,
                                before,
                            });
                        }
                    }
                    Event::Node(i) => {
                        node_values[0][i] = average(y);
                        for (k, &g) in probe_groups.iter().enumerate() {
                            node_values[1 + k][i] = member(y, g, y[s0 + g]);
                        }
                    }
                }
                if let Some(s) = stored.as_mut() {
                    let state = (0..n).map(|i| member(y, group_of[i], offsets[i])).collect();
                    s.record(t, state);
                }
            },
        )?;

        let bar = average(&y);
        let mut costs = Vec::with_capacity(n_probes);
        let mut energy = Vec::with_capacity(n_probes);
        for (k, &g) in probe_groups.iter().enumerate() {
            let dev = member(&y, g, y[s0 + g]) - bar;
            costs.push(y[c0 + k] + params.gamma * dev * dev);
            energy.push(y[e0 + k]);
        }
        if let Some(s) = stored.as_mut() {
            s.jumps = records;
        }
        Ok(PathOutput {
            node_values,
            costs,
            energy,
            jumps: jumps.len(),
            path: stored,
        })
    })
}
