//! Jump-adapted Monte Carlo for the representative neuron and for the
//! coupled finite population.
//!
//! Jump times are sampled exactly; between consecutive events (grid nodes
//! and jumps) the drift is integrated with one classical RK4 step, with the
//! running cost carried as an extra state component. Paths are processed in
//! fixed-size chunks whose reductions are merged in chunk order, so results
//! do not depend on the number of worker threads.

mod nplayer;
mod representative;
mod rng;
mod stats;
mod strategy;

pub use nplayer::{simulate_n_player, Population};
pub use representative::{simulate_representative, Representative};
pub use rng::RngSpec;
pub use stats::{poisson_chi_square, ChiSquareTest, RunningStats};
pub use strategy::{
    Affine, ConstantControl, FeedbackStrategy, Retargeted, Scaled, SharedStrategy, Shifted, ZeroControl,
};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{JumpMeasure, TimeGrid};

/// Paths per work unit. Fixed so reductions are scheduling-independent.
const CHUNK: usize = 64;

/// Monte Carlo settings shared by both simulators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McOptions {
    pub n_paths: usize,
    pub rng: RngSpec,
    /// Keep every sample path (debugging; memory grows with paths x events).
    pub store_paths: bool,
}

impl McOptions {
    pub fn new(n_paths: usize, seed: u64) -> Self {
        McOptions {
            n_paths,
            rng: RngSpec::new(seed),
            store_paths: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    pub time: f64,
    pub neuron: usize,
    pub z: f64,
    /// Left limit of the spiking neuron's potential.
    pub before: f64,
}

/// One stored trajectory. `states[k]` holds the right-continuous state of
/// every tracked neuron at `times[k]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub jumps: Vec<JumpRecord>,
}

impl SamplePath {
    fn record(&mut self, t: f64, state: Vec<f64>) {
        if self.times.last() == Some(&t) {
            *self.states.last_mut().expect("paired with times") = state;
        } else {
            self.times.push(t);
            self.states.push(state);
        }
    }
}

/// Reductions over an ensemble of sample paths.
///
/// Series 0 is the tracked average (the representative potential, or the
/// empirical population average); series `1 + k` is probe neuron `k` in the
/// finite game.
#[derive(Debug, Clone)]
pub struct SimEnsemble {
    pub n_paths: usize,
    pub rng: RngSpec,
    pub grid: TimeGrid,
    pub node_stats: Vec<Vec<RunningStats>>,
    /// Per probe, per path: running plus terminal cost.
    pub costs: Vec<Vec<f64>>,
    /// Per probe, per path: `int theta^2 dt`.
    pub control_energy: Vec<Vec<f64>>,
    /// Per path: number of jumps of all simulated neurons.
    pub jump_counts: Vec<usize>,
    pub paths: Option<Vec<SamplePath>>,
}

impl SimEnsemble {
    /// Sample mean and standard error of series 0 at node time `t`.
    pub fn marginal_mean(&self, t: f64) -> Result<(f64, f64)> {
        self.series_mean(0, t)
    }

    pub fn series_mean(&self, series: usize, t: f64) -> Result<(f64, f64)> {
        let i = self.grid.index_of(t).ok_or(Error::Domain {
            t,
            horizon: self.grid.horizon(),
        })?;
        let s = &self.node_stats[series][i];
        Ok((s.mean(), s.standard_error()))
    }

    /// Mean and standard error of probe `k`'s cost.
    pub fn cost_estimate(&self, probe: usize) -> (f64, f64) {
        let s = RunningStats::from_slice(&self.costs[probe]);
        (s.mean(), s.standard_error())
    }
}

/// Everything one path contributes.
#[derive(Debug, Clone)]
struct PathOutput {
    /// `node_values[series][node]`.
    node_values: Vec<Vec<f64>>,
    costs: Vec<f64>,
    energy: Vec<f64>,
    jumps: usize,
    path: Option<SamplePath>,
}

struct ChunkOutput {
    node_stats: Vec<Vec<RunningStats>>,
    outputs: Vec<PathOutput>,
}

/// Run `simulate_path` for every path index and reduce deterministically.
fn run_ensemble<F>(grid: TimeGrid, series: usize, mc: &McOptions, simulate_path: F) -> Result<SimEnsemble>
where
    F: Fn(u64) -> Result<PathOutput> + Sync,
{
    let n_chunks = mc.n_paths.div_ceil(CHUNK);
    let chunks: Vec<ChunkOutput> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(mc.n_paths);
            let mut node_stats = vec![vec![RunningStats::default(); grid.len()]; series];
            let mut outputs = Vec::with_capacity(hi - lo);
            for p in lo..hi {
                let out = simulate_path(p as u64)?;
                for (stats, values) in node_stats.iter_mut().zip(&out.node_values) {
                    for (s, &v) in stats.iter_mut().zip(values) {
                        s.push(v);
                    }
                }
                outputs.push(PathOutput {
                    node_values: Vec::new(),
                    ..out
                });
            }
            Ok(ChunkOutput { node_stats, outputs })
        })
        .collect::<Result<_>>()?;

    let mut node_stats = vec![vec![RunningStats::default(); grid.len()]; series];
    let n_probes = chunks
        .first()
        .and_then(|c| c.outputs.first())
        .map_or(0, |o| o.costs.len());
    let mut costs = vec![Vec::with_capacity(mc.n_paths); n_probes];
    let mut control_energy = vec![Vec::with_capacity(mc.n_paths); n_probes];
    let mut jump_counts = Vec::with_capacity(mc.n_paths);
    let mut paths = mc.store_paths.then(Vec::new);
    for chunk in chunks {
        for (total, part) in node_stats.iter_mut().zip(&chunk.node_stats) {
            for (t, p) in total.iter_mut().zip(part) {
                t.merge(p);
            }
        }
        for out in chunk.outputs {
            for k in 0..n_probes {
                costs[k].push(out.costs[k]);
                control_energy[k].push(out.energy[k]);
            }
            jump_counts.push(out.jumps);
            if let (Some(all), Some(p)) = (paths.as_mut(), out.path) {
                all.push(p);
            }
        }
    }
    Ok(SimEnsemble {
        n_paths: mc.n_paths,
        rng: mc.rng,
        grid,
        node_stats,
        costs,
        control_energy,
        jump_counts,
        paths,
    })
}

/// Jump times on `[0, horizon]` (exponential gaps) with atom indices.
fn sample_jumps(rng: &mut ChaCha8Rng, nu: &JumpMeasure, horizon: f64) -> Vec<(f64, usize)> {
    let mut out = Vec::new();
    let Ok(gap) = Exp::new(nu.rate()) else {
        return out;
    };
    if nu.rate() == 0.0 {
        return out;
    }
    let mut t = 0.0;
    loop {
        t += gap.sample(rng);
        if t > horizon {
            return out;
        }
        let atom = nu.select(rng.random::<f64>());
        out.push((t, atom));
    }
}

/// Classical RK4 step of `y' = f(t, y)` in place.
struct Rk4 {
    k: [Vec<f64>; 4],
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(dim: usize) -> Self {
        Rk4 {
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
        }
    }

    fn step(&mut self, f: &mut impl FnMut(f64, &[f64], &mut [f64]), t: f64, h: f64, y: &mut [f64]) {
        let [k1, k2, k3, k4] = &mut self.k;
        f(t, y, k1);
        for ((tmp, yi), k) in self.tmp.iter_mut().zip(y.iter()).zip(k1.iter()) {
            *tmp = yi + 0.5 * h * k;
        }
        f(t + 0.5 * h, &self.tmp, k2);
        for ((tmp, yi), k) in self.tmp.iter_mut().zip(y.iter()).zip(k2.iter()) {
            *tmp = yi + 0.5 * h * k;
        }
        f(t + 0.5 * h, &self.tmp, k3);
        for ((tmp, yi), k) in self.tmp.iter_mut().zip(y.iter()).zip(k3.iter()) {
            *tmp = yi + h * k;
        }
        f(t + h, &self.tmp, k4);
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
}

/// Event on the augmented grid.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Event {
    Jump { neuron: usize, z: f64 },
    Node(usize),
}

/// Walk the event-augmented grid: integrate to every node and every jump and
/// hand each event to `on_event`, which may modify the state.
fn march<F, E>(
    grid: &TimeGrid,
    jumps: &[(f64, usize, f64)],
    y: &mut [f64],
    path_index: u64,
    mut drift: F,
    mut on_event: E,
) -> Result<()>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    E: FnMut(Event, f64, &mut [f64]),
{
    let mut rk = Rk4::new(y.len());
    let mut t = 0.0;
    let mut next_jump = 0;
    on_event(Event::Node(0), t, y);
    for node in 1..grid.len() {
        let t_node = grid.node(node);
        while next_jump < jumps.len() && jumps[next_jump].0 <= t_node {
            let (tj, neuron, z) = jumps[next_jump];
            if tj > t {
                rk.step(&mut drift, t, tj - t, y);
                t = tj;
                check_finite(y, path_index, t)?;
            }
            on_event(Event::Jump { neuron, z }, t, y);
            next_jump += 1;
        }
        if t_node > t {
            rk.step(&mut drift, t, t_node - t, y);
            t = t_node;
            check_finite(y, path_index, t)?;
        }
        on_event(Event::Node(node), t, y);
    }
    Ok(())
}

fn check_finite(y: &[f64], path: u64, time: f64) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteState {
            path: path as usize,
            time,
        })
    }
}
