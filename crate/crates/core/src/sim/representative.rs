use super::{march, Event, run_ensemble, sample_jumps, FeedbackStrategy, JumpRecord, McOptions, PathOutput, SamplePath, SimEnsemble};
use crate::error::Result;
use crate::model::{JumpMeasure, ModelParams, NeuronType, TimeGrid};
use crate::path::Path;

/// A representative neuron facing deterministic mean paths.
#[derive(Clone, Copy)]
pub struct Representative<'a> {
    pub ty: NeuronType,
    pub params: &'a ModelParams,
    pub nu: &'a JumpMeasure,
    pub controller: &'a dyn FeedbackStrategy,
    pub m_u: &'a Path,
    pub m_phi: &'a Path,
    /// Neuron substream that drives the jumps, so a representative path can
    /// share its spikes with a chosen neuron of a finite-population run.
    pub neuron_stream: u64,
}

/// Simulate `dU = [-a (U - m_U) + c theta(t, U) + m_phi] dt` with own-spike
/// resets `U <- U (1 - z)`, accumulating the running and terminal cost
/// centred on `m_U`. Series 0 of the result is `U` at the grid nodes.
pub fn simulate_representative(rep: &Representative<'_>, grid: &TimeGrid, mc: &McOptions) -> Result<SimEnsemble> {
    let ty = rep.ty;
    let p = rep.params;
    let horizon = grid.horizon();
    run_ensemble(*grid, 1, mc, |path| {
        let mut rng = mc.rng.stream(path, rep.neuron_stream);
        let jumps: Vec<(f64, usize, f64)> = sample_jumps(&mut rng, rep.nu, horizon)
            .into_iter()
            .map(|(t, atom)| (t, 0, rep.nu.atoms()[atom].0))
            .collect();
        let mut nodes = vec![0.0; grid.len()];
        let mut stored = mc.store_paths.then(SamplePath::default);
        // y = [U, running cost, int theta^2]
        let mut y = [ty.u, 0.0, 0.0];
        let drift = |t: f64, y: &[f64], d: &mut [f64]| {
            let m = rep.m_u.eval(t);
            let x = y[0];
            let theta = rep.controller.control(t, x, m);
            let dev = x - m;
            d[0] = -ty.a * dev + ty.c * theta + rep.m_phi.eval(t);
            d[1] = theta * theta + p.rho * theta * dev + p.beta * dev * dev;
            d[2] = theta * theta;
        };
        let mut records = Vec::new();
        march(
            grid,
            &jumps,
            &mut y,
            path,
            drift,
            |event, t, y| {
                match event {
                    Event::Jump { neuron, z } => {
                        let before = y[0];
                        y[0] = before * (1.0 - z);
                        if stored.is_some() {
                            records.push(JumpRecord { time: t, neuron, z, before });
                        }
                    }
                    Event::Node(i) => nodes[i] = y[0],
                }
                if let Some(s) = stored.as_mut() {
                    s.record(t, vec![y[0]]);
                }
            },
        )?;
        let terminal = y[0] - rep.m_u.last();
        let cost = y[1] + p.gamma * terminal * terminal;
        if let Some(s) = stored.as_mut() {
            s.jumps = records;
        }
        Ok(PathOutput {
            node_values: vec![nodes],
            costs: vec![cost],
            energy: vec![y[2]],
            jumps: jumps.len(),
            path: stored,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{ConstantControl, ZeroControl};

    fn params() -> ModelParams {
        ModelParams::new(0.5, 1.0, 1.0, 0.5, 0.5, 1.0).unwrap()
    }

    #[test]
    fn relaxation_without_jumps_is_exact() {
        let params = params();
        let nu = JumpMeasure::silent();
        let grid = TimeGrid::new(1.0, 1000).unwrap();
        let m = Path::constant(grid, 0.3);
        let zero = Path::constant(grid, 0.0);
        let ty = NeuronType::new(1.2, 1.5, 1.0).unwrap();
        let rep = Representative {
            ty,
            params: &params,
            nu: &nu,
            controller: &ZeroControl,
            m_u: &m,
            m_phi: &zero,
            neuron_stream: 0,
        };
        let ens = simulate_representative(&rep, &grid, &McOptions::new(3, 1)).unwrap();
        for (i, t) in grid.nodes().into_iter().enumerate() {
            let exact = 0.3 + 0.9 * (-1.5 * t).exp();
            let (mean, se) = ens.marginal_mean(t).unwrap();
            assert!((mean - exact).abs() < 1e-10, "node {i}");
            assert_eq!(se, 0.0);
        }
    }

    #[test]
    fn constant_control_cost_is_deterministic() {
        let params = params();
        let nu = JumpMeasure::silent();
        let grid = TimeGrid::new(1.0, 10).unwrap();
        let ty = NeuronType { u: 0.0, a: 1.0, c: 0.0 };
        let zero = Path::constant(grid, 0.0);
        let rep = Representative {
            ty,
            params: &params,
            nu: &nu,
            controller: &ConstantControl(0.7),
            m_u: &zero,
            m_phi: &zero,
            neuron_stream: 0,
        };
        let ens = simulate_representative(&rep, &grid, &McOptions::new(2, 9)).unwrap();
        assert!((ens.costs[0][0] - 0.49).abs() < 1e-14);
        assert!((ens.control_energy[0][1] - 0.49).abs() < 1e-14);
    }

    #[test]
    fn stored_paths_match_reductions() {
        let params = params();
        let nu = JumpMeasure::new(3.0, vec![(0.5, 1.0)]).unwrap();
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let ty = NeuronType::new(1.0, 1.0, 1.0).unwrap();
        let m = Path::constant(grid, 1.0);
        let mut mc = McOptions::new(5, 3);
        mc.store_paths = true;
        let rep = Representative {
            ty,
            params: &params,
            nu: &nu,
            controller: &ZeroControl,
            m_u: &m,
            m_phi: &m,
            neuron_stream: 0,
        };
        let ens = simulate_representative(&rep, &grid, &mc).unwrap();
        let paths = ens.paths.as_ref().unwrap();
        let terminal: Vec<f64> = paths.iter().map(|p| p.states.last().unwrap()[0]).collect();
        let mean = terminal.iter().sum::<f64>() / 5.0;
        assert!((ens.marginal_mean(1.0).unwrap().0 - mean).abs() < 1e-14);
        for (p, &count) in paths.iter().zip(&ens.jump_counts) {
            assert_eq!(p.jumps.len(), count);
            assert!(p.times.windows(2).all(|w| w[0] < w[1]));
            for j in &p.jumps {
                let k = p.times.iter().position(|&t| t == j.time).unwrap();
                assert_eq!(p.states[k][0], j.before * (1.0 - j.z));
            }
        }
    }
}
