//! Model constants shared by every neuron: cost and coupling scalars, the
//! spike measure, the type distribution and the time grid.
//!
//! All types are plain immutable values once constructed. Fields are public
//! so that degenerate configurations (e.g. `ell = 0` or `u = 0`) can be built
//! directly in tests; the `new` constructors and the config loader enforce
//! the full invariants.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cost and coupling scalars.
///
/// The connection strength between neurons is the linear map
/// `phi(x) = k * x + ell`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    /// Cross weight between control and deviation in the running cost.
    pub rho: f64,
    /// Weight of the squared deviation in the running cost.
    pub beta: f64,
    /// Weight of the squared terminal deviation.
    pub gamma: f64,
    /// Synaptic slope of `phi`.
    pub k: f64,
    /// Synaptic offset of `phi`.
    pub ell: f64,
    /// Horizon.
    #[serde(rename = "T")]
    pub horizon: f64,
}

impl ModelParams {
    pub fn new(rho: f64, beta: f64, gamma: f64, k: f64, ell: f64, horizon: f64) -> Result<Self> {
        let params = ModelParams {
            rho,
            beta,
            gamma,
            k,
            ell,
            horizon,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("rho", self.rho),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("k", self.k),
            ("ell", self.ell),
            ("T", self.horizon),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("must be finite and > 0, got {v}")));
            }
        }
        if self.rho * self.rho >= 4.0 * self.beta {
            return Err(Error::invalid(
                "rho",
                format!(
                    "running cost is not convex: rho^2 = {} >= 4 beta = {}",
                    self.rho * self.rho,
                    4.0 * self.beta
                ),
            ));
        }
        Ok(())
    }

    /// Connection strength `phi(x) = k x + ell`.
    pub fn phi(&self, x: f64) -> f64 {
        self.k * x + self.ell
    }

    /// `rho^2 / 4 - beta`, negative under the convexity condition.
    pub fn cost_discriminant(&self) -> f64 {
        0.25 * self.rho * self.rho - self.beta
    }

    /// Coercivity constant `1 - rho^2 / (4 beta)` of the running cost in the control.
    pub fn coercivity(&self) -> f64 {
        1.0 - self.rho * self.rho / (4.0 * self.beta)
    }
}

/// Type vector `p = (u, a, c)` of a neuron class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronType {
    /// Initial membrane potential.
    pub u: f64,
    /// Gap-junction drift rate.
    pub a: f64,
    /// Control scale factor.
    pub c: f64,
}

impl NeuronType {
    pub fn new(u: f64, a: f64, c: f64) -> Result<Self> {
        let ty = NeuronType { u, a, c };
        ty.validate()?;
        Ok(ty)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("u", self.u), ("a", self.a), ("c", self.c)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("type entries must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Euclidean distance between type vectors.
    pub fn distance(&self, other: &NeuronType) -> f64 {
        ((self.u - other.u).powi(2) + (self.a - other.a).powi(2) + (self.c - other.c).powi(2)).sqrt()
    }
}

/// Finite-activity spike measure `nu` on `[0, 1]`: total mass `rate`
/// distributed over atoms `(z_j, q_j)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpMeasure {
    rate: f64,
    atoms: Vec<(f64, f64)>,
    cumulative: Vec<f64>,
    m1: f64,
    m2: f64,
}

impl JumpMeasure {
    pub fn new(rate: f64, atoms: Vec<(f64, f64)>) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::invalid("rate", format!("must be finite and >= 0, got {rate}")));
        }
        if atoms.is_empty() {
            return Err(Error::invalid("atoms", "at least one atom is required"));
        }
        let mut total = 0.0;
        for &(z, q) in &atoms {
            if !(0.0..=1.0).contains(&z) {
                return Err(Error::invalid("atoms", format!("mark {z} outside [0, 1]")));
            }
            if !(q.is_finite() && q > 0.0) {
                return Err(Error::invalid("atoms", format!("probability {q} must be > 0")));
            }
            total += q;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("atoms", format!("probabilities sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cumulative = atoms
            .iter()
            .map(|&(_, q)| {
                acc += q;
                acc
            })
            .collect();
        let m1 = rate * atoms.iter().map(|&(z, q)| q * z).sum::<f64>();
        let m2 = rate * atoms.iter().map(|&(z, q)| q * z * z).sum::<f64>();
        Ok(JumpMeasure {
            rate,
            atoms,
            cumulative,
            m1,
            m2,
        })
    }

    /// Measure with no spikes at all.
    pub fn silent() -> Self {
        JumpMeasure::new(0.0, vec![(0.0, 1.0)]).expect("valid silent measure")
    }

    /// Total mass `nu([0, 1])`, the spike rate.
    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn atoms(&self) -> &[(f64, f64)] {
        &self.atoms
    }

    /// `int z nu(dz)`.
    pub fn m1(&self) -> f64 {
        self.m1
    }

    /// `int z^2 nu(dz)`.
    pub fn m2(&self) -> f64 {
        self.m2
    }

    /// `int (z^2 - 2z) nu(dz)`.
    pub fn compensated_moment(&self) -> f64 {
        self.m2 - 2.0 * self.m1
    }

    /// Index of the atom selected by a uniform draw in `[0, 1)`.
    pub fn select(&self, uniform: f64) -> usize {
        self.cumulative
            .iter()
            .position(|&c| uniform < c)
            .unwrap_or(self.atoms.len() - 1)
    }

    /// Integral of `f(z)` against `nu`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.rate * self.atoms.iter().map(|&(z, q)| q * f(z)).sum::<f64>()
    }
}

/// First and second spike-mark moments `(int z nu, int z^2 nu)`.
pub fn jump_moments(nu: &JumpMeasure) -> (f64, f64) {
    (nu.m1(), nu.m2())
}

/// Type distribution with finitely many atoms.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeDistribution {
    atoms: Vec<(NeuronType, f64)>,
}

impl TypeDistribution {
    pub fn new(atoms: Vec<(NeuronType, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("types", "at least one type atom is required"));
        }
        let mut total = 0.0;
        for (ty, w) in &atoms {
            ty.validate()?;
            if !(w.is_finite() && *w > 0.0) {
                return Err(Error::invalid("types", format!("weight {w} must be > 0")));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid("types", format!("weights sum to {total}, not 1")));
        }
        Ok(TypeDistribution { atoms })
    }

    /// Degenerate distribution on one type. The type is not validated, so
    /// relaxed test configurations can use it.
    pub fn single(ty: NeuronType) -> Self {
        TypeDistribution {
            atoms: vec![(ty, 1.0)],
        }
    }

    pub fn atoms(&self) -> &[(NeuronType, f64)] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Number of neurons each atom receives out of `n`: `floor(n w_m)` plus
    /// one extra slot for the atoms with the largest remainders (ties go to
    /// the lower index).
    pub fn counts(&self, n: usize) -> Vec<usize> {
        let scaled: Vec<f64> = self.atoms.iter().map(|(_, w)| n as f64 * w).collect();
        let mut counts: Vec<usize> = scaled.iter().map(|s| s.floor() as usize).collect();
        let assigned: usize = counts.iter().sum();
        let mut order: Vec<usize> = (0..counts.len()).collect();
        order.sort_by(|&i, &j| {
            let ri = scaled[i] - scaled[i].floor();
            let rj = scaled[j] - scaled[j].floor();
            rj.total_cmp(&ri).then(i.cmp(&j))
        });
        for &m in order.iter().take(n.saturating_sub(assigned)) {
            counts[m] += 1;
        }
        counts
    }

    /// Atom index of every neuron in a population of `n`, in contiguous blocks.
    pub fn assignment(&self, n: usize) -> Vec<usize> {
        self.counts(n)
            .iter()
            .enumerate()
            .flat_map(|(m, &count)| std::iter::repeat_n(m, count))
            .collect()
    }

    /// Wasserstein-1 distance to the empirical measure of an `n`-neuron
    /// assignment, for distributions with at most two atoms (the transport
    /// plan is then unique).
    pub fn two_atom_w1(&self, n: usize) -> Option<f64> {
        match self.atoms.as_slice() {
            [_] => Some(0.0),
            [(p0, w0), (p1, _)] => {
                let c0 = self.counts(n)[0] as f64 / n as f64;
                Some((c0 - w0).abs() * p0.distance(p1))
            }
            _ => None,
        }
    }
}

/// Deterministic stratified assignment of `n` neurons to the type atoms.
pub fn assign_types(dist: &TypeDistribution, n: usize) -> Vec<NeuronType> {
    dist.assignment(n)
        .into_iter()
        .map(|m| dist.atoms[m].0)
        .collect()
}

/// Uniform grid `0 = t_0 < ... < t_N = T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    n_steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, n_steps: usize) -> Result<Self> {
        if !(horizon.is_finite() && horizon > 0.0) {
            return Err(Error::invalid("T", format!("must be finite and > 0, got {horizon}")));
        }
        if n_steps == 0 {
            return Err(Error::invalid("n_steps", "must be positive"));
        }
        Ok(TimeGrid { horizon, n_steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i >= self.n_steps {
            self.horizon
        } else {
            self.horizon * i as f64 / self.n_steps as f64
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.node(i)).collect()
    }

    /// Index of `t` if it coincides with a node (to within 1e-9 of a step).
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = t / self.dt();
        let i = x.round();
        if i < 0.0 || i > self.n_steps as f64 || (x - i).abs() > 1e-9 {
            None
        } else {
            Some(i as usize)
        }
    }

    /// Cell index `i` with `t_i <= t <= t_{i+1}`, clamped to the grid.
    pub fn cell(&self, t: f64) -> usize {
        let i = (t / self.dt()).floor();
        if i <= 0.0 {
            0
        } else {
            (i as usize).min(self.n_steps - 1)
        }
    }

    /// Same grid with `factor` times as many steps.
    pub fn refined(&self, factor: usize) -> TimeGrid {
        TimeGrid {
            horizon: self.horizon,
            n_steps: self.n_steps * factor,
        }
    }
}

/// Everything needed to pose the game.
#[derive(Debug, Clone)]
pub struct Model {
    pub params: ModelParams,
    pub jump: JumpMeasure,
    pub types: TypeDistribution,
    pub grid: TimeGrid,
}

impl Model {
    pub fn new(params: ModelParams, jump: JumpMeasure, types: TypeDistribution, n_steps: usize) -> Result<Self> {
        params.validate()?;
        let grid = TimeGrid::new(params.horizon, n_steps)?;
        Ok(Model {
            params,
            jump,
            types,
            grid,
        })
    }

    /// Mean spike income offset `int ell nu(dz) = ell * nu([0, 1])`.
    pub fn income_offset(&self) -> f64 {
        income_offset(&self.params, &self.jump)
    }
}

/// Mean spike income offset `ell * nu([0, 1])`.
pub fn income_offset(params: &ModelParams, nu: &JumpMeasure) -> f64 {
    params.ell * nu.rate()
}
