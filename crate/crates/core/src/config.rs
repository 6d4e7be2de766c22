//! JSON run configuration.

use std::path::{Path as FsPath, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::McSettings;
use crate::meanfield::SolverOptions;
use crate::model::{JumpMeasure, Model, ModelParams, NeuronType, TypeDistribution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    SolveMfe,
    Consistency,
    NashGap,
    Lln,
    Verify,
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::SolveMfe => "solve-mfe",
            Experiment::Consistency => "consistency",
            Experiment::NashGap => "nash-gap",
            Experiment::Lln => "lln",
            Experiment::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpConfig {
    pub rate: f64,
    /// `[z, q]` pairs.
    pub atoms: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TypesConfig {
    /// `[u, a, c, weight]` rows.
    pub atoms: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McConfig {
    pub n_paths: usize,
    pub seed: u64,
    #[serde(default = "default_sim_steps")]
    pub sim_steps: usize,
    /// Worker threads; all cores when absent. `NEUROMFG_THREADS` overrides.
    #[serde(default)]
    pub threads: Option<usize>,
    #[serde(default)]
    pub store_paths: bool,
}

fn default_sim_steps() -> usize {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            tol: 1e-10,
            max_iter: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub params: ModelParams,
    pub jump: JumpConfig,
    pub types: TypesConfig,
    pub grid: GridConfig,
    pub mc: McConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub n_list: Vec<usize>,
    #[serde(default)]
    pub t_checks: Vec<f64>,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

fn config_error(e: impl std::fmt::Display) -> Error {
    Error::Config(e.to_string())
}

impl RunConfig {
    /// Parse and validate.
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(config_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &FsPath) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn jump_measure(&self) -> Result<JumpMeasure> {
        JumpMeasure::new(self.jump.rate, self.jump.atoms.iter().map(|&[z, q]| (z, q)).collect())
    }

    pub fn type_distribution(&self) -> Result<TypeDistribution> {
        let atoms = self
            .types
            .atoms
            .iter()
            .map(|&[u, a, c, w]| Ok((NeuronType::new(u, a, c)?, w)))
            .collect::<Result<Vec<_>>>()?;
        TypeDistribution::new(atoms)
    }

    pub fn model(&self) -> Result<Model> {
        Model::new(self.params, self.jump_measure()?, self.type_distribution()?, self.grid.n_steps)
    }

    pub fn mc_settings(&self) -> McSettings {
        McSettings {
            store_paths: self.mc.store_paths,
            ..McSettings::new(self.mc.n_paths, self.mc.seed, self.mc.sim_steps)
        }
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            ..SolverOptions::default()
        }
    }

    /// Checkpoints for consistency and LLN runs: `t_checks`, or the
    /// experiment's default set.
    pub fn checkpoints(&self) -> Vec<f64> {
        if !self.t_checks.is_empty() {
            return self.t_checks.clone();
        }
        let horizon = self.params.horizon;
        match self.experiment {
            Experiment::Lln => vec![0.5 * horizon, horizon],
            _ => (0..=20).map(|i| horizon * i as f64 / 20.0).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.model()?;
        if self.mc.n_paths == 0 {
            return Err(config_error("mc.n_paths must be positive"));
        }
        if self.mc.sim_steps == 0 {
            return Err(config_error("mc.sim_steps must be positive"));
        }
        if self.mc.threads == Some(0) {
            return Err(config_error("mc.threads must be positive"));
        }
        if !(self.solver.tol.is_finite() && self.solver.tol > 0.0) || self.solver.max_iter == 0 {
            return Err(config_error("solver.tol and solver.max_iter must be positive"));
        }
        if self.n_list.contains(&0) || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_error("n_list must be strictly increasing positive integers"));
        }
        if matches!(self.experiment, Experiment::NashGap | Experiment::Lln) && self.n_list.is_empty() {
            return Err(config_error(format!("experiment {} needs a non-empty n_list", self.experiment.name())));
        }
        let sim_grid = self.mc_settings().grid(self.params.horizon)?;
        for &t in &self.checkpoints() {
            if sim_grid.index_of(t).is_none() {
                return Err(config_error(format!(
                    "t_checks entry {t} is not a node of the simulation grid (T / {})",
                    self.mc.sim_steps
                )));
            }
        }
        Ok(())
    }
}
