//! Experiment orchestration and artifact emission.
//!
//! Numbers are written with 17 significant digits. The manifest echoes the
//! full configuration, so it alone reproduces every CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path as FsPath, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::config::{Experiment, RunConfig};
use crate::error::{Error, Result};
use crate::game::{consistency_report, lln_check, nash_gap_curve, ConsistencyReport};
use crate::meanfield::{b_coeff, c_coeff, solve_equilibrium, EquilibriumBundle};
use crate::verify::run_suite;

/// Environment variable overriding the worker count.
pub const THREADS_ENV: &str = "NEUROMFG_THREADS";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Worker threads; takes precedence over the environment and the config.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<String>,
    pub threads: usize,
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text assembled in memory and written in one go.
struct Csv {
    text: String,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        Csv {
            text: header.join(",") + "\n",
        }
    }

    fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        fs::write(self.dir.join(name), contents)?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn csv(&mut self, name: &str, csv: Csv) -> Result<()> {
        self.write(name, &csv.text)
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    experiment: &'static str,
    status: &'a str,
    seed: u64,
    threads: usize,
    grid: GridEcho,
    sim_grid: GridEcho,
    tolerances: Tolerances,
    wall_time_seconds: f64,
    outputs: &'a [String],
    config: &'a RunConfig,
}

#[derive(Serialize)]
struct GridEcho {
    horizon: f64,
    n_steps: usize,
    dt: f64,
}

#[derive(Serialize)]
struct Tolerances {
    solver_tol: f64,
    solver_max_iter: usize,
    riccati: f64,
    b_vs_h: f64,
    hjb: f64,
    z_score: f64,
    chi_square_p: f64,
    relaxation: f64,
}

/// Resolve the worker count: explicit option, then environment, then config,
/// then all cores.
pub fn resolve_threads(opts: &RunOptions, cfg: &RunConfig) -> Result<usize> {
    if let Some(t) = opts.threads {
        return positive_threads(t);
    }
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let t: usize = raw
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV}={raw:?} is not a positive integer")))?;
        return positive_threads(t);
    }
    Ok(cfg.mc.threads.unwrap_or_else(num_cpus))
}

fn positive_threads(t: usize) -> Result<usize> {
    if t == 0 {
        Err(Error::Config("worker count must be positive".into()))
    } else {
        Ok(t)
    }
}

fn num_cpus() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Load, validate and execute the experiment named in `config_path`.
/// Nothing is written unless the configuration is valid.
pub fn run(config_path: &FsPath, opts: &RunOptions) -> Result<RunSummary> {
    let cfg = RunConfig::load(config_path)?;
    let threads = resolve_threads(opts, &cfg)?;
    let out_dir = cfg.out_dir.clone();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {threads} workers: {e}")))?;
    let start = Instant::now();
    let mut out = Outputs {
        dir: out_dir.clone(),
        files: Vec::new(),
    };
    let outcome = pool.install(|| {
        let model = cfg.model()?;
        let bundle = solve_equilibrium(&model, &cfg.solver_options())?;
        fs::create_dir_all(&out.dir)?;
        write_meanfield(&mut out, &bundle)?;
        match cfg.experiment {
            Experiment::SolveMfe => write_coefficients(&mut out, &bundle),
            Experiment::Consistency => run_consistency(&mut out, &cfg, &bundle),
            Experiment::NashGap => run_nash_gap(&mut out, &cfg, &bundle),
            Experiment::Lln => run_lln(&mut out, &cfg, &bundle),
            Experiment::Verify => run_verify(&mut out, &cfg, &bundle),
        }
    });
    if !out.files.is_empty() {
        let status = match &outcome {
            Ok(()) => "ok".to_string(),
            Err(e) => e.to_string(),
        };
        write_manifest(&mut out, &cfg, threads, &status, start.elapsed().as_secs_f64())?;
    }
    outcome?;
    Ok(RunSummary {
        out_dir,
        files: out.files,
        threads,
    })
}

fn write_manifest(out: &mut Outputs, cfg: &RunConfig, threads: usize, status: &str, wall: f64) -> Result<()> {
    let echo = |horizon: f64, n_steps: usize| GridEcho {
        horizon,
        n_steps,
        dt: horizon / n_steps as f64,
    };
    let mut files = out.files.clone();
    files.push("run_manifest.json".into());
    let manifest = Manifest {
        experiment: cfg.experiment.name(),
        status,
        seed: cfg.mc.seed,
        threads,
        grid: echo(cfg.params.horizon, cfg.grid.n_steps),
        sim_grid: echo(cfg.params.horizon, cfg.mc.sim_steps),
        tolerances: Tolerances {
            solver_tol: cfg.solver.tol,
            solver_max_iter: cfg.solver.max_iter,
            riccati: crate::verify::RICCATI_TOL,
            b_vs_h: crate::verify::B_VS_H_TOL,
            hjb: crate::verify::HJB_TOL,
            z_score: crate::verify::Z_TOL,
            chi_square_p: crate::verify::CHI_SQUARE_P,
            relaxation: crate::verify::RELAXATION_TOL,
        },
        wall_time_seconds: wall,
        outputs: &files,
        config: cfg,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Config(e.to_string()))?;
    out.write("run_manifest.json", &(text + "\n"))
}

fn write_meanfield(out: &mut Outputs, bundle: &EquilibriumBundle) -> Result<()> {
    let mut header = vec!["t".to_string(), "mU_star".into(), "mPhi_star".into()];
    header.extend((0..bundle.types.len()).map(|i| format!("mU_{i}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut csv = Csv::new(&header);
    for (i, t) in bundle.model.grid.nodes().into_iter().enumerate() {
        let mut row = vec![num(t), num(bundle.m_u_star.at(i)), num(bundle.m_phi_star.at(i))];
        row.extend(bundle.types.iter().map(|te| num(te.m_u().at(i))));
        csv.row(&row);
    }
    out.csv("meanfield.csv", csv)
}

fn write_coefficients(out: &mut Outputs, bundle: &EquilibriumBundle) -> Result<()> {
    let nodes = bundle.model.grid.nodes();
    for (atom, te) in bundle.types.iter().enumerate() {
        let mut tables = Csv::new(&["t", "A", "h"]);
        for (i, &t) in nodes.iter().enumerate() {
            tables.row(&[num(t), num(te.tables.a[i]), num(te.tables.h[i])]);
        }
        out.csv(&format!("coefficients_{atom}.csv"), tables)?;

        let problem = bundle.problem(atom);
        let b = b_coeff(&problem, &te.law.m_u, &te.law.m_phi)?;
        let c = c_coeff(&problem, &te.law.m_u, &te.law.m_phi, &b)?;
        let mut bc = Csv::new(&["t", "B", "C"]);
        for (i, &t) in nodes.iter().enumerate() {
            bc.row(&[num(t), num(b.at(i)), num(c.at(i))]);
        }
        out.csv(&format!("coefB_{atom}.csv"), bc)?;
    }
    Ok(())
}

fn run_consistency(out: &mut Outputs, cfg: &RunConfig, bundle: &EquilibriumBundle) -> Result<()> {
    let mc = cfg.mc_settings();
    let checkpoints = cfg.checkpoints();
    let reports = (0..bundle.types.len())
        .map(|atom| consistency_report(bundle, atom, &checkpoints, None, &mc))
        .collect::<Result<Vec<_>>>()?;
    let mut csv = Csv::new(&["atom", "t", "mc_mean", "se", "mU", "z", "mPhi_mc", "mPhi", "pass"]);
    for r in &reports {
        for row in &r.rows {
            csv.row(&[
                r.atom.to_string(),
                num(row.t),
                num(row.mc_mean),
                num(row.se),
                num(row.reference),
                num(row.z),
                num(row.m_phi_mc),
                num(row.m_phi),
                (row.z.abs() <= 3.0).to_string(),
            ]);
        }
    }
    out.csv("consistency.csv", csv)?;
    if cfg.mc.store_paths {
        write_paths(out, &format!("paths_consistency_{}.csv", cfg.mc.seed), &reports)?;
    }
    reports.into_iter().try_for_each(|r| r.check().map(drop))
}

fn write_paths(out: &mut Outputs, name: &str, reports: &[ConsistencyReport]) -> Result<()> {
    let mut text = String::from("atom,path,t,neuron,U\n");
    for r in reports {
        for (p, path) in r.ensemble.paths.iter().flatten().enumerate() {
            for (t, state) in path.times.iter().zip(&path.states) {
                for (neuron, u) in state.iter().enumerate() {
                    writeln!(text, "{},{p},{},{neuron},{}", r.atom, num(*t), num(*u)).expect("string write");
                }
            }
        }
    }
    out.write(name, &text)
}

fn run_nash_gap(out: &mut Outputs, cfg: &RunConfig, bundle: &EquilibriumBundle) -> Result<()> {
    let records = nash_gap_curve(bundle, &cfg.n_list, &cfg.mc_settings())?;
    let mut gaps = Csv::new(&[
        "n",
        "atom",
        "neuron",
        "J_star",
        "J_star_se",
        "V_limit",
        "gap",
        "gap_se",
        "best_deviation",
        "best_deviation_improvement",
        "best_deviation_se",
        "certificate",
    ]);
    let mut devs = Csv::new(&["n", "atom", "deviation", "improvement", "se"]);
    for r in &records {
        let best = r.best_deviation();
        gaps.row(&[
            r.n.to_string(),
            r.atom.to_string(),
            r.neuron.to_string(),
            num(r.j_star.mean),
            num(r.j_star.se),
            num(r.v_limit),
            num(r.gap),
            num(r.gap_se),
            best.label.clone(),
            num(best.improvement),
            num(best.se),
            r.certificate_holds().to_string(),
        ]);
        for d in &r.deviations {
            devs.row(&[
                r.n.to_string(),
                r.atom.to_string(),
                d.label.clone(),
                num(d.improvement),
                num(d.se),
            ]);
        }
    }
    out.csv("nash_gap.csv", gaps)?;
    out.csv("nash_deviations.csv", devs)
}

fn run_lln(out: &mut Outputs, cfg: &RunConfig, bundle: &EquilibriumBundle) -> Result<()> {
    let records = lln_check(bundle, &cfg.n_list, &cfg.checkpoints(), &cfg.mc_settings())?;
    let mut csv = Csv::new(&["n", "t", "metric", "mean_bar"]);
    for r in &records {
        csv.row(&[r.n.to_string(), num(r.t), num(r.metric), num(r.mean_bar)]);
    }
    out.csv("lln.csv", csv)
}

fn run_verify(out: &mut Outputs, cfg: &RunConfig, bundle: &EquilibriumBundle) -> Result<()> {
    let checks = run_suite(bundle, &cfg.checkpoints(), cfg.solver.tol, &cfg.mc_settings())?;
    let mut csv = Csv::new(&["check", "atom", "value", "tolerance", "comparison", "pass"]);
    for c in &checks {
        let comparison = match c.comparison {
            crate::verify::Comparison::AtMost => "<=",
            crate::verify::Comparison::Above => ">",
        };
        csv.row(&[
            c.name.clone(),
            c.atom.to_string(),
            num(c.value),
            num(c.tolerance),
            comparison.into(),
            c.pass().to_string(),
        ]);
    }
    out.csv("verify.csv", csv)?;
    let failed: Vec<String> = checks
        .iter()
        .filter(|c| !c.pass())
        .map(|c| format!("{}[{}]={:e}", c.name, c.atom, c.value))
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Error::Verification(format!("failed checks: {}", failed.join(", "))))
    }
}

/// Entry point of the binary: returns the process exit code.
pub fn main_with_args(args: &[String]) -> i32 {
    let [config] = args else {
        eprintln!("usage: neuromfg <config.json>");
        return 2;
    };
    match run(FsPath::new(config), &RunOptions::default()) {
        Ok(summary) => {
            println!(
                "wrote {} file(s) to {} using {} thread(s)",
                summary.files.len(),
                summary.out_dir.display(),
                summary.threads
            );
            0
        }
        Err(e) => {
            eprintln!("neuromfg: {e}");
            e.exit_code()
        }
    }
}
