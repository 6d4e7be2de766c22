//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

mod common;

use std::fs;
use std::path::Path as FsPath;
use std::time::Instant;

use common::*;
use neuromfg::cli::{run, RunOptions};
use neuromfg::game::{consistency_report, lln_check, nash_gap_curve, McSettings};
use neuromfg::meanfield::{b_coeff, solve_equilibrium, SolverOptions};
use neuromfg::model::{JumpMeasure, TimeGrid};
use neuromfg::path::Path;
use neuromfg::riccati::RiccatiSolution;
use neuromfg::sim::{poisson_chi_square, simulate_representative, McOptions, Representative, ZeroControl};

const SEED: u64 = 20240601;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn checkpoints() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

fn ac1_riccati() -> Outcome {
    let (p, ty, nu) = (demo_params(), demo_type(), demo_jump(1.0));
    let grid = TimeGrid::new(1.0, 2000).unwrap();
    let start = Instant::now();
    let sol = RiccatiSolution::new(&ty, &p, &nu);
    let closed: Vec<f64> = grid.nodes().into_iter().map(|t| sol.value(t)).collect();
    let elapsed = start.elapsed().as_secs_f64();
    let oracle = riccati_rk4(&ty, &p, &nu, &grid, 5);
    let err = sup_diff(&closed, &oracle);
    let terminal = closed[2000] == p.gamma;
    outcome(
        err < 1e-6 && terminal && elapsed < 1.0,
        format!("sup|A - A_rk4| = {err:.3e} (< 1e-6), A(T) == gamma: {terminal}, {elapsed:.4} s"),
    )
}

fn ac2_fixed_point() -> Outcome {
    let model = demo_model(1.0, 2000);
    let start = Instant::now();
    let bundle = solve_equilibrium(&model, &SolverOptions::default()).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let sol = &bundle.types[0].solution;
    let dense = dense_fixed_point(&demo_type(), &model.params, &model.jump, &model.grid);
    let err = sup_diff(sol.path.values(), &dense);
    let problem = bundle.problem(0);
    let residual = problem.residual(&sol.path);
    let mut spread: f64 = 0.0;
    let mut state = SEED;
    for _ in 0..5 {
        let values: Vec<f64> = (0..model.grid.len())
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 10.0
            })
            .collect();
        let opts = SolverOptions {
            initial: Some(Path::new(model.grid, values).unwrap()),
            ..SolverOptions::default()
        };
        let other = neuromfg::meanfield::solve_fixed_point(&problem, &opts).unwrap();
        spread = spread.max(other.path.sup_distance(&sol.path).unwrap());
    }
    outcome(
        err < 1e-6 && residual < 1e-10 && spread < 1e-8 && elapsed < 10.0,
        format!(
            "sup|m - m_dense| = {err:.3e} (< 1e-6), residual = {residual:.3e} (< 1e-10), random-start spread = {spread:.3e} (< 1e-8), {} iterations, {elapsed:.3} s",
            sol.iterations
        ),
    )
}

fn ac3_coefficients() -> Outcome {
    let model = demo_model(1.0, 2000);
    let bundle = solve_equilibrium(&model, &SolverOptions::default()).unwrap();
    let te = &bundle.types[0];
    let law = &te.law;
    let problem = bundle.problem(0);
    let b = b_coeff(&problem, &law.m_u, &law.m_phi).unwrap();
    let h = problem.h_values(&law.m_u);
    let c2 = te.ty.c * te.ty.c;
    let b_vs_h = (0..h.len()).fold(0.0f64, |w, i| w.max((0.5 * c2 * b.at(i) - h[i]).abs()));
    let terminal = law.b.last() == 0.0 && law.c_coef.last() == 0.0;
    let mut hjb: f64 = 0.0;
    for i in 1..model.grid.n_steps() {
        for x in [-1.0, 0.0, 0.5, 1.0, 1.5, 3.0] {
            hjb = hjb.max(hjb_residual(law, &te.ty, &model.params, &model.jump, &model.grid, i, x).abs());
        }
    }
    outcome(
        terminal && b_vs_h < 1e-7 && hjb < 1e-4,
        format!("B(T) = C(T) = 0: {terminal}, sup|c^2 B / 2 - H| = {b_vs_h:.3e} (< 1e-7), max HJB residual = {hjb:.3e} (< 1e-4)"),
    )
}

struct Ac4 {
    report: Outcome,
    jump_counts: Vec<usize>,
}

fn ac4_consistency() -> Ac4 {
    let bundle = demo_bundle(1.0, 2000);
    let mc = McSettings::new(100_000, SEED, 200);
    let start = Instant::now();
    let report = consistency_report(&bundle, 0, &checkpoints(), None, &mc).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let perturbed_ref = bundle.types[0].law.m_u.affine(1.05, 0.0);
    let perturbed = consistency_report(&bundle, 0, &checkpoints(), Some(&perturbed_ref), &mc).unwrap();
    let within = report.rows.iter().filter(|r| r.z.abs() <= 3.0).count();
    let flagged = perturbed.violation().is_some();
    let flagged_interior = perturbed.rows.iter().filter(|r| r.t > 0.0 && r.z.abs() > 3.0).count();
    Ac4 {
        report: outcome(
            within == 21 && flagged && elapsed < 60.0,
            format!(
                "{within}/21 checkpoints within 3 SE (max |z| = {:.3}), +5% perturbation flagged: {flagged} ({flagged_interior}/20 interior checkpoints beyond 3 SE), {elapsed:.2} s",
                report.max_abs_z()
            ),
        ),
        jump_counts: report.ensemble.jump_counts,
    }
}

fn ac5_lln() -> Outcome {
    let bundle = demo_bundle(1.0, 2000);
    let mc = McSettings::new(2000, SEED, 200);
    let n_list = [8, 32, 128, 512, 2048];
    let start = Instant::now();
    let records = lln_check(&bundle, &n_list, &[0.5, 1.0], &mc).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let metric = |n: usize, t: f64| records.iter().find(|r| r.n == n && r.t == t).unwrap().metric;
    let ratios: Vec<f64> = [0.5, 1.0].iter().map(|&t| metric(8, t) / metric(2048, t)).collect();
    let curve: Vec<String> = n_list.iter().map(|&n| format!("{n}:{:.2e}", metric(n, 1.0))).collect();
    outcome(
        ratios.iter().all(|&r| r >= 10.0) && elapsed < 600.0,
        format!(
            "E|Ubar - m|^2 ratio n=8 vs n=2048: {:.1} at T/2, {:.1} at T (>= 10); at T [{}]; {elapsed:.1} s",
            ratios[0],
            ratios[1],
            curve.join(", ")
        ),
    )
}

fn ac6_nash_gap() -> Outcome {
    let bundle = demo_bundle(1.0, 2000);
    let mc = McSettings::new(4000, SEED, 200);
    let start = Instant::now();
    let records = nash_gap_curve(&bundle, &[8, 32, 128, 512], &mc).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let first = &records[0];
    let last = records.last().unwrap();
    let allowance = 3.0 * last.gap_se.hypot(0.5 * first.gap_se);
    let decreasing = last.gap < 0.5 * first.gap + allowance;
    let certified = records.iter().all(|r| r.certificate_holds());
    let curve: Vec<String> = records
        .iter()
        .map(|r| format!("{}:{:.2e}±{:.1e} (best {} {:.2e})", r.n, r.gap, r.gap_se, r.best_deviation().label, r.best_deviation().improvement))
        .collect();
    outcome(
        decreasing && certified && elapsed < 900.0,
        format!(
            "gap(512) = {:.3e} < gap(8)/2 + 3 SE = {:.3e}: {decreasing}; certificate at every n: {certified}; [{}]; {elapsed:.1} s",
            last.gap,
            0.5 * first.gap + allowance,
            curve.join(", ")
        ),
    )
}

fn ac7_simulator(jump_counts: &[usize]) -> Outcome {
    let chi = poisson_chi_square(jump_counts, 1.0).unwrap();
    let p = demo_params();
    let ty = demo_type();
    let grid = TimeGrid::new(1.0, 1000).unwrap();
    let level = 0.3;
    let m = Path::constant(grid, level);
    let zero = Path::constant(grid, 0.0);
    let silent = JumpMeasure::silent();
    let rep = Representative {
        ty,
        params: &p,
        nu: &silent,
        controller: &ZeroControl,
        m_u: &m,
        m_phi: &zero,
        neuron_stream: 0,
    };
    let ens = simulate_representative(&rep, &grid, &McOptions::new(4, SEED)).unwrap();
    let relax = grid.nodes().into_iter().fold(0.0f64, |w, t| {
        let exact = level + (ty.u - level) * (-ty.a * t).exp();
        w.max((ens.marginal_mean(t).unwrap().0 - exact).abs())
    });
    outcome(
        chi.p_value > 1e-3 && relax < 1e-10,
        format!(
            "jump counts chi-square = {:.2} on {} dof, p = {:.3} (> 1e-3) over {} paths; rate-0 relaxation sup error = {relax:.2e} (< 1e-10)",
            chi.statistic,
            chi.dof,
            chi.p_value,
            jump_counts.len()
        ),
    )
}

fn ac8_reproducibility() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut mismatches = Vec::new();
    let mut compared = 0;
    for experiment in ["solve-mfe", "consistency", "nash-gap", "lln", "verify"] {
        let mut reference: Option<Vec<(String, Vec<u8>)>> = None;
        for threads in [1, 4, 8] {
            let out = dir.path().join(format!("{experiment}-{threads}"));
            let cfg = dir.path().join(format!("{experiment}.json"));
            fs::write(&cfg, demo_config(experiment, &out)).unwrap();
            let summary = run(&cfg, &RunOptions { threads: Some(threads) }).unwrap();
            let csvs: Vec<(String, Vec<u8>)> = summary
                .files
                .iter()
                .filter(|f| f.ends_with(".csv"))
                .map(|f| (f.clone(), fs::read(out.join(f)).unwrap()))
                .collect();
            match &reference {
                None => reference = Some(csvs),
                Some(r) => {
                    compared += csvs.len();
                    if r != &csvs {
                        mismatches.push(format!("{experiment}@{threads}"));
                    }
                }
            }
        }
    }
    outcome(
        mismatches.is_empty(),
        format!("{compared} CSVs compared against the 1-thread run; mismatches: {mismatches:?}"),
    )
}

fn demo_config(experiment: &str, out: &FsPath) -> String {
    let (n_paths, n_list) = match experiment {
        "nash-gap" => (500, "[8, 32]"),
        "lln" => (500, "[8, 32, 128]"),
        _ => (5000, "[8]"),
    };
    format!(
        r#"{{
  "experiment": "{experiment}",
  "params": {{"rho": 0.5, "beta": 1.0, "gamma": 1.0, "k": 0.5, "ell": 0.5, "T": 1.0}},
  "jump": {{"rate": 1.0, "atoms": [[0.5, 1.0]]}},
  "types": {{"atoms": [[1.0, 1.0, 1.0, 1.0]]}},
  "grid": {{"n_steps": 2000}},
  "mc": {{"n_paths": {n_paths}, "seed": {SEED}, "sim_steps": 200}},
  "n_list": {n_list},
  "out_dir": {out:?}
}}"#
    )
}

fn main() {
    let mut failures = 0;
    let mut report = |id: &str, name: &str, o: Outcome| {
        println!("{} {id} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failures += 1;
        }
    };
    report("AC1", "riccati oracle", ac1_riccati());
    report("AC2", "fixed-point oracle", ac2_fixed_point());
    report("AC3", "coefficient identities", ac3_coefficients());
    let ac4 = ac4_consistency();
    let jump_counts = ac4.jump_counts;
    report("AC4", "consistency certification", ac4.report);
    report("AC5", "law of large numbers", ac5_lln());
    report("AC6", "epsilon-Nash certificate", ac6_nash_gap());
    report("AC7", "simulator statistics", ac7_simulator(&jump_counts));
    report("AC8", "reproducibility", ac8_reproducibility());
    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
