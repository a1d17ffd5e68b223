//! Commands behind the `epvac` binary. Each returns the process exit code.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use epvac_core::config::{load_config, LoadedConfig, RunConfig};
use epvac_core::continuation::{convergence_study, kappa_sweep, run_case, RunResult};
use epvac_core::energy::{write_history_csv, BoundVerdict};
use epvac_core::fixedpoint::IterationRecord;
use epvac_core::linearized::{SolveStats, XSolution, STEP_TOL};
use epvac_core::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_MALFORMED: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_BOUND: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;
pub const EXIT_PARTIAL: i32 = 5;

/// Sample points for the trajectory and force CSVs.
const OUTPUT_POINTS: usize = 33;

#[derive(Clone, Debug)]
pub struct Options {
    pub config: PathBuf,
    pub out: PathBuf,
    pub workers: usize,
    pub dry_run: bool,
    pub seed: Option<u64>,
}

fn load(opts: &Options) -> Result<LoadedConfig, i32> {
    let mut loaded = load_config(&opts.config).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_MALFORMED
    })?;
    if let Some(s) = opts.seed {
        loaded.config.seed = s;
    }
    Ok(loaded)
}

#[derive(Serialize)]
struct Findings<'a> {
    config: &'a Path,
    pass: bool,
    findings: &'a [String],
}

/// Findings for a loaded config, or the malformed-config exit code.
fn findings(loaded: &LoadedConfig) -> Result<Vec<String>, i32> {
    loaded.config.findings(&loaded.base_dir).map_err(|e| {
        eprintln!("error: {e}");
        EXIT_MALFORMED
    })
}

pub fn cmd_validate(opts: &Options) -> i32 {
    let loaded = match load(opts) {
        Ok(l) => l,
        Err(code) => return code,
    };
    let f = match findings(&loaded) {
        Ok(f) => f,
        Err(code) => return code,
    };
    let report = Findings {
        config: &opts.config,
        pass: f.is_empty(),
        findings: &f,
    };
    println!("{}", serde_json::to_string_pretty(&report).unwrap());
    if f.is_empty() {
        EXIT_OK
    } else {
        EXIT_INVALID
    }
}

#[derive(Serialize)]
struct Tolerances {
    fixed_point: f64,
    implicit_step: f64,
    energy_bound_factor: f64,
}

#[derive(Serialize)]
struct IterationSummary {
    iteration: usize,
    residual: f64,
    ratio: Option<f64>,
    solver: SolveStats,
}

#[derive(Serialize)]
struct Manifest<'a> {
    config_hash: String,
    code_version: &'static str,
    config: &'a RunConfig,
    status: &'a str,
    diagnostic: Option<String>,
    tolerances: Tolerances,
    iterations: Vec<IterationSummary>,
    bound: Option<&'a BoundVerdict>,
    t_valid: Option<f64>,
}

fn manifest<'a>(
    config: &'a RunConfig,
    status: &'a str,
    diagnostic: Option<String>,
    run: Option<&'a RunResult>,
) -> Manifest<'a> {
    let iterations = run
        .map(|r| {
            r.converged
                .report
                .history
                .iter()
                .map(|h: &IterationRecord| IterationSummary {
                    iteration: h.iteration,
                    residual: h.residual,
                    ratio: h.ratio,
                    solver: h.solver.clone(),
                })
                .collect()
        })
        .unwrap_or_default();
    Manifest {
        config_hash: config.hash(),
        code_version: env!("CARGO_PKG_VERSION"),
        config,
        status,
        diagnostic,
        tolerances: Tolerances {
            fixed_point: config.tol,
            implicit_step: STEP_TOL,
            energy_bound_factor: 2.0,
        },
        iterations,
        bound: run.map(|r| &r.bound),
        t_valid: run.map(|r| r.t_valid),
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> epvac_core::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::Io(e.to_string()))?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn write_run(dir: &Path, config: &RunConfig, run: &RunResult, status: &str) -> epvac_core::Result<()> {
    fs::create_dir_all(dir)?;
    let xs: Vec<f64> = (0..OUTPUT_POINTS)
        .map(|i| i as f64 / (OUTPUT_POINTS - 1) as f64)
        .collect();
    let traj = run.trajectory();
    let sol = XSolution {
        times: traj.times.clone(),
        coeffs: traj.coeffs.clone(),
        stats: SolveStats::default(),
    };
    let stride = config.output_stride;
    sol.write_csv(&dir.join("trajectory.csv"), &run.medium, &xs, stride)?;
    write_history_csv(&dir.join("energy.csv"), &run.energy, &run.invariants, stride)?;
    run.medium.force.write_csv(&dir.join("force.csv"), &xs)?;
    write_json(&dir.join("manifest.json"), &manifest(config, status, None, Some(run)))
}

fn failure_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) | Error::Io(_) => EXIT_MALFORMED,
        Error::GammaOutOfRange(_)
        | Error::VacuumViolation(_)
        | Error::InvalidProfile(_)
        | Error::PositivityLoss { .. }
        | Error::InvalidKappa(_) => EXIT_INVALID,
        _ => EXIT_DIVERGED,
    }
}

pub fn cmd_run(opts: &Options) -> i32 {
    let loaded = match load(opts) {
        Ok(l) => l,
        Err(code) => return code,
    };
    let f = match findings(&loaded) {
        Ok(f) => f,
        Err(code) => return code,
    };
    if !f.is_empty() {
        for s in &f {
            eprintln!("finding: {s}");
        }
        return EXIT_INVALID;
    }
    let config = &loaded.config;
    if opts.dry_run {
        println!("dry run: config {} is valid, nothing written", config.hash());
        return EXIT_OK;
    }
    let spec = match config.run_spec(&loaded.base_dir) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_MALFORMED;
        }
    };
    match run_case(&spec) {
        Ok(run) => {
            let (status, code) = if run.bound.pass {
                ("ok", EXIT_OK)
            } else {
                ("energy_bound_violated", EXIT_BOUND)
            };
            if let Err(e) = write_run(&opts.out, config, &run, status) {
                eprintln!("error: {e}");
                return EXIT_MALFORMED;
            }
            if code == EXIT_BOUND {
                eprintln!(
                    "energy exceeds 2 M0 = {:.6e} first at t = {:.6}; valid up to t = {:.6}",
                    2.0 * run.bound.m0,
                    run.bound.first_violation.unwrap(),
                    run.t_valid
                );
            } else {
                println!(
                    "converged in {} iterations; sup E / M0 = {:.4}",
                    run.converged.report.iterations,
                    run.energy.iter().map(|e| e.total).fold(0.0, f64::max) / run.bound.m0
                );
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = failure_code(&e);
            if code == EXIT_DIVERGED {
                let written = fs::create_dir_all(&opts.out).and_then(|_| {
                    let m = manifest(config, "fixed_point_failed", Some(e.to_string()), None);
                    write_json(&opts.out.join("manifest.json"), &m).map_err(std::io::Error::other)
                });
                if let Err(w) = written {
                    eprintln!("error: {w}");
                }
            }
            code
        }
    }
}

#[derive(Serialize)]
struct SweepFile<'a> {
    config_hash: String,
    code_version: &'static str,
    #[serde(flatten)]
    report: &'a epvac_core::continuation::SweepReport,
    run_dirs: Vec<Option<String>>,
}

pub fn cmd_sweep(opts: &Options) -> i32 {
    let loaded = match load(opts) {
        Ok(l) => l,
        Err(code) => return code,
    };
    let config = &loaded.config;
    if config.kappa_list.is_none() && config.ladder.is_none() {
        eprintln!("error: sweep needs kappa_list or ladder");
        return EXIT_MALFORMED;
    }
    if opts.dry_run {
        println!("dry run: sweep {} is well formed, nothing written", config.hash());
        return EXIT_OK;
    }
    if let Err(e) = fs::create_dir_all(&opts.out) {
        eprintln!("error: {e}");
        return EXIT_MALFORMED;
    }
    let mut code = EXIT_OK;
    match config.sweep_plan(&loaded.base_dir, opts.workers) {
        Ok(Some(plan)) => match kappa_sweep(&plan) {
            Ok((report, runs)) => {
                let mut dirs = Vec::new();
                for (kappa, run) in plan.kappas.iter().zip(&runs) {
                    let per = RunConfig {
                        kappa: *kappa,
                        kappa_list: None,
                        ladder: None,
                        ..config.clone()
                    };
                    match run {
                        Ok(r) => {
                            let name = per.hash();
                            let status = if r.bound.pass { "ok" } else { "energy_bound_violated" };
                            if let Err(e) = write_run(&opts.out.join(&name), &per, r, status) {
                                eprintln!("error: {e}");
                                return EXIT_MALFORMED;
                            }
                            dirs.push(Some(name));
                        }
                        Err(e) => {
                            eprintln!("kappa = {kappa}: {e}");
                            dirs.push(None);
                        }
                    }
                }
                if report.failures() > 0 {
                    code = EXIT_PARTIAL;
                }
                let file = SweepFile {
                    config_hash: config.hash(),
                    code_version: env!("CARGO_PKG_VERSION"),
                    report: &report,
                    run_dirs: dirs,
                };
                if let Err(e) = write_json(&opts.out.join("sweep_report.json"), &file) {
                    eprintln!("error: {e}");
                    return EXIT_MALFORMED;
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_MALFORMED;
            }
        },
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_MALFORMED;
        }
    }
    match config.manufactured_case() {
        Ok(Some((case, ladder))) => match convergence_study(&case, &ladder) {
            Ok(rows) => {
                let path = opts.out.join("error_table.csv");
                if let Err(e) = write_error_table(&path, &rows) {
                    eprintln!("error: {e}");
                    return EXIT_MALFORMED;
                }
            }
            Err(e) => {
                eprintln!("ladder: {e}");
                code = EXIT_PARTIAL;
            }
        },
        Ok(None) => {}
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_MALFORMED;
        }
    }
    code
}

fn write_error_table(
    path: &Path,
    rows: &[epvac_core::continuation::ConvergenceRow],
) -> std::io::Result<()> {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |v| format!("{v:.6}"));
    let mut text = String::from("n_modes,dt,error,order,ratio\n");
    for r in rows {
        text.push_str(&format!(
            "{},{:.6e},{:.12e},{},{}\n",
            r.n_modes,
            r.dt,
            r.error,
            opt(r.order),
            opt(r.ratio)
        ));
    }
    fs::write(path, text)
}
