//! Whole runs, kappa sweeps toward the vanishing-viscosity limit, the
//! general-gamma weight, and discretization convergence studies.

use std::f64::consts::PI;
use rayon::prelude::*;
use serde::Serialize;

use crate::energy::{
    check_bound, energy_history, initial_data, invariants, BoundVerdict, EnergySnapshot,
    InvariantReport,
};
use crate::error::{Error, Result};
use crate::fixedpoint::{iterate, trapezoid, Converged, FixedPointConfig, Trajectory};
use crate::gravity::compute_force_scaled;
use crate::linearized::{solve_x, LinearProblem, Medium, Source};
use crate::profiles::{
    check_gamma, make_profile, mollify_density, mollify_velocity, validate_vacuum, DensityProfile,
    ProfileKind, ProfileSpec, SoundWeight, VacuumReport, VelocityProfile,
};
use crate::quadrature::Rule;
use crate::shape::Shape;
use crate::spectral::{build_basis, project, SpectralField};

#[derive(Clone, Debug)]
pub struct GammaTransform {
    pub weight: SoundWeight,
    /// `gamma / (gamma - 1)`: `rho0^gamma = w^pressure_exponent`.
    pub pressure_exponent: f64,
    /// Vacuum report with slopes measured on `w`.
    pub vacuum: VacuumReport,
    /// Local exponent `beta` of `w ~ d^beta` at the boundary.
    pub boundary_exponent: f64,
    /// `w^(1/(gamma-1) - 1)` is square integrable.
    pub integrable: bool,
}

/// `w = rho0^(gamma-1)` and the checks the weighted scheme relies on.
pub fn gamma_transform(p: &DensityProfile) -> Result<GammaTransform> {
    let g = p.gamma;
    check_gamma(g)?;
    // profiles carry w = rho0^(gamma-1), in closed form where one exists
    let shape = p.sound_weight().clone();
    let vacuum = validate_vacuum(p);
    let beta = boundary_exponent(&shape);
    let q = 2.0 * (1.0 / (g - 1.0) - 1.0);
    Ok(GammaTransform {
        weight: SoundWeight { shape, gamma: g },
        pressure_exponent: g / (g - 1.0),
        vacuum,
        boundary_exponent: beta,
        integrable: q * beta > -1.0,
    })
}

fn boundary_exponent(w: &Shape) -> f64 {
    let (x1, x2) = (1e-7, 1e-6);
    let left = (w.value(x2) / w.value(x1)).ln() / (x2 / x1).ln();
    let right = (w.value(1.0 - x2) / w.value(1.0 - x1)).ln() / (x2 / x1).ln();
    left.max(right)
}

/// Everything needed to set up one kappa-problem.
#[derive(Clone, Debug)]
pub struct RunSpec {
    pub profile: ProfileSpec,
    pub gamma: f64,
    pub u0: VelocityProfile,
    pub kappa: f64,
    pub t_end: f64,
    pub dt: f64,
    pub n_modes: usize,
    pub tol: f64,
    pub max_iters: usize,
    /// `None`: mollify tabulated data only.
    pub mollify: Option<bool>,
    pub c_poisson: f64,
}

impl RunSpec {
    pub fn baseline() -> Self {
        RunSpec {
            profile: ProfileSpec::Parabolic,
            gamma: 2.0,
            u0: VelocityProfile::zero(),
            kappa: 1e-2,
            t_end: 0.05,
            dt: 1e-3,
            n_modes: 24,
            tol: 1e-8,
            max_iters: 20,
            mollify: None,
            c_poisson: 1.0,
        }
    }

    pub fn fixed_point(&self) -> FixedPointConfig {
        FixedPointConfig {
            t_end: self.t_end,
            dt: self.dt,
            max_iters: self.max_iters,
            tol: self.tol,
        }
    }
}

/// Profile, weight and medium for a spec, after mollification.
pub struct Setup {
    pub profile: DensityProfile,
    pub u0: VelocityProfile,
    pub transform: GammaTransform,
    pub medium: Medium,
}

pub fn setup(spec: &RunSpec) -> Result<Setup> {
    let mut profile = make_profile(&spec.profile, spec.gamma)?;
    let mut u0 = spec.u0.clone();
    if spec.mollify.unwrap_or(profile.kind == ProfileKind::Tabulated) {
        profile = mollify_density(&profile, spec.kappa)?;
        u0 = mollify_velocity(&u0, spec.kappa)?;
    }
    let transform = gamma_transform(&profile)?;
    if !transform.integrable {
        return Err(Error::InvalidProfile(format!(
            "rho0 / w = w^(1/(gamma-1) - 1) is not square integrable (w ~ d^{:.3})",
            transform.boundary_exponent
        )));
    }
    if !transform.vacuum.pass {
        return Err(Error::VacuumViolation(transform.vacuum.findings.join("; ")));
    }
    let force = compute_force_scaled(&profile, spec.c_poisson);
    let medium = Medium::new(transform.weight.clone(), force, spec.kappa, spec.n_modes)?;
    Ok(Setup {
        profile,
        u0,
        transform,
        medium,
    })
}

pub struct RunResult {
    pub medium: Medium,
    pub converged: Converged,
    pub energy: Vec<EnergySnapshot>,
    pub invariants: Vec<InvariantReport>,
    pub bound: BoundVerdict,
    pub t_valid: f64,
}

impl RunResult {
    pub fn trajectory(&self) -> &Trajectory {
        &self.converged.trajectory
    }
}

/// Set up, iterate to convergence, and monitor.
pub fn run_case(spec: &RunSpec) -> Result<RunResult> {
    let s = setup(spec)?;
    run_with_medium(s.medium, &s.u0, &spec.fixed_point())
}

pub fn run_with_medium(
    medium: Medium,
    u0: &VelocityProfile,
    cfg: &FixedPointConfig,
) -> Result<RunResult> {
    let init = initial_data(&medium, &medium.force, u0)?;
    let converged = iterate(&medium, &init.fields[0], cfg)?;
    let traj = &converged.trajectory;
    let energy = energy_history(&medium, traj, Some(&init));
    let inv: Vec<InvariantReport> = (0..traj.times.len())
        .map(|k| invariants(&medium, traj, &converged.geometry, k))
        .collect();
    let history: Vec<(f64, f64)> = energy.iter().map(|e| (e.t, e.total)).collect();
    let bound = check_bound(&history, energy[0].total);
    let t_valid = match bound.first_violation {
        None => *traj.times.last().unwrap(),
        Some(t) => history
            .iter()
            .take_while(|(s, _)| *s < t)
            .last()
            .map_or(0.0, |(s, _)| *s),
    };
    Ok(RunResult {
        medium,
        converged,
        energy,
        invariants: inv,
        bound,
        t_valid,
    })
}

#[derive(Clone, Debug)]
pub struct SweepPlan {
    /// Strictly decreasing.
    pub kappas: Vec<f64>,
    pub template: RunSpec,
    pub workers: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepEntry {
    pub kappa: f64,
    pub status: String,
    pub error: Option<String>,
    pub iterations: Option<usize>,
    pub max_ratio: Option<f64>,
    pub m0: Option<f64>,
    pub t_valid: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub entries: Vec<SweepEntry>,
    /// Common horizon `min T_valid` over the successful runs.
    pub t_star: Option<f64>,
    /// `||v_i - v_{i+1}||_{L^2(0,T*; L^2)}` between consecutive successful runs.
    pub distances: Vec<f64>,
}

impl SweepReport {
    pub fn failures(&self) -> usize {
        self.entries.iter().filter(|e| e.error.is_some()).count()
    }
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        check_gamma(self.template.gamma)?;
        if self.kappas.is_empty() || self.kappas.iter().any(|&k| !(k > 0.0)) {
            return Err(Error::Config("kappa list must be nonempty and positive".into()));
        }
        if self.kappas.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::Config("kappa list must be strictly decreasing".into()));
        }
        Ok(())
    }
}

/// Run every kappa on a bounded pool; failures are recorded, not fatal.
pub fn kappa_sweep(plan: &SweepPlan) -> Result<(SweepReport, Vec<Result<RunResult>>)> {
    plan.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.workers.max(1))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let runs: Vec<Result<RunResult>> = pool.install(|| {
        plan.kappas
            .par_iter()
            .map(|&kappa| {
                run_case(&RunSpec {
                    kappa,
                    ..plan.template.clone()
                })
            })
            .collect()
    });
    let entries = plan
        .kappas
        .iter()
        .zip(&runs)
        .map(|(&kappa, r)| match r {
            Ok(r) => SweepEntry {
                kappa,
                status: "ok".into(),
                error: None,
                iterations: Some(r.converged.report.iterations),
                max_ratio: r.converged.report.ratios.iter().copied().reduce(f64::max),
                m0: Some(r.bound.m0),
                t_valid: Some(r.t_valid),
            },
            Err(e) => SweepEntry {
                kappa,
                status: "failed".into(),
                error: Some(e.to_string()),
                iterations: None,
                max_ratio: None,
                m0: None,
                t_valid: None,
            },
        })
        .collect();
    let ok: Vec<&RunResult> = runs.iter().filter_map(|r| r.as_ref().ok()).collect();
    let t_star = ok.iter().map(|r| r.t_valid).reduce(f64::min);
    let distances = match t_star {
        Some(t) => ok.windows(2).map(|w| velocity_distance(w[0], w[1], t)).collect(),
        None => Vec::new(),
    };
    Ok((
        SweepReport {
            entries,
            t_star,
            distances,
        },
        runs,
    ))
}

/// `||v_a - v_b||_{L^2(0,t; L^2)}` on the shared nodes and time grid.
pub fn velocity_distance(a: &RunResult, b: &RunResult, t: f64) -> f64 {
    let w = &a.medium.basis.rule.weights;
    let ta = &a.trajectory().times;
    let steps = ta.iter().take_while(|&&s| s <= t + 1e-12).count();
    let per_time: Vec<f64> = (0..steps)
        .map(|k| {
            let (va, vb) = (&a.trajectory().v[k], &b.trajectory().v[k]);
            w.iter()
                .enumerate()
                .map(|(q, wq)| wq * (va[q + 1].value() - vb[q + 1].value()).powi(2))
                .sum()
        })
        .collect();
    trapezoid(&ta[..steps], &per_time).sqrt()
}

/// A manufactured solution `X*` of the linear problem on the parabolic
/// profile, with its source.
pub struct ManufacturedCase {
    pub name: &'static str,
    pub kappa: f64,
    pub t_end: f64,
    pub exact: Box<dyn Fn(f64, f64) -> f64 + Sync>,
    pub source: Box<dyn Fn(f64, f64) -> f64 + Sync>,
}

impl ManufacturedCase {
    /// `X* = exp(-t) sin(pi x)`, inside the Galerkin space.
    pub fn temporal(kappa: f64, t_end: f64) -> Self {
        let s = |x: f64| (PI * x).sin();
        ManufacturedCase {
            name: "temporal",
            kappa,
            t_end,
            exact: Box::new(move |x, t| (-t).exp() * s(x)),
            source: Box::new(move |x, t| {
                let rho = x * (1.0 - x);
                (-t).exp() * (-s(x) / rho + kappa * PI * PI * s(x) - 2.0 * kappa * s(x) / rho)
            }),
        }
    }

    /// `X* = (1 + t) sin(pi x) exp(cos(pi x))`, linear in time so the
    /// midpoint rule is exact and only the spatial error remains.
    pub fn spatial(kappa: f64, t_end: f64) -> Self {
        let s = |x: f64| (PI * x).sin() * (PI * x).cos().exp();
        let s2 = |x: f64| {
            let (sn, cs) = (PI * x).sin_cos();
            PI * PI * cs.exp() * sn * (sn * sn - 3.0 * cs - 1.0)
        };
        ManufacturedCase {
            name: "spatial",
            kappa,
            t_end,
            exact: Box::new(move |x, t| (1.0 + t) * s(x)),
            source: Box::new(move |x, t| {
                let rho = x * (1.0 - x);
                s(x) / rho - kappa * (1.0 + t) * s2(x) - 2.0 * kappa * (1.0 + t) * s(x) / rho
            }),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceRow {
    pub n_modes: usize,
    pub dt: f64,
    pub error: f64,
    /// `log(e_prev / e) / log(dt_prev / dt)` when dt changed.
    pub order: Option<f64>,
    /// `e_prev / e`.
    pub ratio: Option<f64>,
}

/// `L^2` error at the final time for the linear solver on the parabolic
/// profile against a manufactured solution.
pub fn manufactured_error(case: &ManufacturedCase, n_modes: usize, dt: f64) -> Result<f64> {
    let p = make_profile(&ProfileSpec::Parabolic, 2.0)?;
    let force = compute_force_scaled(&p, 1.0);
    let m = Medium::new(p.direct_weight()?, force, case.kappa, n_modes)?;
    let basis = build_basis(n_modes);
    let x0 = project(|x| (case.exact)(x, 0.0), &basis);
    let sol = solve_x(
        &LinearProblem {
            medium: &m,
            source: Source::Custom(&*case.source),
        },
        &x0,
        case.t_end,
        dt,
    )?;
    let last = sol.field(sol.times.len() - 1);
    let t = *sol.times.last().unwrap();
    Ok(l2_distance(&last, |x| (case.exact)(x, t)))
}

fn l2_distance(f: &SpectralField, g: impl Fn(f64) -> f64) -> f64 {
    Rule::gauss(400, 0.0, 1.0)
        .integrate(|x| (f.eval(x) - g(x)).powi(2))
        .sqrt()
}

pub fn convergence_study(case: &ManufacturedCase, ladder: &[(usize, f64)]) -> Result<Vec<ConvergenceRow>> {
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(ladder.len());
    for &(n, dt) in ladder {
        let error = manufactured_error(case, n, dt)?;
        let (order, ratio) = match rows.last() {
            Some(prev) => {
                let ratio = prev.error / error;
                let order = (prev.dt != dt).then(|| ratio.ln() / (prev.dt / dt).ln());
                (order, Some(ratio))
            }
            None => (None, None),
        };
        rows.push(ConvergenceRow {
            n_modes: n,
            dt,
            error,
            order,
            ratio,
        });
    }
    Ok(rows)
}
