//! The ten acceptance criteria. Prints one PASS/FAIL line per criterion
//! and exits nonzero if any fails.

use std::f64::consts::PI;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use epvac_core::config::parse_config;
use epvac_core::continuation::{run_case, run_with_medium, setup, RunResult, RunSpec};
use epvac_core::gravity::{check_poisson_consistency, compute_force};
use epvac_core::jet::Jet;
use epvac_core::linearized::{damping_solve, solve_x, LinearProblem, Medium, Source};
use epvac_core::profiles::{make_profile, DensityProfile, ProfileSpec, VelocityProfile};
use epvac_core::quadrature::Rule;
use epvac_core::spectral::{build_basis, hardy_ratio, project, SpectralField};
use epvac_core::Error;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.2e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn gauss_cells(breaks: &[f64], q: usize) -> Rule {
    Rule::composite(breaks, q)
}

fn random_tabulated(rng: &mut ChaCha8Rng) -> DensityProfile {
    loop {
        let n = rng.gen_range(6..=16);
        let rows: Vec<(f64, f64)> = (0..=n)
            .map(|i| {
                let x = i as f64 / n as f64;
                let y = if i == 0 || i == n {
                    0.0
                } else {
                    x * (1.0 - x) * rng.gen_range(0.3..3.0)
                };
                (x, y)
            })
            .collect();
        // resample the rare draw whose spline dips below zero
        if let Ok(p) = make_profile(&ProfileSpec::Tabulated(rows), 2.0) {
            return p;
        }
    }
}

fn force_identities(p: &DensityProfile) -> (f64, f64, f64, f64) {
    let f = compute_force(p);
    // independent oracle: F = M/2 - int_0^x rho by 20-point Gauss per cell
    let fine = gauss_cells(&f.breaks, 20);
    let mass = fine.integrate(|x| p.rho(x));
    let oracle = |x: f64| {
        let mut m = 0.0;
        for w in f.breaks.windows(2) {
            if w[0] >= x {
                break;
            }
            m += Rule::gauss(20, w[0], w[1].min(x)).integrate(|s| p.rho(s));
        }
        0.5 * mass - m
    };
    let oracle_gap = (0..=50)
        .map(|i| i as f64 / 50.0)
        .map(|x| (f.value(x) - oracle(x)).abs())
        .fold(0.0, f64::max);
    let neutral = fine.integrate(|x| p.rho(x) * f.value(x)).abs();
    let ends = (f.value(0.0) + f.value(1.0)).abs();
    (neutral, ends, check_poisson_consistency(&f, p), oracle_gap)
}

fn criterion_1() -> Outcome {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut profiles = vec![make_profile(&ProfileSpec::Parabolic, 2.0).unwrap()];
    profiles.extend((0..100).map(|_| random_tabulated(&mut rng)));
    let (mut neutral, mut ends, mut poisson, mut gap) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for p in &profiles {
        let (a, b, c, d) = force_identities(p);
        neutral = neutral.max(a);
        ends = ends.max(b);
        poisson = poisson.max(c);
        gap = gap.max(d);
    }
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        neutral <= 1e-10 && ends <= 1e-12 && poisson <= 1e-8 && gap <= 1e-12 && secs < 5.0,
        format!(
            "101 profiles: |int rho F| {neutral:.1e}, |F(0)+F(1)| {ends:.1e}, |F'+rho| {poisson:.1e}, \
             oracle gap {gap:.1e}, {secs:.2} s"
        ),
    )
}

/// `sum a_k sin(k pi x)` as a jet field.
fn sine_poly(a: &[f64]) -> impl Fn(f64) -> Jet + '_ {
    move |x| {
        let mut d = [0.0; 9];
        for (k, ak) in a.iter().enumerate() {
            let w = (k + 1) as f64 * PI;
            for (j, dj) in d.iter_mut().enumerate() {
                *dj += ak * w.powi(j as i32) * (w * x + j as f64 * PI / 2.0).sin();
            }
        }
        Jet::from_derivatives(&d)
    }
}

/// Oracle for `||u/d||_{H^(s-1)} / ||u||_{H^s}`: quotient rule at Gauss
/// nodes, and the closed-form Sobolev norm of a sine polynomial.
fn hardy_oracle(a: &[f64], s: usize) -> f64 {
    let rule = Rule::composite(&[0.0, 0.5, 1.0], 60);
    let u = sine_poly(a);
    let top: f64 = rule.integrate(|x| {
        let j = u(x);
        let (d, sign) = if x <= 0.5 { (x, 1.0) } else { (1.0 - x, -1.0) };
        let q = j.d(0) / d;
        let dq = j.d(1) / d - sign * j.d(0) / (d * d);
        q * q + if s == 2 { dq * dq } else { 0.0 }
    });
    let bottom: f64 = a
        .iter()
        .enumerate()
        .map(|(k, ak)| {
            let w = (k + 1) as f64 * PI;
            0.5 * ak * ak * (0..=s).map(|j| w.powi(2 * j as i32)).sum::<f64>()
        })
        .sum();
    (top / bottom).sqrt()
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rule = Rule::composite(&[0.0, 0.5, 1.0], 60);
    let (mut worst, mut disagreement) = (0.0f64, 0.0f64);
    for _ in 0..100 {
        let k = rng.gen_range(1..=8);
        let a: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let u = sine_poly(&a);
        for s in [1, 2] {
            let measured = hardy_ratio(&u, s, &rule).unwrap();
            worst = worst.max(measured);
            disagreement = disagreement.max((measured / hardy_oracle(&a, s) - 1.0).abs());
        }
    }
    let parabola = |x: f64| Jet::variable(x) * (Jet::constant(1.0) - Jet::variable(x));
    let q = epvac_core::spectral::hardy_quotient(&parabola, 0).unwrap();
    let seven_twelfths = rule.integrate(|x| q.derivatives(x)[0].powi(2));
    let closed = (seven_twelfths - 7.0 / 12.0).abs();
    outcome(
        worst <= 10.0 && closed <= 1e-8 && disagreement <= 1e-8,
        format!(
            "max ratio {worst:.3} (s in {{1,2}}), oracle agreement {disagreement:.1e}, \
             |int (x(1-x)/d)^2 - 7/12| {closed:.1e}"
        ),
    )
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let times: Vec<f64> = (0..=4000).map(|k| k as f64 * 1e-3).collect();
    let mut worst_by_kappa = Vec::new();
    let mut oracle_gap: f64 = 0.0;
    for kappa in [1.0, 1e-1, 1e-2, 1e-3] {
        let mut worst: f64 = 0.0;
        for _ in 0..20 {
            let terms: Vec<(f64, f64, f64)> = (0..4)
                .map(|_| {
                    (
                        rng.gen_range(-0.5..0.5),
                        rng.gen_range(0.0..80.0),
                        rng.gen_range(0.0..6.3),
                    )
                })
                .collect();
            let g: Vec<f64> = times
                .iter()
                .map(|&t| terms.iter().map(|(a, w, p)| a * (w * t + p).sin()).sum())
                .collect();
            let f0 = rng.gen_range(-2.0..2.0);
            let r = damping_solve(f0, &g, &times, kappa).unwrap();
            worst = worst.max(r.ratio);
        }
        // constant source: f = g + (f0 - g) exp(-t / kappa)
        let g = vec![0.7; times.len()];
        let r = damping_solve(-1.3, &g, &times, kappa).unwrap();
        for (f, t) in r.trajectory.iter().zip(&times) {
            oracle_gap = oracle_gap.max((f - (0.7 - 2.0 * (-t / kappa).exp())).abs());
        }
        worst_by_kappa.push(worst);
    }
    let worst = worst_by_kappa.iter().copied().fold(0.0, f64::max);
    outcome(
        worst <= 1.0001 && oracle_gap <= 1e-12,
        format!("sup|f| / max(|f0|, sup|g|) by kappa {worst_by_kappa:.6?}, oracle gap {oracle_gap:.1e}"),
    )
}

fn trig_jet(x: f64, phase: f64) -> Jet {
    let d: Vec<f64> = (0..9)
        .map(|j| PI.powi(j as i32) * (PI * x + phase + j as f64 * PI / 2.0).sin())
        .collect();
    Jet::from_derivatives(&d)
}

/// `X_t / w - kappa X'' + kappa (w''/w) X` with `w = x(1-x)`, spatial
/// derivatives by jets.
fn mms_source(x: f64, xt: f64, xj: Jet, kappa: f64) -> f64 {
    let w = Jet::variable(x) * (Jet::constant(1.0) - Jet::variable(x));
    xt / w.value() - kappa * xj.d(2) + kappa * w.d(2) / w.value() * xj.value()
}

fn mms_error(
    kappa: f64,
    n: usize,
    dt: f64,
    t_end: f64,
    exact: &(dyn Fn(f64, f64) -> f64 + Sync),
    source: &(dyn Fn(f64, f64) -> f64 + Sync),
) -> f64 {
    let p = make_profile(&ProfileSpec::Parabolic, 2.0).unwrap();
    let m = Medium::new(p.direct_weight().unwrap(), compute_force(&p), kappa, n).unwrap();
    let x0 = project(|x| exact(x, 0.0), &build_basis(n));
    let prob = LinearProblem {
        medium: &m,
        source: Source::Custom(source),
    };
    let sol = solve_x(&prob, &x0, t_end, dt).unwrap();
    let last: SpectralField = sol.field(sol.times.len() - 1);
    Rule::gauss(300, 0.0, 1.0)
        .integrate(|x| (last.eval(x) - exact(x, t_end)).powi(2))
        .sqrt()
}

fn criterion_4() -> Outcome {
    let clock = Instant::now();
    let kappa = 1e-2;
    let t_exact = |x: f64, t: f64| (-t).exp() * (PI * x).sin();
    let t_source = move |x: f64, t: f64| {
        let xj = trig_jet(x, 0.0) * (-t).exp();
        mms_source(x, -xj.value(), xj, kappa)
    };
    let dts = [0.02, 0.01, 0.005, 0.0025];
    let errs: Vec<f64> = dts
        .iter()
        .map(|&dt| mms_error(kappa, 16, dt, 0.4, &t_exact, &t_source))
        .collect();
    let orders: Vec<f64> = errs.windows(2).map(|e| (e[0] / e[1]).log2()).collect();

    let s = |x: f64| trig_jet(x, 0.0) * trig_jet(x, PI / 2.0).exp();
    let s_exact = move |x: f64, t: f64| (1.0 + t) * s(x).value();
    let s_source = move |x: f64, t: f64| {
        let sj = s(x);
        mms_source(x, sj.value(), sj * (1.0 + t), kappa)
    };
    let ns = [4, 8, 16, 32];
    let serrs: Vec<f64> = ns
        .iter()
        .map(|&n| mms_error(kappa, n, 0.01, 0.1, &s_exact, &s_source))
        .collect();
    let ratios: Vec<f64> = serrs.windows(2).map(|e| e[0] / e[1]).collect();
    let spatial_ok = serrs
        .windows(2)
        .all(|e| e[0] <= 1e-10 || e[1] <= 1e-10 || e[0] / e[1] >= 10.0);
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        orders.iter().all(|&o| o >= 1.9) && spatial_ok && secs < 60.0,
        format!(
            "temporal orders {orders:.4?}; spatial errors {}, ratios {}; {secs:.2} s",
            sci(&serrs),
            sci(&ratios)
        ),
    )
}

fn baseline() -> RunSpec {
    RunSpec::baseline()
}

fn max_ratio(r: &RunResult) -> f64 {
    r.converged.report.ratios.iter().copied().fold(0.0, f64::max)
}

fn criterion_5(base: &RunResult) -> Outcome {
    let half = run_case(&RunSpec {
        t_end: 0.025,
        ..baseline()
    });
    let rep = &base.converged.report;
    let ok_base = rep.converged
        && rep.iterations <= 20
        && rep.ratios.iter().all(|&q| q < 1.0)
        && *rep.residuals.last().unwrap() <= 1e-8;
    match half {
        Ok(h) => {
            let shrink = max_ratio(&h) / max_ratio(base);
            outcome(
                ok_base && (0.25..=1.0).contains(&shrink),
                format!(
                    "{} iterations, ratios {:.3?}; max ratio T=0.05 {:.4}, T=0.025 {:.4} (quotient {shrink:.3}, band [0.25, 1])",
                    rep.iterations,
                    rep.ratios,
                    max_ratio(base),
                    max_ratio(&h)
                ),
            )
        }
        Err(e) => outcome(false, format!("half-horizon run failed: {e}")),
    }
}

fn criterion_6(base: &RunResult) -> Outcome {
    let p0 = base.invariants[0].momentum;
    let drift = base
        .invariants
        .iter()
        .map(|i| (i.momentum - p0).abs())
        .fold(0.0, f64::max);
    let mass = base.invariants.iter().map(|i| i.mass_residual).fold(0.0, f64::max);
    outcome(
        drift <= 1e-6 && mass <= 1e-12,
        format!("momentum drift {drift:.1e}, mass-identity residual {mass:.1e}"),
    )
}

fn criterion_7(base: &RunResult) -> Outcome {
    let m0 = base.energy[0].total;
    let sup = base.energy.iter().map(|e| e.total).fold(0.0, f64::max);
    let base_ok = base.bound.pass && sup <= 2.0 * m0 && base.bound.m0 == m0;
    let stress = run_case(&RunSpec {
        u0: VelocityProfile::affine(1.5, -3.0),
        t_end: 0.1,
        ..baseline()
    });
    match stress {
        Ok(s) => {
            let m0s = s.energy[0].total;
            let scan = s.energy.iter().find(|e| e.total > 2.0 * m0s).map(|e| e.t);
            outcome(
                base_ok && scan.is_some() && s.bound.first_violation == scan,
                format!(
                    "baseline sup E / M0 = {:.4}; stress run first violation reported {:?}, scanned {:?}",
                    sup / m0,
                    s.bound.first_violation,
                    scan
                ),
            )
        }
        Err(e) => outcome(false, format!("stress run failed: {e}")),
    }
}

fn criterion_8(base: &RunResult) -> Outcome {
    let clock = Instant::now();
    let runs: Vec<RunResult> = match [1e-3, 1e-4]
        .iter()
        .map(|&kappa| run_case(&RunSpec { kappa, ..baseline() }))
        .collect::<Result<_, _>>()
    {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("sweep run failed: {e}")),
    };
    let all: Vec<&RunResult> = std::iter::once(base).chain(runs.iter()).collect();
    let tv: Vec<f64> = all.iter().map(|r| r.t_valid).collect();
    let spread = tv.iter().copied().fold(0.0, f64::max) / tv.iter().copied().fold(f64::INFINITY, f64::min);
    let t_star = tv.iter().copied().fold(f64::INFINITY, f64::min);
    // oracle distance: trapezoid in time of the Gauss-weighted squared gap
    let rule = &base.medium.basis.rule;
    let dist = |a: &RunResult, b: &RunResult| {
        let times = &a.trajectory().times;
        let per: Vec<f64> = (0..times.len())
            .map(|k| {
                (0..rule.nodes.len())
                    .map(|q| {
                        rule.weights[q]
                            * (a.trajectory().v[k][q + 1].value() - b.trajectory().v[k][q + 1].value())
                                .powi(2)
                    })
                    .sum()
            })
            .collect();
        let steps = times.iter().take_while(|&&t| t <= t_star + 1e-12).count();
        (1..steps)
            .map(|k| 0.5 * (times[k] - times[k - 1]) * (per[k] + per[k - 1]))
            .sum::<f64>()
            .sqrt()
    };
    let d: Vec<f64> = all.windows(2).map(|w| dist(w[0], w[1])).collect();
    let library = epvac_core::continuation::velocity_distance(all[0], all[1], t_star);
    let secs = clock.elapsed().as_secs_f64();
    outcome(
        spread < 2.0 && d.windows(2).all(|w| w[1] < w[0]) && (library / d[0] - 1.0).abs() < 1e-12 && secs < 600.0,
        format!("T_valid {tv:?} (spread {spread:.3}); distances {}; {secs:.2} s", sci(&d)),
    )
}

fn criterion_9() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    for gamma in [1.5, 2.0, 2.5] {
        let spec = RunSpec {
            profile: ProfileSpec::VacuumParabolic,
            gamma,
            ..baseline()
        };
        match run_case(&spec) {
            Ok(r) => notes.push(format!("gamma {gamma}: {} its", r.converged.report.iterations)),
            Err(e) => {
                ok = false;
                notes.push(format!("gamma {gamma}: {e}"));
            }
        }
    }
    for gamma in [1.0, 3.0] {
        let cfg = parse_config(&format!(
            r#"{{"profile":"parabolic","gamma":{gamma},"kappa":0.01,"T_lagrangian":0.05,"dt":0.001,"n_modes":24,"tol":1e-8}}"#
        ))
        .unwrap();
        let findings = cfg.findings(Path::new(".")).unwrap();
        let rejected = findings.iter().any(|f| f.starts_with("gamma out of (1,3)"))
            && matches!(make_profile(&ProfileSpec::Parabolic, gamma), Err(Error::GammaOutOfRange(g)) if g == gamma);
        ok &= rejected;
        notes.push(format!("gamma {gamma} rejected: {rejected}"));
    }
    let spec = baseline();
    let transformed = setup(&spec).and_then(|s| run_with_medium(s.medium, &s.u0, &spec.fixed_point()));
    let direct = make_profile(&spec.profile, 2.0).and_then(|p| {
        let m = Medium::new(p.direct_weight()?, compute_force(&p), spec.kappa, spec.n_modes)?;
        run_with_medium(m, &spec.u0, &spec.fixed_point())
    });
    match (transformed, direct) {
        (Ok(a), Ok(b)) => {
            let gap = a
                .trajectory()
                .coeffs
                .iter()
                .flatten()
                .zip(b.trajectory().coeffs.iter().flatten())
                .map(|(x, y)| (x - y).abs())
                .fold(0.0, f64::max);
            ok &= gap <= 1e-12;
            notes.push(format!("gamma=2 transformed vs direct {gap:.1e}"));
        }
        (a, b) => {
            ok = false;
            notes.push(format!("regression runs failed: {:?} {:?}", a.err(), b.err()));
        }
    }
    outcome(ok, notes.join("; "))
}

fn criterion_10(base: &RunResult) -> Outcome {
    let i0 = &base.invariants[0];
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in &base.invariants {
        for r in [i.slope_left / i0.slope_left, i.slope_right / i0.slope_right] {
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    outcome(
        lo >= 0.25 && hi <= 4.0,
        format!("c^2 boundary-slope ratio in [{lo:.5}, {hi:.5}]"),
    )
}

fn main() {
    let base = run_case(&baseline()).expect("baseline run");
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome + '_>)> = vec![
        ("force identities", Box::new(criterion_1)),
        ("Hardy suite", Box::new(criterion_2)),
        ("damping lemma", Box::new(criterion_3)),
        ("manufactured-solution convergence", Box::new(criterion_4)),
        ("Picard contraction", Box::new(|| criterion_5(&base))),
        ("conservation", Box::new(|| criterion_6(&base))),
        ("energy bound", Box::new(|| criterion_7(&base))),
        ("kappa independence", Box::new(|| criterion_8(&base))),
        ("general gamma", Box::new(criterion_9)),
        ("vacuum persistence", Box::new(|| criterion_10(&base))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += usize::from(!o.pass);
        println!("{} {:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    if failed > 0 {
        eprintln!("{failed} criteria failed");
        std::process::exit(1);
    }
}
