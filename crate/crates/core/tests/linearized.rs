use std::f64::consts::{PI, SQRT_2};

use proptest::prelude::*;

use epvac_core::gravity::compute_force;
use epvac_core::jet::Jet;
use epvac_core::linearized::{
    damping_solve, solve_x, source_at, time_grid, FrozenGeometry, LinearProblem, Medium,
    Recovery, Source,
};
use epvac_core::profiles::{make_profile, ProfileSpec};
use epvac_core::shape::Shape;
use epvac_core::spectral::{build_basis, project, quotient_jet, theta_rule, SpectralField};
use epvac_core::Error;

fn medium(kappa: f64, n: usize) -> Medium {
    let p = make_profile(&ProfileSpec::Parabolic, 2.0).unwrap();
    Medium::new(p.direct_weight().unwrap(), compute_force(&p), kappa, n).unwrap()
}

#[test]
fn source_under_identity_geometry() {
    let m = medium(1e-2, 8);
    let g0 = source_at(&m.weight, &m.force, 0.0, 1.0, 0.0).unwrap();
    // F(0) - 2 rho0'(0)
    assert!((g0 + 23.0 / 12.0).abs() < 1e-14, "{g0}");
    assert!(source_at(&m.weight, &m.force, 0.5, 1.0, 0.0).unwrap().abs() < 1e-15);
    assert!(matches!(
        source_at(&m.weight, &m.force, 0.3, 2.0, 0.0),
        Err(Error::GeometryBound { value, .. }) if value == 2.0
    ));
}

#[test]
fn zero_data_gives_zero_solution() {
    let m = medium(1e-2, 6);
    let zero = |_: f64, _: f64| 0.0;
    let prob = LinearProblem {
        medium: &m,
        source: Source::Custom(&zero),
    };
    let sol = solve_x(&prob, &SpectralField::zeros(6), 0.02, 1e-3).unwrap();
    assert!(sol.coeffs.iter().flatten().all(|&c| c == 0.0));
}

#[test]
fn identity_geometry_source_runs() {
    let m = medium(1e-2, 8);
    let times = time_grid(0.01, 1e-3).unwrap();
    let g = FrozenGeometry::identity(&times, &m.nodes);
    let sol = solve_x(
        &LinearProblem {
            medium: &m,
            source: Source::Frozen(&g),
        },
        &SpectralField::zeros(8),
        0.01,
        1e-3,
    )
    .unwrap();
    assert_eq!(sol.stats.steps, 10);
    assert!(sol.stats.max_residual <= 1e-10);
    assert!(time_grid(0.0105, 1e-3).is_err());
}

/// Adaptive Simpson on `[a, b]`.
fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
        }
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    step(f, a, b, fa, fm, fb, (b - a) / 6.0 * (fa + 4.0 * fm + fb), tol, 50)
}

#[test]
fn first_mass_entry_against_adaptive_quadrature() {
    let m = medium(1e-2, 12);
    // 2 sin^2(pi x) / (x (1 - x)), continuous extension 0 at the ends
    let f = |x: f64| {
        if x <= 0.0 || x >= 1.0 {
            0.0
        } else {
            2.0 * (PI * x).sin().powi(2) / (x * (1.0 - x))
        }
    };
    let oracle = simpson(&f, 0.0, 1.0, 1e-14);
    assert!((m.mass[(0, 0)] - oracle).abs() < 1e-11, "{} vs {oracle}", m.mass[(0, 0)]);
    assert!((m.mass[(0, 0)] - 4.875306786114449).abs() < 1e-12);
}

#[test]
fn velocity_recovery() {
    let rho = Shape::parabola();
    let theta = theta_rule();
    let c = 2.5;
    for i in 0..=100 {
        let x = i as f64 / 100.0;
        let cx = |y: f64| rho.jet(y).scale(c);
        assert!((quotient_jet(&cx, &rho, x, &theta).value() - c).abs() < 1e-12, "{x}");
        let sx = |y: f64| {
            let s = Jet::from_derivatives(
                &(0..9).map(|j| PI.powi(j) * (PI * y + j as f64 * PI / 2.0).sin()).collect::<Vec<_>>(),
            );
            rho.jet(y) * s
        };
        let v = quotient_jet(&sx, &rho, x, &theta).value();
        assert!((v - (PI * x).sin()).abs() < 1e-8, "{x}: {v}");
    }
    let m = medium(1e-2, 4);
    let rec = Recovery::new(&[0.0, 1.0], 4, &m.weight);
    let v0 = rec.jet(0, &[1.0, 0.0, 0.0, 0.0]).value();
    assert!((v0 - SQRT_2 * PI).abs() < 1e-12, "{v0}");
}

#[test]
fn damping_closed_forms() {
    let times: Vec<f64> = (0..=2000).map(|k| k as f64 * 1e-3).collect();
    let r = damping_solve(3.0, &vec![1.0; times.len()], &times, 0.1).unwrap();
    for (f, t) in r.trajectory.iter().zip(&times) {
        assert!((f - (1.0 + 2.0 * (-10.0 * t).exp())).abs() < 1e-13);
    }
    assert_eq!(r.sup_f, 3.0);
    let r = damping_solve(1.0, &vec![0.0; times.len()], &times, 0.5).unwrap();
    assert_eq!(r.sup_f, 1.0);
    assert!(r.trajectory.windows(2).all(|w| w[1] < w[0]));
    // g = sin t, f0 = 0: f = (sin t - kappa cos t + kappa exp(-t/kappa)) / (1 + kappa^2)
    let long: Vec<f64> = (0..=20_000).map(|k| k as f64 * 1e-3).collect();
    let g: Vec<f64> = long.iter().map(|t| t.sin()).collect();
    for kappa in [1.0, 0.1, 0.01] {
        let r = damping_solve(0.0, &g, &long, kappa).unwrap();
        assert!(r.sup_f <= 1.0);
        for (f, t) in r.trajectory.iter().zip(&long) {
            let exact = (t.sin() - kappa * t.cos() + kappa * (-t / kappa).exp()) / (1.0 + kappa * kappa);
            assert!((f - exact).abs() < 1e-6, "kappa {kappa}, t {t}");
        }
    }
}

#[test]
fn manufactured_solution_converges_in_time() {
    let kappa = 1e-2;
    let m = medium(kappa, 16);
    let exact = |x: f64, t: f64| (-t).exp() * (PI * x).sin();
    // X_t / rho0 - kappa X'' + kappa (rho0'' / rho0) X
    let source = move |x: f64, t: f64| {
        let r = x * (1.0 - x);
        let s = exact(x, t);
        -s / r + kappa * PI * PI * s - 2.0 * kappa * s / r
    };
    let x0 = project(|x| exact(x, 0.0), &build_basis(16));
    let errs: Vec<f64> = [0.04, 0.02, 0.01]
        .iter()
        .map(|&dt| {
            let sol = solve_x(
                &LinearProblem {
                    medium: &m,
                    source: Source::Custom(&source),
                },
                &x0,
                0.4,
                dt,
            )
            .unwrap();
            let last = sol.field(sol.times.len() - 1);
            (0..=50)
                .map(|i| i as f64 / 50.0)
                .map(|x| (last.eval(x) - exact(x, 0.4)).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.9, "{errs:?}");
    }
}

#[test]
fn trajectory_csv_layout() {
    let m = medium(1e-2, 4);
    let zero = |_: f64, _: f64| 0.0;
    let sol = solve_x(
        &LinearProblem {
            medium: &m,
            source: Source::Custom(&zero),
        },
        &project(|x| (PI * x).sin(), &build_basis(4)),
        0.004,
        1e-3,
    )
    .unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("x.csv");
    sol.write_csv(&path, &m, &[0.25, 0.5], 2).unwrap();
    let text = std::fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,x,X,v");
    // levels 0, 2, 4
    assert_eq!(lines.len(), 1 + 3 * 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mass_matrix_is_symmetric_positive(n in 1usize..16) {
        let m = medium(1e-2, n);
        prop_assert!((&m.mass - m.mass.transpose()).amax() <= 1e-12 * m.mass.amax());
        prop_assert!(m.mass.clone().cholesky().is_some());
    }

    #[test]
    fn damping_bound_for_random_sources(
        f0 in -3.0f64..3.0,
        lk in -7.0f64..0.0,
        amps in prop::collection::vec(-1.0f64..1.0, 3),
    ) {
        let times: Vec<f64> = (0..=500).map(|k| k as f64 * 2e-3).collect();
        let g: Vec<f64> = times
            .iter()
            .map(|t| amps.iter().enumerate().map(|(i, a)| a * ((i + 1) as f64 * 7.0 * t).cos()).sum())
            .collect();
        let r = damping_solve(f0, &g, &times, lk.exp()).unwrap();
        prop_assert!(r.ratio <= 1.0 + 1e-12);
    }
}
