//! Picard iteration for the nonlinear kappa-problem: freeze the flow map
//! built from the previous velocity, solve the linear problem for `X`,
//! recover `v`, repeat.

use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::linearized::{
    recover_v, solve_x, time_grid, FrozenGeometry, LinearProblem, Medium, SolveStats, Source,
};
use crate::spectral::SpectralField;

#[derive(Clone, Debug, Serialize)]
pub struct FixedPointConfig {
    pub t_end: f64,
    pub dt: f64,
    pub max_iters: usize,
    pub tol: f64,
}

impl FixedPointConfig {
    pub fn validate(&self) -> Result<()> {
        time_grid(self.t_end, self.dt)?;
        if !(self.tol > 0.0) {
            return Err(Error::Config(format!("tol must be positive, got {}", self.tol)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

/// A velocity history with the sine coefficients of `X = w v` and the jets
/// of `v` at the medium's geometry nodes.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub coeffs: Vec<Vec<f64>>,
    pub v: Vec<Vec<Jet>>,
}

impl Trajectory {
    /// `X(t) = x0` for every `t`.
    pub fn frozen(m: &Medium, x0: &SpectralField, times: &[f64]) -> Self {
        let v = m.recovery.all(&x0.coeffs);
        Trajectory {
            times: times.to_vec(),
            coeffs: vec![x0.coeffs.clone(); times.len()],
            v: vec![v; times.len()],
        }
    }

    pub fn field(&self, k: usize) -> SpectralField {
        SpectralField {
            coeffs: self.coeffs[k].clone(),
        }
    }
}

/// `eta = x + int v`, `eta' = 1 + int v'`, `eta'' = int v''` by the
/// trapezoidal rule in time; `v[k][q]` is the jet at `nodes[q]`, time `k`.
pub fn update_geometry(v: &[Vec<Jet>], times: &[f64], nodes: &[f64]) -> Result<FrozenGeometry> {
    let mut g = FrozenGeometry::identity(times, nodes);
    for k in 1..times.len() {
        let h = 0.5 * (times[k] - times[k - 1]);
        for q in 0..nodes.len() {
            let (a, b) = (&v[k - 1][q], &v[k][q]);
            g.eta[k][q] = g.eta[k - 1][q] + h * (a.d(0) + b.d(0));
            g.deta[k][q] = g.deta[k - 1][q] + h * (a.d(1) + b.d(1));
            g.d2eta[k][q] = g.d2eta[k - 1][q] + h * (a.d(2) + b.d(2));
        }
    }
    g.check()?;
    Ok(g)
}

/// One application of the fixed-point map.
pub fn picard_step(
    m: &Medium,
    x0: &SpectralField,
    vbar: &Trajectory,
) -> Result<(Trajectory, FrozenGeometry, SolveStats)> {
    let geom = update_geometry(&vbar.v, &vbar.times, &m.nodes)?;
    let t_end = *vbar.times.last().unwrap();
    let dt = vbar.times[1] - vbar.times[0];
    let sol = solve_x(
        &LinearProblem {
            medium: m,
            source: Source::Frozen(&geom),
        },
        x0,
        t_end,
        dt,
    )?;
    let v = recover_v(&sol, m);
    Ok((
        Trajectory {
            times: sol.times,
            coeffs: sol.coeffs,
            v,
        },
        geom,
        sol.stats,
    ))
}

/// `||X_a - X_b||_{L^2(0,T; H^1)}` from the coefficients.
pub fn residual_norm(a: &Trajectory, b: &Trajectory) -> f64 {
    let per_time: Vec<f64> = a
        .coeffs
        .iter()
        .zip(&b.coeffs)
        .map(|(ca, cb)| {
            let d = SpectralField {
                coeffs: ca.iter().zip(cb).map(|(x, y)| x - y).collect(),
            };
            d.sobolev_sq_int(1)
        })
        .collect();
    trapezoid(&a.times, &per_time).sqrt()
}

pub fn trapezoid(t: &[f64], f: &[f64]) -> f64 {
    t.windows(2)
        .zip(f.windows(2))
        .map(|(t, f)| 0.5 * (t[1] - t[0]) * (f[0] + f[1]))
        .sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub residual: f64,
    pub ratio: Option<f64>,
    pub wall_seconds: f64,
    pub solver: SolveStats,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub converged: bool,
    pub iterations: usize,
    pub residuals: Vec<f64>,
    pub ratios: Vec<f64>,
    pub history: Vec<IterationRecord>,
}

impl ConvergenceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

#[derive(Clone, Debug)]
pub struct Converged {
    pub trajectory: Trajectory,
    pub geometry: FrozenGeometry,
    pub report: ConvergenceReport,
}

/// Consecutive non-contracting ratios that count as divergence.
pub const DIVERGENCE_RUN: usize = 3;

/// Iterate from `v^(0)(t) = v(0)` until the residual drops below `tol`.
pub fn iterate(m: &Medium, x0: &SpectralField, cfg: &FixedPointConfig) -> Result<Converged> {
    let times = time_grid(cfg.t_end, cfg.dt)?;
    iterate_from(m, x0, cfg, Trajectory::frozen(m, x0, &times))
}

/// As [`iterate`], from a caller-supplied initial iterate.
pub fn iterate_from(
    m: &Medium,
    x0: &SpectralField,
    cfg: &FixedPointConfig,
    start: Trajectory,
) -> Result<Converged> {
    cfg.validate()?;
    let mut current = start;
    let mut residuals = Vec::new();
    let mut ratios = Vec::new();
    let mut history = Vec::new();
    for it in 1..=cfg.max_iters {
        let clock = Instant::now();
        let (next, geometry, stats) = picard_step(m, x0, &current)?;
        let r = residual_norm(&next, &current);
        let ratio = residuals.last().map(|&p: &f64| if p > 0.0 { r / p } else { 0.0 });
        residuals.push(r);
        if let Some(q) = ratio {
            ratios.push(q);
        }
        history.push(IterationRecord {
            iteration: it,
            residual: r,
            ratio,
            wall_seconds: clock.elapsed().as_secs_f64(),
            solver: stats,
        });
        current = next;
        if r <= cfg.tol {
            return Ok(Converged {
                trajectory: current,
                geometry,
                report: ConvergenceReport {
                    converged: true,
                    iterations: it,
                    residuals,
                    ratios,
                    history,
                },
            });
        }
        if ratios.len() >= DIVERGENCE_RUN
            && ratios[ratios.len() - DIVERGENCE_RUN..].iter().all(|&q| q >= 1.0)
        {
            return Err(Error::Divergence { ratios });
        }
    }
    Err(Error::NotConverged {
        iters: cfg.max_iters,
        tol: cfg.tol,
        last: *residuals.last().unwrap(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RateStats {
    pub max: f64,
    pub geometric_mean: f64,
    pub contractive: bool,
}

/// Statistics of successive ratios `r_{n+1} / r_n`.
pub fn contraction_rate(residuals: &[f64]) -> Result<RateStats> {
    if residuals.len() < 3 {
        return Err(Error::TooFewResiduals {
            need: 3,
            got: residuals.len(),
        });
    }
    let ratios: Vec<f64> = residuals.windows(2).map(|w| w[1] / w[0]).collect();
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let geometric_mean = (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp();
    Ok(RateStats {
        max,
        geometric_mean,
        contractive: max < 1.0,
    })
}
