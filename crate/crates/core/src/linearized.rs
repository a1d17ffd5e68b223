//! The degenerate linear parabolic problem for `X = w v` with frozen
//! geometry, discretized by weighted sine-Galerkin in space and implicit
//! midpoint in time, plus the scalar damping ODE `f + kappa f_t = g`.
//!
//! With `w = rho0^(gamma-1)` the problem reads
//! `X_t / w - kappa X'' + kappa (w''/w) X = G`, where
//! `G = F - gamma/(gamma-1) w'/eta'^gamma + gamma w eta''/eta'^(gamma+1)`.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gravity::ForceField;
use crate::jet::{Jet, JET_LEN};
use crate::profiles::SoundWeight;
use crate::quadrature::Rule;
use crate::spectral::{
    build_basis, distance, hardy_derivatives, mode, theta_rule, Basis, Field1d, SpectralField,
    HARDY_ZONE,
};

/// Admissible band for `eta'`, strict.
pub const ETA_MIN: f64 = 0.5;
pub const ETA_MAX: f64 = 1.5;
const ETA_SLACK: f64 = 1e-12;

/// Relative residual accepted for one implicit step.
pub const STEP_TOL: f64 = 1e-10;

pub fn eta_admissible(d: f64) -> bool {
    d > ETA_MIN + ETA_SLACK && d < ETA_MAX - ETA_SLACK
}

/// Maps sine coefficients to jets of `coeffs / w` at fixed nodes.
#[derive(Clone, Debug)]
pub struct Recovery {
    pub nodes: Vec<f64>,
    /// `modes[q][i]`: jet contribution of mode `i + 1` to the numerator.
    modes: Vec<Vec<Jet>>,
    den: Vec<Jet>,
}

impl Recovery {
    pub fn new(nodes: &[f64], n_modes: usize, weight: &SoundWeight) -> Self {
        let theta = theta_rule();
        let m = JET_LEN - 2;
        let mut modes = Vec::with_capacity(nodes.len());
        let mut den = Vec::with_capacity(nodes.len());
        for &x in nodes {
            let zone = distance(x) < HARDY_ZONE;
            let row = (1..=n_modes)
                .map(|i| {
                    let e = |y: f64| single_mode_jet(i, y);
                    if zone {
                        Jet::from_derivatives(&hardy_derivatives(&e, x, m, &theta))
                    } else {
                        e(x)
                    }
                })
                .collect();
            modes.push(row);
            den.push(if zone {
                Jet::from_derivatives(&hardy_derivatives(&weight.shape, x, m, &theta))
            } else {
                weight.shape.jet(x)
            });
        }
        Recovery {
            nodes: nodes.to_vec(),
            modes,
            den,
        }
    }

    /// Jet of `X / w` at node `q`.
    pub fn jet(&self, q: usize, coeffs: &[f64]) -> Jet {
        self.numerator(q, coeffs).div(&self.den[q])
    }

    /// Jet of the numerator in the form used at node `q`: `X` itself, or
    /// `X / d` inside the boundary layer.
    pub fn numerator(&self, q: usize, coeffs: &[f64]) -> Jet {
        let mut acc = Jet::ZERO;
        for (c, j) in coeffs.iter().zip(&self.modes[q]) {
            if *c != 0.0 {
                acc = acc + j.scale(*c);
            }
        }
        acc
    }

    pub fn all(&self, coeffs: &[f64]) -> Vec<Jet> {
        (0..self.nodes.len()).map(|q| self.jet(q, coeffs)).collect()
    }
}

fn single_mode_jet(i: usize, y: f64) -> Jet {
    let mut c = vec![0.0; i];
    c[i - 1] = 1.0;
    SpectralField { coeffs: c }.jet(y)
}

/// Everything that depends only on the data `(w, F, kappa, n)`.
#[derive(Clone, Debug)]
pub struct Medium {
    pub weight: SoundWeight,
    pub force: ForceField,
    pub kappa: f64,
    pub basis: Basis,
    pub omega: Vec<f64>,
    pub domega: Vec<f64>,
    /// `w''/w` at the interior nodes.
    pub reaction: Vec<f64>,
    pub force_values: Vec<f64>,
    /// `int e_i e_j / w`.
    pub mass: DMatrix<f64>,
    /// `K + R`, with `K = diag((i pi)^2)` and `R = int (w''/w) e_i e_j`.
    pub stiffness: DMatrix<f64>,
    /// Geometry nodes: `0`, the interior quadrature nodes, `1`.
    pub nodes: Vec<f64>,
    pub recovery: Recovery,
}

impl Medium {
    pub fn new(weight: SoundWeight, force: ForceField, kappa: f64, n_modes: usize) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::InvalidKappa(kappa));
        }
        let basis = build_basis(n_modes);
        let xs = &basis.rule.nodes;
        let jets: Vec<Jet> = xs.iter().map(|&x| weight.shape.jet(x)).collect();
        let omega: Vec<f64> = jets.iter().map(|j| j.value()).collect();
        if let Some((q, w)) = omega.iter().enumerate().find(|(_, w)| !(**w > 0.0)) {
            return Err(Error::PositivityLoss { x: xs[q], value: *w });
        }
        let domega = jets.iter().map(|j| j.d(1)).collect();
        let reaction: Vec<f64> = jets.iter().map(|j| j.d(2) / j.value()).collect();
        let force_values = xs.iter().map(|&x| force.value(x)).collect();
        let n = n_modes;
        let wq = &basis.rule.weights;
        let mut mass = DMatrix::zeros(n, n);
        let mut stiffness = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i..n {
                let (mut m, mut r) = (0.0, 0.0);
                for q in 0..xs.len() {
                    let p = wq[q] * basis.table[i][q] * basis.table[j][q];
                    m += p / omega[q];
                    r += p * reaction[q];
                }
                mass[(i, j)] = m;
                mass[(j, i)] = m;
                stiffness[(i, j)] = r;
                stiffness[(j, i)] = r;
            }
            stiffness[(i, i)] += basis.eigenvalue(i + 1);
        }
        if mass.clone().cholesky().is_none() {
            return Err(Error::SingularMass);
        }
        let mut nodes = vec![0.0];
        nodes.extend_from_slice(xs);
        nodes.push(1.0);
        let recovery = Recovery::new(&nodes, n, &weight);
        Ok(Medium {
            weight,
            force,
            kappa,
            basis,
            omega,
            domega,
            reaction,
            force_values,
            mass,
            stiffness,
            nodes,
            recovery,
        })
    }

    pub fn n_modes(&self) -> usize {
        self.basis.n_modes
    }

    /// `(f, e_k)` for values at the interior nodes.
    pub fn load(&self, values: &[f64]) -> DVector<f64> {
        let b = &self.basis;
        DVector::from_iterator(
            b.n_modes,
            b.table.iter().map(|row| {
                row.iter()
                    .zip(values)
                    .zip(&b.rule.weights)
                    .map(|((e, f), w)| w * e * f)
                    .sum::<f64>()
            }),
        )
    }

    /// Coefficients of `X` with `X / w` the weighted projection of `u`:
    /// `M c = (u, e_k)`.
    pub fn weighted_projection(&self, u_values: &[f64]) -> Result<SpectralField> {
        let rhs = self.load(u_values);
        let c = self
            .mass
            .clone()
            .cholesky()
            .ok_or(Error::SingularMass)?
            .solve(&rhs);
        Ok(SpectralField {
            coeffs: c.iter().copied().collect(),
        })
    }

    pub fn interior(&self) -> &[f64] {
        &self.basis.rule.nodes
    }
}

/// `eta`, `eta'`, `eta''` at the medium's geometry nodes on a uniform time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct FrozenGeometry {
    pub times: Vec<f64>,
    pub nodes: Vec<f64>,
    pub eta: Vec<Vec<f64>>,
    pub deta: Vec<Vec<f64>>,
    pub d2eta: Vec<Vec<f64>>,
}

impl FrozenGeometry {
    pub fn identity(times: &[f64], nodes: &[f64]) -> Self {
        let k = times.len();
        FrozenGeometry {
            times: times.to_vec(),
            nodes: nodes.to_vec(),
            eta: vec![nodes.to_vec(); k],
            deta: vec![vec![1.0; nodes.len()]; k],
            d2eta: vec![vec![0.0; nodes.len()]; k],
        }
    }

    /// First time where `eta'` leaves the admissible band or `eta` stops
    /// being increasing along the nodes.
    pub fn check(&self) -> Result<()> {
        for (s, &t) in self.times.iter().enumerate() {
            if let Some(&d) = self.deta[s].iter().find(|&&d| !eta_admissible(d)) {
                return Err(Error::GeometryBound { t, value: d });
            }
            if self.eta[s].windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::NotInjective { t });
            }
        }
        Ok(())
    }

    /// `(eta', eta'')` at interior nodes, linearly interpolated at time `t`.
    pub fn interior_at(&self, t: f64) -> (Vec<f64>, Vec<f64>) {
        let last = self.times.len() - 1;
        let dt = if last > 0 { self.times[1] - self.times[0] } else { 1.0 };
        let pos = if last == 0 { 0.0 } else { (t / dt).clamp(0.0, last as f64) };
        let i = (pos.floor() as usize).min(last.saturating_sub(1));
        let s = pos - i as f64;
        let j = (i + 1).min(last);
        let n = self.nodes.len();
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a[1..n - 1]
                .iter()
                .zip(&b[1..n - 1])
                .map(|(p, q)| (1.0 - s) * p + s * q)
                .collect()
        };
        (mix(&self.deta[i], &self.deta[j]), mix(&self.d2eta[i], &self.d2eta[j]))
    }
}

/// Source `G` at the interior nodes for given `eta'`, `eta''` there.
pub fn source_values(m: &Medium, deta: &[f64], d2eta: &[f64]) -> Vec<f64> {
    let g = m.weight.gamma;
    (0..m.omega.len())
        .map(|q| {
            let e = deta[q];
            m.force_values[q] - g / (g - 1.0) * m.domega[q] / e.powf(g)
                + g * m.omega[q] * d2eta[q] / e.powf(g + 1.0)
        })
        .collect()
}

/// Pointwise `G(x)` for a frozen deformation given as jets of `eta'`.
pub fn source_at(weight: &SoundWeight, force: &ForceField, x: f64, deta: f64, d2eta: f64) -> Result<f64> {
    if !eta_admissible(deta) {
        return Err(Error::GeometryBound { t: f64::NAN, value: deta });
    }
    let g = weight.gamma;
    let w = weight.shape.jet(x);
    Ok(force.value(x) - g / (g - 1.0) * w.d(1) / deta.powf(g)
        + g * w.value() * d2eta / deta.powf(g + 1.0))
}

/// `G` at the interior nodes at time `t`, after checking the geometry there.
pub fn assemble_g(m: &Medium, geom: &FrozenGeometry, t: f64) -> Result<Vec<f64>> {
    let (deta, d2eta) = geom.interior_at(t);
    if let Some(&d) = deta.iter().find(|&&d| !eta_admissible(d)) {
        return Err(Error::GeometryBound { t, value: d });
    }
    Ok(source_values(m, &deta, &d2eta))
}

pub enum Source<'a> {
    Frozen(&'a FrozenGeometry),
    /// `G(x, t)`.
    Custom(&'a (dyn Fn(f64, f64) -> f64 + Sync)),
}

pub struct LinearProblem<'a> {
    pub medium: &'a Medium,
    pub source: Source<'a>,
}

impl LinearProblem<'_> {
    fn load_at(&self, t: f64) -> Result<DVector<f64>> {
        let values = match &self.source {
            Source::Frozen(g) => assemble_g(self.medium, g, t)?,
            Source::Custom(f) => self.medium.interior().iter().map(|&x| f(x, t)).collect(),
        };
        Ok(self.medium.load(&values))
    }
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct SolveStats {
    pub steps: usize,
    pub refinements: usize,
    pub max_residual: f64,
}

#[derive(Clone, Debug)]
pub struct XSolution {
    pub times: Vec<f64>,
    /// Sine coefficients of `X` at every time level.
    pub coeffs: Vec<Vec<f64>>,
    pub stats: SolveStats,
}

pub fn time_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt > 0.0) || !(t_end > 0.0) {
        return Err(Error::Config(format!("need T > 0 and dt > 0 (T = {t_end}, dt = {dt})")));
    }
    let steps = (t_end / dt).round() as usize;
    if steps == 0 || ((steps as f64) * dt - t_end).abs() > 1e-9 * t_end {
        return Err(Error::Config(format!("T = {t_end} is not a multiple of dt = {dt}")));
    }
    Ok((0..=steps).map(|k| k as f64 * dt).collect())
}

/// Implicit midpoint: `(M/dt + kappa A/2) c1 = (M/dt - kappa A/2) c0 + b(t + dt/2)`.
pub fn solve_x(prob: &LinearProblem<'_>, x0: &SpectralField, t_end: f64, dt: f64) -> Result<XSolution> {
    let m = prob.medium;
    let times = time_grid(t_end, dt)?;
    if let Source::Frozen(g) = &prob.source {
        if g.times.len() != times.len() {
            return Err(Error::Config("geometry and solver time grids differ".into()));
        }
    }
    let half = &m.stiffness * (0.5 * m.kappa);
    let lhs = &m.mass / dt + &half;
    let rhs_op = &m.mass / dt - &half;
    let lu = lhs.clone().lu();
    let mut c = DVector::from_column_slice(&x0.coeffs);
    let mut coeffs = vec![x0.coeffs.clone()];
    let mut stats = SolveStats::default();
    for w in times.windows(2) {
        let rhs = &rhs_op * &c + prob.load_at(0.5 * (w[0] + w[1]))?;
        let mut next = lu.solve(&rhs).ok_or(Error::SingularMass)?;
        let scale = rhs.norm().max(f64::MIN_POSITIVE);
        let mut r = &rhs - &lhs * &next;
        if r.norm() > STEP_TOL * scale {
            stats.refinements += 1;
            next += lu.solve(&r).ok_or(Error::SingularMass)?;
            r = &rhs - &lhs * &next;
            if r.norm() > STEP_TOL * scale {
                return Err(Error::StepRejected {
                    t: w[1],
                    residual: r.norm() / scale,
                });
            }
        }
        stats.max_residual = stats.max_residual.max(r.norm() / scale);
        stats.steps += 1;
        c = next;
        coeffs.push(c.iter().copied().collect());
    }
    Ok(XSolution {
        times,
        coeffs,
        stats,
    })
}

/// Jets of `v = X / w` at the medium's geometry nodes for every time level.
pub fn recover_v(sol: &XSolution, m: &Medium) -> Vec<Vec<Jet>> {
    sol.coeffs.iter().map(|c| m.recovery.all(c)).collect()
}

impl XSolution {
    pub fn field(&self, k: usize) -> SpectralField {
        SpectralField {
            coeffs: self.coeffs[k].clone(),
        }
    }

    /// Long-format `t,x,X,v` on `xs` every `stride` steps.
    pub fn write_csv(&self, path: &Path, m: &Medium, xs: &[f64], stride: usize) -> Result<()> {
        let rec = Recovery::new(xs, m.n_modes(), &m.weight);
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "t,x,X,v")?;
        let last = self.times.len() - 1;
        for (k, t) in self.times.iter().enumerate() {
            if k % stride.max(1) != 0 && k != last {
                continue;
            }
            let f = self.field(k);
            for (q, &x) in xs.iter().enumerate() {
                let v = rec.jet(q, &f.coeffs).value();
                writeln!(out, "{:.10e},{:.10e},{:.17e},{:.17e}", t, x, f.eval(x), v)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// `int X^2 / w`, the energy of the Galerkin system.
pub fn weighted_l2_sq(m: &Medium, coeffs: &[f64]) -> f64 {
    let c = DVector::from_column_slice(coeffs);
    c.dot(&(&m.mass * &c))
}

#[derive(Clone, Debug, Serialize)]
pub struct DampingReport {
    pub trajectory: Vec<f64>,
    pub sup_f: f64,
    pub bound: f64,
    /// `sup|f| / max(|f0|, sup|g|)`.
    pub ratio: f64,
}

/// Exact solution of `f + kappa f_t = g` for `g` piecewise linear on `times`.
pub fn damping_solve(f0: f64, g: &[f64], times: &[f64], kappa: f64) -> Result<DampingReport> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidKappa(kappa));
    }
    assert_eq!(g.len(), times.len());
    let mut f = vec![f0];
    for k in 0..times.len() - 1 {
        let h = times[k + 1] - times[k];
        let em1 = (-h / kappa).exp_m1();
        let phi = 1.0 + em1;
        // (kappa / h) (1 - phi), accurate for small h / kappa
        let avg = -em1 * kappa / h;
        let fk = f[k];
        f.push(phi * fk + g[k + 1] - phi * g[k] - (g[k + 1] - g[k]) * avg);
    }
    let sup_f = f.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    let bound = g.iter().fold(f0.abs(), |a, b| a.max(b.abs()));
    Ok(DampingReport {
        ratio: if bound == 0.0 { 0.0 } else { sup_f / bound },
        trajectory: f,
        sup_f,
        bound,
    })
}

/// Rule on [0, 1] for integrals of quotients that are smooth but have a
/// removable singularity at the boundary.
pub fn interior_rule(n: usize) -> Rule {
    Rule::gauss(n, 0.0, 1.0)
}

pub fn modes_at(x: f64, n: usize) -> Vec<f64> {
    (1..=n).map(|i| mode(i, x)).collect()
}
