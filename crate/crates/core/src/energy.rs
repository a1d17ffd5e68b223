//! The higher-order energy `E(t)`, the bound `sup E <= 2 M0`, and the
//! physical invariants of a trajectory.
//!
//! Terms, in order (`w` is the sound weight, `X = w v`):
//! 1-5: `||d_t^s v||^2_{H^(2-s/2)}`, `s = 0..4`;
//! 6-8: `||X||^2_{H^3}`, `||X_tt||^2_{H^2}`, `||X_tttt||^2_{H^1}`;
//! 9-12: `int w (v_t'')^2`, `int w^3 (v_t''')^2`, `int w (v_ttt')^2`, `int w^3 (v_ttt'')^2`.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::fixedpoint::Trajectory;
use crate::gravity::ForceField;
use crate::jet::Jet;
use crate::linearized::{FrozenGeometry, Medium};
use crate::profiles::{Compatibility, VelocityProfile, K_MAX};
use crate::quadrature::fd_weights;
use crate::spectral::{interpolate_order, SpectralField};

pub const N_TERMS: usize = 12;

/// Coefficients of `d_t^k X (0)` for `k = 0..=K_MAX`, each the weighted
/// projection of `u_k`.
#[derive(Clone, Debug)]
pub struct InitialData {
    pub fields: Vec<SpectralField>,
}

pub fn initial_data(m: &Medium, force: &ForceField, u0: &VelocityProfile) -> Result<InitialData> {
    let c = Compatibility {
        weight: &m.weight,
        force,
        u0,
        kappa: m.kappa,
    };
    let nodes = m.interior();
    let mut values: Vec<Vec<f64>> = (0..=K_MAX).map(|_| Vec::with_capacity(nodes.len())).collect();
    for &x in nodes {
        for (k, j) in c.jets(x, K_MAX)?.iter().enumerate() {
            values[k].push(j.value());
        }
    }
    let fields = values
        .iter()
        .map(|v| m.weighted_projection(v))
        .collect::<Result<_>>()?;
    Ok(InitialData { fields })
}

#[derive(Clone, Debug, Serialize)]
pub struct EnergySnapshot {
    pub t: f64,
    /// `None` where the history was too short for the time derivative.
    pub terms: Vec<Option<f64>>,
    pub total: f64,
}

impl EnergySnapshot {
    pub fn is_partial(&self) -> bool {
        self.terms.iter().any(|t| t.is_none())
    }

    pub fn omitted(&self) -> Vec<usize> {
        (0..N_TERMS).filter(|&i| self.terms[i].is_none()).map(|i| i + 1).collect()
    }
}

/// Coefficients of `d_t^s X` at time index `k`: projected compatibility
/// data at `t = 0` for `s <= K_MAX`, otherwise a second-order
/// finite-difference stencil on `s + 2` levels (backward when possible).
pub fn time_derivative(
    traj: &Trajectory,
    init: Option<&InitialData>,
    k: usize,
    s: usize,
) -> Option<Vec<f64>> {
    if s == 0 {
        return Some(traj.coeffs[k].clone());
    }
    if k == 0 {
        if let Some(d) = init.and_then(|i| i.fields.get(s)) {
            return Some(d.coeffs.clone());
        }
    }
    let len = s + 2;
    if traj.times.len() < len {
        return None;
    }
    let start = (k + 1).saturating_sub(len);
    let ts = &traj.times[start..start + len];
    let w = fd_weights(traj.times[k], ts, s);
    let n = traj.coeffs[k].len();
    let mut out = vec![0.0; n];
    for (j, wj) in w[s].iter().enumerate() {
        for (o, c) in out.iter_mut().zip(&traj.coeffs[start + j]) {
            *o += wj * c;
        }
    }
    Some(out)
}

fn h_int(jets: &[Jet], m: &Medium, k: usize) -> f64 {
    let w = &m.basis.rule.weights;
    w.iter()
        .zip(&jets[1..jets.len() - 1])
        .map(|(wq, j)| wq * (0..=k).map(|i| j.d(i).powi(2)).sum::<f64>())
        .sum()
}

fn weighted(jets: &[Jet], m: &Medium, power: i32, order: usize) -> f64 {
    let w = &m.basis.rule.weights;
    w.iter()
        .zip(&m.omega)
        .zip(&jets[1..jets.len() - 1])
        .map(|((wq, om), j)| wq * om.powi(power) * j.d(order).powi(2))
        .sum()
}

/// All twelve terms of `E` at time index `k`.
pub fn eval_energy(
    m: &Medium,
    traj: &Trajectory,
    init: Option<&InitialData>,
    k: usize,
) -> EnergySnapshot {
    let mut terms = vec![None; N_TERMS];
    let x: Vec<Option<Vec<f64>>> = (0..=4).map(|s| time_derivative(traj, init, k, s)).collect();
    let v: Vec<Option<Vec<Jet>>> = x
        .iter()
        .map(|c| c.as_ref().map(|c| m.recovery.all(c)))
        .collect();
    for s in 0..=4 {
        if let Some(j) = &v[s] {
            let order = 2.0 - s as f64 / 2.0;
            terms[s] = Some(interpolate_order(order, |i| h_int(j, m, i)));
        }
    }
    for (slot, (s, order)) in [(0, 3), (2, 2), (4, 1)].into_iter().enumerate() {
        if let Some(c) = &x[s] {
            terms[5 + slot] = Some(
                SpectralField {
                    coeffs: c.clone(),
                }
                .sobolev_sq_int(order),
            );
        }
    }
    if let Some(j) = &v[1] {
        terms[8] = Some(weighted(j, m, 1, 2));
        terms[9] = Some(weighted(j, m, 3, 3));
    }
    if let Some(j) = &v[3] {
        terms[10] = Some(weighted(j, m, 1, 1));
        terms[11] = Some(weighted(j, m, 3, 2));
    }
    EnergySnapshot {
        t: traj.times[k],
        total: terms.iter().flatten().sum(),
        terms,
    }
}

pub fn energy_history(m: &Medium, traj: &Trajectory, init: Option<&InitialData>) -> Vec<EnergySnapshot> {
    (0..traj.times.len()).map(|k| eval_energy(m, traj, init, k)).collect()
}

#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct BoundVerdict {
    pub pass: bool,
    pub m0: f64,
    pub first_violation: Option<f64>,
    /// Least-squares `C` in `E(t) - M0 ~ C t sup_{s<=t} E(s)`.
    pub fitted_c: f64,
}

/// Check `E(t) <= 2 M0` along a history of `(t, E)`.
pub fn check_bound(history: &[(f64, f64)], m0: f64) -> BoundVerdict {
    let first_violation = history.iter().find(|(_, e)| *e > 2.0 * m0).map(|(t, _)| *t);
    let mut sup = f64::NEG_INFINITY;
    let (mut num, mut den) = (0.0, 0.0);
    for &(t, e) in history {
        sup = sup.max(e);
        let z = t * sup;
        num += (e - m0) * z;
        den += z * z;
    }
    BoundVerdict {
        pass: first_violation.is_none(),
        m0,
        first_violation,
        fitted_c: if den > 0.0 { num / den } else { 0.0 },
    }
}

/// `int rho0 v = int (rho0 / w) X` at time index `k`.
pub fn momentum(m: &Medium, traj: &Trajectory, k: usize) -> f64 {
    let f = traj.field(k);
    let g = m.weight.gamma;
    m.basis
        .rule
        .nodes
        .iter()
        .zip(&m.basis.rule.weights)
        .zip(&m.omega)
        .map(|((&x, w), om)| {
            // rho0 / w = w^(1/(gamma-1) - 1)
            let ratio = if g == 2.0 { 1.0 } else { om.powf(1.0 / (g - 1.0) - 1.0) };
            w * ratio * f.eval(x)
        })
        .sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct InvariantReport {
    pub t: f64,
    pub momentum: f64,
    /// `int f eta'` with `f = rho0 / eta'`.
    pub mass: f64,
    pub mass_residual: f64,
    pub a: f64,
    pub b: f64,
    /// Boundary slopes of `c^2` with respect to `eta`.
    pub slope_left: f64,
    pub slope_right: f64,
    pub speed_left: f64,
    pub speed_right: f64,
}

pub fn invariants(m: &Medium, traj: &Trajectory, geom: &FrozenGeometry, k: usize) -> InvariantReport {
    let g = m.weight.gamma;
    let n = m.nodes.len();
    let rho = |x: f64| m.weight.shape.value(x).max(0.0).powf(1.0 / (g - 1.0));
    let mut mass = 0.0;
    let mut mass_residual: f64 = 0.0;
    for (q, (&x, &w)) in m.basis.rule.nodes.iter().zip(&m.basis.rule.weights).enumerate() {
        let r = rho(x);
        let d = geom.deta[k][q + 1];
        let f = r / d;
        mass += w * f * d;
        mass_residual = mass_residual.max((f * d - r).abs());
    }
    let (s0, s1) = (m.weight.shape.endpoint_slope(0.0), m.weight.shape.endpoint_slope(1.0));
    let (e0, e1) = (geom.deta[k][0], geom.deta[k][n - 1]);
    InvariantReport {
        t: traj.times[k],
        momentum: momentum(m, traj, k),
        mass,
        mass_residual,
        a: geom.eta[k][0],
        b: geom.eta[k][n - 1],
        slope_left: g * s0 / e0.powf(g),
        slope_right: g * s1 / e1.powf(g),
        speed_left: traj.v[k][0].value(),
        speed_right: traj.v[k][n - 1].value(),
    }
}

pub fn write_history_csv(
    path: &Path,
    energy: &[EnergySnapshot],
    inv: &[InvariantReport],
    stride: usize,
) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let names: Vec<String> = (1..=N_TERMS).map(|i| format!("term_{i}")).collect();
    writeln!(
        out,
        "t,{},E_total,momentum,a,b,slope_left,slope_right",
        names.join(",")
    )?;
    let last = energy.len().saturating_sub(1);
    for (k, (e, r)) in energy.iter().zip(inv).enumerate() {
        if k % stride.max(1) != 0 && k != last {
            continue;
        }
        let terms: Vec<String> = e
            .terms
            .iter()
            .map(|t| t.map_or_else(String::new, |v| format!("{v:.12e}")))
            .collect();
        writeln!(
            out,
            "{:.10e},{},{:.12e},{:.12e},{:.15e},{:.15e},{:.12e},{:.12e}",
            e.t,
            terms.join(","),
            e.total,
            r.momentum,
            r.a,
            r.b,
            r.slope_left,
            r.slope_right
        )?;
    }
    out.flush()?;
    Ok(())
}
