//! Initial data: density profiles with a physical vacuum boundary, initial
//! velocities, their mollification, and the compatibility time derivatives
//! `u_k = d^k v / dt^k` at `t = 0`.

use std::path::Path;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gravity::ForceField;
use crate::jet::Jet;
use crate::shape::{CubicSpline, Mollified, Shape};

/// Highest compatibility order computed by default.
pub const K_MAX: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ProfileKind {
    /// `rho0 = x (1 - x)`.
    Parabolic,
    /// Sound-speed weight `rho0^(gamma-1) = x (1 - x)`; equals `Parabolic` at gamma = 2.
    VacuumParabolic,
    Polynomial,
    Tabulated,
    Mollified,
}

#[derive(Clone, Debug)]
pub enum ProfileSpec {
    Parabolic,
    VacuumParabolic,
    Polynomial(Vec<f64>),
    Tabulated(Vec<(f64, f64)>),
}

impl ProfileSpec {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "parabolic" => Ok(ProfileSpec::Parabolic),
            "vacuum_parabolic" => Ok(ProfileSpec::VacuumParabolic),
            other => Err(Error::Config(format!("unknown profile kind `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct DensityProfile {
    pub kind: ProfileKind,
    pub gamma: f64,
    rho: Shape,
    omega: Shape,
    /// Partition used by composite quadrature of the density.
    pub breaks: Vec<f64>,
    pub samples: Vec<(f64, f64)>,
    /// One-sided derivatives of rho0 at 0 and 1.
    pub left_slope: f64,
    pub right_slope: f64,
}

/// The weight that multiplies the velocity in the intermediate variable
/// `X = w v`, together with the adiabatic index used in the pressure term.
#[derive(Clone, Debug)]
pub struct SoundWeight {
    pub shape: Shape,
    pub gamma: f64,
}

pub fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 1.0 && gamma < 3.0 {
        Ok(())
    } else {
        Err(Error::GammaOutOfRange(gamma))
    }
}

fn uniform_breaks(cells: usize) -> Vec<f64> {
    (0..=cells).map(|i| i as f64 / cells as f64).collect()
}

fn default_samples(rho: &Shape) -> Vec<(f64, f64)> {
    (0..=32)
        .map(|i| {
            let x = i as f64 / 32.0;
            (x, rho.value(x))
        })
        .collect()
}

impl DensityProfile {
    /// Unchecked constructor from a density shape and its sound-speed weight.
    pub fn from_shapes(kind: ProfileKind, gamma: f64, rho: Shape, omega: Shape) -> Self {
        let breaks = rho.natural_breaks().unwrap_or_else(|| uniform_breaks(8));
        let samples = match &rho {
            Shape::Spline(s) => s.knots.iter().copied().zip(s.values.iter().copied()).collect(),
            _ => default_samples(&rho),
        };
        let left_slope = rho.endpoint_slope(0.0);
        let right_slope = rho.endpoint_slope(1.0);
        DensityProfile {
            kind,
            gamma,
            rho,
            omega,
            breaks,
            samples,
            left_slope,
            right_slope,
        }
    }

    /// Unchecked constructor; the sound-speed weight is `rho^(gamma-1)`.
    pub fn from_density(kind: ProfileKind, gamma: f64, rho: Shape) -> Self {
        let omega = Shape::Power(Arc::new(rho.clone()), gamma - 1.0);
        Self::from_shapes(kind, gamma, rho, omega)
    }

    pub fn density(&self) -> &Shape {
        &self.rho
    }

    /// `omega0 = rho0^(gamma-1)`, proportional to the squared sound speed.
    pub fn sound_weight(&self) -> &Shape {
        &self.omega
    }

    pub fn rho(&self, x: f64) -> f64 {
        self.rho.value(x)
    }

    /// Weight for the gamma = 2 formulation, `X = rho0 v`.
    pub fn direct_weight(&self) -> Result<SoundWeight> {
        if self.gamma != 2.0 {
            return Err(Error::Config(format!(
                "direct rho0-weighted formulation needs gamma = 2, got {}",
                self.gamma
            )));
        }
        Ok(SoundWeight {
            shape: self.rho.clone(),
            gamma: 2.0,
        })
    }

    /// Slopes of `omega0` at both endpoints.
    pub fn vacuum_slopes(&self) -> (f64, f64) {
        (
            self.omega.endpoint_slope(0.0),
            self.omega.endpoint_slope(1.0),
        )
    }

    /// Check every invariant; `make_profile` and mollification call this.
    pub fn validate(&self) -> Result<()> {
        check_gamma(self.gamma)?;
        let (r0, r1) = (self.rho.value(0.0), self.rho.value(1.0));
        if r0 != 0.0 || r1 != 0.0 {
            return Err(Error::InvalidProfile(format!(
                "density must vanish exactly at both endpoints (rho0(0) = {r0:e}, rho0(1) = {r1:e})"
            )));
        }
        let report = validate_vacuum(self);
        if !report.interior_positive {
            return Err(Error::InvalidProfile(
                "density must be positive at every interior node".into(),
            ));
        }
        if !report.pass {
            return Err(Error::VacuumViolation(report.findings.join("; ")));
        }
        Ok(())
    }
}

/// Build one of the canonical profiles and validate it.
pub fn make_profile(spec: &ProfileSpec, gamma: f64) -> Result<DensityProfile> {
    check_gamma(gamma)?;
    let p = match spec {
        ProfileSpec::Parabolic => {
            DensityProfile::from_density(ProfileKind::Parabolic, gamma, Shape::parabola())
        }
        ProfileSpec::VacuumParabolic => {
            if gamma == 2.0 {
                DensityProfile::from_density(ProfileKind::VacuumParabolic, gamma, Shape::parabola())
            } else {
                let omega = Shape::parabola();
                let rho = Shape::Power(Arc::new(omega.clone()), 1.0 / (gamma - 1.0));
                DensityProfile::from_shapes(ProfileKind::VacuumParabolic, gamma, rho, omega)
            }
        }
        ProfileSpec::Polynomial(c) => DensityProfile::from_density(
            ProfileKind::Polynomial,
            gamma,
            Shape::Polynomial(c.clone()),
        ),
        ProfileSpec::Tabulated(rows) => tabulated(rows, gamma)?,
    };
    p.validate()?;
    Ok(p)
}

fn tabulated(rows: &[(f64, f64)], gamma: f64) -> Result<DensityProfile> {
    if rows.len() < 3 {
        return Err(Error::InvalidProfile("need at least 3 tabulated nodes".into()));
    }
    if rows[0].0 != 0.0 || rows[rows.len() - 1].0 != 1.0 {
        return Err(Error::InvalidProfile("tabulated nodes must start at x=0 and end at x=1".into()));
    }
    if rows.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::InvalidProfile("tabulated nodes must be strictly increasing".into()));
    }
    let knots = rows.iter().map(|r| r.0).collect();
    let values = rows.iter().map(|r| r.1).collect();
    let spline = Shape::Spline(Arc::new(CubicSpline::natural(knots, values)));
    Ok(DensityProfile::from_density(ProfileKind::Tabulated, gamma, spline))
}

/// Read a tabulated density from CSV with header `x,rho0`.
pub fn read_profile_csv(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    parse_profile_csv(&text)
}

pub fn parse_profile_csv(text: &str) -> Result<Vec<(f64, f64)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().unwrap_or("");
    if header.replace(' ', "") != "x,rho0" {
        return Err(Error::InvalidProfile(format!("expected header `x,rho0`, got `{header}`")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let mut it = line.split(',').map(|s| s.trim().parse::<f64>());
            match (it.next(), it.next(), it.next()) {
                (Some(Ok(x)), Some(Ok(r)), None) => Ok((x, r)),
                _ => Err(Error::InvalidProfile(format!("bad CSV row {}: `{line}`", i + 2))),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VacuumWitness {
    pub alpha: f64,
    /// Lower bound of `|omega0'|` where `dist(x, boundary) <= alpha`.
    pub c: f64,
    /// Lower bound of `omega0` where `dist(x, boundary) >= alpha`.
    pub c_alpha: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VacuumReport {
    /// Boundary slopes of `c^2 = gamma rho0^(gamma-1)`.
    pub c2_slope_left: f64,
    pub c2_slope_right: f64,
    pub witness: Option<VacuumWitness>,
    pub interior_positive: bool,
    pub pass: bool,
    pub findings: Vec<String>,
}

const WITNESS_GRID: usize = 2000;

/// Check the physical vacuum condition and produce an `(alpha, C, C_alpha)` witness.
pub fn validate_vacuum(p: &DensityProfile) -> VacuumReport {
    let mut findings = Vec::new();
    let (s0, s1) = p.vacuum_slopes();
    let c2_slope_left = p.gamma * s0;
    let c2_slope_right = p.gamma * s1;
    for (side, s) in [("left", s0), ("right", s1)] {
        if !s.is_finite() {
            findings.push(format!("{side} sound-speed slope is unbounded"));
        } else if s.abs() < 1e-12 {
            findings.push(format!("{side} sound-speed slope vanishes"));
        }
    }
    let interior_positive = p
        .samples
        .iter()
        .filter(|(x, _)| *x > 0.0 && *x < 1.0)
        .all(|&(x, _)| p.rho(x) > 0.0)
        && (1..WITNESS_GRID).all(|i| p.rho(i as f64 / WITNESS_GRID as f64) > 0.0);
    if !interior_positive {
        findings.push("density not positive in the interior".into());
    }
    let witness = if findings.is_empty() {
        find_witness(p.sound_weight(), (s0, s1))
    } else {
        None
    };
    if findings.is_empty() && witness.is_none() {
        findings.push("no (alpha, C, C_alpha) witness found".into());
    }
    VacuumReport {
        c2_slope_left,
        c2_slope_right,
        witness,
        interior_positive,
        pass: findings.is_empty(),
        findings,
    }
}

fn find_witness(omega: &Shape, slopes: (f64, f64)) -> Option<VacuumWitness> {
    let grid: Vec<(f64, Jet)> = (1..WITNESS_GRID)
        .map(|i| {
            let x = i as f64 / WITNESS_GRID as f64;
            (x, omega.jet(x))
        })
        .collect();
    for alpha in [0.25, 0.125, 0.0625, 0.03125] {
        let mut c = slopes.0.abs().min(slopes.1.abs());
        let mut c_alpha = f64::INFINITY;
        for (x, j) in &grid {
            let d = x.min(1.0 - x);
            if d <= alpha {
                c = c.min(j.d(1).abs());
            }
            if d >= alpha {
                c_alpha = c_alpha.min(j.value());
            }
        }
        if c > 1e-12 && c_alpha > 0.0 && c_alpha.is_finite() {
            return Some(VacuumWitness { alpha, c, c_alpha });
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub enum Smoothness {
    Analytic,
    PiecewiseCubic,
    Mollified,
}

#[derive(Clone, Debug)]
pub struct VelocityProfile {
    pub shape: Shape,
    pub smoothness: Smoothness,
}

impl VelocityProfile {
    pub fn constant(c: f64) -> Self {
        VelocityProfile {
            shape: Shape::constant(c),
            smoothness: Smoothness::Analytic,
        }
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn affine(a: f64, b: f64) -> Self {
        VelocityProfile {
            shape: Shape::Polynomial(vec![a, b]),
            smoothness: Smoothness::Analytic,
        }
    }

    pub fn sine(amplitude: f64, wavenumber: f64) -> Self {
        VelocityProfile {
            shape: Shape::Sine {
                amplitude,
                wavenumber,
            },
            smoothness: Smoothness::Analytic,
        }
    }

    pub fn tabulated(rows: &[(f64, f64)]) -> Self {
        let knots = rows.iter().map(|r| r.0).collect();
        let values = rows.iter().map(|r| r.1).collect();
        VelocityProfile {
            shape: Shape::Spline(Arc::new(CubicSpline::natural(knots, values))),
            smoothness: Smoothness::PiecewiseCubic,
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        self.shape.value(x)
    }

    pub fn jet(&self, x: f64) -> Jet {
        self.shape.jet(x)
    }
}

/// Kernel support radius `1 / |ln kappa|`.
pub fn mollifier_radius(kappa: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa < 1.0) {
        return Err(Error::InvalidKappa(kappa));
    }
    let r = 1.0 / kappa.ln().abs();
    if r >= 0.5 {
        return Err(Error::InvalidKappa(kappa));
    }
    Ok(r)
}

pub fn mollify_velocity(u0: &VelocityProfile, kappa: f64) -> Result<VelocityProfile> {
    let radius = mollifier_radius(kappa)?;
    Ok(VelocityProfile {
        shape: Shape::Mollified(Arc::new(Mollified {
            inner: u0.shape.clone(),
            radius,
            correction: None,
        })),
        smoothness: Smoothness::Mollified,
    })
}

/// Smoothed density vanishing exactly on the boundary.
pub fn mollify_density(p: &DensityProfile, kappa: f64) -> Result<DensityProfile> {
    let radius = mollifier_radius(kappa)?;
    let raw = Mollified {
        inner: p.density().clone(),
        radius,
        correction: None,
    };
    let g0 = raw.raw_derivatives(0.0)[0];
    let g1 = raw.raw_derivatives(1.0)[0];
    let rho = Shape::Mollified(Arc::new(Mollified {
        correction: Some((g0, g1)),
        ..raw
    }));
    for i in 1..400 {
        let x = i as f64 / 400.0;
        let value = rho.value(x);
        if value <= 0.0 {
            return Err(Error::PositivityLoss { x, value });
        }
    }
    let mut out = DensityProfile::from_density(ProfileKind::Mollified, p.gamma, rho);
    out.breaks = uniform_breaks(16);
    out.validate()?;
    Ok(out)
}

/// Pointwise compatibility operator for the kappa-problem
///
/// `v_t = F - (1/rho0) (rho0^gamma / eta'^gamma)' + (kappa / w) (w^2 v')'`
///
/// expressed through the sound weight `w`, with every quotient expanded so
/// the formulas stay finite on the closed interval.
pub struct Compatibility<'a> {
    pub weight: &'a SoundWeight,
    pub force: &'a ForceField,
    pub u0: &'a VelocityProfile,
    pub kappa: f64,
}

impl Compatibility<'_> {
    /// Jets of `u_0 ..= u_k` at `x`.
    pub fn jets(&self, x: f64, k: usize) -> Result<Vec<Jet>> {
        if k > K_MAX {
            return Err(Error::UnsupportedOrder {
                requested: k,
                max: K_MAX,
            });
        }
        let g = self.weight.gamma;
        let w = self.weight.shape.jet(x);
        let dw = w.deriv();
        let u0 = self.u0.jet(x);
        let mut out = vec![u0];
        if k == 0 {
            return Ok(out);
        }
        let f = self.force.jet(x);
        let viscous = |u: &Jet| {
            let du = u.deriv();
            (w * du.deriv() + dw * du.scale(2.0)).scale(self.kappa)
        };
        let u1 = f - dw.scale(g / (g - 1.0)) + viscous(&u0);
        out.push(u1);
        if k == 1 {
            return Ok(out);
        }
        let du0 = u0.deriv();
        let u2 = viscous(&u1) + dw * du0.scale(g * g / (g - 1.0)) + w * du0.deriv().scale(g);
        out.push(u2);
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CompatibilityData {
    pub order: usize,
    pub kappa: f64,
    pub nodes: Vec<f64>,
    /// `fields[k][i] = u_k(nodes[i])`.
    pub fields: Vec<Vec<f64>>,
}

pub fn compute_u1(c: &Compatibility<'_>, nodes: &[f64]) -> Result<Vec<f64>> {
    nodes
        .iter()
        .map(|&x| Ok(c.jets(x, 1)?[1].value()))
        .collect()
}

pub fn compute_uk(c: &Compatibility<'_>, k: usize, nodes: &[f64]) -> Result<CompatibilityData> {
    let mut fields = vec![Vec::with_capacity(nodes.len()); k + 1];
    for &x in nodes {
        for (field, j) in fields.iter_mut().zip(c.jets(x, k)?) {
            field.push(j.value());
        }
    }
    Ok(CompatibilityData {
        order: k,
        kappa: c.kappa,
        nodes: nodes.to_vec(),
        fields,
    })
}
