//! Lagrangian self-gravity force `F = C (M/2 - m(x))`, `m(x) = int_0^x rho0`.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::jet::{Jet, JET_LEN};
use crate::profiles::DensityProfile;
use crate::quadrature::{differentiation_matrix, gauss_legendre, Rule};
use crate::shape::Shape;

/// Gauss points per cell of the density partition.
pub const CELL_POINTS: usize = 8;

#[derive(Clone, Debug)]
pub struct ForceField {
    pub c_poisson: f64,
    pub total_mass: f64,
    rho: Shape,
    pub breaks: Vec<f64>,
    reference: Rule,
    /// Mass contained in `[breaks[0], breaks[i]]`.
    prefix: Vec<f64>,
}

pub fn compute_force(p: &DensityProfile) -> ForceField {
    compute_force_scaled(p, 1.0)
}

pub fn compute_force_scaled(p: &DensityProfile, c_poisson: f64) -> ForceField {
    let reference = gauss_legendre(CELL_POINTS);
    let rho = p.density().clone();
    let mut prefix = vec![0.0];
    for w in p.breaks.windows(2) {
        let cell = reference.on(w[0], w[1]).integrate(|x| rho.value(x));
        prefix.push(prefix.last().unwrap() + cell);
    }
    ForceField {
        c_poisson,
        total_mass: *prefix.last().unwrap(),
        rho,
        breaks: p.breaks.clone(),
        reference,
        prefix,
    }
}

impl ForceField {
    pub fn cumulative_mass(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return self.total_mass;
        }
        let i = self.breaks.partition_point(|&b| b <= x) - 1;
        let a = self.breaks[i];
        if x == a {
            return self.prefix[i];
        }
        self.prefix[i] + self.reference.on(a, x).integrate(|s| self.rho.value(s))
    }

    pub fn value(&self, x: f64) -> f64 {
        self.c_poisson * (0.5 * self.total_mass - self.cumulative_mass(x))
    }

    /// Taylor jet at `x`; derivatives come from `F' = -C rho0`.
    pub fn jet(&self, x: f64) -> Jet {
        let r = self.rho.jet(x);
        let mut j = Jet::ZERO;
        j.0[0] = self.value(x);
        for k in 1..JET_LEN {
            j.0[k] = -self.c_poisson * r.0[k - 1] / k as f64;
        }
        j
    }

    /// Composite Gauss rule on the density partition.
    pub fn rule(&self) -> Rule {
        Rule::composite(&self.breaks, CELL_POINTS)
    }

    pub fn write_csv(&self, path: &Path, nodes: &[f64]) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "x,F,m")?;
        for &x in nodes {
            writeln!(out, "{:.17e},{:.17e},{:.17e}", x, self.value(x), self.cumulative_mass(x))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `max |f' + C rho0|` over the composite Gauss nodes, with `f'` from the
/// local interpolating polynomial on each cell.
pub fn poisson_residual(
    f: impl Fn(f64) -> f64,
    rho: impl Fn(f64) -> f64,
    c_poisson: f64,
    breaks: &[f64],
) -> f64 {
    let reference = gauss_legendre(CELL_POINTS);
    let mut worst: f64 = 0.0;
    for w in breaks.windows(2) {
        let cell = reference.on(w[0], w[1]);
        let d = differentiation_matrix(&cell.nodes);
        let values: Vec<f64> = cell.nodes.iter().map(|&x| f(x)).collect();
        for (row, &x) in d.iter().zip(&cell.nodes) {
            let df: f64 = row.iter().zip(&values).map(|(a, b)| a * b).sum();
            worst = worst.max((df + c_poisson * rho(x)).abs());
        }
    }
    worst
}

pub fn check_poisson_consistency(f: &ForceField, p: &DensityProfile) -> f64 {
    poisson_residual(|x| f.value(x), |x| p.rho(x), f.c_poisson, &f.breaks)
}

/// `int_0^1 rho0 F dx`, which vanishes for every density.
pub fn momentum_neutrality(f: &ForceField, p: &DensityProfile) -> f64 {
    f.rule().integrate(|x| p.rho(x) * f.value(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{make_profile, ProfileKind, ProfileSpec};

    fn parabolic() -> DensityProfile {
        make_profile(&ProfileSpec::Parabolic, 2.0).unwrap()
    }

    #[test]
    fn parabolic_closed_form() {
        let p = parabolic();
        let f = compute_force(&p);
        assert!((f.total_mass - 1.0 / 6.0).abs() < 1e-15);
        assert!((f.value(0.0) - 1.0 / 12.0).abs() < 1e-15);
        assert!((f.value(1.0) + 1.0 / 12.0).abs() < 1e-15);
        assert!(f.value(0.5).abs() < 1e-15);
        for i in 0..=50 {
            let x = i as f64 / 50.0;
            let exact = 1.0 / 12.0 - x * x / 2.0 + x * x * x / 3.0;
            assert!((f.value(x) - exact).abs() < 1e-15);
        }
    }

    #[test]
    fn jet_matches_poisson() {
        let p = parabolic();
        let f = compute_force(&p);
        let j = f.jet(0.3);
        assert!((j.d(1) + p.rho(0.3)).abs() < 1e-15);
        assert!((j.d(2) + (1.0 - 0.6)).abs() < 1e-15);
        assert!((j.d(3) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn residuals() {
        let p = parabolic();
        let f = compute_force(&p);
        assert_eq!(f.rule().len(), 64);
        assert!(check_poisson_consistency(&f, &p) < 1e-10);
        assert!(momentum_neutrality(&f, &p).abs() < 1e-15);
        let eps = 1e-3;
        let r = poisson_residual(|x| f.value(x) + eps * x, |x| p.rho(x), 1.0, &p.breaks);
        assert!((r - eps).abs() < 1e-10);
    }

    #[test]
    fn zero_density() {
        let p = DensityProfile::from_density(ProfileKind::Polynomial, 2.0, Shape::constant(0.0));
        let f = compute_force(&p);
        assert_eq!(check_poisson_consistency(&f, &p), 0.0);
        assert_eq!(momentum_neutrality(&f, &p), 0.0);
    }

    #[test]
    fn scaling_is_linear() {
        let p = parabolic();
        let q = DensityProfile::from_density(
            ProfileKind::Polynomial,
            2.0,
            Shape::Polynomial(vec![0.0, 3.0, -3.0]),
        );
        let (f, g) = (compute_force(&p), compute_force(&q));
        for i in 0..=10 {
            let x = i as f64 / 10.0;
            assert!((g.value(x) - 3.0 * f.value(x)).abs() < 1e-15);
        }
    }
}
