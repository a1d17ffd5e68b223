//! Dirichlet sine basis, interior Gauss quadrature, Sobolev and weighted
//! norms, the Hardy quotient `u/d` and the weighted embedding check.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};

use crate::error::{Error, Result};
use crate::jet::{Jet, JET_LEN};
use crate::quadrature::Rule;
use crate::shape::Shape;

/// Anything that can be expanded into a jet at a point of [0, 1].
pub trait Field1d {
    fn jet(&self, x: f64) -> Jet;

    fn value(&self, x: f64) -> f64 {
        self.jet(x).value()
    }
}

impl Field1d for Shape {
    fn jet(&self, x: f64) -> Jet {
        Shape::jet(self, x)
    }
}

impl<F: Fn(f64) -> Jet> Field1d for F {
    fn jet(&self, x: f64) -> Jet {
        self(x)
    }
}

#[derive(Clone, Debug)]
pub struct Basis {
    pub n_modes: usize,
    /// Interior Gauss rule on [0, 1].
    pub rule: Rule,
    /// `table[i][q] = e_{i+1}(x_q)`.
    pub table: Vec<Vec<f64>>,
}

/// `e_i(x) = sqrt(2) sin(i pi x)` for `i = 1..=n`.
pub fn mode(i: usize, x: f64) -> f64 {
    SQRT_2 * (i as f64 * PI * x).sin()
}

/// k-th derivative of `e_i`.
pub fn mode_derivative(i: usize, k: usize, x: f64) -> f64 {
    let w = i as f64 * PI;
    SQRT_2 * w.powi(k as i32) * (w * x + k as f64 * FRAC_PI_2).sin()
}

pub fn build_basis(n: usize) -> Basis {
    Basis::with_nodes(n, 3 * n + 8)
}

impl Basis {
    pub fn with_nodes(n: usize, q: usize) -> Basis {
        assert!(n >= 1, "need at least one mode");
        let rule = Rule::gauss(q, 0.0, 1.0);
        let table = (1..=n)
            .map(|i| rule.nodes.iter().map(|&x| mode(i, x)).collect())
            .collect();
        Basis {
            n_modes: n,
            rule,
            table,
        }
    }

    pub fn eigenvalue(&self, i: usize) -> f64 {
        let w = i as f64 * PI;
        w * w
    }

    pub fn gram(&self) -> Vec<Vec<f64>> {
        let w = &self.rule.weights;
        (0..self.n_modes)
            .map(|i| {
                (0..self.n_modes)
                    .map(|j| {
                        (0..w.len())
                            .map(|q| w[q] * self.table[i][q] * self.table[j][q])
                            .sum()
                    })
                    .collect()
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralField {
    pub coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(n: usize) -> Self {
        SpectralField {
            coeffs: vec![0.0; n],
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * mode(i + 1, x))
            .sum()
    }

    pub fn derivative(&self, k: usize, x: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * mode_derivative(i + 1, k, x))
            .sum()
    }

    /// Squared integer-order Sobolev norm from the coefficients.
    pub fn sobolev_sq_int(&self, k: usize) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let l = ((i + 1) as f64 * PI).powi(2);
                c * c * (0..=k).map(|j| l.powi(j as i32)).sum::<f64>()
            })
            .sum()
    }

    /// Squared `H^s` norm, interpolated linearly between integer orders.
    pub fn sobolev_sq(&self, s: f64) -> f64 {
        interpolate_order(s, |k| self.sobolev_sq_int(k))
    }

    pub fn l2(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

impl Field1d for SpectralField {
    fn jet(&self, x: f64) -> Jet {
        let mut d = [0.0; JET_LEN];
        for (i, c) in self.coeffs.iter().enumerate() {
            if *c == 0.0 {
                continue;
            }
            let w = (i + 1) as f64 * PI;
            let (s, co) = (w * x).sin_cos();
            let cycle = [s, co, -s, -co];
            let mut scale = SQRT_2 * c;
            for (k, dk) in d.iter_mut().enumerate() {
                *dk += scale * cycle[k % 4];
                scale *= w;
            }
        }
        Jet::from_derivatives(&d)
    }
}

/// `(1 - theta) a_k + theta a_{k+1}` for `s = k + theta`.
pub fn interpolate_order(s: f64, norm_sq: impl Fn(usize) -> f64) -> f64 {
    assert!(s >= 0.0);
    let k = s.floor() as usize;
    let theta = s - k as f64;
    if theta == 0.0 {
        norm_sq(k)
    } else {
        (1.0 - theta) * norm_sq(k) + theta * norm_sq(k + 1)
    }
}

/// L^2 projection onto the first `n` modes.
pub fn project(f: impl Fn(f64) -> f64, b: &Basis) -> SpectralField {
    let values: Vec<f64> = b.rule.nodes.iter().map(|&x| f(x)).collect();
    project_values(&values, b)
}

/// Projection from values at the basis quadrature nodes.
pub fn project_values(values: &[f64], b: &Basis) -> SpectralField {
    let coeffs = b
        .table
        .iter()
        .map(|row| {
            row.iter()
                .zip(values)
                .zip(&b.rule.weights)
                .map(|((e, f), w)| w * e * f)
                .sum()
        })
        .collect();
    SpectralField { coeffs }
}

/// Distance to the boundary of [0, 1].
pub fn distance(x: f64) -> f64 {
    x.min(1.0 - x)
}

/// Gauss rule on [0, 1/2] and [1/2, 1], so the kink of `d` is a break.
pub fn split_rule(q: usize) -> Rule {
    Rule::composite(&[0.0, 0.5, 1.0], q)
}

/// `u / d` for `u` vanishing at both endpoints, evaluated through the
/// integral representation `u(x)/x = int_0^1 u'(theta x) dtheta` (mirrored
/// on the right half), which stays accurate up to and at the boundary.
pub struct HardyQuotient<'a, U: Field1d> {
    pub u: &'a U,
    pub order: usize,
    theta: Rule,
}

pub fn hardy_quotient<U: Field1d>(u: &U, m: usize) -> Result<HardyQuotient<'_, U>> {
    if m + 1 >= JET_LEN {
        return Err(Error::UnsupportedOrder {
            requested: m,
            max: JET_LEN - 2,
        });
    }
    let (left, right) = (u.value(0.0), u.value(1.0));
    let scale = 1.0 + u.jet(0.0).d(1).abs() + u.jet(1.0).d(1).abs();
    if left.abs() > 1e-12 * scale || right.abs() > 1e-12 * scale {
        return Err(Error::EndpointContract { left, right });
    }
    Ok(HardyQuotient {
        u,
        order: m,
        theta: Rule::gauss(32, 0.0, 1.0),
    })
}

impl<U: Field1d> HardyQuotient<'_, U> {
    /// Derivatives `0..=order` of `u/d` at `x`.
    pub fn derivatives(&self, x: f64) -> Vec<f64> {
        hardy_derivatives(self.u, x, self.order, &self.theta)
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.derivatives(x)[0]
    }
}

/// Derivatives `0..=m` of `u/d` at `x` from the theta-integral representation.
pub fn hardy_derivatives<U: Field1d>(u: &U, x: f64, m: usize, theta: &Rule) -> Vec<f64> {
    let mut out = vec![0.0; m + 1];
    let left = x <= 0.5;
    for (&t, &w) in theta.nodes.iter().zip(&theta.weights) {
        let y = if left { t * x } else { 1.0 - t * (1.0 - x) };
        let j = u.jet(y);
        let mut tp = w;
        for (k, o) in out.iter_mut().enumerate() {
            *o += tp * j.d(k + 1);
            tp *= t;
        }
    }
    if !left {
        out.iter_mut().for_each(|o| *o = -*o);
    }
    out
}

impl<U: Field1d> Field1d for HardyQuotient<'_, U> {
    fn jet(&self, x: f64) -> Jet {
        Jet::from_derivatives(&hardy_derivatives(self.u, x, JET_LEN - 2, &self.theta))
    }
}

/// Width of the boundary layer where quotients go through `u/d`.
pub const HARDY_ZONE: f64 = 0.125;

/// Jet of `num / den` for two fields vanishing at the boundary, stable on
/// the closed interval.
pub fn quotient_jet<N: Field1d, D: Field1d>(num: &N, den: &D, x: f64, theta: &Rule) -> Jet {
    if distance(x) >= HARDY_ZONE {
        return num.jet(x).div(&den.jet(x));
    }
    let m = JET_LEN - 2;
    let a = Jet::from_derivatives(&hardy_derivatives(num, x, m, theta));
    let b = Jet::from_derivatives(&hardy_derivatives(den, x, m, theta));
    a.div(&b)
}

/// Rule used for the inner theta integrals of [`quotient_jet`].
pub fn theta_rule() -> Rule {
    Rule::gauss(24, 0.0, 1.0)
}

/// Squared `H^k` norm by quadrature, `sum_{j<=k} int (f^(j))^2`.
pub fn sobolev_sq_quad<F: Field1d>(f: &F, k: usize, rule: &Rule) -> f64 {
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| {
            let j = f.jet(x);
            w * (0..=k).map(|i| j.d(i).powi(2)).sum::<f64>()
        })
        .sum()
}

#[derive(Clone, Debug)]
pub enum Weight {
    Unit,
    /// `d(x)^p`.
    Distance(f64),
    /// `w(x)^p` for a nonnegative shape.
    Shape(Shape, f64),
}

impl Weight {
    pub fn at(&self, x: f64) -> f64 {
        match self {
            Weight::Unit => 1.0,
            Weight::Distance(p) => distance(x).powf(*p),
            Weight::Shape(s, p) => s.value(x).max(0.0).powf(*p),
        }
    }
}

#[derive(Clone, Debug)]
pub struct WeightedNorm {
    pub weight: Weight,
    /// Sobolev order.
    pub order: usize,
}

/// `sum_{j<=order} int w (f^(j))^2`.
pub fn weighted_norm_sq<F: Field1d>(f: &F, norm: &WeightedNorm, rule: &Rule) -> f64 {
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(&x, &w)| {
            let j = f.jet(x);
            w * norm.weight.at(x) * (0..=norm.order).map(|i| j.d(i).powi(2)).sum::<f64>()
        })
        .sum()
}

pub fn weighted_norm<F: Field1d>(f: &F, norm: &WeightedNorm, rule: &Rule) -> f64 {
    weighted_norm_sq(f, norm, rule).sqrt()
}

/// `||u/d||_{H^(s-1)} / ||u||_{H^s}`, both by quadrature.
pub fn hardy_ratio<U: Field1d>(u: &U, s: usize, rule: &Rule) -> Result<f64> {
    assert!(s >= 1);
    let q = hardy_quotient(u, s - 1)?;
    let top = sobolev_sq_quad(&q, s - 1, rule).sqrt();
    let bottom = sobolev_sq_quad(u, s, rule).sqrt();
    Ok(if top == 0.0 { 0.0 } else { top / bottom })
}

/// `||R||^2_{H^(1-p/2)} / int d^p (R^2 + R'^2)`.
pub fn embedding_check<R: Field1d>(r: &R, p: u32, rule: &Rule) -> Result<f64> {
    if p != 1 && p != 2 {
        return Err(Error::Config(format!("embedding weight power must be 1 or 2, got {p}")));
    }
    let s = 1.0 - p as f64 / 2.0;
    let lhs = interpolate_order(s, |k| sobolev_sq_quad(r, k, rule));
    let rhs = weighted_norm_sq(
        r,
        &WeightedNorm {
            weight: Weight::Distance(p as f64),
            order: 1,
        },
        rule,
    );
    if lhs == 0.0 {
        return Ok(0.0);
    }
    if rhs == 0.0 {
        return Err(Error::Config("embedding: zero weighted norm with nonzero left side".into()));
    }
    Ok(lhs / rhs)
}
