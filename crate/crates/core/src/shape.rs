//! Closed-form and tabulated scalar fields on [0, 1] that can be expanded
//! into jets at any point.

use std::sync::{Arc, OnceLock};

use crate::jet::{Jet, JET_LEN};
use crate::quadrature::{gauss_legendre, Rule};

#[derive(Clone, Debug)]
pub enum Shape {
    /// Monomial coefficients, lowest degree first.
    Polynomial(Vec<f64>),
    /// `amplitude * sin(wavenumber * pi * x)`.
    Sine { amplitude: f64, wavenumber: f64 },
    Spline(Arc<CubicSpline>),
    /// `base^exponent`; only meaningful where the base is positive.
    Power(Arc<Shape>, f64),
    Sum(Arc<Shape>, Arc<Shape>),
    Mollified(Arc<Mollified>),
}

impl Shape {
    pub fn parabola() -> Self {
        Shape::Polynomial(vec![0.0, 1.0, -1.0])
    }

    pub fn constant(c: f64) -> Self {
        Shape::Polynomial(vec![c])
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Shape::Polynomial(a) => a.iter().rev().fold(0.0, |acc, c| acc * x + c),
            Shape::Sine {
                amplitude,
                wavenumber,
            } => amplitude * (wavenumber * std::f64::consts::PI * x).sin(),
            Shape::Spline(s) => s.value(x),
            Shape::Power(b, p) => b.value(x).max(0.0).powf(*p),
            Shape::Sum(a, b) => a.value(x) + b.value(x),
            Shape::Mollified(m) => m.jet(x).value(),
        }
    }

    pub fn jet(&self, x: f64) -> Jet {
        match self {
            Shape::Polynomial(a) => poly_jet(a, x),
            Shape::Sine {
                amplitude,
                wavenumber,
            } => {
                let k = wavenumber * std::f64::consts::PI;
                let mut d = [0.0; JET_LEN];
                let (s, c) = (k * x).sin_cos();
                let cycle = [s, c, -s, -c];
                let mut scale = *amplitude;
                for (i, di) in d.iter_mut().enumerate() {
                    *di = scale * cycle[i % 4];
                    scale *= k;
                }
                Jet::from_derivatives(&d)
            }
            Shape::Spline(s) => s.jet(x),
            Shape::Power(b, p) if *p == 1.0 => b.jet(x),
            Shape::Power(b, p) => b.jet(x).powf(*p),
            Shape::Sum(a, b) => a.jet(x) + b.jet(x),
            Shape::Mollified(m) => m.jet(x),
        }
    }

    /// One-sided derivative at an endpoint, with the limit taken for
    /// powers of a base that vanishes there (possibly infinite or zero).
    pub fn endpoint_slope(&self, x: f64) -> f64 {
        match self {
            Shape::Power(b, p) => {
                let bv = b.value(x);
                let bs = b.endpoint_slope(x);
                if bv.abs() > 1e-14 {
                    return p * bv.powf(p - 1.0) * bs;
                }
                if (p - 1.0).abs() < 1e-15 {
                    bs
                } else if *p < 1.0 {
                    if bs == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY.copysign(bs)
                    }
                } else {
                    0.0
                }
            }
            Shape::Sum(a, b) => a.endpoint_slope(x) + b.endpoint_slope(x),
            _ => self.jet(x).d(1),
        }
    }

    /// Natural breakpoints for composite quadrature.
    pub fn natural_breaks(&self) -> Option<Vec<f64>> {
        match self {
            Shape::Spline(s) => Some(s.knots.clone()),
            Shape::Power(b, _) => b.natural_breaks(),
            _ => None,
        }
    }
}

fn poly_jet(a: &[f64], x: f64) -> Jet {
    // Repeated synthetic division gives the Taylor coefficients at x.
    let mut c: Vec<f64> = a.to_vec();
    let mut out = Jet::ZERO;
    let n = c.len();
    for k in 0..n.min(JET_LEN) {
        let mut acc = 0.0;
        for i in (k..n).rev() {
            acc = acc * x + c[i];
            c[i] = acc;
        }
        out.0[k] = c[k];
    }
    out
}

/// Natural cubic spline through `(knots[i], values[i])`.
#[derive(Clone, Debug)]
pub struct CubicSpline {
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    second: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(knots: Vec<f64>, values: Vec<f64>) -> Self {
        let n = knots.len();
        assert!(n >= 2 && values.len() == n);
        let mut second = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the interior second derivatives.
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut rhs = vec![0.0; m];
            for i in 0..m {
                let h0 = knots[i + 1] - knots[i];
                let h1 = knots[i + 2] - knots[i + 1];
                diag[i] = 2.0 * (h0 + h1);
                upper[i] = h1;
                rhs[i] = 6.0
                    * ((values[i + 2] - values[i + 1]) / h1 - (values[i + 1] - values[i]) / h0);
            }
            for i in 1..m {
                let h = knots[i + 1] - knots[i];
                let f = h / diag[i - 1];
                diag[i] -= f * upper[i - 1];
                rhs[i] -= f * rhs[i - 1];
            }
            let mut sol = vec![0.0; m];
            sol[m - 1] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                sol[i] = (rhs[i] - upper[i] * sol[i + 1]) / diag[i];
            }
            second[1..n - 1].copy_from_slice(&sol);
        }
        CubicSpline {
            knots,
            values,
            second,
        }
    }

    fn segment(&self, x: f64) -> usize {
        let n = self.knots.len();
        match self.knots.binary_search_by(|k| k.partial_cmp(&x).unwrap()) {
            Ok(i) => i.min(n - 2),
            Err(0) => 0,
            Err(i) => (i - 1).min(n - 2),
        }
    }

    /// Local cubic `a + b t + c t^2 + d t^3` with `t = x - knots[i]`.
    fn coefficients(&self, i: usize) -> [f64; 4] {
        let h = self.knots[i + 1] - self.knots[i];
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        [
            y0,
            (y1 - y0) / h - h * (2.0 * m0 + m1) / 6.0,
            0.5 * m0,
            (m1 - m0) / (6.0 * h),
        ]
    }

    pub fn value(&self, x: f64) -> f64 {
        self.jet(x).value()
    }

    pub fn jet(&self, x: f64) -> Jet {
        let i = self.segment(x);
        let c = self.coefficients(i);
        poly_jet(&c, x - self.knots[i])
    }
}

/// Convolution of a point-reflected extension with the standard bump
/// kernel of radius `radius`, optionally minus the affine interpolant of
/// its endpoint values (which restores exact Dirichlet zeros).
#[derive(Clone, Debug)]
pub struct Mollified {
    pub inner: Shape,
    pub radius: f64,
    pub correction: Option<(f64, f64)>,
}

const KERNEL_POINTS: usize = 64;

struct Kernel {
    rule: Rule,
    /// `psi^(k)(t) = psi(t) P_k(t) / (1 - t^2)^(2k)`; monomial coefficients of `P_k`.
    polys: Vec<Vec<f64>>,
}

fn kernel() -> &'static Kernel {
    static K: OnceLock<Kernel> = OnceLock::new();
    K.get_or_init(|| {
        let mut polys = vec![vec![1.0]];
        for k in 0..JET_LEN - 1 {
            let p = &polys[k];
            // P_{k+1} = -2t P_k + P_k' (1 - t^2)^2 + 4k t (1 - t^2) P_k
            let deg = p.len() + 4;
            let mut next = vec![0.0; deg];
            let dp: Vec<f64> = (1..p.len()).map(|i| i as f64 * p[i]).collect();
            let one_minus_sq2 = [1.0, 0.0, -2.0, 0.0, 1.0];
            for (i, c) in p.iter().enumerate() {
                next[i + 1] += -2.0 * c;
                next[i + 1] += 4.0 * k as f64 * c;
                next[i + 3] -= 4.0 * k as f64 * c;
            }
            for (i, c) in dp.iter().enumerate() {
                for (j, q) in one_minus_sq2.iter().enumerate() {
                    next[i + j] += c * q;
                }
            }
            while next.len() > 1 && *next.last().unwrap() == 0.0 {
                next.pop();
            }
            polys.push(next);
        }
        Kernel {
            rule: gauss_legendre(KERNEL_POINTS),
            polys,
        }
    })
}

/// Point reflection across each endpoint: `E f(-y) = 2 f(0) - f(y)`.
pub fn reflect_extend(f: &Shape, y: f64) -> f64 {
    if y < 0.0 {
        2.0 * f.value(0.0) - f.value(-y)
    } else if y > 1.0 {
        2.0 * f.value(1.0) - f.value(2.0 - y)
    } else {
        f.value(y)
    }
}

impl Mollified {
    /// Derivatives `0..JET_LEN` of the convolution (before correction).
    pub fn raw_derivatives(&self, x: f64) -> [f64; JET_LEN] {
        let k = kernel();
        let r = self.radius;
        let mut cuts = vec![-1.0, 1.0];
        for c in [x / r, (x - 1.0) / r] {
            if c > -1.0 && c < 1.0 {
                cuts.push(c);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut acc = [0.0; JET_LEN];
        let mut norm = 0.0;
        for w in cuts.windows(2) {
            let piece = k.rule.on(w[0], w[1]);
            for (&t, &wt) in piece.nodes.iter().zip(&piece.weights) {
                let s = 1.0 - t * t;
                let psi = (-1.0 / s).exp();
                if psi == 0.0 {
                    continue;
                }
                let e = reflect_extend(&self.inner, x - r * t);
                norm += wt * psi;
                let mut denom = 1.0;
                for (order, a) in acc.iter_mut().enumerate() {
                    let p = k.polys[order].iter().rev().fold(0.0, |s2, c| s2 * t + c);
                    *a += wt * psi * p / denom * e;
                    denom *= s * s;
                }
            }
        }
        let mut scale = 1.0 / norm;
        for a in acc.iter_mut() {
            *a *= scale;
            scale /= r;
        }
        acc
    }

    pub fn jet(&self, x: f64) -> Jet {
        let mut d = self.raw_derivatives(x);
        if let Some((g0, g1)) = self.correction {
            d[0] -= g0 * (1.0 - x) + g1 * x;
            d[1] -= g1 - g0;
        }
        Jet::from_derivatives(&d)
    }
}
