//! Truncated Taylor series ("jets") in one variable.
//!
//! A [`Jet`] stores normalized Taylor coefficients `c_k = f^(k)(x0) / k!`.
//! All the compatibility fields, the velocity recovery `v = X / w`, and the
//! endpoint limits are computed with this arithmetic, so no expression ever
//! divides by a weight that vanishes at the evaluation point.

use std::ops::{Add, Mul, Neg, Sub};

/// Number of stored coefficients (derivative orders `0..JET_LEN`).
pub const JET_LEN: usize = 9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jet(pub [f64; JET_LEN]);

const FACT: [f64; JET_LEN] = {
    let mut f = [1.0; JET_LEN];
    let mut k = 1;
    while k < JET_LEN {
        f[k] = f[k - 1] * k as f64;
        k += 1;
    }
    f
};

impl Jet {
    pub const ZERO: Jet = Jet([0.0; JET_LEN]);

    pub fn constant(c: f64) -> Self {
        let mut j = Self::ZERO;
        j.0[0] = c;
        j
    }

    /// Jet of the identity map `x` at `x0`.
    pub fn variable(x0: f64) -> Self {
        let mut j = Self::constant(x0);
        j.0[1] = 1.0;
        j
    }

    /// Build from plain derivatives `f, f', f'', ...`; missing orders are zero.
    pub fn from_derivatives(d: &[f64]) -> Self {
        let mut j = Self::ZERO;
        for (k, v) in d.iter().take(JET_LEN).enumerate() {
            j.0[k] = v / FACT[k];
        }
        j
    }

    pub fn value(&self) -> f64 {
        self.0[0]
    }

    /// k-th derivative at the expansion point.
    pub fn d(&self, k: usize) -> f64 {
        self.0[k] * FACT[k]
    }

    pub fn derivatives(&self) -> [f64; JET_LEN] {
        let mut out = [0.0; JET_LEN];
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.d(k);
        }
        out
    }

    /// Derivative jet. The top coefficient is lost and set to zero.
    pub fn deriv(&self) -> Self {
        let mut j = Self::ZERO;
        for k in 0..JET_LEN - 1 {
            j.0[k] = (k + 1) as f64 * self.0[k + 1];
        }
        j
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut j = *self;
        j.0.iter_mut().for_each(|c| *c *= s);
        j
    }

    /// Series division; requires a nonzero leading coefficient in `rhs`.
    pub fn div(&self, rhs: &Jet) -> Self {
        let b0 = rhs.0[0];
        let mut q = Self::ZERO;
        for k in 0..JET_LEN {
            let mut acc = self.0[k];
            for j in 1..=k {
                acc -= rhs.0[j] * q.0[k - j];
            }
            q.0[k] = acc / b0;
        }
        q
    }

    /// Quotient of two jets that both vanish at the expansion point.
    ///
    /// The common simple zero is cancelled before dividing, so the result is
    /// the one-sided limit of `self / rhs` (one order of accuracy is lost).
    pub fn div_vanishing(&self, rhs: &Jet) -> Self {
        let shift = |j: &Jet| {
            let mut s = Jet::ZERO;
            s.0[..JET_LEN - 1].copy_from_slice(&j.0[1..]);
            s
        };
        shift(self).div(&shift(rhs))
    }

    /// `self^p` for a positive leading coefficient.
    pub fn powf(&self, p: f64) -> Self {
        let b0 = self.0[0];
        let mut g = Self::ZERO;
        g.0[0] = b0.powf(p);
        for k in 1..JET_LEN {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += ((p + 1.0) * j as f64 - k as f64) * self.0[j] * g.0[k - j];
            }
            g.0[k] = acc / (k as f64 * b0);
        }
        g
    }

    pub fn exp(&self) -> Self {
        let mut g = Self::ZERO;
        g.0[0] = self.0[0].exp();
        for k in 1..JET_LEN {
            let mut acc = 0.0;
            for j in 1..=k {
                acc += j as f64 * self.0[j] * g.0[k - j];
            }
            g.0[k] = acc / k as f64;
        }
        g
    }
}

impl Add for Jet {
    type Output = Jet;
    fn add(mut self, rhs: Jet) -> Jet {
        for k in 0..JET_LEN {
            self.0[k] += rhs.0[k];
        }
        self
    }
}

impl Sub for Jet {
    type Output = Jet;
    fn sub(mut self, rhs: Jet) -> Jet {
        for k in 0..JET_LEN {
            self.0[k] -= rhs.0[k];
        }
        self
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Mul for Jet {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        let mut out = Jet::ZERO;
        for k in 0..JET_LEN {
            let mut acc = 0.0;
            for j in 0..=k {
                acc += self.0[j] * rhs.0[k - j];
            }
            out.0[k] = acc;
        }
        out
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn product_and_derivative() {
        // f = x^2 at x0 = 3
        let x = Jet::variable(3.0);
        let f = x * x;
        assert_eq!(f.d(0), 9.0);
        assert_eq!(f.d(1), 6.0);
        assert_eq!(f.d(2), 2.0);
        assert_eq!(f.d(3), 0.0);
        assert_eq!(f.deriv().d(0), 6.0);
    }

    #[test]
    fn power_matches_closed_form() {
        // (1 + x)^1.5 at x0 = 0.2
        let b = Jet::variable(0.2) + Jet::constant(1.0);
        let g = b.powf(1.5);
        let y: f64 = 1.2;
        assert!(close(g.d(0), y.powf(1.5), 1e-14));
        assert!(close(g.d(1), 1.5 * y.powf(0.5), 1e-14));
        assert!(close(g.d(2), 0.75 * y.powf(-0.5), 1e-14));
        assert!(close(g.d(3), -0.375 * y.powf(-1.5), 1e-13));
    }

    #[test]
    fn vanishing_quotient_is_the_limit() {
        // sin(x) / (x - x^2) at 0 -> limit 1, derivative limit 1
        let x = Jet::variable(0.0);
        let s = Jet::from_derivatives(&[0.0, 1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0, 0.0]);
        let w = x - x * x;
        let q = s.div_vanishing(&w);
        assert!(close(q.d(0), 1.0, 1e-15));
        assert!(close(q.d(1), 1.0, 1e-15));
        // sin x/(x(1-x)) = (1 - x^2/6)(1 + x + x^2) + O(x^3) -> c2 = 1 - 1/6
        assert!(close(q.0[2], 5.0 / 6.0, 1e-15));
    }

    #[test]
    fn exp_of_variable() {
        let e = Jet::variable(0.5).exp();
        for k in 0..JET_LEN {
            assert!(close(e.d(k), 0.5f64.exp(), 1e-14));
        }
    }
}
