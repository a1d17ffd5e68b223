//! Gauss–Legendre rules, composite rules on a partition, local polynomial
//! differentiation and finite-difference stencil weights.

use std::f64::consts::PI;

#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

/// Gauss–Legendre nodes and weights on [-1, 1], ascending.
pub fn gauss_legendre(n: usize) -> Rule {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    Rule { nodes, weights }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

impl Rule {
    /// Map the reference rule to [a, b].
    pub fn on(&self, a: f64, b: f64) -> Rule {
        let h = 0.5 * (b - a);
        let c = 0.5 * (a + b);
        Rule {
            nodes: self.nodes.iter().map(|t| c + h * t).collect(),
            weights: self.weights.iter().map(|w| h * w).collect(),
        }
    }

    pub fn gauss(n: usize, a: f64, b: f64) -> Rule {
        gauss_legendre(n).on(a, b)
    }

    /// `q`-point Gauss rule on every cell of the partition `breaks`.
    pub fn composite(breaks: &[f64], q: usize) -> Rule {
        let reference = gauss_legendre(q);
        let mut nodes = Vec::with_capacity(q * breaks.len());
        let mut weights = Vec::with_capacity(q * breaks.len());
        for w in breaks.windows(2) {
            let r = reference.on(w[0], w[1]);
            nodes.extend(r.nodes);
            weights.extend(r.weights);
        }
        Rule { nodes, weights }
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Differentiation matrix of the polynomial interpolant through `x`
/// (barycentric form). `D[i][j]` multiplies `f(x_j)` to give `f'(x_i)`.
pub fn differentiation_matrix(x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let w: Vec<f64> = (0..n)
        .map(|j| {
            1.0 / (0..n)
                .filter(|&k| k != j)
                .map(|k| x[j] - x[k])
                .product::<f64>()
        })
        .collect();
    let mut d = vec![vec![0.0; n]; n];
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j {
                d[i][j] = (w[j] / w[i]) / (x[i] - x[j]);
                diag -= d[i][j];
            }
        }
        d[i][i] = diag;
    }
    d
}

/// Fornberg's algorithm: weights `c[k][j]` such that
/// `f^(k)(z) ~ sum_j c[k][j] f(x_j)` for `k = 0..=m`.
pub fn fd_weights(z: f64, x: &[f64], m: usize) -> Vec<Vec<f64>> {
    let n = x.len();
    let mut c = vec![vec![0.0; n]; m + 1];
    let mut c1 = 1.0;
    let mut c4 = x[0] - z;
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = x[i] - z;
        for j in 0..i {
            let c3 = x[i] - x[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}
