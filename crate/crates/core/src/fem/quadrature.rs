use crate::error::{Error, Result};

/// Quadrature on the reference triangle `{xi, eta >= 0, xi + eta <= 1}`.
///
/// Points are stored in reference coordinates; the barycentric form is
/// `(1 - xi - eta, xi, eta)`. Weights sum to the reference area 1/2.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    points: Vec<[f64; 2]>,
    weights: Vec<f64>,
    exactness_degree: usize,
}

pub const MAX_QUADRATURE_DEGREE: usize = 12;

impl QuadratureRule {
    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn exactness_degree(&self) -> usize {
        self.exactness_degree
    }

    pub fn barycentric(&self, q: usize) -> [f64; 3] {
        let [xi, eta] = self.points[q];
        [1.0 - xi - eta, xi, eta]
    }
}

/// Returns a rule integrating every polynomial of total degree
/// `degree_needed` exactly.
///
/// Degrees 0 and 1 use the barycentre. Higher degrees use an `n x n`
/// Gauss-Legendre product rule on the square collapsed onto the triangle
/// (`xi = a`, `eta = b (1 - a)`); the collapse adds one to the degree in `a`,
/// so `n = ceil((degree + 2) / 2)`.
pub fn quadrature_for(degree_needed: usize) -> Result<QuadratureRule> {
    if degree_needed > MAX_QUADRATURE_DEGREE {
        return Err(Error::config_key(
            "quadrature",
            format!("degree {degree_needed} exceeds the supported maximum {MAX_QUADRATURE_DEGREE}"),
        ));
    }
    if degree_needed <= 1 {
        return Ok(QuadratureRule { points: vec![[1.0 / 3.0, 1.0 / 3.0]], weights: vec![0.5], exactness_degree: 1 });
    }
    let n = (degree_needed + 3) / 2;
    let (x, w) = gauss_legendre_unit(n);
    let mut points = Vec::with_capacity(n * n);
    let mut weights = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            let (a, b) = (x[i], x[j]);
            points.push([a, b * (1.0 - a)]);
            weights.push(w[i] * w[j] * (1.0 - a));
        }
    }
    Ok(QuadratureRule { points, weights, exactness_degree: 2 * n - 2 })
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub(crate) fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n {
        // Newton on P_n from the Chebyshev-like initial guess
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
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
        // map [-1, 1] -> [0, 1]
        nodes[n - 1 - i] = 0.5 * (x + 1.0);
        weights[n - 1 - i] = 1.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
