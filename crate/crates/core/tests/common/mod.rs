//! Independent references for the integration tests: a collapsed
//! Gauss-Legendre rule and Lagrange bases built from monomials.

#![allow(dead_code)]

pub mod oracles;
pub mod suites;

use nslps::fem::FESpace;
use nslps::mesh::Point;

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (x + 1.0), 0.5 * w));
    }
    out
}

/// Points and weights integrating polynomials of degree `< 2n - 1` exactly
/// over the triangle `tri`, via the collapsed square.
pub fn triangle_rule(tri: [Point; 3], n: usize) -> Vec<(Point, f64)> {
    let gl = gauss_legendre(n);
    let [a, b, c] = tri;
    let area2 = ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])).abs();
    let mut out = Vec::new();
    for &(s, ws) in &gl {
        for &(t, wt) in &gl {
            let (l1, l2) = (s, (1.0 - s) * t);
            let l0 = 1.0 - l1 - l2;
            let p = [l0 * a[0] + l1 * b[0] + l2 * c[0], l0 * a[1] + l1 * b[1] + l2 * c[1]];
            out.push((p, ws * wt * (1.0 - s) * area2));
        }
    }
    out
}

fn monomials(degree: usize) -> Vec<(i32, i32)> {
    let mut m = Vec::new();
    for total in 0..=degree as i32 {
        for i in (0..=total).rev() {
            m.push((i, total - i));
        }
    }
    m
}

fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in 0..n {
                    a[r][k] -= f * a[c][k];
                }
                for k in 0..b[r].len() {
                    b[r][k] -= f * b[c][k];
                }
            }
        }
    }
    for r in 0..n {
        let d = a[r][r];
        for v in b[r].iter_mut() {
            *v /= d;
        }
    }
    b
}

/// Lagrange basis of degree `degree` on one cell, nodal at `nodes`, in
/// monomial form centred at `centre`.
pub struct LocalBasis {
    monomials: Vec<(i32, i32)>,
    centre: Point,
    /// `coeffs[m][i]`: coefficient of monomial `m` in basis function `i`
    coeffs: Vec<Vec<f64>>,
}

impl LocalBasis {
    pub fn new(degree: usize, nodes: &[Point]) -> Self {
        let monomials = monomials(degree);
        assert_eq!(monomials.len(), nodes.len());
        let n = nodes.len();
        let centre = [nodes.iter().map(|p| p[0]).sum::<f64>() / n as f64, nodes.iter().map(|p| p[1]).sum::<f64>() / n as f64];
        let vander: Vec<Vec<f64>> = nodes
            .iter()
            .map(|p| monomials.iter().map(|&(a, b)| (p[0] - centre[0]).powi(a) * (p[1] - centre[1]).powi(b)).collect())
            .collect();
        let identity: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
        LocalBasis { coeffs: dense_solve(vander, identity), monomials, centre }
    }

    pub fn for_cell(space: &FESpace, cell: usize) -> Self {
        let nodes: Vec<Point> = space.cell_dofs(cell).iter().map(|&d| space.dof_coords()[d]).collect();
        Self::new(space.degree(), &nodes)
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    /// Values and gradients of every basis function at `p`.
    pub fn eval(&self, p: Point) -> (Vec<f64>, Vec<[f64; 2]>) {
        let (x, y) = (p[0] - self.centre[0], p[1] - self.centre[1]);
        let n = self.len();
        let (mut v, mut g) = (vec![0.0; n], vec![[0.0; 2]; n]);
        for (m, &(a, b)) in self.monomials.iter().enumerate() {
            let val = x.powi(a) * y.powi(b);
            let dx = if a > 0 { f64::from(a) * x.powi(a - 1) * y.powi(b) } else { 0.0 };
            let dy = if b > 0 { f64::from(b) * x.powi(a) * y.powi(b - 1) } else { 0.0 };
            for i in 0..n {
                let c = self.coeffs[m][i];
                v[i] += c * val;
                g[i][0] += c * dx;
                g[i][1] += c * dy;
            }
        }
        (v, g)
    }
}

pub fn dense(rows: usize, cols: usize) -> Vec<Vec<f64>> {
    vec![vec![0.0; cols]; rows]
}

pub fn max_entry_difference(a: &nslps::sparse::CsrMatrix, b: &[Vec<f64>]) -> f64 {
    let d = a.to_dense();
    assert_eq!(d.len(), b.len());
    d.iter().zip(b).flat_map(|(r, s)| r.iter().zip(s).map(|(x, y)| (x - y).abs())).fold(0.0, f64::max)
}
