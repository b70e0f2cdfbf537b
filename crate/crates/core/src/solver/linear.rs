//! Direct sparse LU solves backed by faer.

use faer::prelude::*;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::Mat;

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Largest accepted `|A x - b| / |b|`.
pub const RELATIVE_RESIDUAL_LIMIT: f64 = 1e-11;
const REFINEMENT_STEPS: usize = 3;

/// Solves `A x = b` with a fresh factorization.
pub fn solve_linear(a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    LinearSolver::new().factor(a)?.solve(b)
}

/// LU solver that keeps the symbolic factorization while the sparsity
/// pattern stays the same.
#[derive(Default)]
pub struct LinearSolver {
    cached: Option<Cached>,
}

struct Cached {
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    /// column structure of the stored CSC copy
    symbolic: SymbolicSparseColMat<usize>,
    lu: SymbolicLu<usize>,
}

impl LinearSolver {
    pub fn new() -> Self {
        faer::set_global_parallelism(faer::Par::Seq);
        LinearSolver { cached: None }
    }

    pub fn factor<'a>(&mut self, a: &'a CsrMatrix) -> Result<Factorization<'a>> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Usage(format!("cannot factor a {}x{} matrix", n, a.ncols())));
        }
        // the CSR arrays of A^T are the CSC arrays of A
        let at = a.transpose();
        let reuse = matches!(&self.cached, Some(c) if c.row_ptr == a.row_ptr() && c.col_idx == a.col_idx());
        if !reuse {
            let symbolic =
                SymbolicSparseColMat::new_checked(n, n, at.row_ptr().to_vec(), None, at.col_idx().to_vec());
            let lu = SymbolicLu::try_new(symbolic.as_ref()).map_err(|_| Error::SingularSystem)?;
            self.cached = Some(Cached { row_ptr: a.row_ptr().to_vec(), col_idx: a.col_idx().to_vec(), symbolic, lu });
        }
        let cached = self.cached.as_ref().expect("symbolic factorization");
        let mat = SparseColMat::new(cached.symbolic.clone(), at.values().to_vec());
        let lu = Lu::try_new_with_symbolic(cached.lu.clone(), mat.as_ref()).map_err(|_| Error::SingularSystem)?;
        Ok(Factorization { a, lu })
    }

    pub fn solve(&mut self, a: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
        self.factor(a)?.solve(b)
    }
}

/// Numeric LU factors of one matrix.
pub struct Factorization<'a> {
    a: &'a CsrMatrix,
    lu: Lu<usize, f64>,
}

impl Factorization<'_> {
    fn apply_inverse(&self, r: &[f64]) -> Result<Vec<f64>> {
        let mut rhs = Mat::<f64>::from_fn(r.len(), 1, |i, _| r[i]);
        self.lu.solve_in_place(rhs.as_mut());
        let x: Vec<f64> = (0..r.len()).map(|i| rhs[(i, 0)]).collect();
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::SingularSystem);
        }
        Ok(x)
    }

    /// `A^{-1} b` with iterative refinement.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.a.nrows();
        if b.len() != n {
            return Err(Error::Usage(format!("right-hand side of length {} for a system of size {n}", b.len())));
        }
        refine(b, |r| self.apply_inverse(r), |x, out| self.a.mul_vec_into(x, out))
    }

    /// Solves the bordered system
    ///
    /// ```text
    /// [ A - e e^T   c ] [x]   [b]
    /// [ r^T         0 ] [l] = [beta]
    /// ```
    ///
    /// where `e` is the unit vector of `pin`. The factored matrix carries the
    /// extra `+1` at `(pin, pin)`, which keeps it regular when `A - e e^T`
    /// has a one-dimensional kernel removed by the border.
    pub fn solve_bordered(&self, pin: usize, c: &[f64], r: &[f64], b: &[f64], beta: f64) -> Result<(Vec<f64>, f64)> {
        self.bordered(pin, c, r)?.solve(b, beta)
    }

    /// Prepares repeated bordered solves with the same `pin`, `c` and `r`.
    pub fn bordered<'b>(&'b self, pin: usize, c: &'b [f64], r: &'b [f64]) -> Result<Bordered<'b>> {
        let n = self.a.nrows();
        if c.len() != n || r.len() != n || pin >= n {
            return Err(Error::Usage("bordered system dimensions do not match".into()));
        }
        let x_c = self.apply_inverse(c)?;
        let mut e = vec![0.0; n];
        e[pin] = 1.0;
        let x_e = self.apply_inverse(&e)?;
        let (rxc, rxe) = (dot(r, &x_c), dot(r, &x_e));
        // unknowns (l, mu) with mu = x[pin]
        let coeffs = [x_c[pin], 1.0 - x_e[pin], -rxc, rxe];
        let [a11, a12, a21, a22] = coeffs;
        let det = a11 * a22 - a12 * a21;
        if !(det.is_finite() && det.abs() > f64::EPSILON * (a11.abs() * a22.abs() + a12.abs() * a21.abs())) {
            return Err(Error::SingularSystem);
        }
        Ok(Bordered { lu: self, pin, c, r, x_c, x_e, coeffs, det })
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// A factorization with the two border solves done up front.
pub struct Bordered<'b> {
    lu: &'b Factorization<'b>,
    pin: usize,
    c: &'b [f64],
    r: &'b [f64],
    x_c: Vec<f64>,
    x_e: Vec<f64>,
    coeffs: [f64; 4],
    det: f64,
}

impl Bordered<'_> {
    /// Returns `(x, l)`.
    pub fn solve(&self, b: &[f64], beta: f64) -> Result<(Vec<f64>, f64)> {
        let n = self.c.len();
        if b.len() != n {
            return Err(Error::Usage("bordered system dimensions do not match".into()));
        }
        let (pin, c, r) = (self.pin, self.c, self.r);
        let [a11, a12, a21, a22] = self.coeffs;
        let inverse = |res: &[f64]| -> Result<Vec<f64>> {
            let x_b = self.lu.apply_inverse(&res[..n])?;
            let (f1, f2) = (x_b[pin], res[n] - dot(r, &x_b));
            let l = (f1 * a22 - a12 * f2) / self.det;
            let mu = (a11 * f2 - a21 * f1) / self.det;
            let mut out: Vec<f64> = (0..n).map(|i| x_b[i] - l * self.x_c[i] + mu * self.x_e[i]).collect();
            out.push(l);
            Ok(out)
        };
        let apply = |y: &[f64], out: &mut [f64]| {
            self.lu.a.mul_vec_into(&y[..n], &mut out[..n]);
            out[pin] -= y[pin];
            for i in 0..n {
                out[i] += c[i] * y[n];
            }
            out[n] = dot(r, &y[..n]);
        };
        let mut rhs = b.to_vec();
        rhs.push(beta);
        let mut x = refine(&rhs, inverse, apply)?;
        let l = x.pop().expect("multiplier");
        Ok((x, l))
    }
}

fn refine(
    b: &[f64],
    inverse: impl Fn(&[f64]) -> Result<Vec<f64>>,
    apply: impl Fn(&[f64], &mut [f64]),
) -> Result<Vec<f64>> {
    let n = b.len();
    let norm_b = norm(b);
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut ax = vec![0.0; n];
    let mut rel = 1.0;
    for _ in 0..=REFINEMENT_STEPS {
        let dx = inverse(&r)?;
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        apply(&x, &mut ax);
        for ((ri, bi), yi) in r.iter_mut().zip(b).zip(&ax) {
            *ri = bi - yi;
        }
        rel = if norm_b > 0.0 { norm(&r) / norm_b } else { norm(&r) };
        if rel <= 1e-15 {
            break;
        }
    }
    if !(rel <= RELATIVE_RESIDUAL_LIMIT) {
        return Err(Error::InaccurateSolve { relative_residual: rel });
    }
    Ok(x)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
