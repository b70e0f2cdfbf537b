use std::sync::Arc;

use super::basis::ReferenceElement;
use super::quadrature::QuadratureRule;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

/// Continuous Lagrange space of degree 1, 2 or 3.
///
/// Dof numbering: vertices first, then edge dofs in edge order (each edge
/// ordered from its lower vertex index), then interior cell dofs. Vector
/// fields use the block layout `[x components; y components]`.
#[derive(Debug, Clone)]
pub struct FESpace {
    mesh: Arc<Mesh>,
    element: ReferenceElement,
    num_dofs: usize,
    dof_coords: Vec<Point>,
    cell_dofs: Vec<usize>,
    boundary_dofs: Vec<usize>,
    is_boundary: Vec<bool>,
}

pub fn build_space(mesh: &Arc<Mesh>, degree: usize) -> Result<FESpace> {
    FESpace::new(mesh, degree)
}

impl FESpace {
    pub fn new(mesh: &Arc<Mesh>, degree: usize) -> Result<Self> {
        if !(1..=3).contains(&degree) {
            return Err(Error::config_key("degree", format!("unsupported polynomial degree {degree}")));
        }
        let element = ReferenceElement::new(degree);
        let nb = element.num_basis();
        let (nv, ne, nc) = (mesh.num_vertices(), mesh.num_edges(), mesh.num_cells());
        let per_edge = degree - 1;
        let per_cell = if degree == 3 { 1 } else { 0 };
        let edge_base = nv;
        let cell_base = nv + per_edge * ne;
        let num_dofs = cell_base + per_cell * nc;

        let mut dof_coords = Vec::with_capacity(num_dofs);
        dof_coords.extend_from_slice(mesh.vertices());
        for &[a, b] in mesh.edges() {
            let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
            for k in 1..degree {
                let t = k as f64 / degree as f64;
                dof_coords.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
            }
        }
        for k in 0..nc {
            if per_cell > 0 {
                let [a, b, c] = mesh.cell_points(k);
                dof_coords.push([(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]);
            }
        }

        let mut cell_dofs = Vec::with_capacity(nc * nb);
        for (k, (cell, edges)) in mesh.cells().iter().zip(mesh.cell_edges()).enumerate() {
            cell_dofs.extend_from_slice(cell);
            for e in 0..3 {
                let start = cell[e];
                let g = edges[e];
                let forward = mesh.edges()[g][0] == start;
                for kk in 1..degree {
                    let offset = if forward { kk - 1 } else { degree - 1 - kk };
                    cell_dofs.push(edge_base + g * per_edge + offset);
                }
            }
            for m in 0..per_cell {
                cell_dofs.push(cell_base + k * per_cell + m);
            }
        }

        let mut is_boundary = vec![false; num_dofs];
        for b in mesh.boundary_edges() {
            let [a, c] = b.vertices;
            is_boundary[a] = true;
            is_boundary[c] = true;
            let g = mesh.edges().binary_search(&[a.min(c), a.max(c)]).expect("boundary edge is a mesh edge");
            for off in 0..per_edge {
                is_boundary[edge_base + g * per_edge + off] = true;
            }
        }
        let boundary_dofs = (0..num_dofs).filter(|&i| is_boundary[i]).collect();

        Ok(FESpace { mesh: Arc::clone(mesh), element, num_dofs, dof_coords, cell_dofs, boundary_dofs, is_boundary })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.element.degree()
    }

    pub fn element(&self) -> &ReferenceElement {
        &self.element
    }

    pub fn num_dofs(&self) -> usize {
        self.num_dofs
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.element.num_basis()
    }

    pub fn dof_coords(&self) -> &[Point] {
        &self.dof_coords
    }

    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let nb = self.dofs_per_cell();
        &self.cell_dofs[cell * nb..(cell + 1) * nb]
    }

    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    pub fn is_boundary_dof(&self, dof: usize) -> bool {
        self.is_boundary[dof]
    }

    pub fn same_mesh(&self, other: &FESpace) -> bool {
        Arc::ptr_eq(&self.mesh, &other.mesh)
    }

    pub fn geometry(&self, cell: usize) -> Result<CellGeometry> {
        CellGeometry::new(&self.mesh, cell)
    }

    /// Values and physical gradients of the local basis of `cell` at the
    /// points of `rule`.
    pub fn eval_basis(&self, cell: usize, rule: &QuadratureRule) -> Result<CellValues> {
        let tab = Tabulation::new(self, rule);
        let mut cv = CellValues::empty();
        tab.fill(self, cell, &mut cv)?;
        Ok(cv)
    }

    /// Nodal interpolation of a scalar function.
    pub fn interpolate(&self, f: impl Fn(Point) -> f64) -> Vec<f64> {
        self.dof_coords.iter().map(|&p| f(p)).collect()
    }

    /// Nodal interpolation of a vector function into the block layout.
    pub fn interpolate_vector(&self, f: impl Fn(Point) -> [f64; 2]) -> Vec<f64> {
        let n = self.num_dofs;
        let mut out = vec![0.0; 2 * n];
        for (i, &p) in self.dof_coords.iter().enumerate() {
            let v = f(p);
            out[i] = v[0];
            out[n + i] = v[1];
        }
        out
    }

    /// Value and gradient of a scalar FE function at a physical point in `cell`.
    pub fn eval_function(&self, coeffs: &[f64], cell: usize, point: Point) -> Result<(f64, [f64; 2])> {
        let geo = self.geometry(cell)?;
        let xi = geo.to_reference(point);
        let nb = self.dofs_per_cell();
        let (mut v, mut g) = (vec![0.0; nb], vec![[0.0; 2]; nb]);
        self.element.eval(xi, &mut v, &mut g);
        let mut val = 0.0;
        let mut grad = [0.0; 2];
        for (i, &dof) in self.cell_dofs(cell).iter().enumerate() {
            let pg = geo.map_gradient(g[i]);
            val += coeffs[dof] * v[i];
            grad[0] += coeffs[dof] * pg[0];
            grad[1] += coeffs[dof] * pg[1];
        }
        Ok((val, grad))
    }

    /// Cells containing a dof, in ascending order.
    pub fn dof_cells(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_dofs];
        for k in 0..self.mesh.num_cells() {
            for &d in self.cell_dofs(k) {
                out[d].push(k);
            }
        }
        out
    }
}

/// Affine map from the reference triangle onto a mesh cell.
#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    origin: Point,
    jac: [[f64; 2]; 2],
    det: f64,
}

impl CellGeometry {
    pub fn new(mesh: &Mesh, cell: usize) -> Result<Self> {
        let [a, b, c] = mesh.cell_points(cell);
        let jac = [[b[0] - a[0], c[0] - a[0]], [b[1] - a[1], c[1] - a[1]]];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det <= 0.0 || !det.is_finite() {
            return Err(Error::DegenerateCell { cell, det });
        }
        Ok(CellGeometry { origin: a, jac, det })
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> Point {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, p: Point) -> [f64; 2] {
        let (dx, dy) = (p[0] - self.origin[0], p[1] - self.origin[1]);
        [
            (self.jac[1][1] * dx - self.jac[0][1] * dy) / self.det,
            (-self.jac[1][0] * dx + self.jac[0][0] * dy) / self.det,
        ]
    }

    /// Applies the inverse transposed Jacobian to a reference gradient.
    pub fn map_gradient(&self, g: [f64; 2]) -> [f64; 2] {
        let [[a, b], [c, d]] = self.jac;
        [(d * g[0] - c * g[1]) / self.det, (-b * g[0] + a * g[1]) / self.det]
    }
}

/// Reference basis values at the points of a quadrature rule.
#[derive(Debug, Clone)]
pub struct Tabulation {
    rule: QuadratureRule,
    num_basis: usize,
    values: Vec<f64>,
    ref_grads: Vec<[f64; 2]>,
}

impl Tabulation {
    pub fn new(space: &FESpace, rule: &QuadratureRule) -> Self {
        Self::for_element(space.element(), rule)
    }

    pub fn for_element(element: &ReferenceElement, rule: &QuadratureRule) -> Self {
        let nb = element.num_basis();
        let nq = rule.len();
        let mut values = vec![0.0; nq * nb];
        let mut ref_grads = vec![[0.0; 2]; nq * nb];
        for q in 0..nq {
            element.eval(rule.points()[q], &mut values[q * nb..(q + 1) * nb], &mut ref_grads[q * nb..(q + 1) * nb]);
        }
        Tabulation { rule: rule.clone(), num_basis: nb, values, ref_grads }
    }

    pub fn rule(&self) -> &QuadratureRule {
        &self.rule
    }

    pub fn num_points(&self) -> usize {
        self.rule.len()
    }

    pub fn num_basis(&self) -> usize {
        self.num_basis
    }

    /// Reference values, indexed `[q * num_basis + i]`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Reference gradients, indexed `[q * num_basis + i]`.
    pub fn ref_grads(&self) -> &[[f64; 2]] {
        &self.ref_grads
    }

    pub fn fill(&self, space: &FESpace, cell: usize, out: &mut CellValues) -> Result<()> {
        let geo = space.geometry(cell)?;
        let (nq, nb) = (self.num_points(), self.num_basis);
        out.num_basis = nb;
        out.values.clear();
        out.values.extend_from_slice(&self.values);
        out.grads.clear();
        out.grads.extend(self.ref_grads.iter().map(|&g| geo.map_gradient(g)));
        out.weights.clear();
        out.weights.extend(self.rule.weights().iter().map(|w| w * geo.det()));
        out.points.clear();
        out.points.extend(self.rule.points().iter().map(|&xi| geo.to_physical(xi)));
        debug_assert_eq!(out.values.len(), nq * nb);
        Ok(())
    }
}

/// Basis data of one cell at quadrature points, indexed `[q * num_basis + i]`.
#[derive(Debug, Clone, Default)]
pub struct CellValues {
    pub num_basis: usize,
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    /// Quadrature weights scaled by the Jacobian determinant.
    pub weights: Vec<f64>,
    pub points: Vec<Point>,
}

impl CellValues {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn num_points(&self) -> usize {
        self.weights.len()
    }

    pub fn value(&self, q: usize, i: usize) -> f64 {
        self.values[q * self.num_basis + i]
    }

    pub fn grad(&self, q: usize, i: usize) -> [f64; 2] {
        self.grads[q * self.num_basis + i]
    }

    /// Value and gradient at point `q` of the FE function with local coefficients.
    pub fn eval(&self, q: usize, local: &[f64]) -> (f64, [f64; 2]) {
        let mut v = 0.0;
        let mut g = [0.0; 2];
        for (i, &c) in local.iter().enumerate() {
            v += c * self.value(q, i);
            let gi = self.grad(q, i);
            g[0] += c * gi[0];
            g[1] += c * gi[1];
        }
        (v, g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::quadrature::quadrature_for;
    use crate::mesh::{build_grid1, build_grid2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid1(level: usize) -> Arc<Mesh> {
        Arc::new(build_grid1(level))
    }

    #[test]
    fn dof_counts_level0() {
        let m = grid1(0);
        assert_eq!(FESpace::new(&m, 1).unwrap().num_dofs(), 4);
        assert_eq!(FESpace::new(&m, 2).unwrap().num_dofs(), 9);
        assert_eq!(FESpace::new(&m, 3).unwrap().num_dofs(), 16);
    }

    #[test]
    fn dof_count_formula() {
        for mesh in [Arc::new(build_grid1(3)), Arc::new(build_grid2(2))] {
            for l in 1..=3 {
                let s = FESpace::new(&mesh, l).unwrap();
                let expected = mesh.num_vertices() + (l - 1) * mesh.num_edges() + (l - 1) * l.saturating_sub(2) / 2 * mesh.num_cells();
                assert_eq!(s.num_dofs(), expected);
            }
        }
    }

    #[test]
    fn unsupported_degree_is_config_error() {
        assert!(FESpace::new(&grid1(0), 4).unwrap_err().is_config());
        assert!(FESpace::new(&grid1(0), 0).unwrap_err().is_config());
    }

    #[test]
    fn boundary_dofs_lie_on_boundary() {
        let mesh = Arc::new(build_grid2(2));
        for l in 1..=3 {
            let s = FESpace::new(&mesh, l).unwrap();
            for &d in s.boundary_dofs() {
                let [x, y] = s.dof_coords()[d];
                let dist = x.min(y).min(1.0 - x).min(1.0 - y);
                assert!(dist.abs() < 1e-12);
            }
            let on_boundary = s
                .dof_coords()
                .iter()
                .filter(|p| p[0].min(p[1]).min(1.0 - p[0]).min(1.0 - p[1]).abs() < 1e-12)
                .count();
            assert_eq!(on_boundary, s.boundary_dofs().len());
        }
    }

    #[test]
    fn partition_of_unity_and_barycentre() {
        let mesh = Arc::new(build_grid2(1));
        for l in 1..=3 {
            let s = FESpace::new(&mesh, l).unwrap();
            let rule = quadrature_for(3 * l).unwrap();
            for k in 0..mesh.num_cells() {
                let cv = s.eval_basis(k, &rule).unwrap();
                for q in 0..cv.num_points() {
                    let sum: f64 = (0..cv.num_basis).map(|i| cv.value(q, i)).sum();
                    assert!((sum - 1.0).abs() < 1e-13);
                    let gs = (0..cv.num_basis).fold([0.0, 0.0], |acc, i| {
                        let g = cv.grad(q, i);
                        [acc[0] + g[0], acc[1] + g[1]]
                    });
                    assert!(gs[0].abs() < 1e-11 && gs[1].abs() < 1e-11);
                }
            }
        }
        let s1 = FESpace::new(&grid1(0), 1).unwrap();
        let cv = s1.eval_basis(0, &quadrature_for(1).unwrap()).unwrap();
        for i in 0..3 {
            assert!((cv.value(0, i) - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn interpolation_reproduces_polynomials_and_is_continuous() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mesh = Arc::new(build_grid2(2));
        for l in 1..=3 {
            let s = FESpace::new(&mesh, l).unwrap();
            let c: Vec<f64> = (0..10).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let poly = |p: Point| {
                let (x, y) = (p[0], p[1]);
                let mut v = c[0] + c[1] * x + c[2] * y;
                if l >= 2 {
                    v += c[3] * x * x + c[4] * x * y + c[5] * y * y;
                }
                if l >= 3 {
                    v += c[6] * x * x * x + c[7] * x * x * y + c[8] * x * y * y + c[9] * y * y * y;
                }
                v
            };
            let coeffs = s.interpolate(poly);
            for _ in 0..200 {
                let k = rng.gen_range(0..mesh.num_cells());
                let (a, b) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
                let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
                let p = s.geometry(k).unwrap().to_physical([a, b]);
                let (v, _) = s.eval_function(&coeffs, k, p).unwrap();
                assert!((v - poly(p)).abs() < 1e-12);
            }
            // Lagrange property at every dof
            let dof_cells = s.dof_cells();
            for (d, cells) in dof_cells.iter().enumerate() {
                for &k in cells {
                    let (v, _) = s.eval_function(&coeffs, k, s.dof_coords()[d]).unwrap();
                    assert!((v - coeffs[d]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn traces_agree_across_interior_edges() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mesh = Arc::new(build_grid2(1));
        for l in 1..=3 {
            let s = FESpace::new(&mesh, l).unwrap();
            let coeffs: Vec<f64> = (0..s.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            for (e, &[a, b]) in mesh.edges().iter().enumerate() {
                let cells = mesh.edge_cells(e);
                if cells.len() != 2 {
                    continue;
                }
                let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
                for t in [0.1, 0.37, 0.5, 0.81] {
                    let p = [pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])];
                    let (v0, _) = s.eval_function(&coeffs, cells[0], p).unwrap();
                    let (v1, _) = s.eval_function(&coeffs, cells[1], p).unwrap();
                    assert!((v0 - v1).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn constant_interpolation() {
        let s = FESpace::new(&grid1(2), 2).unwrap();
        assert!(s.interpolate(|_| 3.5).iter().all(|&v| v == 3.5));
    }
}
