//! Local projection: a Scott-Zhang type quasi-interpolant into the continuous
//! space of degree `j` and the fluctuation `Id - sigma` it induces.
//!
//! Every dof of the target space is owned by the lowest-indexed cell that
//! contains it. The value at the dof is the L2 projection of the input onto
//! `P_j` over that single owner cell, evaluated at the dof. This reproduces
//! every continuous piecewise `P_j` function, is locally L2 stable, and for
//! piecewise `P_j` input (gradients of degree `j + 1` fields) reduces to
//! sampling the owner cell's polynomial at the dof.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{quadrature_for, CellValues, FESpace, QuadratureRule, Tabulation, MAX_QUADRATURE_DEGREE};
use crate::mesh::Point;
use crate::sparse::{CsrMatrix, TripletBuilder};

#[derive(Debug, Clone)]
pub struct QuasiInterpolant {
    space: Arc<FESpace>,
    owner_cell: Vec<usize>,
    /// local index of each dof within its owner cell
    owner_slot: Vec<usize>,
}

pub fn build_quasi_interpolant(space_j: Arc<FESpace>) -> QuasiInterpolant {
    QuasiInterpolant::new(space_j)
}

impl QuasiInterpolant {
    pub fn new(space: Arc<FESpace>) -> Self {
        let n = space.num_dofs();
        let mut owner_cell = vec![usize::MAX; n];
        let mut owner_slot = vec![0; n];
        for k in 0..space.mesh().num_cells() {
            for (slot, &d) in space.cell_dofs(k).iter().enumerate() {
                if owner_cell[d] == usize::MAX {
                    owner_cell[d] = k;
                    owner_slot[d] = slot;
                }
            }
        }
        QuasiInterpolant { space, owner_cell, owner_slot }
    }

    pub fn space(&self) -> &Arc<FESpace> {
        &self.space
    }

    pub fn degree(&self) -> usize {
        self.space.degree()
    }

    pub fn owner_cell(&self) -> &[usize] {
        &self.owner_cell
    }

    /// Applies the quasi-interpolant to a (possibly discontinuous) function
    /// given cell by cell as `f(cell, point)`.
    pub fn apply(&self, f: impl Fn(usize, Point) -> f64) -> Result<Vec<f64>> {
        let degree = (2 * self.degree() + 6).min(MAX_QUADRATURE_DEGREE);
        let rule = quadrature_for(degree)?;
        self.apply_with_rule(&rule, f)
    }

    pub fn apply_with_rule(&self, rule: &QuadratureRule, f: impl Fn(usize, Point) -> f64) -> Result<Vec<f64>> {
        let space = &*self.space;
        let nb = space.dofs_per_cell();
        let tab = Tabulation::new(space, rule);
        let mut cv = CellValues::empty();
        let mut out = vec![0.0; space.num_dofs()];
        let mut owned: Vec<Vec<usize>> = vec![Vec::new(); space.mesh().num_cells()];
        for (d, &k) in self.owner_cell.iter().enumerate() {
            owned[k].push(d);
        }
        let mut mass = vec![0.0; nb * nb];
        let mut rhs = vec![0.0; nb];
        for (k, dofs) in owned.iter().enumerate() {
            if dofs.is_empty() {
                continue;
            }
            tab.fill(space, k, &mut cv)?;
            mass.iter_mut().for_each(|m| *m = 0.0);
            rhs.iter_mut().for_each(|r| *r = 0.0);
            for q in 0..cv.num_points() {
                let w = cv.weights[q];
                let fq = f(k, cv.points[q]);
                for i in 0..nb {
                    let phi_i = cv.value(q, i);
                    rhs[i] += w * fq * phi_i;
                    for j in 0..nb {
                        mass[i * nb + j] += w * phi_i * cv.value(q, j);
                    }
                }
            }
            let local = solve_small(&mut mass, &mut rhs, nb);
            for &d in dofs {
                out[d] = local[self.owner_slot[d]];
            }
        }
        Ok(out)
    }
}

/// Gaussian elimination with partial pivoting on a small dense system.
fn solve_small(a: &mut [f64], b: &mut [f64], n: usize) -> Vec<f64> {
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i * n + col].abs().total_cmp(&a[j * n + col].abs())).unwrap();
        if piv != col {
            for c in 0..n {
                a.swap(col * n + c, piv * n + c);
            }
            b.swap(col, piv);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / d;
            if factor != 0.0 {
                for c in col..n {
                    a[r * n + c] -= factor * a[col * n + c];
                }
                b[r] -= factor * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r * n + c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r * n + r];
    }
    x
}

/// Quadrature samples of a piecewise quantity, indexed
/// `[(cell * num_points + q) * num_components + c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSamples {
    pub num_points: usize,
    pub num_components: usize,
    pub data: Vec<f64>,
}

impl CellSamples {
    pub fn get(&self, cell: usize, q: usize, c: usize) -> f64 {
        self.data[(cell * self.num_points + q) * self.num_components + c]
    }
}

/// Linear map from the coefficients of a scalar degree-`l` field to the
/// fluctuation of its gradient at the quadrature points of one cell.
#[derive(Debug, Clone, Default)]
pub struct CellFluctuationMap {
    /// global dofs of the degree-`l` space the fluctuation depends on
    pub stencil: Vec<usize>,
    /// `[(q * 2 + k) * stencil.len() + s]`: weight of `stencil[s]` in the
    /// fluctuation of `d/dx_k` at point `q`
    pub coeffs: Vec<f64>,
}

impl CellFluctuationMap {
    pub fn row(&self, q: usize, k: usize) -> &[f64] {
        let ns = self.stencil.len();
        &self.coeffs[(q * 2 + k) * ns..(q * 2 + k + 1) * ns]
    }
}

/// Fluctuation `Id - sigma^{l-1}` applied to gradients and divergences of
/// fields in the degree-`l` space.
#[derive(Debug, Clone)]
pub struct FluctuationOperator {
    interpolant: QuasiInterpolant,
    field_space: Arc<FESpace>,
    /// `sampling[k]`: coefficients of `sigma(d/dx_k field)` from field coefficients
    sampling: [CsrMatrix; 2],
    tab_field: Tabulation,
    tab_target: Tabulation,
}

impl FluctuationOperator {
    /// Builds the operator for fields in `field_space` (degree `l >= 2`),
    /// projecting onto the continuous space of degree `l - 1`. Fluctuations
    /// are sampled at the points of `rule`.
    pub fn new(field_space: &Arc<FESpace>, rule: &QuadratureRule) -> Result<Self> {
        let l = field_space.degree();
        if l < 2 {
            return Err(Error::config_key(
                "degree",
                "local projection stabilization needs degree >= 2 (projection space of degree l - 1 >= 1)",
            ));
        }
        let target = Arc::new(FESpace::new(field_space.mesh(), l - 1)?);
        Self::from_interpolant(QuasiInterpolant::new(target), field_space, rule)
    }

    pub fn from_interpolant(
        interpolant: QuasiInterpolant,
        field_space: &Arc<FESpace>,
        rule: &QuadratureRule,
    ) -> Result<Self> {
        let target = interpolant.space();
        if !target.same_mesh(field_space) {
            return Err(Error::Usage("projection space and field space live on different meshes".into()));
        }
        if target.degree() + 1 != field_space.degree() {
            return Err(Error::Usage(format!(
                "projection degree {} does not match field degree {}",
                target.degree(),
                field_space.degree()
            )));
        }
        let nb = field_space.dofs_per_cell();
        let (mut vals, mut grads) = (vec![0.0; nb], vec![[0.0; 2]; nb]);
        let mut builders =
            [TripletBuilder::new(target.num_dofs(), field_space.num_dofs()), TripletBuilder::new(target.num_dofs(), field_space.num_dofs())];
        for (a, &k) in interpolant.owner_cell().iter().enumerate() {
            let geo = field_space.geometry(k)?;
            field_space.element().eval(geo.to_reference(target.dof_coords()[a]), &mut vals, &mut grads);
            for (i, &dof) in field_space.cell_dofs(k).iter().enumerate() {
                let g = geo.map_gradient(grads[i]);
                builders[0].push(a, dof, g[0]);
                builders[1].push(a, dof, g[1]);
            }
        }
        let [bx, by] = builders;
        let sampling = [bx.build(), by.build()];
        let tab_field = Tabulation::new(field_space, rule);
        let tab_target = Tabulation::new(target, rule);
        Ok(FluctuationOperator { interpolant, field_space: Arc::clone(field_space), sampling, tab_field, tab_target })
    }

    pub fn interpolant(&self) -> &QuasiInterpolant {
        &self.interpolant
    }

    pub fn target_degree(&self) -> usize {
        self.interpolant.degree()
    }

    pub fn field_space(&self) -> &Arc<FESpace> {
        &self.field_space
    }

    pub fn rule(&self) -> &QuadratureRule {
        self.tab_field.rule()
    }

    pub fn sampling_map(&self, k: usize) -> &CsrMatrix {
        &self.sampling[k]
    }

    fn check_space(&self, space: &FESpace) -> Result<()> {
        if !space.same_mesh(&self.field_space) || space.degree() != self.field_space.degree() {
            return Err(Error::Usage("field space does not match the fluctuation operator".into()));
        }
        Ok(())
    }

    /// Fluctuation of the gradient of a scalar field (2 components per
    /// point) or of a block-layout vector field (4 components, `c * 2 + k`
    /// for `d u_c / d x_k`).
    pub fn fluct_gradient(&self, space: &FESpace, coeffs: &[f64]) -> Result<CellSamples> {
        self.check_space(space)?;
        let n = space.num_dofs();
        let ncomp_field = match coeffs.len() {
            len if len == n => 1,
            len if len == 2 * n => 2,
            len => return Err(Error::Usage(format!("coefficient vector of length {len} for a space with {n} dofs"))),
        };
        let nq = self.tab_field.num_points();
        let nc = 2 * ncomp_field;
        let ncells = space.mesh().num_cells();
        let mut data = vec![0.0; ncells * nq * nc];
        let mut map = CellFluctuationMap::default();
        for k in 0..ncells {
            self.cell_map(k, &mut map)?;
            for c in 0..ncomp_field {
                let field = &coeffs[c * n..(c + 1) * n];
                for q in 0..nq {
                    for dir in 0..2 {
                        let v: f64 = map.row(q, dir).iter().zip(&map.stencil).map(|(w, &s)| w * field[s]).sum();
                        data[(k * nq + q) * nc + c * 2 + dir] = v;
                    }
                }
            }
        }
        Ok(CellSamples { num_points: nq, num_components: nc, data })
    }

    /// Fluctuation of the divergence of a block-layout vector field.
    pub fn fluct_divergence(&self, space: &FESpace, coeffs: &[f64]) -> Result<CellSamples> {
        let n = space.num_dofs();
        if coeffs.len() != 2 * n {
            return Err(Error::Usage(format!("vector field needs {} coefficients, got {}", 2 * n, coeffs.len())));
        }
        let grad = self.fluct_gradient(space, coeffs)?;
        let nq = grad.num_points;
        let ncells = space.mesh().num_cells();
        let data = (0..ncells * nq).map(|p| grad.data[p * 4] + grad.data[p * 4 + 3]).collect();
        Ok(CellSamples { num_points: nq, num_components: 1, data })
    }

    /// Fills `map` with the fluctuation of the gradient on `cell` as a
    /// linear function of the field coefficients.
    pub fn cell_map(&self, cell: usize, map: &mut CellFluctuationMap) -> Result<()> {
        let space = &*self.field_space;
        let target = &**self.interpolant.space();
        let geo = space.geometry(cell)?;
        let (nq, nbf, nbt) = (self.tab_field.num_points(), self.tab_field.num_basis(), self.tab_target.num_basis());

        map.stencil.clear();
        map.stencil.extend_from_slice(space.cell_dofs(cell));
        for &a in target.cell_dofs(cell) {
            for k in 0..2 {
                for (j, _) in self.sampling[k].row(a) {
                    map.stencil.push(j);
                }
            }
        }
        map.stencil.sort_unstable();
        map.stencil.dedup();
        let ns = map.stencil.len();
        map.coeffs.clear();
        map.coeffs.resize(nq * 2 * ns, 0.0);
        let slot = |dof: usize, stencil: &[usize]| stencil.binary_search(&dof).expect("dof in stencil");

        let ref_grads = self.tab_field_ref_grads();
        for q in 0..nq {
            for i in 0..nbf {
                let g = geo.map_gradient(ref_grads[q * nbf + i]);
                let s = slot(space.cell_dofs(cell)[i], &map.stencil);
                map.coeffs[(q * 2) * ns + s] += g[0];
                map.coeffs[(q * 2 + 1) * ns + s] += g[1];
            }
            for (t, &a) in target.cell_dofs(cell).iter().enumerate() {
                let psi = self.tab_target_value(q, t, nbt);
                for k in 0..2 {
                    for (j, v) in self.sampling[k].row(a) {
                        let s = slot(j, &map.stencil);
                        map.coeffs[(q * 2 + k) * ns + s] -= psi * v;
                    }
                }
            }
        }
        Ok(())
    }

    fn tab_field_ref_grads(&self) -> &[[f64; 2]] {
        self.tab_field.ref_grads()
    }

    fn tab_target_value(&self, q: usize, t: usize, nbt: usize) -> f64 {
        self.tab_target.values()[q * nbt + t]
    }
}
