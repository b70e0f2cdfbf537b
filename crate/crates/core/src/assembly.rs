//! Sparse assembly of the bilinear and trilinear forms.
//!
//! Scalar forms act on one velocity component (or on the pressure); vector
//! forms use the block layout `[x dofs; y dofs]`. Every form is integrated
//! with the single rule returned by [`default_rule`], exact for polynomials
//! of degree `3 l`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{quadrature_for, CellValues, FESpace, QuadratureRule, Tabulation};
use crate::lps::{CellFluctuationMap, FluctuationOperator};
use crate::mesh::Point;
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::stabilization::VelocityLpsKind;

pub fn default_rule(space: &FESpace) -> QuadratureRule {
    quadrature_for(3 * space.degree()).expect("3 l <= 9 is always available")
}

/// Sparsity pattern of the scalar space with, for every cell, the positions
/// of its local `nb x nb` block in the value array.
#[derive(Debug, Clone)]
pub struct ScalarPattern {
    matrix: CsrMatrix,
    cell_positions: Vec<usize>,
    nb: usize,
}

impl ScalarPattern {
    pub fn new(space: &FESpace) -> Self {
        let n = space.num_dofs();
        let nb = space.dofs_per_cell();
        let ncells = space.mesh().num_cells();
        let mut b = TripletBuilder::with_capacity(n, n, ncells * nb * nb);
        for k in 0..ncells {
            let dofs = space.cell_dofs(k);
            for &i in dofs {
                for &j in dofs {
                    b.push(i, j, 0.0);
                }
            }
        }
        let matrix = b.build();
        let mut cell_positions = Vec::with_capacity(ncells * nb * nb);
        for k in 0..ncells {
            let dofs = space.cell_dofs(k);
            for &i in dofs {
                for &j in dofs {
                    cell_positions.push(matrix.position(i, j).expect("pattern entry"));
                }
            }
        }
        ScalarPattern { matrix, cell_positions, nb }
    }

    /// Sums local matrices `local(cell, out)` (row-major `nb x nb`) into a
    /// matrix with this pattern.
    pub fn assemble(&self, mut local: impl FnMut(usize, &mut [f64]) -> Result<()>) -> Result<CsrMatrix> {
        let mut m = self.matrix.clone();
        let nb2 = self.nb * self.nb;
        let mut buf = vec![0.0; nb2];
        let ncells = self.cell_positions.len() / nb2;
        let values = m.values_mut();
        for k in 0..ncells {
            buf.iter_mut().for_each(|v| *v = 0.0);
            local(k, &mut buf)?;
            for (t, &pos) in self.cell_positions[k * nb2..(k + 1) * nb2].iter().enumerate() {
                values[pos] += buf[t];
            }
        }
        Ok(m)
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }
}

fn local_dofs<'a>(coeffs: &[f64], dofs: &[usize], out: &'a mut Vec<f64>) -> &'a [f64] {
    out.clear();
    out.extend(dofs.iter().map(|&d| coeffs[d]));
    out
}

/// `(phi_j, phi_i)`
pub fn assemble_mass(space: &FESpace) -> Result<CsrMatrix> {
    let tab = Tabulation::new(space, &default_rule(space));
    let nb = space.dofs_per_cell();
    let mut cv = CellValues::empty();
    ScalarPattern::new(space).assemble(|k, a| {
        tab.fill(space, k, &mut cv)?;
        for q in 0..cv.num_points() {
            let w = cv.weights[q];
            for i in 0..nb {
                let wi = w * cv.value(q, i);
                for j in 0..nb {
                    a[i * nb + j] += wi * cv.value(q, j);
                }
            }
        }
        Ok(())
    })
}

/// `nu (grad phi_j, grad phi_i)`
pub fn assemble_stiffness(space: &FESpace, nu: f64) -> Result<CsrMatrix> {
    let tab = Tabulation::new(space, &default_rule(space));
    let nb = space.dofs_per_cell();
    let mut cv = CellValues::empty();
    ScalarPattern::new(space).assemble(|k, a| {
        tab.fill(space, k, &mut cv)?;
        for q in 0..cv.num_points() {
            let w = nu * cv.weights[q];
            for i in 0..nb {
                let gi = cv.grad(q, i);
                for j in 0..nb {
                    let gj = cv.grad(q, j);
                    a[i * nb + j] += w * (gi[0] * gj[0] + gi[1] * gj[1]);
                }
            }
        }
        Ok(())
    })
}

/// Repeated assembly of the convection operator for changing velocities.
///
/// The matrix acts on each velocity component and represents the skew form
/// `1/2 ((w . grad) u, v) - 1/2 ((w . grad) v, u)`. For test functions
/// vanishing on the boundary it coincides with
/// `((w . grad) u + 1/2 (div w) u, v)` because the integrand difference is
/// the divergence of `w u v / 2`.
#[derive(Debug, Clone)]
pub struct ConvectionAssembler {
    space: Arc<FESpace>,
    tab: Tabulation,
    pattern: ScalarPattern,
}

impl ConvectionAssembler {
    pub fn new(space: &Arc<FESpace>) -> Self {
        ConvectionAssembler {
            space: Arc::clone(space),
            tab: Tabulation::new(space, &default_rule(space)),
            pattern: ScalarPattern::new(space),
        }
    }

    /// Pattern of the matrices returned by [`Self::assemble`].
    pub fn pattern_matrix(&self) -> &CsrMatrix {
        self.pattern.matrix()
    }

    pub fn assemble(&self, w: &[f64]) -> Result<CsrMatrix> {
        let space = &*self.space;
        let n = space.num_dofs();
        if w.len() != 2 * n {
            return Err(Error::Usage(format!("convecting velocity needs {} coefficients, got {}", 2 * n, w.len())));
        }
        let nb = space.dofs_per_cell();
        let mut cv = CellValues::empty();
        let (mut wx, mut wy) = (Vec::new(), Vec::new());
        let mut adv = vec![0.0; nb];
        self.pattern.assemble(|k, a| {
            self.tab.fill(space, k, &mut cv)?;
            let dofs = space.cell_dofs(k);
            let lx = local_dofs(&w[..n], dofs, &mut wx);
            let ly = local_dofs(&w[n..], dofs, &mut wy);
            for q in 0..cv.num_points() {
                let (vx, _) = cv.eval(q, lx);
                let (vy, _) = cv.eval(q, ly);
                let half_w = 0.5 * cv.weights[q];
                for (i, adv_i) in adv.iter_mut().enumerate() {
                    let g = cv.grad(q, i);
                    *adv_i = vx * g[0] + vy * g[1];
                }
                for i in 0..nb {
                    let phi_i = cv.value(q, i);
                    for j in 0..nb {
                        a[i * nb + j] += half_w * (adv[j] * phi_i - adv[i] * cv.value(q, j));
                    }
                }
            }
            Ok(())
        })
    }
}

pub fn assemble_convection(space: &Arc<FESpace>, w: &[f64]) -> Result<CsrMatrix> {
    ConvectionAssembler::new(space).assemble(w)
}

/// `sum_K mu_K (div u, div v)_K` on the block-layout vector space.
pub fn assemble_graddiv(space: &FESpace, mu: &[f64]) -> Result<CsrMatrix> {
    check_cell_params(space, mu, "mu")?;
    let n = space.num_dofs();
    let nb = space.dofs_per_cell();
    let tab = Tabulation::new(space, &default_rule(space));
    let mut cv = CellValues::empty();
    let ncells = space.mesh().num_cells();
    let mut b = TripletBuilder::with_capacity(2 * n, 2 * n, ncells * 4 * nb * nb);
    let mut local = vec![0.0; 4 * nb * nb];
    for k in 0..ncells {
        if mu[k] == 0.0 {
            continue;
        }
        tab.fill(space, k, &mut cv)?;
        local.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..cv.num_points() {
            let w = mu[k] * cv.weights[q];
            for c in 0..2 {
                for i in 0..nb {
                    let gi = cv.grad(q, i)[c];
                    for d in 0..2 {
                        for j in 0..nb {
                            local[((c * nb + i) * 2 + d) * nb + j] += w * gi * cv.grad(q, j)[d];
                        }
                    }
                }
            }
        }
        let dofs = space.cell_dofs(k);
        for c in 0..2 {
            for (i, &di) in dofs.iter().enumerate() {
                for d in 0..2 {
                    for (j, &dj) in dofs.iter().enumerate() {
                        b.push(c * n + di, d * n + dj, local[((c * nb + i) * 2 + d) * nb + j]);
                    }
                }
            }
        }
    }
    Ok(b.build())
}

/// `sum_K tau_K (fluct(grad p), fluct(grad q))_K` on the scalar space.
pub fn assemble_pressure_lps(space: &FESpace, fluct: &FluctuationOperator, tau_p: &[f64]) -> Result<CsrMatrix> {
    check_cell_params(space, tau_p, "tau_p")?;
    check_fluct(space, fluct)?;
    let n = space.num_dofs();
    let mut b = TripletBuilder::new(n, n);
    let mut map = CellFluctuationMap::default();
    let weights = fluct.rule().weights();
    for k in 0..space.mesh().num_cells() {
        if tau_p[k] == 0.0 {
            continue;
        }
        fluct.cell_map(k, &mut map)?;
        let det = space.geometry(k)?.det();
        let ns = map.stencil.len();
        let mut local = vec![0.0; ns * ns];
        for (q, &wq) in weights.iter().enumerate() {
            let w = tau_p[k] * wq * det;
            for dir in 0..2 {
                let row = map.row(q, dir);
                for s in 0..ns {
                    let ws = w * row[s];
                    for t in 0..ns {
                        local[s * ns + t] += ws * row[t];
                    }
                }
            }
        }
        for s in 0..ns {
            for t in 0..ns {
                b.push(map.stencil[s], map.stencil[t], local[s * ns + t]);
            }
        }
    }
    Ok(b.build())
}

/// Velocity LPS on the block-layout vector space: fluctuations of the full
/// gradient (`Gradient`) or of the divergence (`Divergence`).
pub fn assemble_velocity_lps(
    space: &FESpace,
    fluct: &FluctuationOperator,
    kind: VelocityLpsKind,
    tau: &[f64],
) -> Result<CsrMatrix> {
    match kind {
        VelocityLpsKind::Gradient => Ok(assemble_pressure_lps(space, fluct, tau)?.block_diag2()),
        VelocityLpsKind::Divergence => assemble_divergence_lps(space, fluct, tau),
    }
}

fn assemble_divergence_lps(space: &FESpace, fluct: &FluctuationOperator, tau: &[f64]) -> Result<CsrMatrix> {
    check_cell_params(space, tau, "tau")?;
    check_fluct(space, fluct)?;
    let n = space.num_dofs();
    let mut b = TripletBuilder::new(2 * n, 2 * n);
    let mut map = CellFluctuationMap::default();
    let weights = fluct.rule().weights();
    for k in 0..space.mesh().num_cells() {
        if tau[k] == 0.0 {
            continue;
        }
        fluct.cell_map(k, &mut map)?;
        let det = space.geometry(k)?.det();
        let ns = map.stencil.len();
        // vector stencil: x-component dofs then y-component dofs
        let mut local = vec![0.0; 4 * ns * ns];
        let mut row = vec![0.0; 2 * ns];
        for (q, &wq) in weights.iter().enumerate() {
            let w = tau[k] * wq * det;
            row[..ns].copy_from_slice(map.row(q, 0));
            row[ns..].copy_from_slice(map.row(q, 1));
            for s in 0..2 * ns {
                let ws = w * row[s];
                for t in 0..2 * ns {
                    local[s * 2 * ns + t] += ws * row[t];
                }
            }
        }
        let global = |s: usize| if s < ns { map.stencil[s] } else { n + map.stencil[s - ns] };
        for s in 0..2 * ns {
            for t in 0..2 * ns {
                b.push(global(s), global(t), local[s * 2 * ns + t]);
            }
        }
    }
    Ok(b.build())
}

/// `D` with `(D v)_i = (div v, psi_i)`; `-D^T` is the pressure gradient term.
pub fn assemble_div_coupling(velocity: &FESpace, pressure: &FESpace) -> Result<CsrMatrix> {
    if !velocity.same_mesh(pressure) {
        return Err(Error::Usage("velocity and pressure spaces live on different meshes".into()));
    }
    let n = velocity.num_dofs();
    let np = pressure.num_dofs();
    let degree = 2 * velocity.degree().max(pressure.degree());
    let rule = quadrature_for(degree.max(3 * velocity.degree()))?;
    let tab_u = Tabulation::new(velocity, &rule);
    let tab_p = Tabulation::new(pressure, &rule);
    let (mut cu, mut cp) = (CellValues::empty(), CellValues::empty());
    let (nbu, nbp) = (velocity.dofs_per_cell(), pressure.dofs_per_cell());
    let ncells = velocity.mesh().num_cells();
    let mut b = TripletBuilder::with_capacity(np, 2 * n, ncells * 2 * nbu * nbp);
    let mut local = vec![0.0; nbp * 2 * nbu];
    for k in 0..ncells {
        tab_u.fill(velocity, k, &mut cu)?;
        tab_p.fill(pressure, k, &mut cp)?;
        local.iter_mut().for_each(|v| *v = 0.0);
        for q in 0..cu.num_points() {
            let w = cu.weights[q];
            for i in 0..nbp {
                let psi = w * cp.value(q, i);
                for c in 0..2 {
                    for j in 0..nbu {
                        local[(i * 2 + c) * nbu + j] += psi * cu.grad(q, j)[c];
                    }
                }
            }
        }
        for (i, &pi) in pressure.cell_dofs(k).iter().enumerate() {
            for c in 0..2 {
                for (j, &uj) in velocity.cell_dofs(k).iter().enumerate() {
                    b.push(pi, c * n + uj, local[(i * 2 + c) * nbu + j]);
                }
            }
        }
    }
    Ok(b.build())
}

/// `(f(t), phi_i)` for both components, block layout.
pub fn assemble_load(space: &FESpace, f: impl Fn(f64, Point) -> [f64; 2], t: f64) -> Result<Vec<f64>> {
    let n = space.num_dofs();
    let tab = Tabulation::new(space, &default_rule(space));
    let mut cv = CellValues::empty();
    let mut out = vec![0.0; 2 * n];
    for k in 0..space.mesh().num_cells() {
        tab.fill(space, k, &mut cv)?;
        let dofs = space.cell_dofs(k);
        for q in 0..cv.num_points() {
            let fq = f(t, cv.points[q]);
            let w = cv.weights[q];
            for (i, &d) in dofs.iter().enumerate() {
                let phi = w * cv.value(q, i);
                out[d] += fq[0] * phi;
                out[n + d] += fq[1] * phi;
            }
        }
    }
    Ok(out)
}

/// `m_i = (1, phi_i)`, so that `m . p` is the integral of `p_h`.
pub fn mean_functional(space: &FESpace) -> Result<Vec<f64>> {
    let tab = Tabulation::new(space, &default_rule(space));
    let mut cv = CellValues::empty();
    let mut out = vec![0.0; space.num_dofs()];
    for k in 0..space.mesh().num_cells() {
        tab.fill(space, k, &mut cv)?;
        for (i, &d) in space.cell_dofs(k).iter().enumerate() {
            out[d] += (0..cv.num_points()).map(|q| cv.weights[q] * cv.value(q, i)).sum::<f64>();
        }
    }
    Ok(out)
}

fn check_cell_params(space: &FESpace, params: &[f64], name: &str) -> Result<()> {
    let ncells = space.mesh().num_cells();
    if params.len() != ncells {
        return Err(Error::Usage(format!("{name}: {} values for {ncells} cells", params.len())));
    }
    if let Some(bad) = params.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::config_key(name, format!("parameter must be finite and nonnegative, got {bad}")));
    }
    Ok(())
}

fn check_fluct(space: &FESpace, fluct: &FluctuationOperator) -> Result<()> {
    let fs = fluct.field_space();
    if !space.same_mesh(fs) || space.degree() != fs.degree() {
        return Err(Error::Usage("fluctuation operator was built for a different space".into()));
    }
    Ok(())
}
