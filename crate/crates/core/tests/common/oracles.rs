//! Every assembled matrix against a dense level-0 reference built from
//! monomial bases and a collapsed Gauss rule.

use std::sync::Arc;

use super::{dense, max_entry_difference, triangle_rule, LocalBasis};
use nslps::assembly::*;
use nslps::fem::FESpace;
use nslps::lps::FluctuationOperator;
use nslps::mesh::{GridKind, Point};
use nslps::stabilization::VelocityLpsKind;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-12;
const POINTS: usize = 8;

struct Case {
    space: Arc<FESpace>,
    /// per cell: basis, quadrature points and weights, basis samples
    cells: Vec<CellData>,
}

struct CellData {
    dofs: Vec<usize>,
    rule: Vec<(Point, f64)>,
    values: Vec<Vec<f64>>,
    grads: Vec<Vec<[f64; 2]>>,
}

fn cases() -> Vec<Case> {
    let mut out = Vec::new();
    for grid in [GridKind::Regular, GridKind::Irregular] {
        for degree in [2, 3] {
            let mesh = Arc::new(grid.build(0));
            let space = Arc::new(FESpace::new(&mesh, degree).unwrap());
            let cells = (0..mesh.num_cells())
                .map(|k| {
                    let basis = LocalBasis::for_cell(&space, k);
                    let rule = triangle_rule(mesh.cell_points(k), POINTS);
                    let (values, grads) = rule.iter().map(|&(p, _)| basis.eval(p)).unzip();
                    CellData { dofs: space.cell_dofs(k).to_vec(), rule, values, grads }
                })
                .collect();
            out.push(Case { space, cells });
        }
    }
    out
}

fn bound(reference: &[Vec<f64>]) -> f64 {
    TOL * reference.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()))
}

type Check = Result<(), String>;

fn check(name: &str, space: &FESpace, got: &nslps::sparse::CsrMatrix, reference: &[Vec<f64>]) -> Check {
    let diff = max_entry_difference(got, reference);
    if diff <= bound(reference) {
        Ok(())
    } else {
        Err(format!("{name}, degree {}: entry difference {diff:e}", space.degree()))
    }
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn mass_and_stiffness() -> Check {
    for case in cases() {
        let n = case.space.num_dofs();
        let (mut m, mut a) = (dense(n, n), dense(n, n));
        for c in &case.cells {
            for (q, &(_, w)) in c.rule.iter().enumerate() {
                for (i, &di) in c.dofs.iter().enumerate() {
                    for (j, &dj) in c.dofs.iter().enumerate() {
                        m[di][dj] += w * c.values[q][i] * c.values[q][j];
                        let (gi, gj) = (c.grads[q][i], c.grads[q][j]);
                        a[di][dj] += 0.7 * w * (gi[0] * gj[0] + gi[1] * gj[1]);
                    }
                }
            }
        }
        check("mass", &case.space, &assemble_mass(&case.space).unwrap(), &m)?;
        check("stiffness", &case.space, &assemble_stiffness(&case.space, 0.7).unwrap(), &a)?;
    }
    Ok(())
}

pub fn skew_convection() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in cases() {
        let n = case.space.num_dofs();
        let w = random_vec(&mut rng, 2 * n);
        let mut reference = dense(n, n);
        for c in &case.cells {
            for (q, &(_, wq)) in c.rule.iter().enumerate() {
                let wx: f64 = c.dofs.iter().enumerate().map(|(i, &d)| w[d] * c.values[q][i]).sum();
                let wy: f64 = c.dofs.iter().enumerate().map(|(i, &d)| w[n + d] * c.values[q][i]).sum();
                let adv: Vec<f64> = c.grads[q].iter().map(|g| wx * g[0] + wy * g[1]).collect();
                for (i, &di) in c.dofs.iter().enumerate() {
                    for (j, &dj) in c.dofs.iter().enumerate() {
                        reference[di][dj] += 0.5 * wq * (adv[j] * c.values[q][i] - adv[i] * c.values[q][j]);
                    }
                }
            }
        }
        check("convection", &case.space, &assemble_convection(&case.space, &w).unwrap(), &reference)?;
    }
    Ok(())
}

pub fn graddiv_and_divergence_coupling() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in cases() {
        let n = case.space.num_dofs();
        let mu: Vec<f64> = (0..case.cells.len()).map(|_| rng.gen_range(0.1..2.0)).collect();
        let mut g = dense(2 * n, 2 * n);
        let mut d = dense(n, 2 * n);
        for (k, c) in case.cells.iter().enumerate() {
            for (q, &(_, w)) in c.rule.iter().enumerate() {
                for (i, &di) in c.dofs.iter().enumerate() {
                    for (j, &dj) in c.dofs.iter().enumerate() {
                        for a in 0..2 {
                            d[di][a * n + dj] += w * c.grads[q][j][a] * c.values[q][i];
                            for b in 0..2 {
                                g[a * n + di][b * n + dj] += mu[k] * w * c.grads[q][i][a] * c.grads[q][j][b];
                            }
                        }
                    }
                }
            }
        }
        check("grad-div", &case.space, &assemble_graddiv(&case.space, &mu).unwrap(), &g)?;
        check("divergence", &case.space, &assemble_div_coupling(&case.space, &case.space).unwrap(), &d)?;
    }
    Ok(())
}

/// Fluctuation of the gradient of every global basis function at every
/// reference quadrature point: `[cell][q][dof]`.
fn reference_fluctuations(case: &Case) -> Vec<Vec<Vec<[f64; 2]>>> {
    let space = &case.space;
    let mesh = space.mesh();
    let n = space.num_dofs();
    let target = FESpace::new(mesh, space.degree() - 1).unwrap();
    let owners: Vec<usize> = target.dof_cells().iter().map(|cells| cells[0]).collect();
    // sigma(grad phi_j) at each target dof: gradient on the owner cell
    let mut nodal = vec![vec![[0.0; 2]; n]; target.num_dofs()];
    for (a, &k) in owners.iter().enumerate() {
        let basis = LocalBasis::for_cell(space, k);
        let (_, g) = basis.eval(target.dof_coords()[a]);
        for (i, &d) in space.cell_dofs(k).iter().enumerate() {
            nodal[a][d] = g[i];
        }
    }
    case.cells
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let target_basis = LocalBasis::for_cell(&target, k);
            c.rule
                .iter()
                .enumerate()
                .map(|(q, &(p, _))| {
                    let (psi, _) = target_basis.eval(p);
                    let mut f = vec![[0.0; 2]; n];
                    for (i, &d) in c.dofs.iter().enumerate() {
                        f[d] = c.grads[q][i];
                    }
                    for (s, &a) in target.cell_dofs(k).iter().enumerate() {
                        for (j, fj) in f.iter_mut().enumerate() {
                            fj[0] -= psi[s] * nodal[a][j][0];
                            fj[1] -= psi[s] * nodal[a][j][1];
                        }
                    }
                    f
                })
                .collect()
        })
        .collect()
}

pub fn local_projection_stabilizers() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for case in cases() {
        let space = &case.space;
        let n = space.num_dofs();
        let tau: Vec<f64> = (0..case.cells.len()).map(|_| rng.gen_range(0.1..2.0)).collect();
        let fl = reference_fluctuations(&case);
        let (mut sp, mut sg, mut sd) = (dense(n, n), dense(2 * n, 2 * n), dense(2 * n, 2 * n));
        for (k, c) in case.cells.iter().enumerate() {
            for (q, &(_, w)) in c.rule.iter().enumerate() {
                let f = &fl[k][q];
                for i in 0..n {
                    for j in 0..n {
                        let dot = f[i][0] * f[j][0] + f[i][1] * f[j][1];
                        sp[i][j] += tau[k] * w * dot;
                        sg[i][j] += tau[k] * w * dot;
                        sg[n + i][n + j] += tau[k] * w * dot;
                        for a in 0..2 {
                            for b in 0..2 {
                                sd[a * n + i][b * n + j] += tau[k] * w * f[i][a] * f[j][b];
                            }
                        }
                    }
                }
            }
        }
        let fluct = FluctuationOperator::new(space, &default_rule(space)).unwrap();
        check("pressure LPS", space, &assemble_pressure_lps(space, &fluct, &tau).unwrap(), &sp)?;
        let grad = assemble_velocity_lps(space, &fluct, VelocityLpsKind::Gradient, &tau).unwrap();
        check("gradient LPS", space, &grad, &sg)?;
        let div = assemble_velocity_lps(space, &fluct, VelocityLpsKind::Divergence, &tau).unwrap();
        check("divergence LPS", space, &div, &sd)?;
    }
    Ok(())
}

pub fn load_vector_and_mean_functional() -> Check {
    let f = |t: f64, p: Point| [p[0] * p[0] * p[1] + t, p[0] - p[1].powi(3)];
    for case in cases() {
        let n = case.space.num_dofs();
        let (mut load, mut mean) = (vec![0.0; 2 * n], vec![0.0; n]);
        for c in &case.cells {
            for (q, &(p, w)) in c.rule.iter().enumerate() {
                let fv = f(0.25, p);
                for (i, &d) in c.dofs.iter().enumerate() {
                    load[d] += w * fv[0] * c.values[q][i];
                    load[n + d] += w * fv[1] * c.values[q][i];
                    mean[d] += w * c.values[q][i];
                }
            }
        }
        let got = assemble_load(&case.space, f, 0.25).unwrap();
        let diff = got.iter().zip(&load).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if diff > TOL {
            return Err(format!("load: {diff:e}"));
        }
        let got = mean_functional(&case.space).unwrap();
        let diff = got.iter().zip(&mean).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if diff > TOL {
            return Err(format!("mean: {diff:e}"));
        }
    }
    Ok(())
}

pub fn all() -> Check {
    mass_and_stiffness()?;
    skew_convection()?;
    graddiv_and_divergence_coupling()?;
    local_projection_stabilizers()?;
    load_vector_and_mean_functional()
}
