//! Randomized property checks shared by the dedicated test targets and the
//! acceptance run. Each returns the first violation found.

use std::sync::Arc;

use nslps::assembly::assemble_convection;
use nslps::fem::FESpace;
use nslps::lps::QuasiInterpolant;
use nslps::mesh::GridKind;
use nslps::mms::ManufacturedSolution;
use nslps::solver::{run, Discretization, PicardConfig, TimeGrid, TimeScheme};
use nslps::stabilization::{Method, StabilizationConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::triangle_rule;

pub type Check = Result<(), String>;

fn space(grid: GridKind, level: usize, degree: usize) -> Arc<FESpace> {
    let mesh = Arc::new(grid.build(level));
    Arc::new(FESpace::new(&mesh, degree).unwrap())
}

/// `sigma* v = 0` for random continuous `v` of the projection degree.
pub fn fluctuation_annihilation(samples: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..samples {
        let grid = if i % 2 == 0 { GridKind::Regular } else { GridKind::Irregular };
        let degree = 2 + i % 2;
        let target = space(grid, 1, degree - 1);
        let v: Vec<f64> = (0..target.num_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let sigma = QuasiInterpolant::new(Arc::clone(&target));
        let projected = sigma.apply(|k, p| target.eval_function(&v, k, p).unwrap().0).map_err(|e| e.to_string())?;
        let diff = projected.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if diff > 1e-12 {
            return Err(format!("sample {i}: fluctuation {diff:e}"));
        }
    }
    Ok(())
}

/// `|v^T N(w) v|` relative to `sum |N_ij| |v_i| |v_j|`.
pub fn convection_skewness(samples: usize, seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spaces = [space(GridKind::Irregular, 1, 2), space(GridKind::Regular, 1, 3)];
    for i in 0..samples {
        let s = &spaces[i % 2];
        let n = s.num_dofs();
        let w: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let nw = assemble_convection(s, &w).map_err(|e| e.to_string())?;
        let form = nw.quadratic_form(&v);
        let mut scale = 0.0;
        for i in 0..n {
            for (j, a) in nw.row(i) {
                scale += a.abs() * v[i].abs() * v[j].abs();
            }
        }
        if form.abs() > 1e-12 * scale {
            return Err(format!("sample {i}: v^T N v = {form:e}, scale {scale:e}"));
        }
    }
    Ok(())
}

pub fn manufactured_divergence(points: usize, seed: u64) -> Check {
    let mms = ManufacturedSolution::new(1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..points {
        let (t, x, y) = (rng.gen_range(0.0..5.0), rng.gen::<f64>(), rng.gen::<f64>());
        let g = mms.velocity_gradient(t, x, y);
        let div = g[0][0] + g[1][1];
        if div.abs() > 1e-14 {
            return Err(format!("divergence {div:e} at ({t}, {x}, {y})"));
        }
    }
    Ok(())
}

pub fn manufactured_pressure_mean() -> Check {
    let mms = ManufacturedSolution::new(1e-6);
    let mesh = GridKind::Regular.build(2);
    for t in [0.0, 0.3, 1.7] {
        let mut mean = 0.0;
        for k in 0..mesh.num_cells() {
            for (p, w) in triangle_rule(mesh.cell_points(k), 10) {
                mean += w * mms.pressure(t, p[0], p[1]);
            }
        }
        if mean.abs() > 1e-10 {
            return Err(format!("t = {t}: pressure mean {mean:e}"));
        }
    }
    Ok(())
}

/// Fourth-order centred difference.
fn derivative(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (8.0 * (f(x + h) - f(x - h)) - (f(x + 2.0 * h) - f(x - 2.0 * h))) / (12.0 * h)
}

pub fn manufactured_forcing() -> Check {
    let h = 1e-3;
    for nu in [1.0, 1e-6] {
        let mms = ManufacturedSolution::new(nu);
        for &(t, x, y) in &[(0.0, 0.3, 0.6), (0.4, 0.9, 0.1), (1.3, 0.5, 0.5), (0.05, 0.02, 0.97)] {
            let f = mms.forcing_at(t, x, y);
            for c in 0..2 {
                let u = |tt: f64, xx: f64, yy: f64| mms.velocity(tt, xx, yy)[c];
                let dt = derivative(|s| u(s, x, y), t, h);
                let dx = derivative(|s| u(t, s, y), x, h);
                let dy = derivative(|s| u(t, x, s), y, h);
                let lap = derivative(|s| derivative(|r| u(t, r, y), s, h), x, h)
                    + derivative(|s| derivative(|r| u(t, x, r), s, h), y, h);
                let dp = if c == 0 {
                    derivative(|s| mms.pressure(t, s, y), x, h)
                } else {
                    derivative(|s| mms.pressure(t, x, s), y, h)
                };
                let w = mms.velocity(t, x, y);
                let expected = dt - nu * lap + w[0] * dx + w[1] * dy + dp;
                if (f[c] - expected).abs() > 1e-8 {
                    return Err(format!("nu {nu}, component {c} at ({t}, {x}, {y}): {} vs {expected}", f[c]));
                }
            }
        }
    }
    Ok(())
}

/// Every accepted step has residual below the tolerance and a zero-mean
/// pressure, for every method; a rerun reproduces all bits.
pub fn picard_acceptance_and_reproducibility() -> Check {
    let mms = ManufacturedSolution::new(1e-6);
    let grid = TimeGrid::new(0.01, 0.03, TimeScheme::CrankNicolson).unwrap();
    for method in Method::ALL {
        let go = || {
            let s = space(GridKind::Irregular, 1, 2);
            let disc = Discretization::new(&s, 1e-6, &StabilizationConfig::defaults(method)).unwrap();
            let traj = run(&disc, &mms, grid, PicardConfig::default()).map_err(|e| e.to_string())?;
            Ok::<_, String>((disc.mean().to_vec(), traj))
        };
        let (mean, a) = go()?;
        let (_, b) = go()?;
        for (st, s) in a.stats.iter().zip(&a.states[1..]) {
            let r = *st.residuals.last().unwrap();
            if r >= 1e-13 {
                return Err(format!("{method}: accepted residual {r:e}"));
            }
            let m: f64 = mean.iter().zip(&s.pressure).map(|(w, p)| w * p).sum();
            if m.abs() > 1e-10 {
                return Err(format!("{method}: pressure mean {m:e}"));
            }
        }
        let same = a.states.iter().zip(&b.states).all(|(x, y)| {
            x.velocity.iter().chain(&x.pressure).zip(y.velocity.iter().chain(&y.pressure)).all(|(p, q)| p.to_bits() == q.to_bits())
        });
        if !same {
            return Err(format!("{method}: rerun differs"));
        }
    }
    Ok(())
}
