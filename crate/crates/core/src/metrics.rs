//! Error norms, per-step records, composite errors and observed rates.

use std::sync::Arc;

use crate::error::Result;
use crate::fem::{quadrature_for, CellValues, FESpace, Tabulation};
use crate::mms::ExactSolution;
use crate::solver::{Discretization, State, StepStats};

/// Norms of one state. Velocity quantities are taken at `state.t`, pressure
/// quantities at `state.pressure_time`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ErrorNorms {
    pub u_l2: f64,
    /// `|grad (u - u_h)|`
    pub u_h1: f64,
    /// `|div u_h|`
    pub div_l2: f64,
    pub p_l2: f64,
    /// `|grad (p - p_h)|`
    pub p_h1: f64,
}

fn metric_tabulation(space: &FESpace) -> Tabulation {
    let degree = (3 * space.degree() + 2).min(crate::fem::MAX_QUADRATURE_DEGREE);
    Tabulation::new(space, &quadrature_for(degree).expect("degree within range"))
}

pub fn error_norms(space: &FESpace, state: &State, exact: &dyn ExactSolution) -> Result<ErrorNorms> {
    let n = space.num_dofs();
    let tab = metric_tabulation(space);
    let mut cv = CellValues::empty();
    let mut sums = [0.0; 5];
    let mut local = [Vec::new(), Vec::new(), Vec::new()];
    for k in 0..space.mesh().num_cells() {
        tab.fill(space, k, &mut cv)?;
        let dofs = space.cell_dofs(k);
        for (c, buf) in local.iter_mut().enumerate() {
            let field = match c {
                0 => &state.velocity[..n],
                1 => &state.velocity[n..],
                _ => &state.pressure[..],
            };
            buf.clear();
            buf.extend(dofs.iter().map(|&d| field[d]));
        }
        for q in 0..cv.num_points() {
            let (w, x) = (cv.weights[q], cv.points[q]);
            let u = exact.velocity(state.t, x);
            let gu = exact.velocity_gradient(state.t, x);
            let mut div = 0.0;
            for c in 0..2 {
                let (v, g) = cv.eval(q, &local[c]);
                sums[0] += w * (u[c] - v).powi(2);
                sums[1] += w * ((gu[c][0] - g[0]).powi(2) + (gu[c][1] - g[1]).powi(2));
                div += g[c];
            }
            sums[2] += w * div * div;
            let (ph, gph) = cv.eval(q, &local[2]);
            let p = exact.pressure(state.pressure_time, x);
            let gp = exact.pressure_gradient(state.pressure_time, x);
            sums[3] += w * (p - ph).powi(2);
            sums[4] += w * ((gp[0] - gph[0]).powi(2) + (gp[1] - gph[1]).powi(2));
        }
    }
    let [a, b, c, d, e] = sums.map(f64::sqrt);
    Ok(ErrorNorms { u_l2: a, u_h1: b, div_l2: c, p_l2: d, p_h1: e })
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub norms: ErrorNorms,
    /// `|fluct grad (I_h p - p_h)|^2_{tau_p}`
    pub p_fluct: f64,
    /// velocity LPS energy of `I_h u - u_h` (gradient or divergence)
    pub u_fluct: f64,
    pub picard_iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub level: usize,
    /// `max_K h_K`
    pub h: f64,
    /// `h_0 2^-level`
    pub nominal_h: f64,
    pub nu: f64,
    pub dt: f64,
    pub records: Vec<StepRecord>,
    pub p_primitive: f64,
}

impl RunReport {
    pub fn final_u_l2(&self) -> f64 {
        self.records.last().map_or(0.0, |r| r.norms.u_l2)
    }

    fn sum(&self, f: impl Fn(&StepRecord) -> f64) -> f64 {
        self.dt * self.records.iter().map(f).sum::<f64>()
    }

    /// `Δt Σ |grad (u - u_h)|^2`
    pub fn u_h1_sum(&self) -> f64 {
        self.sum(|r| r.norms.u_h1.powi(2))
    }

    /// `Δt Σ |div u_h|^2`
    pub fn div_sum(&self) -> f64 {
        self.sum(|r| r.norms.div_l2.powi(2))
    }

    /// `Δt Σ |grad (p - p_h)|^2`
    pub fn p_grad_sum(&self) -> f64 {
        self.sum(|r| r.norms.p_h1.powi(2))
    }

    pub fn p_fluct_sum(&self) -> f64 {
        self.sum(|r| r.p_fluct)
    }

    pub fn u_fluct_sum(&self) -> f64 {
        self.sum(|r| r.u_fluct)
    }

    pub fn picard_iters_max(&self) -> usize {
        self.records.iter().map(|r| r.picard_iterations).max().unwrap_or(0)
    }
}

/// `|u - u_h|^2(T) + ν Δt Σ|grad(u - u_h)|^2 + τ_p Δt Σ|grad(p - p_h)|^2 + μ Δt Σ|div u_h|^2`
pub fn composite_error_gd(report: &RunReport, tau_p: f64, mu: f64, nu: f64) -> f64 {
    report.final_u_l2().powi(2) + nu * report.u_h1_sum() + tau_p * report.p_grad_sum() + mu * report.div_sum()
}

/// Composite error with interpolant-based fluctuation terms in place of
/// the grad-div and pressure-gradient terms.
pub fn composite_error_lps(report: &RunReport, nu: f64) -> f64 {
    report.final_u_l2().powi(2) + nu * report.u_h1_sum() + report.p_fluct_sum() + report.u_fluct_sum()
}

/// Collects step records during a run and accumulates the pressure error
/// primitive `Δt Σ_j (p^j - p_h^j)` pointwise at quadrature points.
pub struct ErrorRecorder<'a> {
    disc: &'a Discretization,
    exact: &'a dyn ExactSolution,
    dt: f64,
    tab: Tabulation,
    primitive: Vec<f64>,
    records: Vec<StepRecord>,
}

impl<'a> ErrorRecorder<'a> {
    pub fn new(disc: &'a Discretization, exact: &'a dyn ExactSolution, dt: f64) -> Self {
        let space = disc.space();
        let tab = metric_tabulation(space);
        let primitive = vec![0.0; space.mesh().num_cells() * tab.num_points()];
        ErrorRecorder { disc, exact, dt, tab, primitive, records: Vec::new() }
    }

    pub fn observe(&mut self, state: &State, stats: &StepStats) -> Result<()> {
        let space: &Arc<FESpace> = self.disc.space();
        let norms = error_norms(space, state, self.exact)?;

        let pi = space.interpolate(|x| self.exact.pressure(state.pressure_time, x));
        let dp: Vec<f64> = pi.iter().zip(&state.pressure).map(|(a, b)| a - b).collect();
        let p_fluct = self.disc.pressure_lps().quadratic_form(&dp);
        let u_fluct = match self.disc.velocity_lps() {
            Some(s) => {
                let ui = space.interpolate_vector(|x| self.exact.velocity(state.t, x));
                let du: Vec<f64> = ui.iter().zip(&state.velocity).map(|(a, b)| a - b).collect();
                s.quadratic_form(&du)
            }
            None => 0.0,
        };

        let nq = self.tab.num_points();
        let mut cv = CellValues::empty();
        let mut local = Vec::new();
        for k in 0..space.mesh().num_cells() {
            self.tab.fill(space, k, &mut cv)?;
            local.clear();
            local.extend(space.cell_dofs(k).iter().map(|&d| state.pressure[d]));
            for q in 0..nq {
                let (ph, _) = cv.eval(q, &local);
                self.primitive[k * nq + q] += self.dt * (self.exact.pressure(state.pressure_time, cv.points[q]) - ph);
            }
        }

        self.records.push(StepRecord {
            t: state.t,
            norms,
            p_fluct: p_fluct.max(0.0),
            u_fluct: u_fluct.max(0.0),
            picard_iterations: stats.iterations,
        });
        Ok(())
    }

    pub fn records(&self) -> &[StepRecord] {
        &self.records
    }

    /// `|Δt Σ_j (p^j - p_h^j)|` over the steps observed so far.
    pub fn pressure_primitive_error(&self) -> Result<f64> {
        let space = self.disc.space();
        let nq = self.tab.num_points();
        let mut cv = CellValues::empty();
        let mut sum = 0.0;
        for k in 0..space.mesh().num_cells() {
            self.tab.fill(space, k, &mut cv)?;
            for q in 0..nq {
                sum += cv.weights[q] * self.primitive[k * nq + q].powi(2);
            }
        }
        Ok(sum.sqrt())
    }

    pub fn finish(self, level: usize, nominal_h: f64) -> Result<RunReport> {
        let p_primitive = self.pressure_primitive_error()?;
        Ok(RunReport {
            level,
            h: self.disc.space().mesh().max_diameter(),
            nominal_h,
            nu: self.disc.nu(),
            dt: self.dt,
            records: self.records,
            p_primitive,
        })
    }
}

/// `log2(e_l / e_{l+1})` for consecutive entries; `None` where a value is
/// zero or not finite.
pub fn convergence_rates(values: &[f64]) -> Vec<Option<f64>> {
    values
        .windows(2)
        .map(|w| {
            let r = (w[0] / w[1]).log2();
            (w[0] > 0.0 && w[1] > 0.0 && r.is_finite()).then_some(r)
        })
        .collect()
}
