//! θ-scheme time stepping with Picard linearization of the convection.
//!
//! Unknowns of one step are `[u_x; u_y; p; lambda]`. The momentum rows are
//!
//! ```text
//! M u + θΔt (νA + N(w) + G + S_u) u - Δt D^T p
//!     = M u^n - (1-θ)Δt (νA + N(u^n) + G + S_u) u^n + Δt (θ f^{n+1} + (1-θ) f^n)
//! ```
//!
//! with Dirichlet rows replaced by the interpolated boundary velocity. The
//! continuity rows read `Δt (D u + S_p p) + m lambda = 0` and the last row
//! `m . p = 0` fixes the pressure mean. The bordered system is solved with a
//! sparse factorization of the unbordered matrix. The pressure is implicit
//! in both schemes, so for Crank-Nicolson it approximates the pressure at
//! the midpoint of the step; [`State::pressure_time`] records that time.

mod linear;

use std::sync::Arc;

pub use linear::{solve_linear, LinearSolver, RELATIVE_RESIDUAL_LIMIT};

use crate::assembly::{
    assemble_div_coupling, assemble_graddiv, assemble_load, assemble_mass, assemble_pressure_lps, assemble_stiffness,
    assemble_velocity_lps, default_rule, mean_functional, ConvectionAssembler,
};
use crate::error::{Error, Result};
use crate::fem::FESpace;
use crate::lps::FluctuationOperator;
use crate::mms::FlowProblem;
use crate::sparse::{CsrMatrix, TripletBuilder};
use crate::stabilization::{StabilizationConfig, VelocityLpsKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeScheme {
    ImplicitEuler,
    CrankNicolson,
}

impl TimeScheme {
    pub fn theta(self) -> f64 {
        match self {
            TimeScheme::ImplicitEuler => 1.0,
            TimeScheme::CrankNicolson => 0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TimeScheme::ImplicitEuler => "implicit-euler",
            TimeScheme::CrankNicolson => "crank-nicolson",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "implicit-euler" | "euler" | "be" => Ok(TimeScheme::ImplicitEuler),
            "crank-nicolson" | "cn" => Ok(TimeScheme::CrankNicolson),
            _ => Err(Error::config_key("scheme", format!("unknown scheme `{s}` (expected implicit-euler or crank-nicolson)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    dt: f64,
    t_end: f64,
    scheme: TimeScheme,
    steps: usize,
}

impl TimeGrid {
    pub fn new(dt: f64, t_end: f64, scheme: TimeScheme) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::config_key("dt", format!("time step must be positive, got {dt}")));
        }
        if !(t_end.is_finite() && t_end > 0.0) {
            return Err(Error::config_key("tend", format!("final time must be positive, got {t_end}")));
        }
        let steps = (t_end / dt).round();
        if (steps * dt - t_end).abs() > 1e-10 || steps < 1.0 {
            return Err(Error::config_key("tend", format!("final time {t_end} is not a multiple of dt = {dt}")));
        }
        Ok(TimeGrid { dt, t_end, scheme, steps: steps as usize })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn scheme(&self) -> TimeScheme {
        self.scheme
    }

    pub fn theta(&self) -> f64 {
        self.scheme.theta()
    }

    pub fn num_steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardConfig {
    /// bound on the Euclidean norm of the nonlinear residual
    pub tolerance: f64,
    pub max_iterations: usize,
    /// move the gradient-LPS term of the previous iterate to the right-hand side
    pub lag_fluctuation_gradient: bool,
    /// `false` drops the convection term (Stokes mode)
    pub convection: bool,
    /// factor the step matrix once per step, at the start value, and apply
    /// it to the residual in every iteration
    pub freeze_matrix: bool,
}

impl Default for PicardConfig {
    fn default() -> Self {
        PicardConfig { tolerance: 1e-13, max_iterations: 50, lag_fluctuation_gradient: false, convection: true, freeze_matrix: false }
    }
}

impl PicardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::config_key("picard_tol", format!("tolerance must be positive, got {}", self.tolerance)));
        }
        if self.max_iterations == 0 {
            return Err(Error::config_key("picard_max_iter", "at least one iteration is needed"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub t: f64,
    /// block layout `[x; y]`
    pub velocity: Vec<f64>,
    pub pressure: Vec<f64>,
    /// time the pressure approximates (`t - (1-θ)Δt`)
    pub pressure_time: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepStats {
    /// number of linear solves
    pub iterations: usize,
    /// residual norm before each solve and after the last one
    pub residuals: Vec<f64>,
}

/// All time-independent matrices of one discretization.
pub struct Discretization {
    space: Arc<FESpace>,
    nu: f64,
    stabilization: StabilizationConfig,
    mass: CsrMatrix,
    viscous: CsrMatrix,
    graddiv: Option<CsrMatrix>,
    velocity_lps: Option<CsrMatrix>,
    pressure_lps: CsrMatrix,
    div: CsrMatrix,
    mean: Vec<f64>,
    convection: ConvectionAssembler,
    fluct: FluctuationOperator,
}

impl Discretization {
    pub fn new(space: &Arc<FESpace>, nu: f64, stabilization: &StabilizationConfig) -> Result<Self> {
        if !(nu.is_finite() && nu > 0.0) {
            return Err(Error::config_key("nu", format!("viscosity must be positive, got {nu}")));
        }
        stabilization.validate()?;
        let mesh = space.mesh();
        let fluct = FluctuationOperator::new(space, &default_rule(space))?;
        let graddiv = if stabilization.mu.is_zero() {
            None
        } else {
            Some(assemble_graddiv(space, &stabilization.mu.per_cell(mesh))?)
        };
        let velocity_lps = match stabilization.method.velocity_lps() {
            Some(kind) if !stabilization.tau_u.is_zero() => {
                Some(assemble_velocity_lps(space, &fluct, kind, &stabilization.tau_u.per_cell(mesh))?)
            }
            _ => None,
        };
        Ok(Discretization {
            space: Arc::clone(space),
            nu,
            stabilization: *stabilization,
            mass: assemble_mass(space)?.block_diag2(),
            viscous: assemble_stiffness(space, nu)?.block_diag2(),
            graddiv,
            velocity_lps,
            pressure_lps: assemble_pressure_lps(space, &fluct, &stabilization.tau_p.per_cell(mesh))?,
            div: assemble_div_coupling(space, space)?,
            mean: mean_functional(space)?,
            convection: ConvectionAssembler::new(space),
            fluct,
        })
    }

    pub fn space(&self) -> &Arc<FESpace> {
        &self.space
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn stabilization(&self) -> &StabilizationConfig {
        &self.stabilization
    }

    pub fn fluctuation(&self) -> &FluctuationOperator {
        &self.fluct
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn pressure_lps(&self) -> &CsrMatrix {
        &self.pressure_lps
    }

    pub fn velocity_lps(&self) -> Option<&CsrMatrix> {
        self.velocity_lps.as_ref()
    }

    pub fn div(&self) -> &CsrMatrix {
        &self.div
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn convection(&self) -> &ConvectionAssembler {
        &self.convection
    }

    /// `νA + G + S_u` on the vector space.
    fn velocity_operator(&self, include_lps: bool) -> CsrMatrix {
        let mut op = self.viscous.clone();
        if let Some(g) = &self.graddiv {
            op = op.add(g);
        }
        if include_lps {
            if let Some(s) = &self.velocity_lps {
                op = op.add(s);
            }
        }
        op
    }

    fn lags_gradient_lps(&self, picard: &PicardConfig) -> bool {
        picard.lag_fluctuation_gradient
            && self.velocity_lps.is_some()
            && self.stabilization.method.velocity_lps() == Some(VelocityLpsKind::Gradient)
    }

    pub fn initial_state(&self, problem: &dyn FlowProblem) -> State {
        State {
            t: 0.0,
            velocity: self.space.interpolate_vector(|p| problem.initial_velocity(p)),
            pressure: vec![0.0; self.space.num_dofs()],
            pressure_time: 0.0,
        }
    }
}

/// Pressure unknown whose diagonal carries the regularizing `+1`.
fn pinned(n: usize) -> usize {
    2 * n
}

/// The step system for a fixed time grid: constant matrix values with
/// Dirichlet rows applied, and where the convection entries go.
pub struct Stepper<'a> {
    disc: &'a Discretization,
    grid: TimeGrid,
    picard: PicardConfig,
    /// step matrix plus `1` at the pinned pressure diagonal
    base: CsrMatrix,
    /// mean functional on the pressure block: multiplier column and last row
    border: Vec<f64>,
    /// positions of the scalar convection entries in the x and y blocks,
    /// `None` on Dirichlet rows
    conv_pos: Vec<[Option<usize>; 2]>,
    explicit: Option<CsrMatrix>,
    lagged: Option<CsrMatrix>,
    is_dirichlet: Vec<bool>,
    solver: LinearSolver,
}

impl<'a> Stepper<'a> {
    pub fn new(disc: &'a Discretization, grid: TimeGrid, picard: PicardConfig) -> Result<Self> {
        picard.validate()?;
        let space = &disc.space;
        let n = space.num_dofs();
        let size = 3 * n;
        let (theta, dt) = (grid.theta(), grid.dt());
        let lag = disc.lags_gradient_lps(&picard);

        let mut is_dirichlet = vec![false; 2 * n];
        for &d in space.boundary_dofs() {
            is_dirichlet[d] = true;
            is_dirichlet[n + d] = true;
        }

        let implicit = disc.mass.add(&disc.velocity_operator(!lag).scaled(theta * dt));
        let conv_pattern = disc.convection.pattern_matrix();
        let div_t = disc.div.transpose();
        let mut b = TripletBuilder::new(size, size);
        for r in 0..2 * n {
            if is_dirichlet[r] {
                b.push(r, r, 1.0);
                continue;
            }
            for (j, v) in implicit.row(r) {
                b.push(r, j, v);
            }
            let (c, i) = (r / n, r % n);
            for (j, _) in conv_pattern.row(i) {
                b.push(r, c * n + j, 0.0);
            }
            for (j, v) in div_t.row(r) {
                b.push(r, 2 * n + j, -dt * v);
            }
        }
        for i in 0..n {
            for (j, v) in disc.div.row(i) {
                b.push(2 * n + i, j, dt * v);
            }
            for (j, v) in disc.pressure_lps.row(i) {
                b.push(2 * n + i, 2 * n + j, dt * v);
            }
        }
        // regularizes the constant-pressure kernel; removed again by the border
        b.push(pinned(n), pinned(n), 1.0);
        let base = b.build();
        let mut border = vec![0.0; size];
        border[2 * n..].copy_from_slice(&disc.mean);

        let mut conv_pos = Vec::with_capacity(conv_pattern.nnz());
        for i in 0..n {
            for (j, _) in conv_pattern.row(i) {
                let pos = |c: usize| {
                    let r = c * n + i;
                    (!is_dirichlet[r]).then(|| base.position(r, c * n + j).expect("convection entry in pattern"))
                };
                conv_pos.push([pos(0), pos(1)]);
            }
        }

        let explicit = (theta < 1.0).then(|| disc.velocity_operator(true));
        let lagged = if lag { disc.velocity_lps.clone() } else { None };
        Ok(Stepper {
            disc,
            grid,
            picard,
            base,
            border,
            conv_pos,
            explicit,
            lagged,
            is_dirichlet,
            solver: LinearSolver::new(),
        })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    /// Step matrix with the convection by `w` added (Dirichlet rows untouched).
    fn matrix_with_convection(&self, w: &[f64]) -> Result<CsrMatrix> {
        let mut a = self.base.clone();
        if self.picard.convection {
            let scale = self.grid.theta() * self.grid.dt();
            let nw = self.disc.convection.assemble(w)?;
            let values = a.values_mut();
            for (v, pos) in nw.values().iter().zip(&self.conv_pos) {
                for p in pos.iter().flatten() {
                    values[*p] += scale * v;
                }
            }
        }
        Ok(a)
    }

    fn momentum_residual_part(&self, op: &CsrMatrix, u: &[f64], out: &mut [f64], scale: f64) {
        let y = op.mul_vec(u);
        for (r, yr) in y.iter().enumerate() {
            if !self.is_dirichlet[r] {
                out[r] += scale * yr;
            }
        }
    }

    fn right_hand_side(&self, problem: &dyn FlowProblem, state: &State) -> Result<Vec<f64>> {
        let space = &*self.disc.space;
        let n = space.num_dofs();
        let (theta, dt) = (self.grid.theta(), self.grid.dt());
        let t_new = state.t + dt;
        let mut rhs = vec![0.0; 3 * n];
        self.disc.mass.mul_vec_into(&state.velocity, &mut rhs[..2 * n]);
        let f_new = assemble_load(space, |t, p| problem.forcing(t, p), t_new)?;
        for (r, f) in f_new.iter().enumerate() {
            rhs[r] += theta * dt * f;
        }
        if theta < 1.0 {
            let f_old = assemble_load(space, |t, p| problem.forcing(t, p), state.t)?;
            for (r, f) in f_old.iter().enumerate() {
                rhs[r] += (1.0 - theta) * dt * f;
            }
            let explicit = self.explicit.as_ref().expect("explicit operator for theta < 1");
            let mut old = vec![0.0; 2 * n];
            explicit.mul_vec_into(&state.velocity, &mut old);
            if self.picard.convection {
                let nu_old = self.disc.convection.assemble(&state.velocity)?;
                let c = nu_old.mul_vec(&state.velocity[..n]);
                let d = nu_old.mul_vec(&state.velocity[n..]);
                for i in 0..n {
                    old[i] += c[i];
                    old[n + i] += d[i];
                }
            }
            for r in 0..2 * n {
                rhs[r] -= (1.0 - theta) * dt * old[r];
            }
        }
        for &d in space.boundary_dofs() {
            let g = problem.boundary_velocity(t_new, space.dof_coords()[d]);
            rhs[d] = g[0];
            rhs[n + d] = g[1];
        }
        Ok(rhs)
    }

    /// One θ-step from `state` with Picard iterations.
    pub fn advance(&mut self, problem: &dyn FlowProblem, state: &State) -> Result<(State, StepStats)> {
        let n = self.disc.space.num_dofs();
        let (theta, dt) = (self.grid.theta(), self.grid.dt());
        let rhs = self.right_hand_side(problem, state)?;

        let mut x = vec![0.0; 3 * n];
        x[..2 * n].copy_from_slice(&state.velocity);
        x[2 * n..].copy_from_slice(&state.pressure);
        for &d in self.disc.space.boundary_dofs() {
            x[d] = rhs[d];
            x[n + d] = rhs[n + d];
        }
        let mut multiplier = 0.0;

        let frozen_matrix = if self.picard.freeze_matrix { Some(self.matrix_with_convection(&x[..2 * n])?) } else { None };
        let frozen_lu = match &frozen_matrix {
            Some(a) => Some(self.solver.factor(a)?),
            None => None,
        };
        let frozen = match &frozen_lu {
            Some(lu) => Some(lu.bordered(pinned(n), &self.border, &self.border)?),
            None => None,
        };

        let mut stats = StepStats::default();
        loop {
            let a = self.matrix_with_convection(&x[..2 * n])?;
            // residual of the full bordered operator; the lagged term is S_u x
            let mut ax = a.mul_vec(&x);
            ax[pinned(n)] -= x[pinned(n)];
            for (y, c) in ax.iter_mut().zip(&self.border) {
                *y += c * multiplier;
            }
            if let Some(s) = &self.lagged {
                self.momentum_residual_part(s, &x[..2 * n], &mut ax, theta * dt);
            }
            let mean: f64 = self.border.iter().zip(&x).map(|(c, v)| c * v).sum();
            let mut res: Vec<f64> = rhs.iter().zip(&ax).map(|(b, y)| b - y).collect();
            res.push(-mean);
            let residual = linear::norm(&res);
            stats.residuals.push(residual);
            if !residual.is_finite() {
                return Err(Error::PicardDiverged { iterations: stats.iterations, residual });
            }
            if residual < self.picard.tolerance {
                break;
            }
            if stats.iterations == self.picard.max_iterations {
                return Err(Error::PicardDiverged { iterations: stats.iterations, residual });
            }
            if let Some(f) = &frozen {
                let (dx, dl) = f.solve(&res[..3 * n], res[3 * n])?;
                x.iter_mut().zip(&dx).for_each(|(xi, d)| *xi += d);
                multiplier += dl;
                stats.iterations += 1;
                continue;
            }
            let mut b = rhs.clone();
            if let Some(s) = &self.lagged {
                self.momentum_residual_part(s, &x[..2 * n], &mut b, -theta * dt);
            }
            let factors = self.solver.factor(&a)?;
            (x, multiplier) = factors.solve_bordered(pinned(n), &self.border, &self.border, &b, 0.0)?;
            stats.iterations += 1;
        }

        let t = state.t + dt;
        let next = State {
            t,
            velocity: x[..2 * n].to_vec(),
            pressure: x[2 * n..].to_vec(),
            pressure_time: t - (1.0 - theta) * dt,
        };
        Ok((next, stats))
    }
}

/// One step from `state`; builds the step system on every call.
pub fn advance_step(
    disc: &Discretization,
    problem: &dyn FlowProblem,
    state: &State,
    grid: TimeGrid,
    picard: PicardConfig,
) -> Result<(State, StepStats)> {
    Stepper::new(disc, grid, picard)?.advance(problem, state)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `num_steps + 1` states starting with the interpolated initial data
    pub states: Vec<State>,
    pub stats: Vec<StepStats>,
}

/// Runs from `I_h u_0` to the final time, calling `observe` after every step.
/// Failures carry the number of the failing step.
pub fn run_with(
    disc: &Discretization,
    problem: &dyn FlowProblem,
    grid: TimeGrid,
    picard: PicardConfig,
    mut observe: impl FnMut(usize, &State, &StepStats) -> Result<()>,
) -> Result<State> {
    let mut stepper = Stepper::new(disc, grid, picard)?;
    let mut state = disc.initial_state(problem);
    for step in 1..=grid.num_steps() {
        let (next, stats) = stepper.advance(problem, &state).map_err(|e| Error::Run {
            level: disc.space.mesh().level(),
            nu: disc.nu,
            step,
            source: Box::new(e),
        })?;
        observe(step, &next, &stats)?;
        state = next;
    }
    Ok(state)
}

pub fn run(disc: &Discretization, problem: &dyn FlowProblem, grid: TimeGrid, picard: PicardConfig) -> Result<Trajectory> {
    let mut states = vec![disc.initial_state(problem)];
    let mut all_stats = Vec::with_capacity(grid.num_steps());
    run_with(disc, problem, grid, picard, |_, s, st| {
        states.push(s.clone());
        all_stats.push(st.clone());
        Ok(())
    })?;
    Ok(Trajectory { states, stats: all_stats })
}
