//! Closed-form manufactured solution on the unit square.
//!
//! ```text
//! u = cos(t) ( sin(pi x - 0.7) sin(pi y + 0.2),  cos(pi x - 0.7) cos(pi y + 0.2) )
//! p = cos(t) ( sin(x) cos(y) + (cos(1) - 1) sin(1) )
//! ```
//!
//! The forcing is `f = du/dt - nu lap(u) + (u . grad) u + grad p`, with every
//! derivative written out by hand.

use std::f64::consts::PI;

use crate::mesh::Point;

/// Data of an incompressible flow problem: forcing, Dirichlet velocity and
/// initial velocity.
pub trait FlowProblem: Sync {
    fn forcing(&self, t: f64, p: Point) -> [f64; 2];
    fn boundary_velocity(&self, t: f64, p: Point) -> [f64; 2];
    fn initial_velocity(&self, p: Point) -> [f64; 2] {
        self.boundary_velocity(0.0, p)
    }
}

/// Closed-form velocity and pressure that discrete solutions are measured
/// against.
pub trait ExactSolution: Sync {
    fn velocity(&self, t: f64, p: Point) -> [f64; 2];
    /// `[c][k] = d u_c / d x_k`
    fn velocity_gradient(&self, t: f64, p: Point) -> [[f64; 2]; 2];
    fn pressure(&self, t: f64, p: Point) -> f64;
    fn pressure_gradient(&self, t: f64, p: Point) -> [f64; 2];
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManufacturedSolution {
    pub nu: f64,
}

const SHIFT_X: f64 = -0.7;
const SHIFT_Y: f64 = 0.2;

impl ManufacturedSolution {
    pub fn new(nu: f64) -> Self {
        ManufacturedSolution { nu }
    }

    fn angles(x: f64, y: f64) -> (f64, f64, f64, f64) {
        let (sa, ca) = (PI * x + SHIFT_X).sin_cos();
        let (sb, cb) = (PI * y + SHIFT_Y).sin_cos();
        (sa, ca, sb, cb)
    }

    pub fn velocity(&self, t: f64, x: f64, y: f64) -> [f64; 2] {
        let c = t.cos();
        let (sa, ca, sb, cb) = Self::angles(x, y);
        [c * sa * sb, c * ca * cb]
    }

    pub fn pressure(&self, t: f64, x: f64, y: f64) -> f64 {
        let one = 1.0f64;
        t.cos() * (x.sin() * y.cos() + (one.cos() - 1.0) * one.sin())
    }

    pub fn velocity_dt(&self, t: f64, x: f64, y: f64) -> [f64; 2] {
        let s = -t.sin();
        let (sa, ca, sb, cb) = Self::angles(x, y);
        [s * sa * sb, s * ca * cb]
    }

    /// `grad[c][k] = d u_c / d x_k`
    pub fn velocity_gradient(&self, t: f64, x: f64, y: f64) -> [[f64; 2]; 2] {
        let c = t.cos() * PI;
        let (sa, ca, sb, cb) = Self::angles(x, y);
        [[c * ca * sb, c * sa * cb], [-c * sa * cb, -c * ca * sb]]
    }

    pub fn velocity_laplacian(&self, t: f64, x: f64, y: f64) -> [f64; 2] {
        let u = self.velocity(t, x, y);
        [-2.0 * PI * PI * u[0], -2.0 * PI * PI * u[1]]
    }

    pub fn pressure_gradient(&self, t: f64, x: f64, y: f64) -> [f64; 2] {
        let c = t.cos();
        [c * x.cos() * y.cos(), -c * x.sin() * y.sin()]
    }

    pub fn forcing_at(&self, t: f64, x: f64, y: f64) -> [f64; 2] {
        let dt = self.velocity_dt(t, x, y);
        let lap = self.velocity_laplacian(t, x, y);
        let u = self.velocity(t, x, y);
        let g = self.velocity_gradient(t, x, y);
        let gp = self.pressure_gradient(t, x, y);
        let mut f = [0.0; 2];
        for c in 0..2 {
            let conv = u[0] * g[c][0] + u[1] * g[c][1];
            f[c] = dt[c] - self.nu * lap[c] + conv + gp[c];
        }
        f
    }
}

impl FlowProblem for ManufacturedSolution {
    fn forcing(&self, t: f64, p: Point) -> [f64; 2] {
        self.forcing_at(t, p[0], p[1])
    }

    fn boundary_velocity(&self, t: f64, p: Point) -> [f64; 2] {
        self.velocity(t, p[0], p[1])
    }
}

impl ExactSolution for ManufacturedSolution {
    fn velocity(&self, t: f64, p: Point) -> [f64; 2] {
        ManufacturedSolution::velocity(self, t, p[0], p[1])
    }

    fn velocity_gradient(&self, t: f64, p: Point) -> [[f64; 2]; 2] {
        ManufacturedSolution::velocity_gradient(self, t, p[0], p[1])
    }

    fn pressure(&self, t: f64, p: Point) -> f64 {
        ManufacturedSolution::pressure(self, t, p[0], p[1])
    }

    fn pressure_gradient(&self, t: f64, p: Point) -> [f64; 2] {
        ManufacturedSolution::pressure_gradient(self, t, p[0], p[1])
    }
}

/// No forcing, no-slip walls, fluid at rest.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuiescentFlow;

impl FlowProblem for QuiescentFlow {
    fn forcing(&self, _t: f64, _p: Point) -> [f64; 2] {
        [0.0, 0.0]
    }

    fn boundary_velocity(&self, _t: f64, _p: Point) -> [f64; 2] {
        [0.0, 0.0]
    }
}
