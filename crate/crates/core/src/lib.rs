//! Equal-order finite element discretizations of the evolutionary
//! incompressible Navier-Stokes equations on the unit square, stabilized by
//! local projection of pressure and velocity gradients (or divergences) and
//! optionally by global grad-div, together with the manufactured-solution
//! harness used to measure their convergence rates.

pub mod assembly;
pub mod error;
pub mod experiment;
pub mod fem;
pub mod lps;
pub mod mesh;
pub mod metrics;
pub mod mms;
pub mod solver;
pub mod sparse;
pub mod stabilization;

pub use error::{Error, Result};
