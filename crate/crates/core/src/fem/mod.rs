//! Continuous Lagrange spaces on triangles.

mod basis;
mod quadrature;
mod space;

pub use basis::ReferenceElement;
pub use quadrature::{quadrature_for, QuadratureRule, MAX_QUADRATURE_DEGREE};
pub use space::{build_space, CellGeometry, CellValues, FESpace, Tabulation};
