//! Stabilized three-field finite element solver for steady Darcy flow in
//! discrete fracture networks.
//!
//! Each fracture is meshed independently; traces (fracture intersections) carry
//! a flux multiplier per adjacent fracture and a single-valued trace head.
//! Residual-based stabilization removes the need for compatible meshes.

pub mod analysis;
pub mod bench;
pub mod discretization;
pub mod error;
pub mod fem;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod meshing;
pub mod quadrature;
pub mod solver;
pub mod stabilization;
pub mod vecmath;

pub use error::{DfnError, Result};
